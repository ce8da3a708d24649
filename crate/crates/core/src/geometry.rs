//! Feasible sets, their linear minimization oracles, and the shrunk set used
//! by the bandit learners.
//!
//! Every set is origin-centered: it contains the ball of radius `r` about the
//! origin and sits inside the ball of radius `R`, with diameter `D = 2R`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, norm, norm_sq};

/// Power iteration stops once successive right singular vectors move less than this.
pub const POWER_ITER_TOL: f64 = 1e-10;
pub const POWER_ITER_MAX: usize = 1000;
const POWER_ITER_SEED: u64 = 0x5e_ed0f_f00d;
const POWER_ITER_JITTER: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SetKind {
    L2Ball,
    Box,
    /// Probability simplex of scale `tau`, translated so its centroid is the origin.
    Simplex,
    /// Matrices of shape `rows x cols` (row-major) with nuclear norm at most `tau`.
    TraceNormBall {
        rows: usize,
        cols: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleSet {
    kind: SetKind,
    dimension: usize,
    radius: f64,
    inner_radius: f64,
    outer_radius: f64,
}

impl FeasibleSet {
    pub fn l2_ball(dimension: usize, radius: f64) -> Result<Self> {
        check_shape(dimension, radius)?;
        Ok(Self {
            kind: SetKind::L2Ball,
            dimension,
            radius,
            inner_radius: radius,
            outer_radius: radius,
        })
    }

    /// The cube `[-half_width, half_width]^d`.
    pub fn cube(dimension: usize, half_width: f64) -> Result<Self> {
        check_shape(dimension, half_width)?;
        Ok(Self {
            kind: SetKind::Box,
            dimension,
            radius: half_width,
            inner_radius: half_width,
            outer_radius: half_width * (dimension as f64).sqrt(),
        })
    }

    /// `{ y - (scale/d) 1 : y >= 0, sum(y) = scale }`.
    ///
    /// The inner ball lives in the hyperplane `sum(x) = 0`; the set is not
    /// full-dimensional, so it cannot back a [`ShrunkSet`].
    pub fn simplex(dimension: usize, scale: f64) -> Result<Self> {
        check_shape(dimension, scale)?;
        if dimension < 2 {
            return Err(Error::invalid("simplex needs dimension >= 2"));
        }
        let d = dimension as f64;
        Ok(Self {
            kind: SetKind::Simplex,
            dimension,
            radius: scale,
            inner_radius: scale / (d * (d - 1.0)).sqrt(),
            outer_radius: scale * ((d - 1.0) / d).sqrt(),
        })
    }

    /// Nuclear-norm ball of radius `tau` over `rows x cols` matrices.
    ///
    /// `||X||_F <= ||X||_*` gives `R = tau`, and `||X||_* <= sqrt(min(m, n)) ||X||_F`
    /// gives `r = tau / sqrt(min(m, n))`.
    pub fn trace_norm_ball(rows: usize, cols: usize, tau: f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("trace-norm ball needs rows, cols >= 1"));
        }
        check_shape(rows * cols, tau)?;
        Ok(Self {
            kind: SetKind::TraceNormBall { rows, cols },
            dimension: rows * cols,
            radius: tau,
            inner_radius: tau / (rows.min(cols) as f64).sqrt(),
            outer_radius: tau,
        })
    }

    /// Replaces the inner radius by a smaller certified value.
    pub fn with_inner_radius(mut self, r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::invalid(format!(
                "inner radius must be positive, got {r}"
            )));
        }
        if r > self.inner_radius * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "inner radius {r} exceeds the largest certified value {} for {:?}",
                self.inner_radius, self.kind
            )));
        }
        self.inner_radius = r;
        Ok(self)
    }

    pub fn kind(&self) -> SetKind {
        self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// The kind-specific size parameter (ball radius, box half-width, simplex scale, or `tau`).
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn inner_radius(&self) -> f64 {
        self.inner_radius
    }

    pub fn outer_radius(&self) -> f64 {
        self.outer_radius
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.outer_radius
    }

    pub fn center(&self) -> Vec<f64> {
        vec![0.0; self.dimension]
    }

    fn check_dim(&self, v: &[f64], what: &str) -> Result<()> {
        if v.len() != self.dimension {
            return Err(Error::invalid(format!(
                "{what} has dimension {}, set has dimension {}",
                v.len(),
                self.dimension
            )));
        }
        Ok(())
    }

    /// `argmin_{x in K} <direction, x>`. A zero direction returns the center.
    pub fn lmo(&self, direction: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(direction, "direction")?;
        if !all_finite(direction) {
            return Err(Error::invalid("direction has non-finite entries"));
        }
        if direction.iter().all(|&g| g == 0.0) {
            return Ok(self.center());
        }
        let out = match self.kind {
            SetKind::L2Ball => {
                let scale = -self.radius / norm(direction);
                direction.iter().map(|g| scale * g).collect()
            }
            SetKind::Box => direction
                .iter()
                .map(|&g| {
                    if g > 0.0 {
                        -self.radius
                    } else if g < 0.0 {
                        self.radius
                    } else {
                        0.0
                    }
                })
                .collect(),
            SetKind::Simplex => {
                let (best, _) = direction.iter().enumerate().fold(
                    (0usize, f64::INFINITY),
                    |(bi, bv), (i, &g)| if g < bv { (i, g) } else { (bi, bv) },
                );
                let shift = self.radius / self.dimension as f64;
                let mut x = vec![-shift; self.dimension];
                x[best] += self.radius;
                x
            }
            SetKind::TraceNormBall { rows, cols } => {
                let pair = top_singular_pair(direction, rows, cols);
                let mut x = vec![0.0; rows * cols];
                for i in 0..rows {
                    let ui = -self.radius * pair.u[i];
                    for j in 0..cols {
                        x[i * cols + j] = ui * pair.v[j];
                    }
                }
                x
            }
        };
        Ok(out)
    }

    /// Membership up to an additive tolerance on the defining norm or inequalities.
    pub fn contains(&self, point: &[f64], tol: f64) -> Result<bool> {
        self.check_dim(point, "point")?;
        if !all_finite(point) {
            return Ok(false);
        }
        let inside = match self.kind {
            SetKind::L2Ball => norm(point) <= self.radius + tol,
            SetKind::Box => point.iter().all(|x| x.abs() <= self.radius + tol),
            SetKind::Simplex => {
                let shift = self.radius / self.dimension as f64;
                point.iter().all(|x| x + shift >= -tol) && point.iter().sum::<f64>().abs() <= tol
            }
            SetKind::TraceNormBall { rows, cols } => {
                nuclear_norm(point, rows, cols) <= self.radius + tol
            }
        };
        Ok(inside)
    }

    /// Draws a random member of the set (used by property checks and the harness).
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.dimension;
        match self.kind {
            SetKind::L2Ball => {
                let mut w = unit_ball_point(rng, d);
                w.iter_mut().for_each(|x| *x *= self.radius);
                w
            }
            SetKind::Box => (0..d)
                .map(|_| rng.random_range(-self.radius..=self.radius))
                .collect(),
            SetKind::Simplex => {
                let e: Vec<f64> = (0..d).map(|_| Exp1.sample(rng)).collect();
                let total: f64 = e.iter().sum();
                let shift = self.radius / d as f64;
                e.iter().map(|x| self.radius * x / total - shift).collect()
            }
            SetKind::TraceNormBall { rows, cols } => {
                let terms = 1 + rng.random_range(0..rows.min(cols).max(1));
                let weights: Vec<f64> = (0..terms).map(|_| Exp1.sample(rng)).collect();
                let total: f64 =
                    weights.iter().sum::<f64>() / rng.random_range(0.0..=1.0f64).max(1e-3);
                let mut x = vec![0.0; d];
                for w in weights {
                    let u = unit_sphere_point(rng, rows);
                    let v = unit_sphere_point(rng, cols);
                    let coef = self.radius * w / total;
                    for i in 0..rows {
                        for j in 0..cols {
                            x[i * cols + j] += coef * u[i] * v[j];
                        }
                    }
                }
                x
            }
        }
    }
}

fn check_shape(dimension: usize, radius: f64) -> Result<()> {
    if dimension == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid(format!(
            "radius must be positive and finite, got {radius}"
        )));
    }
    Ok(())
}

/// `(1 - delta / r) K`, so that `y + delta u` stays in `K` for every unit `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShrunkSet {
    base: FeasibleSet,
    delta: f64,
    scale: f64,
}

impl ShrunkSet {
    pub fn new(base: FeasibleSet, delta: f64) -> Result<Self> {
        if base.kind == SetKind::Simplex {
            return Err(Error::invalid(
                "the simplex is not full-dimensional; it has no shrunk set for sphere perturbations",
            ));
        }
        let r = base.inner_radius;
        if !(delta > 0.0 && delta < r) {
            return Err(Error::invalid(format!(
                "delta must satisfy 0 < delta < r = {r}, got {delta}"
            )));
        }
        Ok(Self {
            scale: 1.0 - delta / r,
            base,
            delta,
        })
    }

    pub fn base(&self) -> &FeasibleSet {
        &self.base
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn lmo(&self, direction: &[f64]) -> Result<Vec<f64>> {
        let mut v = self.base.lmo(direction)?;
        v.iter_mut().for_each(|x| *x *= self.scale);
        Ok(v)
    }

    pub fn contains(&self, point: &[f64], tol: f64) -> Result<bool> {
        let unscaled: Vec<f64> = point.iter().map(|x| x / self.scale).collect();
        self.base.contains(&unscaled, tol / self.scale)
    }
}

#[derive(Debug, Clone)]
pub struct SingularPair {
    pub sigma: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub iterations: usize,
}

/// Leading singular triplet of a row-major `rows x cols` matrix by power
/// iteration on `A^T A`.
pub fn top_singular_pair(a: &[f64], rows: usize, cols: usize) -> SingularPair {
    debug_assert_eq!(a.len(), rows * cols);
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_ITER_SEED);
    let inv = 1.0 / (cols as f64).sqrt();
    let mut v: Vec<f64> = (0..cols)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            inv + POWER_ITER_JITTER * z
        })
        .collect();
    normalize(&mut v);

    let mut av = vec![0.0; rows];
    let mut next = vec![0.0; cols];
    let mut iterations = 0;
    while iterations < POWER_ITER_MAX {
        iterations += 1;
        mat_vec(a, rows, cols, &v, &mut av);
        mat_t_vec(a, rows, cols, &av, &mut next);
        if norm(&next) == 0.0 {
            // v is orthogonal to the row space; restart from the heaviest column.
            next = heaviest_column_basis(a, rows, cols);
        }
        normalize(&mut next);
        let moved = next
            .iter()
            .zip(&v)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        std::mem::swap(&mut v, &mut next);
        if moved < POWER_ITER_TOL {
            break;
        }
    }
    mat_vec(a, rows, cols, &v, &mut av);
    let sigma = norm(&av);
    let u = if sigma > 0.0 {
        av.iter().map(|x| x / sigma).collect()
    } else {
        let mut u = vec![0.0; rows];
        u[0] = 1.0;
        u
    };
    SingularPair {
        sigma,
        u,
        v,
        iterations,
    }
}

fn heaviest_column_basis(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let best = (0..cols)
        .map(|j| (j, (0..rows).map(|i| a[i * cols + j].powi(2)).sum::<f64>()))
        .fold(
            (0, -1.0),
            |acc, (j, w)| if w > acc.1 { (j, w) } else { acc },
        )
        .0;
    let mut e = vec![0.0; cols];
    e[best] = 1.0;
    e
}

fn normalize(v: &mut [f64]) {
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn mat_vec(a: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    for i in 0..rows {
        out[i] = a[i * cols..(i + 1) * cols]
            .iter()
            .zip(x)
            .map(|(p, q)| p * q)
            .sum();
    }
}

fn mat_t_vec(a: &[f64], rows: usize, cols: usize, y: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    for i in 0..rows {
        let yi = y[i];
        for (o, aij) in out.iter_mut().zip(&a[i * cols..(i + 1) * cols]) {
            *o += yi * aij;
        }
    }
}

/// Sum of singular values of a row-major matrix.
pub fn nuclear_norm(a: &[f64], rows: usize, cols: usize) -> f64 {
    nalgebra::DMatrix::from_row_slice(rows, cols, a)
        .singular_values()
        .iter()
        .sum()
}

pub(crate) fn unit_sphere_point<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let mut g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let n2 = norm_sq(&g);
        if n2 > 0.0 {
            let n = n2.sqrt();
            g.iter_mut().for_each(|x| *x /= n);
            return g;
        }
    }
}

/// Uniform point in the unit ball: Gaussian direction times `U^{1/d}`.
pub(crate) fn unit_ball_point<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    let mut w = unit_sphere_point(rng, d);
    let radius = rng.random::<f64>().powf(1.0 / d as f64);
    w.iter_mut().for_each(|x| *x *= radius);
    w
}
