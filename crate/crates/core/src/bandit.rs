//! One-point gradient estimation, sphere sampling, ball smoothing, and block
//! schedules for the bandit learners.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{unit_ball_point, unit_sphere_point};

/// Seeded source of uniform unit vectors.
#[derive(Debug, Clone)]
pub struct SphereSampler {
    rng: ChaCha8Rng,
    dimension: usize,
}

impl SphereSampler {
    pub fn new(seed: u64, dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::invalid("sphere dimension must be at least 1"));
        }
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            dimension,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn sample(&mut self) -> Vec<f64> {
        unit_sphere_point(&mut self.rng, self.dimension)
    }
}

/// `(d / delta) value u`
pub fn one_point_grad(value: f64, u: &[f64], d: usize, delta: f64) -> Result<Vec<f64>> {
    if !(delta > 0.0) {
        return Err(Error::invalid(format!(
            "delta must be positive, got {delta}"
        )));
    }
    let k = d as f64 / delta * value;
    Ok(u.iter().map(|ui| k * ui).collect())
}

/// `y + delta u`
pub fn play_point(y: &[f64], delta: f64, u: &[f64]) -> Vec<f64> {
    y.iter().zip(u).map(|(yi, ui)| yi + delta * ui).collect()
}

/// Monte-Carlo estimate of `E_w f(x + delta w)` for `w` uniform in the unit
/// ball, with its standard error.
pub fn smoothed_value_mc<F, R>(
    f: F,
    x: &[f64],
    delta: f64,
    samples: usize,
    rng: &mut R,
) -> (f64, f64)
where
    F: Fn(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    let n = samples.max(1);
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..n {
        let w = unit_ball_point(rng, x.len());
        let v = f(&play_point(x, delta, &w));
        let diff = v - mean;
        mean += diff / (i + 1) as f64;
        m2 += diff * (v - mean);
    }
    let se = if n > 1 {
        (m2 / (n - 1) as f64 / n as f64).sqrt()
    } else {
        0.0
    };
    (mean, se)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSchedule {
    pub horizon: usize,
    pub block_size: usize,
    /// Inclusive 1-based `(start, end)` rounds.
    pub blocks: Vec<(usize, usize)>,
}

impl BlockSchedule {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Whether round `t` (1-based) closes a block.
    pub fn is_block_end(&self, t: usize) -> bool {
        t.is_multiple_of(self.block_size) || t == self.horizon
    }
}

pub fn make_blocks(horizon: usize, block_size: usize) -> Result<BlockSchedule> {
    if block_size < 1 {
        return Err(Error::invalid("block size K must be at least 1"));
    }
    if horizon < block_size {
        return Err(Error::invalid(format!(
            "block size K = {block_size} exceeds horizon T = {horizon}"
        )));
    }
    let blocks = (0..horizon.div_ceil(block_size))
        .map(|m| (m * block_size + 1, ((m + 1) * block_size).min(horizon)))
        .collect();
    Ok(BlockSchedule {
        horizon,
        block_size,
        blocks,
    })
}
