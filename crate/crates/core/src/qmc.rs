//! Randomized quasi-Monte Carlo over the unit cube.
//!
//! Points come from Owen-scrambled Sobol sequences. An estimate averages
//! `replicas` independent scramblings; the spread between replica means gives
//! the standard error. Replica seeds are derived from `(seed, stream, replica)`
//! only, and replica means are combined in a fixed order, so results are
//! bitwise independent of how many worker threads evaluate them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Upper bound on cube dimension supported by the underlying sequence.
pub const MAX_DIMENSIONS: usize = sobol_burley::NUM_DIMENSIONS as usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QmcConfig {
    /// Points per replica.
    pub samples: u32,
    /// Independent scramblings.
    pub replicas: u32,
    pub seed: u64,
}

impl Default for QmcConfig {
    fn default() -> Self {
        QmcConfig {
            samples: 1 << 14,
            replicas: 16,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QmcEstimate<T> {
    pub value: T,
    pub stderr: T,
    pub samples: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Scrambling seed for one replica of one stream (e.g. one R-grid entry).
pub fn replica_seed(seed: u64, stream: u64, replica: u64) -> u32 {
    let h = splitmix64(seed ^ splitmix64(stream.wrapping_mul(0x1000_0001) ^ splitmix64(replica)));
    (h >> 32) as u32
}

/// Mean of `f` over `samples` points of one scrambled sequence. Coordinates
/// lie strictly inside (0, 1).
pub fn replica_mean<T: Real, F>(dims: usize, samples: u32, scramble: u32, f: &F) -> T
where
    F: Fn(&[f64]) -> T,
{
    let mut point = vec![0.0f64; dims];
    let offset = 0.5 / (1u64 << 24) as f64;
    let mut sum = T::zero();
    for i in 0..samples {
        for (d, x) in point.iter_mut().enumerate() {
            *x = sobol_burley::sample(i, d as u32, scramble) as f64 + offset;
        }
        sum = sum + f(&point);
    }
    sum / lit(samples as f64)
}

/// Randomized QMC estimate of `∫_{[0,1]^dims} f`.
pub fn estimate<T: Real, F>(dims: usize, cfg: &QmcConfig, stream: u64, f: F) -> Result<QmcEstimate<T>>
where
    F: Fn(&[f64]) -> T + Sync,
{
    if dims == 0 || dims > MAX_DIMENSIONS {
        return Err(Error::Dimension(format!(
            "QMC dimension {dims} outside 1..={MAX_DIMENSIONS}"
        )));
    }
    if cfg.samples == 0 || cfg.replicas < 2 {
        return Err(Error::Domain("QMC needs samples > 0 and at least 2 replicas".into()));
    }
    let means: Vec<T> = (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|r| replica_mean(dims, cfg.samples, replica_seed(cfg.seed, stream, r), &f))
        .collect();
    Ok(combine(&means, cfg.samples))
}

fn combine<T: Real>(means: &[T], samples: u32) -> QmcEstimate<T> {
    let m = lit::<T>(means.len() as f64);
    let mean = means.iter().fold(T::zero(), |a, &b| a + b) / m;
    let var = means.iter().fold(T::zero(), |a, &b| a + (b - mean) * (b - mean)) / (m - T::one());
    QmcEstimate {
        value: mean,
        stderr: (var / m).sqrt(),
        samples: samples as u64 * means.len() as u64,
    }
}
