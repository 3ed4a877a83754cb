//! Expected KL divergence ∫ log(f/p) dF between a target and a mixture model.

mod mc;
mod quadrature;
mod series;

use rand::SeedableRng;
use rayon::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) use mc::Moments;
pub use mc::{kl_mc, kl_mc_with, log_ratio_clip};
pub use quadrature::{kl_quadrature, kl_quadrature_with, QuadSettings};
pub use series::{kl_series, KlSeries, SeriesPoint, TrendStats};

/// Draws per shard; shard s always consumes stream s of the seed.
pub const SHARD_SIZE: usize = 65_536;

/// (shard index, draw count) covering n draws in order.
pub fn shards(n: usize) -> impl Iterator<Item = (u64, usize)> {
    let full = n / SHARD_SIZE;
    let rest = n % SHARD_SIZE;
    (0..full)
        .map(|s| (s as u64, SHARD_SIZE))
        .chain((rest > 0).then_some((full as u64, rest)))
}

/// Independent stream `shard` of the generator keyed by `seed`.
pub fn shard_rng(seed: u64, shard: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard);
    rng
}

/// Runs `op` on a pool of `workers` threads (inline when `workers <= 1`).
pub(crate) fn on_pool<T: Send>(workers: usize, op: impl FnOnce() -> T + Send) -> Result<T> {
    if workers <= 1 {
        return Ok(op());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
    Ok(pool.install(op))
}

/// Applies `f(rng, count)` to every shard of n draws; results come back in shard order.
pub(crate) fn run_shards<T: Send>(
    n: usize,
    seed: u64,
    workers: usize,
    f: impl Fn(&mut ChaCha8Rng, usize) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    let work: Vec<(u64, usize)> = shards(n).collect();
    let one = |&(s, c): &(u64, usize)| f(&mut shard_rng(seed, s), c);
    if workers <= 1 {
        return work.iter().map(one).collect();
    }
    on_pool(workers, || work.par_iter().map(one).collect())?
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlMethod {
    MonteCarlo,
    Quadrature,
}

impl std::fmt::Display for KlMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KlMethod::MonteCarlo => "mc",
            KlMethod::Quadrature => "quadrature",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlEstimate {
    /// nats
    pub value: f64,
    /// sample sd / √n for Monte Carlo, 0 for quadrature
    pub std_error: f64,
    /// draws (Monte Carlo) or integrand evaluations (quadrature)
    pub n: usize,
    pub method: KlMethod,
    pub seed: Option<u64>,
    /// log ratios clipped to ±700
    pub clipped: usize,
    /// target mass outside the quadrature truncation
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub truncated_mass: Option<f64>,
    /// quadrature error estimate
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub quad_error: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn shards_cover_n() {
        let v: Vec<_> = shards(2 * SHARD_SIZE + 5).collect();
        assert_eq!(v, vec![(0, SHARD_SIZE), (1, SHARD_SIZE), (2, 5)]);
        assert_eq!(shards(SHARD_SIZE).count(), 1);
        assert_eq!(shards(0).count(), 0);
    }

    #[test]
    fn streams_differ_and_repeat() {
        let a = shard_rng(7, 0).next_u64();
        let b = shard_rng(7, 1).next_u64();
        assert_ne!(a, b);
        assert_eq!(a, shard_rng(7, 0).next_u64());
    }
}
