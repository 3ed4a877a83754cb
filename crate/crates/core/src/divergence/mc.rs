use rand_chacha::ChaCha8Rng;

use super::{run_shards, KlEstimate, KlMethod};
use crate::error::{Error, Result};
use crate::mixtures::MixtureModel;
use crate::targets::TargetDensity;

const CLIP: f64 = 700.0;

/// Clamp to ±700, reporting whether clipping happened.
pub fn log_ratio_clip(v: f64) -> (f64, bool) {
    if v > CLIP {
        (CLIP, true)
    } else if v < -CLIP {
        (-CLIP, true)
    } else {
        (v, false)
    }
}

/// Streaming mean and centred second moment.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Moments {
    pub n: usize,
    pub mean: f64,
    pub m2: f64,
    pub clipped: usize,
}

impl Moments {
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    pub fn merge(self, o: Moments) -> Moments {
        if self.n == 0 {
            return Moments { clipped: self.clipped + o.clipped, ..o };
        }
        if o.n == 0 {
            return Moments { clipped: self.clipped + o.clipped, ..self };
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * o.n as f64 / n as f64,
            m2: self.m2 + o.m2 + d * d * (self.n as f64 * o.n as f64) / n as f64,
            clipped: self.clipped + o.clipped,
        }
    }

    /// Standard error of the mean.
    pub fn se(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2.max(0.0) / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}

fn shard_moments(target: &TargetDensity, model: &MixtureModel, rng: &mut ChaCha8Rng, count: usize) -> Result<Moments> {
    let mut x = Vec::new();
    let mut acc = Moments::default();
    for _ in 0..count {
        let y = target.sample_pair(rng, &mut x)?;
        let lr = target.log_pdf(y, &x)? - model.log_density(y, &x)?;
        if !lr.is_finite() {
            return Err(Error::NonFiniteLogRatio { y, x: x.clone() });
        }
        let (v, c) = log_ratio_clip(lr);
        acc.clipped += c as usize;
        acc.push(v);
    }
    Ok(acc)
}

pub fn kl_mc(target: &TargetDensity, model: &MixtureModel, n: usize, seed: u64) -> Result<KlEstimate> {
    kl_mc_with(target, model, n, seed, 1)
}

/// Monte Carlo mean of log f − log p over joint draws. Shards run on `workers` threads and merge
/// in shard order, so the result does not depend on `workers`.
pub fn kl_mc_with(target: &TargetDensity, model: &MixtureModel, n: usize, seed: u64, workers: usize) -> Result<KlEstimate> {
    if n < 100 {
        return Err(Error::InvalidCount { what: "Monte Carlo sample size (>= 100)", got: n });
    }
    let parts = run_shards(n, seed, workers, |rng, c| shard_moments(target, model, rng, c))?;
    let total = parts.into_iter().fold(Moments::default(), Moments::merge);
    if total.clipped > 0 {
        log::warn!("{} of {} log ratios clipped to ±{CLIP}", total.clipped, total.n);
    }
    Ok(KlEstimate {
        value: total.mean,
        std_error: total.se(),
        n: total.n,
        method: KlMethod::MonteCarlo,
        seed: Some(seed),
        clipped: total.clipped,
        truncated_mass: None,
        quad_error: None,
    })
}
