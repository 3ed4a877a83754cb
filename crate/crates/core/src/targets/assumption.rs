//! Monte Carlo diagnostics for the regularity conditions the approximation results rely on.
//!
//! These are advisory: a report never blocks model construction.

use serde::{Deserialize, Serialize};

use super::TargetDensity;
use crate::error::{Error, Result};

/// How the cube C(r, y, x) is placed around a response value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "placement", rename_all = "snake_case")]
pub enum CubePolicy {
    /// [y − r/2, y + r/2]
    Centered { r: f64 },
    /// Centered in the interior, one-sided [y, y + r] or [y − r, y] near a support end,
    /// the whole support when it is shorter than r.
    SupportAdapted { r: f64 },
}

impl CubePolicy {
    pub fn r(&self) -> f64 {
        match *self {
            CubePolicy::Centered { r } | CubePolicy::SupportAdapted { r } => r,
        }
    }

    pub fn cube(&self, y: f64, support: (f64, f64)) -> (f64, f64) {
        let (slo, shi) = support;
        match *self {
            CubePolicy::Centered { r } => (y - 0.5 * r, y + 0.5 * r),
            CubePolicy::SupportAdapted { r } => {
                if shi - slo <= r {
                    (slo, shi)
                } else if y - 0.5 * r < slo {
                    (y, y + r)
                } else if y + 0.5 * r > shi {
                    (y - r, y)
                } else {
                    (y - 0.5 * r, y + 0.5 * r)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentStatus {
    Finite,
    Inconclusive,
    Divergent,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub value: f64,
    pub std_error: f64,
    /// running means at n/8, n/4, n/2, n
    pub running: Vec<f64>,
    pub status: MomentStatus,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub n: usize,
    pub seed: u64,
    pub policy: CubePolicy,
    pub second_moment: MomentEstimate,
    pub log_ratio_integral: MomentEstimate,
    /// fine blocks [lo, hi) checked for the tail-cube condition
    pub blocks: Vec<(f64, f64)>,
    /// fraction of draws where the tail-cube condition fails, per block
    pub tail_cube_violation: Vec<f64>,
    pub tail_cube_violated: bool,
}

fn moment(values: &[f64]) -> MomentEstimate {
    let n = values.len();
    if values.iter().any(|v| !v.is_finite()) {
        return MomentEstimate { value: f64::INFINITY, std_error: f64::NAN, running: vec![], status: MomentStatus::Divergent };
    }
    let mean_of = |k: usize| values[..k].iter().sum::<f64>() / k as f64;
    let mean = mean_of(n);
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64;
    let se = (var / n as f64).sqrt();
    let running: Vec<f64> = [n / 8, n / 4, n / 2, n].iter().map(|&k| mean_of(k.max(1))).collect();
    let drifts = running.windows(2).filter(|w| (w[1] - w[0]).abs() > 3.0 * se).count();
    let status = if drifts == 0 {
        if se > 0.5 * mean.abs() && mean != 0.0 {
            MomentStatus::Inconclusive
        } else {
            MomentStatus::Finite
        }
    } else if drifts == running.len() - 1 && running.windows(2).all(|w| w[1] > w[0]) {
        MomentStatus::Divergent
    } else {
        MomentStatus::Inconclusive
    };
    MomentEstimate { value: mean, std_error: se, running, status }
}

/// True when [y − r/2, y] or [y, y + r/2] lies inside `region ∩ support`.
fn half_cube_inside(y: f64, r: f64, cube: (f64, f64), region: (f64, f64), support: (f64, f64)) -> bool {
    let lo = cube.0.max(region.0).max(support.0);
    let hi = cube.1.min(region.1).min(support.1);
    (lo <= y - 0.5 * r && y <= hi) || (lo <= y && y + 0.5 * r <= hi)
}

/// Estimates E[y²], the integral of log f(y|x) / inf_C f(z|x), and checks the tail-cube
/// condition against each supplied fine block [lo, hi) (tail = the rest of the response space).
pub fn check_assumption1(
    target: &TargetDensity,
    policy: CubePolicy,
    n: usize,
    seed: u64,
    blocks: &[(f64, f64)],
) -> Result<AssumptionReport> {
    if target.d() != 1 {
        return Err(Error::UnsupportedDimension(target.d()));
    }
    if n < 16 {
        return Err(Error::InvalidCount { what: "assumption-check sample size", got: n });
    }
    let r = policy.r();
    let draws = target.sample_joint(n, seed)?;
    let mut sq = Vec::with_capacity(n);
    let mut lr = Vec::with_capacity(n);
    let mut bad = vec![0usize; blocks.len()];
    for (y, x) in &draws {
        let law = target.law(x)?;
        let support = law.support();
        sq.push(y * y);
        let c = policy.cube(*y, support);
        let inf = law.inf_pdf(c.0, c.1);
        lr.push(if inf > 0.0 { law.log_pdf(*y) - inf.ln() } else { f64::INFINITY });
        for (b, &(lo, hi)) in blocks.iter().enumerate() {
            let ok = if *y >= lo && *y < hi {
                half_cube_inside(*y, r, c, (lo, hi), support)
            } else if *y < lo {
                half_cube_inside(*y, r, c, (f64::NEG_INFINITY, lo), support)
            } else {
                half_cube_inside(*y, r, c, (hi, f64::INFINITY), support)
            };
            if !ok {
                bad[b] += 1;
            }
        }
    }
    let tail_cube_violation: Vec<f64> = bad.iter().map(|&b| b as f64 / n as f64).collect();
    Ok(AssumptionReport {
        n,
        seed,
        policy,
        second_moment: moment(&sq),
        log_ratio_integral: moment(&lr),
        blocks: blocks.to_vec(),
        tail_cube_violated: bad.iter().any(|&b| b > 0),
        tail_cube_violation,
    })
}
