use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::targets::{SupportKind, TargetDensity};

/// Equal-probability partition of the response line at one x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EppPartition {
    pub x: Vec<f64>,
    pub m: usize,
    pub p: f64,
    /// probability level of the first cut
    pub offset: f64,
    /// m + 1 consecutive quantile cuts; fine cell j is [cuts[j], cuts[j+1])
    pub cuts: Vec<f64>,
    /// F(A_0(x) | x) = 1 − m p
    pub tail_prob: f64,
    /// longest fine cell
    pub h_max: f64,
}

impl EppPartition {
    /// True when y lies in A_0(x).
    pub fn in_tail(&self, y: f64) -> bool {
        self.tail_prob > 0.0 && (y < self.cuts[0] || y >= self.cuts[self.m])
    }

    /// True when [y − δ/2, y + δ/2] meets A_0(x).
    pub fn cube_meets_tail(&self, y: f64, delta: f64, support: (f64, f64)) -> bool {
        if self.tail_prob <= 0.0 {
            return false;
        }
        let below = self.cuts[0] > support.0 && y - 0.5 * delta < self.cuts[0];
        let above = self.cuts[self.m] < support.1 && y + 0.5 * delta >= self.cuts[self.m];
        below || above
    }
}

/// Probability level of the lowest cut: 0 for supports bounded below, (1 − m p)/2 otherwise.
pub fn epp_offset(target: &TargetDensity, m: usize, p: f64) -> f64 {
    match target.support_spec().kind {
        SupportKind::FullSpace => 0.5 * (1.0 - m as f64 * p).max(0.0),
        _ => 0.0,
    }
}

pub fn check_epp_prob(m: usize, p: f64) -> Result<()> {
    if m < 1 {
        return Err(Error::InvalidCount { what: "fine cell count m", got: m });
    }
    if !(p > 0.0) || m as f64 * p > 1.0 + 1e-12 {
        return Err(Error::InvalidProb(format!("need 0 < p ≤ 1/m, got p = {p}, m = {m}")));
    }
    Ok(())
}

pub fn epp_partition(target: &TargetDensity, x: &[f64], m: usize, p: f64) -> Result<EppPartition> {
    if target.d() != 1 {
        return Err(Error::UnsupportedDimension(target.d()));
    }
    check_epp_prob(m, p)?;
    let offset = epp_offset(target, m, p);
    let law = target.law(x)?;
    let cuts = (0..=m)
        .map(|j| law.quantile((offset + j as f64 * p).min(1.0)))
        .collect::<Result<Vec<f64>>>()?;
    let h_max = cuts.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    Ok(EppPartition {
        x: x.to_vec(),
        m,
        p,
        offset,
        tail_prob: (1.0 - m as f64 * p).max(0.0),
        cuts,
        h_max,
    })
}
