use serde::{Deserialize, Serialize};

use super::{kl_mc_with, KlEstimate};
use crate::error::{Error, Result};
use crate::mixtures::MixtureModel;
use crate::targets::TargetDensity;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub m: usize,
    pub components: usize,
    pub estimate: KlEstimate,
}

/// Diagnostics on the shape of a KL series; not a test of any finite-m claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendStats {
    /// steps whose increase exceeds 3·sqrt(se_a² + se_b²)
    pub significant_increases: usize,
    /// first minus last value
    pub total_decrease: f64,
    /// sqrt(se_first² + se_last²)
    pub combined_se: f64,
    pub significant_decrease: bool,
}

impl TrendStats {
    pub fn of(points: &[SeriesPoint]) -> Self {
        let pair_se = |a: &KlEstimate, b: &KlEstimate| (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        let significant_increases = points
            .windows(2)
            .filter(|w| w[1].estimate.value - w[0].estimate.value > 3.0 * pair_se(&w[0].estimate, &w[1].estimate))
            .count();
        let (first, last) = (&points[0].estimate, &points[points.len() - 1].estimate);
        let combined_se = pair_se(first, last);
        let total_decrease = first.value - last.value;
        TrendStats { significant_increases, total_decrease, combined_se, significant_decrease: total_decrease > 3.0 * combined_se }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlSeries {
    pub points: Vec<SeriesPoint>,
    pub trend: TrendStats,
}

/// KL estimates along an m-grid, all with the same seed (common random numbers).
pub fn kl_series(
    target: &TargetDensity,
    builder: impl Fn(usize) -> Result<MixtureModel>,
    m_grid: &[usize],
    n: usize,
    seed: u64,
    workers: usize,
) -> Result<KlSeries> {
    if m_grid.len() < 3 {
        return Err(Error::InvalidCount { what: "m-grid length (>= 3)", got: m_grid.len() });
    }
    if m_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InconsistentInputs(format!("m-grid {m_grid:?} is not strictly increasing")));
    }
    let mut points = Vec::with_capacity(m_grid.len());
    for &m in m_grid {
        let model = builder(m)?;
        let estimate = kl_mc_with(target, &model, n, seed, workers)?;
        log::info!("m = {m}: KL = {:.6e} ± {:.2e}", estimate.value, estimate.std_error);
        points.push(SeriesPoint { m, components: model.component_count(), estimate });
    }
    let trend = TrendStats::of(&points);
    Ok(KlSeries { points, trend })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::{Curve, XLaw};

    #[test]
    fn exact_series_is_zero() {
        let t = TargetDensity::laplace(Curve::constant(1.0), XLaw::unit(1)).unwrap();
        let s = kl_series(&t, |_| Ok(MixtureModel::exact(&t)), &[4, 8, 16], 500, 1, 1).unwrap();
        assert!(s.points.iter().all(|p| p.estimate.value == 0.0));
        assert_eq!(s.trend.significant_increases, 0);
    }

    #[test]
    fn grid_must_increase() {
        let t = TargetDensity::laplace(Curve::constant(1.0), XLaw::unit(1)).unwrap();
        assert!(kl_series(&t, |_| Ok(MixtureModel::exact(&t)), &[64, 16, 256], 500, 1, 1).is_err());
    }
}
