use serde::{Deserialize, Serialize};

use crate::divergence::KlEstimate;
use crate::error::{Error, Result};
use crate::mixtures::ModelKind;
use crate::targets::FamilyKind;

/// Power of 1/m (1/(mN) for M3) in the KL upper bound.
///
/// Laplace targets have exponential tails, so q plays no role there. Equal-probability models
/// only have a stated exponent for Laplace.
pub fn rate_exponent(kind: ModelKind, family: FamilyKind, d: usize, dx: usize, q: f64, eps: f64) -> Result<f64> {
    if !(q > 2.0) {
        return Err(Error::InvalidMoment(q));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!("eps must be positive and finite, got {eps}")));
    }
    if d == 0 {
        return Err(Error::UnsupportedDimension(0));
    }
    let q = if family == FamilyKind::Laplace { f64::INFINITY } else { q };
    let core = 2.0 + 1.0 / (q - 2.0) + eps;
    let (d, dx) = (d as f64, dx as f64);
    match kind {
        ModelKind::M0 | ModelKind::M1 => Ok(1.0 / (d * core)),
        ModelKind::M3 => Ok(1.0 / (dx + d * core)),
        ModelKind::M4 if family == FamilyKind::Laplace => {
            if d != 1.0 {
                return Err(Error::UnsupportedDimension(d as usize));
            }
            Ok(1.0 / (3.0 + eps))
        }
        _ => Err(Error::UnsupportedCombination { model: kind.to_string(), family: family.to_string() }),
    }
}

/// Least-squares line through (log m, log KL).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub used: usize,
    /// m values whose estimate is within 3 SE of zero
    pub excluded: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub theoretical_exponent: Option<f64>,
}

impl RateFit {
    pub fn with_theory(mut self, exponent: f64) -> Self {
        self.theoretical_exponent = Some(exponent);
        self
    }
}

/// OLS of log(value) on log(m) over the points with value > 3 SE.
pub fn fit_rate(series: &[(usize, KlEstimate)]) -> Result<RateFit> {
    let (usable, excluded): (Vec<_>, Vec<_>) =
        series.iter().partition(|(_, e)| e.value > 0.0 && e.value > 3.0 * e.std_error);
    if usable.len() < 3 {
        return Err(Error::InsufficientPoints { got: usable.len() });
    }
    let pts: Vec<(f64, f64)> = usable.iter().map(|(m, e)| ((*m as f64).ln(), e.value.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientPoints { got: 1 });
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let slope_se = if pts.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(RateFit {
        slope,
        intercept,
        slope_se,
        used: pts.len(),
        excluded: excluded.iter().map(|(m, _)| *m).collect(),
        theoretical_exponent: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeRow {
    pub m: usize,
    pub value: f64,
    pub envelope: f64,
    pub holds: bool,
}

/// C · m^{−exponent} with C calibrated on the first point, compared against every point.
pub fn envelope_check(series: &[(usize, KlEstimate)], exponent: f64) -> Result<Vec<EnvelopeRow>> {
    let (m0, e0) = series.first().ok_or(Error::InsufficientPoints { got: 0 })?;
    Ok(series
        .iter()
        .map(|(m, e)| {
            // exact at the calibration point
            let envelope = e0.value * (*m as f64 / *m0 as f64).powf(-exponent);
            EnvelopeRow { m: *m, value: e.value, envelope, holds: e.value <= envelope }
        })
        .collect())
}
