use serde::{Deserialize, Serialize};

use super::{KlEstimate, KlMethod};
use crate::error::{Error, Result};
use crate::mixtures::MixtureModel;
use crate::quad::{integrate_with_breaks, QuadOptions};
use crate::targets::{TargetDensity, XLaw};

/// Tolerances of the nested adaptive quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// subinterval cap per one-dimensional integral
    pub max_intervals: usize,
    /// response truncation: drop y where f(y|x) < trunc · sup_y f(y|x)
    pub truncation: f64,
}

impl Default for QuadSettings {
    fn default() -> Self {
        Self { rel_tol: 1e-9, abs_tol: 1e-13, max_intervals: 4096, truncation: 1e-14 }
    }
}

struct Inner {
    value: f64,
    error: f64,
    evals: usize,
    truncated: f64,
}

fn inner(target: &TargetDensity, model: &MixtureModel, x: &[f64], s: &QuadSettings) -> Result<Inner> {
    let law = target.law(x)?;
    let (a, b) = law.truncation(s.truncation);
    let (slo, shi) = law.support();
    let mut breaks = vec![a, b];
    breaks.extend(law.kinks());
    breaks.extend(model.y_breakpoints(x)?);
    breaks.retain(|v| v.is_finite() && *v >= a && *v <= b);
    breaks.sort_by(|p, q| p.partial_cmp(q).unwrap());
    breaks.dedup();
    let mut failure = None;
    let opts = QuadOptions { abs_tol: s.abs_tol, rel_tol: s.rel_tol, max_intervals: s.max_intervals };
    let r = integrate_with_breaks(
        |y| {
            let lf = law.log_pdf(y);
            if lf == f64::NEG_INFINITY {
                return 0.0;
            }
            match model.log_density(y, x) {
                Ok(lp) => lf.exp() * (lf - lp),
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        &breaks,
        opts,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let truncated = if a > slo { law.cdf(a)? } else { 0.0 } + if b < shi { law.sf(b)? } else { 0.0 };
    Ok(Inner { value: r.value, error: r.error, evals: r.evals, truncated })
}

pub fn kl_quadrature(target: &TargetDensity, model: &MixtureModel) -> Result<KlEstimate> {
    kl_quadrature_with(target, model, QuadSettings::default())
}

/// Nested adaptive Gauss–Kronrod over (y, x) for scalar y and x.
pub fn kl_quadrature_with(target: &TargetDensity, model: &MixtureModel, s: QuadSettings) -> Result<KlEstimate> {
    if target.d() != 1 {
        return Err(Error::UnsupportedDimension(target.d()));
    }
    let done = |value: f64, error: f64, evals: usize, truncated: f64| KlEstimate {
        value,
        std_error: 0.0,
        n: evals,
        method: KlMethod::Quadrature,
        seed: None,
        clipped: 0,
        truncated_mass: Some(truncated),
        quad_error: Some(error),
    };
    let (lo, hi) = match &target.x_law {
        XLaw::PointMass { at } => {
            let r = inner(target, model, at, &s)?;
            return Ok(done(r.value, r.error, r.evals, r.truncated));
        }
        XLaw::Uniform { lo, hi } => (lo.clone(), hi.clone()),
    };
    if lo.len() != 1 {
        return Err(Error::UnsupportedDimension(lo.len()));
    }
    if target.is_x_free() && model.is_x_free() {
        let r = inner(target, model, &[0.5 * (lo[0] + hi[0])], &s)?;
        return Ok(done(r.value, r.error, r.evals, r.truncated));
    }
    let mut breaks = vec![lo[0], hi[0]];
    breaks.extend(model.x_breakpoints().into_iter().filter(|v| *v > lo[0] && *v < hi[0]));
    breaks.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let dens = 1.0 / (hi[0] - lo[0]);
    let mut failure = None;
    let mut evals = 0usize;
    let mut inner_err = 0.0f64;
    let mut truncated = 0.0f64;
    let outer_opts = QuadOptions { abs_tol: s.abs_tol, rel_tol: s.rel_tol.max(1e-10), max_intervals: s.max_intervals };
    let r = integrate_with_breaks(
        |x| match inner(target, model, &[x], &s) {
            Ok(i) => {
                evals += i.evals;
                inner_err = inner_err.max(i.error);
                truncated = truncated.max(i.truncated);
                i.value * dens
            }
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        &breaks,
        outer_opts,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(done(r.value, r.error + inner_err, evals, truncated))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{norm_cdf, norm_logpdf};
    use crate::targets::{CustomLaw, Curve, SupportKind};

    fn standard_normal() -> TargetDensity {
        let law = CustomLaw::new("normal", |y, _| (norm_logpdf(y, 0.0, 1.0)).exp())
            .with_cdf(|y, _| norm_cdf(y))
            .with_support(SupportKind::FullSpace, |_| (f64::NEG_INFINITY, f64::INFINITY))
            .with_density_sup(0.398_942_280_401_432_7);
        TargetDensity::custom(law, XLaw::point(&[0.0])).unwrap()
    }

    #[test]
    fn exact_wrapper_is_zero() {
        let t = TargetDensity::exponential(Curve::linear(&[1.0]), XLaw::uniform(&[1.0], &[2.0])).unwrap();
        let e = kl_quadrature(&t, &MixtureModel::exact(&t)).unwrap();
        assert!(e.value.abs() < 1e-12);
    }

    #[test]
    fn shifted_normals() {
        let t = standard_normal();
        let m = MixtureModel::fixed(&[1.0], &[1.0], &[1.0]).unwrap();
        let e = kl_quadrature(&t, &m).unwrap();
        assert!((e.value - 0.5).abs() < 1e-9, "{e:?}");
    }

    #[test]
    fn exponential_vs_standard_normal_trapezoid() {
        let t = TargetDensity::exponential(Curve::constant(1.0), XLaw::unit(1)).unwrap();
        let m = MixtureModel::fixed(&[1.0], &[0.0], &[1.0]).unwrap();
        let e = kl_quadrature(&t, &m).unwrap();
        // dense trapezoid on [0, 40]
        let n = 1_000_000;
        let hstep = 40.0 / n as f64;
        let g = |y: f64| (-y).exp() * (-y - norm_logpdf(y, 0.0, 1.0));
        let trap: f64 = (0..=n).map(|i| g(i as f64 * hstep) * if i == 0 || i == n { 0.5 } else { 1.0 }).sum::<f64>() * hstep;
        assert!((e.value - trap).abs() < 1e-9, "{} vs {trap}", e.value);
    }
}
