//! Finite normal mixtures p(y|x) = Σ α_j(x) φ(y; μ_j(x), σ_j(x)) built from a target.
//!
//! All evaluation is in log space. Grid- and quantile-based models sum only the components whose
//! kernel is within e^-46 of the running total; with weights at most 1 the skipped mass is below
//! (component count)·e^-46 relative to the density.

mod build;
pub mod polyfit;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::discretization::{Param, Partition, Schedule, XGrid};
use crate::error::{Error, Result};
use crate::special::{log_sum_exp, norm_logpdf, LogSum, LN_SQRT_2PI};
use crate::targets::TargetDensity;

pub use build::{build_m0, build_m1, build_m1_with, build_m3, build_m4, build_m5, build_m5_with, build_model, BuildOptions};
pub use polyfit::{fit_many, FitOptions, PolyFit};

const WINDOW_CUT: f64 = 46.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    M0,
    M1,
    M3,
    M4,
    M5,
    #[serde(rename = "exact")]
    ExactWrapper,
    #[serde(rename = "fixed")]
    Fixed,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModelKind::M0 => "M0",
            ModelKind::M1 => "M1",
            ModelKind::M3 => "M3",
            ModelKind::M4 => "M4",
            ModelKind::M5 => "M5",
            ModelKind::ExactWrapper => "exact",
            ModelKind::Fixed => "fixed",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "m0" => ModelKind::M0,
            "m1" => ModelKind::M1,
            "m3" => ModelKind::M3,
            "m4" => ModelKind::M4,
            "m5" => ModelKind::M5,
            "exact" => ModelKind::ExactWrapper,
            "fixed" => ModelKind::Fixed,
            _ => return Err(Error::Config(format!("unknown model kind {s:?}"))),
        })
    }
}

/// Equal-length cells on the response line with an optional tail component.
#[derive(Debug, Clone, Serialize)]
pub(crate) struct GridPart {
    pub centers: Vec<f64>,
    pub edges: Vec<f64>,
    pub sigma: f64,
    pub sigma0: f64,
    pub tail_below: bool,
    pub tail_above: bool,
}

impl GridPart {
    fn has_tail(&self) -> bool {
        self.tail_below || self.tail_above
    }

    fn m(&self) -> usize {
        self.centers.len()
    }

    /// F(A_0 | x)
    fn tail_prob(&self, law: &crate::targets::Law) -> Result<f64> {
        let mut t = 0.0;
        if self.tail_below {
            t += law.cdf(self.edges[0])?;
        }
        if self.tail_above {
            t += law.sf(*self.edges.last().unwrap())?;
        }
        Ok(t)
    }

    /// [F(A_1|x), ..., F(A_m|x), F(A_0|x)]
    fn cell_probs(&self, law: &crate::targets::Law) -> Result<Vec<f64>> {
        let mut v = self
            .edges
            .windows(2)
            .map(|w| law.cell_prob(w[0], w[1]))
            .collect::<Result<Vec<f64>>>()?;
        if self.has_tail() {
            v.push(self.tail_prob(law)?);
        }
        Ok(v)
    }

    fn tail_term(&self, y: f64, log_w0: f64) -> LogSum {
        let mut acc = LogSum::new();
        if self.has_tail() {
            acc.add(log_w0 + norm_logpdf(y, 0.0, self.sigma0));
        }
        acc
    }
}

/// Equal-probability layout: constant weights p, means at quantile midpoints.
#[derive(Debug, Clone, Serialize)]
pub(crate) struct EppPart {
    pub m: usize,
    pub p: f64,
    pub offset: f64,
    pub tail_weight: f64,
    /// quantile levels offset + (j − ½) p
    pub levels: Vec<f64>,
    /// standard-law quantiles at `levels` when the family is location-scale
    #[serde(skip)]
    pub std_q: Option<Vec<f64>>,
    pub sigma: Param,
    pub sigma0: Param,
}

impl EppPart {
    fn means(&self, target: &TargetDensity, x: &[f64]) -> Result<Vec<f64>> {
        let law = target.law(x)?;
        match (&self.std_q, law.loc_scale()) {
            (Some(q), Some((loc, scale))) => Ok(q.iter().map(|v| loc + scale * v).collect()),
            _ => self.levels.iter().map(|&l| law.quantile(l)).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "layout", rename_all = "snake_case")]
pub(crate) enum Repr {
    Grid(GridPart),
    Logit {
        grid: GridPart,
        /// one fit per fine cell, then the tail when present
        fits: Vec<PolyFit>,
        eps_target: f64,
        eps_achieved: f64,
    },
    Indexed {
        grid: GridPart,
        x_centers: Vec<Vec<f64>>,
        big_r: f64,
        /// row i: F(A_1|x_i), ..., F(A_m|x_i), F(A_0|x_i)
        #[serde(skip)]
        table: Vec<Vec<f64>>,
    },
    Quantile(EppPart),
    PolyMeans {
        epp: EppPart,
        sigma: f64,
        fits: Vec<PolyFit>,
        eps_target: f64,
        eps_achieved: f64,
    },
    Exact,
    Fixed {
        weights: Vec<f64>,
        means: Vec<f64>,
        sigmas: Vec<f64>,
    },
}

/// An evaluable conditional mixture density.
#[derive(Debug, Clone)]
pub struct MixtureModel {
    kind: ModelKind,
    target: Option<TargetDensity>,
    schedule: Option<Schedule>,
    partition: Option<Partition>,
    xgrid: Option<XGrid>,
    repr: Repr,
}

/// One mixture component at a fixed x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Component {
    pub weight: f64,
    pub mean: f64,
    pub sigma: f64,
}

/// log Σ_j w_j φ(y; μ_j, σ) plus `init`, over components with nondecreasing means.
fn windowed(
    y: f64,
    n: usize,
    sigma: f64,
    init: LogSum,
    mean: impl Fn(usize) -> f64,
    mut log_w: impl FnMut(usize) -> Result<f64>,
) -> Result<f64> {
    let (mut lo, mut hi) = (0usize, n);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if mean(mid) < y {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    let c = -LN_SQRT_2PI - sigma.ln();
    let kernel = |j: usize| {
        let z = (y - mean(j)) / sigma;
        c - 0.5 * z * z
    };
    let mut acc = init;
    let mut up = lo;
    let mut down = lo;
    let (mut up_open, mut down_open) = (up < n, down > 0);
    while up_open || down_open {
        if up_open {
            let k = kernel(up);
            if k < acc.value() - WINDOW_CUT {
                up_open = false;
            } else {
                acc.add(log_w(up)? + k);
                up += 1;
                up_open = up < n;
            }
        }
        if down_open {
            let k = kernel(down - 1);
            if k < acc.value() - WINDOW_CUT {
                down_open = false;
            } else {
                acc.add(log_w(down - 1)? + k);
                down -= 1;
                down_open = down > 0;
            }
        }
    }
    Ok(acc.value())
}

/// softmax(−R ‖x − x_i‖²) over the covariate cell centres.
fn cell_softmax(x: &[f64], centers: &[Vec<f64>], big_r: f64) -> Vec<f64> {
    let logits: Vec<f64> = centers
        .iter()
        .map(|c| -big_r * c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .collect();
    crate::special::softmax(&logits)
}

impl MixtureModel {
    pub(crate) fn from_parts(
        kind: ModelKind,
        target: Option<TargetDensity>,
        schedule: Option<Schedule>,
        partition: Option<Partition>,
        xgrid: Option<XGrid>,
        repr: Repr,
    ) -> Self {
        Self { kind, target, schedule, partition, xgrid, repr }
    }

    /// p(y|x) = f(y|x); used as a zero-error reference.
    pub fn exact(target: &TargetDensity) -> Self {
        Self::from_parts(ModelKind::ExactWrapper, Some(target.clone()), None, None, None, Repr::Exact)
    }

    /// x-free mixture with the given components.
    pub fn fixed(weights: &[f64], means: &[f64], sigmas: &[f64]) -> Result<Self> {
        if weights.is_empty() || weights.len() != means.len() || weights.len() != sigmas.len() {
            return Err(Error::InconsistentInputs("fixed mixture needs equally many weights, means and scales".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter("fixed mixture weights must be nonnegative and sum to 1".into()));
        }
        if sigmas.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidParameter("fixed mixture scales must be positive".into()));
        }
        Ok(Self::from_parts(
            ModelKind::Fixed,
            None,
            None,
            None,
            None,
            Repr::Fixed { weights: weights.to_vec(), means: means.to_vec(), sigmas: sigmas.to_vec() },
        ))
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn schedule(&self) -> Option<&Schedule> {
        self.schedule.as_ref()
    }

    pub fn partition(&self) -> Option<&Partition> {
        self.partition.as_ref()
    }

    pub fn xgrid(&self) -> Option<&XGrid> {
        self.xgrid.as_ref()
    }

    fn target(&self) -> &TargetDensity {
        self.target.as_ref().expect("model built from a target")
    }

    /// Sup error of the polynomial fits (M1: log cell probabilities, M5: mean curves).
    pub fn achieved_eps(&self) -> Option<f64> {
        match &self.repr {
            Repr::Logit { eps_achieved, .. } | Repr::PolyMeans { eps_achieved, .. } => Some(*eps_achieved),
            _ => None,
        }
    }

    /// Sup-error target of the polynomial fits.
    pub fn eps_target(&self) -> Option<f64> {
        match &self.repr {
            Repr::Logit { eps_target, .. } | Repr::PolyMeans { eps_target, .. } => Some(*eps_target),
            _ => None,
        }
    }

    pub fn fits(&self) -> &[PolyFit] {
        match &self.repr {
            Repr::Logit { fits, .. } | Repr::PolyMeans { fits, .. } => fits,
            _ => &[],
        }
    }

    /// Number of mixture components (M3 counts m·N fine components plus one aggregated tail).
    pub fn component_count(&self) -> usize {
        match &self.repr {
            Repr::Grid(g) | Repr::Logit { grid: g, .. } => g.m() + g.has_tail() as usize,
            Repr::Indexed { grid, x_centers, .. } => grid.m() * x_centers.len() + grid.has_tail() as usize,
            Repr::Quantile(e) | Repr::PolyMeans { epp: e, .. } => e.m + (e.tail_weight > 0.0) as usize,
            Repr::Exact => 0,
            Repr::Fixed { weights, .. } => weights.len(),
        }
    }

    /// True when p(y|x) does not depend on x.
    pub fn is_x_free(&self) -> bool {
        match &self.repr {
            Repr::Fixed { .. } => true,
            Repr::Quantile(e) => self.target().is_x_free() && e.sigma.is_const() && e.sigma0.is_const(),
            Repr::PolyMeans { fits, .. } => fits.iter().all(|f| f.degree == 0),
            Repr::Logit { fits, .. } => fits.iter().all(|f| f.degree == 0),
            _ => self.target().is_x_free(),
        }
    }

    pub fn log_density(&self, y: f64, x: &[f64]) -> Result<f64> {
        match &self.repr {
            Repr::Exact => self.target().log_pdf(y, x),
            Repr::Fixed { weights, means, sigmas } => {
                let mut acc = LogSum::new();
                for ((w, m), s) in weights.iter().zip(means).zip(sigmas) {
                    acc.add(w.ln() + norm_logpdf(y, *m, *s));
                }
                Ok(acc.value())
            }
            Repr::Grid(g) => {
                let law = self.target().law(x)?;
                let init = if g.has_tail() { g.tail_term(y, g.tail_prob(&law)?.ln()) } else { LogSum::new() };
                windowed(y, g.m(), g.sigma, init, |j| g.centers[j], |j| Ok(law.cell_prob(g.edges[j], g.edges[j + 1])?.ln()))
            }
            Repr::Logit { grid: g, fits, .. } => {
                let z: Vec<f64> = fits.iter().map(|f| f.eval(x)).collect();
                let lz = log_sum_exp(&z);
                let init = if g.has_tail() { g.tail_term(y, z[g.m()] - lz) } else { LogSum::new() };
                windowed(y, g.m(), g.sigma, init, |j| g.centers[j], |j| Ok(z[j] - lz))
            }
            Repr::Indexed { grid: g, x_centers, big_r, table } => {
                let w = cell_softmax(x, x_centers, *big_r);
                let active: Vec<(f64, &Vec<f64>)> = w.iter().zip(table).filter(|(wi, _)| **wi > 0.0).map(|(wi, row)| (*wi, row)).collect();
                let alpha = |j: usize| active.iter().map(|(wi, row)| wi * row[j]).sum::<f64>();
                let init = if g.has_tail() { g.tail_term(y, alpha(g.m()).ln()) } else { LogSum::new() };
                windowed(y, g.m(), g.sigma, init, |j| g.centers[j], |j| Ok(alpha(j).ln()))
            }
            Repr::Quantile(e) => {
                let mut init = LogSum::new();
                if e.tail_weight > 0.0 {
                    init.add(e.tail_weight.ln() + norm_logpdf(y, 0.0, e.sigma0.at(x)));
                }
                let lp = e.p.ln();
                let law = self.target().law(x)?;
                if let (Some(q), Some((loc, scale))) = (&e.std_q, law.loc_scale()) {
                    return windowed(y, e.m, e.sigma.at(x), init, |j| loc + scale * q[j], |_| Ok(lp));
                }
                let means = e.means(self.target(), x)?;
                windowed(y, e.m, e.sigma.at(x), init, |j| means[j], |_| Ok(lp))
            }
            Repr::PolyMeans { epp: e, sigma, fits, .. } => {
                let mut acc = LogSum::new();
                if e.tail_weight > 0.0 {
                    acc.add(e.tail_weight.ln() + norm_logpdf(y, 0.0, e.sigma0.at(x)));
                }
                let c = e.p.ln() - LN_SQRT_2PI - sigma.ln();
                for f in fits {
                    let z = (y - f.eval(x)) / sigma;
                    acc.add(c - 0.5 * z * z);
                }
                Ok(acc.value())
            }
        }
    }

    pub fn density(&self, y: f64, x: &[f64]) -> Result<f64> {
        Ok(self.log_density(y, x)?.exp())
    }

    /// Mixing probabilities at x: fine components first, the tail last.
    /// M3 lists components x-cell by x-cell, then the aggregated tail.
    pub fn mixing_weights(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(match &self.repr {
            Repr::Exact => vec![],
            Repr::Fixed { weights, .. } => weights.clone(),
            Repr::Grid(g) => g.cell_probs(&self.target().law(x)?)?,
            Repr::Logit { fits, .. } => {
                let z: Vec<f64> = fits.iter().map(|f| f.eval(x)).collect();
                crate::special::softmax(&z)
            }
            Repr::Indexed { grid: g, x_centers, big_r, table } => {
                let w = cell_softmax(x, x_centers, *big_r);
                let m = g.m();
                let mut out = Vec::with_capacity(m * w.len() + 1);
                let mut tail = 0.0;
                for (wi, row) in w.iter().zip(table) {
                    out.extend(row[..m].iter().map(|f| wi * f));
                    if g.has_tail() {
                        tail += wi * row[m];
                    }
                }
                if g.has_tail() {
                    out.push(tail);
                }
                out
            }
            Repr::Quantile(e) | Repr::PolyMeans { epp: e, .. } => {
                let mut v = vec![e.p; e.m];
                if e.tail_weight > 0.0 {
                    v.push(e.tail_weight);
                }
                v
            }
        })
    }

    /// Softmax weights over the covariate cells (M3 only).
    pub fn x_cell_weights(&self, x: &[f64]) -> Option<Vec<f64>> {
        match &self.repr {
            Repr::Indexed { x_centers, big_r, .. } => Some(cell_softmax(x, x_centers, *big_r)),
            _ => None,
        }
    }

    /// Components at x; M3 components sharing a mean are merged.
    pub fn components(&self, x: &[f64]) -> Result<Vec<Component>> {
        let mk = |weight, mean, sigma| Component { weight, mean, sigma };
        Ok(match &self.repr {
            Repr::Exact => vec![],
            Repr::Fixed { weights, means, sigmas } => (0..weights.len()).map(|i| mk(weights[i], means[i], sigmas[i])).collect(),
            Repr::Grid(g) | Repr::Logit { grid: g, .. } | Repr::Indexed { grid: g, .. } => {
                let w = match &self.repr {
                    Repr::Indexed { x_centers, big_r, table, .. } => {
                        let cw = cell_softmax(x, x_centers, *big_r);
                        (0..table[0].len()).map(|j| cw.iter().zip(table).map(|(wi, row)| wi * row[j]).sum()).collect()
                    }
                    _ => self.mixing_weights(x)?,
                };
                let mut out: Vec<Component> = (0..g.m()).map(|j| mk(w[j], g.centers[j], g.sigma)).collect();
                if g.has_tail() {
                    out.push(mk(w[g.m()], 0.0, g.sigma0));
                }
                out
            }
            Repr::Quantile(e) => {
                let s = e.sigma.at(x);
                let mut out: Vec<Component> = e.means(self.target(), x)?.into_iter().map(|mu| mk(e.p, mu, s)).collect();
                if e.tail_weight > 0.0 {
                    out.push(mk(e.tail_weight, 0.0, e.sigma0.at(x)));
                }
                out
            }
            Repr::PolyMeans { epp: e, sigma, fits, .. } => {
                let mut out: Vec<Component> = fits.iter().map(|f| mk(e.p, f.eval(x), *sigma)).collect();
                if e.tail_weight > 0.0 {
                    out.push(mk(e.tail_weight, 0.0, e.sigma0.at(x)));
                }
                out
            }
        })
    }

    /// Response values where the model changes character at x (fine-block ends).
    pub fn y_breakpoints(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(match &self.repr {
            Repr::Grid(g) | Repr::Logit { grid: g, .. } | Repr::Indexed { grid: g, .. } => {
                vec![g.edges[0], *g.edges.last().unwrap()]
            }
            Repr::Quantile(e) | Repr::PolyMeans { epp: e, .. } => {
                let law = self.target().law(x)?;
                let lo = law.quantile(e.offset)?;
                let hi = law.quantile((e.offset + e.m as f64 * e.p).min(1.0))?;
                vec![lo, hi].into_iter().filter(|v| v.is_finite()).collect()
            }
            _ => vec![],
        })
    }

    /// Covariate values where the weights change sharply (M3 cell faces, dx = 1).
    pub fn x_breakpoints(&self) -> Vec<f64> {
        match (&self.repr, &self.xgrid) {
            (Repr::Indexed { .. }, Some(g)) if g.dx == 1 => (1..g.k).map(|i| i as f64 / g.k as f64).collect(),
            _ => vec![],
        }
    }

    /// JSON description: kind, schedule, partition, component layout and fit coefficients.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": self.kind,
            "component_count": self.component_count(),
            "schedule": self.schedule,
            "partition": self.partition,
            "xgrid": self.xgrid,
            "layout": self.repr,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::INV_SQRT_2PI;

    #[test]
    fn single_standard_component() {
        let m = MixtureModel::fixed(&[1.0], &[0.0], &[1.0]).unwrap();
        assert!((m.density(0.0, &[]).unwrap() - INV_SQRT_2PI).abs() < 1e-16);
        assert_eq!(m.mixing_weights(&[0.3]).unwrap(), vec![1.0]);
    }

    #[test]
    fn windowed_matches_full_sum() {
        let means: Vec<f64> = (0..500).map(|j| -5.0 + 0.02 * j as f64).collect();
        let sigma = 0.05;
        for &y in &[-7.0, -4.99, 0.013, 3.3, 9.0] {
            let full = log_sum_exp(&means.iter().map(|&mu| (1.0f64 / 500.0).ln() + norm_logpdf(y, mu, sigma)).collect::<Vec<_>>());
            let w = windowed(y, 500, sigma, LogSum::new(), |j| means[j], |_| Ok((1.0f64 / 500.0).ln())).unwrap();
            assert!((full - w).abs() < 1e-12, "{y}: {full} vs {w}");
        }
    }
}
