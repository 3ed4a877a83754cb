//! Analytic conditional target laws f(y|x) with a covariate law f(x).
//!
//! All registered families have a scalar response. Each is a location-scale
//! transform of a standard law whose parameters are [`Curve`]s in x.

pub mod assumption;
pub mod curve;
pub mod xlaw;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::quad::{integrate, QuadOptions};

pub use assumption::{check_assumption1, AssumptionReport, CubePolicy, MomentStatus};
pub use curve::Curve;
pub use xlaw::XLaw;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportKind {
    FullSpace,
    HalfLine,
    Interval,
    XDependentInterval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportSpec {
    pub kind: SupportKind,
    pub dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Exponential,
    Laplace,
    Uniform,
    StudentT,
    BoundedSmooth,
    Custom,
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FamilyKind::Exponential => "exponential",
            FamilyKind::Laplace => "laplace",
            FamilyKind::Uniform => "uniform",
            FamilyKind::StudentT => "student_t",
            FamilyKind::BoundedSmooth => "bounded_smooth",
            FamilyKind::Custom => "custom",
        };
        f.write_str(s)
    }
}

pub type PointFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;
pub type BoundsFn = Arc<dyn Fn(&[f64]) -> (f64, f64) + Send + Sync>;

/// User-supplied scalar conditional law. Only the pdf is mandatory.
#[derive(Clone)]
pub struct CustomLaw {
    pub name: String,
    pub pdf: PointFn,
    pub cdf: Option<PointFn>,
    pub quantile: Option<PointFn>,
    pub support: SupportSpec,
    pub bounds: BoundsFn,
    pub density_sup: Option<f64>,
}

impl fmt::Debug for CustomLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomLaw")
            .field("name", &self.name)
            .field("has_cdf", &self.cdf.is_some())
            .field("has_quantile", &self.quantile.is_some())
            .field("support", &self.support)
            .field("density_sup", &self.density_sup)
            .finish()
    }
}

impl CustomLaw {
    pub fn new(name: &str, pdf: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.to_string(),
            pdf: Arc::new(pdf),
            cdf: None,
            quantile: None,
            support: SupportSpec { kind: SupportKind::FullSpace, dim: 1 },
            bounds: Arc::new(|_| (f64::NEG_INFINITY, f64::INFINITY)),
            density_sup: None,
        }
    }

    pub fn with_cdf(mut self, cdf: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.cdf = Some(Arc::new(cdf));
        self
    }

    pub fn with_quantile(mut self, q: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.quantile = Some(Arc::new(q));
        self
    }

    pub fn with_support(mut self, kind: SupportKind, bounds: impl Fn(&[f64]) -> (f64, f64) + Send + Sync + 'static) -> Self {
        self.support = SupportSpec { kind, dim: 1 };
        self.bounds = Arc::new(bounds);
        self
    }

    pub fn with_density_sup(mut self, v: f64) -> Self {
        self.density_sup = Some(v);
        self
    }
}

/// Family with its parameter curves.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// f(y|x) = γ(x) exp(−γ(x) y) on [0, ∞)
    Exponential { rate: Curve },
    /// f(y|x) = ½ γ(x) exp(−γ(x) |y|)
    Laplace { rate: Curve },
    /// f(y|x) = 1/b(x) on [0, b(x)]
    Uniform { upper: Curve },
    /// location b(x), scale c(x), ν degrees of freedom
    StudentT { nu: f64, location: Curve, scale: Curve },
    /// Raised cosine (1 − cos 2πu)/w on [a, a + w], u = (y − a)/w; vanishes quadratically at both ends.
    BoundedSmooth { lower: Curve, width: Curve },
    #[serde(skip)]
    Custom(CustomLaw),
}

/// The law f(·|x) at one fixed x.
#[derive(Debug, Clone, Copy)]
pub enum Law<'a> {
    Exponential { rate: f64 },
    Laplace { rate: f64 },
    Uniform { upper: f64 },
    StudentT { nu: f64, loc: f64, scale: f64, log_norm: f64 },
    RaisedCosine { lower: f64, width: f64 },
    Custom { law: &'a CustomLaw, x: &'a [f64] },
}

fn quad_opts() -> QuadOptions {
    QuadOptions { abs_tol: 1e-15, rel_tol: 1e-11, max_intervals: 4096 }
}

/// Uniform draw from the open interval (0, 1).
#[inline]
pub fn open01<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

fn student_log_norm(nu: f64) -> f64 {
    ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * PI).ln()
}

/// Standard Student-t CDF.
fn t_cdf(t: f64, nu: f64) -> f64 {
    let x = nu / (nu + t * t);
    let tail = 0.5 * beta_reg(0.5 * nu, 0.5, x);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Raised-cosine standard CDF on [0, 1].
fn cos_cdf(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else if u <= 0.5 {
        u - (2.0 * PI * u).sin() / (2.0 * PI)
    } else {
        let v = 1.0 - u;
        1.0 - (v - (2.0 * PI * v).sin() / (2.0 * PI))
    }
}

/// Bisection on a nondecreasing `g` over [lo, hi] for g(t) = target, to the resolution of f64.
fn bisect(mut lo: f64, mut hi: f64, target: f64, mut g: impl FnMut(f64) -> f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Quantile of the standard law for built-in families; `None` for custom laws.
pub fn std_quantile(kind: FamilyKind, nu: f64, p: f64) -> Option<f64> {
    Some(match kind {
        FamilyKind::Exponential => -(-p).ln_1p(),
        FamilyKind::Laplace => {
            if p < 0.5 {
                (2.0 * p).ln()
            } else {
                -(2.0 * (1.0 - p)).ln()
            }
        }
        FamilyKind::Uniform => p,
        FamilyKind::StudentT => t_quantile(p, nu),
        FamilyKind::BoundedSmooth => {
            if p <= 0.5 {
                bisect(0.0, 0.5, p, cos_cdf)
            } else {
                1.0 - bisect(0.0, 0.5, 1.0 - p, cos_cdf)
            }
        }
        FamilyKind::Custom => return None,
    })
}

fn t_quantile(p: f64, nu: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    // Solve in the lower tail for accuracy, then reflect.
    let q = p.min(1.0 - p);
    let mut lo = -1.0;
    while t_cdf(lo, nu) > q {
        lo *= 2.0;
    }
    let t = bisect(lo, 0.0, q, |t| t_cdf(t, nu));
    if p < 0.5 {
        t
    } else {
        -t
    }
}

impl<'a> Law<'a> {
    /// Support interval [lo, hi] (ends may be infinite).
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Law::Exponential { .. } => (0.0, f64::INFINITY),
            Law::Laplace { .. } | Law::StudentT { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Law::Uniform { upper } => (0.0, upper),
            Law::RaisedCosine { lower, width } => (lower, lower + width),
            Law::Custom { law, x } => (law.bounds)(x),
        }
    }

    pub fn pdf(&self, y: f64) -> f64 {
        match *self {
            Law::Exponential { rate } => {
                if y < 0.0 {
                    0.0
                } else {
                    rate * (-rate * y).exp()
                }
            }
            Law::Laplace { rate } => 0.5 * rate * (-rate * y.abs()).exp(),
            Law::Uniform { upper } => {
                if (0.0..=upper).contains(&y) {
                    1.0 / upper
                } else {
                    0.0
                }
            }
            Law::StudentT { .. } => self.log_pdf(y).exp(),
            Law::RaisedCosine { lower, width } => {
                let u = (y - lower) / width;
                if (0.0..=1.0).contains(&u) {
                    let s = (PI * u).sin();
                    2.0 * s * s / width
                } else {
                    0.0
                }
            }
            Law::Custom { law, x } => (law.pdf)(y, x),
        }
    }

    pub fn log_pdf(&self, y: f64) -> f64 {
        match *self {
            Law::Exponential { rate } => {
                if y < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    rate.ln() - rate * y
                }
            }
            Law::Laplace { rate } => (0.5 * rate).ln() - rate * y.abs(),
            Law::StudentT { nu, loc, scale, log_norm } => {
                let u = (y - loc) / scale;
                log_norm - scale.ln() - 0.5 * (nu + 1.0) * (u * u / nu).ln_1p()
            }
            Law::RaisedCosine { lower, width } => {
                let u = (y - lower) / width;
                if (0.0..=1.0).contains(&u) {
                    (2.0f64).ln() + 2.0 * (PI * u).sin().ln() - width.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            _ => self.pdf(y).ln(),
        }
    }

    pub fn cdf(&self, y: f64) -> Result<f64> {
        Ok(match *self {
            Law::Exponential { rate } => {
                if y <= 0.0 {
                    0.0
                } else {
                    -(-rate * y).exp_m1()
                }
            }
            Law::Laplace { rate } => {
                if y < 0.0 {
                    0.5 * (rate * y).exp()
                } else {
                    1.0 - 0.5 * (-rate * y).exp()
                }
            }
            Law::Uniform { upper } => (y / upper).clamp(0.0, 1.0),
            Law::StudentT { nu, loc, scale, .. } => t_cdf((y - loc) / scale, nu),
            Law::RaisedCosine { lower, width } => cos_cdf((y - lower) / width),
            Law::Custom { law, x } => match &law.cdf {
                Some(c) => c(y, x),
                None => {
                    let (lo, hi) = (law.bounds)(x);
                    if y <= lo {
                        0.0
                    } else if y >= hi {
                        1.0
                    } else {
                        integrate(|t| (law.pdf)(t, x), lo, y, quad_opts())?.value.clamp(0.0, 1.0)
                    }
                }
            },
        })
    }

    /// Survival function 1 − F(y), computed without cancellation where closed forms allow.
    pub fn sf(&self, y: f64) -> Result<f64> {
        Ok(match *self {
            Law::Exponential { rate } => {
                if y <= 0.0 {
                    1.0
                } else {
                    (-rate * y).exp()
                }
            }
            Law::Laplace { rate } => {
                if y < 0.0 {
                    1.0 - 0.5 * (rate * y).exp()
                } else {
                    0.5 * (-rate * y).exp()
                }
            }
            Law::Uniform { upper } => (1.0 - y / upper).clamp(0.0, 1.0),
            Law::StudentT { nu, loc, scale, .. } => t_cdf(-(y - loc) / scale, nu),
            Law::RaisedCosine { lower, width } => cos_cdf(1.0 - (y - lower) / width),
            Law::Custom { law, x } => match &law.cdf {
                Some(c) => 1.0 - c(y, x),
                None => {
                    let (lo, hi) = (law.bounds)(x);
                    if y >= hi {
                        0.0
                    } else if y <= lo {
                        1.0
                    } else {
                        integrate(|t| (law.pdf)(t, x), y, hi, quad_opts())?.value.clamp(0.0, 1.0)
                    }
                }
            },
        })
    }

    /// Inverse CDF on [0, 1]; the ends map to the support ends.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidProb(format!("quantile level {p} outside [0, 1]")));
        }
        let (slo, shi) = self.support();
        if p == 0.0 {
            return Ok(slo);
        }
        if p == 1.0 {
            return Ok(shi);
        }
        let std = |kind| std_quantile(kind, 0.0, p).expect("built-in family");
        Ok(match *self {
            Law::Exponential { rate } => std(FamilyKind::Exponential) / rate,
            Law::Laplace { rate } => std(FamilyKind::Laplace) / rate,
            Law::Uniform { upper } => p * upper,
            Law::StudentT { nu, loc, scale, .. } => loc + scale * t_quantile(p, nu),
            Law::RaisedCosine { lower, width } => lower + width * std(FamilyKind::BoundedSmooth),
            Law::Custom { law, x } => {
                if let Some(q) = &law.quantile {
                    return Ok(q(p, x));
                }
                self.quantile_by_bisection(p)?
            }
        })
    }

    fn quantile_by_bisection(&self, p: f64) -> Result<f64> {
        let (mut lo, mut hi) = self.support();
        if !lo.is_finite() {
            lo = -1.0;
            while self.cdf(lo)? > p {
                lo *= 2.0;
                if lo < -1e300 {
                    return Err(Error::NonInvertible { p });
                }
            }
        }
        if !hi.is_finite() {
            hi = 1.0;
            while self.cdf(hi)? < p {
                hi *= 2.0;
                if hi > 1e300 {
                    return Err(Error::NonInvertible { p });
                }
            }
        }
        let mut err = None;
        let q = bisect(lo, hi, p, |t| match self.cdf(t) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e.to_string());
                f64::NAN
            }
        });
        if let Some(e) = err {
            return Err(Error::QuadratureFailure(e));
        }
        let width = 1e-9 * (1.0 + q.abs());
        let (a, b) = (self.cdf(q - width)?, self.cdf(q + width)?);
        if !(a <= p + 1e-9 && b >= p - 1e-9) {
            return Err(Error::NonInvertible { p });
        }
        Ok(q)
    }

    /// F(lo ≤ y < hi).
    pub fn cell_prob(&self, lo: f64, hi: f64) -> Result<f64> {
        if hi <= lo {
            return Ok(0.0);
        }
        if let Law::Custom { law, x } = *self {
            if law.cdf.is_none() {
                let (slo, shi) = (law.bounds)(x);
                let (a, b) = (lo.max(slo), hi.min(shi));
                if b <= a {
                    return Ok(0.0);
                }
                let opts = QuadOptions { abs_tol: 1e-300, rel_tol: 1e-9, max_intervals: 4096 };
                return Ok(integrate(|t| (law.pdf)(t, x), a, b, opts)?.value.clamp(0.0, 1.0));
            }
        }
        let upper_cdf = self.cdf(hi)?;
        let v = if upper_cdf <= 0.5 {
            upper_cdf - self.cdf(lo)?
        } else {
            self.sf(lo)? - self.sf(hi)?
        };
        Ok(v.clamp(0.0, 1.0))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let u = open01(rng);
        Ok(match *self {
            Law::Exponential { rate } => -u.ln() / rate,
            Law::StudentT { nu, loc, scale, .. } => {
                let t = rand_distr::StudentT::new(nu)
                    .map_err(|e| Error::InvalidParameter(e.to_string()))?
                    .sample(rng);
                loc + scale * t
            }
            _ => self.quantile(u)?,
        })
    }

    /// d log f(y|x) / dy at an interior point.
    pub fn dlog_pdf(&self, y: f64) -> f64 {
        match *self {
            Law::Exponential { rate } => -rate,
            Law::Laplace { rate } => -rate * y.signum(),
            Law::Uniform { .. } => 0.0,
            Law::StudentT { nu, loc, scale, .. } => {
                let u = (y - loc) / scale;
                -(nu + 1.0) * u / (scale * (nu + u * u))
            }
            Law::RaisedCosine { lower, width } => {
                let u = (y - lower) / width;
                2.0 * PI / ((PI * u).tan() * width)
            }
            Law::Custom { .. } => {
                let eps = 1e-6 * (1.0 + y.abs());
                (self.log_pdf(y + eps) - self.log_pdf(y - eps)) / (2.0 * eps)
            }
        }
    }

    /// sup over z in [lo, hi] ∩ support of |d log f(z|x)/dz|.
    pub fn grad_sup(&self, lo: f64, hi: f64) -> Result<f64> {
        let (slo, shi) = self.support();
        let (a, b) = (lo.max(slo), hi.min(shi));
        match *self {
            Law::Exponential { rate } | Law::Laplace { rate } => Ok(rate),
            Law::Uniform { .. } => Err(Error::Unsupported(
                "log-density gradient is undefined at the uniform support boundary".into(),
            )),
            Law::StudentT { nu, loc, scale, .. } => {
                let peak_u = nu.sqrt();
                let (ua, ub) = ((a - loc) / scale, (b - loc) / scale);
                if (ua <= peak_u && peak_u <= ub) || (ua <= -peak_u && -peak_u <= ub) {
                    Ok((nu + 1.0) / (2.0 * scale * peak_u))
                } else {
                    Ok(self.dlog_pdf(a).abs().max(self.dlog_pdf(b).abs()))
                }
            }
            Law::RaisedCosine { .. } => {
                if b <= a {
                    return Ok(0.0);
                }
                // |cot(πu)| is largest at the ends of any sub-interval of (0, 1).
                Ok(self.dlog_pdf(a).abs().max(self.dlog_pdf(b).abs()))
            }
            Law::Custom { .. } => {
                let mid = 0.5 * (a + b);
                Ok([a, mid, b].iter().map(|&z| self.dlog_pdf(z).abs()).fold(0.0, f64::max))
            }
        }
    }

    /// inf over z in [lo, hi] of f(z|x); zero if the interval leaves the support.
    pub fn inf_pdf(&self, lo: f64, hi: f64) -> f64 {
        let (slo, shi) = self.support();
        if lo < slo || hi > shi {
            return 0.0;
        }
        match self {
            Law::Custom { .. } => (0..=64)
                .map(|i| self.pdf(lo + (hi - lo) * i as f64 / 64.0))
                .fold(f64::INFINITY, f64::min),
            // unimodal: the minimum over an interval is at one of its ends
            _ => self.pdf(lo).min(self.pdf(hi)),
        }
    }

    /// sup_y f(y|x), NaN when unknown.
    pub fn peak(&self) -> f64 {
        match *self {
            Law::Exponential { rate } => rate,
            Law::Laplace { rate } => 0.5 * rate,
            Law::Uniform { upper } => 1.0 / upper,
            Law::StudentT { log_norm, scale, .. } => log_norm.exp() / scale,
            Law::RaisedCosine { width, .. } => 2.0 / width,
            Law::Custom { law, .. } => law.density_sup.unwrap_or(f64::NAN),
        }
    }

    /// (location, scale) of the standard-law representation.
    pub fn loc_scale(&self) -> Option<(f64, f64)> {
        match *self {
            Law::Exponential { rate } | Law::Laplace { rate } => Some((0.0, 1.0 / rate)),
            Law::Uniform { upper } => Some((0.0, upper)),
            Law::StudentT { loc, scale, .. } => Some((loc, scale)),
            Law::RaisedCosine { lower, width } => Some((lower, width)),
            Law::Custom { .. } => None,
        }
    }

    /// Interval outside of which f < rel · sup f (support ends for bounded laws).
    pub fn truncation(&self, rel: f64) -> (f64, f64) {
        let k = (1.0 / rel).ln();
        match *self {
            Law::Exponential { rate } => (0.0, k / rate),
            Law::Laplace { rate } => (-k / rate, k / rate),
            Law::StudentT { nu, loc, scale, .. } => {
                let z = (nu * (rel.powf(-2.0 / (nu + 1.0)) - 1.0)).sqrt();
                (loc - scale * z, loc + scale * z)
            }
            Law::Custom { .. } => {
                let (mut lo, mut hi) = self.support();
                let centre = self.quantile(0.5).unwrap_or(0.0);
                let peak = if self.peak().is_finite() { self.peak() } else { self.pdf(centre) };
                if !lo.is_finite() {
                    let mut step = 1.0;
                    while self.pdf(centre - step) >= rel * peak && step < 1e12 {
                        step *= 2.0;
                    }
                    lo = centre - step;
                }
                if !hi.is_finite() {
                    let mut step = 1.0;
                    while self.pdf(centre + step) >= rel * peak && step < 1e12 {
                        step *= 2.0;
                    }
                    hi = centre + step;
                }
                (lo, hi)
            }
            _ => self.support(),
        }
    }

    /// Points where the density is not smooth inside the support.
    pub fn kinks(&self) -> Vec<f64> {
        match *self {
            Law::Laplace { .. } => vec![0.0],
            _ => vec![],
        }
    }
}

/// A conditional target F(dy|x) together with the covariate law.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetDensity {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default)]
    pub x_law: XLaw,
}

impl TargetDensity {
    pub fn new(family: Family, x_law: XLaw) -> Result<Self> {
        let t = Self { family, x_law };
        t.validate()?;
        Ok(t)
    }

    pub fn exponential(rate: Curve, x_law: XLaw) -> Result<Self> {
        Self::new(Family::Exponential { rate }, x_law)
    }

    pub fn laplace(rate: Curve, x_law: XLaw) -> Result<Self> {
        Self::new(Family::Laplace { rate }, x_law)
    }

    pub fn uniform(upper: Curve, x_law: XLaw) -> Result<Self> {
        Self::new(Family::Uniform { upper }, x_law)
    }

    pub fn student_t(nu: f64, location: Curve, scale: Curve, x_law: XLaw) -> Result<Self> {
        Self::new(Family::StudentT { nu, location, scale }, x_law)
    }

    pub fn bounded_smooth(lower: Curve, width: Curve, x_law: XLaw) -> Result<Self> {
        Self::new(Family::BoundedSmooth { lower, width }, x_law)
    }

    pub fn custom(law: CustomLaw, x_law: XLaw) -> Result<Self> {
        Self::new(Family::Custom(law), x_law)
    }

    pub fn kind(&self) -> FamilyKind {
        match self.family {
            Family::Exponential { .. } => FamilyKind::Exponential,
            Family::Laplace { .. } => FamilyKind::Laplace,
            Family::Uniform { .. } => FamilyKind::Uniform,
            Family::StudentT { .. } => FamilyKind::StudentT,
            Family::BoundedSmooth { .. } => FamilyKind::BoundedSmooth,
            Family::Custom(_) => FamilyKind::Custom,
        }
    }

    /// Response dimension.
    pub fn d(&self) -> usize {
        match &self.family {
            Family::Custom(c) => c.support.dim,
            _ => 1,
        }
    }

    pub fn dx(&self) -> usize {
        self.x_law.dim()
    }

    pub fn nu(&self) -> f64 {
        match self.family {
            Family::StudentT { nu, .. } => nu,
            _ => 0.0,
        }
    }

    fn curves(&self) -> Vec<(&'static str, &Curve)> {
        match &self.family {
            Family::Exponential { rate } | Family::Laplace { rate } => vec![("rate", rate)],
            Family::Uniform { upper } => vec![("upper", upper)],
            Family::StudentT { location, scale, .. } => vec![("location", location), ("scale", scale)],
            Family::BoundedSmooth { lower, width } => vec![("lower", lower), ("width", width)],
            Family::Custom(_) => vec![],
        }
    }

    /// Family constraints over the whole covariate box.
    pub fn validate(&self) -> Result<()> {
        self.x_law.validate()?;
        let dx = self.dx();
        for (name, c) in self.curves() {
            c.check_arity(dx, name)?;
        }
        let (lo, hi) = self.x_law.bounds();
        let positive = |name: &str, c: &Curve| -> Result<()> {
            let (a, _) = c.range_on(&lo, &hi);
            if !(a > 0.0) || !a.is_finite() {
                return Err(Error::InvalidParameter(format!("{name}(x) must be positive on X, min is {a}")));
            }
            Ok(())
        };
        match &self.family {
            Family::Exponential { rate } | Family::Laplace { rate } => positive("rate", rate)?,
            Family::Uniform { upper } => positive("upper", upper)?,
            Family::StudentT { nu, scale, .. } => {
                if !(*nu > 2.0) || !nu.is_finite() {
                    return Err(Error::InvalidParameter(format!("degrees of freedom must exceed 2, got {nu}")));
                }
                positive("scale", scale)?;
            }
            Family::BoundedSmooth { width, .. } => positive("width", width)?,
            Family::Custom(c) => {
                if c.support.dim != 1 {
                    return Err(Error::UnsupportedDimension(c.support.dim));
                }
            }
        }
        Ok(())
    }

    /// Resolve the law at x, checking family constraints there.
    pub fn law<'a>(&'a self, x: &'a [f64]) -> Result<Law<'a>> {
        let pos = |name: &str, v: f64| -> Result<f64> {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(Error::InvalidParameter(format!("{name}(x) = {v} at x = {x:?}")))
            }
        };
        Ok(match &self.family {
            Family::Exponential { rate } => Law::Exponential { rate: pos("rate", rate.eval(x))? },
            Family::Laplace { rate } => Law::Laplace { rate: pos("rate", rate.eval(x))? },
            Family::Uniform { upper } => Law::Uniform { upper: pos("upper", upper.eval(x))? },
            Family::StudentT { nu, location, scale } => {
                if !(*nu > 2.0) {
                    return Err(Error::InvalidParameter(format!("degrees of freedom {nu} must exceed 2")));
                }
                Law::StudentT {
                    nu: *nu,
                    loc: location.eval(x),
                    scale: pos("scale", scale.eval(x))?,
                    log_norm: student_log_norm(*nu),
                }
            }
            Family::BoundedSmooth { lower, width } => Law::RaisedCosine {
                lower: lower.eval(x),
                width: pos("width", width.eval(x))?,
            },
            Family::Custom(law) => Law::Custom { law, x },
        })
    }

    pub fn pdf(&self, y: f64, x: &[f64]) -> Result<f64> {
        Ok(self.law(x)?.pdf(y))
    }

    pub fn log_pdf(&self, y: f64, x: &[f64]) -> Result<f64> {
        Ok(self.law(x)?.log_pdf(y))
    }

    pub fn cdf(&self, y: f64, x: &[f64]) -> Result<f64> {
        self.require_scalar()?;
        self.law(x)?.cdf(y)
    }

    pub fn sf(&self, y: f64, x: &[f64]) -> Result<f64> {
        self.require_scalar()?;
        self.law(x)?.sf(y)
    }

    pub fn quantile(&self, p: f64, x: &[f64]) -> Result<f64> {
        self.require_scalar()?;
        self.law(x)?.quantile(p)
    }

    /// F([lo, hi) | x)
    pub fn cell_prob(&self, lo: f64, hi: f64, x: &[f64]) -> Result<f64> {
        self.law(x)?.cell_prob(lo, hi)
    }

    pub fn grad_log_pdf_sup(&self, lo: f64, hi: f64, x: &[f64]) -> Result<f64> {
        self.law(x)?.grad_sup(lo, hi)
    }

    pub fn inf_pdf_on(&self, lo: f64, hi: f64, x: &[f64]) -> Result<f64> {
        Ok(self.law(x)?.inf_pdf(lo, hi))
    }

    fn require_scalar(&self) -> Result<()> {
        if self.d() != 1 {
            return Err(Error::UnsupportedDimension(self.d()));
        }
        Ok(())
    }

    pub fn support_spec(&self) -> SupportSpec {
        let kind = match &self.family {
            Family::Exponential { .. } => SupportKind::HalfLine,
            Family::Laplace { .. } | Family::StudentT { .. } => SupportKind::FullSpace,
            Family::Uniform { upper } => {
                if upper.is_constant() {
                    SupportKind::Interval
                } else {
                    SupportKind::XDependentInterval
                }
            }
            Family::BoundedSmooth { lower, width } => {
                if lower.is_constant() && width.is_constant() {
                    SupportKind::Interval
                } else {
                    SupportKind::XDependentInterval
                }
            }
            Family::Custom(c) => return c.support,
        };
        SupportSpec { kind, dim: 1 }
    }

    pub fn support_at(&self, x: &[f64]) -> Result<(f64, f64)> {
        Ok(self.law(x)?.support())
    }

    /// Sample points of the covariate box: the corners plus a regular grid.
    pub fn x_probe_points(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let (lo, hi) = self.x_law.bounds();
        let dx = lo.len();
        let k = per_axis.max(2);
        let total = k.pow(dx as u32);
        (0..total)
            .map(|mut idx| {
                (0..dx)
                    .map(|a| {
                        let i = idx % k;
                        idx /= k;
                        lo[a] + (hi[a] - lo[a]) * i as f64 / (k - 1) as f64
                    })
                    .collect()
            })
            .collect()
    }

    /// Union of the supports over the covariate box.
    pub fn support_hull(&self) -> Result<(f64, f64)> {
        let (lo, hi) = self.x_law.bounds();
        match &self.family {
            Family::Exponential { .. } => Ok((0.0, f64::INFINITY)),
            Family::Laplace { .. } | Family::StudentT { .. } => Ok((f64::NEG_INFINITY, f64::INFINITY)),
            Family::Uniform { upper } => Ok((0.0, upper.range_on(&lo, &hi).1)),
            _ => {
                let mut a = f64::INFINITY;
                let mut b = f64::NEG_INFINITY;
                for x in self.x_probe_points(9) {
                    let (s, t) = self.support_at(&x)?;
                    a = a.min(s);
                    b = b.max(t);
                }
                Ok((a, b))
            }
        }
    }

    /// True when no parameter curve depends on x.
    pub fn is_x_free(&self) -> bool {
        match &self.family {
            Family::Custom(_) => false,
            _ => self.curves().iter().all(|(_, c)| c.is_constant()),
        }
    }

    /// sup over (y, x) of f(y|x).
    pub fn density_sup(&self) -> Result<f64> {
        let (lo, hi) = self.x_law.bounds();
        Ok(match &self.family {
            Family::Exponential { rate } => rate.range_on(&lo, &hi).1,
            Family::Laplace { rate } => 0.5 * rate.range_on(&lo, &hi).1,
            Family::Uniform { upper } => 1.0 / upper.range_on(&lo, &hi).0,
            Family::StudentT { nu, scale, .. } => student_log_norm(*nu).exp() / scale.range_on(&lo, &hi).0,
            Family::BoundedSmooth { width, .. } => 2.0 / width.range_on(&lo, &hi).0,
            Family::Custom(c) => c
                .density_sup
                .ok_or_else(|| Error::SupUnknown(format!("custom law {} declares no density bound", c.name)))?,
        })
    }

    /// Order n with f ≥ c·(distance to the support end)^n near the ends, for bounded supports.
    pub fn boundary_order(&self) -> Option<u32> {
        match self.family {
            Family::Uniform { .. } => Some(0),
            Family::BoundedSmooth { .. } => Some(2),
            _ => None,
        }
    }

    /// True when f(y|x) > 0 for every y on the whole real line.
    pub fn positive_everywhere(&self) -> bool {
        match &self.family {
            Family::Laplace { .. } | Family::StudentT { .. } => true,
            Family::Custom(c) => c.support.kind == SupportKind::FullSpace,
            _ => false,
        }
    }

    /// (∂/∂z, ∇_t) of log f(z|t).
    pub fn grad_log_pdf_joint(&self, z: f64, t: &[f64]) -> Result<(f64, Vec<f64>)> {
        let dx = self.dx();
        let mut g1 = vec![0.0; dx];
        let mut g2 = vec![0.0; dx];
        let law = self.law(t)?;
        let gz = law.dlog_pdf(z);
        let gt = match &self.family {
            Family::Exponential { rate } => {
                rate.grad(t, &mut g1);
                let r = rate.eval(t);
                g1.iter().map(|d| d * (1.0 / r - z)).collect()
            }
            Family::Laplace { rate } => {
                rate.grad(t, &mut g1);
                let r = rate.eval(t);
                g1.iter().map(|d| d * (1.0 / r - z.abs())).collect()
            }
            Family::Uniform { .. } => {
                return Err(Error::Unsupported("uniform log-density is not differentiable at its support end".into()))
            }
            Family::StudentT { nu, location, scale } => {
                location.grad(t, &mut g1);
                scale.grad(t, &mut g2);
                let (b, c) = (location.eval(t), scale.eval(t));
                let u = (z - b) / c;
                let psi = (nu + 1.0) * u / (nu + u * u);
                g1.iter().zip(&g2).map(|(db, dc)| -dc / c + psi * (db + u * dc) / c).collect()
            }
            Family::BoundedSmooth { lower, width } => {
                lower.grad(t, &mut g1);
                width.grad(t, &mut g2);
                let (a, w) = (lower.eval(t), width.eval(t));
                let u = (z - a) / w;
                let cot = 1.0 / (PI * u).tan();
                g1.iter().zip(&g2).map(|(da, dw)| -dw / w - 2.0 * PI * cot * (da + u * dw) / w).collect()
            }
            Family::Custom(_) => {
                let mut out = Vec::with_capacity(dx);
                let mut tp = t.to_vec();
                for a in 0..dx {
                    let eps = 1e-6 * (1.0 + t[a].abs());
                    tp[a] = t[a] + eps;
                    let up = self.log_pdf(z, &tp)?;
                    tp[a] = t[a] - eps;
                    let dn = self.log_pdf(z, &tp)?;
                    tp[a] = t[a];
                    out.push((up - dn) / (2.0 * eps));
                }
                out
            }
        };
        Ok((gz, gt))
    }

    /// Grid envelope of ‖∇_(z,t) log f(z|t)‖ over z in [zlo, zhi] and ‖t − x‖_∞ ≤ rad, t clamped to X.
    pub fn joint_grad_sup(&self, zlo: f64, zhi: f64, x: &[f64], rad: f64) -> Result<f64> {
        const K: usize = 5;
        let (blo, bhi) = self.x_law.bounds();
        let dx = x.len();
        let mut best = 0.0f64;
        let mut t = vec![0.0; dx];
        for idx in 0..K.pow(dx as u32) {
            let mut r = idx;
            for a in 0..dx {
                let i = r % K;
                r /= K;
                let v = x[a] - rad + 2.0 * rad * i as f64 / (K - 1) as f64;
                t[a] = v.clamp(blo[a], bhi[a]);
            }
            let law = self.law(&t)?;
            let (slo, shi) = law.support();
            let (a, b) = (zlo.max(slo), zhi.min(shi));
            for j in 0..K {
                let z = a + (b - a) * j as f64 / (K - 1) as f64;
                let (gz, gt) = self.grad_log_pdf_joint(z, &t)?;
                let n = (gz * gz + gt.iter().map(|g| g * g).sum::<f64>()).sqrt();
                best = best.max(n);
            }
            // the y-part alone has an exact supremum
            best = best.max(law.grad_sup(a, b)?);
        }
        Ok(best)
    }

    /// One (y, x) draw.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R, x: &mut Vec<f64>) -> Result<f64> {
        self.x_law.sample_into(rng, x);
        self.law(x)?.sample(rng)
    }

    /// `n` joint draws, reproducible from `seed`, in the same order the KL estimator consumes them.
    pub fn sample_joint(&self, n: usize, seed: u64) -> Result<Vec<(f64, Vec<f64>)>> {
        if n == 0 {
            return Err(Error::InvalidCount { what: "sample size", got: 0 });
        }
        let mut out = Vec::with_capacity(n);
        let mut x = Vec::new();
        for (shard, count) in crate::divergence::shards(n) {
            let mut rng = crate::divergence::shard_rng(seed, shard);
            for _ in 0..count {
                let y = self.sample_pair(&mut rng, &mut x)?;
                out.push((y, x.clone()));
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp1() -> TargetDensity {
        TargetDensity::exponential(Curve::constant(1.0), XLaw::unit(1)).unwrap()
    }

    #[test]
    fn pdf_examples() {
        let t = TargetDensity::exponential(Curve::linear(&[1.0]), XLaw::uniform(&[1.0], &[2.0])).unwrap();
        assert_eq!(t.pdf(0.0, &[1.0]).unwrap(), 1.0);
        let u = TargetDensity::uniform(Curve::linear(&[1.0]), XLaw::uniform(&[1.0], &[3.0])).unwrap();
        assert_eq!(u.pdf(0.5, &[2.0]).unwrap(), 0.5);
        let l = TargetDensity::laplace(Curve::constant(1.0), XLaw::unit(1)).unwrap();
        assert_eq!(l.pdf(0.0, &[0.3]).unwrap(), 0.5);
    }

    #[test]
    fn cdf_and_quantile_examples() {
        let e = exp1();
        assert!((e.cdf(2f64.ln(), &[0.5]).unwrap() - 0.5).abs() < 1e-15);
        assert!((e.quantile(0.5, &[0.5]).unwrap() - 2f64.ln()).abs() < 1e-15);
        let l = TargetDensity::laplace(Curve::constant(1.0), XLaw::unit(1)).unwrap();
        assert_eq!(l.cdf(0.0, &[0.1]).unwrap(), 0.5);
        assert!((l.quantile(0.25, &[0.1]).unwrap() - 0.5f64.ln()).abs() < 1e-15);
        let u = TargetDensity::uniform(Curve::constant(3.0), XLaw::unit(1)).unwrap();
        assert!((u.quantile(1.0 / 3.0, &[0.1]).unwrap() - 1.0).abs() < 1e-15);
        let u2 = TargetDensity::uniform(Curve::constant(2.0), XLaw::unit(1)).unwrap();
        assert_eq!(u2.cdf(1.0, &[0.5]).unwrap(), 0.5);
    }

    #[test]
    fn cell_prob_examples() {
        let e = exp1();
        assert!((e.cell_prob(0.0, 2f64.ln(), &[0.2]).unwrap() - 0.5).abs() < 1e-15);
        let u = TargetDensity::uniform(Curve::constant(1.0), XLaw::unit(1)).unwrap();
        assert!((u.cell_prob(0.25, 0.75, &[0.2]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn laplace_cell_against_trapezoid() {
        let l = TargetDensity::laplace(Curve::constant(1.0), XLaw::unit(1)).unwrap();
        let got = l.cell_prob(-0.1, 0.1, &[0.5]).unwrap();
        let n = 1_000_000;
        let h = 0.2 / n as f64;
        let mut s = 0.0;
        for i in 0..=n {
            let y = -0.1 + h * i as f64;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            s += w * 0.5 * (-y.abs()).exp();
        }
        s *= h;
        assert!((got - s).abs() < 1e-12, "{got} vs {s}");
        assert!((got - (2.0 * (1.0 - 0.5 * (-0.1f64).exp()) - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn student_grad_sup_against_grid() {
        let t = TargetDensity::student_t(3.0, Curve::constant(0.0), Curve::constant(1.0), XLaw::unit(1)).unwrap();
        let got = t.grad_log_pdf_sup(0.0, 0.1, &[0.5]).unwrap();
        let oracle = (0..=10_000)
            .map(|i| {
                let z = 0.1 * i as f64 / 10_000.0;
                (4.0 * z / (3.0 + z * z)).abs()
            })
            .fold(0.0, f64::max);
        assert!((got - oracle).abs() < 1e-12);
        let peak = t.grad_log_pdf_sup(0.0, 5.0, &[0.5]).unwrap();
        assert!((peak - 4.0 / (2.0 * 3f64.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn gradient_examples() {
        let e = TargetDensity::exponential(Curve::constant(2.0), XLaw::unit(1)).unwrap();
        assert_eq!(e.grad_log_pdf_sup(1.0, 2.0, &[0.5]).unwrap(), 2.0);
        let l = TargetDensity::laplace(Curve::constant(1.0), XLaw::unit(1)).unwrap();
        assert_eq!(l.grad_log_pdf_sup(1.0, 2.0, &[0.5]).unwrap(), 1.0);
        let u = TargetDensity::uniform(Curve::constant(1.0), XLaw::unit(1)).unwrap();
        assert!(matches!(u.grad_log_pdf_sup(0.1, 0.2, &[0.5]), Err(Error::Unsupported(_))));
    }

    #[test]
    fn constraint_violations_rejected() {
        assert!(TargetDensity::exponential(Curve::affine(-1.0, &[1.0]), XLaw::unit(1)).is_err());
        assert!(TargetDensity::student_t(2.0, Curve::constant(0.0), Curve::constant(1.0), XLaw::unit(1)).is_err());
        let t = TargetDensity::exponential(Curve::affine(0.5, &[1.0]), XLaw::unit(1)).unwrap();
        assert!(matches!(t.pdf(0.0, &[-1.0]), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn sample_joint_contract() {
        let e = exp1();
        assert!(e.sample_joint(0, 1).is_err());
        let a = e.sample_joint(1, 42).unwrap();
        let b = e.sample_joint(1, 42).unwrap();
        assert_eq!(a[0].0.to_bits(), b[0].0.to_bits());
        let u = TargetDensity::uniform(Curve::linear(&[1.0]), XLaw::uniform(&[1.0], &[2.0])).unwrap();
        for (y, x) in u.sample_joint(10_000, 3).unwrap() {
            assert!(0.0 <= y && y <= x[0]);
        }
    }

    #[test]
    fn exponential_sample_mean() {
        let e = TargetDensity::exponential(Curve::constant(1.0), XLaw::point(&[0.0])).unwrap();
        let s = e.sample_joint(1_000_000, 11).unwrap();
        let mean = s.iter().map(|p| p.0).sum::<f64>() / s.len() as f64;
        assert!((mean - 1.0).abs() < 0.003, "{mean}");
    }

    #[test]
    fn custom_without_cdf_uses_quadrature() {
        let law = CustomLaw::new("logistic", |y, _| {
            let e = (-y.abs()).exp();
            e / ((1.0 + e) * (1.0 + e))
        });
        let t = TargetDensity::custom(law, XLaw::unit(1)).unwrap();
        let c = t.cdf(1.0, &[0.5]).unwrap();
        assert!((c - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-9);
        let q = t.quantile(0.75, &[0.5]).unwrap();
        assert!((q - 3f64.ln()).abs() < 1e-7);
    }

    #[test]
    fn serde_roundtrip() {
        let t = TargetDensity::student_t(5.0, Curve::linear(&[1.0]), Curve::constant(2.0), XLaw::unit(1)).unwrap();
        let s = serde_json::to_string(&t).unwrap();
        let back: TargetDensity = serde_json::from_str(&s).unwrap();
        assert_eq!(back.kind(), FamilyKind::StudentT);
        assert_eq!(back.pdf(0.3, &[0.2]).unwrap(), t.pdf(0.3, &[0.2]).unwrap());
    }
}
