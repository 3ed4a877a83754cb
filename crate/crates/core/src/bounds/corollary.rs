use serde::{Deserialize, Serialize};

use crate::discretization::{epp_offset, grid_partition, Domain, Param, Schedule, XGrid};
use crate::divergence::{run_shards, Moments};
use crate::error::{Error, Result};
use crate::mixtures::ModelKind;
use crate::targets::{FamilyKind, TargetDensity};

/// Which form of the local and tail integrands to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// log f(y|x) / inf over the cube of f(z|x); needs f > 0 on the whole line
    PartI,
    /// cube radius times the sup of |d log f / dz|; needs a differentiable log density
    PartII,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermMethod {
    ClosedForm,
    MonteCarlo,
}

/// One additive piece of a bound. `value` is a magnitude; `negative` marks terms entering with a minus sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundTerm {
    pub key: String,
    pub value: f64,
    pub negative: bool,
    /// 0 for closed-form terms
    pub std_error: f64,
    pub method: TermMethod,
}

impl BoundTerm {
    fn closed(key: &str, signed: f64) -> Self {
        Self { key: key.into(), value: signed.abs(), negative: signed < 0.0, std_error: 0.0, method: TermMethod::ClosedForm }
    }

    fn mc(key: &str, scale: f64, m: &Moments) -> Self {
        Self {
            key: key.into(),
            value: scale * m.mean,
            negative: false,
            std_error: scale * m.se(),
            method: TermMethod::MonteCarlo,
        }
    }

    pub fn signed(&self) -> f64 {
        if self.negative {
            -self.value
        } else {
            self.value
        }
    }
}

/// Term-by-term evaluation of an explicit KL upper bound at one m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundBreakdown {
    pub model: ModelKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub variant: Option<Variant>,
    pub m: usize,
    pub d: usize,
    pub q: f64,
    pub h: f64,
    pub sigma: f64,
    pub delta: f64,
    pub r: f64,
    pub sigma0: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub big_r: Option<f64>,
    pub n: usize,
    pub seed: u64,
    /// share of draws whose δ-cube meets the tail region
    pub tail_fraction: f64,
    pub terms: Vec<BoundTerm>,
    /// sum of the signed terms
    pub total: f64,
    /// standard error of the Monte Carlo part of `total`
    pub total_se: f64,
}

impl BoundBreakdown {
    pub fn term(&self, key: &str) -> Option<&BoundTerm> {
        self.terms.iter().find(|t| t.key == key)
    }

    fn finish(mut self) -> Self {
        self.total = self.terms.iter().map(BoundTerm::signed).sum();
        self
    }
}

/// Monte Carlo budget of the bound integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundSettings {
    pub n: usize,
    pub seed: u64,
    #[serde(default = "one")]
    pub workers: usize,
}

fn one() -> usize {
    1
}

impl BoundSettings {
    pub fn new(n: usize, seed: u64) -> Self {
        Self { n, seed, workers: 1 }
    }

    fn check(&self) -> Result<()> {
        if self.n < 100 {
            return Err(Error::InvalidCount { what: "bound Monte Carlo size (>= 100)", got: self.n });
        }
        Ok(())
    }
}

/// 2 · 3 d^{3/2} δ^{d−1} h / ((2π)^{d/2} σ^d)
pub fn riemann_term(d: usize, delta: f64, h: f64, sigma: f64) -> f64 {
    let d = d as f64;
    6.0 * d.powf(1.5) * delta.powf(d - 1.0) * h / ((2.0 * std::f64::consts::PI).powf(0.5 * d) * sigma.powf(d))
}

/// 2 exp{−(δ/σ)²/8}
pub fn gaussian_tail_term(delta: f64, sigma: f64) -> f64 {
    let t = delta / sigma;
    2.0 * (-0.125 * t * t).exp()
}

/// log(1 − dx^{dx/2} e^{−R s} / s^{dx/2}), the weight lost by the covariate softmax; ≤ 0.
pub fn logit_term(dx: usize, s: f64, big_r: f64) -> Result<f64> {
    let half = 0.5 * dx as f64;
    let leak = (half * (dx as f64).ln() - big_r * s - half * s.ln()).exp();
    if !(leak < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "softmax leakage {leak} ≥ 1 (dx = {dx}, s = {s}, R = {big_r}); the logit term is undefined"
        )));
    }
    Ok((-leak).ln_1p())
}

struct Consts {
    h: f64,
    sigma: f64,
    delta: f64,
    sigma0: f64,
    r: f64,
}

impl Consts {
    fn of(s: &Schedule) -> Result<Self> {
        let c = |p: &Param| p.constant().ok_or(Error::XDependentSchedule);
        Ok(Self { h: c(&s.h)?, sigma: c(&s.sigma)?, delta: c(&s.delta)?, sigma0: c(&s.sigma0)?, r: c(&s.r)? })
    }

    /// −log((r/2)^d / (2π σ_0²)^{d/2})
    fn quad_offset(&self, d: usize) -> f64 {
        let d = d as f64;
        -(d * (0.5 * self.r).ln() - 0.5 * d * (2.0 * std::f64::consts::PI * self.sigma0 * self.sigma0).ln())
    }

    fn breakdown(&self, model: ModelKind, variant: Option<Variant>, m: usize, d: usize, q: f64, st: &BoundSettings) -> BoundBreakdown {
        BoundBreakdown {
            model,
            variant,
            m,
            d,
            q,
            h: self.h,
            sigma: self.sigma,
            delta: self.delta,
            r: self.r,
            sigma0: self.sigma0,
            s: None,
            big_r: None,
            n: st.n,
            seed: st.seed,
            tail_fraction: 0.0,
            terms: vec![],
            total: 0.0,
            total_se: 0.0,
        }
    }
}

fn check_q(q: f64) -> Result<()> {
    if !(q > 2.0) {
        return Err(Error::InvalidMoment(q));
    }
    Ok(())
}

/// Per-draw integrands: [local, tail-local, tail-quadratic] and the tail-region indicator.
type Draw = ([f64; 3], bool);

struct Integrals {
    parts: [Moments; 3],
    total: Moments,
    hits: usize,
}

/// Sharded Monte Carlo means of the three integrands; `scale` weights them into the bound total.
fn integrate(
    target: &TargetDensity,
    st: &BoundSettings,
    scale: [f64; 3],
    f: impl Fn(f64, &[f64]) -> Result<Draw> + Sync + Send,
) -> Result<Integrals> {
    let shards = run_shards(st.n, st.seed, st.workers, |rng, count| {
        let mut x = Vec::new();
        let mut acc = Integrals { parts: [Moments::default(); 3], total: Moments::default(), hits: 0 };
        for _ in 0..count {
            let y = target.sample_pair(rng, &mut x)?;
            let (v, hit) = f(y, &x)?;
            if v.iter().any(|t| !t.is_finite()) {
                return Err(Error::UnsupportedVariant(format!("bound integrand is infinite at y = {y}, x = {x:?}")));
            }
            acc.hits += hit as usize;
            let mut tot = 0.0;
            for k in 0..3 {
                acc.parts[k].push(v[k]);
                tot += scale[k] * v[k];
            }
            acc.total.push(tot);
        }
        Ok(acc)
    })?;
    Ok(shards.into_iter().fold(
        Integrals { parts: [Moments::default(); 3], total: Moments::default(), hits: 0 },
        |a, b| Integrals {
            parts: [a.parts[0].merge(b.parts[0]), a.parts[1].merge(b.parts[1]), a.parts[2].merge(b.parts[2])],
            total: a.total.merge(b.total),
            hits: a.hits + b.hits,
        },
    ))
}

fn no_gradient(target: &TargetDensity) -> Result<()> {
    if target.kind() == FamilyKind::Uniform {
        return Err(Error::UnsupportedVariant("the uniform log density has no gradient at its support ends".into()));
    }
    Ok(())
}

fn unsupported(e: Error) -> Error {
    match e {
        Error::Unsupported(s) => Error::UnsupportedVariant(s),
        e => e,
    }
}

/// Bound for the grid model M0 (and M1 up to its 2ε slack).
pub fn corollary1_bound(
    target: &TargetDensity,
    schedule: &Schedule,
    m: usize,
    q: f64,
    variant: Variant,
    st: &BoundSettings,
) -> Result<BoundBreakdown> {
    check_q(q)?;
    st.check()?;
    if !matches!(schedule.kind, ModelKind::M0 | ModelKind::M1) {
        return Err(Error::InconsistentInputs(format!("grid-model bound given a {} schedule", schedule.kind)));
    }
    if schedule.m != m {
        return Err(Error::InconsistentInputs(format!("schedule m = {} but m = {m}", schedule.m)));
    }
    let c = Consts::of(schedule)?;
    let domain = match &schedule.domain {
        Some(d) => d.clone(),
        None => Domain::for_target(target)?,
    };
    let part = grid_partition(domain, m)?;
    if (part.h - c.h).abs() > 1e-12 * c.h {
        return Err(Error::InconsistentInputs(format!("schedule h = {} but partition h = {}", c.h, part.h)));
    }
    let d = part.dim;
    match variant {
        Variant::PartI if !target.positive_everywhere() => {
            return Err(Error::UnsupportedVariant(format!("{} density is not positive on the whole line", target.kind())))
        }
        Variant::PartII => no_gradient(target)?,
        _ => {}
    }
    let qo = c.quad_offset(d);
    let rad = (d as f64).sqrt() * 0.5;
    let scale = match variant {
        Variant::PartI => [1.0, 1.0, 1.0],
        Variant::PartII => [c.delta * rad, c.r * rad, 1.0],
    };
    let acc = integrate(target, st, scale, |y, x| {
        let law = target.law(x)?;
        let hit = part.cube_meets_tail(&[y], c.delta);
        let local = |w: f64| -> Result<f64> {
            match variant {
                Variant::PartI => Ok(law.log_pdf(y) - law.inf_pdf(y - 0.5 * w, y + 0.5 * w).ln()),
                Variant::PartII => law.grad_sup(y - 0.5 * w, y + 0.5 * w).map_err(unsupported),
            }
        };
        let v0 = local(c.delta)?;
        let (v1, v2) = if hit { (local(c.r)?, y * y / (2.0 * c.sigma0 * c.sigma0) + qo) } else { (0.0, 0.0) };
        Ok(([v0, v1, v2], hit))
    })?;
    let (k_local, k_tail) = match variant {
        Variant::PartI => ("local_log_ratio", "tail_log_ratio"),
        Variant::PartII => ("local_modulus", "tail_gradient"),
    };
    let mut b = c.breakdown(schedule.kind, Some(variant), m, d, q, st);
    b.tail_fraction = acc.hits as f64 / acc.total.n as f64;
    b.total_se = acc.total.se();
    b.terms = vec![
        BoundTerm::mc(k_local, scale[0], &acc.parts[0]),
        BoundTerm::closed("riemann_sum", riemann_term(d, c.delta, c.h, c.sigma)),
        BoundTerm::closed("gaussian_tail", gaussian_tail_term(c.delta, c.sigma)),
        BoundTerm::mc(k_tail, scale[1], &acc.parts[1]),
        BoundTerm::mc("tail_quadratic", 1.0, &acc.parts[2]),
    ];
    Ok(b.finish())
}

/// Bound for the covariate-grid model M3: joint (z, t) gradients plus the softmax leakage term.
pub fn corollary3_bound(
    target: &TargetDensity,
    schedule: &Schedule,
    m: usize,
    xgrid: &XGrid,
    q: f64,
    st: &BoundSettings,
) -> Result<BoundBreakdown> {
    check_q(q)?;
    st.check()?;
    if schedule.kind != ModelKind::M3 {
        return Err(Error::InconsistentInputs(format!("covariate-grid bound given a {} schedule", schedule.kind)));
    }
    if schedule.m != m {
        return Err(Error::InconsistentInputs(format!("schedule m = {} but m = {m}", schedule.m)));
    }
    if !target.x_law.is_unit_cube() || xgrid.dx != target.dx() {
        return Err(Error::InconsistentInputs("the covariate grid needs X = [0,1]^dx matching the target".into()));
    }
    no_gradient(target)?;
    let c = Consts::of(schedule)?;
    let s = xgrid.s();
    let big_r = schedule
        .big_r
        .ok_or_else(|| Error::InconsistentInputs("schedule carries no logit sharpness R".into()))?;
    let domain = match &schedule.domain {
        Some(d) => d.clone(),
        None => Domain::for_target(target)?,
    };
    let part = grid_partition(domain, m)?;
    let d = part.dim;
    let qo = c.quad_offset(d);
    let rad = (d as f64).sqrt() * 0.5;
    let scale = [c.delta * rad + s.sqrt(), c.r * rad, 1.0];
    let acc = integrate(target, st, scale, |y, x| {
        let hit = part.cube_meets_tail(&[y], c.delta);
        let sup = |w: f64, t: f64| target.joint_grad_sup(y - 0.5 * w, y + 0.5 * w, x, t).map_err(unsupported);
        let v0 = sup(c.delta, s.sqrt())?;
        let (v1, v2) = if hit { (sup(c.r, c.r)?, y * y / (2.0 * c.sigma0 * c.sigma0) + qo) } else { (0.0, 0.0) };
        Ok(([v0, v1, v2], hit))
    })?;
    let mut b = c.breakdown(ModelKind::M3, Some(Variant::PartII), m, d, q, st);
    b.s = Some(s);
    b.big_r = Some(big_r);
    b.tail_fraction = acc.hits as f64 / acc.total.n as f64;
    b.total_se = acc.total.se();
    b.terms = vec![
        BoundTerm::mc("local_joint_modulus", scale[0], &acc.parts[0]),
        BoundTerm::closed("riemann_sum", riemann_term(d, c.delta, c.h, c.sigma)),
        BoundTerm::closed("gaussian_tail", gaussian_tail_term(c.delta, c.sigma)),
        BoundTerm::mc("tail_joint_gradient", scale[1], &acc.parts[1]),
        BoundTerm::mc("tail_quadratic", 1.0, &acc.parts[2]),
        BoundTerm::closed("logit_leakage", logit_term(xgrid.dx, s, big_r)?),
    ];
    Ok(b.finish())
}

/// Bound for the equal-probability model M4 with x-free h, σ, δ and r.
pub fn corollary6_bound(target: &TargetDensity, schedule: &Schedule, m: usize, st: &BoundSettings) -> Result<BoundBreakdown> {
    st.check()?;
    if schedule.kind != ModelKind::M4 {
        return Err(Error::InconsistentInputs(format!("equal-probability bound given a {} schedule", schedule.kind)));
    }
    if schedule.m != m {
        return Err(Error::InconsistentInputs(format!("schedule m = {} but m = {m}", schedule.m)));
    }
    if target.d() != 1 {
        return Err(Error::UnsupportedDimension(target.d()));
    }
    let c = Consts::of(schedule)?;
    let p = schedule
        .p
        .ok_or_else(|| Error::InconsistentInputs("schedule carries no cell probability p".into()))?;
    no_gradient(target)?;
    let offset = epp_offset(target, m, p);
    let has_tail = 1.0 - m as f64 * p > 1e-12;
    let top = (offset + m as f64 * p).min(1.0);
    let qo = c.quad_offset(1);
    let scale = [0.5 * c.delta, 0.5 * c.r, 1.0];
    let acc = integrate(target, st, scale, |y, x| {
        let law = target.law(x)?;
        let hit = has_tail && {
            let (slo, shi) = law.support();
            let (lo, hi) = (law.quantile(offset)?, law.quantile(top)?);
            (lo > slo && y - 0.5 * c.delta < lo) || (hi < shi && y + 0.5 * c.delta >= hi)
        };
        let sup = |w: f64| law.grad_sup(y - 0.5 * w, y + 0.5 * w).map_err(unsupported);
        let v0 = sup(c.delta)?;
        let (v1, v2) = if hit { (sup(c.r)?, y * y / (2.0 * c.sigma0 * c.sigma0) + qo) } else { (0.0, 0.0) };
        Ok(([v0, v1, v2], hit))
    })?;
    let mut b = c.breakdown(ModelKind::M4, Some(Variant::PartII), m, 1, f64::INFINITY, st);
    b.tail_fraction = acc.hits as f64 / acc.total.n as f64;
    b.total_se = acc.total.se();
    b.terms = vec![
        BoundTerm::mc("local_modulus", scale[0], &acc.parts[0]),
        BoundTerm::closed("riemann_sum", riemann_term(1, c.delta, c.h, c.sigma)),
        BoundTerm::closed("gaussian_tail", gaussian_tail_term(c.delta, c.sigma)),
        BoundTerm::mc("tail_gradient", scale[1], &acc.parts[1]),
        BoundTerm::mc("tail_quadratic", 1.0, &acc.parts[2]),
    ];
    Ok(b.finish())
}
