use serde::{Deserialize, Serialize};

use super::partition::{int_root_ceil, Domain};
use crate::error::{Error, Result};
use crate::mixtures::ModelKind;
use crate::special::INV_SQRT_2PI;
use crate::targets::{std_quantile, Curve, Family, FamilyKind, SupportKind, TargetDensity};

/// A tuning value: a constant or factor · curve(x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Const(f64),
    Scaled { factor: f64, curve: Curve },
}

impl Param {
    pub fn at(&self, x: &[f64]) -> f64 {
        match self {
            Param::Const(v) => *v,
            Param::Scaled { factor, curve } => factor * curve.eval(x),
        }
    }

    pub fn is_const(&self) -> bool {
        match self {
            Param::Const(_) => true,
            Param::Scaled { curve, .. } => curve.is_constant(),
        }
    }

    /// Value for x-free parameters; None when the parameter varies with x.
    pub fn constant(&self) -> Option<f64> {
        match self {
            Param::Const(v) => Some(*v),
            Param::Scaled { factor, curve } if curve.is_constant() => Some(factor * curve.eval(&[])),
            _ => None,
        }
    }
}

/// Tuning sequences of one model at one m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub kind: ModelKind,
    pub family: FamilyKind,
    pub m: usize,
    pub d: usize,
    pub dx: usize,
    /// covariate box the x-curves are evaluated over
    pub x_lo: Vec<f64>,
    pub x_hi: Vec<f64>,
    pub h: Param,
    pub sigma: Param,
    pub delta: Param,
    pub sigma0: Param,
    pub r: Param,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub domain: Option<Domain>,
    /// x-grid cells per axis (M3)
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub s: Option<f64>,
    #[serde(rename = "big_r", skip_serializing_if = "Option::is_none", default)]
    pub big_r: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

impl Schedule {
    /// Hand-built x-free schedule over a unit covariate interval.
    pub fn constant(kind: ModelKind, m: usize, h: f64, sigma: f64, delta: f64, sigma0: f64, r: f64) -> Self {
        Self {
            kind,
            family: FamilyKind::Custom,
            m,
            d: 1,
            dx: 1,
            x_lo: vec![0.0],
            x_hi: vec![1.0],
            h: Param::Const(h),
            sigma: Param::Const(sigma),
            delta: Param::Const(delta),
            sigma0: Param::Const(sigma0),
            r: Param::Const(r),
            p: None,
            domain: None,
            k: None,
            s: None,
            big_r: None,
            notes: vec![],
        }
    }

    pub fn is_x_free(&self) -> bool {
        [&self.h, &self.sigma, &self.delta, &self.sigma0, &self.r].iter().all(|p| p.is_const())
    }

    /// Regular probe grid over the covariate box, corners included.
    pub fn x_probes(&self) -> Vec<Vec<f64>> {
        probe_grid(&self.x_lo, &self.x_hi, 9)
    }

    fn sup_over_x(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.x_probes().iter().map(|x| f(x)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Tail-scale value checked by the σ_0 condition: (r/2)^d φ(0; 0, σ_0)^d, sup over x.
    pub fn sigma0_statistic(&self) -> f64 {
        let d = self.d as i32;
        self.sup_over_x(|x| {
            let s0 = self.sigma0.at(x);
            let r = self.r.at(x);
            (0.5 * r).powi(d) * (INV_SQRT_2PI / s0).powi(d)
        })
    }

    /// (bound, strict) of the σ_0 condition for this model kind.
    pub fn sigma0_bound(&self) -> (f64, bool) {
        match self.kind {
            ModelKind::M4 | ModelKind::M5 => (0.25, false),
            _ => (0.5f64.powi(self.d as i32 + 1), true),
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.m < 1 {
            return Err(Error::InvalidCount { what: "schedule m", got: self.m });
        }
        for x in self.x_probes() {
            for (name, p) in [("h", &self.h), ("sigma", &self.sigma), ("delta", &self.delta), ("sigma0", &self.sigma0), ("r", &self.r)] {
                let v = p.at(&x);
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::InvalidParameter(format!("schedule {name} = {v} at x = {x:?} (m = {})", self.m)));
                }
            }
        }
        if let Some(p) = self.p {
            if !(p > 0.0) || self.m as f64 * p > 1.0 + 1e-12 {
                return Err(Error::InvalidProb(format!("schedule p = {p} at m = {}", self.m)));
            }
        }
        Ok(())
    }

    /// Named rate ratios required to vanish for this model kind, sup over x.
    pub fn ratios(&self) -> Vec<(&'static str, f64)> {
        let d = self.d as i32;
        let mut out = vec![
            ("delta", self.sup_over_x(|x| self.delta.at(x))),
            ("sigma/delta", self.sup_over_x(|x| self.sigma.at(x) / self.delta.at(x))),
        ];
        match self.kind {
            ModelKind::M4 | ModelKind::M5 => {
                out.push(("h/sigma", self.sup_over_x(|x| self.h.at(x) / self.sigma.at(x))));
                out.push(("sigma/r", self.sup_over_x(|x| self.sigma.at(x) / self.r.at(x))));
            }
            _ => {
                out.push((
                    "delta^(d-1)h/sigma^d",
                    self.sup_over_x(|x| self.delta.at(x).powi(d - 1) * self.h.at(x) / self.sigma.at(x).powi(d)),
                ));
                if let (Some(s), Some(big_r)) = (self.s, self.big_r) {
                    out.push(("exp(-Rs)/s^(dx/2)", (-big_r * s).exp() / s.powf(0.5 * self.dx as f64)));
                }
            }
        }
        out
    }
}

pub fn probe_grid(lo: &[f64], hi: &[f64], per_axis: usize) -> Vec<Vec<f64>> {
    let k = per_axis.max(2);
    let dx = lo.len();
    (0..k.pow(dx as u32))
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

fn base(kind: ModelKind, target: &TargetDensity, m: usize) -> Schedule {
    let (x_lo, x_hi) = target.x_law.bounds();
    let mut s = Schedule::constant(kind, m, 1.0, 1.0, 1.0, 1.0, 1.0);
    s.family = target.kind();
    s.d = target.d();
    s.dx = target.dx();
    s.x_lo = x_lo;
    s.x_hi = x_hi;
    s
}

fn unsupported(kind: ModelKind, target: &TargetDensity) -> Error {
    Error::UnsupportedCombination { model: kind.to_string(), family: target.kind().to_string() }
}

fn grid_schedule(kind: ModelKind, target: &TargetDensity, m: usize) -> Result<Schedule> {
    let mut s = base(kind, target, m);
    let domain = Domain::for_target(target)?;
    let d = domain.dim();
    let h = match domain {
        Domain::HalfLine => (m as f64).ln() / m as f64,
        Domain::FullSpace { .. } => {
            s.notes.push("symmetric fine block [-log m, log m) is a library default".into());
            2.0 * (m as f64).ln() / int_root_ceil(m, d as u32) as f64
        }
        Domain::Interval { lo, hi } => {
            if target.support_spec().kind == SupportKind::XDependentInterval {
                s.notes.push("x-dependent support partitioned over its hull".into());
            }
            (hi - lo) / m as f64
        }
    };
    s.domain = Some(domain);
    s.h = Param::Const(h);
    s.sigma = Param::Const(h.sqrt());
    s.delta = Param::Const(h.powf(0.25));
    s.r = Param::Const(1.0);
    s.sigma0 = Param::Const(1.0);
    if kind == ModelKind::M3 {
        if !target.x_law.is_unit_cube() {
            return Err(Error::InconsistentInputs("the covariate grid needs X = [0,1]^dx".into()));
        }
        let dx = target.dx();
        let k = int_root_ceil(m, 2 * dx as u32);
        let ss = dx as f64 / (k * k) as f64;
        s.k = Some(k);
        s.s = Some(ss);
        s.big_r = Some(ss.powi(-2));
    }
    Ok(s)
}

fn min_max(c: &Curve, s: &Schedule) -> (f64, f64) {
    c.range_on(&s.x_lo, &s.x_hi)
}

fn epp_schedule(kind: ModelKind, target: &TargetDensity, m: usize) -> Result<Schedule> {
    if target.d() != 1 {
        return Err(Error::UnsupportedDimension(target.d()));
    }
    let mut s = base(kind, target, m);
    let mf = m as f64;
    let tail_sigma0 = 2.0 * INV_SQRT_2PI;
    match &target.family {
        Family::Exponential { rate } => {
            let p = (mf - mf.sqrt()) / (mf * mf);
            let g_min = min_max(rate, &s).0;
            let h = (1.0 + p / (1.0 - p * mf)).ln() / g_min;
            s.p = Some(p);
            s.h = Param::Const(h);
            s.sigma = Param::Const(h.powf(0.25));
            s.delta = Param::Const(h.powf(0.125));
            s.r = Param::Const(1.0);
            s.sigma0 = Param::Const(tail_sigma0);
        }
        Family::Laplace { rate } => {
            let p = 1.0 / (mf + mf.sqrt());
            let g_min = min_max(rate, &s).0;
            let h = (1.0 + 2.0 * p / (1.0 - p * mf)).ln() / g_min;
            s.p = Some(p);
            s.h = Param::Const(h);
            s.sigma = Param::Const(h.powf(0.25));
            s.delta = Param::Const(h.powf(0.125));
            s.r = Param::Const(1.0);
            s.sigma0 = Param::Const(tail_sigma0);
            s.notes.push("tail probability uses g(m) = sqrt(m)".into());
        }
        Family::StudentT { nu, scale, .. } => {
            let p = 1.0 / (mf + mf.sqrt());
            let off = 0.5 * (1.0 - p * mf);
            let q = |u: f64| std_quantile(FamilyKind::StudentT, *nu, u).unwrap_or(f64::NAN);
            let h = min_max(scale, &s).1 * (q(off + p) - q(off));
            s.p = Some(p);
            s.h = Param::Const(h);
            s.sigma = Param::Const(h.powf(0.25));
            s.delta = Param::Const(h.powf(0.125));
            s.r = Param::Const(1.0);
            s.sigma0 = Param::Const(tail_sigma0);
            s.notes.push("student-t equal-probability recipe is a library default".into());
        }
        Family::Uniform { upper } => {
            let p = 1.0 / mf;
            s.p = Some(p);
            if kind == ModelKind::M5 {
                let b_min = min_max(upper, &s).0;
                s.h = Param::Scaled { factor: p, curve: upper.clone() };
                s.sigma = Param::Const(p.powf(0.125));
                s.delta = Param::Const(p.powf(0.0625));
                s.r = Param::Const(b_min);
                s.sigma0 = Param::Const(tail_sigma0 * b_min);
            } else {
                s.h = Param::Scaled { factor: p, curve: upper.clone() };
                s.sigma = Param::Scaled { factor: p.powf(0.25), curve: upper.clone() };
                s.delta = Param::Scaled { factor: p.powf(0.125), curve: upper.clone() };
                s.r = Param::Scaled { factor: 1.0, curve: upper.clone() };
                s.sigma0 = Param::Scaled { factor: tail_sigma0, curve: upper.clone() };
            }
        }
        Family::BoundedSmooth { width, .. } => {
            let p = 1.0 / mf;
            let n = target.boundary_order().unwrap_or(1).max(1) as f64;
            let e = 1.0 / (4.0 * (n + 1.0));
            let (w_min, w_max) = min_max(width, &s);
            // the end cells are the longest
            let h = w_max * std_quantile(FamilyKind::BoundedSmooth, 0.0, p).unwrap_or(f64::NAN);
            s.p = Some(p);
            s.h = Param::Const(h);
            s.sigma = Param::Const(p.powf(e));
            s.delta = Param::Const(p.powf(0.5 * e));
            s.r = Param::Const(0.25 * w_min);
            s.sigma0 = Param::Const(tail_sigma0 * 0.25 * w_min);
            s.notes.push(format!("scale exponent 1/(4(n+1)) with boundary order n = {n}"));
        }
        Family::Custom(_) => return Err(unsupported(kind, target)),
    }
    Ok(s)
}

pub fn default_schedule(kind: ModelKind, target: &TargetDensity, m: usize) -> Result<Schedule> {
    if m < 4 {
        return Err(Error::InvalidCount { what: "fine cell count m (schedules need m >= 4)", got: m });
    }
    let s = match kind {
        ModelKind::M0 | ModelKind::M1 | ModelKind::M3 => grid_schedule(kind, target, m)?,
        ModelKind::M4 | ModelKind::M5 => epp_schedule(kind, target, m)?,
        ModelKind::ExactWrapper | ModelKind::Fixed => return Err(unsupported(kind, target)),
    };
    s.check()?;
    Ok(s)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatioTrace {
    pub name: String,
    pub values: Vec<f64>,
    pub decreasing: bool,
    pub terminal: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sigma0Check {
    pub m: usize,
    pub value: f64,
    pub bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub kind: ModelKind,
    pub grid: Vec<usize>,
    pub ratios: Vec<RatioTrace>,
    pub sigma0: Vec<Sigma0Check>,
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that every required ratio strictly decreases over the m-grid and that σ_0 satisfies
/// the tail-scale inequality at every m.
pub fn validate_schedule(schedules: &[Schedule]) -> Result<ValidationReport> {
    if schedules.len() < 3 {
        return Err(Error::InvalidCount { what: "schedule grid length", got: schedules.len() });
    }
    let kind = schedules[0].kind;
    if schedules.iter().any(|s| s.kind != kind) {
        return Err(Error::InconsistentInputs("schedules mix model kinds".into()));
    }
    if schedules.windows(2).any(|w| w[1].m <= w[0].m) {
        return Err(Error::InconsistentInputs("schedule m-grid must be strictly increasing".into()));
    }
    let grid: Vec<usize> = schedules.iter().map(|s| s.m).collect();
    let per_m: Vec<Vec<(&'static str, f64)>> = schedules.iter().map(|s| s.ratios()).collect();
    let mut violations = Vec::new();
    let mut ratios = Vec::new();
    for (i, (name, _)) in per_m[0].iter().enumerate() {
        let values: Vec<f64> = per_m.iter().map(|r| r[i].1).collect();
        let decreasing = values.windows(2).all(|w| w[1] < w[0]);
        if !decreasing {
            violations.push(format!("{name} does not strictly decrease over m = {grid:?}: {values:?}"));
        }
        ratios.push(RatioTrace { name: name.to_string(), terminal: *values.last().unwrap(), values, decreasing });
    }
    let mut sigma0 = Vec::new();
    for s in schedules {
        let value = s.sigma0_statistic();
        let (bound, strict) = s.sigma0_bound();
        let ok = if strict { value < bound } else { value <= bound * (1.0 + 1e-12) };
        if !ok {
            violations.push(format!("sigma0 condition fails at m = {}: {value} vs bound {bound}", s.m));
        }
        sigma0.push(Sigma0Check { m: s.m, value, bound, ok });
    }
    Ok(ValidationReport { kind, grid, ratios, sigma0, violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::XLaw;

    fn expo() -> TargetDensity {
        TargetDensity::exponential(Curve::constant(1.0), XLaw::unit(1)).unwrap()
    }

    #[test]
    fn m0_half_line_values() {
        let s = default_schedule(ModelKind::M0, &expo(), 4).unwrap();
        let c = |p: &Param| p.constant().unwrap();
        assert!((c(&s.h) - 0.346_574).abs() < 1e-6);
        assert!((c(&s.sigma) - 0.588_705).abs() < 1e-6);
        assert!((c(&s.delta) - 0.767_271).abs() < 1e-6);
    }

    #[test]
    fn m3_grid_values() {
        let s = default_schedule(ModelKind::M3, &expo(), 16).unwrap();
        assert_eq!(s.k, Some(4));
        assert_eq!(s.s, Some(1.0 / 16.0));
        assert_eq!(s.big_r, Some(256.0));
    }

    #[test]
    fn m4_exponential_p() {
        let s = default_schedule(ModelKind::M4, &expo(), 4).unwrap();
        assert_eq!(s.p, Some(0.125));
    }

    #[test]
    fn m0_grid_validates() {
        let t = expo();
        let ss: Vec<Schedule> = [16, 64, 256, 1024].iter().map(|&m| default_schedule(ModelKind::M0, &t, m).unwrap()).collect();
        let rep = validate_schedule(&ss).unwrap();
        assert!(rep.ok(), "{:?}", rep.violations);
    }

    #[test]
    fn constant_schedule_flags_ratios() {
        let ss: Vec<Schedule> = [4, 8, 16].iter().map(|&m| Schedule::constant(ModelKind::M0, m, 1.0, 1.0, 1.0, 1.0, 1.0)).collect();
        let rep = validate_schedule(&ss).unwrap();
        let bad: Vec<&str> = rep.ratios.iter().filter(|r| !r.decreasing).map(|r| r.name.as_str()).collect();
        assert!(bad.contains(&"sigma/delta") && bad.contains(&"delta^(d-1)h/sigma^d"));
    }

    #[test]
    fn m4_uniform_tail_scale() {
        let t = TargetDensity::uniform(Curve::linear(&[1.0]), XLaw::uniform(&[1.0], &[2.0])).unwrap();
        let ss: Vec<Schedule> = [16, 64, 256].iter().map(|&m| default_schedule(ModelKind::M4, &t, m).unwrap()).collect();
        let rep = validate_schedule(&ss).unwrap();
        assert!(rep.ok(), "{:?}", rep.violations);
        for c in &rep.sigma0 {
            assert!((c.value - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn every_default_passes_sigma0() {
        let targets = [
            expo(),
            TargetDensity::laplace(Curve::constant(1.0), XLaw::unit(1)).unwrap(),
            TargetDensity::bounded_smooth(Curve::constant(0.0), Curve::constant(1.0), XLaw::unit(1)).unwrap(),
            TargetDensity::student_t(5.0, Curve::constant(0.0), Curve::constant(1.0), XLaw::unit(1)).unwrap(),
        ];
        for t in &targets {
            for kind in [ModelKind::M0, ModelKind::M1, ModelKind::M3, ModelKind::M4, ModelKind::M5] {
                let ss: Vec<Schedule> = [16, 64, 256, 1024].iter().map(|&m| default_schedule(kind, t, m).unwrap()).collect();
                let rep = validate_schedule(&ss).unwrap();
                assert!(rep.ok(), "{kind} {}: {:?}", t.kind(), rep.violations);
            }
        }
    }
}
