use serde::{Deserialize, Serialize};

use super::polyfit::{fit_many, FitOptions, PolyFit};
use super::{EppPart, GridPart, MixtureModel, ModelKind, Repr};
use crate::discretization::{
    check_epp_prob, default_schedule, epp_offset, grid_partition, x_grid, Domain, Param, Partition, Schedule, XGrid,
};
use crate::error::{Error, Result};
use crate::targets::{std_quantile, TargetDensity};

/// Knobs for the polynomial-fitting models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BuildOptions {
    /// M1 sup-error target for the log cell probabilities
    pub eps_target: f64,
    pub degree_cap: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { eps_target: 1e-3, degree_cap: 16 }
    }
}

impl BuildOptions {
    fn fit(&self, dx: usize) -> FitOptions {
        let cap = if dx > 1 { self.degree_cap.min(12) } else { self.degree_cap };
        FitOptions { degree_cap: cap, ..FitOptions::default() }
    }
}

fn const_param(p: &Param, name: &str) -> Result<f64> {
    p.constant()
        .ok_or_else(|| Error::InconsistentInputs(format!("this model needs an x-free {name} in its schedule")))
}

fn grid_part(target: &TargetDensity, partition: &Partition, schedule: &Schedule) -> Result<GridPart> {
    if partition.dim != 1 || target.d() != 1 {
        return Err(Error::UnsupportedDimension(partition.dim.max(target.d())));
    }
    if schedule.m != partition.m() {
        return Err(Error::InconsistentInputs(format!("schedule m = {} but partition has {} cells", schedule.m, partition.m())));
    }
    let h = const_param(&schedule.h, "h")?;
    if (h - partition.h).abs() > 1e-12 * h {
        return Err(Error::InconsistentInputs(format!("schedule h = {h} but partition h = {}", partition.h)));
    }
    Ok(GridPart {
        centers: partition.centers_1d(),
        edges: partition.edges(),
        sigma: const_param(&schedule.sigma, "sigma")?,
        sigma0: const_param(&schedule.sigma0, "sigma0")?,
        tail_below: partition.tail_below,
        tail_above: partition.tail_above,
    })
}

/// Exact cell-probability weights.
pub fn build_m0(target: &TargetDensity, partition: &Partition, schedule: &Schedule) -> Result<MixtureModel> {
    let g = grid_part(target, partition, schedule)?;
    Ok(MixtureModel::from_parts(
        ModelKind::M0,
        Some(target.clone()),
        Some(schedule.clone()),
        Some(partition.clone()),
        None,
        Repr::Grid(g),
    ))
}

pub fn build_m1(target: &TargetDensity, partition: &Partition, schedule: &Schedule, eps_target: f64) -> Result<MixtureModel> {
    build_m1_with(target, partition, schedule, BuildOptions { eps_target, ..BuildOptions::default() })
}

/// Softmax of polynomial fits to the log cell probabilities.
pub fn build_m1_with(target: &TargetDensity, partition: &Partition, schedule: &Schedule, opts: BuildOptions) -> Result<MixtureModel> {
    if !(opts.eps_target > 0.0) {
        return Err(Error::InvalidParameter(format!("eps_target must be positive, got {}", opts.eps_target)));
    }
    let g = grid_part(target, partition, schedule)?;
    let (lo, hi) = target.x_law.bounds();
    let n_out = g.m() + g.has_tail() as usize;
    let f = |x: &[f64]| -> Result<Vec<f64>> {
        let probs = g.cell_probs(&target.law(x)?)?;
        probs
            .iter()
            .enumerate()
            .map(|(j, &p)| {
                if p < 1e-300 {
                    Err(Error::ZeroCellProbability { cell: if j == g.m() { 0 } else { j + 1 }, prob: p, x: x.to_vec() })
                } else {
                    Ok(p.ln())
                }
            })
            .collect()
    };
    let fits = fit_many(&lo, &hi, n_out, &vec![opts.eps_target; n_out], opts.fit(lo.len()), f)?;
    let eps_achieved = fits.iter().map(|f| f.achieved).fold(0.0, f64::max);
    Ok(MixtureModel::from_parts(
        ModelKind::M1,
        Some(target.clone()),
        Some(schedule.clone()),
        Some(partition.clone()),
        None,
        Repr::Logit { grid: g, fits, eps_target: opts.eps_target, eps_achieved },
    ))
}

/// Cell probabilities at the covariate-cell centres, mixed by softmax(−R‖x − x_i‖²).
pub fn build_m3(target: &TargetDensity, partition: &Partition, xgrid: &XGrid, schedule: &Schedule) -> Result<MixtureModel> {
    if !target.x_law.is_unit_cube() {
        return Err(Error::InconsistentInputs("the covariate grid needs X = [0,1]^dx".into()));
    }
    if xgrid.dx != target.dx() {
        return Err(Error::InconsistentInputs(format!("x-grid dimension {} but target has dx = {}", xgrid.dx, target.dx())));
    }
    let big_r = schedule
        .big_r
        .ok_or_else(|| Error::InconsistentInputs("schedule carries no logit sharpness R".into()))?;
    if let Some(s) = schedule.s {
        if (s - xgrid.s()).abs() > 1e-12 * s {
            return Err(Error::InconsistentInputs(format!("schedule s = {s} but x-grid s = {}", xgrid.s())));
        }
    }
    let g = grid_part(target, partition, schedule)?;
    let x_centers = xgrid.centers();
    let table = x_centers
        .iter()
        .map(|xc| g.cell_probs(&target.law(xc)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(MixtureModel::from_parts(
        ModelKind::M3,
        Some(target.clone()),
        Some(schedule.clone()),
        Some(partition.clone()),
        Some(*xgrid),
        Repr::Indexed { grid: g, x_centers, big_r, table },
    ))
}

fn epp_part(target: &TargetDensity, m: usize, schedule: &Schedule) -> Result<EppPart> {
    if target.d() != 1 {
        return Err(Error::UnsupportedDimension(target.d()));
    }
    if schedule.m != m {
        return Err(Error::InconsistentInputs(format!("schedule m = {} but m = {m}", schedule.m)));
    }
    let p = schedule
        .p
        .ok_or_else(|| Error::InconsistentInputs("schedule carries no cell probability p".into()))?;
    check_epp_prob(m, p)?;
    let offset = epp_offset(target, m, p);
    let levels: Vec<f64> = (0..m).map(|j| offset + (j as f64 + 0.5) * p).collect();
    let std_q = levels
        .iter()
        .map(|&l| std_quantile(target.kind(), target.nu(), l))
        .collect::<Option<Vec<f64>>>();
    let mut tail_weight = 1.0 - m as f64 * p;
    if tail_weight <= 1e-12 {
        tail_weight = 0.0;
    }
    let e = EppPart { m, p, offset, tail_weight, levels, std_q, sigma: schedule.sigma.clone(), sigma0: schedule.sigma0.clone() };
    for x in schedule.x_probes() {
        if let Some(bad) = e.means(target, &x)?.into_iter().find(|v| !v.is_finite()) {
            return Err(Error::NonInvertible { p: bad });
        }
    }
    Ok(e)
}

/// Equal-probability weights with quantile-midpoint means.
pub fn build_m4(target: &TargetDensity, m: usize, schedule: &Schedule) -> Result<MixtureModel> {
    let e = epp_part(target, m, schedule)?;
    Ok(MixtureModel::from_parts(ModelKind::M4, Some(target.clone()), Some(schedule.clone()), None, None, Repr::Quantile(e)))
}

pub fn build_m5(target: &TargetDensity, m: usize, schedule: &Schedule, degree_cap: usize) -> Result<MixtureModel> {
    build_m5_with(target, m, schedule, BuildOptions { degree_cap, ..BuildOptions::default() })
}

/// M4 with every mean curve replaced by a polynomial within p/(2 f̄) of it; fits aim at half
/// that tolerance so the off-grid error keeps a margin.
pub fn build_m5_with(target: &TargetDensity, m: usize, schedule: &Schedule, opts: BuildOptions) -> Result<MixtureModel> {
    let e = epp_part(target, m, schedule)?;
    let sigma = const_param(&schedule.sigma, "sigma")?;
    let f_bar = target.density_sup()?;
    let eps_target = e.p / (2.0 * f_bar);
    let (lo, hi) = target.x_law.bounds();
    let fits: Vec<PolyFit> = fit_many(&lo, &hi, m, &vec![0.5 * eps_target; m], opts.fit(lo.len()), |x| e.means(target, x))?;
    let eps_achieved = fits.iter().map(|f| f.achieved).fold(0.0, f64::max);
    Ok(MixtureModel::from_parts(
        ModelKind::M5,
        Some(target.clone()),
        Some(schedule.clone()),
        None,
        None,
        Repr::PolyMeans { epp: e, sigma, fits, eps_target, eps_achieved },
    ))
}

/// Builds `kind` at `m` from the default schedule and matching partition or grid.
pub fn build_model(kind: ModelKind, target: &TargetDensity, m: usize, opts: &BuildOptions) -> Result<MixtureModel> {
    match kind {
        ModelKind::ExactWrapper => return Ok(MixtureModel::exact(target)),
        ModelKind::Fixed => {
            return Err(Error::UnsupportedCombination { model: kind.to_string(), family: target.kind().to_string() })
        }
        _ => {}
    }
    let schedule = default_schedule(kind, target, m)?;
    match kind {
        ModelKind::M0 | ModelKind::M1 | ModelKind::M3 => {
            let domain = schedule.domain.unwrap_or(Domain::for_target(target)?);
            let partition = grid_partition(domain, m)?;
            match kind {
                ModelKind::M0 => build_m0(target, &partition, &schedule),
                ModelKind::M1 => build_m1_with(target, &partition, &schedule, *opts),
                _ => {
                    let k = schedule.k.ok_or_else(|| Error::InconsistentInputs("schedule carries no x-grid size".into()))?;
                    build_m3(target, &partition, &x_grid(target.dx(), k)?, &schedule)
                }
            }
        }
        ModelKind::M4 => build_m4(target, m, &schedule),
        _ => build_m5_with(target, m, &schedule, *opts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate_with_breaks, QuadOptions};
    use crate::targets::{Curve, XLaw};

    fn expo(rate: Curve, x: XLaw) -> TargetDensity {
        TargetDensity::exponential(rate, x).unwrap()
    }

    fn integral(model: &MixtureModel, x: &[f64]) -> f64 {
        let opts = QuadOptions { abs_tol: 1e-12, rel_tol: 1e-10, max_intervals: 4096 };
        let mut breaks = vec![f64::NEG_INFINITY, -20.0, 0.0, 20.0, f64::INFINITY];
        breaks.extend(model.y_breakpoints(x).unwrap());
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breaks.dedup();
        integrate_with_breaks(|y| model.density(y, x).unwrap(), &breaks, opts).unwrap().value
    }

    #[test]
    fn m0_first_weight() {
        let t = expo(Curve::constant(1.0), XLaw::unit(1));
        let m = build_model(ModelKind::M0, &t, 4, &BuildOptions::default()).unwrap();
        let w = m.mixing_weights(&[0.3]).unwrap();
        assert!((w[0] - (1.0 - 4f64.powf(-0.25))).abs() < 1e-15);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((integral(&m, &[0.3]) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn m0_interval_has_m_components() {
        let t = TargetDensity::uniform(Curve::constant(1.0), XLaw::unit(1)).unwrap();
        let m = build_model(ModelKind::M0, &t, 8, &BuildOptions::default()).unwrap();
        assert_eq!(m.component_count(), 8);
    }

    #[test]
    fn m0_density_close_at_large_m() {
        let t = expo(Curve::constant(1.0), XLaw::unit(1));
        let m = build_model(ModelKind::M0, &t, 256, &BuildOptions::default()).unwrap();
        let v = m.density(0.5, &[1.0]).unwrap();
        assert!((v / (-0.5f64).exp() - 1.0).abs() < 0.1);
    }

    #[test]
    fn m1_constant_target_matches_m0() {
        let t = expo(Curve::constant(1.0), XLaw::unit(1));
        let m0 = build_model(ModelKind::M0, &t, 16, &BuildOptions::default()).unwrap();
        let m1 = build_model(ModelKind::M1, &t, 16, &BuildOptions::default()).unwrap();
        assert_eq!(m1.achieved_eps(), Some(0.0));
        let (a, b) = (m0.mixing_weights(&[0.4]).unwrap(), m1.mixing_weights(&[0.4]).unwrap());
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() <= 1e-15 * u.max(1e-300) * 16.0 + 1e-300, "{u} {v}");
        }
    }

    #[test]
    fn m1_sandwich() {
        let t = expo(Curve::linear(&[1.0]), XLaw::uniform(&[1.0], &[2.0]));
        let s = default_schedule(ModelKind::M1, &t, 8).unwrap();
        let part = grid_partition(Domain::HalfLine, 8).unwrap();
        let m1 = build_m1(&t, &part, &s, 1e-3).unwrap();
        let eps = m1.achieved_eps().unwrap();
        assert!(eps <= 1e-3);
        let m0 = build_m0(&t, &part, &s).unwrap();
        for i in 0..100 {
            let x = [1.0 + i as f64 / 99.0];
            let (a, f) = (m1.mixing_weights(&x).unwrap(), m0.mixing_weights(&x).unwrap());
            for (u, v) in a.iter().zip(&f) {
                let r = (u / v).ln();
                assert!(r.abs() <= 2.0 * eps + 1e-12, "{r} {eps}");
            }
        }
    }

    #[test]
    fn m1_rejects_empty_cells() {
        let t = TargetDensity::uniform(Curve::linear(&[1.0]), XLaw::uniform(&[1.0], &[2.0])).unwrap();
        let r = build_model(ModelKind::M1, &t, 8, &BuildOptions::default());
        assert!(matches!(r, Err(Error::ZeroCellProbability { .. })), "{r:?}");
    }

    #[test]
    fn m3_single_cell_reduces_to_cell_probs() {
        let t = expo(Curve::affine(1.0, &[1.0]), XLaw::unit(1));
        let mut s = default_schedule(ModelKind::M3, &t, 16).unwrap();
        let g = x_grid(1, 1).unwrap();
        s.s = Some(g.s());
        let part = grid_partition(Domain::HalfLine, 16).unwrap();
        let m = build_m3(&t, &part, &g, &s).unwrap();
        let w = m.mixing_weights(&[0.9]).unwrap();
        let f = build_m0(&t, &part, &s).unwrap().mixing_weights(&[0.5]).unwrap();
        assert_eq!(w, f);
        assert_eq!(m.component_count(), 17);
    }

    #[test]
    fn m3_concentration_at_centres() {
        let t = expo(Curve::affine(1.0, &[1.0]), XLaw::unit(1));
        let m = build_model(ModelKind::M3, &t, 16, &BuildOptions::default()).unwrap();
        let (s, r) = (m.schedule().unwrap().s.unwrap(), m.schedule().unwrap().big_r.unwrap());
        let bound = (-r * s).exp() / s.sqrt();
        assert!((bound - 4.0 * (-16.0f64).exp()).abs() < 1e-18);
        let w = m.x_cell_weights(&[0.125]).unwrap();
        assert!(1.0 - w[0] <= bound);
        assert_eq!(m.component_count(), 16 * 4 + 1);
    }

    #[test]
    fn m4_uniform_example() {
        let t = TargetDensity::uniform(Curve::linear(&[1.0]), XLaw::uniform(&[1.0], &[2.0])).unwrap();
        let m = build_model(ModelKind::M4, &t, 4, &BuildOptions::default()).unwrap();
        let c = m.components(&[1.6]).unwrap();
        assert_eq!(c.len(), 4);
        assert!((c[1].mean - 0.375 * 1.6).abs() < 1e-15);
        assert!((c[1].sigma - 1.6 * 0.25f64.powf(0.25)).abs() < 1e-15);
        assert_eq!(m.mixing_weights(&[1.1]).unwrap(), m.mixing_weights(&[1.9]).unwrap());
        assert!((integral(&m, &[1.6]) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn m4_laplace_tail() {
        let t = TargetDensity::laplace(Curve::constant(1.0), XLaw::unit(1)).unwrap();
        let m = build_model(ModelKind::M4, &t, 4, &BuildOptions::default()).unwrap();
        let w = m.mixing_weights(&[0.2]).unwrap();
        let p = m.schedule().unwrap().p.unwrap();
        assert!((w[..4].iter().sum::<f64>() - 4.0 * p).abs() < 1e-15);
        assert!((w[4] - (1.0 - 4.0 * p)).abs() < 1e-15);
    }

    #[test]
    fn m5_linear_quantiles_exact() {
        let t = TargetDensity::uniform(Curve::linear(&[1.0]), XLaw::uniform(&[1.0], &[2.0])).unwrap();
        let m = build_model(ModelKind::M5, &t, 8, &BuildOptions::default()).unwrap();
        assert!(m.achieved_eps().unwrap() <= 1e-12);
        assert!(m.fits().iter().all(|f| f.degree == 1));
    }

    #[test]
    fn m5_x_free_equals_m4() {
        let t = TargetDensity::laplace(Curve::constant(1.5), XLaw::unit(1)).unwrap();
        let s = default_schedule(ModelKind::M5, &t, 16).unwrap();
        let m5 = build_m5(&t, 16, &s, 16).unwrap();
        let m4 = build_m4(&t, 16, &s).unwrap();
        assert_eq!(m5.achieved_eps(), Some(0.0));
        for &y in &[-3.0, -0.2, 0.0, 0.7, 5.0] {
            let (a, b) = (m4.log_density(y, &[0.3]).unwrap(), m5.log_density(y, &[0.3]).unwrap());
            assert!((a - b).abs() < 1e-12, "{y}: {a} {b}");
        }
    }

    #[test]
    fn m5_needs_density_bound() {
        let law = crate::targets::CustomLaw::new("flat", |_, _| 1.0)
            .with_quantile(|p, _| p)
            .with_support(crate::targets::SupportKind::Interval, |_| (0.0, 1.0));
        let t = TargetDensity::custom(law, XLaw::unit(1)).unwrap();
        let s = Schedule { p: Some(0.1), ..Schedule::constant(ModelKind::M5, 4, 0.1, 0.5, 0.7, 0.8, 1.0) };
        assert!(matches!(build_m5(&t, 4, &s, 8), Err(Error::SupUnknown(_))));
    }
}
