//! Experiment harness behind the `smoothmix` binary.
//!
//! Every runner validates its whole input and builds every schedule before the first write,
//! so a rejected config leaves the output directory untouched. Reports are deterministic
//! functions of the config and seed; only `timings` varies between runs.

mod config;
mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

pub use config::{BoundsConfig, ExperimentConfig, KlChoice, LemmaConfig};
pub use report::{
    read_kl_csv, write_csv, DominanceRow, KlRow, LemmaSummary, ModelSeries, RateRow, RunReport, SCHEMA_VERSION,
};

use crate::bounds::{
    corollary1_bound, corollary3_bound, corollary6_bound, envelope_check, fit_rate, lemma_sweep, rate_exponent,
    BoundBreakdown, BoundSettings, LemmaId, RateFit,
};
use crate::discretization::{default_schedule, grid_partition, validate_schedule, x_grid, Domain, Schedule};
use crate::divergence::{kl_mc_with, kl_quadrature, KlEstimate, KlMethod, KlSeries, SeriesPoint, TrendStats};
use crate::error::{Error, Result};
use crate::mixtures::{build_model, MixtureModel, ModelKind};
use crate::targets::{check_assumption1, CubePolicy};

/// Process-level knobs that never change numerics.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    pub workers: usize,
    pub dump_model: bool,
}

/// Logs the failing grid point, then passes the error through unchanged.
fn at<T>(kind: ModelKind, m: usize, r: Result<T>) -> Result<T> {
    r.inspect_err(|e| log::error!("{kind} at m = {m}: {e}"))
}

fn elapsed(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

fn schedules(cfg: &ExperimentConfig) -> Result<Vec<Vec<Schedule>>> {
    cfg.models
        .iter()
        .map(|&k| cfg.m_grid.iter().map(|&m| at(k, m, default_schedule(k, &cfg.target, m))).collect())
        .collect()
}

fn build(cfg: &ExperimentConfig, kind: ModelKind, m: usize) -> Result<MixtureModel> {
    at(kind, m, build_model(kind, &cfg.target, m, &cfg.build))
}

fn kl_rows(s: &ModelSeries) -> Vec<KlRow> {
    let mut rows: Vec<KlRow> = s.series.points.iter().map(|p| KlRow::of(s.kind, p.m, &p.estimate)).collect();
    rows.extend(s.quadrature.iter().zip(&s.series.points).map(|(e, p)| KlRow::of(s.kind, p.m, e)));
    rows
}

fn theory(cfg: &ExperimentConfig, kind: ModelKind) -> Option<f64> {
    let t = &cfg.target;
    rate_exponent(kind, t.kind(), t.d(), t.dx(), cfg.q, cfg.eps).ok()
}

fn rate_row(kind: ModelKind, method: &str, pts: &[(usize, KlEstimate)], exponent: Option<f64>, warnings: &mut Vec<String>) -> RateRow {
    let fit = match fit_rate(pts) {
        Ok(f) => Some(match exponent {
            Some(e) => f.with_theory(e),
            None => f,
        }),
        Err(e) => {
            warnings.push(format!("{kind} ({method}): no rate fit: {e}"));
            None
        }
    };
    let envelope = exponent.and_then(|e| envelope_check(pts, e).ok()).unwrap_or_default();
    if envelope.iter().any(|r| !r.holds) {
        warnings.push(format!("{kind} ({method}): KL exceeds the calibrated m^-{:.4} envelope", exponent.unwrap_or(0.0)));
    }
    let faster_than_theory = fit.as_ref().zip(exponent).map(|(f, e): (&RateFit, f64)| f.slope < -e);
    RateRow { kind, method: method.into(), fit, theoretical_exponent: exponent, faster_than_theory, envelope }
}

fn check_kl_signs(series: &[ModelSeries]) -> Result<()> {
    for s in series {
        for p in &s.series.points {
            let e = &p.estimate;
            if e.value < -3.0 * e.std_error {
                return Err(Error::InvariantViolation(format!(
                    "{} at m = {}: KL estimate {:e} is below -3 SE ({:e})",
                    s.kind, p.m, e.value, e.std_error
                )));
            }
        }
    }
    Ok(())
}

/// Advisory moment and tail-cube checks; failures become warnings.
fn assumption_check(cfg: &ExperimentConfig, report: &mut RunReport) {
    if cfg.target.d() != 1 {
        return;
    }
    let last = *cfg.m_grid.last().expect("validated grid");
    let blocks: Vec<(f64, f64)> = cfg
        .models
        .iter()
        .filter(|k| matches!(k, ModelKind::M0 | ModelKind::M1 | ModelKind::M3))
        .take(1)
        .filter_map(|&k| {
            let s = default_schedule(k, &cfg.target, last).ok()?;
            let domain = s.domain.or_else(|| Domain::for_target(&cfg.target).ok())?;
            let e = grid_partition(domain, last).ok()?.edges();
            Some((e[0], e[e.len() - 1]))
        })
        .collect();
    let n = cfg.n.min(20_000);
    match check_assumption1(&cfg.target, CubePolicy::Centered { r: 1.0 }, n, cfg.seed, &blocks) {
        Ok(a) => {
            if a.tail_cube_violated {
                report.warnings.push(format!("tail-cube condition fails on {:?} of draws", a.tail_cube_violation));
            }
            for (name, m) in [("second moment", &a.second_moment), ("log-ratio integral", &a.log_ratio_integral)] {
                if m.status != crate::targets::MomentStatus::Finite {
                    report.warnings.push(format!("{name} looks {:?}", m.status).to_lowercase());
                }
            }
            report.assumption = Some(a);
        }
        Err(e) => report.warnings.push(format!("assumption check skipped: {e}")),
    }
}

fn dump_models(dir: &Path, models: &[(ModelKind, usize, MixtureModel)]) -> Result<()> {
    let dir = dir.join("models");
    std::fs::create_dir_all(&dir)?;
    for (k, m, model) in models {
        let text = serde_json::to_string_pretty(&model.to_json())?;
        std::fs::write(dir.join(format!("{k}_m{m}.json")), text + "\n")?;
    }
    Ok(())
}

/// KL series per model kind, rate fits against the theoretical exponents, and advisory checks.
/// Writes `kl_series.csv`, `report.json` and `plot_kl.py`.
pub fn run_converge(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunReport> {
    cfg.validate(3)?;
    let start = Instant::now();
    let all = schedules(cfg)?;
    let mut report = RunReport::new("converge", cfg.seed, Some(cfg.clone()));
    for s in &all {
        report.schedule_checks.push(validate_schedule(s)?);
    }
    report.schedules = all.into_iter().flatten().collect();
    report.timings.insert("schedules".into(), elapsed(start));

    let mut dumped = Vec::new();
    for &kind in &cfg.models {
        let t = Instant::now();
        let mut points = Vec::with_capacity(cfg.m_grid.len());
        let mut quadrature = Vec::new();
        for &m in &cfg.m_grid {
            let model = build(cfg, kind, m)?;
            let estimate = match cfg.method {
                KlChoice::Quadrature => at(kind, m, kl_quadrature(&cfg.target, &model))?,
                _ => at(kind, m, kl_mc_with(&cfg.target, &model, cfg.n, cfg.seed, opts.workers))?,
            };
            if cfg.method == KlChoice::Both {
                quadrature.push(at(kind, m, kl_quadrature(&cfg.target, &model))?);
            }
            if estimate.clipped > 0 {
                report.warnings.push(format!("{kind} at m = {m}: {} log ratios clipped", estimate.clipped));
            }
            log::info!("{kind} m = {m}: KL = {:.6e} ± {:.2e}", estimate.value, estimate.std_error);
            points.push(SeriesPoint { m, components: model.component_count(), estimate });
            if opts.dump_model {
                dumped.push((kind, m, model));
            }
        }
        let trend = TrendStats::of(&points);
        report.series.push(ModelSeries { kind, series: KlSeries { points, trend }, quadrature });
        report.timings.insert(format!("series_{kind}"), elapsed(t));
    }

    for s in &report.series {
        let exponent = theory(cfg, s.kind);
        let pts: Vec<(usize, KlEstimate)> = s.series.points.iter().map(|p| (p.m, p.estimate.clone())).collect();
        let method = report::method_name(&pts[0].1);
        let mut warnings = Vec::new();
        let mut rows = vec![rate_row(s.kind, &method, &pts, exponent, &mut warnings)];
        if !s.quadrature.is_empty() {
            let q: Vec<_> = cfg.m_grid.iter().copied().zip(s.quadrature.iter().cloned()).collect();
            rows.push(rate_row(s.kind, "quadrature", &q, exponent, &mut warnings));
        }
        report.rate_fits.extend(rows);
        report.warnings.extend(warnings);
        if s.series.trend.significant_increases > 0 {
            report.warnings.push(format!("{}: {} significant increases along the grid", s.kind, s.series.trend.significant_increases));
        }
    }
    for c in &report.schedule_checks {
        report.warnings.extend(c.violations.iter().map(|v| format!("{} schedule: {v}", c.kind)));
    }
    let t = Instant::now();
    assumption_check(cfg, &mut report);
    report.timings.insert("assumption_check".into(), elapsed(t));

    let rows: Vec<KlRow> = report.series.iter().flat_map(kl_rows).collect();
    write_csv(&opts.out.join("kl_series.csv"), &rows)?;
    report::write_plot_stub(&opts.out)?;
    if opts.dump_model {
        dump_models(&opts.out, &dumped)?;
    }
    report.timings.insert("total".into(), elapsed(start));
    report.write(&opts.out)?;
    check_kl_signs(&report.series)?;
    Ok(report)
}

fn bound_at(cfg: &ExperimentConfig, kind: ModelKind, schedule: &Schedule, st: &BoundSettings) -> Result<BoundBreakdown> {
    let m = schedule.m;
    match kind {
        ModelKind::M0 | ModelKind::M1 => corollary1_bound(&cfg.target, schedule, m, cfg.q, cfg.bounds.variant, st),
        ModelKind::M3 => {
            let k = schedule.k.ok_or_else(|| Error::InconsistentInputs("schedule carries no x-grid size".into()))?;
            corollary3_bound(&cfg.target, schedule, m, &x_grid(cfg.target.dx(), k)?, cfg.q, st)
        }
        ModelKind::M4 => corollary6_bound(&cfg.target, schedule, m, st),
        _ => Err(Error::UnsupportedVariant(format!("no explicit bound is implemented for {kind}"))),
    }
}

/// Bound breakdowns over the grid and the KL-versus-bound dominance table.
/// Writes `bounds.json` and `report.json`.
pub fn run_bounds(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunReport> {
    cfg.validate(1)?;
    let start = Instant::now();
    let all = schedules(cfg)?;
    let st = BoundSettings { n: cfg.bound_n(), seed: cfg.seed, workers: opts.workers };
    let mut report = RunReport::new("bounds", cfg.seed, Some(cfg.clone()));
    for (&kind, row) in cfg.models.iter().zip(&all) {
        let t = Instant::now();
        for s in row {
            let m = s.m;
            let b = at(kind, m, bound_at(cfg, kind, s, &st))?;
            let model = build(cfg, kind, m)?;
            let kl = match cfg.method {
                KlChoice::Mc => at(kind, m, kl_mc_with(&cfg.target, &model, cfg.n, cfg.seed, opts.workers))?,
                _ => at(kind, m, kl_quadrature(&cfg.target, &model))?,
            };
            let dominated = kl.value <= b.total + 3.0 * b.total_se;
            if !dominated {
                report.warnings.push(format!("{kind} at m = {m}: KL {:.4e} above bound {:.4e}", kl.value, b.total));
            }
            report.dominance.push(DominanceRow {
                kind,
                m,
                kl: kl.value,
                kl_se: kl.std_error,
                kl_method: if kl.method == KlMethod::MonteCarlo { "mc".into() } else { "quadrature".into() },
                bound_total: b.total,
                bound_se: b.total_se,
                dominated,
                asserted: m >= 256,
            });
            report.bounds.push(b);
        }
        report.timings.insert(format!("bounds_{kind}"), elapsed(t));
    }
    report.schedules = all.into_iter().flatten().collect();
    std::fs::create_dir_all(&opts.out)?;
    std::fs::write(opts.out.join("bounds.json"), serde_json::to_string_pretty(&report.bounds)? + "\n")?;
    report.timings.insert("total".into(), elapsed(start));
    report.write(&opts.out)?;
    Ok(report)
}

/// Randomized lemma sweeps. Writes `lemmas.csv` and `report.json`; any margin below
/// −1e-12 is an invariant violation, reported after the files are written.
pub fn run_lemmas(size: usize, seed: u64, opts: &RunOptions) -> Result<RunReport> {
    if size == 0 {
        return Err(Error::Config("lemma sweep size must be positive".into()));
    }
    let start = Instant::now();
    let rows = lemma_sweep(size, seed, opts.workers)?;
    let mut report = RunReport::new("lemmas", seed, None);
    for id in [LemmaId::RiemannCube, LemmaId::GaussianCube, LemmaId::RiemannInterval] {
        let mine: Vec<_> = rows.iter().filter(|r| r.lemma == id).collect();
        report.lemmas.push(LemmaSummary {
            lemma: id,
            draws: mine.len(),
            violations: mine.iter().filter(|r| r.violates()).count(),
            min_margin: mine.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min),
        });
        if let Some(first) = mine.first() {
            report.lemma_anchors.push((*first).clone());
        }
    }
    report.timings.insert("sweep".into(), elapsed(start));
    write_csv(&opts.out.join("lemmas.csv"), &rows)?;
    report.write(&opts.out)?;
    let bad: Vec<_> = rows.iter().filter(|r| r.violates()).collect();
    if !bad.is_empty() {
        for r in &bad {
            eprintln!("violation: {}", serde_json::to_string(r)?);
        }
        return Err(Error::InvariantViolation(format!("{} lemma draws have margin below -1e-12", bad.len())));
    }
    Ok(report)
}

/// Rate fits of an existing `kl_series.csv`, one per (kind, method). Theoretical exponents need `cfg`.
pub fn run_rate(input: &Path, cfg: Option<&ExperimentConfig>, opts: &RunOptions) -> Result<RunReport> {
    let rows = read_kl_csv(input)?;
    if rows.is_empty() {
        return Err(Error::Config(format!("{} holds no rows", input.display())));
    }
    let mut report = RunReport::new("rate", cfg.map_or(0, |c| c.seed), cfg.cloned());
    let mut groups: Vec<(ModelKind, String)> = Vec::new();
    for r in &rows {
        if !groups.iter().any(|(k, m)| *k == r.kind && *m == r.method) {
            groups.push((r.kind, r.method.clone()));
        }
    }
    for (kind, method) in groups {
        let mut pts: Vec<(usize, KlEstimate)> = rows
            .iter()
            .filter(|r| r.kind == kind && r.method == method)
            .map(|r| {
                let est = KlEstimate {
                    value: r.value,
                    std_error: r.se,
                    n: r.n,
                    method: if method == "mc" { KlMethod::MonteCarlo } else { KlMethod::Quadrature },
                    seed: r.seed,
                    clipped: 0,
                    truncated_mass: None,
                    quad_error: None,
                };
                (r.m, est)
            })
            .collect();
        pts.sort_by_key(|p| p.0);
        if pts.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Config(format!("{kind} ({method}) has repeated m values")));
        }
        let exponent = cfg.and_then(|c| theory(c, kind));
        let mut warnings = Vec::new();
        report.rate_fits.push(rate_row(kind, &method, &pts, exponent, &mut warnings));
        report.warnings.extend(warnings);
    }
    report.write(&opts.out)?;
    Ok(report)
}

/// Removes the `timings` object so two reports can be compared byte for byte.
pub fn redact_timings(report_json: &str) -> Result<String> {
    let mut v: serde_json::Value = serde_json::from_str(report_json)?;
    if let Some(o) = v.as_object_mut() {
        o.remove("timings");
    }
    Ok(serde_json::to_string_pretty(&v)?)
}
