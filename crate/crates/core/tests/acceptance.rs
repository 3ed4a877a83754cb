//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line to the real stdout
//! (bypassing libtest capture) and then asserts the criterion.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smoothmix::bounds::{corollary1_bound, envelope_check, fit_rate, lemma_sweep, rate_exponent, BoundSettings, LemmaId, Variant};
use smoothmix::discretization::{default_schedule, x_grid};
use smoothmix::divergence::{kl_mc_with, kl_quadrature, kl_series, KlEstimate, KlSeries};
use smoothmix::harness::{redact_timings, run_bounds, run_converge, run_lemmas, ExperimentConfig, RunOptions};
use smoothmix::mixtures::{build_m1_with, build_model, BuildOptions, MixtureModel, ModelKind};
use smoothmix::quad::{integrate_with_breaks, QuadOptions};
use smoothmix::targets::{Curve, FamilyKind, TargetDensity, XLaw};
use smoothmix::Error;

const N: usize = 1_000_000;

fn report(id: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "criterion {id}: {verdict} | {detail}").unwrap();
    out.flush().unwrap();
}

fn expo(rate: Curve, x: XLaw) -> TargetDensity {
    TargetDensity::exponential(rate, x).unwrap()
}

fn laplace() -> TargetDensity {
    TargetDensity::laplace(Curve::constant(1.0), XLaw::unit(1)).unwrap()
}

fn build(kind: ModelKind, t: &TargetDensity, m: usize) -> MixtureModel {
    build_model(kind, t, m, &BuildOptions::default()).unwrap()
}

fn pair_se(a: &KlEstimate, b: &KlEstimate) -> f64 {
    a.std_error.hypot(b.std_error)
}

/// The decreasing-trend check shared by criteria 3 and 5.
fn trend_holds(s: &KlSeries) -> (bool, String) {
    let t = &s.trend;
    let pass = t.significant_decrease && t.significant_increases == 0;
    let values: Vec<String> = s.points.iter().map(|p| format!("{}:{:.4e}±{:.1e}", p.m, p.estimate.value, p.estimate.std_error)).collect();
    (pass, format!("{}; drop {:.3e} vs 3SE {:.3e}; increases {}", values.join(" "), t.total_decrease, 3.0 * t.combined_se, t.significant_increases))
}

#[test]
fn criterion_01_lemma_suite() {
    let t = Instant::now();
    let rows = lemma_sweep(1000, 1, 1).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let mut parts = Vec::new();
    let mut pass = secs < 30.0;
    for id in [LemmaId::RiemannCube, LemmaId::GaussianCube, LemmaId::RiemannInterval] {
        let mine: Vec<_> = rows.iter().filter(|r| r.lemma == id).collect();
        let bad = mine.iter().filter(|r| r.violates()).count();
        let min = mine.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
        pass &= mine.len() == 1000 && bad == 0;
        parts.push(format!("{id:?} {} draws, {bad} violations, min margin {min:.3e}", mine.len()));
    }
    let interval: Vec<_> = rows.iter().filter(|r| r.lemma == LemmaId::RiemannInterval).collect();
    let covered = ["two_sided", "left", "right"].iter().all(|s| interval.iter().any(|r| r.side == *s))
        && interval.iter().any(|r| r.placement == "adversarial");
    pass &= covered;
    report(1, pass, &format!("{}; one-sided and adversarial covered: {covered}; {secs:.2}s", parts.join("; ")));
    assert!(pass);
}

#[test]
fn criterion_02_kl_oracle_agreement() {
    let unit = XLaw::unit(1);
    let rising = Curve::affine(1.0, &[1.0]);
    let pairs: Vec<(&str, TargetDensity, ModelKind, usize)> = vec![
        ("exponential(1)", expo(Curve::constant(1.0), unit.clone()), ModelKind::M0, 64),
        ("exponential(1+x)", expo(rising.clone(), unit.clone()), ModelKind::M0, 64),
        ("exponential(1+x)", expo(rising.clone(), unit.clone()), ModelKind::M1, 64),
        ("exponential(1)", expo(Curve::constant(1.0), unit.clone()), ModelKind::M3, 16),
        ("exponential(1+x)", expo(rising.clone(), unit.clone()), ModelKind::M4, 64),
        ("laplace(1)", laplace(), ModelKind::M0, 64),
        ("laplace(1)", laplace(), ModelKind::M4, 64),
        ("uniform(1+x)", TargetDensity::uniform(rising.clone(), unit.clone()).unwrap(), ModelKind::M4, 64),
        (
            "student_t(5; x, 1)",
            TargetDensity::student_t(5.0, Curve::linear(&[1.0]), Curve::constant(1.0), unit.clone()).unwrap(),
            ModelKind::M4,
            64,
        ),
        (
            "bounded_smooth(0, 1+x)",
            TargetDensity::bounded_smooth(Curve::constant(0.0), rising.clone(), unit.clone()).unwrap(),
            ModelKind::M5,
            16,
        ),
    ];
    let t = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, (name, target, kind, m)) in pairs.iter().enumerate() {
        let model = build(*kind, target, *m);
        let mc = kl_mc_with(target, &model, N, 100 + i as u64, 1).unwrap();
        let q = kl_quadrature(target, &model).unwrap();
        let z = (mc.value - q.value).abs() / mc.std_error;
        pass &= z <= 3.0;
        parts.push(format!("{name}/{kind} |z| {z:.2}"));
    }
    let secs = t.elapsed().as_secs_f64();
    pass &= secs < 120.0;
    report(2, pass, &format!("{}; {secs:.1}s", parts.join(", ")));
    assert!(pass);
}

#[test]
fn criterion_03_grid_model_trend() {
    let target = expo(Curve::constant(1.0), XLaw::unit(1));
    let s = default_schedule(ModelKind::M0, &target, 64).unwrap();
    let h = 64f64.ln() / 64.0;
    let recipe = (s.h.at(&[0.5]) - h).abs() < 1e-15
        && (s.sigma.at(&[0.5]) - h.sqrt()).abs() < 1e-15
        && (s.delta.at(&[0.5]) - h.powf(0.25)).abs() < 1e-15;
    let t = Instant::now();
    let series = kl_series(&target, |m| Ok(build(ModelKind::M0, &target, m)), &[16, 64, 256, 1024], N, 3, 1).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let (trend, detail) = trend_holds(&series);
    let pass = recipe && trend && secs < 180.0;
    report(3, pass, &format!("schedule h = log m/m: {recipe}; {detail}; {secs:.1}s"));
    assert!(pass);
}

#[test]
fn criterion_04_logit_sandwich() {
    let target = expo(Curve::linear(&[1.0]), XLaw::uniform(&[1.0], &[2.0]));
    let m = 64;
    let m0 = build(ModelKind::M0, &target, m);
    let schedule = default_schedule(ModelKind::M1, &target, m).unwrap();
    let partition = m0.partition().unwrap().clone();
    let opts = BuildOptions { eps_target: 1e-3, ..BuildOptions::default() };
    let m1 = build_m1_with(&target, &partition, &schedule, opts).unwrap();
    let eps = m1.achieved_eps().unwrap();
    let k0 = kl_mc_with(&target, &m0, N, 4, 1).unwrap();
    let k1 = kl_mc_with(&target, &m1, N, 4, 1).unwrap();
    let gap = (k1.value - k0.value).abs();
    let allowed = 2.0 * eps + 3.0 * pair_se(&k0, &k1);
    let q0 = kl_quadrature(&target, &m0).unwrap().value;
    let q1 = kl_quadrature(&target, &m1).unwrap().value;
    let pass = gap <= allowed && (q1 - q0).abs() <= 2.0 * eps;
    report(
        4,
        pass,
        &format!("KL(M0) {:.5e}, KL(M1) {:.5e}, gap {gap:.3e} <= {allowed:.3e} (achieved eps {eps:.2e}); quadrature gap {:.3e}", k0.value, k1.value, (q1 - q0).abs()),
    );
    assert!(pass);
}

#[test]
fn criterion_05_covariate_concentration_and_trend() {
    let target = expo(Curve::constant(1.0), XLaw::unit(1));
    let m = 64;
    let model = build(ModelKind::M3, &target, m);
    let grid = model.xgrid().unwrap().clone();
    let s = model.schedule().unwrap();
    let (ss, big_r) = (s.s.unwrap(), s.big_r.unwrap());
    let setup = grid.k == 8 && (big_r - ss.powi(-2)).abs() <= 1e-9 * big_r;
    let bound = (-big_r * ss).exp() / ss.sqrt();
    let mut worst: f64 = 0.0;
    for (i, c) in grid.centers().iter().enumerate() {
        let w = model.x_cell_weights(c).unwrap();
        let off: f64 = w.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| v).sum();
        worst = worst.max(off);
    }
    let concentrated = worst <= bound;
    let kx = x_grid(1, grid.k).unwrap();
    let counts = [16usize, 64, 256, 1024].iter().all(|&m| {
        let model = build(ModelKind::M3, &target, m);
        let n = model.xgrid().unwrap().n();
        model.component_count() == m * n + 1
    });
    let series = kl_series(&target, |m| Ok(build(ModelKind::M3, &target, m)), &[16, 64, 256, 1024], N, 5, 1).unwrap();
    let (trend, detail) = trend_holds(&series);
    let pass = setup && concentrated && counts && trend;
    report(
        5,
        pass,
        &format!("k = {} (N = {}), max off-cell mass {worst:.3e} <= {bound:.3e}; counts m*N+1: {counts}; {detail}", grid.k, kx.n()),
    );
    assert!(pass);
}

#[test]
fn criterion_06_bound_dominance() {
    let target = expo(Curve::constant(1.0), XLaw::unit(1));
    let st = BoundSettings::new(200_000, 6);
    let mut pass = true;
    let mut parts = Vec::new();
    for m in [256usize, 1024, 4096] {
        let s = default_schedule(ModelKind::M0, &target, m).unwrap();
        let b = corollary1_bound(&target, &s, m, 3.0, Variant::PartII, &st).unwrap();
        let kl = kl_quadrature(&target, &build(ModelKind::M0, &target, m)).unwrap().value;
        let ok = kl <= b.total + 3.0 * b.total_se;
        pass &= ok;
        parts.push(format!("m={m}: KL {kl:.4e} <= {:.4e} + 3·{:.1e}", b.total, b.total_se));
    }
    report(6, pass, &parts.join("; "));
    assert!(pass);
}

#[test]
fn criterion_07_laplace_rate_comparison() {
    let target = laplace();
    let grid = [64usize, 256, 1024, 4096];
    let mut slopes = Vec::new();
    let mut envelopes = Vec::new();
    let mut parts = Vec::new();
    for kind in [ModelKind::M0, ModelKind::M4] {
        let s = kl_series(&target, |m| Ok(build(kind, &target, m)), &grid, N, 7, 1).unwrap();
        let pts: Vec<_> = s.points.iter().map(|p| (p.m, p.estimate.clone())).collect();
        let fit = fit_rate(&pts).unwrap();
        let exponent = rate_exponent(kind, FamilyKind::Laplace, 1, 1, 3.0, 0.5).unwrap();
        let rows = envelope_check(&pts, exponent).unwrap();
        let holds = rows[1..].iter().all(|r| r.holds);
        let cells: Vec<String> = rows.iter().map(|r| format!("{}:{:.4e}/{:.4e}", r.m, r.value, r.envelope)).collect();
        parts.push(format!("{kind} slope {:.3} ± {:.3}, m^-{exponent:.4} envelope holds: {holds} [{}]", fit.slope, fit.slope_se, cells.join(" ")));
        slopes.push(fit.slope);
        envelopes.push(holds);
    }
    let ordered = slopes[0] < slopes[1];
    let pass = ordered && envelopes.iter().all(|h| *h);
    report(7, pass, &format!("M0 steeper than M4: {ordered}; {}", parts.join("; ")));
    assert!(pass);
}

fn integral(model: &MixtureModel, x: &[f64]) -> f64 {
    let opts = QuadOptions { abs_tol: 1e-13, rel_tol: 1e-11, max_intervals: 4096 };
    let mut breaks = vec![f64::NEG_INFINITY, -30.0, 0.0, 30.0, f64::INFINITY];
    breaks.extend(model.y_breakpoints(x).unwrap());
    for c in model.components(x).unwrap() {
        breaks.push(c.mean);
    }
    breaks.retain(|b| !b.is_finite() || b.abs() < 1e6);
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup();
    integrate_with_breaks(|y| model.density(y, x).unwrap(), &breaks, opts).unwrap().value
}

#[test]
fn criterion_08_normalization() {
    let unit = XLaw::unit(1);
    let rising = Curve::affine(1.0, &[1.0]);
    let targets = [
        expo(rising.clone(), unit.clone()),
        TargetDensity::laplace(rising.clone(), unit.clone()).unwrap(),
        TargetDensity::uniform(rising.clone(), unit.clone()).unwrap(),
        TargetDensity::student_t(5.0, Curve::linear(&[1.0]), rising.clone(), unit.clone()).unwrap(),
        TargetDensity::bounded_smooth(Curve::constant(0.0), rising.clone(), unit.clone()).unwrap(),
    ];
    let kinds = [ModelKind::M0, ModelKind::M1, ModelKind::M3, ModelKind::M4, ModelKind::M5];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut worst_int, mut worst_w): (f64, f64) = (0.0, 0.0);
    let (mut built, mut skipped) = (Vec::new(), Vec::new());
    for t in &targets {
        for kind in kinds {
            let model = match build_model(kind, t, 16, &BuildOptions::default()) {
                Ok(m) => m,
                Err(e @ (Error::UnsupportedCombination { .. } | Error::Unsupported(_) | Error::ZeroCellProbability { .. })) => {
                    skipped.push(format!("{}/{kind} ({e})", t.kind()));
                    continue;
                }
                Err(e) => panic!("{}/{kind}: {e}", t.kind()),
            };
            for _ in 0..20 {
                let x = [rng.random::<f64>()];
                let w = model.mixing_weights(&x).unwrap();
                assert!(w.iter().all(|v| *v >= 0.0));
                worst_w = worst_w.max((w.iter().sum::<f64>() - 1.0).abs());
                worst_int = worst_int.max((integral(&model, &x) - 1.0).abs());
            }
            built.push(format!("{}/{kind}", t.kind()));
        }
    }
    let pass = worst_int <= 1e-6 && worst_w <= 1e-12;
    report(
        8,
        pass,
        &format!(
            "{} models x 20 x: max |integral - 1| {worst_int:.2e}, max |sum w - 1| {worst_w:.2e}; not buildable: {}",
            built.len(),
            if skipped.is_empty() { "none".into() } else { skipped.join(", ") }
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_polynomial_mean_containment() {
    let target = TargetDensity::bounded_smooth(Curve::constant(0.0), Curve::exp_affine(0.0, &[1.0]), XLaw::unit(1)).unwrap();
    let m = 16;
    let model = build(ModelKind::M5, &target, m);
    let p = model.schedule().unwrap().p.unwrap();
    let f_bar = target.density_sup().unwrap();
    let eps = model.achieved_eps().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut outside = 0;
    for _ in 0..200 {
        let x = [rng.random::<f64>()];
        let (lo, hi) = target.support_at(&x).unwrap();
        for (j, f) in model.fits().iter().enumerate() {
            let a = if j == 0 { lo } else { target.quantile(j as f64 * p, &x).unwrap() };
            let b = if j + 1 == m { hi } else { target.quantile((j + 1) as f64 * p, &x).unwrap() };
            let mu = f.eval(&x);
            if !(a <= mu && mu <= b) {
                outside += 1;
            }
        }
    }
    let cap = p / (2.0 * f_bar);
    let pass = outside == 0 && eps < cap && model.fits().len() == m;
    report(9, pass, &format!("{} means x 200 x, {outside} outside their cell; sup error {eps:.3e} < p/(2 f_bar) = {cap:.3e}", model.fits().len()));
    assert!(pass);
}

fn run_twice(dir: &Path, name: &str, f: impl Fn(&RunOptions)) -> bool {
    let read = |d: &Path| -> Vec<(String, Vec<u8>)> {
        let mut files: Vec<_> = std::fs::read_dir(d)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.is_file())
            .map(|p| {
                let bytes = std::fs::read(&p).unwrap();
                let bytes = if p.file_name().unwrap() == "report.json" {
                    redact_timings(std::str::from_utf8(&bytes).unwrap()).unwrap().into_bytes()
                } else {
                    bytes
                };
                (p.file_name().unwrap().to_string_lossy().into_owned(), bytes)
            })
            .collect();
        files.sort();
        files
    };
    let runs: Vec<_> = [1usize, 2]
        .iter()
        .map(|&workers| {
            let out = dir.join(format!("{name}_{workers}"));
            f(&RunOptions { out: out.clone(), workers, dump_model: false });
            read(&out)
        })
        .collect();
    !runs[0].is_empty() && runs[0] == runs[1]
}

#[test]
fn criterion_10_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_toml(
        r#"
models = ["M0", "M4"]
m_grid = [64, 256, 1024]
n = 100000
seed = 10
method = "both"

[bounds]
n = 20000

[target]
family = "laplace"
rate = { type = "constant", value = 1.0 }
"#,
    )
    .unwrap();
    let converge = run_twice(dir.path(), "converge", |o| {
        run_converge(&cfg, o).unwrap();
    });
    let bounds = run_twice(dir.path(), "bounds", |o| {
        run_bounds(&cfg, o).unwrap();
    });
    let lemmas = run_twice(dir.path(), "lemmas", |o| {
        run_lemmas(1000, 10, o).unwrap();
    });
    let target = expo(Curve::constant(1.0), XLaw::unit(1));
    let model = build(ModelKind::M0, &target, 256);
    let a = kl_mc_with(&target, &model, 300_000, 10, 1).unwrap();
    let b = kl_mc_with(&target, &model, 300_000, 10, 3).unwrap();
    let direct = a.value.to_bits() == b.value.to_bits() && a.std_error.to_bits() == b.std_error.to_bits();
    let pass = converge && bounds && lemmas && direct;
    report(
        10,
        pass,
        &format!("byte-identical reruns (1 vs 2 workers): converge {converge}, bounds {bounds}, lemmas {lemmas}; kl_mc 1 vs 3 workers bitwise: {direct}"),
    );
    assert!(pass);
}
