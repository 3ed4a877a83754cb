//! KL along an m-grid with common random numbers, a log-log rate fit and the
//! calibrated envelope against the theoretical exponent.

use smoothmix::bounds::{envelope_check, fit_rate, rate_exponent};
use smoothmix::divergence::kl_series;
use smoothmix::mixtures::{build_model, BuildOptions, ModelKind};
use smoothmix::targets::{Curve, TargetDensity, XLaw};

fn main() -> smoothmix::Result<()> {
    let t = TargetDensity::exponential(Curve::constant(1.0), XLaw::unit(1))?;
    let grid = [16, 64, 256, 1024];
    let s = kl_series(&t, |m| build_model(ModelKind::M0, &t, m, &BuildOptions::default()), &grid, 200_000, 3, 1)?;
    for p in &s.points {
        println!("m = {:>5} ({:>5} components): KL {:.4e} ± {:.1e}", p.m, p.components, p.estimate.value, p.estimate.std_error);
    }
    let pts: Vec<_> = s.points.iter().map(|p| (p.m, p.estimate.clone())).collect();
    let exponent = rate_exponent(ModelKind::M0, t.kind(), 1, 1, 3.0, 0.5)?;
    let fit = fit_rate(&pts)?.with_theory(exponent);
    println!("slope {:.3} ± {:.3}, theoretical -{exponent:.4}", fit.slope, fit.slope_se);
    for r in envelope_check(&pts, exponent)? {
        println!("  m = {:>5}: {:.4e} <= {:.4e}: {}", r.m, r.value, r.envelope, r.holds);
    }
    println!("significant decrease: {}", s.trend.significant_decrease);
    Ok(())
}
