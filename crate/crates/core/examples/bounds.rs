//! Term-by-term explicit bounds for the grid, covariate-indexed and equal-probability models.

use smoothmix::bounds::{corollary1_bound, corollary3_bound, corollary6_bound, BoundBreakdown, BoundSettings, Variant};
use smoothmix::discretization::{default_schedule, x_grid};
use smoothmix::mixtures::ModelKind;
use smoothmix::targets::{Curve, TargetDensity, XLaw};

fn show(b: &BoundBreakdown) {
    println!("{} m = {} (tail fraction {:.3e})", b.model, b.m, b.tail_fraction);
    for t in &b.terms {
        let sign = if t.negative { "-" } else { "+" };
        println!("  {sign} {:<22} {:.5e} ± {:.1e}", t.key, t.value, t.std_error);
    }
    println!("  = {:.5e} ± {:.1e}", b.total, b.total_se);
}

fn main() -> smoothmix::Result<()> {
    let st = BoundSettings::new(100_000, 11);
    let expo = TargetDensity::exponential(Curve::constant(1.0), XLaw::unit(1))?;
    let s = default_schedule(ModelKind::M0, &expo, 1024)?;
    show(&corollary1_bound(&expo, &s, 1024, 3.0, Variant::PartII, &st)?);

    let s = default_schedule(ModelKind::M3, &expo, 256)?;
    let grid = x_grid(1, s.k.expect("covariate grid size"))?;
    show(&corollary3_bound(&expo, &s, 256, &grid, 3.0, &st)?);

    let lap = TargetDensity::laplace(Curve::constant(1.0), XLaw::unit(1))?;
    let s = default_schedule(ModelKind::M4, &lap, 1024)?;
    show(&corollary6_bound(&lap, &s, 1024, &st)?);
    Ok(())
}
