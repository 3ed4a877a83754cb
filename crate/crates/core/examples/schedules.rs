//! Default tuning schedules along an m-grid and the ratio checks they must pass.

use smoothmix::discretization::{default_schedule, validate_schedule};
use smoothmix::mixtures::ModelKind;
use smoothmix::targets::{Curve, TargetDensity, XLaw};

fn main() -> smoothmix::Result<()> {
    let t = TargetDensity::exponential(Curve::constant(1.0), XLaw::unit(1))?;
    for kind in [ModelKind::M0, ModelKind::M4] {
        let grid: Vec<_> = [16usize, 64, 256, 1024]
            .iter()
            .map(|&m| default_schedule(kind, &t, m))
            .collect::<smoothmix::Result<_>>()?;
        println!("{kind}");
        for s in &grid {
            let x = [0.5];
            println!("  m = {:>5}: h {:.4e}  sigma {:.4e}  delta {:.4e}", s.m, s.h.at(&x), s.sigma.at(&x), s.delta.at(&x));
        }
        let report = validate_schedule(&grid)?;
        for r in &report.ratios {
            println!("  {:<12} decreasing = {} last = {:.3e}", r.name, r.decreasing, r.terminal);
        }
        println!("  ok = {}", report.ok());
    }
    Ok(())
}
