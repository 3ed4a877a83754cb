//! Expected KL divergence by Monte Carlo (with standard error) and by nested quadrature.

use smoothmix::divergence::{kl_mc_with, kl_quadrature};
use smoothmix::mixtures::{build_model, BuildOptions, ModelKind};
use smoothmix::targets::{Curve, TargetDensity, XLaw};

fn main() -> smoothmix::Result<()> {
    let t = TargetDensity::laplace(Curve::constant(1.0), XLaw::unit(1))?;
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    for kind in [ModelKind::M0, ModelKind::M4] {
        let model = build_model(kind, &t, 64, &BuildOptions::default())?;
        let mc = kl_mc_with(&t, &model, 200_000, 42, workers)?;
        let q = kl_quadrature(&t, &model)?;
        println!(
            "{kind}: MC {:.5e} ± {:.1e}  quadrature {:.5e} (est. error {:.1e})  z = {:.2}",
            mc.value,
            mc.std_error,
            q.value,
            q.quad_error.unwrap_or(0.0),
            (mc.value - q.value) / mc.std_error
        );
    }
    Ok(())
}
