//! Build every model kind for one target and inspect its weights and components at x.

use smoothmix::mixtures::{build_model, BuildOptions, ModelKind};
use smoothmix::targets::{Curve, TargetDensity, XLaw};

fn main() -> smoothmix::Result<()> {
    let t = TargetDensity::exponential(Curve::affine(1.0, &[1.0]), XLaw::unit(1))?;
    let x = [0.3];
    for kind in [ModelKind::M0, ModelKind::M1, ModelKind::M3, ModelKind::M4] {
        let model = build_model(kind, &t, 16, &BuildOptions::default())?;
        let w = model.mixing_weights(&x)?;
        let comps = model.components(&x)?;
        let heaviest = comps.iter().max_by(|a, b| a.weight.total_cmp(&b.weight)).expect("components");
        println!(
            "{kind}: {} components, sum w = {:.15}, heaviest N({:.3}, {:.3}²) w = {:.4}, p(1|x) = {:.5} vs f(1|x) = {:.5}",
            model.component_count(),
            w.iter().sum::<f64>(),
            heaviest.mean,
            heaviest.sigma,
            heaviest.weight,
            model.density(1.0, &x)?,
            t.pdf(1.0, &x)?
        );
    }
    let bounded = TargetDensity::bounded_smooth(Curve::constant(0.0), Curve::exp_affine(0.0, &[1.0]), XLaw::unit(1))?;
    let m5 = build_model(ModelKind::M5, &bounded, 16, &BuildOptions::default())?;
    println!("M5: {} polynomial means, sup error {:.3e}", m5.fits().len(), m5.achieved_eps().unwrap_or(f64::NAN));
    Ok(())
}
