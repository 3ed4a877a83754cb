//! Evaluate, invert and sample the built-in conditional targets at a fixed covariate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use smoothmix::targets::{Curve, TargetDensity, XLaw};

fn main() -> smoothmix::Result<()> {
    let unit = XLaw::unit(1);
    let rising = Curve::affine(1.0, &[1.0]);
    let targets = [
        TargetDensity::exponential(rising.clone(), unit.clone())?,
        TargetDensity::laplace(Curve::constant(1.0), unit.clone())?,
        TargetDensity::uniform(rising.clone(), unit.clone())?,
        TargetDensity::student_t(5.0, Curve::linear(&[1.0]), Curve::constant(1.0), unit.clone())?,
        TargetDensity::bounded_smooth(Curve::constant(0.0), rising, unit)?,
    ];
    let x = [0.5];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    println!("{:<16} {:>10} {:>10} {:>10} {:>10}", "family", "f(med|x)", "median", "q(0.9)", "draw");
    for t in &targets {
        let law = t.law(&x)?;
        let med = law.quantile(0.5)?;
        println!(
            "{:<16} {:>10.5} {:>10.5} {:>10.5} {:>10.5}",
            t.kind().to_string(),
            law.pdf(med),
            med,
            law.quantile(0.9)?,
            law.sample(&mut rng)?
        );
    }
    Ok(())
}
