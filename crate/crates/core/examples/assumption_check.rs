//! Advisory Monte Carlo check of the moment and tail-cube conditions for a target.

use smoothmix::targets::{check_assumption1, CubePolicy, Curve, TargetDensity, XLaw};

fn main() -> smoothmix::Result<()> {
    for t in [
        TargetDensity::exponential(Curve::constant(1.0), XLaw::unit(1))?,
        TargetDensity::student_t(2.5, Curve::constant(0.0), Curve::constant(1.0), XLaw::unit(1))?,
    ] {
        let m = 256f64;
        let block = (0.0, m.ln());
        let a = check_assumption1(&t, CubePolicy::SupportAdapted { r: 1.0 }, 50_000, 5, &[block])?;
        println!(
            "{}: E[y²] {:.4} ({:?}), log-ratio integral {:.4} ({:?}), tail-cube violated: {}",
            t.kind(),
            a.second_moment.value,
            a.second_moment.status,
            a.log_ratio_integral.value,
            a.log_ratio_integral.status,
            a.tail_cube_violated
        );
    }
    Ok(())
}
