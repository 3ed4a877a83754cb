//! Gaussian Riemann-sum inequalities: single evaluations and a randomized sweep.

use smoothmix::bounds::{lemma1_gap, lemma2_gap, lemma3_gap, lemma_sweep, Side};

fn main() -> smoothmix::Result<()> {
    let g = lemma1_gap(1, 1.0, 0.01, 0.3, &[0.0])?;
    println!("cube sum:      lhs {:.6} rhs {:.6} margin {:.3e}", g.lhs, g.rhs, g.margin);
    let g = lemma2_gap(1, 4.0, 1.0)?;
    println!("cube mass:     lhs {:.6} rhs {:.6} margin {:.3e}", g.lhs, g.rhs, g.margin);
    let edges: Vec<f64> = (0..=200).map(|i| -1.0 + 0.01 * i as f64).collect();
    let mus: Vec<f64> = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    for side in [Side::TwoSided, Side::Left, Side::Right] {
        let g = lemma3_gap(&edges, &mus, 0.0, 1.0, 0.25, side)?;
        println!("interval {side:?}: lhs {:.6} rhs {:.6} margin {:.3e}", g.lhs, g.rhs, g.margin);
    }
    let rows = lemma_sweep(1000, 1, 1)?;
    let worst = rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    println!("sweep: {} draws, {} violations, min margin {worst:.3e}", rows.len(), rows.iter().filter(|r| r.violates()).count());
    Ok(())
}
