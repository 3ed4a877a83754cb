use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::divergence::{on_pool, shard_rng};
use crate::error::{Error, Result};
use crate::special::{norm_interval, norm_pdf, INV_SQRT_2PI};

/// Floating-point slack allowed below zero in a lemma margin.
pub const MARGIN_TOL: f64 = 1e-12;

/// Both sides of an inequality lhs ≥ rhs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

impl Gap {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self { lhs, rhs, margin: lhs - rhs }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

fn neumaier(it: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for v in it {
        let t = s + v;
        c += if s.abs() >= v.abs() { (s - t) + v } else { (v - t) + s };
        s = t;
    }
    s + c
}

/// Cell-centre Riemann sum over the grid cells inside the vertex cube C = y + [0, δ]^d.
///
/// Cells have side h and edges at y_a + offsets[a] + k h on axis a. lhs is the sum of
/// λ(A_j) φ(y; μ_j, σ) over cells A_j ⊂ C; rhs is ∫_C φ − 3 d^{3/2} δ^{d−1} h / ((2π)^{d/2} σ^d).
pub fn lemma1_gap(d: usize, delta: f64, h: f64, sigma: f64, offsets: &[f64]) -> Result<Gap> {
    positive("delta", delta)?;
    positive("h", h)?;
    positive("sigma", sigma)?;
    if d == 0 || offsets.len() != d {
        return Err(Error::InvalidParameter(format!("need d ≥ 1 offsets, got d = {d} with {} offsets", offsets.len())));
    }
    let df = d as f64;
    if !(delta > 3.0 * df.sqrt() * h) {
        return Err(Error::HypothesisViolated(format!("δ = {delta} ≤ 3 √d h = {}", 3.0 * df.sqrt() * h)));
    }
    // φ factorises over axes and so does the set of inner cells
    let mut lhs = 1.0;
    for &off in offsets {
        let first = off.rem_euclid(h);
        let count = ((delta - first) / h).floor().max(0.0) as usize;
        let mut k = count;
        // guard the rounding of the floor against the exact containment test
        while k > 0 && first + k as f64 * h > delta {
            k -= 1;
        }
        while first + (k + 1) as f64 * h <= delta {
            k += 1;
        }
        lhs *= neumaier((0..k).map(|i| h * norm_pdf((first + (i as f64 + 0.5) * h) / sigma) / sigma));
    }
    let cube = norm_interval(0.0, delta, 0.0, sigma).powi(d as i32);
    let slack = 3.0 * df.powf(1.5) * delta.powf(df - 1.0) * h / ((2.0 * std::f64::consts::PI).powf(0.5 * df) * sigma.powf(df));
    Ok(Gap::new(lhs, cube - slack))
}

/// Gaussian mass of the centred cube of side δ against 1 − (8 d σ/δ)(2π)^{−1/2} e^{−(δ/σ)²/8}.
pub fn lemma2_gap(d: usize, delta: f64, sigma: f64) -> Result<Gap> {
    positive("delta", delta)?;
    positive("sigma", sigma)?;
    if d == 0 {
        return Err(Error::UnsupportedDimension(0));
    }
    let lhs = norm_interval(-0.5 * delta, 0.5 * delta, 0.0, sigma).powi(d as i32);
    let t = delta / sigma;
    let rhs = 1.0 - 8.0 * d as f64 / t * INV_SQRT_2PI * (-0.125 * t * t).exp();
    Ok(Gap::new(lhs, rhs))
}

/// Which part of the length-δ interval around y is covered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// [y − δ/2, y + δ/2]
    TwoSided,
    /// [y − δ/2, y]
    Left,
    /// [y, y + δ/2]
    Right,
}

impl Side {
    fn interval(self, y: f64, delta: f64) -> (f64, f64) {
        match self {
            Side::TwoSided => (y - 0.5 * delta, y + 0.5 * delta),
            Side::Left => (y - 0.5 * delta, y),
            Side::Right => (y, y + 0.5 * delta),
        }
    }
}

/// Riemann sum of φ(y; μ_j, σ) weighted by λ(A_j ∩ C) over an arbitrary interval partition.
///
/// `edges` has one more entry than `mus` and μ_j must lie in [edges[j], edges[j+1]]. h is the
/// longest cell meeting C. rhs = 1 − 6h/((2π)^{1/2}σ) − (8σ/δ)(2π)^{−1/2}e^{−(δ/σ)²/8}, halved
/// for one-sided C.
pub fn lemma3_gap(edges: &[f64], mus: &[f64], y: f64, delta: f64, sigma: f64, side: Side) -> Result<Gap> {
    positive("delta", delta)?;
    positive("sigma", sigma)?;
    if edges.len() != mus.len() + 1 || mus.is_empty() {
        return Err(Error::InvalidParameter(format!("{} edges for {} cells", edges.len(), mus.len())));
    }
    if edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::HypothesisViolated("cell edges are not strictly increasing".into()));
    }
    if let Some(j) = (0..mus.len()).find(|&j| !(edges[j] <= mus[j] && mus[j] <= edges[j + 1])) {
        return Err(Error::HypothesisViolated(format!("μ_{j} = {} outside [{}, {}]", mus[j], edges[j], edges[j + 1])));
    }
    let (a, b) = side.interval(y, delta);
    if a < edges[0] || b > edges[mus.len()] {
        return Err(Error::HypothesisViolated(format!("[{a}, {b}] is not covered by the cells")));
    }
    let mut h = 0.0f64;
    let lhs = neumaier((0..mus.len()).filter_map(|j| {
        let len = edges[j + 1].min(b) - edges[j].max(a);
        (len > 0.0).then(|| {
            h = h.max(edges[j + 1] - edges[j]);
            len * norm_pdf((y - mus[j]) / sigma) / sigma
        })
    }));
    let t = delta / sigma;
    let mut rhs = 1.0 - 6.0 * h * INV_SQRT_2PI / sigma - 8.0 / t * INV_SQRT_2PI * (-0.125 * t * t).exp();
    if side != Side::TwoSided {
        rhs *= 0.5;
    }
    Ok(Gap::new(lhs, rhs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LemmaId {
    /// vertex-cube Riemann sum on a regular grid
    RiemannCube,
    /// Gaussian mass of a centred cube
    GaussianCube,
    /// Riemann sum on an irregular interval partition
    RiemannInterval,
}

/// How the interval-partition sweep places μ_j inside its cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    Centre,
    Uniform,
    /// the cell end farthest from y
    Adversarial,
}

/// One sweep draw. Columns not used by a lemma hold 0 (numbers) or "" (labels).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaRow {
    pub lemma: LemmaId,
    pub draw: usize,
    pub d: usize,
    pub delta: f64,
    pub sigma: f64,
    pub h: f64,
    /// grid offset of the first axis (riemann_cube)
    pub offset: f64,
    pub side: String,
    pub placement: String,
    pub cells: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

impl LemmaRow {
    pub fn violates(&self) -> bool {
        !(self.margin >= -MARGIN_TOL)
    }
}

enum Job {
    Cube { d: usize, delta: f64, h: f64, sigma: f64, offsets: Vec<f64> },
    Mass { d: usize, delta: f64, sigma: f64 },
    Interval { edges: Vec<f64>, mus: Vec<f64>, y: f64, delta: f64, sigma: f64, side: Side, placement: Placement },
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo.ln()..hi.ln()).exp()
}

fn sigma_delta<R: Rng>(rng: &mut R) -> (f64, f64) {
    let sigma = log_uniform(rng, 1e-3, 10.0);
    (sigma, sigma * log_uniform(rng, 0.1, 50.0))
}

fn interval_job<R: Rng>(rng: &mut R) -> Job {
    let (sigma, delta) = sigma_delta(rng);
    let h = sigma * log_uniform(rng, 1e-3, 1.0);
    let y = rng.random_range(-1.0..1.0);
    let side = [Side::TwoSided, Side::Left, Side::Right][rng.random_range(0..3)];
    let placement = [Placement::Centre, Placement::Uniform, Placement::Adversarial][rng.random_range(0..3)];
    let (a, b) = side.interval(y, delta);
    let mut edges = vec![a - rng.random_range(0.0..h)];
    while *edges.last().unwrap() < b {
        let last = *edges.last().unwrap();
        edges.push(last + h * rng.random_range(0.05..=1.0));
    }
    let mus = edges
        .windows(2)
        .map(|w| match placement {
            Placement::Centre => 0.5 * (w[0] + w[1]),
            Placement::Uniform => rng.random_range(w[0]..=w[1]),
            Placement::Adversarial => {
                if (y - w[0]).abs() > (y - w[1]).abs() {
                    w[0]
                } else {
                    w[1]
                }
            }
        })
        .collect();
    Job::Interval { edges, mus, y, delta, sigma, side, placement }
}

fn jobs(size: usize, seed: u64) -> Vec<(LemmaId, usize, Job)> {
    let mut out = Vec::with_capacity(3 * size);
    let mut rng = shard_rng(seed, 0);
    for i in 0..size {
        let job = if i == 0 {
            Job::Cube { d: 1, delta: 1.0, h: 0.01, sigma: 0.3, offsets: vec![0.0] }
        } else {
            let d = rng.random_range(1..=3usize);
            let (sigma, delta) = sigma_delta(&mut rng);
            let h = delta / (3.0 * (d as f64).sqrt()) * log_uniform(&mut rng, 10f64.powf(-2.5), 1.0);
            let offsets = (0..d).map(|_| rng.random_range(0.0..h)).collect();
            Job::Cube { d, delta, h, sigma, offsets }
        };
        out.push((LemmaId::RiemannCube, i, job));
    }
    let mut rng = shard_rng(seed, 1);
    for i in 0..size {
        let job = if i == 0 {
            Job::Mass { d: 1, delta: 4.0, sigma: 1.0 }
        } else {
            let d = rng.random_range(1..=3usize);
            let (sigma, delta) = sigma_delta(&mut rng);
            Job::Mass { d, delta, sigma }
        };
        out.push((LemmaId::GaussianCube, i, job));
    }
    let mut rng = shard_rng(seed, 2);
    for i in 0..size {
        out.push((LemmaId::RiemannInterval, i, interval_job(&mut rng)));
    }
    out
}

fn run(lemma: LemmaId, draw: usize, job: &Job) -> Result<LemmaRow> {
    let blank = |d, delta, sigma, h, g: Gap| LemmaRow {
        lemma,
        draw,
        d,
        delta,
        sigma,
        h,
        offset: 0.0,
        side: String::new(),
        placement: String::new(),
        cells: 0,
        lhs: g.lhs,
        rhs: g.rhs,
        margin: g.margin,
    };
    Ok(match job {
        Job::Cube { d, delta, h, sigma, offsets } => {
            let g = lemma1_gap(*d, *delta, *h, *sigma, offsets)?;
            LemmaRow { offset: offsets[0], ..blank(*d, *delta, *sigma, *h, g) }
        }
        Job::Mass { d, delta, sigma } => blank(*d, *delta, *sigma, 0.0, lemma2_gap(*d, *delta, *sigma)?),
        Job::Interval { edges, mus, y, delta, sigma, side, placement } => {
            let g = lemma3_gap(edges, mus, *y, *delta, *sigma, *side)?;
            let h = edges.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
            LemmaRow {
                side: serde_json::to_value(side)?.as_str().unwrap_or_default().to_string(),
                placement: serde_json::to_value(placement)?.as_str().unwrap_or_default().to_string(),
                cells: mus.len(),
                ..blank(1, *delta, *sigma, h, g)
            }
        }
    })
}

/// `size` random hypothesis-satisfying draws per lemma, in a fixed order independent of `workers`.
///
/// The first draw of each lemma is a fixed reference case.
pub fn lemma_sweep(size: usize, seed: u64, workers: usize) -> Result<Vec<LemmaRow>> {
    if size == 0 {
        return Err(Error::InvalidCount { what: "lemma sweep size", got: 0 });
    }
    let jobs = jobs(size, seed);
    on_pool(workers, || jobs.par_iter().map(|(l, i, j)| run(*l, *i, j)).collect::<Result<Vec<_>>>())?
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertex_cube_examples() {
        assert!(lemma1_gap(1, 1.0, 0.01, 0.3, &[0.0]).unwrap().margin >= 0.0);
        let cap = 1.0 / 3.0 * 0.999;
        assert!(lemma1_gap(1, 1.0, cap, 0.3, &[0.0]).unwrap().margin >= 0.0);
        let cap2 = 1.0 / (3.0 * 2f64.sqrt()) * 0.999;
        assert!(lemma1_gap(2, 1.0, cap2, 0.4, &[0.3 * cap2, 0.7 * cap2]).unwrap().margin >= 0.0);
        assert!(lemma1_gap(2, 1.0, 0.05, 0.4, &[0.0, 0.0]).unwrap().margin >= 0.0);
        assert!(matches!(lemma1_gap(1, 1.0, 0.34, 0.3, &[0.0]), Err(Error::HypothesisViolated(_))));
    }

    #[test]
    fn vertex_cube_sum_by_enumeration() {
        // d = 2, 20 × 20 inner cells enumerated one by one
        let (delta, h, sigma) = (1.0, 0.05, 0.4);
        let mut direct = 0.0;
        for i in 0..20 {
            for j in 0..20 {
                let (a, b) = ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
                direct += h * h * (-(a * a + b * b) / (2.0 * sigma * sigma)).exp() / (2.0 * std::f64::consts::PI * sigma * sigma);
            }
        }
        let g = lemma1_gap(2, delta, h, sigma, &[0.0, 0.0]).unwrap();
        assert!((g.lhs - direct).abs() < 1e-13);
    }

    #[test]
    fn centred_cube_examples() {
        let g = lemma2_gap(1, 4.0, 1.0).unwrap();
        assert!((g.lhs - libm::erf(std::f64::consts::SQRT_2)).abs() < 1e-15);
        assert!((g.lhs - 0.954_500).abs() < 1e-6);
        assert!((g.rhs - (1.0 - 2.0 * INV_SQRT_2PI * (-2f64).exp())).abs() < 1e-15);
        assert!((g.rhs - 0.892_019).abs() < 1e-6);
        assert!((g.margin - 0.0625).abs() < 1e-3);
        let g = lemma2_gap(1, 1.0, 1.0).unwrap();
        assert!((g.rhs + 1.816).abs() < 1e-3 && (g.lhs - 0.3829).abs() < 1e-4 && g.margin > 0.0);
        assert!(lemma2_gap(3, 20.0, 1.0).unwrap().margin >= 0.0);
    }

    fn uniform_cells(lo: f64, h: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|i| lo + i as f64 * h).collect()
    }

    #[test]
    fn interval_partition_examples() {
        let edges = uniform_cells(-0.5, 0.01, 100);
        let centres: Vec<f64> = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let g = lemma3_gap(&edges, &centres, 0.0, 1.0, 0.25, Side::TwoSided).unwrap();
        assert!(g.margin >= 0.0);
        let far: Vec<f64> = edges.windows(2).map(|w| if w[0].abs() > w[1].abs() { w[0] } else { w[1] }).collect();
        assert!(lemma3_gap(&edges, &far, 0.0, 1.0, 0.25, Side::TwoSided).unwrap().margin >= 0.0);
        let two = lemma3_gap(&edges, &centres, 0.0, 1.0, 0.25, Side::TwoSided).unwrap();
        let right = lemma3_gap(&edges, &centres, 0.0, 1.0, 0.25, Side::Right).unwrap();
        assert_eq!(right.rhs, 0.5 * two.rhs);
        assert!(right.margin >= 0.0);
    }

    #[test]
    fn interval_partition_rejects_bad_input() {
        let edges = uniform_cells(0.0, 0.1, 10);
        let mus = vec![0.5; 10];
        assert!(matches!(lemma3_gap(&edges, &mus, 0.5, 0.4, 0.1, Side::TwoSided), Err(Error::HypothesisViolated(_))));
        let centres: Vec<f64> = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        assert!(matches!(lemma3_gap(&edges, &centres, 0.1, 0.4, 0.1, Side::TwoSided), Err(Error::HypothesisViolated(_))));
    }

    #[test]
    fn sweep_has_no_violations_and_ignores_workers() {
        let a = lemma_sweep(200, 3, 1).unwrap();
        assert_eq!(a.len(), 600);
        assert!(a.iter().all(|r| !r.violates()), "{:?}", a.iter().find(|r| r.violates()));
        let b = lemma_sweep(200, 3, 4).unwrap();
        assert_eq!(a, b);
        let first = a.iter().find(|r| r.lemma == LemmaId::GaussianCube).unwrap();
        assert!((first.margin - 0.0625).abs() < 1e-3);
    }
}
