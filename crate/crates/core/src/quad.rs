//! Globally adaptive Gauss–Kronrod (7, 15) integration on finite and infinite ranges.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for XGK[1], XGK[3], XGK[5] and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Subdivision cap; 4096 pieces is twelve levels of bisection of one panel.
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-10,
            max_intervals: 4096,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

#[derive(Debug, Clone, Copy)]
enum Map {
    Id,
    /// x = a + t / (1 - t), t in [0, 1)
    Right(f64),
    /// x = b - t / (1 - t), t in [0, 1)
    Left(f64),
}

impl Map {
    #[inline]
    fn apply(self, t: f64) -> (f64, f64) {
        match self {
            Map::Id => (t, 1.0),
            Map::Right(a) => {
                let u = 1.0 - t;
                (a + t / u, 1.0 / (u * u))
            }
            Map::Left(b) => {
                let u = 1.0 - t;
                (b - t / u, 1.0 / (u * u))
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    a: f64,
    b: f64,
    map: Map,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, map: Map) -> Result<(f64, f64)> {
    let c = 0.5 * (a + b);
    let hl = 0.5 * (b - a);
    let mut eval = |t: f64| -> Result<f64> {
        let (x, jac) = map.apply(t);
        let v = f(x);
        if v == 0.0 {
            return Ok(0.0);
        }
        let w = v * jac;
        if !w.is_finite() {
            return Err(Error::QuadratureFailure(format!(
                "integrand is not finite at x = {x}"
            )));
        }
        Ok(w)
    };
    let fc = eval(c)?;
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for i in 0..7 {
        let dx = hl * XGK[i];
        let s = eval(c - dx)? + eval(c + dx)?;
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    Ok((k * hl, ((k - g) * hl).abs()))
}

/// Integrate `f` over `[a, b]`; either end may be infinite.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult> {
    integrate_with_breaks(f, &[a, b], opts)
}

/// Integrate `f` over `[breaks[0], breaks[last]]` with forced subdivision at interior breakpoints.
/// Only the outer ends may be infinite.
pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    opts: QuadOptions,
) -> Result<QuadResult> {
    if breaks.len() < 2 {
        return Err(Error::QuadratureFailure("need at least two breakpoints".into()));
    }
    let mut seeds: Vec<(f64, f64, Map)> = Vec::new();
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if lo.is_nan() || hi.is_nan() || hi < lo {
            return Err(Error::QuadratureFailure(format!("bad range [{lo}, {hi}]")));
        }
        if lo == hi {
            continue;
        }
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => seeds.push((lo, hi, Map::Id)),
            (true, false) => seeds.push((0.0, 1.0, Map::Right(lo))),
            (false, true) => seeds.push((0.0, 1.0, Map::Left(hi))),
            (false, false) => {
                seeds.push((0.0, 1.0, Map::Left(0.0)));
                seeds.push((0.0, 1.0, Map::Right(0.0)));
            }
        }
    }
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut err = 0.0;
    let mut evals = 0;
    for (a, b, map) in seeds {
        let (v, e) = gk15(&mut f, a, b, map)?;
        evals += 15;
        total += v;
        err += e;
        heap.push(Piece { a, b, map, value: v, error: e });
    }
    while err > opts.abs_tol.max(opts.rel_tol * total.abs()) {
        if heap.len() >= opts.max_intervals {
            return Err(Error::QuadratureFailure(format!(
                "{} subintervals, error estimate {err:e} on value {total:e}",
                heap.len()
            )));
        }
        let p = heap.pop().expect("heap is non-empty while error is positive");
        let mid = 0.5 * (p.a + p.b);
        let (v1, e1) = gk15(&mut f, p.a, mid, p.map)?;
        let (v2, e2) = gk15(&mut f, mid, p.b, p.map)?;
        evals += 30;
        total += v1 + v2 - p.value;
        err += e1 + e2 - p.error;
        heap.push(Piece { a: p.a, b: mid, map: p.map, value: v1, error: e1 });
        heap.push(Piece { a: mid, b: p.b, map: p.map, value: v2, error: e2 });
    }
    // Re-sum to shed drift from the incremental updates.
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let error: f64 = heap.iter().map(|p| p.error).sum();
    Ok(QuadResult { value, error, evals })
}
