//! Tensor Chebyshev least-squares fits over a covariate box.
//!
//! Every output is sampled once on K^dx Chebyshev nodes (K = cap + 1). Discrete orthogonality
//! makes the degree-n truncation of the node transform the least-squares fit of degree n on
//! those nodes, so degree escalation only needs the one transform. The sup error is measured on
//! a uniform grid at least four times denser per axis.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyFit {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// total per-axis degree
    pub degree: usize,
    /// (degree + 1)^dx coefficients, axis 0 varying fastest
    pub coeffs: Vec<f64>,
    /// max |f − P| on the validation grid
    pub achieved: f64,
}

impl PolyFit {
    pub fn constant(value: f64, lo: &[f64], hi: &[f64]) -> Self {
        Self { lo: lo.to_vec(), hi: hi.to_vec(), degree: 0, coeffs: vec![value], achieved: 0.0 }
    }

    fn dx(&self) -> usize {
        self.lo.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        if self.degree == 0 {
            return self.coeffs[0];
        }
        let n = self.degree + 1;
        if self.dx() == 1 {
            return clenshaw(&self.coeffs, to_unit(x[0], self.lo[0], self.hi[0]));
        }
        let t: Vec<Vec<f64>> = (0..self.dx()).map(|a| cheb_values(to_unit(x[a], self.lo[a], self.hi[a]), n)).collect();
        let mut sum = 0.0;
        for (idx, c) in self.coeffs.iter().enumerate() {
            let mut r = idx;
            let mut term = *c;
            for ta in &t {
                term *= ta[r % n];
                r /= n;
            }
            sum += term;
        }
        sum
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub degree_cap: usize,
    /// validation points per axis for dx = 1 (raised to 4·(cap + 1) + 1 if smaller)
    pub validation_1d: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { degree_cap: 16, validation_1d: 1025 }
    }
}

fn to_unit(x: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        (2.0 * (x - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0)
    } else {
        0.0
    }
}

fn from_unit(u: f64, lo: f64, hi: f64) -> f64 {
    lo + 0.5 * (u + 1.0) * (hi - lo)
}

fn cheb_values(u: f64, n: usize) -> Vec<f64> {
    let mut t = vec![1.0; n];
    if n > 1 {
        t[1] = u;
    }
    for k in 2..n {
        t[k] = 2.0 * u * t[k - 1] - t[k - 2];
    }
    t
}

fn clenshaw(c: &[f64], u: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &ck in c.iter().skip(1).rev() {
        let b = 2.0 * u * b1 - b2 + ck;
        b2 = b1;
        b1 = b;
    }
    u * b1 - b2 + c[0]
}

fn grid_points(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let total: usize = axes.iter().map(|a| a.len()).product();
    (0..total)
        .map(|mut idx| {
            axes.iter()
                .map(|a| {
                    let v = a[idx % a.len()];
                    idx /= a.len();
                    v
                })
                .collect()
        })
        .collect()
}

/// Fits every component of the vector function `f` over [lo, hi], each to its own sup-error
/// target, using the smallest degree ≤ cap that meets it.
pub fn fit_many(
    lo: &[f64],
    hi: &[f64],
    n_out: usize,
    targets: &[f64],
    opts: FitOptions,
    f: impl Fn(&[f64]) -> Result<Vec<f64>>,
) -> Result<Vec<PolyFit>> {
    let dx = lo.len();
    if targets.len() != n_out {
        return Err(Error::InconsistentInputs(format!("{} fit targets for {n_out} outputs", targets.len())));
    }
    if (0..dx).all(|a| hi[a] <= lo[a]) {
        let v = f(lo)?;
        return Ok(v.into_iter().map(|c| PolyFit::constant(c, lo, hi)).collect());
    }
    let k = opts.degree_cap + 1;
    let nodes_u: Vec<f64> = (0..k).map(|i| (PI * (i as f64 + 0.5) / k as f64).cos()).collect();
    let node_axes: Vec<Vec<f64>> = (0..dx).map(|a| nodes_u.iter().map(|&u| from_unit(u, lo[a], hi[a])).collect()).collect();
    let v_per_axis = if dx == 1 { opts.validation_1d.max(4 * k + 1) } else { 4 * k + 1 };
    let val_axes: Vec<Vec<f64>> = (0..dx)
        .map(|a| (0..v_per_axis).map(|i| lo[a] + (hi[a] - lo[a]) * i as f64 / (v_per_axis - 1) as f64).collect())
        .collect();

    let node_pts = grid_points(&node_axes);
    let val_pts = grid_points(&val_axes);
    let node_vals = node_pts.iter().map(|x| f(x)).collect::<Result<Vec<_>>>()?;
    let val_vals = val_pts.iter().map(|x| f(x)).collect::<Result<Vec<_>>>()?;
    for v in node_vals.iter().chain(&val_vals) {
        if v.len() != n_out {
            return Err(Error::InconsistentInputs("fit function changed its output length".into()));
        }
        if let Some(bad) = v.iter().find(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite value {bad} in polynomial fit input")));
        }
    }

    // T_k at the nodes: cos(k θ_i)
    let t_nodes: Vec<Vec<f64>> = (0..k)
        .map(|deg| (0..k).map(|i| (deg as f64 * PI * (i as f64 + 0.5) / k as f64).cos()).collect())
        .collect();
    let t_val: Vec<Vec<Vec<f64>>> = (0..dx)
        .map(|a| val_axes[a].iter().map(|&x| cheb_values(to_unit(x, lo[a], hi[a]), k)).collect())
        .collect();

    let n_coef = k.pow(dx as u32);
    let multi = |mut idx: usize| -> Vec<usize> {
        (0..dx)
            .map(|_| {
                let i = idx % k;
                idx /= k;
                i
            })
            .collect()
    };
    let coef_idx: Vec<Vec<usize>> = (0..n_coef).map(multi).collect();
    let val_idx: Vec<Vec<usize>> = (0..val_pts.len())
        .map(|mut idx| {
            (0..dx)
                .map(|_| {
                    let i = idx % v_per_axis;
                    idx /= v_per_axis;
                    i
                })
                .collect()
        })
        .collect();
    let node_idx: Vec<Vec<usize>> = (0..node_pts.len()).map(multi).collect();

    let mut out = Vec::with_capacity(n_out);
    for o in 0..n_out {
        let first = node_vals[0][o];
        if node_vals.iter().all(|v| v[o] == first) && val_vals.iter().all(|v| v[o] == first) {
            out.push(PolyFit::constant(first, lo, hi));
            continue;
        }
        // full transform
        let mut c = vec![0.0; n_coef];
        for (ci, kk) in coef_idx.iter().enumerate() {
            let mut s = 0.0;
            for (ni, ii) in node_idx.iter().enumerate() {
                let mut w = node_vals[ni][o];
                for a in 0..dx {
                    w *= t_nodes[kk[a]][ii[a]];
                }
                s += w;
            }
            let norm: f64 = kk.iter().map(|&q| if q == 0 { 1.0 / k as f64 } else { 2.0 / k as f64 }).product();
            c[ci] = s * norm;
        }
        // escalate degree shell by shell
        let mut partial = vec![0.0; val_pts.len()];
        let mut chosen: Option<(usize, f64)> = None;
        let mut best = (0usize, f64::INFINITY);
        for deg in 0..k {
            for (ci, kk) in coef_idx.iter().enumerate() {
                if kk.iter().copied().max().unwrap_or(0) != deg {
                    continue;
                }
                for (vi, ii) in val_idx.iter().enumerate() {
                    let mut w = c[ci];
                    for a in 0..dx {
                        w *= t_val[a][ii[a]][kk[a]];
                    }
                    partial[vi] += w;
                }
            }
            let err = partial.iter().zip(&val_vals).map(|(p, v)| (p - v[o]).abs()).fold(0.0, f64::max);
            if err < best.1 {
                best = (deg, err);
            }
            if err <= targets[o] {
                chosen = Some((deg, err));
                break;
            }
        }
        let (deg, err) = chosen.ok_or(Error::DegreeCapExceeded { cap: opts.degree_cap, achieved: best.1, target: targets[o] })?;
        let n = deg + 1;
        let mut coeffs = vec![0.0; n.pow(dx as u32)];
        for (ci, kk) in coef_idx.iter().enumerate() {
            if kk.iter().all(|&q| q < n) {
                let mut j = 0;
                let mut stride = 1;
                for &q in kk {
                    j += q * stride;
                    stride *= n;
                }
                coeffs[j] = c[ci];
            }
        }
        out.push(PolyFit { lo: lo.to_vec(), hi: hi.to_vec(), degree: deg, coeffs, achieved: err });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_is_exact() {
        let f = fit_many(&[0.0], &[1.0], 1, &[1e-9], FitOptions::default(), |_| Ok(vec![-2.5])).unwrap();
        assert_eq!(f[0].degree, 0);
        assert_eq!(f[0].achieved, 0.0);
        assert_eq!(f[0].eval(&[0.3]), -2.5);
    }

    #[test]
    fn linear_needs_degree_one() {
        let f = fit_many(&[1.0], &[2.0], 1, &[1e-12], FitOptions::default(), |x| Ok(vec![0.375 * x[0]])).unwrap();
        assert_eq!(f[0].degree, 1);
        assert!(f[0].achieved <= 1e-12);
        assert!((f[0].eval(&[1.7]) - 0.375 * 1.7).abs() < 1e-13);
    }

    #[test]
    fn smooth_function_reaches_target() {
        let f = fit_many(&[0.0], &[1.0], 1, &[1e-8], FitOptions::default(), |x| Ok(vec![(3.0 * x[0]).exp()])).unwrap();
        assert!(f[0].achieved <= 1e-8);
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            assert!((f[0].eval(&[x]) - (3.0 * x).exp()).abs() < 2e-8);
        }
    }

    #[test]
    fn two_dimensional() {
        let g = |x: &[f64]| (x[0] - 0.3 * x[1]).sin();
        let f = fit_many(&[0.0, 0.0], &[1.0, 1.0], 1, &[1e-6], FitOptions { degree_cap: 12, validation_1d: 1025 }, |x| Ok(vec![g(x)])).unwrap();
        assert!(f[0].achieved <= 1e-6);
        assert!((f[0].eval(&[0.21, 0.77]) - g(&[0.21, 0.77])).abs() < 1e-6);
    }

    #[test]
    fn cap_is_reported() {
        let r = fit_many(&[0.0], &[1.0], 1, &[1e-10], FitOptions { degree_cap: 3, validation_1d: 1025 }, |x| Ok(vec![(x[0] - 0.5).abs()]));
        assert!(matches!(r, Err(Error::DegreeCapExceeded { cap: 3, .. })));
    }
}
