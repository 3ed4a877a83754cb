use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar parameter curve x ↦ c(x) from a fixed whitelist of shapes.
///
/// Every shape is monotone in each coordinate, so extremes over a box sit at corners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Curve {
    Constant { value: f64 },
    /// Σ coef_i x_i
    Linear { coef: Vec<f64> },
    /// intercept + Σ coef_i x_i
    Affine { intercept: f64, coef: Vec<f64> },
    /// exp(intercept + Σ coef_i x_i)
    ExpAffine { intercept: f64, coef: Vec<f64> },
}

impl Curve {
    pub fn constant(value: f64) -> Self {
        Curve::Constant { value }
    }

    pub fn linear(coef: &[f64]) -> Self {
        Curve::Linear { coef: coef.to_vec() }
    }

    pub fn affine(intercept: f64, coef: &[f64]) -> Self {
        Curve::Affine { intercept, coef: coef.to_vec() }
    }

    pub fn exp_affine(intercept: f64, coef: &[f64]) -> Self {
        Curve::ExpAffine { intercept, coef: coef.to_vec() }
    }

    fn index(&self, x: &[f64]) -> f64 {
        match self {
            Curve::Constant { value } => *value,
            Curve::Linear { coef } => dot(coef, x),
            Curve::Affine { intercept, coef } | Curve::ExpAffine { intercept, coef } => {
                intercept + dot(coef, x)
            }
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Curve::ExpAffine { .. } => self.index(x).exp(),
            _ => self.index(x),
        }
    }

    /// Gradient with respect to x, written into `out` (length d_x).
    pub fn grad(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Curve::Constant { .. } => out.iter_mut().for_each(|g| *g = 0.0),
            Curve::Linear { coef } | Curve::Affine { coef, .. } => {
                for (g, c) in out.iter_mut().zip(coef.iter().chain(std::iter::repeat(&0.0))) {
                    *g = *c;
                }
            }
            Curve::ExpAffine { coef, .. } => {
                let v = self.eval(x);
                for (g, c) in out.iter_mut().zip(coef.iter().chain(std::iter::repeat(&0.0))) {
                    *g = c * v;
                }
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Curve::Constant { .. } => true,
            Curve::Linear { coef } | Curve::Affine { coef, .. } | Curve::ExpAffine { coef, .. } => {
                coef.iter().all(|&c| c == 0.0)
            }
        }
    }

    /// Number of covariates the curve reads, 0 for constants.
    pub fn arity(&self) -> usize {
        match self {
            Curve::Constant { .. } => 0,
            Curve::Linear { coef } | Curve::Affine { coef, .. } | Curve::ExpAffine { coef, .. } => {
                coef.len()
            }
        }
    }

    /// (min, max) over the box [lo, hi].
    pub fn range_on(&self, lo: &[f64], hi: &[f64]) -> (f64, f64) {
        let (coef, base) = match self {
            Curve::Constant { value } => return (*value, *value),
            Curve::Linear { coef } => (coef, 0.0),
            Curve::Affine { intercept, coef } | Curve::ExpAffine { intercept, coef } => (coef, *intercept),
        };
        let mut a = base;
        let mut b = base;
        for (i, &c) in coef.iter().enumerate() {
            let (u, v) = (c * lo[i], c * hi[i]);
            a += u.min(v);
            b += u.max(v);
        }
        match self {
            Curve::ExpAffine { .. } => (a.exp(), b.exp()),
            _ => (a, b),
        }
    }

    pub fn check_arity(&self, dx: usize, name: &str) -> Result<()> {
        if self.arity() > dx {
            return Err(Error::InvalidParameter(format!(
                "curve {name} reads {} covariates but x has dimension {dx}",
                self.arity()
            )));
        }
        Ok(())
    }
}

#[inline]
fn dot(c: &[f64], x: &[f64]) -> f64 {
    c.iter().zip(x).map(|(a, b)| a * b).sum()
}
