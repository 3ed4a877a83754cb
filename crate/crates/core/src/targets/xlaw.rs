use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Marginal law of the covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum XLaw {
    /// Uniform on the box [lo, hi].
    Uniform { lo: Vec<f64>, hi: Vec<f64> },
    PointMass { at: Vec<f64> },
}

impl Default for XLaw {
    fn default() -> Self {
        XLaw::unit(1)
    }
}

impl XLaw {
    /// U[0,1]^dx
    pub fn unit(dx: usize) -> Self {
        XLaw::Uniform { lo: vec![0.0; dx], hi: vec![1.0; dx] }
    }

    pub fn uniform(lo: &[f64], hi: &[f64]) -> Self {
        XLaw::Uniform { lo: lo.to_vec(), hi: hi.to_vec() }
    }

    pub fn point(at: &[f64]) -> Self {
        XLaw::PointMass { at: at.to_vec() }
    }

    pub fn dim(&self) -> usize {
        match self {
            XLaw::Uniform { lo, .. } => lo.len(),
            XLaw::PointMass { at } => at.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            XLaw::Uniform { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return Err(Error::InvalidParameter("x_law box bounds must be non-empty and of equal length".into()));
                }
                if lo.iter().zip(hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
                    return Err(Error::InvalidParameter("x_law box needs finite lo < hi on every axis".into()));
                }
            }
            XLaw::PointMass { at } => {
                if at.is_empty() || at.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter("x_law point must be finite and non-empty".into()));
                }
            }
        }
        Ok(())
    }

    /// Bounding box of the support.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            XLaw::Uniform { lo, hi } => (lo.clone(), hi.clone()),
            XLaw::PointMass { at } => (at.clone(), at.clone()),
        }
    }

    pub fn is_unit_cube(&self) -> bool {
        match self {
            XLaw::Uniform { lo, hi } => lo.iter().all(|&v| v == 0.0) && hi.iter().all(|&v| v == 1.0),
            XLaw::PointMass { .. } => false,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            XLaw::Uniform { lo, hi } => x.len() == lo.len() && x.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| a <= v && v <= b),
            XLaw::PointMass { at } => x == at.as_slice(),
        }
    }

    /// Density with respect to Lebesgue measure (uniform) or counting measure (point mass).
    pub fn density(&self, x: &[f64]) -> f64 {
        if !self.contains(x) {
            return 0.0;
        }
        match self {
            XLaw::Uniform { lo, hi } => lo.iter().zip(hi).map(|(a, b)| 1.0 / (b - a)).product(),
            XLaw::PointMass { .. } => 1.0,
        }
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        out.clear();
        match self {
            XLaw::Uniform { lo, hi } => {
                for (a, b) in lo.iter().zip(hi) {
                    let u: f64 = rng.random();
                    out.push(a + (b - a) * u);
                }
            }
            XLaw::PointMass { at } => out.extend_from_slice(at),
        }
    }
}
