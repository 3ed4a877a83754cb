use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// N = k^dx congruent half-open cells tiling [0,1]^dx.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct XGrid {
    pub dx: usize,
    pub k: usize,
}

impl XGrid {
    pub fn n(&self) -> usize {
        self.k.pow(self.dx as u32)
    }

    /// Squared cell diagonal dx · k^(−2).
    pub fn s(&self) -> f64 {
        self.dx as f64 / (self.k * self.k) as f64
    }

    pub fn center(&self, i: usize) -> Vec<f64> {
        let mut r = i;
        (0..self.dx)
            .map(|_| {
                let c = r % self.k;
                r /= self.k;
                (c as f64 + 0.5) / self.k as f64
            })
            .collect()
    }

    pub fn centers(&self) -> Vec<Vec<f64>> {
        (0..self.n()).map(|i| self.center(i)).collect()
    }

    pub fn cell(&self, i: usize) -> (Vec<f64>, Vec<f64>) {
        let c = self.center(i);
        let half = 0.5 / self.k as f64;
        (c.iter().map(|v| v - half).collect(), c.iter().map(|v| v + half).collect())
    }

    /// Cell containing x; the upper face of the cube belongs to the last cell.
    pub fn cell_index(&self, x: &[f64]) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for &v in x.iter().take(self.dx) {
            let c = ((v * self.k as f64).floor().max(0.0) as usize).min(self.k - 1);
            idx += c * stride;
            stride *= self.k;
        }
        idx
    }
}

pub fn x_grid(dx: usize, k: usize) -> Result<XGrid> {
    if dx == 0 {
        return Err(Error::InvalidCount { what: "covariate dimension", got: dx });
    }
    if k == 0 {
        return Err(Error::InvalidCount { what: "cells per axis", got: k });
    }
    Ok(XGrid { dx, k })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let g = x_grid(1, 4).unwrap();
        let c: Vec<f64> = g.centers().into_iter().map(|v| v[0]).collect();
        assert_eq!(c, vec![0.125, 0.375, 0.625, 0.875]);
        assert_eq!(g.s(), 1.0 / 16.0);
        let g2 = x_grid(2, 2).unwrap();
        assert_eq!(g2.n(), 4);
        assert_eq!(g2.s(), 0.5);
        let lam: f64 = 0.25;
        assert_eq!(g2.s(), 2.0 * lam.powf(2.0 / 2.0));
        let g1 = x_grid(1, 1).unwrap();
        assert_eq!(g1.center(0), vec![0.5]);
        assert_eq!(g1.cell(0), (vec![0.0], vec![1.0]));
        assert_eq!(g.cell_index(&[1.0]), 3);
    }
}
