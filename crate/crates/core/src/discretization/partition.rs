use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::targets::{SupportKind, TargetDensity};

/// Response-space domain a grid partition is laid over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    /// R^dim; fine block [−log m, log m)^dim
    FullSpace { dim: usize },
    /// [0, ∞); fine block [0, log m)
    HalfLine,
    /// [lo, hi]; m equal cells, no tail
    Interval { lo: f64, hi: f64 },
}

impl Domain {
    /// Domain matching a target's support; x-dependent intervals use their hull over X.
    pub fn for_target(target: &TargetDensity) -> Result<Self> {
        let spec = target.support_spec();
        Ok(match spec.kind {
            SupportKind::FullSpace => Domain::FullSpace { dim: spec.dim },
            SupportKind::HalfLine => Domain::HalfLine,
            SupportKind::Interval | SupportKind::XDependentInterval => {
                let (lo, hi) = target.support_hull()?;
                Domain::Interval { lo, hi }
            }
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::FullSpace { dim } => *dim,
            _ => 1,
        }
    }
}

/// Equal-side grid of m = k^d fine cells plus the tail A_0 (the rest of the domain).
///
/// Cells are half-open [lo, lo + h) per axis, except that an interval domain closes its last cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub domain: Domain,
    pub dim: usize,
    /// cells per axis
    pub k: usize,
    pub h: f64,
    /// lower corner of the fine block
    pub origin: Vec<f64>,
    pub tail_below: bool,
    pub tail_above: bool,
}

impl Partition {
    pub fn m(&self) -> usize {
        self.k.pow(self.dim as u32)
    }

    pub fn has_tail(&self) -> bool {
        self.tail_below || self.tail_above
    }

    fn axis_index(&self, j: usize) -> Vec<usize> {
        let mut r = j;
        (0..self.dim)
            .map(|_| {
                let i = r % self.k;
                r /= self.k;
                i
            })
            .collect()
    }

    /// Box of fine cell `j` (0-based).
    pub fn cell(&self, j: usize) -> (Vec<f64>, Vec<f64>) {
        let idx = self.axis_index(j);
        let lo: Vec<f64> = idx.iter().zip(&self.origin).map(|(&i, o)| o + i as f64 * self.h).collect();
        let hi = lo.iter().map(|l| l + self.h).collect();
        (lo, hi)
    }

    pub fn center(&self, j: usize) -> Vec<f64> {
        let idx = self.axis_index(j);
        idx.iter().zip(&self.origin).map(|(&i, o)| o + (i as f64 + 0.5) * self.h).collect()
    }

    /// Cell edges along one axis (k + 1 points).
    pub fn edges(&self) -> Vec<f64> {
        (0..=self.k).map(|i| self.origin[0] + i as f64 * self.h).collect()
    }

    /// Cell centres along one axis.
    pub fn centers_1d(&self) -> Vec<f64> {
        (0..self.k).map(|i| self.origin[0] + (i as f64 + 0.5) * self.h).collect()
    }

    pub fn block(&self) -> (Vec<f64>, Vec<f64>) {
        let hi = self.origin.iter().map(|o| o + self.k as f64 * self.h).collect();
        (self.origin.clone(), hi)
    }

    /// Fine-cell index containing y, or None when y is in the tail or outside the domain.
    pub fn locate(&self, y: &[f64]) -> Option<usize> {
        let mut j = 0;
        let mut stride = 1;
        let closed = matches!(self.domain, Domain::Interval { .. });
        for (a, &v) in y.iter().enumerate() {
            let t = (v - self.origin[a]) / self.h;
            let mut i = t.floor();
            if closed && i == self.k as f64 && v == self.origin[a] + self.k as f64 * self.h {
                i -= 1.0;
            }
            if i < 0.0 || i >= self.k as f64 {
                return None;
            }
            j += i as usize * stride;
            stride *= self.k;
        }
        Some(j)
    }

    /// True when y is in A_0.
    pub fn in_tail(&self, y: &[f64]) -> bool {
        if !self.has_tail() {
            return false;
        }
        let (lo, hi) = self.block();
        y.iter().enumerate().any(|(a, &v)| (self.tail_below && v < lo[a]) || (self.tail_above && v >= hi[a]))
    }

    /// True when the centred cube of side `delta` around y meets A_0.
    pub fn cube_meets_tail(&self, y: &[f64], delta: f64) -> bool {
        if !self.has_tail() {
            return false;
        }
        let (lo, hi) = self.block();
        y.iter()
            .enumerate()
            .any(|(a, &v)| (self.tail_below && v - 0.5 * delta < lo[a]) || (self.tail_above && v + 0.5 * delta >= hi[a]))
    }
}

/// Smallest k with k^d ≥ m.
pub fn int_root_ceil(m: usize, d: u32) -> usize {
    let mut k = (m as f64).powf(1.0 / d as f64).round().max(1.0) as usize;
    while k.pow(d) < m {
        k += 1;
    }
    while k > 1 && (k - 1).pow(d) >= m {
        k -= 1;
    }
    k
}

pub fn grid_partition(domain: Domain, m: usize) -> Result<Partition> {
    if m < 2 {
        return Err(Error::InvalidCount { what: "fine cell count m", got: m });
    }
    let lm = (m as f64).ln();
    Ok(match domain {
        Domain::HalfLine => Partition {
            domain,
            dim: 1,
            k: m,
            h: lm / m as f64,
            origin: vec![0.0],
            tail_below: false,
            tail_above: true,
        },
        Domain::FullSpace { dim } => {
            if dim == 0 {
                return Err(Error::UnsupportedDimension(0));
            }
            let k = int_root_ceil(m, dim as u32);
            if k.pow(dim as u32) != m {
                return Err(Error::InvalidCount { what: "fine cell count m (must be k^d)", got: m });
            }
            Partition {
                domain,
                dim,
                k,
                h: 2.0 * lm / k as f64,
                origin: vec![-lm; dim],
                tail_below: true,
                tail_above: true,
            }
        }
        Domain::Interval { lo, hi } => {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidParameter(format!("interval domain [{lo}, {hi}] is not a finite interval")));
            }
            Partition {
                domain,
                dim: 1,
                k: m,
                h: (hi - lo) / m as f64,
                origin: vec![lo],
                tail_below: false,
                tail_above: false,
            }
        }
    })
}
