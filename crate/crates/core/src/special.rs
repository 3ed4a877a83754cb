//! Normal-distribution helpers and log-space accumulation.

use std::f64::consts::FRAC_1_SQRT_2;

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn norm_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// log φ(y; μ, σ)
pub fn norm_logpdf(y: f64, mu: f64, sigma: f64) -> f64 {
    let z = (y - mu) / sigma;
    -0.5 * z * z - LN_SQRT_2PI - sigma.ln()
}

pub fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

pub fn norm_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z * FRAC_1_SQRT_2)
}

/// P(a ≤ Z ≤ b) for Z ~ N(mu, sigma²), evaluated on the side that avoids cancellation.
pub fn norm_interval(a: f64, b: f64, mu: f64, sigma: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let za = (a - mu) / sigma;
    let zb = (b - mu) / sigma;
    if za >= 0.0 {
        norm_sf(za) - norm_sf(zb)
    } else if zb <= 0.0 {
        norm_cdf(zb) - norm_cdf(za)
    } else {
        1.0 - norm_cdf(za) - norm_sf(zb)
    }
}

/// Streaming log-sum-exp.
#[derive(Debug, Clone, Copy)]
pub struct LogSum {
    max: f64,
    acc: f64,
}

impl Default for LogSum {
    fn default() -> Self {
        Self::new()
    }
}

impl LogSum {
    pub fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            acc: 0.0,
        }
    }

    #[inline]
    pub fn add(&mut self, t: f64) {
        if t == f64::NEG_INFINITY {
            return;
        }
        if t <= self.max {
            self.acc += (t - self.max).exp();
        } else {
            self.acc = self.acc * (self.max - t).exp() + 1.0;
            self.max = t;
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.acc.ln()
        }
    }
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let mut s = LogSum::new();
    for &x in xs {
        s.add(x);
    }
    s.value()
}

/// Softmax computed in log space.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|&l| (l - lse).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pdf_peak() {
        assert!((norm_pdf(0.0) - 0.398_942_280_401_432_7).abs() < 1e-16);
        assert!((norm_logpdf(0.0, 0.0, 1.0).exp() - norm_pdf(0.0)).abs() < 1e-16);
    }

    #[test]
    fn interval_symmetric() {
        let p = norm_interval(-2.0, 2.0, 0.0, 1.0);
        assert!((p - libm::erf(2.0_f64.sqrt())).abs() < 1e-15);
        let far = norm_interval(10.0, 11.0, 0.0, 1.0);
        assert!(far > 0.0 && far < 1e-22);
    }

    #[test]
    fn logsum_matches_direct() {
        let xs = [-1000.0, -1001.0, -999.5];
        let direct = -999.5 + (1.0 + (-0.5f64).exp() + (-1.5f64).exp()).ln();
        assert!((log_sum_exp(&xs) - direct).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }
}
