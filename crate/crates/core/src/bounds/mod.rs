//! Explicit approximation-error bounds, rate exponents, empirical rate fits and the Gaussian
//! Riemann-sum inequalities behind them.
//!
//! Bound integrals over F are Monte Carlo estimates on the same sharded streams as the KL
//! estimator; closed-form terms are exact plug-ins. Lemma gaps use interval probabilities only.

mod corollary;
mod lemma;
mod rate;

pub use corollary::{
    corollary1_bound, corollary3_bound, corollary6_bound, gaussian_tail_term, logit_term, riemann_term, BoundBreakdown,
    BoundSettings, BoundTerm, TermMethod, Variant,
};
pub use lemma::{
    lemma1_gap, lemma2_gap, lemma3_gap, lemma_sweep, Gap, LemmaId, LemmaRow, Placement, Side, MARGIN_TOL,
};
pub use rate::{envelope_check, fit_rate, rate_exponent, EnvelopeRow, RateFit};
