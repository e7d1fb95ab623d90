//! Closed-form edge marginal posterior given a partial correlation.
//!
//! The partial correlation of a node pair is modelled as normal with mean equal
//! to the binary edge value and an unknown variance; marginalizing the variance
//! uniformly over `(0, u]` leaves, up to a constant,
//!
//! ```text
//! f(S) = sqrt(2/π)·exp(−S²/2) − S·erfc(S/√2),   S = |g − |ψ||
//! ```
//!
//! for `u = 1`. For other bounds the same integral is `sqrt(u)·f(S/√u)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use statrs::function::erf::erfc;

/// Variance integral `∫₀¹ (2πv)^{−1/2} exp(−S²/(2v)) dv` in closed form.
pub fn edge_marginal_bracket(s_val: f64) -> f64 {
    (2.0 / PI).sqrt() * (-0.5 * s_val * s_val).exp() - s_val * erfc(s_val * FRAC_1_SQRT_2)
}

/// Variance integral over `(0, u]`.
pub fn edge_marginal_bracket_with_bound(s_val: f64, u: f64) -> f64 {
    if u == 1.0 {
        edge_marginal_bracket(s_val)
    } else {
        let root = u.sqrt();
        root * edge_marginal_bracket(s_val / root)
    }
}

/// Normalized marginal posterior of one binary edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeMarginal {
    pub psi: f64,
    pub u: f64,
    /// `1 / (f(S(0)) + f(S(1)))`.
    pub normalizer: f64,
    absent: f64,
    present: f64,
}

impl EdgeMarginal {
    pub fn new(psi: f64) -> Self {
        Self::with_bound(psi, 1.0)
    }

    pub fn with_bound(psi: f64, u: f64) -> Self {
        let a = psi.abs().min(1.0);
        let f_absent = edge_marginal_bracket_with_bound(a, u);
        let f_present = edge_marginal_bracket_with_bound(1.0 - a, u);
        let normalizer = 1.0 / (f_absent + f_present);
        EdgeMarginal {
            psi,
            u,
            normalizer,
            absent: f_absent * normalizer,
            present: f_present * normalizer,
        }
    }

    /// `m(g | ψ)`.
    pub fn prob(&self, edge: bool) -> f64 {
        if edge {
            self.present
        } else {
            self.absent
        }
    }

    pub fn ln_prob(&self, edge: bool) -> f64 {
        self.prob(edge).ln()
    }
}

/// `m(g | ψ)` with the default variance bound `u = 1`.
pub fn edge_posterior(edge: bool, psi: f64) -> f64 {
    EdgeMarginal::new(psi).prob(edge)
}
