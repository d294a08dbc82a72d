//! One firm selling down a finite capacity x with demand (alpha - p)/beta
//! and discount rate r.
//!
//! Without noise the value is
//! `v(x) = alpha^2/(4 beta r) * (1 + W(-exp(-mu x - 1)))^2` with
//! `mu = 2 beta r / alpha`. Most quantities below are written in terms of
//! `W = W0(-exp(-mu x - 1))`, which runs from -1 at x = 0 to 0 as x grows.

mod lambert;
mod numeric;

pub use lambert::lambert_w0;
pub(crate) use numeric::solve_on_nodes;
pub use numeric::{solve_monopoly_numeric, MonopolyCurve};
pub(crate) use numeric::fitted_weight;

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonopolyModel {
    alpha: f64,
    beta: f64,
    r: f64,
    mu: f64,
}

impl MonopolyModel {
    pub fn new(alpha: f64, beta: f64, r: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta), ("r", r)] {
            if !(v > 0.0 && v.is_finite()) {
                return domain(format!("{name} must be positive and finite, got {v}"));
            }
        }
        Ok(Self { alpha, beta, r, mu: 2.0 * beta * r / alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Value as capacity grows without bound.
    pub fn saturation(&self) -> f64 {
        self.alpha * self.alpha / (4.0 * self.beta * self.r)
    }

    /// `(W, 1 + W)` at capacity `x`.
    pub(crate) fn branch(&self, x: f64) -> (f64, f64) {
        let z = self.mu * x.max(0.0);
        let y = -(-z - 1.0).exp();
        lambert::w0_with_offset(y, -(-z).exp_m1())
    }

    pub fn value(&self, x: f64) -> f64 {
        let (_, t) = self.branch(x);
        self.saturation() * t * t
    }

    /// Derivative of the value, `-alpha W`. Equals the shadow cost of capacity.
    pub fn marginal_value(&self, x: f64) -> f64 {
        -self.alpha * self.branch(x).0
    }

    /// Optimal price and the demand it generates.
    pub fn policy(&self, x: f64) -> (f64, f64) {
        let (w, t) = self.branch(x);
        (0.5 * self.alpha * (1.0 - w), 0.5 * self.alpha / self.beta * t)
    }

    /// Depletion speed q(x) and the time Q(x) to sell out from x.
    pub fn q_and_big_q(&self, x: f64) -> (f64, f64) {
        let (_, t) = self.branch(x);
        let q = 0.5 * self.alpha / self.beta * t;
        // -log(-W) rewritten so it never takes the log of an underflowed value.
        let big_q = (self.mu * x.max(0.0) + t) / self.r;
        (q, big_q)
    }

    pub fn q(&self, x: f64) -> f64 {
        self.q_and_big_q(x).0
    }

    pub fn big_q(&self, x: f64) -> f64 {
        self.q_and_big_q(x).1
    }

    /// Capacity that takes time `s` to sell out.
    pub fn big_q_inverse(&self, s: f64) -> f64 {
        let rs = self.r * s;
        (rs + (-rs).exp_m1()) / self.mu
    }
}

/// Monopoly price at cost `s` with demand (alpha - p)/beta.
pub fn static_price(alpha: f64, s: f64) -> f64 {
    0.5 * (alpha + s)
}

/// Monopoly quantity at cost `s`; zero once the cost reaches alpha.
pub fn static_demand(alpha: f64, beta: f64, s: f64) -> f64 {
    ((alpha - s) / (2.0 * beta)).max(0.0)
}
