//! Bertrand competition with linear demand: static Nash equilibria for N
//! firms with heterogeneous costs, and the dynamic duopoly in which each
//! firm sells down a finite lifetime capacity.
//!
//! The crate is organised bottom-up:
//!
//! - [`demand`]: parameterizations, the residual-demand ladder, actual demands.
//! - [`equilibrium`]: the static pricing game and a best-response oracle.
//! - [`monopoly`]: the single-firm capacity problem (closed form and numeric).
//! - [`asymptotics`]: small-substitutability expansion of the duopoly values.
//! - [`hjb`]: finite-difference policy iteration for the coupled duopoly PDEs.
//! - [`simulate`]: deterministic and stochastic capacity paths.
//! - [`output`]: CSV writers shared by the command-line tool and tests.

pub mod asymptotics;
pub mod demand;
pub mod equilibrium;
mod error;
pub mod hjb;
pub mod monopoly;
pub mod output;
pub mod simulate;

pub use error::{Error, Result};

/// Relative comparison used for closed-form identities.
///
/// `|x - y| <= rel * max(|x|, |y|) + abs`.
pub fn approx_eq(x: f64, y: f64, rel: f64, abs: f64) -> bool {
    (x - y).abs() <= rel * x.abs().max(y.abs()) + abs
}

/// One of the two firms of the dynamic game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Firm {
    One,
    Two,
}

impl Firm {
    /// 0 for firm one, 1 for firm two.
    pub fn index(self) -> usize {
        match self {
            Firm::One => 0,
            Firm::Two => 1,
        }
    }

    pub fn other(self) -> Firm {
        match self {
            Firm::One => Firm::Two,
            Firm::Two => Firm::One,
        }
    }

    pub fn both() -> [Firm; 2] {
        [Firm::One, Firm::Two]
    }
}
