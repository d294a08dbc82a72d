//! Algebra behind the N-firm dynamic game: removing firm i from an N-firm
//! linear demand system leaves the (N-1)-firm system plus a multiple of
//! firm i's own demand.

use crate::demand::{level_coefficients, DemandParams};
use crate::error::{Error, Result};

/// Largest violation over j != i of
/// `D_j^N(p) = -(C/B) D_i^N(p) + D^{N-1}_j(p without p_i)`.
/// Level demands are used as formulas, with no clipping at zero.
pub fn nplayer_decomposition(params: &DemandParams, i: usize, prices: &[f64]) -> Result<f64> {
    let n = params.n();
    if n < 2 {
        return Err(Error::Domain("decomposition needs at least two firms".into()));
    }
    if prices.len() != n {
        return Err(Error::Domain(format!("{} prices for {n} firms", prices.len())));
    }
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, max: n - 1 });
    }
    let ladder = level_coefficients(params)?;
    let top = ladder.level(n)?;
    let below = ladder.level(n - 1)?;
    let total: f64 = prices.iter().sum();
    let rest = total - prices[i];
    let di = top.demand(prices[i], rest);
    let ratio = params.c() / params.b();
    let mut worst: f64 = 0.0;
    for (j, &pj) in prices.iter().enumerate() {
        if j == i {
            continue;
        }
        let lhs = top.demand(pj, total - pj);
        let rhs = -ratio * di + below.demand(pj, rest - pj);
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

/// Shadow cost of firm i given the gradient of its value in all capacities:
/// `dV_i/dx_i - (C/B) sum_{k != i} dV_i/dx_k`.
pub fn nplayer_shadow_cost(params: &DemandParams, i: usize, grad: &[f64]) -> Result<f64> {
    if grad.len() != params.n() {
        return Err(Error::Domain(format!("gradient has {} entries for {} firms", grad.len(), params.n())));
    }
    if i >= grad.len() {
        return Err(Error::IndexOutOfRange { index: i, max: grad.len() - 1 });
    }
    let others: f64 = grad.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, g)| g).sum();
    Ok(grad[i] - params.c() / params.b() * others)
}
