//! Brute-force checks on the pricing game: best-response iteration and a
//! grid search for profitable unilateral deviations.

use crate::demand::{DemandParams, LevelCoefficients};
use crate::error::{domain, Error, Result};

use super::CostVector;

const GRID: usize = 401;
const MAX_SWEEPS: usize = 10_000;

/// Profit of firm `i` at the given prices, with actual demands.
pub fn profit(coeffs: &LevelCoefficients, costs: &[f64], prices: &[f64], i: usize) -> f64 {
    let d = coeffs
        .actual_demands(prices)
        .map(|a| a.demands[i])
        .unwrap_or(0.0);
    d * (prices[i] - costs[i])
}

fn price_ceiling(coeffs: &LevelCoefficients, prices: &[f64], i: usize) -> f64 {
    let rivals: f64 = prices
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &p)| p.max(0.0))
        .sum();
    coeffs
        .iter()
        .map(|lv| lv.choke(rivals))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Best reply of firm `i` to the others' prices, never below cost.
pub fn best_response(coeffs: &LevelCoefficients, costs: &[f64], prices: &[f64], i: usize) -> f64 {
    let si = costs[i];
    let hi = price_ceiling(coeffs, prices, i);
    if !(hi > si) {
        return si;
    }
    let mut q = prices.to_vec();
    let mut eval = |p: f64| {
        q[i] = p;
        profit(coeffs, costs, &q, i)
    };

    // Uniform grid plus points crowding toward cost, where a firm held near
    // its kink can have a narrow window of positive profit.
    let step = (hi - si) / (GRID - 1) as f64;
    let mut cand: Vec<f64> = (0..GRID).map(|k| si + step * k as f64).collect();
    cand.extend((1..=60).map(|m| si + step * 0.5f64.powi(m)));
    cand.sort_by(f64::total_cmp);
    let (mut best_k, mut best_v) = (0, f64::NEG_INFINITY);
    for (k, &c) in cand.iter().enumerate() {
        let v = eval(c);
        if v > best_v {
            best_v = v;
            best_k = k;
        }
    }
    if best_v <= 0.0 {
        return si;
    }

    // Golden-section search on the bracketing cells; profit is concave.
    let mut a = cand[best_k.saturating_sub(1)];
    let mut b = cand[(best_k + 1).min(cand.len() - 1)];
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let (mut f1, mut f2) = (eval(x1), eval(x2));
    for _ in 0..200 {
        if b - a <= 4.0 * f64::EPSILON * b.abs().max(1.0) {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = eval(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = eval(x1);
        }
    }
    let mut p = if f1 >= f2 { x1 } else { x2 };
    let mut v = f1.max(f2);

    // Profit is quadratic while the active set is fixed; jump to the vertex
    // of the current piece while that does not lower profit.
    for _ in 0..4 {
        q[i] = p;
        let Ok(alloc) = coeffs.actual_demands(&q) else { break };
        if !alloc.active_set.contains(&i) {
            break;
        }
        let lv = coeffs.at(alloc.active_count);
        let rivals: f64 = alloc
            .active_set
            .iter()
            .filter(|&&j| j != i)
            .map(|&j| q[j])
            .sum();
        let vertex = (lv.a + lv.c * rivals + lv.b * si) / (2.0 * lv.b);
        q[i] = vertex;
        let vv = profit(coeffs, costs, &q, i);
        if vertex == p {
            break;
        }
        if vv >= v - 1e-13 * v.abs().max(1.0) && vertex >= si {
            p = vertex;
            v = vv;
        } else {
            break;
        }
    }
    p.max(si)
}

/// Gauss-Seidel best-response iteration from prices at cost, on a ladder.
/// Costs and the result are in caller order.
pub fn best_response_oracle_levels(coeffs: &LevelCoefficients, costs: &[f64], tol: f64) -> Result<Vec<f64>> {
    if costs.len() != coeffs.n_max() {
        return domain("cost vector does not match the ladder");
    }
    if !(tol > 0.0) {
        return domain("tolerance must be positive");
    }
    let mut p = costs.to_vec();
    let mut change = f64::INFINITY;
    for _ in 0..MAX_SWEEPS {
        change = 0.0;
        for i in 0..p.len() {
            let new = best_response(coeffs, costs, &p, i);
            change = change.max((new - p[i]).abs());
            p[i] = new;
        }
        if change < tol {
            return Ok(p);
        }
    }
    Err(Error::NoConvergence { iterations: MAX_SWEEPS, residual: change })
}

pub fn best_response_oracle(params: &DemandParams, costs: &CostVector, tol: f64) -> Result<Vec<f64>> {
    let coeffs = crate::demand::level_coefficients(params)?;
    best_response_oracle_levels(&coeffs, &costs.original(), tol)
}

/// Largest profit gain any single firm gets by moving to a point of a
/// uniform grid on `[cost, upper]`. Non-positive means no profitable deviation.
pub fn max_deviation_gain(
    coeffs: &LevelCoefficients,
    costs: &[f64],
    prices: &[f64],
    points: usize,
    upper: f64,
) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    let mut q = prices.to_vec();
    for i in 0..prices.len() {
        let base = profit(coeffs, costs, prices, i);
        let lo = costs[i];
        if upper <= lo {
            continue;
        }
        let step = (upper - lo) / (points.max(2) - 1) as f64;
        for k in 0..points.max(2) {
            q[i] = lo + step * k as f64;
            worst = worst.max(profit(coeffs, costs, &q, i) - base);
        }
        q[i] = prices[i];
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::GreekParams;

    fn ladder(gamma: f64, n: usize) -> LevelCoefficients {
        LevelCoefficients::from_greek(&GreekParams::new(6.0, 1.0, gamma).unwrap(), n).unwrap()
    }

    #[test]
    fn interior_duopoly() {
        let p = best_response_oracle_levels(&ladder(0.5, 2), &[1.0, 2.0], 1e-13).unwrap();
        assert!((p[0] - 2.8).abs() < 1e-10 && (p[1] - 3.2).abs() < 1e-10);
    }

    #[test]
    fn single_firm_is_monopoly() {
        let l = ladder(0.0, 1);
        let p = best_response(&l, &[2.0], &[2.0], 0);
        assert!((p - 4.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_duopoly_goes_to_the_kink() {
        let p = best_response_oracle_levels(&ladder(0.5, 2), &[5.0, 2.3], 1e-13).unwrap();
        assert_eq!(p[0], 5.0);
        assert!((p[1] - 4.0).abs() < 1e-10);
    }

    #[test]
    fn deviation_check_flags_a_bad_price() {
        let l = ladder(0.5, 2);
        assert!(max_deviation_gain(&l, &[1.0, 2.0], &[2.8, 3.2], 2000, 12.0) <= 1e-10);
        assert!(max_deviation_gain(&l, &[1.0, 2.0], &[2.5, 3.2], 2000, 12.0) > 1e-3);
    }

    #[test]
    fn rejects_bad_tolerance() {
        assert!(best_response_oracle_levels(&ladder(0.5, 2), &[1.0, 2.0], 0.0).is_err());
    }
}
