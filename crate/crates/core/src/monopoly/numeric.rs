//! Finite-difference solve of the noisy monopoly problem
//! `sigma^2/2 v'' - D v' + p D - r v = 0`, `v(0) = 0`, `v'(x_max) = 0`,
//! where the firm prices at `p = (alpha + q)/2` against the centered slope q.

use super::MonopolyModel;
use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MonopolyCurve {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub v_prime: Vec<f64>,
    pub price: Vec<f64>,
    pub demand: Vec<f64>,
    pub sigma: f64,
    pub iterations: usize,
    /// Sup-norm of the discrete equation residual at the returned solution.
    pub residual: f64,
}

const TOL: f64 = 1e-11;
const MAX_ITERS: usize = 100;

/// Exponentially fitted second-difference weight `a Pe coth(Pe)` with
/// `Pe = q / a`, for plain weight `a` (diffusion over h^2) and half drift
/// over h `q`. It never drops below `|q|`, so a central drift difference on
/// top keeps every neighbour weight non-negative.
#[inline]
pub(crate) fn fitted_weight(a: f64, q: f64) -> f64 {
    let q = q.abs();
    if a <= 0.0 {
        return q;
    }
    let pe = q / a;
    if pe < 1e-4 {
        a * (1.0 + pe * pe / 3.0)
    } else {
        q / pe.tanh()
    }
}

/// Derivative of [`fitted_weight`] in `q`, for `q >= 0`.
fn fitted_weight_slope(a: f64, q: f64) -> f64 {
    if a <= 0.0 {
        return 1.0;
    }
    let pe = q / a;
    if pe < 1e-4 {
        2.0 * pe / 3.0
    } else if pe > 350.0 {
        1.0
    } else {
        1.0 / pe.tanh() - pe / pe.sinh().powi(2)
    }
}

struct Problem {
    alpha: f64,
    beta: f64,
    r: f64,
    s2: f64,
    h: f64,
    n: usize,
}

impl Problem {
    fn at(&self, v: &[f64], k: usize) -> (f64, f64, f64) {
        let left = v[k - 1];
        let right = if k + 1 < self.n { v[k + 1] } else { v[self.n - 2] };
        (left, v[k], right)
    }

    fn price_demand(&self, q: f64) -> (f64, f64) {
        (0.5 * (self.alpha + q), ((self.alpha - q) / (2.0 * self.beta)).max(0.0))
    }

    /// Residual at node k and its derivatives with respect to (v_{k-1}, v_k, v_{k+1}).
    ///
    /// Central differences throughout, with the second-difference weight
    /// exponentially fitted to the local drift so the stencil stays monotone.
    fn node(&self, v: &[f64], k: usize) -> (f64, [f64; 3]) {
        let h = self.h;
        let (l, c, r) = self.at(v, k);
        let edge = k + 1 == self.n;
        let q = (r - l) / (2.0 * h);
        let (p, d) = self.price_demand(q);
        let a = 0.5 * self.s2 / (h * h);
        let lap = l - 2.0 * c + r;
        let f = a * lap + (p - q) * d - self.r * c;
        let mut jac = [a + d / (2.0 * h), -2.0 * a - self.r, a - d / (2.0 * h)];
        if !edge {
            // Extra diffusion (w - a) lap, with w depending on the drift.
            let qh = d / (2.0 * h);
            let w = fitted_weight(a, qh);
            let dw_dq = if d > 0.0 {
                fitted_weight_slope(a, qh) / (2.0 * h) * (-0.5 / self.beta)
            } else {
                0.0
            };
            let f = f + (w - a) * lap;
            jac[0] += (w - a) - lap * dw_dq / (2.0 * h);
            jac[1] -= 2.0 * (w - a);
            jac[2] += (w - a) + lap * dw_dq / (2.0 * h);
            return (f, jac);
        }
        // Ghost node mirrors v_{n-2}.
        jac[0] += jac[2];
        jac[2] = 0.0;
        (f, jac)
    }

    fn residual(&self, v: &[f64]) -> Vec<f64> {
        (1..self.n).map(|k| self.node(v, k).0).collect()
    }
}

fn sup(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, y| m.max(y.abs()))
}

/// Tridiagonal solve; `sub[0]` and `sup[n-1]` are ignored.
fn thomas(sub: &[f64], diag: &[f64], sup_: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup_[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i] * c[i - 1];
        c[i] = sup_[i] / m;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Solves the noisy monopoly problem on `nodes` equally spaced points of
/// `[0, x_max]` by damped Newton iteration, starting from the noiseless
/// closed form.
pub fn solve_monopoly_numeric(
    model: &MonopolyModel,
    sigma: f64,
    x_max: f64,
    nodes: usize,
) -> Result<MonopolyCurve> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return domain(format!("sigma must be positive, got {sigma}"));
    }
    if !(x_max > 0.0 && x_max.is_finite()) {
        return domain(format!("x_max must be positive, got {x_max}"));
    }
    if nodes < 64 {
        return Err(Error::Grid(format!("need at least 64 nodes, got {nodes}")));
    }
    solve_on_nodes(model, sigma, x_max, nodes)
}

/// Same solve without the resolution floor, for boundary data that must
/// match a coarser grid node for node.
pub(crate) fn solve_on_nodes(model: &MonopolyModel, sigma: f64, x_max: f64, nodes: usize) -> Result<MonopolyCurve> {
    if nodes < 3 {
        return Err(Error::Grid(format!("need at least 3 nodes, got {nodes}")));
    }
    let h = x_max / (nodes - 1) as f64;
    let pb = Problem {
        alpha: model.alpha(),
        beta: model.beta(),
        r: model.r(),
        s2: sigma * sigma,
        h,
        n: nodes,
    };
    let x: Vec<f64> = (0..nodes).map(|k| k as f64 * h).collect();
    let mut v: Vec<f64> = x.iter().map(|&xi| model.value(xi)).collect();
    v[0] = 0.0;

    let m = nodes - 1;
    let mut res = sup(&pb.residual(&v));
    let mut iterations = 0;
    while res > TOL {
        if iterations >= MAX_ITERS {
            return Err(Error::NoConvergence { iterations, residual: res });
        }
        iterations += 1;
        let (mut sub, mut diag, mut sup_, mut rhs) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
        for k in 1..nodes {
            let (f, j) = pb.node(&v, k);
            let i = k - 1;
            sub[i] = j[0];
            diag[i] = j[1];
            sup_[i] = j[2];
            rhs[i] = -f;
        }
        let step = thomas(&sub, &diag, &sup_, &rhs);
        let before = sup(&pb.residual(&v));
        let mut lambda = 1.0;
        let mut trial = v.clone();
        let mut after = f64::INFINITY;
        for _ in 0..40 {
            for k in 1..nodes {
                trial[k] = v[k] + lambda * step[k - 1];
            }
            after = sup(&pb.residual(&trial));
            if after < before || after <= TOL {
                break;
            }
            lambda *= 0.5;
        }
        if !(after < before || after <= TOL) {
            return Err(Error::NoConvergence { iterations, residual: before });
        }
        v.copy_from_slice(&trial);
        res = after;
    }

    let mut v_prime = vec![0.0; nodes];
    v_prime[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
    for k in 1..nodes - 1 {
        v_prime[k] = (v[k + 1] - v[k - 1]) / (2.0 * h);
    }
    let mut price = vec![0.0; nodes];
    let mut demand = vec![0.0; nodes];
    price[0] = pb.alpha;
    for k in 1..nodes {
        let (p, d) = pb.price_demand(v_prime[k]);
        price[k] = p;
        demand[k] = d;
    }
    Ok(MonopolyCurve { x, v, v_prime, price, demand, sigma, iterations, residual: res })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m() -> MonopolyModel {
        MonopolyModel::new(6.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn input_checks() {
        assert!(solve_monopoly_numeric(&m(), 0.0, 20.0, 129).is_err());
        assert!(solve_monopoly_numeric(&m(), 0.6, 20.0, 32).is_err());
        assert!(solve_monopoly_numeric(&m(), 0.6, -1.0, 129).is_err());
    }

    #[test]
    fn converges_with_small_residual() {
        let c = solve_monopoly_numeric(&m(), 0.6, 30.0, 257).unwrap();
        assert!(c.residual <= 1e-8);
        assert_eq!(c.v[0], 0.0);
        assert!(c.v.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        assert!(c.demand.iter().all(|&d| d >= 0.0));
        assert!(c.v.iter().all(|&v| v <= 9.0 + 1e-9));
    }

    #[test]
    fn vanishing_noise_approaches_closed_form() {
        let model = m();
        let c = solve_monopoly_numeric(&model, 1e-3, 30.0, 3001).unwrap();
        let k = c.x.iter().position(|&x| (x - 5.0).abs() < 1e-9).unwrap();
        assert!((c.v[k] - model.value(5.0)).abs() <= 2e-2);
    }

    #[test]
    fn noise_lowers_value_slightly() {
        let model = m();
        let c = solve_monopoly_numeric(&model, 0.6, 30.0, 301).unwrap();
        for (x, v) in c.x.iter().zip(&c.v) {
            assert!(*v <= model.value(*x) + 1e-9);
        }
    }

    #[test]
    fn thomas_solves_a_small_system() {
        let x = thomas(&[0.0, 1.0, 1.0], &[4.0, 4.0, 4.0], &[1.0, 1.0, 0.0], &[5.0, 6.0, 5.0]);
        for xi in x {
            assert!((xi - 1.0).abs() < 1e-14);
        }
    }
}
