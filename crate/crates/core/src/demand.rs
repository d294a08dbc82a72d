//! Linear demand system for N substitutable goods.
//!
//! At level n (n firms with positive demand) firm i faces
//! `D_i = a_n - b_n p_i + c_n * sum_{j != i} p_j`. The top level n = N carries
//! the primitive coefficients (A, B, C); lower levels are the residual
//! systems left when the most expensive firm sits exactly at its choke price.

use crate::error::{domain, Error, Result};
use crate::approx_eq;

/// Primitive parameters (A, B, C, N).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemandParams {
    a: f64,
    b: f64,
    c: f64,
    n: usize,
}

impl DemandParams {
    pub fn new(a: f64, b: f64, c: f64, n: usize) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return domain(format!("A must be positive and finite, got {a}"));
        }
        if !(b > 0.0 && b.is_finite()) {
            return domain(format!("B must be positive and finite, got {b}"));
        }
        if !(c > 0.0 && c.is_finite()) {
            return domain(format!("C must be positive and finite, got {c}"));
        }
        if n == 0 {
            return domain("N must be at least 1");
        }
        if b <= (n as f64 - 1.0) * c {
            return domain(format!("need B > (N-1)C, got B={b}, C={c}, N={n}"));
        }
        Ok(Self { a, b, c, n })
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn greek(&self) -> GreekParams {
        greek_from_abc(self)
    }
}

/// The (alpha, beta, gamma) parameterization. `gamma = 0` is the
/// independent-goods limit and is allowed here but not in [`DemandParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreekParams {
    alpha: f64,
    beta: f64,
    gamma: f64,
}

impl GreekParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return domain(format!("alpha must be positive and finite, got {alpha}"));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return domain(format!("gamma must be non-negative, got {gamma}"));
        }
        if !(beta > gamma && beta.is_finite()) {
            return domain(format!("need beta > gamma, got beta={beta}, gamma={gamma}"));
        }
        Ok(Self { alpha, beta, gamma })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Same alpha and beta with a different gamma.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.alpha, self.beta, gamma)
    }

    /// Level-n coefficients from the closed form. Valid for gamma = 0.
    pub fn level(&self, n: usize) -> Level {
        let (al, be, ga) = (self.alpha, self.beta, self.gamma);
        let m = n as f64;
        let top = be + (m - 1.0) * ga;
        Level {
            a: al / top,
            b: (be + (m - 2.0) * ga) / (top * (be - ga)),
            c: ga / (top * (be - ga)),
        }
    }
}

pub fn greek_from_abc(p: &DemandParams) -> GreekParams {
    let (a, b, c) = (p.a, p.b, p.c);
    let n = p.n as f64;
    let gamma = c / ((b - (n - 1.0) * c) * (b + c));
    let alpha = gamma * a * (b / c + 1.0);
    let beta = gamma * (b / c - (n - 2.0));
    GreekParams { alpha, beta, gamma }
}

/// Inverse of [`greek_from_abc`] for a given firm count. Needs gamma > 0.
pub fn abc_from_greek(g: &GreekParams, n: usize) -> Result<DemandParams> {
    if g.gamma <= 0.0 {
        return domain("gamma = 0 has no (A, B, C) representation");
    }
    if n == 0 {
        return domain("N must be at least 1");
    }
    let top = g.level(n);
    DemandParams::new(top.a, top.b, top.c, n)
}

/// Coefficients of one level of the ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Level {
    /// Level demand for a firm at `own` when the other active firms' prices sum to `rivals`.
    #[inline]
    pub fn demand(&self, own: f64, rivals: f64) -> f64 {
        self.a - self.b * own + self.c * rivals
    }

    #[inline]
    pub fn choke(&self, rivals: f64) -> f64 {
        (self.a + self.c * rivals) / self.b
    }

    /// One step down the ladder.
    pub fn reduce(&self) -> Level {
        let ratio = self.c / self.b;
        Level {
            a: self.a * (1.0 + ratio),
            b: self.b * (1.0 - ratio * ratio),
            c: self.c * (1.0 + ratio),
        }
    }
}

/// The ladder (a_n, b_n, c_n) for n = 1..=N.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelCoefficients {
    levels: Vec<Level>,
}

impl LevelCoefficients {
    /// Closed-form ladder for `n_max` firms. Works for gamma = 0.
    pub fn from_greek(g: &GreekParams, n_max: usize) -> Result<Self> {
        if n_max == 0 {
            return domain("N must be at least 1");
        }
        Ok(Self {
            levels: (1..=n_max).map(|n| g.level(n)).collect(),
        })
    }

    /// Ladder built by stepping down from (A, B, C).
    pub fn by_recursion(p: &DemandParams) -> Self {
        let mut levels = vec![
            Level {
                a: p.a,
                b: p.b,
                c: p.c
            };
            p.n
        ];
        for k in (0..p.n - 1).rev() {
            levels[k] = levels[k + 1].reduce();
        }
        Self { levels }
    }

    pub fn n_max(&self) -> usize {
        self.levels.len()
    }

    /// Level `n`, 1-based.
    pub fn level(&self, n: usize) -> Result<Level> {
        if n == 0 || n > self.levels.len() {
            return Err(Error::IndexOutOfRange {
                index: n,
                max: self.levels.len(),
            });
        }
        Ok(self.levels[n - 1])
    }

    #[inline]
    pub(crate) fn at(&self, n: usize) -> Level {
        self.levels[n - 1]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Level> {
        self.levels.iter()
    }

    /// Actual demands for an arbitrary price vector of length N.
    ///
    /// Firms are ranked by price (ties by index). Scanning n from N down,
    /// the first n at which the n-th cheapest firm has non-negative level-n
    /// demand fixes the active set; everyone else gets zero.
    pub fn actual_demands(&self, prices: &[f64]) -> Result<DemandAllocation> {
        let n_max = self.levels.len();
        if prices.len() != n_max {
            return domain(format!("expected {n_max} prices, got {}", prices.len()));
        }
        if prices.iter().any(|p| !p.is_finite()) {
            return domain("prices must be finite");
        }
        let mut order: Vec<usize> = (0..n_max).collect();
        order.sort_by(|&i, &j| prices[i].total_cmp(&prices[j]).then(i.cmp(&j)));

        let mut prefix = Vec::with_capacity(n_max + 1);
        prefix.push(0.0);
        for &i in &order {
            let last = *prefix.last().unwrap();
            prefix.push(last + prices[i]);
        }

        let mut demands = vec![0.0; n_max];
        for n in (1..=n_max).rev() {
            let lv = self.at(n);
            let total = prefix[n];
            let marginal = lv.a - (lv.b + lv.c) * prices[order[n - 1]] + lv.c * total;
            if marginal >= 0.0 {
                for &i in &order[..n] {
                    // Written with the full sum so tied prices give identical demands.
                    demands[i] = (lv.a - (lv.b + lv.c) * prices[i] + lv.c * total).max(0.0);
                }
                let mut active_set = order[..n].to_vec();
                active_set.sort_unstable();
                return Ok(DemandAllocation {
                    demands,
                    active_count: n,
                    active_set,
                });
            }
        }
        Ok(DemandAllocation {
            demands,
            active_count: 0,
            active_set: Vec::new(),
        })
    }
}

/// Ladder by recursion, cross-checked against the closed form.
pub fn level_coefficients(p: &DemandParams) -> Result<LevelCoefficients> {
    let rec = LevelCoefficients::by_recursion(p);
    let g = greek_from_abc(p);
    for (k, lv) in rec.levels.iter().enumerate() {
        let cf = g.level(k + 1);
        let pairs = [(lv.a, cf.a), (lv.b, cf.b), (lv.c, cf.c)];
        if !pairs.iter().all(|&(x, y)| approx_eq(x, y, 1e-12, 1e-14)) {
            return Err(Error::Consistency(format!(
                "level {} recursion {:?} vs closed form {:?}",
                k + 1,
                lv,
                cf
            )));
        }
    }
    Ok(rec)
}

/// Choke price of the n-th firm at level n given the other n-1 prices.
pub fn choke_price(coeffs: &LevelCoefficients, n: usize, prices: &[f64]) -> Result<f64> {
    let lv = coeffs.level(n)?;
    if prices.len() + 1 != n {
        return domain(format!("level {n} needs {} rival prices, got {}", n - 1, prices.len()));
    }
    Ok(lv.choke(prices.iter().sum()))
}

/// Demands after removing firms priced out of the market.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandAllocation {
    pub demands: Vec<f64>,
    pub active_count: usize,
    /// Original indices of the firms with the level rule applied, ascending.
    pub active_set: Vec<usize>,
}

pub fn actual_demands(p: &DemandParams, prices: &[f64]) -> Result<DemandAllocation> {
    if prices.iter().any(|&x| x < 0.0) {
        return domain("prices must be non-negative");
    }
    LevelCoefficients::by_recursion(p).actual_demands(prices)
}
