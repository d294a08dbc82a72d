//! Static Bertrand-Nash pricing game with linear demand.
//!
//! Each firm picks a price at or above its unit cost; demands are the actual
//! demands of [`crate::demand`]. The solver works on costs sorted ascending
//! and maps the answer back to the caller's order.
//!
//! Three kinds of equilibrium occur. In an interior equilibrium every firm
//! prices above cost. In an ignorable one the expensive firms sit at cost
//! with zero demand and would have none even at cost. In a boundary
//! equilibrium the cheapest unserved firm would sell at cost, so the active
//! firms hold their price sum exactly where its demand vanishes (limit
//! pricing). Profit is kinked there and, with two or more active firms,
//! the set of equilibria at the kink is an interval; [`solve_nash`] returns
//! the member in which every active margin is the same fraction of its
//! maximal margin.

pub mod oracle;

pub use oracle::{best_response_oracle, max_deviation_gain, profit};

use crate::demand::{DemandParams, GreekParams, LevelCoefficients};
use crate::error::{domain, Error, Result};

/// Costs stored ascending, plus the permutation back to caller order.
#[derive(Debug, Clone, PartialEq)]
pub struct CostVector {
    sorted: Vec<f64>,
    /// `order[k]` is the caller index of the k-th cheapest firm.
    order: Vec<usize>,
}

impl CostVector {
    /// Any finite costs are accepted. Shadow costs from the dynamic game can
    /// be negative.
    pub fn new(costs: &[f64]) -> Result<Self> {
        if costs.is_empty() {
            return domain("cost vector is empty");
        }
        if costs.iter().any(|c| !c.is_finite()) {
            return domain("costs must be finite");
        }
        let mut order: Vec<usize> = (0..costs.len()).collect();
        order.sort_by(|&i, &j| costs[i].total_cmp(&costs[j]).then(i.cmp(&j)));
        let sorted = order.iter().map(|&i| costs[i]).collect();
        Ok(Self { sorted, order })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn original(&self) -> Vec<f64> {
        self.unsort(&self.sorted)
    }

    /// Put values given in sorted order back into caller order.
    pub fn unsort(&self, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; values.len()];
        for (k, &i) in self.order.iter().enumerate() {
            out[i] = values[k];
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquilibriumType {
    /// Nobody can sell above cost.
    AllAtCost,
    /// Every firm prices above cost.
    Interior,
    /// The `active` cheapest firms price above cost; the rest are at cost
    /// and have no demand.
    Ignorable { active: usize },
    /// The `above_cost` cheapest firms limit-price against the next firm,
    /// which sits at cost with exactly zero demand. `in_demand = above_cost + 1`.
    Boundary { above_cost: usize, in_demand: usize },
}

impl EquilibriumType {
    pub fn tag(&self) -> &'static str {
        match self {
            Self::AllAtCost => "AllAtCost",
            Self::Interior => "Interior",
            Self::Ignorable { .. } => "Ignorable",
            Self::Boundary { .. } => "Boundary",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticEquilibrium {
    pub prices: Vec<f64>,
    pub demands: Vec<f64>,
    pub profits: Vec<f64>,
    pub eq_type: EquilibriumType,
}

/// Unconstrained equilibrium of the first `n` firms on level `n`, sorted order.
pub fn interior_candidate(coeffs: &LevelCoefficients, n: usize, costs: &CostVector) -> Result<Vec<f64>> {
    check_level(coeffs, n, costs)?;
    Ok(interior(coeffs, n, costs.sorted()))
}

fn interior(coeffs: &LevelCoefficients, n: usize, s: &[f64]) -> Vec<f64> {
    let lv = coeffs.at(n);
    let sum_s: f64 = s[..n].iter().sum();
    let total = (n as f64 * lv.a + lv.b * sum_s) / (2.0 * lv.b - (n as f64 - 1.0) * lv.c);
    s[..n]
        .iter()
        .map(|&si| (lv.a + lv.c * total + lv.b * si) / (2.0 * lv.b + lv.c))
        .collect()
}

/// Stationary point of the first `k` firms on level `n_demand` with firms
/// `k+1..=n_demand` held at cost.
///
/// This is the classical candidate for the boundary case. It solves the
/// first-order conditions on the larger demand system, which the active
/// firms only face after the entrant's demand turns positive, so it is not
/// in general the equilibrium price; see the module docs.
pub fn boundary_candidate(
    coeffs: &LevelCoefficients,
    n_demand: usize,
    k: usize,
    costs: &CostVector,
) -> Result<Vec<f64>> {
    check_level(coeffs, n_demand, costs)?;
    if k >= n_demand {
        return Err(Error::IndexOutOfRange { index: k, max: n_demand - 1 });
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let s = costs.sorted();
    let lv = coeffs.at(n_demand);
    let a_eff = lv.a + lv.c * s[k..n_demand].iter().sum::<f64>();
    let sum_s: f64 = s[..k].iter().sum();
    let total = (k as f64 * a_eff + lv.b * sum_s) / (2.0 * lv.b - (k as f64 - 1.0) * lv.c);
    Ok(s[..k]
        .iter()
        .map(|&si| (a_eff + lv.c * total + lv.b * si) / (2.0 * lv.b + lv.c))
        .collect())
}

fn check_level(coeffs: &LevelCoefficients, n: usize, costs: &CostVector) -> Result<()> {
    if costs.len() != coeffs.n_max() {
        return domain(format!(
            "{} costs for a {}-firm ladder",
            costs.len(),
            coeffs.n_max()
        ));
    }
    if n == 0 || n > coeffs.n_max() {
        return Err(Error::IndexOutOfRange { index: n, max: coeffs.n_max() });
    }
    Ok(())
}

/// Limit prices of the first `k` firms against firm `k+1` at cost.
/// `None` when that kink does not support an equilibrium.
fn kink_prices(coeffs: &LevelCoefficients, k: usize, s: &[f64]) -> Option<Vec<f64>> {
    let up = coeffs.at(k + 1);
    if up.c <= 0.0 {
        return None;
    }
    let lv = coeffs.at(k);
    // Price sum of the first k firms that leaves firm k+1 with zero demand at cost.
    let total = (up.b * s[k] - up.a) / up.c;
    let margin_total = total - s[..k].iter().sum::<f64>();
    if !(margin_total > 0.0) {
        return None;
    }
    let reach: Vec<f64> = s[..k]
        .iter()
        .map(|&si| lv.a + lv.c * total - (lv.b + lv.c) * si)
        .collect();
    if reach.iter().any(|&r| !(r > 0.0)) {
        return None;
    }
    let kappa = margin_total / reach.iter().sum::<f64>();
    let lo = 1.0 / (up.b + lv.b + lv.c);
    let hi = 1.0 / (2.0 * lv.b + lv.c);
    let slack = 1e-12;
    if kappa < lo * (1.0 - slack) || kappa > hi * (1.0 + slack) {
        return None;
    }
    Some(s[..k].iter().zip(&reach).map(|(&si, &r)| si + kappa * r).collect())
}

/// Equilibrium prices in sorted order and the equilibrium type.
fn solve_sorted(coeffs: &LevelCoefficients, s: &[f64]) -> Result<(Vec<f64>, EquilibriumType)> {
    let n_max = s.len();
    let first = coeffs.at(1);
    if s[0] >= first.a / first.b {
        return Ok((s.to_vec(), EquilibriumType::AllAtCost));
    }
    let mut n = 1;
    let mut p = interior(coeffs, 1, s);
    loop {
        if n == n_max {
            return Ok((p, EquilibriumType::Interior));
        }
        let next = coeffs.at(n + 1);
        let entry = next.demand(s[n], p.iter().sum());
        if entry <= 0.0 {
            p.extend_from_slice(&s[n..]);
            return Ok((p, EquilibriumType::Ignorable { active: n }));
        }
        let cand = interior(coeffs, n + 1, s);
        if cand[n] > s[n] {
            n += 1;
            p = cand;
            continue;
        }
        for k in (1..=n).rev() {
            if let Some(mut q) = kink_prices(coeffs, k, s) {
                q.extend_from_slice(&s[k..]);
                return Ok((q, EquilibriumType::Boundary { above_cost: k, in_demand: k + 1 }));
            }
        }
        return Err(Error::Consistency(format!(
            "no supporting kink below level {} for costs {:?}",
            n + 1,
            s
        )));
    }
}

/// Equilibrium on an explicit ladder. Costs must match the ladder size.
pub fn solve_nash_levels(coeffs: &LevelCoefficients, costs: &CostVector) -> Result<StaticEquilibrium> {
    check_level(coeffs, 1, costs)?;
    let (sorted_prices, eq_type) = solve_sorted(coeffs, costs.sorted())?;
    let prices = costs.unsort(&sorted_prices);
    let original = costs.original();
    let demands = coeffs.actual_demands(&prices)?.demands;
    let profits = demands
        .iter()
        .zip(prices.iter().zip(&original))
        .map(|(&d, (&p, &c))| (d * (p - c)).max(0.0))
        .collect();
    Ok(StaticEquilibrium { prices, demands, profits, eq_type })
}

pub fn solve_nash(params: &DemandParams, costs: &CostVector) -> Result<StaticEquilibrium> {
    let coeffs = crate::demand::level_coefficients(params)?;
    solve_nash_levels(&coeffs, costs)
}

/// Equilibrium for as many firms as there are costs. With gamma = 0 this is
/// a set of independent monopolies.
pub fn solve_nash_greek(g: &GreekParams, costs: &CostVector) -> Result<StaticEquilibrium> {
    let coeffs = LevelCoefficients::from_greek(g, costs.len())?;
    solve_nash_levels(&coeffs, costs)
}

/// Two-firm outcome in caller order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DuopolyOutcome {
    pub prices: [f64; 2],
    pub demands: [f64; 2],
    pub eq_type: EquilibriumType,
}

/// Duopoly solve on a prebuilt two-level ladder without intermediate vectors.
pub fn solve_duopoly_levels(coeffs: &LevelCoefficients, s1: f64, s2: f64) -> Result<DuopolyOutcome> {
    if coeffs.n_max() != 2 {
        return domain("duopoly solve needs a two-level ladder");
    }
    if !(s1.is_finite() && s2.is_finite()) {
        return domain("costs must be finite");
    }
    let swap = s2 < s1;
    let s = if swap { [s2, s1] } else { [s1, s2] };
    let (p, eq_type) = solve_sorted(coeffs, &s)?;
    let prices = if swap { [p[1], p[0]] } else { [p[0], p[1]] };
    let d = coeffs.actual_demands(&prices)?.demands;
    Ok(DuopolyOutcome { prices, demands: [d[0], d[1]], eq_type })
}

/// Regions of the two-firm cost plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DuopolyRegion {
    AllAtCost,
    Duopoly,
    /// Firm 1 alone sells.
    M1,
    /// Firm 2 alone sells.
    M2,
    /// Firm 1 is pinned at cost; firm 2 limit-prices.
    B1,
    /// Firm 2 is pinned at cost; firm 1 limit-prices.
    B2,
}

impl DuopolyRegion {
    pub fn tag(&self) -> &'static str {
        match self {
            Self::AllAtCost => "AllAtCost",
            Self::Duopoly => "Duopoly",
            Self::M1 => "M1",
            Self::M2 => "M2",
            Self::B1 => "B1",
            Self::B2 => "B2",
        }
    }
}

/// Cost of the cheaper firm below which the dearer firm (cost `s`) cannot
/// sustain an interior duopoly price.
pub fn phi1(g: &GreekParams, s: f64) -> f64 {
    let (a, b, c) = (g.alpha(), g.beta(), g.gamma());
    (2.0 * b * b - c * c) / (b * c) * s - a / (b * c) * (b - c) * (2.0 * b + c)
}

/// Cost of the cheaper firm below which the dearer firm (cost `s`) has no
/// demand even at cost against the monopoly price.
pub fn phi2(g: &GreekParams, s: f64) -> f64 {
    let (a, b, c) = (g.alpha(), g.beta(), g.gamma());
    2.0 * b / c * s - a / c * (2.0 * b - c)
}

pub fn classify_duopoly(g: &GreekParams, s1: f64, s2: f64) -> Result<DuopolyRegion> {
    if g.gamma() <= 0.0 {
        return domain("regions are undefined for independent goods (gamma = 0)");
    }
    if s1.min(s2) >= g.alpha() {
        return Ok(DuopolyRegion::AllAtCost);
    }
    let firm1_dear = s1 > s2;
    let (lo, hi) = if firm1_dear { (s2, s1) } else { (s1, s2) };
    let region = if phi2(g, hi) >= lo {
        if firm1_dear {
            DuopolyRegion::M2
        } else {
            DuopolyRegion::M1
        }
    } else if phi1(g, hi) >= lo {
        if firm1_dear {
            DuopolyRegion::B1
        } else {
            DuopolyRegion::B2
        }
    } else {
        DuopolyRegion::Duopoly
    };
    Ok(region)
}

/// Region implied by a solved two-firm equilibrium.
pub fn region_of(eq: &StaticEquilibrium) -> Option<DuopolyRegion> {
    if eq.prices.len() != 2 {
        return None;
    }
    // The firm at cost earns exactly zero.
    let leader = if eq.profits[0] > 0.0 { 0 } else { 1 };
    Some(match eq.eq_type {
        EquilibriumType::AllAtCost => DuopolyRegion::AllAtCost,
        EquilibriumType::Interior => DuopolyRegion::Duopoly,
        EquilibriumType::Ignorable { .. } => {
            if leader == 0 {
                DuopolyRegion::M1
            } else {
                DuopolyRegion::M2
            }
        }
        EquilibriumType::Boundary { .. } => {
            if leader == 0 {
                DuopolyRegion::B2
            } else {
                DuopolyRegion::B1
            }
        }
    })
}

/// Two-firm closed forms evaluated at (s1, s2). Index 0 is firm 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DuopolyClosedForms {
    /// Monopoly price at each firm's own cost.
    pub monopoly_price: [f64; 2],
    /// Monopoly quantity at each firm's own cost.
    pub monopoly_demand: [f64; 2],
    pub interior_price: [f64; 2],
    pub interior_demand: [f64; 2],
    /// Classical boundary candidate of firm i with the rival pinned at its cost.
    pub boundary_price: [f64; 2],
}

pub fn duopoly_closed_forms(g: &GreekParams, s1: f64, s2: f64) -> DuopolyClosedForms {
    let (a, b, c) = (g.alpha(), g.beta(), g.gamma());
    let s = [s1, s2];
    let pm = |x: f64| 0.5 * (a + x);
    let dm = |x: f64| (a - x) / (2.0 * b);
    let base = a * (b - c) / (2.0 * b - c);
    let pi = |i: usize, j: usize| base + b * (2.0 * b * s[i] + c * s[j]) / (4.0 * b * b - c * c);
    let p_int = [pi(0, 1), pi(1, 0)];
    let det = b * b - c * c;
    let di = |i: usize, j: usize| a / (b + c) - b * p_int[i] / det + c * p_int[j] / det;
    let pb = |i: usize, j: usize| (a * (b - c) + c * s[j] + b * s[i]) / (2.0 * b);
    DuopolyClosedForms {
        monopoly_price: [pm(s1), pm(s2)],
        monopoly_demand: [dm(s1), dm(s2)],
        interior_price: p_int,
        interior_demand: [di(0, 1), di(1, 0)],
        boundary_price: [pb(0, 1), pb(1, 0)],
    }
}

/// Equilibrium profits of the two-firm game at costs (s1, s2).
pub fn static_profit(g: &GreekParams, s1: f64, s2: f64) -> Result<(f64, f64)> {
    let eq = solve_nash_greek(g, &CostVector::new(&[s1, s2])?)?;
    Ok((eq.profits[0], eq.profits[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx_eq;
    use crate::demand::abc_from_greek;
    use proptest::prelude::*;

    fn g() -> GreekParams {
        GreekParams::new(6.0, 1.0, 0.5).unwrap()
    }

    fn ladder2() -> LevelCoefficients {
        LevelCoefficients::from_greek(&g(), 2).unwrap()
    }

    fn costs(s: &[f64]) -> CostVector {
        CostVector::new(s).unwrap()
    }

    #[test]
    fn cost_vector_round_trip() {
        let c = costs(&[3.0, 1.0, 2.0, 1.0]);
        assert_eq!(c.sorted(), &[1.0, 1.0, 2.0, 3.0]);
        assert_eq!(c.order(), &[1, 3, 2, 0]);
        assert_eq!(c.original(), vec![3.0, 1.0, 2.0, 1.0]);
        assert!(CostVector::new(&[]).is_err());
        assert!(CostVector::new(&[f64::NAN]).is_err());
    }

    #[test]
    fn interior_hand_values() {
        let l = ladder2();
        let p = interior_candidate(&l, 2, &costs(&[0.0, 0.0])).unwrap();
        assert!(approx_eq(p[0], 2.0, 1e-12, 0.0) && approx_eq(p[1], 2.0, 1e-12, 0.0));
        let p = interior_candidate(&l, 2, &costs(&[1.0, 2.0])).unwrap();
        assert!(approx_eq(p[0], 2.8, 1e-12, 0.0) && approx_eq(p[1], 3.2, 1e-12, 0.0));
        let p = interior_candidate(&l, 1, &costs(&[1.0, 2.0])).unwrap();
        assert!(approx_eq(p[0], 3.5, 1e-12, 0.0));
        assert!(interior_candidate(&l, 3, &costs(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn boundary_candidate_hand_values() {
        let l = ladder2();
        let p = boundary_candidate(&l, 2, 1, &costs(&[0.0, 4.0])).unwrap();
        assert!(approx_eq(p[0], 2.5, 1e-12, 0.0));
        assert!(boundary_candidate(&l, 2, 0, &costs(&[0.0, 4.0])).unwrap().is_empty());
        assert!(boundary_candidate(&l, 2, 2, &costs(&[0.0, 4.0])).is_err());

        let g0 = GreekParams::new(6.0, 1.0, 1e-9).unwrap();
        let l0 = LevelCoefficients::from_greek(&g0, 2).unwrap();
        let p = boundary_candidate(&l0, 2, 1, &costs(&[1.0, 4.0])).unwrap();
        assert!((p[0] - 3.5).abs() < 1e-6);
    }

    #[test]
    fn boundary_candidate_multiplier_is_active_count() {
        // Three firms, two active, one pinned: the candidate must satisfy the
        // two active first-order conditions on the three-firm level.
        let p = abc_from_greek(&GreekParams::new(5.0, 1.0, 0.3).unwrap(), 3).unwrap();
        let l = crate::demand::level_coefficients(&p).unwrap();
        let c = costs(&[0.5, 0.8, 2.0]);
        let q = boundary_candidate(&l, 3, 2, &c).unwrap();
        let lv = l.level(3).unwrap();
        let s = c.sorted();
        for i in 0..2 {
            let rivals = q[1 - i] + s[2];
            let foc = lv.demand(q[i], rivals) - lv.b * (q[i] - s[i]);
            assert!(foc.abs() < 1e-12, "firm {i}: {foc}");
        }
    }

    #[test]
    fn solve_examples() {
        let eq = solve_nash_greek(&g(), &costs(&[0.0, 0.0])).unwrap();
        assert_eq!(eq.eq_type, EquilibriumType::Interior);
        for i in 0..2 {
            assert!(approx_eq(eq.prices[i], 2.0, 1e-12, 0.0));
            assert!(approx_eq(eq.demands[i], 8.0 / 3.0, 1e-12, 0.0));
            assert!(approx_eq(eq.profits[i], 16.0 / 3.0, 1e-12, 0.0));
        }

        let eq = solve_nash_greek(&g(), &costs(&[7.0, 8.0])).unwrap();
        assert_eq!(eq.eq_type, EquilibriumType::AllAtCost);
        assert_eq!(eq.prices, vec![7.0, 8.0]);
        assert_eq!(eq.demands, vec![0.0, 0.0]);
    }

    #[test]
    fn boundary_region_prices_at_the_kink() {
        // s = (5, 2.3): firm 1 pinned at cost, firm 2 limit-prices so that
        // firm 1's demand at cost is exactly zero.
        let eq = solve_nash_greek(&g(), &costs(&[5.0, 2.3])).unwrap();
        assert_eq!(eq.eq_type, EquilibriumType::Boundary { above_cost: 1, in_demand: 2 });
        assert_eq!(eq.prices[0], 5.0);
        assert!(approx_eq(eq.prices[1], 4.0, 1e-12, 0.0));
        assert!(eq.demands[0].abs() < 1e-12);
        // The classical candidate sits below the kink.
        let cf = duopoly_closed_forms(&g(), 5.0, 2.3);
        assert!(approx_eq(cf.boundary_price[1], 3.9, 1e-12, 0.0));
        assert_eq!(region_of(&eq), Some(DuopolyRegion::B1));
    }

    #[test]
    fn limit_price_is_continuous_into_monopoly() {
        let g = g();
        let s1 = 5.5;
        let edge = phi2(&g, s1);
        let below = solve_nash_greek(&g, &costs(&[s1, edge - 1e-9])).unwrap();
        let above = solve_nash_greek(&g, &costs(&[s1, edge + 1e-9])).unwrap();
        assert!((below.prices[1] - above.prices[1]).abs() < 1e-8);
    }

    #[test]
    fn zero_gamma_gives_independent_monopolies() {
        let g0 = GreekParams::new(6.0, 1.0, 0.0).unwrap();
        let eq = solve_nash_greek(&g0, &costs(&[1.0, 7.0, 2.0])).unwrap();
        assert_eq!(eq.prices, vec![3.5, 7.0, 4.0]);
        assert_eq!(eq.eq_type, EquilibriumType::Ignorable { active: 2 });
        assert_eq!(eq.demands, vec![2.5, 0.0, 2.0]);
    }

    #[test]
    fn classify_examples() {
        let g = g();
        for gg in [g, GreekParams::new(2.0, 3.0, 1.0).unwrap()] {
            assert!(approx_eq(phi1(&gg, gg.alpha()), gg.alpha(), 1e-12, 0.0));
            assert!(approx_eq(phi2(&gg, gg.alpha()), gg.alpha(), 1e-12, 0.0));
        }
        assert!(approx_eq(phi2(&g, 5.0), 2.0, 1e-12, 0.0));
        assert!(approx_eq(phi1(&g, 5.0), 2.5, 1e-12, 0.0));
        assert_eq!(classify_duopoly(&g, 5.0, 1.0).unwrap(), DuopolyRegion::M2);
        assert_eq!(classify_duopoly(&g, 1.0, 5.0).unwrap(), DuopolyRegion::M1);
        assert_eq!(classify_duopoly(&g, 5.0, 2.3).unwrap(), DuopolyRegion::B1);
        assert_eq!(classify_duopoly(&g, 2.3, 5.0).unwrap(), DuopolyRegion::B2);
        assert_eq!(classify_duopoly(&g, 1.0, 1.0).unwrap(), DuopolyRegion::Duopoly);
        assert_eq!(classify_duopoly(&g, 6.0, 6.5).unwrap(), DuopolyRegion::AllAtCost);
        assert!(classify_duopoly(&GreekParams::new(6.0, 1.0, 0.0).unwrap(), 1.0, 1.0).is_err());
    }

    #[test]
    fn closed_form_examples() {
        let g = g();
        let cf = duopoly_closed_forms(&g, 0.0, 0.0);
        assert_eq!(cf.monopoly_price[0], 3.0);
        assert_eq!(cf.monopoly_demand[0], 3.0);
        for s in [0.0, 1.0, 3.0, 5.9] {
            let eq = solve_nash_greek(&g, &costs(&[s, s])).unwrap();
            let expect = s.max((6.0 * 0.5 + s) / 1.5);
            assert!(approx_eq(eq.prices[0], expect, 1e-12, 1e-14));
        }
        for s1 in [0.0, 2.0, 4.5, 5.9] {
            let s2 = phi2(&g, s1);
            let cf = duopoly_closed_forms(&g, s1, s2);
            let jump = cf.monopoly_price[1] - cf.boundary_price[1];
            assert!((jump - 0.5 * (6.0 - s1) / 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn static_profit_examples() {
        let g = g();
        let (g1, g2) = static_profit(&g, 0.0, 0.0).unwrap();
        assert!(approx_eq(g1, 16.0 / 3.0, 1e-12, 0.0) && approx_eq(g2, 16.0 / 3.0, 1e-12, 0.0));
        let (g1, _) = static_profit(&g, 6.0, 0.0).unwrap();
        assert_eq!(g1, 0.0);
        let (_, g2) = static_profit(&g, 10.0, 0.0).unwrap();
        assert!(approx_eq(g2, 9.0, 1e-12, 0.0));
    }

    #[test]
    fn duopoly_fast_path_matches_general() {
        let g = g();
        let l = ladder2();
        for &(s1, s2) in &[(0.0, 0.0), (5.0, 2.3), (2.3, 5.0), (1.0, 5.0), (7.0, 8.0), (-1.0, 0.5)] {
            let a = solve_duopoly_levels(&l, s1, s2).unwrap();
            let b = solve_nash_greek(&g, &costs(&[s1, s2])).unwrap();
            assert_eq!(a.prices.to_vec(), b.prices);
            assert_eq!(a.demands.to_vec(), b.demands);
            assert_eq!(a.eq_type, b.eq_type);
        }
    }

    proptest! {
        #[test]
        fn equilibrium_invariants(
            gamma in 0.0f64..0.9,
            s in prop::collection::vec(-1.0f64..8.0, 1..6),
        ) {
            let g = GreekParams::new(6.0, 1.0, gamma).unwrap();
            let eq = solve_nash_greek(&g, &CostVector::new(&s).unwrap()).unwrap();
            for i in 0..s.len() {
                prop_assert!(eq.prices[i] >= s[i]);
                prop_assert!(eq.demands[i] >= 0.0);
                prop_assert!(eq.profits[i] >= 0.0);
                if eq.demands[i] == 0.0 {
                    prop_assert_eq!(eq.prices[i], s[i]);
                }
            }
            // Firms above cost form a prefix of the cost order.
            let c = CostVector::new(&s).unwrap();
            let above: Vec<bool> = c.order().iter().map(|&i| eq.prices[i] > s[i]).collect();
            let first_at_cost = above.iter().position(|&a| !a).unwrap_or(above.len());
            prop_assert!(above[first_at_cost..].iter().all(|&a| !a));
        }

        #[test]
        fn foc_holds_off_the_kink(gamma in 0.01f64..0.9, s in prop::collection::vec(0.0f64..6.0, 2..5)) {
            let g = GreekParams::new(6.0, 1.0, gamma).unwrap();
            let l = LevelCoefficients::from_greek(&g, s.len()).unwrap();
            let eq = solve_nash_levels(&l, &CostVector::new(&s).unwrap()).unwrap();
            let n = match eq.eq_type {
                EquilibriumType::Interior => s.len(),
                EquilibriumType::Ignorable { active } => active,
                _ => return Ok(()),
            };
            let lv = l.level(n).unwrap();
            let act: Vec<usize> = (0..s.len()).filter(|&i| eq.prices[i] > s[i]).collect();
            prop_assert_eq!(act.len(), n);
            let total: f64 = act.iter().map(|&i| eq.prices[i]).sum();
            for &i in &act {
                let r = lv.demand(eq.prices[i], total - eq.prices[i]) - lv.b * (eq.prices[i] - s[i]);
                prop_assert!(r.abs() <= 1e-10, "residual {}", r);
            }
        }

        #[test]
        fn permutation_consistent(gamma in 0.01f64..0.9, s in prop::collection::vec(0.0f64..7.0, 2..5), rot in 0usize..5) {
            let g = GreekParams::new(6.0, 1.0, gamma).unwrap();
            let mut t = s.clone();
            let k = rot % s.len();
            t.rotate_left(k);
            let a = solve_nash_greek(&g, &CostVector::new(&s).unwrap()).unwrap();
            let b = solve_nash_greek(&g, &CostVector::new(&t).unwrap()).unwrap();
            let mut ap = a.prices.clone();
            ap.rotate_left(k);
            for i in 0..s.len() {
                prop_assert!(approx_eq(ap[i], b.prices[i], 1e-12, 1e-12));
            }
        }
    }
}
