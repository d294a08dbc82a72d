//! Capacity paths under equilibrium pricing.
//!
//! Deterministic paths integrate `dx_i/dt = -D_i(x)` with classical RK4 and
//! locate each sell-out exactly. Stochastic paths add correlated Brownian
//! noise with Euler-Maruyama; a firm whose capacity reaches zero is out for
//! good and the survivor switches to its monopoly policy from the next step.
//!
//! Random numbers come from ChaCha20 seeded with `seed_from_u64`, standard
//! normals from `rand_distr::StandardNormal`. Each step draws two normals,
//! firm 1 first, even after a firm has left the market.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::asymptotics::{Expansion, SecondOrder};
use crate::demand::{GreekParams, Level};
use crate::error::{domain, Error, Result};
use crate::hjb::{GameParams, ValueSurfacePair};
use crate::monopoly::MonopolyModel;
use crate::Firm;

/// Name of the generator recorded with every stochastic path.
pub const RNG_NAME: &str = "ChaCha20";

/// Prices and demands of both firms at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyPoint {
    pub prices: [f64; 2],
    pub demands: [f64; 2],
    /// The state lay outside the data the policy was built from.
    pub extrapolated: bool,
}

/// Feedback pricing rule of the duopoly and of the monopolist left behind.
pub trait PolicySource: Sync {
    fn greek(&self) -> GreekParams;

    fn discount(&self) -> f64;

    /// Both firms hold capacity.
    fn duopoly(&self, x1: f64, x2: f64) -> Result<PolicyPoint>;

    /// Price and demand of `firm` alone in the market with capacity `x`.
    fn monopoly(&self, firm: Firm, x: f64) -> Result<(f64, f64)>;

    /// Value of `firm` alone in the market with capacity `x`.
    fn monopoly_value(&self, firm: Firm, x: f64) -> f64;
}

fn duopoly_level(g: &GreekParams) -> Level {
    g.level(2)
}

/// Policy at a state given which firms are still selling. A firm that has
/// left is quoted at its choke price against the survivor.
fn policy_at<S: PolicySource + ?Sized>(src: &S, x: [f64; 2], alive: [bool; 2]) -> Result<PolicyPoint> {
    let g = src.greek();
    match alive {
        [true, true] => src.duopoly(x[0].max(0.0), x[1].max(0.0)),
        [false, false] => Ok(PolicyPoint { prices: [g.alpha(); 2], demands: [0.0; 2], extrapolated: false }),
        [a, _] => {
            let firm = if a { Firm::One } else { Firm::Two };
            let i = firm.index();
            let (p, d) = src.monopoly(firm, x[i].max(0.0))?;
            let mut prices = [0.0; 2];
            let mut demands = [0.0; 2];
            prices[i] = p;
            demands[i] = d;
            prices[1 - i] = duopoly_level(&g).choke(p);
            Ok(PolicyPoint { prices, demands, extrapolated: false })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyMode {
    /// Truncated power series for prices and demands.
    Series,
    /// Exact static game at the truncated shadow costs.
    StaticGame,
}

/// Pricing from the small-gamma expansion of the noiseless game. The
/// survivor follows the closed-form monopoly policy.
#[derive(Debug, Clone)]
pub struct AsymptoticPolicy {
    expansion: Expansion,
    mode: PolicyMode,
    order: usize,
}

impl AsymptoticPolicy {
    pub fn new(model: MonopolyModel, gamma: f64, form: SecondOrder, mode: PolicyMode, order: usize) -> Result<Self> {
        if order > 2 {
            return domain(format!("expansion order must be 0, 1 or 2, got {order}"));
        }
        Ok(Self { expansion: Expansion::new(model, gamma, form)?, mode, order })
    }

    pub fn expansion(&self) -> &Expansion {
        &self.expansion
    }
}

impl PolicySource for AsymptoticPolicy {
    fn greek(&self) -> GreekParams {
        self.expansion.greek()
    }

    fn discount(&self) -> f64 {
        self.expansion.model().r()
    }

    fn duopoly(&self, x1: f64, x2: f64) -> Result<PolicyPoint> {
        let pt = match self.mode {
            PolicyMode::Series => {
                let pt = self.expansion.series(x1, x2, self.order);
                if pt.demands.iter().any(|d| !(*d >= 0.0)) {
                    return Err(Error::Positivity(format!(
                        "series demands {:?} at ({x1}, {x2})",
                        pt.demands
                    )));
                }
                pt
            }
            PolicyMode::StaticGame => self.expansion.static_game(x1, x2, self.order)?,
        };
        Ok(PolicyPoint { prices: pt.prices, demands: pt.demands, extrapolated: false })
    }

    fn monopoly(&self, _firm: Firm, x: f64) -> Result<(f64, f64)> {
        Ok(self.expansion.model().policy(x))
    }

    fn monopoly_value(&self, _firm: Firm, x: f64) -> f64 {
        self.expansion.model().value(x)
    }
}

/// Pricing read off solved value surfaces by bilinear interpolation. States
/// beyond the grid use the nearest edge and are flagged. The survivor uses
/// the surfaces' monopoly edge.
#[derive(Debug, Clone)]
pub struct SurfacePolicy {
    surfaces: ValueSurfacePair,
    greek: GreekParams,
    r: f64,
}

impl SurfacePolicy {
    pub fn new(surfaces: ValueSurfacePair, params: &GameParams) -> Self {
        Self { surfaces, greek: params.greek(), r: params.r() }
    }

    pub fn surfaces(&self) -> &ValueSurfacePair {
        &self.surfaces
    }

    fn edge(&self, firm: Firm, x: f64) -> (f64, f64) {
        match firm {
            Firm::One => (x, 0.0),
            Firm::Two => (0.0, x),
        }
    }
}

impl PolicySource for SurfacePolicy {
    fn greek(&self) -> GreekParams {
        self.greek
    }

    fn discount(&self) -> f64 {
        self.r
    }

    fn duopoly(&self, x1: f64, x2: f64) -> Result<PolicyPoint> {
        let g = &self.surfaces.grid;
        let s = &self.surfaces;
        Ok(PolicyPoint {
            prices: [g.interpolate(&s.price1, x1, x2), g.interpolate(&s.price2, x1, x2)],
            demands: [
                g.interpolate(&s.demand1, x1, x2).max(0.0),
                g.interpolate(&s.demand2, x1, x2).max(0.0),
            ],
            extrapolated: !g.contains(x1, x2),
        })
    }

    fn monopoly(&self, firm: Firm, x: f64) -> Result<(f64, f64)> {
        let (a, b) = self.edge(firm, x);
        let g = &self.surfaces.grid;
        let s = &self.surfaces;
        Ok((g.interpolate(s.price(firm), a, b), g.interpolate(s.demand(firm), a, b).max(0.0)))
    }

    fn monopoly_value(&self, firm: Firm, x: f64) -> f64 {
        let (a, b) = self.edge(firm, x);
        self.surfaces.grid.interpolate(self.surfaces.value(firm), a, b)
    }
}

/// One simulated or integrated trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub times: Vec<f64>,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub price1: Vec<f64>,
    pub price2: Vec<f64>,
    pub demand1: Vec<f64>,
    pub demand2: Vec<f64>,
    pub absorption_time1: Option<f64>,
    pub absorption_time2: Option<f64>,
    /// Seed of a stochastic path; 0 for deterministic ones.
    pub seed: u64,
    /// Generator name, or "none" for deterministic paths.
    pub rng: &'static str,
    /// Steps whose policy lookup fell outside the policy's data.
    pub extrapolated_steps: usize,
}

impl PathRecord {
    fn new(seed: u64, rng: &'static str) -> Self {
        Self {
            times: Vec::new(),
            x1: Vec::new(),
            x2: Vec::new(),
            price1: Vec::new(),
            price2: Vec::new(),
            demand1: Vec::new(),
            demand2: Vec::new(),
            absorption_time1: None,
            absorption_time2: None,
            seed,
            rng,
            extrapolated_steps: 0,
        }
    }

    fn push(&mut self, t: f64, x: [f64; 2], p: &PolicyPoint) {
        self.times.push(t);
        self.x1.push(x[0]);
        self.x2.push(x[1]);
        self.price1.push(p.prices[0]);
        self.price2.push(p.prices[1]);
        self.demand1.push(p.demands[0]);
        self.demand2.push(p.demands[1]);
        if p.extrapolated {
            self.extrapolated_steps += 1;
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn absorption_time(&self, firm: Firm) -> Option<f64> {
        match firm {
            Firm::One => self.absorption_time1,
            Firm::Two => self.absorption_time2,
        }
    }

    pub fn capacity(&self, firm: Firm) -> &[f64] {
        match firm {
            Firm::One => &self.x1,
            Firm::Two => &self.x2,
        }
    }

    fn set_absorbed(&mut self, i: usize, t: f64) {
        match i {
            0 => self.absorption_time1 = Some(t),
            _ => self.absorption_time2 = Some(t),
        }
    }
}

fn check_start(x0: [f64; 2], dt: f64, t_max: f64) -> Result<()> {
    if !(x0[0] > 0.0 && x0[1] > 0.0 && x0.iter().all(|x| x.is_finite())) {
        return domain(format!("initial capacities must be positive, got {x0:?}"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return domain(format!("time step must be positive, got {dt}"));
    }
    if !(t_max > 0.0 && t_max.is_finite()) {
        return domain(format!("horizon must be positive, got {t_max}"));
    }
    Ok(())
}

/// Largest step accepted by [`deterministic_path`] from `x0`.
pub fn max_deterministic_step(g: &GreekParams, x0: [f64; 2]) -> f64 {
    1e-2 * x0[0].min(x0[1]) * 2.0 * g.beta() / g.alpha()
}

/// State of the noiseless integration: square roots of the capacities and
/// discounted revenue. Demand falls like a square root of capacity near
/// sell-out, so in these coordinates a sell-out is a plain zero crossing
/// and RK4 keeps its order up to it.
type State = [f64; 4];

/// Root capacities below this are evaluated here, which extends the flow
/// past zero by its limit.
const ROOT_FLOOR: f64 = 1e-8;

/// Capacities this close to zero at a sell-out are taken as simultaneous.
const SIMULTANEOUS: f64 = 1e-10;

fn capacities(y: &State) -> [f64; 2] {
    [y[0].max(0.0).powi(2), y[1].max(0.0).powi(2)]
}

struct Flow<'a, S: PolicySource + ?Sized> {
    src: &'a S,
    r: f64,
}

impl<S: PolicySource + ?Sized> Flow<'_, S> {
    fn rhs(&self, t: f64, y: &State, alive: [bool; 2]) -> Result<State> {
        let u = [y[0].max(ROOT_FLOOR), y[1].max(ROOT_FLOOR)];
        let p = policy_at(self.src, [u[0] * u[0], u[1] * u[1]], alive)?;
        let disc = (-self.r * t).exp();
        Ok([
            -p.demands[0] / (2.0 * u[0]),
            -p.demands[1] / (2.0 * u[1]),
            disc * p.prices[0] * p.demands[0],
            disc * p.prices[1] * p.demands[1],
        ])
    }

    fn rk4(&self, t: f64, y: &State, h: f64, alive: [bool; 2]) -> Result<State> {
        let add = |a: &State, k: &State, s: f64| -> State {
            let mut out = *a;
            for (o, kk) in out.iter_mut().zip(k) {
                *o += s * kk;
            }
            out
        };
        let k1 = self.rhs(t, y, alive)?;
        let k2 = self.rhs(t + 0.5 * h, &add(y, &k1, 0.5 * h), alive)?;
        let k3 = self.rhs(t + 0.5 * h, &add(y, &k2, 0.5 * h), alive)?;
        let k4 = self.rhs(t + h, &add(y, &k3, h), alive)?;
        let mut out = *y;
        for n in 0..4 {
            out[n] += h / 6.0 * (k1[n] + 2.0 * k2[n] + 2.0 * k3[n] + k4[n]);
        }
        Ok(out)
    }

    /// Step length in (0, h] at which root capacity `i` reaches zero, by the
    /// Illinois variant of regula falsi on the RK4 step.
    fn sell_out(&self, t: f64, y: &State, h: f64, alive: [bool; 2], i: usize) -> Result<f64> {
        let (mut a, mut fa) = (0.0, y[i]);
        let (mut b, mut fb) = (h, self.rk4(t, y, h, alive)?[i]);
        let mut side = 0;
        for _ in 0..100 {
            if b - a <= 1e-15 * h.max(1.0) {
                break;
            }
            let c = (a * fb - b * fa) / (fb - fa);
            let c = if c > a && c < b { c } else { 0.5 * (a + b) };
            let fc = self.rk4(t, y, c, alive)?[i];
            if fc.abs() <= 1e-15 {
                return Ok(c);
            }
            if fc > 0.0 {
                a = c;
                fa = fc;
                if side == 1 {
                    fb *= 0.5;
                }
                side = 1;
            } else {
                b = c;
                fb = fc;
                if side == -1 {
                    fa *= 0.5;
                }
                side = -1;
            }
        }
        Ok(b)
    }

    /// One step of at most `h` from `(t, y)`. Stops early at the first
    /// sell-out among live firms and returns the step taken, the new state
    /// and the firm that sold out.
    fn advance(&self, t: f64, y: &State, h: f64, alive: [bool; 2]) -> Result<(f64, State, Option<usize>)> {
        let next = self.rk4(t, y, h, alive)?;
        let mut first: Option<(f64, usize)> = None;
        for i in (0..2).filter(|&i| alive[i] && next[i] <= 0.0) {
            let s = self.sell_out(t, y, h, alive, i)?;
            if first.is_none_or(|(f, _)| s < f) {
                first = Some((s, i));
            }
        }
        match first {
            None => Ok((h, next, None)),
            Some((s, i)) => {
                let mut next = self.rk4(t, y, s, alive)?;
                next[i] = 0.0;
                Ok((s, next, Some(i)))
            }
        }
    }
}

/// Noiseless equilibrium path from `x0` on `[0, t_max]`.
///
/// Steps are `dt` except the last one before `t_max` and the ones ending at
/// a sell-out, which stop exactly when a capacity reaches zero.
pub fn deterministic_path<S: PolicySource + ?Sized>(src: &S, x0: [f64; 2], dt: f64, t_max: f64) -> Result<PathRecord> {
    check_start(x0, dt, t_max)?;
    let limit = max_deterministic_step(&src.greek(), x0);
    if dt > limit {
        return domain(format!("time step {dt} above the limit {limit} for this start"));
    }
    let flow = Flow { src, r: src.discount() };
    let mut path = PathRecord::new(0, "none");
    let mut y: State = [x0[0].sqrt(), x0[1].sqrt(), 0.0, 0.0];
    let mut alive = [true, true];
    let mut t = 0.0;
    path.push(t, x0, &policy_at(src, x0, alive)?);
    while t < t_max && alive.iter().any(|&a| a) {
        let (step, mut next, _) = flow.advance(t, &y, dt.min(t_max - t), alive)?;
        t += step;
        for i in 0..2 {
            if alive[i] && next[i] * next[i] <= SIMULTANEOUS {
                next[i] = 0.0;
                alive[i] = false;
                path.set_absorbed(i, t);
            }
        }
        y = next;
        let x = capacities(&y);
        path.push(t, x, &policy_at(src, x, alive)?);
    }
    Ok(path)
}

/// Values of both firms at `x0` found by collecting discounted revenue
/// along the noiseless path. When one firm sells out, the survivor's
/// monopoly value at that moment is added, discounted, and integration stops.
/// Integration also stops at `t_max`; choose it past both sell-outs.
pub fn characteristics_value<S: PolicySource + ?Sized>(src: &S, x0: [f64; 2], dt: f64, t_max: f64) -> Result<[f64; 2]> {
    check_start(x0, dt, t_max)?;
    let flow = Flow { src, r: src.discount() };
    let mut y: State = [x0[0].sqrt(), x0[1].sqrt(), 0.0, 0.0];
    let alive = [true, true];
    let mut t = 0.0;
    while t < t_max {
        let (step, next, gone) = flow.advance(t, &y, dt.min(t_max - t), alive)?;
        t += step;
        y = next;
        if let Some(gone) = gone {
            let survivor = 1 - gone;
            let firm = if survivor == 0 { Firm::One } else { Firm::Two };
            let mut out = [y[2], y[3]];
            let rest = capacities(&y)[survivor];
            if rest > SIMULTANEOUS {
                out[survivor] += (-flow.r * t).exp() * src.monopoly_value(firm, rest);
            }
            return Ok(out);
        }
    }
    Ok([y[2], y[3]])
}

/// Euler-Maruyama path of the noisy game from `x0`, on the fixed grid
/// `k dt` up to `t_max`.
///
/// A capacity that ends a step at or below zero is set to zero and its
/// absorption time is the end of that step. The survivor prices as a
/// monopolist from the following step on.
pub fn stochastic_path<S: PolicySource + ?Sized>(
    src: &S,
    params: &GameParams,
    x0: [f64; 2],
    dt: f64,
    t_max: f64,
    seed: u64,
) -> Result<PathRecord> {
    check_start(x0, dt, t_max)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (s1, s2, rho) = (params.sigma1(), params.sigma2(), params.rho());
    let tail = (1.0 - rho * rho).max(0.0).sqrt();
    let sq = dt.sqrt();
    let steps = (t_max / dt - 1e-9).ceil() as usize;

    let mut path = PathRecord::new(seed, RNG_NAME);
    let mut x = x0;
    let mut alive = [true, true];
    let mut pol = policy_at(src, x, alive)?;
    path.push(0.0, x, &pol);
    for k in 1..=steps {
        let z1: f64 = StandardNormal.sample(&mut rng);
        let z2: f64 = StandardNormal.sample(&mut rng);
        let xi = [z1, rho * z1 + tail * z2];
        let t = k as f64 * dt;
        for i in 0..2 {
            if !alive[i] {
                continue;
            }
            let s = if i == 0 { s1 } else { s2 };
            x[i] += -pol.demands[i] * dt + s * sq * xi[i];
            if x[i] <= 0.0 {
                x[i] = 0.0;
                alive[i] = false;
                path.set_absorbed(i, t);
            }
        }
        pol = policy_at(src, x, alive)?;
        path.push(t, x, &pol);
        if !alive[0] && !alive[1] {
            break;
        }
    }
    Ok(path)
}

/// Quantile levels reported by [`BatchSummary`].
pub const QUANTILE_LEVELS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

#[derive(Debug, Clone, PartialEq)]
pub struct AbsorptionStats {
    /// Paths on which the firm sold out before the horizon.
    pub absorbed: usize,
    /// Mean sell-out time over those paths.
    pub mean: Option<f64>,
    /// Linear-interpolation quantiles at [`QUANTILE_LEVELS`], over those paths.
    pub quantiles: Option<[f64; 5]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchSummary {
    pub n_paths: usize,
    pub base_seed: u64,
    pub absorption: [AbsorptionStats; 2],
    /// Mean and standard deviation of each firm's capacity at the last time.
    pub terminal_mean: [f64; 2],
    pub terminal_std: [f64; 2],
    /// Paths on which firm 1 sold out strictly first.
    pub firm1_first: usize,
    pub firm2_first: usize,
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn absorption_stats(times: &[Option<f64>]) -> AbsorptionStats {
    let mut hit: Vec<f64> = times.iter().flatten().copied().collect();
    if hit.is_empty() {
        return AbsorptionStats { absorbed: 0, mean: None, quantiles: None };
    }
    hit.sort_by(f64::total_cmp);
    let mean = hit.iter().sum::<f64>() / hit.len() as f64;
    let quantiles = QUANTILE_LEVELS.map(|p| quantile(&hit, p));
    AbsorptionStats { absorbed: hit.len(), mean: Some(mean), quantiles: Some(quantiles) }
}

/// What a batch keeps from each path.
#[derive(Debug, Clone, Copy)]
struct PathOutcome {
    absorbed: [Option<f64>; 2],
    terminal: [f64; 2],
}

/// Simulates `n_paths` stochastic paths with seeds `base_seed + k` and
/// summarizes them. Paths run in parallel; the summary does not depend on
/// thread scheduling.
pub fn batch_simulate<S: PolicySource + ?Sized>(
    src: &S,
    params: &GameParams,
    x0: [f64; 2],
    dt: f64,
    t_max: f64,
    n_paths: usize,
    base_seed: u64,
) -> Result<BatchSummary> {
    if n_paths == 0 {
        return domain("need at least one path");
    }
    let outcomes: Vec<PathOutcome> = (0..n_paths)
        .into_par_iter()
        .map(|k| {
            let p = stochastic_path(src, params, x0, dt, t_max, base_seed.wrapping_add(k as u64))?;
            Ok(PathOutcome {
                absorbed: [p.absorption_time1, p.absorption_time2],
                terminal: [*p.x1.last().unwrap(), *p.x2.last().unwrap()],
            })
        })
        .collect::<Result<_>>()?;
    Ok(summarize(&outcomes, base_seed))
}

/// Summary of already simulated paths.
pub fn summarize_paths(paths: &[PathRecord], base_seed: u64) -> BatchSummary {
    let outcomes: Vec<PathOutcome> = paths
        .iter()
        .map(|p| PathOutcome {
            absorbed: [p.absorption_time1, p.absorption_time2],
            terminal: [p.x1.last().copied().unwrap_or(0.0), p.x2.last().copied().unwrap_or(0.0)],
        })
        .collect();
    summarize(&outcomes, base_seed)
}

fn summarize(outcomes: &[PathOutcome], base_seed: u64) -> BatchSummary {
    let n = outcomes.len() as f64;
    let stats = |i: usize| absorption_stats(&outcomes.iter().map(|o| o.absorbed[i]).collect::<Vec<_>>());
    let mean = |i: usize| outcomes.iter().map(|o| o.terminal[i]).sum::<f64>() / n;
    let terminal_mean = [mean(0), mean(1)];
    let std = |i: usize| {
        let m = terminal_mean[i];
        (outcomes.iter().map(|o| (o.terminal[i] - m).powi(2)).sum::<f64>() / n).sqrt()
    };
    let first = |i: usize| {
        outcomes
            .iter()
            .filter(|o| match (o.absorbed[i], o.absorbed[1 - i]) {
                (Some(a), Some(b)) => a < b,
                (Some(_), None) => true,
                _ => false,
            })
            .count()
    };
    BatchSummary {
        n_paths: outcomes.len(),
        base_seed,
        absorption: [stats(0), stats(1)],
        terminal_mean,
        terminal_std: [std(0), std(1)],
        firm1_first: first(0),
        firm2_first: first(1),
    }
}
