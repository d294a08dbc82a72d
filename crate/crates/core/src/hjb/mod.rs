//! Finite-difference solver for the noisy duopoly.
//!
//! Each firm's value solves
//!
//! ```text
//! L V_i - D_1 dV_i/dx1 - D_2 dV_i/dx2 + p_i D_i - r V_i = 0
//! L = sigma1^2/2 d11 + rho sigma1 sigma2 d12 + sigma2^2/2 d22
//! ```
//!
//! where the prices and demands come from the static pricing game with the
//! shadow costs `S_i = dV_i/dx_i - (gamma/beta) dV_i/dx_j` as unit costs.
//! On `x_j = 0` firm i is a monopolist; on `x_i = 0` its value is zero. The
//! far edges `x = x_max` carry a zero normal derivative.
//!
//! The solve is policy iteration: freeze the static-game outcome at every
//! node, solve the two linear problems (they share one matrix), repeat.

mod band;
mod nplayer;

pub use nplayer::{nplayer_decomposition, nplayer_shadow_cost};

use rayon::prelude::*;

use crate::demand::{GreekParams, LevelCoefficients};
use crate::equilibrium::solve_duopoly_levels;
use crate::error::{domain, Error, Result};
use crate::monopoly::{fitted_weight, MonopolyModel};
use crate::Firm;
use band::BandMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameParams {
    greek: GreekParams,
    r: f64,
    sigma1: f64,
    sigma2: f64,
    rho: f64,
}

impl GameParams {
    pub fn new(greek: GreekParams, r: f64, sigma1: f64, sigma2: f64, rho: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return domain(format!("discount rate must be positive, got {r}"));
        }
        for (name, s) in [("sigma1", sigma1), ("sigma2", sigma2)] {
            if !(s >= 0.0 && s.is_finite()) {
                return domain(format!("{name} must be non-negative, got {s}"));
            }
        }
        if !(rho.abs() <= 1.0) {
            return domain(format!("correlation must lie in [-1, 1], got {rho}"));
        }
        Ok(Self { greek, r, sigma1, sigma2, rho })
    }

    pub fn greek(&self) -> GreekParams {
        self.greek
    }
    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn sigma1(&self) -> f64 {
        self.sigma1
    }
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
    pub fn sigma(&self, firm: Firm) -> f64 {
        match firm {
            Firm::One => self.sigma1,
            Firm::Two => self.sigma2,
        }
    }
    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// The monopoly each firm becomes once its rival is gone.
    pub fn monopoly(&self) -> MonopolyModel {
        MonopolyModel::new(self.greek.alpha(), self.greek.beta(), self.r)
            .expect("validated parameters")
    }

    pub fn ladder(&self) -> LevelCoefficients {
        LevelCoefficients::from_greek(&self.greek, 2).expect("gamma below beta")
    }
}

/// Uniform grid on `[0, x_max]^2`. Node `(i, j)` sits at `(i h1, j h2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    x_max: f64,
    n1: usize,
    n2: usize,
}

impl Grid2D {
    pub fn new(x_max: f64, n1: usize, n2: usize) -> Result<Self> {
        if !(x_max > 0.0 && x_max.is_finite()) {
            return Err(Error::Grid(format!("x_max must be positive, got {x_max}")));
        }
        if n1 < 16 || n2 < 16 {
            return Err(Error::Grid(format!("need at least 16 nodes per axis, got {n1}x{n2}")));
        }
        Ok(Self { x_max, n1, n2 })
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn n1(&self) -> usize {
        self.n1
    }
    pub fn n2(&self) -> usize {
        self.n2
    }
    pub fn h1(&self) -> f64 {
        self.x_max / (self.n1 - 1) as f64
    }
    pub fn h2(&self) -> f64 {
        self.x_max / (self.n2 - 1) as f64
    }
    pub fn x1(&self, i: usize) -> f64 {
        i as f64 * self.h1()
    }
    pub fn x2(&self, j: usize) -> f64 {
        j as f64 * self.h2()
    }
    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flat index, x1 outer.
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n2 + j
    }

    #[inline]
    pub fn unflat(&self, k: usize) -> (usize, usize) {
        (k / self.n2, k % self.n2)
    }

    pub fn contains(&self, x1: f64, x2: f64) -> bool {
        (0.0..=self.x_max).contains(&x1) && (0.0..=self.x_max).contains(&x2)
    }

    /// Bilinear interpolation of a nodal field, clamped to the grid.
    pub fn interpolate(&self, field: &[f64], x1: f64, x2: f64) -> f64 {
        let (i, t) = cell(x1, self.h1(), self.n1);
        let (j, u) = cell(x2, self.h2(), self.n2);
        let f = |a: usize, b: usize| field[self.idx(a, b)];
        (1.0 - t) * ((1.0 - u) * f(i, j) + u * f(i, j + 1)) + t * ((1.0 - u) * f(i + 1, j) + u * f(i + 1, j + 1))
    }
}

fn cell(x: f64, h: f64, n: usize) -> (usize, f64) {
    let s = (x / h).clamp(0.0, (n - 1) as f64);
    let i = (s.floor() as usize).min(n - 2);
    (i, s - i as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Stop once the sup-norm change of values and prices in one sweep is below this.
    pub tol: f64,
    pub max_iters: usize,
    /// Relaxation weight in (0, 1] applied to each new value iterate.
    pub damping: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tol: 1e-10, max_iters: 200, damping: 1.0 }
    }
}

/// Solver output. Arrays are indexed by [`Grid2D::idx`].
///
/// On the edge where a firm has no capacity left, its price is stored as its
/// choke price against the survivor and its demand as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSurfacePair {
    pub grid: Grid2D,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub price1: Vec<f64>,
    pub price2: Vec<f64>,
    pub demand1: Vec<f64>,
    pub demand2: Vec<f64>,
    pub shadow1: Vec<f64>,
    pub shadow2: Vec<f64>,
    pub iterations: usize,
    /// Sup-norm of the discrete equations over the unknown nodes.
    pub final_residual: f64,
    /// Unknown nodes where the static game leaves some firm with zero demand.
    pub zero_demand_nodes: usize,
}

impl ValueSurfacePair {
    pub fn value(&self, firm: Firm) -> &[f64] {
        match firm {
            Firm::One => &self.v1,
            Firm::Two => &self.v2,
        }
    }
    pub fn price(&self, firm: Firm) -> &[f64] {
        match firm {
            Firm::One => &self.price1,
            Firm::Two => &self.price2,
        }
    }
    pub fn demand(&self, firm: Firm) -> &[f64] {
        match firm {
            Firm::One => &self.demand1,
            Firm::Two => &self.demand2,
        }
    }
    pub fn shadow(&self, firm: Firm) -> &[f64] {
        match firm {
            Firm::One => &self.shadow1,
            Firm::Two => &self.shadow2,
        }
    }
}

/// First derivatives of a nodal field: central inside, second-order
/// one-sided on the zero-capacity edges, zero normal derivative on the far
/// edges as the Neumann condition imposes. A one-sided difference there
/// feeds the corner value back into its own price strongly enough to make
/// policy iteration diverge at small noise.
fn gradient(grid: &Grid2D, v: &[f64], i: usize, j: usize) -> (f64, f64) {
    let d = |f: &dyn Fn(usize) -> f64, k: usize, n: usize, h: f64| {
        if k == 0 {
            (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * h)
        } else if k == n - 1 {
            0.0
        } else {
            (f(k + 1) - f(k - 1)) / (2.0 * h)
        }
    };
    let along1 = |a: usize| v[grid.idx(a, j)];
    let along2 = |b: usize| v[grid.idx(i, b)];
    (d(&along1, i, grid.n1, grid.h1()), d(&along2, j, grid.n2, grid.h2()))
}

fn shadow_at(grid: &Grid2D, v1: &[f64], v2: &[f64], ratio: f64, i: usize, j: usize) -> (f64, f64) {
    let (a1, a2) = gradient(grid, v1, i, j);
    let (b1, b2) = gradient(grid, v2, i, j);
    (a1 - ratio * a2, b2 - ratio * b1)
}

/// Shadow costs `S_i = dV_i/dx_i - (gamma/beta) dV_i/dx_j` at every node.
pub fn shadow_costs(surfaces: &ValueSurfacePair, greek: &GreekParams) -> (Vec<f64>, Vec<f64>) {
    let g = &surfaces.grid;
    let ratio = greek.gamma() / greek.beta();
    (0..g.len())
        .map(|k| {
            let (i, j) = g.unflat(k);
            shadow_at(g, &surfaces.v1, &surfaces.v2, ratio, i, j)
        })
        .unzip()
}

#[derive(Debug, Clone, Copy, Default)]
struct NodePolicy {
    price: [f64; 2],
    demand: [f64; 2],
    shadow: [f64; 2],
}

/// Stencil of one unknown node: `center * V + sum w_k V[k] + source = 0`.
#[derive(Debug, Clone, Copy)]
struct Stencil {
    center: f64,
    entries: [(usize, f64); 9],
    len: usize,
}

impl Stencil {
    fn push(&mut self, k: usize, w: f64) {
        if w == 0.0 {
            return;
        }
        if let Some(e) = self.entries[..self.len].iter_mut().find(|e| e.0 == k) {
            e.1 += w;
        } else {
            self.entries[self.len] = (k, w);
            self.len += 1;
        }
    }

    fn apply(&self, v: &[f64], k: usize) -> f64 {
        self.entries[..self.len].iter().fold(self.center * v[k], |s, &(n, w)| s + w * v[n])
    }
}

struct Scheme {
    grid: Grid2D,
    /// Axis weights after the cross term takes its share.
    ax1: f64,
    ax2: f64,
    diag: f64,
    rho_sign: f64,
    r: f64,
}

impl Scheme {
    fn new(params: &GameParams, grid: &Grid2D) -> Result<Self> {
        let (h1, h2) = (grid.h1(), grid.h2());
        let (s1, s2) = (params.sigma1, params.sigma2);
        let kappa = (params.rho * s1 * s2).abs();
        if params.rho.abs() > (h1 / h2).min(h2 / h1) {
            return Err(Error::Grid(format!(
                "|rho| = {} exceeds the mesh-ratio bound {}",
                params.rho.abs(),
                (h1 / h2).min(h2 / h1)
            )));
        }
        let ax1 = s1 * s1 / (2.0 * h1 * h1) - kappa / (2.0 * h1 * h2);
        let ax2 = s2 * s2 / (2.0 * h2 * h2) - kappa / (2.0 * h1 * h2);
        if ax1 < 0.0 || ax2 < 0.0 {
            return Err(Error::Grid("cross-derivative stencil is not monotone on this mesh".into()));
        }
        Ok(Self {
            grid: *grid,
            ax1,
            ax2,
            diag: kappa / (2.0 * h1 * h2),
            rho_sign: params.rho.signum(),
            r: params.r,
        })
    }

    fn stencil(&self, i: usize, j: usize, d: [f64; 2]) -> Stencil {
        let g = &self.grid;
        let (n1, n2) = (g.n1, g.n2);
        let mirror = |a: usize, n: usize| if a == n { n - 2 } else { a };
        let at = |di: isize, dj: isize| {
            let a = mirror((i as isize + di) as usize, n1);
            let b = mirror((j as isize + dj) as usize, n2);
            g.idx(a, b)
        };
        // Drift toward smaller capacity. The normal drift term vanishes on a
        // far edge with the mirrored ghost node.
        let q1 = if i + 1 < n1 { d[0] / (2.0 * g.h1()) } else { 0.0 };
        let q2 = if j + 1 < n2 { d[1] / (2.0 * g.h2()) } else { 0.0 };
        // Fit against the full diffusion so fields constant in one direction
        // see the 1-D scheme, but never let the downwind neighbour go negative.
        // The floor only binds at large cell Peclet numbers (coarse grids),
        // where the 1-D match is lost.
        let w1 = (fitted_weight(self.ax1 + self.diag, q1) - self.diag).max(q1.abs());
        let w2 = (fitted_weight(self.ax2 + self.diag, q2) - self.diag).max(q2.abs());

        let mut st = Stencil { center: 0.0, entries: [(0, 0.0); 9], len: 0 };
        st.push(at(1, 0), w1 - q1);
        st.push(at(-1, 0), w1 + q1);
        st.push(at(0, 1), w2 - q2);
        st.push(at(0, -1), w2 + q2);
        if self.diag > 0.0 {
            if self.rho_sign > 0.0 {
                st.push(at(1, 1), self.diag);
                st.push(at(-1, -1), self.diag);
            } else {
                st.push(at(1, -1), self.diag);
                st.push(at(-1, 1), self.diag);
            }
        }
        st.center = -2.0 * (w1 + w2 + self.diag) - self.r;
        st
    }
}

/// Values, prices and demands of the monopolist on one edge, from the 1-D
/// solve on the same `n` nodes so a field constant across the edge is an
/// exact solution of the 2-D scheme.
fn edge_curve(model: &MonopolyModel, sigma: f64, x_max: f64, n: usize) -> Result<Vec<(f64, f64, f64)>> {
    let curve = crate::monopoly::solve_on_nodes(model, sigma, x_max, n)?;
    Ok((0..n).map(|k| (curve.v[k], curve.price[k], curve.demand[k])).collect())
}

struct Unknowns {
    n1: usize,
    n2: usize,
}

impl Unknowns {
    fn count(&self) -> usize {
        (self.n1 - 1) * (self.n2 - 1)
    }
    fn node(&self, u: usize) -> (usize, usize) {
        (u / (self.n2 - 1) + 1, u % (self.n2 - 1) + 1)
    }
    fn index(&self, i: usize, j: usize) -> usize {
        (i - 1) * (self.n2 - 1) + (j - 1)
    }
}

fn policies(
    grid: &Grid2D,
    unk: &Unknowns,
    ladder: &LevelCoefficients,
    ratio: f64,
    v1: &[f64],
    v2: &[f64],
) -> Result<Vec<NodePolicy>> {
    (0..unk.count())
        .into_par_iter()
        .map(|u| {
            let (i, j) = unk.node(u);
            let (s1, s2) = shadow_at(grid, v1, v2, ratio, i, j);
            let out = solve_duopoly_levels(ladder, s1, s2)?;
            Ok(NodePolicy { price: out.prices, demand: out.demands, shadow: [s1, s2] })
        })
        .collect()
}

fn residual(
    scheme: &Scheme,
    unk: &Unknowns,
    pol: &[NodePolicy],
    v1: &[f64],
    v2: &[f64],
) -> f64 {
    (0..unk.count())
        .into_par_iter()
        .map(|u| {
            let (i, j) = unk.node(u);
            let p = &pol[u];
            let st = scheme.stencil(i, j, p.demand);
            let k = scheme.grid.idx(i, j);
            let r1 = st.apply(v1, k) + p.price[0] * p.demand[0];
            let r2 = st.apply(v2, k) + p.price[1] * p.demand[1];
            r1.abs().max(r2.abs())
        })
        .reduce(|| 0.0, f64::max)
}

/// Solves the duopoly on `grid` by policy iteration.
///
/// Needs `sigma1, sigma2 > 0`; the noiseless game is covered by the
/// expansion and path integration instead.
pub fn solve_duopoly(params: &GameParams, grid: &Grid2D, config: &SolverConfig) -> Result<ValueSurfacePair> {
    if !(params.sigma1 > 0.0 && params.sigma2 > 0.0) {
        return domain("the grid solver needs positive noise on both capacities");
    }
    if !(config.tol > 0.0) || config.max_iters == 0 {
        return domain("solver tolerance and iteration cap must be positive");
    }
    if !(config.damping > 0.0 && config.damping <= 1.0) {
        return domain(format!("damping must lie in (0, 1], got {}", config.damping));
    }
    let scheme = Scheme::new(params, grid)?;
    let model = params.monopoly();
    let ladder = params.ladder();
    let ratio = params.greek.gamma() / params.greek.beta();
    let (n1, n2) = (grid.n1, grid.n2);
    let edge1 = edge_curve(&model, params.sigma1, grid.x_max, n1)?;
    let edge2 = edge_curve(&model, params.sigma2, grid.x_max, n2)?;

    // Boundary data and the initial guess: each firm as a monopolist.
    let mut v1 = vec![0.0; grid.len()];
    let mut v2 = vec![0.0; grid.len()];
    for i in 0..n1 {
        for j in 0..n2 {
            let k = grid.idx(i, j);
            v1[k] = if i == 0 { 0.0 } else { edge1[i].0 };
            v2[k] = if j == 0 { 0.0 } else { edge2[j].0 };
        }
    }

    let unk = Unknowns { n1, n2 };
    let m = unk.count();
    let mut matrix = BandMatrix::zeros(m, n2);
    let mut prev: Option<Vec<NodePolicy>> = None;
    let mut dv = f64::INFINITY;
    let mut iterations = 0;
    let (pol, final_residual) = loop {
        let pol = policies(grid, &unk, &ladder, ratio, &v1, &v2)?;
        let dp = prev.as_ref().map_or(f64::INFINITY, |old| {
            old.iter()
                .zip(&pol)
                .map(|(a, b)| (a.price[0] - b.price[0]).abs().max((a.price[1] - b.price[1]).abs()))
                .fold(0.0, f64::max)
        });
        if dv < config.tol && dp < config.tol {
            let res = residual(&scheme, &unk, &pol, &v1, &v2);
            break (pol, res);
        }
        if iterations >= config.max_iters {
            let res = residual(&scheme, &unk, &pol, &v1, &v2);
            return Err(Error::NoConvergence { iterations, residual: res });
        }
        iterations += 1;

        let stencils: Vec<Stencil> = (0..m)
            .into_par_iter()
            .map(|u| {
                let (i, j) = unk.node(u);
                scheme.stencil(i, j, pol[u].demand)
            })
            .collect();
        matrix.clear();
        let mut rhs1 = vec![0.0; m];
        let mut rhs2 = vec![0.0; m];
        for (u, st) in stencils.iter().enumerate() {
            matrix.add(u, u, st.center);
            let p = &pol[u];
            rhs1[u] = -p.price[0] * p.demand[0];
            rhs2[u] = -p.price[1] * p.demand[1];
            for &(k, w) in &st.entries[..st.len] {
                let (a, b) = grid.unflat(k);
                if a == 0 || b == 0 {
                    rhs1[u] -= w * v1[k];
                    rhs2[u] -= w * v2[k];
                } else {
                    matrix.add(u, unk.index(a, b), w);
                }
            }
        }
        matrix
            .factor()
            .map_err(|row| Error::Consistency(format!("zero pivot at unknown {row}")))?;
        matrix.solve(&mut rhs1);
        matrix.solve(&mut rhs2);

        dv = 0.0;
        for u in 0..m {
            let (i, j) = unk.node(u);
            let k = grid.idx(i, j);
            for (v, new) in [(&mut v1, rhs1[u]), (&mut v2, rhs2[u])] {
                let step = new - v[k];
                dv = dv.max(step.abs());
                v[k] += config.damping * step;
            }
        }
        if !dv.is_finite() {
            return Err(Error::NoConvergence { iterations, residual: f64::INFINITY });
        }
        prev = Some(pol);
    };

    let mut out = ValueSurfacePair {
        grid: *grid,
        price1: vec![0.0; grid.len()],
        price2: vec![0.0; grid.len()],
        demand1: vec![0.0; grid.len()],
        demand2: vec![0.0; grid.len()],
        shadow1: Vec::new(),
        shadow2: Vec::new(),
        v1,
        v2,
        iterations,
        final_residual,
        zero_demand_nodes: pol.iter().filter(|p| p.demand[0] <= 0.0 || p.demand[1] <= 0.0).count(),
    };
    let (s1, s2) = shadow_costs(&out, &params.greek);
    out.shadow1 = s1;
    out.shadow2 = s2;
    for (u, p) in pol.iter().enumerate() {
        let (i, j) = unk.node(u);
        let k = grid.idx(i, j);
        out.price1[k] = p.price[0];
        out.price2[k] = p.price[1];
        out.demand1[k] = p.demand[0];
        out.demand2[k] = p.demand[1];
        out.shadow1[k] = p.shadow[0];
        out.shadow2[k] = p.shadow[1];
    }
    let duo = ladder.at(2);
    let alpha = params.greek.alpha();
    for i in 1..n1 {
        let k = grid.idx(i, 0);
        let (_, p, d) = edge1[i];
        out.price1[k] = p;
        out.demand1[k] = d;
        out.price2[k] = duo.choke(p);
    }
    for j in 1..n2 {
        let k = grid.idx(0, j);
        let (_, p, d) = edge2[j];
        out.price2[k] = p;
        out.demand2[k] = d;
        out.price1[k] = duo.choke(p);
    }
    out.price1[0] = alpha;
    out.price2[0] = alpha;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaSample {
    pub theta: f64,
    pub price1: f64,
    pub demand1: f64,
    pub price2: f64,
    pub demand2: f64,
}

/// Policies along the quarter circle of the given radius, `samples` angles
/// from 0 to pi/2 inclusive, by bilinear interpolation.
pub fn theta_slice(surfaces: &ValueSurfacePair, radius: f64, samples: usize) -> Result<Vec<ThetaSample>> {
    let g = &surfaces.grid;
    if !(radius > 0.0 && radius < g.x_max) {
        return Err(Error::Grid(format!("radius {radius} outside (0, {})", g.x_max)));
    }
    if samples < 2 {
        return domain("need at least two angles");
    }
    Ok((0..samples)
        .map(|k| {
            let theta = std::f64::consts::FRAC_PI_2 * k as f64 / (samples - 1) as f64;
            let (x1, x2) = (radius * theta.cos(), radius * theta.sin());
            ThetaSample {
                theta,
                price1: g.interpolate(&surfaces.price1, x1, x2),
                demand1: g.interpolate(&surfaces.demand1, x1, x2),
                price2: g.interpolate(&surfaces.price2, x1, x2),
                demand2: g.interpolate(&surfaces.demand2, x1, x2),
            }
        })
        .collect())
}
