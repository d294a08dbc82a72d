//! One function per subcommand. Each builds its outputs in memory; nothing
//! is written unless the whole command succeeds.

use bertrand_core::asymptotics::{
    first_order_residual, second_order_residual, v1_correction, v2_of, Expansion,
};
use bertrand_core::equilibrium::{region_of, solve_nash, CostVector};
use bertrand_core::hjb::{solve_duopoly, theta_slice, ValueSurfacePair};
use bertrand_core::monopoly::{solve_monopoly_numeric, MonopolyCurve};
use bertrand_core::output::{self, write_table};
use bertrand_core::simulate::{
    batch_simulate, deterministic_path, stochastic_path, AbsorptionStats, AsymptoticPolicy, PolicyMode,
    PolicySource, SurfacePolicy, RNG_NAME,
};
use bertrand_core::Firm;
use serde::Serialize;

use crate::config::{PolicyName, RunConfig, SimMode};
use crate::error::{config_err, CliError, CliResult};

pub const EQUILIBRIUM_SCHEMA: &str = "bertrand.equilibrium/1";
pub const CONVERGENCE_SCHEMA: &str = "bertrand.convergence/1";
pub const SUMMARY_SCHEMA: &str = "bertrand.summary/1";
pub const RESIDUAL_SCHEMA: &str = "bertrand.residuals/1";
pub const ASYMPTOTIC_SCHEMA: &str = "bertrand.asymptotic/1";
pub const ASYMPTOTIC_HEADER: [&str; 8] = ["x1", "x2", "v1_first", "v2_first", "v1_second", "v2_second", "v1", "v2"];

#[derive(Default)]
pub struct Outputs {
    pub files: Vec<(String, Vec<u8>)>,
    /// Printed to stderr even under --quiet.
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

impl Outputs {
    fn json<T: Serialize>(&mut self, name: &str, value: &T) {
        let mut bytes = serde_json::to_vec_pretty(value).expect("plain data serializes");
        bytes.push(b'\n');
        self.files.push((name.to_string(), bytes));
    }

    fn csv(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) {
        let mut bytes = Vec::new();
        write(&mut bytes).expect("writing to memory");
        self.files.push((name.to_string(), bytes));
    }
}

#[derive(Serialize)]
struct EquilibriumReport<'a> {
    schema: &'a str,
    costs: Vec<f64>,
    prices: Vec<f64>,
    demands: Vec<f64>,
    profits: Vec<f64>,
    #[serde(rename = "type")]
    eq_type: &'a str,
    /// Cost-plane region; two-firm markets only.
    region: Option<&'a str>,
}

pub fn cmd_static(cfg: &RunConfig) -> CliResult<Outputs> {
    let Some(section) = &cfg.static_game else {
        return config_err("missing [static] section");
    };
    let costs = CostVector::new(&section.costs)?;
    let params = cfg.demand_params(section.costs.len())?;
    let eq = solve_nash(&params, &costs)?;
    let mut out = Outputs::default();
    out.notes.push(format!("{} equilibrium, prices {:?}", eq.eq_type.tag(), eq.prices));
    out.json(
        "equilibrium.json",
        &EquilibriumReport {
            schema: EQUILIBRIUM_SCHEMA,
            costs: section.costs.clone(),
            prices: eq.prices.clone(),
            demands: eq.demands.clone(),
            profits: eq.profits.clone(),
            eq_type: eq.eq_type.tag(),
            region: region_of(&eq).map(|r| r.tag()),
        },
    );
    Ok(out)
}

#[derive(Serialize)]
struct Convergence<'a> {
    schema: &'a str,
    iterations: usize,
    final_residual: f64,
    tol: f64,
    nodes: usize,
    x_max: f64,
    zero_demand_nodes: usize,
}

pub fn cmd_monopoly(cfg: &RunConfig) -> CliResult<Outputs> {
    let default = Default::default();
    let section = cfg.monopoly.as_ref().unwrap_or(&default);
    let model = cfg.monopoly_model()?;
    if section.nodes < 2 || !(section.x_max > 0.0) {
        return config_err("[monopoly] needs nodes >= 2 and x_max > 0");
    }
    let sigma = match section.sigma {
        Some(s) => s,
        None => cfg.market()?.sigma1,
    };
    if !(sigma >= 0.0) {
        return config_err("[monopoly] sigma must be non-negative");
    }

    let x: Vec<f64> = (0..section.nodes).map(|k| section.x_max * k as f64 / (section.nodes - 1) as f64).collect();
    let closed = MonopolyCurve {
        v: x.iter().map(|&x| model.value(x)).collect(),
        v_prime: x.iter().map(|&x| model.marginal_value(x)).collect(),
        price: x.iter().map(|&x| model.policy(x).0).collect(),
        demand: x.iter().map(|&x| model.policy(x).1).collect(),
        x,
        sigma: 0.0,
        iterations: 0,
        residual: 0.0,
    };
    let mut out = Outputs::default();
    out.csv("monopoly_closed.csv", |w| output::write_monopoly(w, &closed));
    if sigma > 0.0 {
        let curve = solve_monopoly_numeric(&model, sigma, section.x_max, section.nodes)?;
        out.notes.push(format!("noisy monopoly: {} iterations, residual {:e}", curve.iterations, curve.residual));
        out.csv("monopoly_noisy.csv", |w| output::write_monopoly(w, &curve));
        out.json(
            "convergence.json",
            &Convergence {
                schema: CONVERGENCE_SCHEMA,
                iterations: curve.iterations,
                final_residual: curve.residual,
                tol: 0.0,
                nodes: section.nodes,
                x_max: section.x_max,
                zero_demand_nodes: 0,
            },
        );
    }
    Ok(out)
}

fn solve_surfaces(cfg: &RunConfig, out: &mut Outputs) -> CliResult<ValueSurfacePair> {
    let (params, grid, solver) = cfg.hjb_setup()?;
    let s = solve_duopoly(&params, &grid, &solver)?;
    out.notes.push(format!("HJB: {} sweeps, residual {:e}", s.iterations, s.final_residual));
    if s.zero_demand_nodes > 0 {
        out.warnings.push(format!("{} interior nodes have a firm with zero demand", s.zero_demand_nodes));
    }
    out.json(
        "convergence.json",
        &Convergence {
            schema: CONVERGENCE_SCHEMA,
            iterations: s.iterations,
            final_residual: s.final_residual,
            tol: solver.tol,
            nodes: grid.n1(),
            x_max: grid.x_max(),
            zero_demand_nodes: s.zero_demand_nodes,
        },
    );
    Ok(s)
}

pub fn cmd_hjb(cfg: &RunConfig) -> CliResult<Outputs> {
    let mut out = Outputs::default();
    let s = solve_surfaces(cfg, &mut out)?;
    out.csv("surfaces.csv", |w| output::write_surfaces(w, &s));
    Ok(out)
}

pub fn cmd_theta_slice(cfg: &RunConfig) -> CliResult<Outputs> {
    let default = Default::default();
    let section = cfg.theta_slice.as_ref().unwrap_or(&default);
    // Cheap checks first so a bad slice does not cost a full solve.
    if !(section.radius > 0.0) || section.samples < 2 {
        return config_err("[theta_slice] needs radius > 0 and samples >= 2");
    }
    let mut out = Outputs::default();
    let s = solve_surfaces(cfg, &mut out)?;
    let slice = theta_slice(&s, section.radius, section.samples)?;
    out.csv("theta_slice.csv", |w| output::write_theta_slice(w, &slice));
    Ok(out)
}

#[derive(Serialize)]
struct ResidualReport<'a> {
    schema: &'a str,
    form: &'a str,
    h: f64,
    points: usize,
    first_order_max: f64,
    second_order_max: [f64; 2],
}

pub fn cmd_asymptotic(cfg: &RunConfig) -> CliResult<Outputs> {
    let default = Default::default();
    let section = cfg.asymptotic.as_ref().unwrap_or(&default);
    let model = cfg.monopoly_model()?;
    let gamma = cfg.greek()?.gamma();
    if section.nodes < 3 || !(section.x_max > 0.0) {
        return config_err("[asymptotic] needs nodes >= 3 and x_max > 0");
    }
    let spacing = section.x_max / (section.nodes - 1) as f64;
    if !(section.h > 0.0 && 2.0 * section.h < spacing) {
        return config_err("[asymptotic] h must be positive and below half the node spacing");
    }
    let form = section.form.form();
    let expansion = Expansion::new(model, gamma, form)?;
    let n = section.nodes;
    let x = |k: usize| spacing * k as f64;

    let mut rows = Vec::with_capacity(n * n);
    let (mut r1, mut r2, mut points) = (0.0f64, [0.0f64; 2], 0);
    for i in 0..n {
        for j in 0..n {
            let (x1, x2) = (x(i), x(j));
            rows.push([
                x1,
                x2,
                v1_correction(&model, x1, x2),
                v1_correction(&model, x2, x1),
                v2_of(form, &model, x1, x2, Firm::One),
                v2_of(form, &model, x1, x2, Firm::Two),
                expansion.value(x1, x2, Firm::One, 2),
                expansion.value(x1, x2, Firm::Two, 2),
            ]);
            if i > 0 && j > 0 {
                points += 1;
                r1 = r1.max(first_order_residual(&model, x1, x2, section.h).abs());
                for f in Firm::both() {
                    let r = second_order_residual(&model, x1, x2, f, form, section.h).abs();
                    r2[f.index()] = r2[f.index()].max(r);
                }
            }
        }
    }
    let mut out = Outputs::default();
    out.notes.push(format!("residuals: first order {r1:e}, second order {:e} / {:e}", r2[0], r2[1]));
    out.csv("asymptotic.csv", |w| write_table(w, ASYMPTOTIC_SCHEMA, &ASYMPTOTIC_HEADER, rows));
    out.json(
        "residuals.json",
        &ResidualReport {
            schema: RESIDUAL_SCHEMA,
            form: match section.form {
                crate::config::FormName::Published => "published",
                crate::config::FormName::Consistent => "consistent",
            },
            h: section.h,
            points,
            first_order_max: r1,
            second_order_max: r2,
        },
    );
    Ok(out)
}

#[derive(Serialize)]
struct DeterministicRun {
    gamma: f64,
    absorption_time1: Option<f64>,
    absorption_time2: Option<f64>,
    steps: usize,
    extrapolated_steps: usize,
}

#[derive(Serialize)]
struct Absorption {
    absorbed: usize,
    mean: Option<f64>,
    quantile_levels: [f64; 5],
    quantiles: Option<[f64; 5]>,
}

impl From<&AbsorptionStats> for Absorption {
    fn from(a: &AbsorptionStats) -> Self {
        Absorption {
            absorbed: a.absorbed,
            mean: a.mean,
            quantile_levels: bertrand_core::simulate::QUANTILE_LEVELS,
            quantiles: a.quantiles,
        }
    }
}

#[derive(Serialize)]
#[serde(untagged)]
enum SimulationReport<'a> {
    Deterministic {
        schema: &'a str,
        mode: &'a str,
        policy: &'a str,
        x0: [f64; 2],
        dt: f64,
        t_max: f64,
        runs: Vec<DeterministicRun>,
    },
    Stochastic {
        schema: &'a str,
        mode: &'a str,
        policy: &'a str,
        x0: [f64; 2],
        dt: f64,
        t_max: f64,
        gamma: f64,
        rng: &'a str,
        base_seed: u64,
        n_paths: usize,
        absorption: [Absorption; 2],
        terminal_mean: [f64; 2],
        terminal_std: [f64; 2],
        firm1_first: usize,
        firm2_first: usize,
    },
}

fn policy_tag(p: PolicyName) -> &'static str {
    match p {
        PolicyName::Expansion => "expansion",
        PolicyName::Surface => "surface",
    }
}

pub fn cmd_simulate(cfg: &RunConfig, seed_flag: Option<u64>) -> CliResult<Outputs> {
    let Some(sim) = &cfg.simulate else {
        return config_err("missing [simulate] section");
    };
    if !(sim.dt > 0.0 && sim.t_max > 0.0) || sim.x0.iter().any(|&x| !(x >= 0.0)) {
        return config_err("[simulate] needs dt > 0, t_max > 0 and non-negative x0");
    }
    if !(1..=2).contains(&sim.order) {
        return config_err("[simulate] order must be 1 or 2");
    }
    let base = cfg.greek()?;
    let mut out = Outputs::default();

    // Policy for one gamma. The surface policy solves the HJB problem once.
    let make_policy = |gamma: f64, out: &mut Outputs| -> CliResult<Box<dyn PolicySource>> {
        match sim.policy {
            PolicyName::Expansion => Ok(Box::new(AsymptoticPolicy::new(
                cfg.monopoly_model()?,
                gamma,
                sim.form.form(),
                PolicyMode::StaticGame,
                sim.order,
            )?)),
            PolicyName::Surface => {
                if gamma != base.gamma() {
                    return config_err("gammas sweeps need the expansion policy");
                }
                let s = solve_surfaces(cfg, out)?;
                Ok(Box::new(SurfacePolicy::new(s, &cfg.noisy_game()?)))
            }
        }
    };

    match sim.mode {
        SimMode::Deterministic => {
            if seed_flag.is_some() || sim.seed.is_some() {
                return config_err("a seed only applies to stochastic simulation");
            }
            let gammas = sim.gammas.clone().unwrap_or_else(|| vec![base.gamma()]);
            if gammas.is_empty() {
                return config_err("[simulate] gammas is empty");
            }
            for &g in &gammas {
                base.with_gamma(g)?;
            }
            let mut runs = Vec::new();
            for (k, &g) in gammas.iter().enumerate() {
                let policy = make_policy(g, &mut out)?;
                let path = deterministic_path(policy.as_ref(), sim.x0, sim.dt, sim.t_max)?;
                if path.extrapolated_steps > 0 {
                    out.warnings.push(format!("gamma {g}: {} steps outside the policy data", path.extrapolated_steps));
                }
                out.notes.push(format!("gamma {g}: depletion times {:?} {:?}", path.absorption_time1, path.absorption_time2));
                let name = if gammas.len() == 1 { "path.csv".to_string() } else { format!("path_{k:02}.csv") };
                out.csv(&name, |w| output::write_path(w, &path));
                runs.push(DeterministicRun {
                    gamma: g,
                    absorption_time1: path.absorption_time1,
                    absorption_time2: path.absorption_time2,
                    steps: path.len() - 1,
                    extrapolated_steps: path.extrapolated_steps,
                });
            }
            out.json(
                "summary.json",
                &SimulationReport::Deterministic {
                    schema: SUMMARY_SCHEMA,
                    mode: "deterministic",
                    policy: policy_tag(sim.policy),
                    x0: sim.x0,
                    dt: sim.dt,
                    t_max: sim.t_max,
                    runs,
                },
            );
        }
        SimMode::Stochastic => {
            if sim.gammas.is_some() {
                return config_err("gammas applies to deterministic simulation only");
            }
            if sim.paths == 0 || sim.write_paths > sim.paths {
                return config_err("[simulate] needs paths >= 1 and write_paths <= paths");
            }
            let params = cfg.game()?;
            let seed = seed_flag.or(sim.seed).unwrap_or(0);
            let policy = make_policy(base.gamma(), &mut out)?;
            let mut extrapolated = 0;
            for k in 0..sim.write_paths {
                let s = seed.wrapping_add(k as u64);
                let path = stochastic_path(policy.as_ref(), &params, sim.x0, sim.dt, sim.t_max, s)?;
                extrapolated += path.extrapolated_steps;
                out.csv(&format!("path_{s}.csv"), |w| output::write_path(w, &path));
            }
            if extrapolated > 0 {
                out.warnings.push(format!("{extrapolated} steps of the written paths fell outside the policy data"));
            }
            let b = batch_simulate(policy.as_ref(), &params, sim.x0, sim.dt, sim.t_max, sim.paths, seed)?;
            out.notes.push(format!(
                "{} paths: firm 1 sold out on {}, firm 2 on {}",
                b.n_paths, b.absorption[0].absorbed, b.absorption[1].absorbed
            ));
            out.json(
                "summary.json",
                &SimulationReport::Stochastic {
                    schema: SUMMARY_SCHEMA,
                    mode: "stochastic",
                    policy: policy_tag(sim.policy),
                    x0: sim.x0,
                    dt: sim.dt,
                    t_max: sim.t_max,
                    gamma: base.gamma(),
                    rng: RNG_NAME,
                    base_seed: b.base_seed,
                    n_paths: b.n_paths,
                    absorption: [(&b.absorption[0]).into(), (&b.absorption[1]).into()],
                    terminal_mean: b.terminal_mean,
                    terminal_std: b.terminal_std,
                    firm1_first: b.firm1_first,
                    firm2_first: b.firm2_first,
                },
            );
        }
    }
    Ok(out)
}

/// Rejects `--seed` outside simulation.
pub fn no_seed(seed: Option<u64>) -> CliResult<()> {
    match seed {
        Some(_) => Err(CliError::Config("--seed only applies to simulate".into())),
        None => Ok(()),
    }
}
