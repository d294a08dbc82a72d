//! Run configuration. One TOML file per run; unknown keys are errors.
//!
//! ```toml
//! [demand]          # either alpha/beta/gamma or a/b/c
//! alpha = 6.0
//! beta = 1.0
//! gamma = 0.4
//!
//! [market]
//! r = 1.0
//! sigma1 = 0.6
//! sigma2 = 0.6
//! rho = 0.1
//!
//! [hjb]
//! x_max = 20.0
//! nodes = 129
//! ```

use std::path::Path;

use bertrand_core::asymptotics::SecondOrder;
use bertrand_core::demand::{abc_from_greek, greek_from_abc, DemandParams, GreekParams};
use bertrand_core::hjb::{GameParams, Grid2D, SolverConfig};
use bertrand_core::monopoly::MonopolyModel;
use serde::Deserialize;

use crate::error::{config_err, CliError, CliResult};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub demand: DemandSection,
    pub market: Option<MarketSection>,
    #[serde(rename = "static")]
    pub static_game: Option<StaticSection>,
    pub monopoly: Option<MonopolySection>,
    pub hjb: Option<HjbSection>,
    pub asymptotic: Option<AsymptoticSection>,
    pub simulate: Option<SimulateSection>,
    pub theta_slice: Option<ThetaSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSection {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSection {
    pub r: f64,
    #[serde(default)]
    pub sigma1: f64,
    #[serde(default)]
    pub sigma2: f64,
    #[serde(default)]
    pub rho: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticSection {
    pub costs: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonopolySection {
    pub x_max: f64,
    pub nodes: usize,
    /// Noise level for the numeric solve; defaults to the market's sigma1.
    pub sigma: Option<f64>,
}

impl Default for MonopolySection {
    fn default() -> Self {
        Self { x_max: 20.0, nodes: 401, sigma: None }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HjbSection {
    pub x_max: f64,
    pub nodes: usize,
    pub tol: f64,
    pub max_iters: usize,
    pub damping: f64,
}

impl Default for HjbSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self { x_max: 20.0, nodes: 129, tol: d.tol, max_iters: d.max_iters, damping: d.damping }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum FormName {
    Published,
    Consistent,
}

impl FormName {
    pub fn form(self) -> SecondOrder {
        match self {
            FormName::Published => SecondOrder::Published,
            FormName::Consistent => SecondOrder::Consistent,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AsymptoticSection {
    pub x_max: f64,
    pub nodes: usize,
    pub form: FormName,
    /// Step of the finite-difference residuals.
    pub h: f64,
}

impl Default for AsymptoticSection {
    fn default() -> Self {
        Self { x_max: 10.0, nodes: 41, form: FormName::Consistent, h: 1e-4 }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SimMode {
    Deterministic,
    Stochastic,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum PolicyName {
    /// Static game on the expanded shadow costs.
    Expansion,
    /// Policies read off an HJB solve configured by `[hjb]`.
    Surface,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub mode: SimMode,
    #[serde(default = "default_policy")]
    pub policy: PolicyName,
    pub x0: [f64; 2],
    pub dt: f64,
    pub t_max: f64,
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default = "default_form")]
    pub form: FormName,
    /// Deterministic mode only: run once per gamma instead of the demand's.
    pub gammas: Option<Vec<f64>>,
    #[serde(default = "default_paths")]
    pub paths: usize,
    /// How many stochastic paths to write out in full.
    #[serde(default = "default_write_paths")]
    pub write_paths: usize,
    pub seed: Option<u64>,
}

fn default_policy() -> PolicyName {
    PolicyName::Expansion
}
fn default_order() -> usize {
    2
}
fn default_form() -> FormName {
    FormName::Consistent
}
fn default_paths() -> usize {
    1
}
fn default_write_paths() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThetaSection {
    pub radius: f64,
    pub samples: usize,
}

impl Default for ThetaSection {
    fn default() -> Self {
        Self { radius: 10.0, samples: 201 }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("reading {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Demand for a market of `n` firms.
    pub fn demand_params(&self, n: usize) -> CliResult<DemandParams> {
        Ok(match self.demand.resolve()? {
            Parameterization::Greek(g) => abc_from_greek(&g, n)?,
            Parameterization::Abc { a, b, c } => DemandParams::new(a, b, c, n)?,
        })
    }

    /// Greek form of the two-firm market.
    pub fn greek(&self) -> CliResult<GreekParams> {
        Ok(match self.demand.resolve()? {
            Parameterization::Greek(g) => g,
            Parameterization::Abc { a, b, c } => greek_from_abc(&DemandParams::new(a, b, c, 2)?),
        })
    }

    pub fn market(&self) -> CliResult<&MarketSection> {
        match &self.market {
            Some(m) => Ok(m),
            None => config_err("missing [market] section"),
        }
    }

    pub fn game(&self) -> CliResult<GameParams> {
        let m = self.market()?;
        Ok(GameParams::new(self.greek()?, m.r, m.sigma1, m.sigma2, m.rho)?)
    }

    /// Game for an HJB solve; both firms need noise.
    pub fn noisy_game(&self) -> CliResult<GameParams> {
        let g = self.game()?;
        if !(g.sigma1() > 0.0 && g.sigma2() > 0.0) {
            return config_err("the HJB solver needs sigma1 > 0 and sigma2 > 0");
        }
        Ok(g)
    }

    pub fn monopoly_model(&self) -> CliResult<MonopolyModel> {
        let g = self.greek()?;
        Ok(MonopolyModel::new(g.alpha(), g.beta(), self.market()?.r)?)
    }

    pub fn hjb_setup(&self) -> CliResult<(GameParams, Grid2D, SolverConfig)> {
        let default = HjbSection::default();
        let h = self.hjb.as_ref().unwrap_or(&default);
        let grid = Grid2D::new(h.x_max, h.nodes, h.nodes)?;
        if !(h.tol > 0.0) || h.max_iters == 0 || !(h.damping > 0.0 && h.damping <= 1.0) {
            return config_err("[hjb] needs tol > 0, max_iters >= 1 and damping in (0, 1]");
        }
        let cfg = SolverConfig { tol: h.tol, max_iters: h.max_iters, damping: h.damping };
        Ok((self.noisy_game()?, grid, cfg))
    }
}

pub enum Parameterization {
    Greek(GreekParams),
    Abc { a: f64, b: f64, c: f64 },
}

impl DemandSection {
    pub fn resolve(&self) -> CliResult<Parameterization> {
        let greek = [self.alpha, self.beta, self.gamma];
        let abc = [self.a, self.b, self.c];
        let any = |v: &[Option<f64>]| v.iter().any(Option::is_some);
        let all = |v: &[Option<f64>]| v.iter().all(Option::is_some);
        match (any(&greek), any(&abc)) {
            (true, true) => config_err("[demand] mixes alpha/beta/gamma with a/b/c"),
            (false, false) => config_err("[demand] needs alpha/beta/gamma or a/b/c"),
            (true, false) if all(&greek) => Ok(Parameterization::Greek(GreekParams::new(
                self.alpha.unwrap(),
                self.beta.unwrap(),
                self.gamma.unwrap(),
            )?)),
            (false, true) if all(&abc) => {
                Ok(Parameterization::Abc { a: self.a.unwrap(), b: self.b.unwrap(), c: self.c.unwrap() })
            }
            _ => config_err("[demand] parameter set is incomplete"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn greek_and_abc_agree() {
        let g = RunConfig::parse("[demand]\nalpha = 6.0\nbeta = 1.0\ngamma = 0.5\n").unwrap();
        let p = g.demand_params(2).unwrap();
        let text = format!("[demand]\na = {}\nb = {}\nc = {}\n", p.a(), p.b(), p.c());
        let back = RunConfig::parse(&text).unwrap().greek().unwrap();
        assert!((back.alpha() - 6.0).abs() < 1e-12);
        assert!((back.gamma() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn parameterization_must_be_unique_and_complete() {
        for text in [
            "[demand]\nalpha = 6.0\nbeta = 1.0\ngamma = 0.5\na = 1.0\n",
            "[demand]\nalpha = 6.0\nbeta = 1.0\n",
            "[demand]\n",
        ] {
            let cfg = RunConfig::parse(text).unwrap();
            assert!(matches!(cfg.greek(), Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::parse("[demand]\nalpha = 6.0\nbeta = 1.0\ngama = 0.5\n").is_err());
        assert!(RunConfig::parse("[demand]\nalpha = 6.0\nbeta = 1.0\ngamma = 0.5\n[extra]\n").is_err());
    }

    #[test]
    fn hjb_defaults() {
        let h = HjbSection::default();
        assert_eq!((h.x_max, h.nodes), (20.0, 129));
    }
}
