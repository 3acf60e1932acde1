//! Experiment configuration. TOML, one file per run, unknown keys rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use tow_core::game::GameMode;
use tow_core::solver::{DppParams, NSystem};
use tow_core::{Board, Domain, PayoffData};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub domain: Domain,
    pub payoff: PayoffData,
    pub grid: GridConfig,
    #[serde(default)]
    pub dpp: DppParams,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationConfig>,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_system: Option<NSystem>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub h: f64,
    pub epsilon: f64,
    /// Step sizes for `converge`, each solved with `h = eps * h / epsilon`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub epsilons: Vec<f64>,
}

impl GridConfig {
    pub fn h_ratio(&self) -> f64 {
        self.epsilon / self.h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum InitSeed {
    Lower,
    Upper,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveConfig {
    pub tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    pub init: InitSeed,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: None, init: InitSeed::Both }
    }
}

/// Built-in strategy names. On the command line `pull_to` takes its target
/// after a colon: `pull_to:1,0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategySpec {
    PullTo { target: Vec<f64> },
    GreedyMax,
    GreedyMin,
    StationaryRandom,
}

impl StrategySpec {
    pub fn needs_values(&self) -> bool {
        matches!(self, StrategySpec::GreedyMax | StrategySpec::GreedyMin)
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategySpec::PullTo { target } => {
                let t: Vec<String> = target.iter().map(|x| x.to_string()).collect();
                write!(f, "pull_to:{}", t.join(","))
            }
            StrategySpec::GreedyMax => f.write_str("greedy_max"),
            StrategySpec::GreedyMin => f.write_str("greedy_min"),
            StrategySpec::StationaryRandom => f.write_str("stationary_random"),
        }
    }
}

impl FromStr for StrategySpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once(':') {
            Some(("pull_to", target)) => Ok(StrategySpec::PullTo { target: parse_point(target)? }),
            None if s == "greedy_max" => Ok(StrategySpec::GreedyMax),
            None if s == "greedy_min" => Ok(StrategySpec::GreedyMin),
            None if s == "stationary_random" => Ok(StrategySpec::StationaryRandom),
            _ => Err(format!(
                "unknown strategy {s:?}; expected greedy_max, greedy_min, stationary_random or pull_to:<x,y,..>"
            )),
        }
    }
}

pub fn parse_point(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| format!("bad coordinate {t:?}: {e}"))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelChoice {
    /// Board-2 moves uniform in the continuous ball.
    #[default]
    Continuum,
    /// Board-2 moves to a uniform stencil node of the configured lattice.
    Lattice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub x0: Vec<f64>,
    pub board: u8,
    pub s1: StrategySpec,
    pub s2: StrategySpec,
    pub episodes: usize,
    pub seed: u64,
    #[serde(default = "full_mode")]
    pub mode: GameMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<usize>,
    #[serde(default)]
    pub kernel: KernelChoice,
    /// Also write every episode path to `traces.csv`.
    #[serde(default)]
    pub traces: bool,
}

fn full_mode() -> GameMode {
    GameMode::Full
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Kappa,
    Consistency,
    Reference,
    Convergence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub suites: Vec<Suite>,
    /// Dimensions for the kappa table.
    pub kappa_dims: Vec<usize>,
    pub kappa_samples: usize,
    pub kappa_tol: f64,
    /// Step ladder of the consistency suite; `h = eps / 8`.
    pub consistency_epsilons: Vec<f64>,
    /// Largest accepted ratio of successive residuals.
    pub consistency_ratio: f64,
    pub reference_mesh: usize,
    pub reference_tol: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            suites: vec![Suite::Kappa],
            kappa_dims: vec![1, 2, 3],
            kappa_samples: 1_000_000,
            kappa_tol: 1e-3,
            consistency_epsilons: vec![0.2, 0.1, 0.05],
            consistency_ratio: 0.75,
            reference_mesh: 4000,
            reference_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg = Self::parse(&text).with_context(|| format!("in {}", path.display()))?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        format!("{:x}", Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            bail!("schema_version: expected {SCHEMA_VERSION}, found {}", self.schema_version);
        }
        let domain = self.domain.clone().validated().context("domain")?;
        let dim = domain.dim();
        let g = &self.grid;
        if !(g.epsilon > 0.0 && g.h > 0.0) {
            bail!("grid: h and epsilon must be positive");
        }
        if g.h > g.epsilon / 4.0 * (1.0 + 1e-12) {
            bail!("grid.h: {} exceeds epsilon / 4 = {}", g.h, g.epsilon / 4.0);
        }
        if g.epsilons.iter().any(|e| !(*e > 0.0)) {
            bail!("grid.epsilons: entries must be positive");
        }
        for a in [self.dpp.mix_alpha_1, self.dpp.mix_alpha_2] {
            if !(0.0..=1.0).contains(&a) {
                bail!("dpp: mixing weight {a} outside [0, 1]");
            }
        }
        if !(self.solve.tol > 0.0) {
            bail!("solve.tol must be positive");
        }
        if let Some(sim) = &self.simulation {
            if sim.x0.len() != dim {
                bail!("simulation.x0: {} coordinates for a {dim}-dimensional domain", sim.x0.len());
            }
            if Board::from_number(sim.board).is_none() {
                bail!("simulation.board: {} is not 1 or 2", sim.board);
            }
            if sim.episodes < 2 {
                bail!("simulation.episodes: need at least 2");
            }
            for (name, s) in [("s1", &sim.s1), ("s2", &sim.s2)] {
                if let StrategySpec::PullTo { target } = s {
                    if target.len() != dim {
                        bail!("simulation.{name}.target: {} coordinates for a {dim}-dimensional domain", target.len());
                    }
                }
            }
        }
        let v = &self.verify;
        if v.kappa_dims.contains(&0) || v.kappa_samples < 2 || !(v.kappa_tol > 0.0) {
            bail!("verify: kappa_dims must be positive, kappa_samples >= 2, kappa_tol > 0");
        }
        if v.consistency_epsilons.len() < 2 {
            bail!("verify.consistency_epsilons: need at least two steps");
        }
        if let Some(sys) = &self.n_system {
            if sys.boards.is_empty() {
                bail!("n_system.boards: empty");
            }
        }
        Ok(())
    }
}
