use std::fmt;
use std::path::PathBuf;

use clap::ValueEnum;
use gkp_repeater::gkp::{sigma_from_db, HardwareParams};
use gkp_repeater::link::{Accuracy, Segment};
use gkp_repeater::planner::{discard_window_for, DeviceSpec, DEFAULT_N_PER_KM, DEFAULT_SUCCESS_THRESHOLD, SPACING_GRID};
use gkp_repeater::ModelError;
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u64 = 1;

/// A configuration problem, located by its field path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { path: path.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl std::error::Error for ConfigError {}

/// Maps a model validation error raised for the block at `block`.
fn at(block: &str, e: ModelError) -> ConfigError {
    match e {
        ModelError::InvalidParameter { name, reason } => ConfigError::new(format!("{block}.{name}"), reason),
        ModelError::EmptyWindow { .. } => ConfigError::new(format!("{block}.v"), e.to_string()),
        other => ConfigError::new(block, other.to_string()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

/// Number or the string "auto".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Window {
    Auto(AutoTag),
    Fixed(f64),
}

impl Default for Window {
    fn default() -> Self {
        Window::Auto(AutoTag::Auto)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Workers {
    Auto(AutoTag),
    Count(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Postselect,
    SingleChain,
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    MinRate,
    Plob,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardwareConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_gkp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub squeezing_db: Option<f64>,
    pub eta_d: f64,
    pub k: usize,
    #[serde(default)]
    pub v: Window,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacing_km: Option<f64>,
    /// Spacings swept by the planner; the full grid when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacings_km: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_tot_km: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distances_km: Option<Vec<f64>>,
    pub n_per_km: u32,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig { spacing_km: None, spacings_km: None, l_tot_km: None, distances_km: None, n_per_km: DEFAULT_N_PER_KM }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AccuracyConfig {
    pub b: f64,
    pub h: f64,
    pub initial_trials: u64,
    pub min_trials: u64,
    pub max_trials: u64,
    /// Fixed trial count; overrides the adaptive loop.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
}

impl Default for AccuracyConfig {
    fn default() -> Self {
        let a = Accuracy::default();
        AccuracyConfig {
            b: a.b,
            h: a.h,
            initial_trials: a.initial_trials,
            min_trials: a.min_trials,
            max_trials: a.max_trials,
            trials: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerConfig {
    pub threshold: f64,
    pub criterion: Criterion,
    pub min_rate: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig { threshold: DEFAULT_SUCCESS_THRESHOLD, criterion: Criterion::MinRate, min_rate: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy>,
    pub c: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_values: Option<Vec<usize>>,
    /// Also simulate the per-repeater error for the analytic comparison.
    pub simulate: bool,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig { strategy: None, c: gkp_repeater::baselines::DEFAULT_ANALYTIC_EXPONENT, k_values: None, simulate: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<Format>,
}

/// Contents of the `--config` file. Worker count and output location do not
/// affect results and are left out when the config is echoed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub hardware: HardwareConfig,
    #[serde(default)]
    pub chain: ChainConfig,
    #[serde(default)]
    pub accuracy: AccuracyConfig,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub baseline: BaselineConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing)]
    pub workers: Option<Workers>,
    #[serde(default, skip_serializing)]
    pub output: Option<OutputConfig>,
}

pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::new(if path == "." { "config".to_string() } else { path }, e.into_inner().to_string())
    })
}

/// A validated configuration with derived model inputs.
#[derive(Debug, Clone)]
pub struct Resolved {
    /// Echoed in every output; re-running from it reproduces the result.
    pub config: RunConfig,
    pub seed: u64,
    pub sigma_gkp: f64,
    pub device: DeviceSpec,
    pub accuracy: Accuracy,
    /// False when a fixed trial count replaces the accuracy target.
    pub adaptive: bool,
}

fn positive(path: &str, x: f64) -> Result<(), ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(path, format!("{x} is not a positive number")))
    }
}

impl Resolved {
    pub fn new(mut config: RunConfig, seed_override: Option<u64>, strategy_override: Option<Strategy>) -> Result<Self, ConfigError> {
        let seed = seed_override.or(config.seed).unwrap_or(DEFAULT_SEED);
        config.seed = Some(seed);
        if strategy_override.is_some() {
            config.baseline.strategy = strategy_override;
        }

        let hw = &config.hardware;
        let sigma_gkp = match (hw.sigma_gkp, hw.squeezing_db) {
            (Some(s), None) => s,
            (None, Some(db)) => {
                positive("hardware.squeezing_db", db)?;
                sigma_from_db(db)
            }
            _ => return Err(ConfigError::new("hardware", "exactly one of sigma_gkp and squeezing_db is required")),
        };
        let v = match hw.v {
            Window::Fixed(v) => Some(v),
            Window::Auto(_) => None,
        };
        HardwareParams::new(sigma_gkp, hw.eta_d, hw.k, v.unwrap_or(0.0)).map_err(|e| at("hardware", e))?;
        let device = DeviceSpec { sigma_gkp, eta_d: hw.eta_d, k: hw.k, v };

        let chain = &config.chain;
        if chain.n_per_km == 0 {
            return Err(ConfigError::new("chain.n_per_km", "must be at least 1"));
        }
        if let Some(l) = chain.spacing_km {
            positive("chain.spacing_km", l)?;
            Segment::new(l, chain.n_per_km).map_err(|e| at("chain", e))?;
        }
        if let Some(ls) = &chain.spacings_km {
            if ls.is_empty() {
                return Err(ConfigError::new("chain.spacings_km", "must not be empty"));
            }
            for (i, &l) in ls.iter().enumerate() {
                let path = format!("chain.spacings_km[{i}]");
                discard_window_for(l).map_err(|e| ConfigError::new(&path, e.to_string()))?;
                Segment::new(l, chain.n_per_km).map_err(|e| ConfigError::new(&path, e.to_string()))?;
            }
        }
        if chain.l_tot_km.is_some() && chain.distances_km.is_some() {
            return Err(ConfigError::new("chain", "give l_tot_km or distances_km, not both"));
        }
        if let Some(d) = chain.l_tot_km {
            positive("chain.l_tot_km", d)?;
        }
        if let Some(ds) = &chain.distances_km {
            if ds.is_empty() {
                return Err(ConfigError::new("chain.distances_km", "must not be empty"));
            }
            for (i, &d) in ds.iter().enumerate() {
                positive(&format!("chain.distances_km[{i}]"), d)?;
            }
        }

        let a = &config.accuracy;
        let accuracy = match a.trials {
            Some(n) => Accuracy { b: a.b, h: a.h, initial_trials: n, min_trials: n, max_trials: n },
            None => Accuracy {
                b: a.b,
                h: a.h,
                initial_trials: a.initial_trials,
                min_trials: a.min_trials,
                max_trials: a.max_trials,
            },
        };
        accuracy.validate().map_err(|e| match e {
            ModelError::InvalidParameter { name, reason } => {
                let field = if a.trials.is_some() && name == "max_trials" { "trials" } else { name };
                ConfigError::new(format!("accuracy.{field}"), reason)
            }
            other => ConfigError::new("accuracy", other.to_string()),
        })?;

        let p = &config.planner;
        if !(p.threshold > 0.0 && p.threshold < 1.0) {
            return Err(ConfigError::new("planner.threshold", format!("{} is not in (0, 1)", p.threshold)));
        }
        positive("planner.min_rate", p.min_rate)?;

        let b = &config.baseline;
        if !(b.c > 2.0 && b.c < 3.0) {
            return Err(ConfigError::new("baseline.c", format!("{} is not in (2, 3)", b.c)));
        }
        if let Some(ks) = &b.k_values {
            if ks.is_empty() || ks.contains(&0) {
                return Err(ConfigError::new("baseline.k_values", "must be a non-empty list of positive integers"));
            }
        }

        let adaptive = config.accuracy.trials.is_none();
        Ok(Resolved { config, seed, sigma_gkp, device, accuracy, adaptive })
    }

    pub fn spacing(&self) -> Result<f64, ConfigError> {
        self.config.chain.spacing_km.ok_or_else(|| ConfigError::new("chain.spacing_km", "required by this subcommand"))
    }

    /// Spacings to sweep: the configured list, else the full grid.
    pub fn spacings(&self) -> Vec<f64> {
        self.config.chain.spacings_km.clone().unwrap_or_else(|| SPACING_GRID.to_vec())
    }

    /// Distances to evaluate, with the path of each for diagnostics.
    pub fn distances(&self) -> Result<Vec<(String, f64)>, ConfigError> {
        let c = &self.config.chain;
        match (&c.distances_km, c.l_tot_km) {
            (Some(ds), _) => Ok(ds.iter().enumerate().map(|(i, &d)| (format!("chain.distances_km[{i}]"), d)).collect()),
            (None, Some(d)) => Ok(vec![("chain.l_tot_km".to_string(), d)]),
            (None, None) => Err(ConfigError::new("chain", "one of l_tot_km or distances_km is required")),
        }
    }

    /// Hardware at one spacing, resolving an automatic window.
    pub fn hardware_at(&self, spacing_km: f64, path: &str) -> Result<HardwareParams, ConfigError> {
        self.device.at(spacing_km).map_err(|e| match e {
            ModelError::OffGrid(_) => ConfigError::new(path, format!("{e}; set hardware.v to a number to use it")),
            other => at("hardware", other),
        })
    }
}
