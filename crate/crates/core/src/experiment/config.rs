use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    FasChe,
    FasCheEnhanced,
    Ls,
    Omp,
    /// Genie reference that returns the true channel.
    Perfect,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [
        EstimatorKind::FasChe,
        EstimatorKind::FasCheEnhanced,
        EstimatorKind::Ls,
        EstimatorKind::Omp,
        EstimatorKind::Perfect,
    ];

    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::FasChe => "fas-che",
            EstimatorKind::FasCheEnhanced => "fas-che-enhanced",
            EstimatorKind::Ls => "ls",
            EstimatorKind::Omp => "omp",
            EstimatorKind::Perfect => "perfect",
        }
    }

    pub fn is_iterative(self) -> bool {
        matches!(self, EstimatorKind::FasChe | EstimatorKind::FasCheEnhanced)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for EstimatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| format!("unknown estimator {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScheduleKind {
    /// Ports `(kM + m) mod N`: contiguous blocks, identical every trial.
    #[default]
    Sequential,
    /// Fresh uniformly random port sets per slot, drawn per trial.
    Random,
}

impl FromStr for ScheduleKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sequential" => Ok(ScheduleKind::Sequential),
            "random" => Ok(ScheduleKind::Random),
            _ => Err(format!("expected sequential or random, got {s:?}")),
        }
    }
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScheduleKind::Sequential => "sequential",
            ScheduleKind::Random => "random",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_ports: usize,
    pub n_chains: usize,
    pub n_slots: usize,
    pub sweep_count: usize,
    pub grid_size: usize,
    pub region_wavelengths: f64,
    pub n_clusters: usize,
    pub rays_per_cluster: usize,
    pub angle_spread_deg: f64,
    pub snr_db_list: Vec<f64>,
    pub estimators: Vec<EstimatorKind>,
    pub rho: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub trials: usize,
    pub base_seed: u64,
    pub schedule_kind: ScheduleKind,
    pub enforce_spacing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_ports: 64,
            n_chains: 4,
            n_slots: 8,
            sweep_count: 1,
            grid_size: 128,
            region_wavelengths: 3.5,
            n_clusters: 3,
            rays_per_cluster: 5,
            angle_spread_deg: 5.0,
            snr_db_list: vec![0.0, 10.0, 20.0],
            estimators: vec![
                EstimatorKind::FasChe,
                EstimatorKind::FasCheEnhanced,
                EstimatorKind::Ls,
                EstimatorKind::Omp,
            ],
            rho: 0.5,
            max_iterations: 100,
            tolerance: 1e-6,
            trials: 200,
            base_seed: 2024,
            schedule_kind: ScheduleKind::default(),
            enforce_spacing: false,
        }
    }
}

pub const CONFIG_KEYS: [&str; 18] = [
    "n_ports",
    "n_chains",
    "n_slots",
    "sweep_count",
    "grid_size",
    "region_wavelengths",
    "n_clusters",
    "rays_per_cluster",
    "angle_spread_deg",
    "snr_db_list",
    "estimators",
    "rho",
    "max_iterations",
    "tolerance",
    "trials",
    "base_seed",
    "schedule_kind",
    "enforce_spacing",
];

fn key_error(key: &str, reason: impl Into<String>) -> Error {
    Error::ConfigKey {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn scalar<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e: T::Err| key_error(key, format!("cannot parse {value:?}: {e}")))
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| scalar(key, s))
        .collect()
}

impl ExperimentConfig {
    /// Parses `key = value` lines over the defaults. `#` starts a comment,
    /// lists are comma separated, unknown and repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        let mut seen: Vec<&str> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected `key = value`, got {line:?}",
                    lineno + 1
                )));
            };
            let (key, value) = (key.trim(), value.trim());
            let Some(&known) = CONFIG_KEYS.iter().find(|k| **k == key) else {
                return Err(key_error(key, "unknown key"));
            };
            if seen.contains(&known) {
                return Err(key_error(key, "given more than once"));
            }
            seen.push(known);
            config.set(known, value)?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Renders every key in the accepted file format; `parse` reads it back.
    pub fn to_text(&self) -> String {
        let join = |v: Vec<String>| v.join(", ");
        let values: [String; 18] = [
            self.n_ports.to_string(),
            self.n_chains.to_string(),
            self.n_slots.to_string(),
            self.sweep_count.to_string(),
            self.grid_size.to_string(),
            self.region_wavelengths.to_string(),
            self.n_clusters.to_string(),
            self.rays_per_cluster.to_string(),
            self.angle_spread_deg.to_string(),
            join(self.snr_db_list.iter().map(f64::to_string).collect()),
            join(
                self.estimators
                    .iter()
                    .map(|e| e.label().to_string())
                    .collect(),
            ),
            self.rho.to_string(),
            self.max_iterations.to_string(),
            self.tolerance.to_string(),
            self.trials.to_string(),
            self.base_seed.to_string(),
            self.schedule_kind.to_string(),
            self.enforce_spacing.to_string(),
        ];
        CONFIG_KEYS
            .iter()
            .zip(values)
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "n_ports" => self.n_ports = scalar(key, value)?,
            "n_chains" => self.n_chains = scalar(key, value)?,
            "n_slots" => self.n_slots = scalar(key, value)?,
            "sweep_count" => self.sweep_count = scalar(key, value)?,
            "grid_size" => self.grid_size = scalar(key, value)?,
            "region_wavelengths" => self.region_wavelengths = scalar(key, value)?,
            "n_clusters" => self.n_clusters = scalar(key, value)?,
            "rays_per_cluster" => self.rays_per_cluster = scalar(key, value)?,
            "angle_spread_deg" => self.angle_spread_deg = scalar(key, value)?,
            "snr_db_list" => self.snr_db_list = list(key, value)?,
            "estimators" => self.estimators = list(key, value)?,
            "rho" => self.rho = scalar(key, value)?,
            "max_iterations" => self.max_iterations = scalar(key, value)?,
            "tolerance" => self.tolerance = scalar(key, value)?,
            "trials" => self.trials = scalar(key, value)?,
            "base_seed" => self.base_seed = scalar(key, value)?,
            "schedule_kind" => self.schedule_kind = scalar(key, value)?,
            "enforce_spacing" => self.enforce_spacing = scalar(key, value)?,
            _ => unreachable!("key list and setter out of sync"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: usize| {
            if v == 0 {
                Err(key_error(key, "must be at least 1"))
            } else {
                Ok(())
            }
        };
        if self.n_ports < 2 {
            return Err(key_error("n_ports", "need at least 2 ports"));
        }
        positive("n_chains", self.n_chains)?;
        if self.n_chains > self.n_ports {
            return Err(key_error("n_chains", "cannot exceed n_ports"));
        }
        positive("n_slots", self.n_slots)?;
        positive("sweep_count", self.sweep_count)?;
        if self.grid_size < 2 {
            return Err(key_error("grid_size", "need at least 2 grid points"));
        }
        if !(self.region_wavelengths.is_finite() && self.region_wavelengths > 0.0) {
            return Err(key_error("region_wavelengths", "must be positive"));
        }
        positive("n_clusters", self.n_clusters)?;
        positive("rays_per_cluster", self.rays_per_cluster)?;
        if !(self.angle_spread_deg.is_finite() && self.angle_spread_deg >= 0.0) {
            return Err(key_error("angle_spread_deg", "must be non-negative"));
        }
        if self.snr_db_list.is_empty() {
            return Err(key_error("snr_db_list", "must not be empty"));
        }
        if self
            .snr_db_list
            .iter()
            .any(|s| s.is_nan() || *s == f64::NEG_INFINITY)
        {
            return Err(key_error("snr_db_list", "values must be numbers or inf"));
        }
        if self.estimators.is_empty() {
            return Err(key_error("estimators", "must not be empty"));
        }
        if !(self.rho > 0.0 && self.rho <= 1.5) {
            return Err(key_error("rho", "must lie in (0, 1.5]"));
        }
        positive("max_iterations", self.max_iterations)?;
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(key_error("tolerance", "must be positive"));
        }
        positive("trials", self.trials)?;
        Ok(())
    }
}
