//! TOML experiment files.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::error::HarnessError;
use super::scenario::Scenario;
use crate::model::RunConfig;
use crate::scheduler::Policy;

/// Run parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    V,
    Beta,
    Epsilon,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::V => "v",
            Axis::Beta => "beta",
            Axis::Epsilon => "epsilon",
        }
    }

    pub fn apply(self, base: &RunConfig, value: f64) -> RunConfig {
        let mut cfg = base.clone();
        match self {
            Axis::V => cfg.v = value,
            Axis::Beta => cfg.beta = value,
            Axis::Epsilon => cfg.epsilon = value,
        }
        cfg
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "v" | "V" => Ok(Axis::V),
            "beta" => Ok(Axis::Beta),
            "epsilon" => Ok(Axis::Epsilon),
            other => Err(HarnessError::Config(format!("unknown axis `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
    /// Overrides the experiment's policy list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policies: Option<Vec<Policy>>,
}

/// Regret-over-time grid: one curve per `(β, V)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSpec {
    pub v: Vec<f64>,
    pub beta: Vec<f64>,
    #[serde(default = "default_curve_policy")]
    pub policy: Policy,
    /// Number of log-spaced checkpoints.
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_curve_policy() -> Policy {
    Policy::Lasac
}

fn default_points() -> usize {
    40
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: default_dir() }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("results")
}

fn default_policies() -> Vec<Policy> {
    vec![Policy::Lasac, Policy::Gs, Policy::Random, Policy::Jsq]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub run: RunConfig,
    #[serde(default = "default_policies")]
    pub policies: Vec<Policy>,
    #[serde(default)]
    pub sweeps: Vec<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curves: Option<CurveSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.scenario.validate()?;
        self.run.validate()?;
        if self.policies.is_empty() {
            return Err(HarnessError::Config("policy list is empty".into()));
        }
        for s in &self.sweeps {
            if s.values.is_empty() {
                return Err(HarnessError::EmptyAxis(s.axis.name().into()));
            }
            for &v in &s.values {
                s.axis.apply(&self.run, v).validate()?;
            }
        }
        if let Some(c) = &self.curves {
            if c.v.is_empty() || c.beta.is_empty() {
                return Err(HarnessError::EmptyAxis("curves".into()));
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str, path: &Path) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }
}
