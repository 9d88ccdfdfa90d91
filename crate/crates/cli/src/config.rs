//! JSON experiment configurations, one record per command. Parsing is strict:
//! unknown keys are errors.

use std::path::{Path, PathBuf};

use matdiv_core::icl::{ErrorKind, TrainConfig};
use matdiv_core::{Method, PotentialSpec, TaskDistribution, Tolerance};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("reading config {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

/// Either an explicit list or an inclusive range `{"from", "to", "step"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<usize>),
    Range(RangeSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub from: usize,
    pub to: usize,
    #[serde(default = "one")]
    pub step: usize,
}

fn one() -> usize {
    1
}

impl Grid {
    pub fn values(&self, key: &str) -> Result<Vec<usize>, CliError> {
        let v = match self {
            Grid::List(v) => v.clone(),
            Grid::Range(r) => {
                if r.step == 0 || r.from > r.to {
                    return Err(CliError::Config(format!(
                        "{key}: range needs from <= to and step >= 1"
                    )));
                }
                (r.from..=r.to).step_by(r.step).collect()
            }
        };
        if v.is_empty() {
            return Err(CliError::Config(format!("{key}: grid is empty")));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    pub relative: f64,
    pub absolute: f64,
}

impl ToleranceConfig {
    pub fn build(tol: Option<Self>) -> Result<Tolerance, CliError> {
        match tol {
            None => Ok(Tolerance::default()),
            Some(t) => Tolerance::new(t.relative, t.absolute)
                .map_err(|e| CliError::Config(format!("tolerance: {e}"))),
        }
    }
}

fn default_dim() -> usize {
    1
}

/// Monte Carlo sweep of the triviality probability over `p` and `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiversityConfig {
    pub method: Method,
    #[serde(rename = "M")]
    pub grid_size: usize,
    #[serde(rename = "D", default = "default_dim")]
    pub dim: usize,
    pub a: f64,
    pub b: f64,
    /// Number of separable products summed per sample (FD only).
    #[serde(default)]
    pub terms: Option<usize>,
    pub p_values: Vec<f64>,
    #[serde(rename = "N")]
    pub n_values: Grid,
    pub trials: usize,
    /// Append the deterministic part `K` to every sample set.
    #[serde(default)]
    pub augment: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerance: Option<ToleranceConfig>,
}

impl DiversityConfig {
    pub fn distribution(&self, p: f64) -> Result<TaskDistribution, CliError> {
        let potential = match self.terms {
            Some(terms) => PotentialSpec::SeparableSum { p, a: self.a, b: self.b, terms },
            None => PotentialSpec::BernoulliPoint { p, a: self.a, b: self.b },
        };
        let dist = TaskDistribution {
            method: self.method,
            grid_size: self.grid_size,
            dim: self.dim,
            potential,
        };
        dist.validate()
            .map_err(|e| CliError::Config(format!("distribution at p = {p}: {e}")))?;
        Ok(dist)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.p_values.is_empty() {
            return Err(CliError::Config("p_values: must be nonempty".into()));
        }
        if self.trials == 0 {
            return Err(CliError::Config("trials: must be >= 1".into()));
        }
        if self.n_values.values("N")?.contains(&0) {
            return Err(CliError::Config("N: sample sizes must be >= 1".into()));
        }
        for &p in &self.p_values {
            self.distribution(p)?;
        }
        ToleranceConfig::build(self.tolerance)?;
        Ok(())
    }
}

/// One theorem evaluated over the Cartesian product of its parameter lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSweep {
    pub theorem: String,
    #[serde(default)]
    pub d: Option<Vec<usize>>,
    #[serde(default)]
    pub c: Option<Vec<f64>>,
    #[serde(rename = "c_V", default)]
    pub c_v: Option<Vec<f64>>,
    #[serde(rename = "M", default)]
    pub grid_size: Option<Vec<usize>>,
    #[serde(rename = "D", default)]
    pub dim: Option<Vec<usize>>,
    #[serde(default)]
    pub p: Option<Vec<f64>>,
    #[serde(rename = "N")]
    pub n_values: Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub sweeps: Vec<BoundSweep>,
}

fn default_train() -> TrainConfig {
    TrainConfig::default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IclTrainConfig {
    pub distribution: TaskDistribution,
    #[serde(default = "default_train")]
    pub train: TrainConfig,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledDistribution {
    pub label: String,
    pub distribution: TaskDistribution,
}

fn default_queries() -> usize {
    10
}

fn default_eval_tasks() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IclEvalConfig {
    /// Directory holding `P.txt`, `Q.txt` and `meta.json`.
    pub checkpoint: PathBuf,
    pub tests: Vec<LabeledDistribution>,
    pub m_values: Vec<usize>,
    #[serde(default = "default_eval_tasks")]
    pub tasks: usize,
    #[serde(default = "default_queries")]
    pub queries_per_task: usize,
    pub error_kind: ErrorKind,
    #[serde(default)]
    pub seed: u64,
}

impl IclEvalConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.tests.is_empty() {
            return Err(CliError::Config("tests: must be nonempty".into()));
        }
        for (i, t) in self.tests.iter().enumerate() {
            let ok = !t.label.is_empty()
                && t.label.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
            if !ok {
                return Err(CliError::Config(format!(
                    "tests[{i}].label {:?}: use letters, digits, '_' or '-'",
                    t.label
                )));
            }
            if self.tests[..i].iter().any(|u| u.label == t.label) {
                return Err(CliError::Config(format!("tests[{i}].label {:?} is repeated", t.label)));
            }
            t.distribution
                .validate()
                .map_err(|e| CliError::Config(format!("tests[{i}].distribution: {e}")))?;
        }
        Ok(())
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    pub distribution: TaskDistribution,
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
    /// Also write the deterministic part as `K.txt`.
    #[serde(default = "default_true")]
    pub write_deterministic: bool,
}
