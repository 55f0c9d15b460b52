//! Experiment configuration, deserializable from JSON or TOML.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::HarnessError;
use crate::exec::ExecMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    TwoState,
    MountainCar,
    Baird,
    RandomMdp,
    ModelFile,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Abq,
    Abtrace,
    /// The constant-λ importance-sampling learner; `"constant"` also selects
    /// it, matching the scheme-variant vocabulary.
    #[serde(alias = "constant")]
    Gq,
    Treebackup,
}

impl AgentKind {
    pub fn name(&self) -> &'static str {
        match self {
            AgentKind::Abq => "abq",
            AgentKind::Abtrace => "abtrace",
            AgentKind::Gq => "gq",
            AgentKind::Treebackup => "treebackup",
        }
    }

    /// GQ sweeps λ; the bootstrapping family sweeps ζ.
    pub fn uses_lambda(&self) -> bool {
        matches!(self, AgentKind::Gq)
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomMdpConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_states")]
    pub n_states: usize,
    #[serde(default = "default_actions")]
    pub n_actions: usize,
    #[serde(default = "default_features")]
    pub n_features: usize,
}

fn default_states() -> usize {
    100
}
fn default_actions() -> usize {
    5
}
fn default_features() -> usize {
    40
}

impl Default for RandomMdpConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_states: default_states(),
            n_actions: default_actions(),
            n_features: default_features(),
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_gt_steps")]
    pub behavior_steps: usize,
    #[serde(default = "default_gt_pairs")]
    pub n_pairs: usize,
    #[serde(default = "default_gt_rollouts")]
    pub n_rollouts: usize,
}

fn default_gt_steps() -> usize {
    1_000_000
}
fn default_gt_pairs() -> usize {
    30
}
fn default_gt_rollouts() -> usize {
    100
}

impl Default for GroundTruthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            behavior_steps: default_gt_steps(),
            n_pairs: default_gt_pairs(),
            n_rollouts: default_gt_rollouts(),
        }
    }
}

fn default_window() -> f64 {
    0.5
}

fn default_betas() -> Vec<f64> {
    vec![0.0]
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: TaskKind,
    pub agent: AgentKind,
    /// ζ sweep for abq/abtrace/treebackup.
    #[serde(default)]
    pub zetas: Vec<f64>,
    /// λ sweep for gq.
    #[serde(default)]
    pub lambdas: Vec<f64>,
    pub alphas: Vec<f64>,
    #[serde(default = "default_betas")]
    pub betas: Vec<f64>,
    pub n_runs: usize,
    #[serde(default)]
    pub n_steps: Option<usize>,
    #[serde(default)]
    pub n_episodes: Option<usize>,
    /// Run i uses RNG seed `seed + i`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Fraction of the series (from the end) averaged into the summary.
    #[serde(default = "default_window")]
    pub window_fraction: f64,
    /// Emit long-format per-step series files next to the summary.
    #[serde(default)]
    pub record_series: bool,
    /// Replace the task's feature map with the identity (required by
    /// treebackup on tasks that are not already tabular).
    #[serde(default)]
    pub tabular: bool,
    #[serde(default)]
    pub exec: ExecMode,
    #[serde(default)]
    pub random_mdp: Option<RandomMdpConfig>,
    #[serde(default)]
    pub ground_truth: Option<GroundTruthConfig>,
    /// Path for the model_file task.
    #[serde(default)]
    pub model_path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Dispatches on the file extension: `.toml` is TOML, anything else JSON.
    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "toml") {
            Self::from_toml_str(&text)
        } else {
            Self::from_json_str(&text)
        }
    }

    /// The sweep list the configured agent consumes.
    pub fn sweep_params(&self) -> &[f64] {
        if self.agent.uses_lambda() {
            &self.lambdas
        } else {
            &self.zetas
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.n_runs == 0 {
            return Err(HarnessError::Config("n_runs must be at least 1".into()));
        }
        let params = self.sweep_params();
        if params.is_empty() {
            let which = if self.agent.uses_lambda() {
                "lambdas"
            } else {
                "zetas"
            };
            return Err(HarnessError::Config(format!(
                "agent {} needs a non-empty `{which}` sweep",
                self.agent.name()
            )));
        }
        for &v in params.iter().chain(self.alphas.iter()).chain(self.betas.iter()) {
            if !v.is_finite() || v < 0.0 {
                return Err(HarnessError::Config(format!(
                    "sweep values must be finite and nonnegative, got {v}"
                )));
            }
        }
        if params.iter().any(|&v| v > 1.0) {
            return Err(HarnessError::Config(
                "zeta/lambda sweep values must lie in [0, 1]".into(),
            ));
        }
        if self.alphas.is_empty() {
            return Err(HarnessError::Config("alphas must be non-empty".into()));
        }
        if !(0.0 < self.window_fraction && self.window_fraction <= 1.0) {
            return Err(HarnessError::Config(
                "window_fraction must lie in (0, 1]".into(),
            ));
        }
        match self.task {
            TaskKind::MountainCar => {
                if self.n_episodes.is_none() {
                    return Err(HarnessError::Config(
                        "mountain_car is episodic: set n_episodes".into(),
                    ));
                }
            }
            _ => {
                if self.n_steps.is_none() {
                    return Err(HarnessError::Config(
                        "continuing tasks need n_steps".into(),
                    ));
                }
            }
        }
        if self.task == TaskKind::ModelFile && self.model_path.is_none() {
            return Err(HarnessError::Config(
                "model_file task needs model_path".into(),
            ));
        }
        if self.agent == AgentKind::Treebackup && self.task == TaskKind::MountainCar {
            return Err(HarnessError::Config(
                "treebackup requires tabular features; mountain_car is not tabular".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_json_with_defaults() {
        let cfg = ExperimentConfig::from_json_str(
            r#"{
                "task": "two_state", "agent": "abq",
                "zetas": [0.0, 0.5, 1.0], "alphas": [0.01],
                "n_runs": 3, "n_steps": 100
            }"#,
        )
        .unwrap();
        assert_eq!(cfg.task, TaskKind::TwoState);
        assert_eq!(cfg.betas, vec![0.0]);
        assert_eq!(cfg.window_fraction, 0.5);
        assert_eq!(cfg.sweep_params(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn parses_toml() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
                task = "baird"
                agent = "abq"
                zetas = [0.0, 0.2]
                alphas = [0.05]
                betas = [0.1]
                n_runs = 2
                n_steps = 10
            "#,
        )
        .unwrap();
        assert_eq!(cfg.task, TaskKind::Baird);
        assert_eq!(cfg.betas, vec![0.1]);
    }

    #[test]
    fn rejects_bad_configs() {
        // gq without lambdas
        assert!(ExperimentConfig::from_json_str(
            r#"{"task":"two_state","agent":"gq","zetas":[0.5],"alphas":[0.01],"n_runs":1,"n_steps":10}"#,
        )
        .is_err());
        // sweep value out of range
        assert!(ExperimentConfig::from_json_str(
            r#"{"task":"two_state","agent":"abq","zetas":[1.5],"alphas":[0.01],"n_runs":1,"n_steps":10}"#,
        )
        .is_err());
        // episodic task without n_episodes
        assert!(ExperimentConfig::from_json_str(
            r#"{"task":"mountain_car","agent":"abq","zetas":[0.5],"alphas":[0.01],"n_runs":1,"n_steps":10}"#,
        )
        .is_err());
        // tree backup on a non-tabular task
        assert!(ExperimentConfig::from_json_str(
            r#"{"task":"mountain_car","agent":"treebackup","zetas":[0.5],"alphas":[0.01],"n_runs":1,"n_episodes":10}"#,
        )
        .is_err());
        // unknown field
        assert!(ExperimentConfig::from_json_str(
            r#"{"task":"two_state","agent":"abq","zetas":[0.5],"alphas":[0.01],"n_runs":1,"n_steps":10,"bogus":1}"#,
        )
        .is_err());
    }
}
