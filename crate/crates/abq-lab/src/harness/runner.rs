//! Seeded multi-run sweep execution over the built-in tasks.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{AgentKind, ExperimentConfig, TaskKind};
use super::{mean_se, HarnessError};
use crate::agents::{
    AbTraceLearner, AbqLearner, AgentError, GqLearner, Learner, TreeBackupLearner,
};
use crate::bootstrap::BootstrapScheme;
use crate::envs::mountain_car::{self, GroundTruth, MountainCarSampler};
use crate::envs::{baird, random_mdp, two_state, MdpSampler, MdpTask, RandomMdpSpec};
use crate::exec::map_indexed;
use crate::mdp::{exact_q_pi, stationary_distribution, FeatureMap, LoadedModel, Policy, StateActionDist};
use crate::solvers::MspbeEvaluator;

impl TaskKind {
    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::TwoState => "two_state",
            TaskKind::MountainCar => "mountain_car",
            TaskKind::Baird => "baird",
            TaskKind::RandomMdp => "random_mdp",
            TaskKind::ModelFile => "model_file",
        }
    }
}

/// One run's metric trace. `series[0]` is the metric at initialization, then
/// one entry per step (finite tasks) or per completed episode (Mountain
/// Car), truncated where divergence struck.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub seed: u64,
    pub series: Vec<f64>,
    /// Mean metric over the trailing window of the series.
    pub summary: f64,
    pub diverged_at: Option<u64>,
}

/// One sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepKey {
    pub param: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Aggregate over the runs of one sweep point. Diverged runs are counted
/// here and excluded from the mean and standard error.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub task: &'static str,
    pub agent: &'static str,
    pub zeta_or_lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    pub run_count: usize,
    pub diverged: usize,
    pub metric_mean: f64,
    pub metric_se: f64,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub rows: Vec<SummaryRow>,
    pub runs: Vec<(SweepKey, Vec<RunResult>)>,
}

#[allow(clippy::large_enum_variant)] // built once per experiment
pub(super) enum TaskData {
    Finite {
        task: MdpTask,
        d_mu: StateActionDist,
        q_pi: DVector<f64>,
    },
    MountainCar {
        ground_truth: GroundTruth,
    },
}

pub(super) fn build_task_data(config: &ExperimentConfig) -> Result<TaskData, HarnessError> {
    match config.task {
        TaskKind::MountainCar => {
            let gt_cfg = config.ground_truth.unwrap_or_default();
            let ground_truth = mountain_car::ground_truth_pairs(
                ChaCha8Rng::seed_from_u64(gt_cfg.seed),
                gt_cfg.behavior_steps,
                gt_cfg.n_pairs,
                gt_cfg.n_rollouts,
            )?;
            Ok(TaskData::MountainCar { ground_truth })
        }
        kind => {
            let mut task = match kind {
                TaskKind::TwoState => two_state(),
                TaskKind::Baird => baird(),
                TaskKind::RandomMdp => {
                    let c = config.random_mdp.unwrap_or_default();
                    random_mdp(&RandomMdpSpec {
                        n_states: c.n_states,
                        n_actions: c.n_actions,
                        n_features: c.n_features,
                        seed: c.seed,
                    })
                    .0
                }
                TaskKind::ModelFile => {
                    let path = config.model_path.as_ref().expect("validated");
                    let model = LoadedModel::from_path(path)?;
                    MdpTask {
                        mdp: model.mdp,
                        target: model.target,
                        behavior: model.behavior,
                        features: model.features,
                        initial_weights: None,
                    }
                }
                TaskKind::MountainCar => unreachable!(),
            };
            if config.tabular {
                task.features =
                    FeatureMap::tabular(task.mdp.n_states(), task.mdp.n_actions());
            }
            if config.agent == AgentKind::Treebackup && !task.features.is_tabular() {
                return Err(HarnessError::Config(
                    "treebackup requires tabular features; set \"tabular\": true".into(),
                ));
            }
            let d_mu = stationary_distribution(&task.mdp, &task.behavior)?;
            let q_pi = exact_q_pi(&task.mdp, &task.target)?;
            Ok(TaskData::Finite { task, d_mu, q_pi })
        }
    }
}

/// Metric evaluated along a run: value-error NMSE against exact or probe
/// values, or exact MSPBE for tasks whose true values vanish (the 7-star).
pub(super) enum Metric<'a> {
    Nmse {
        x: &'a DMatrix<f64>,
        q: &'a DVector<f64>,
        d: Option<&'a DVector<f64>>,
        denom: f64,
    },
    Mspbe(MspbeEvaluator),
}

impl Metric<'_> {
    pub(super) fn nmse<'a>(
        x: &'a DMatrix<f64>,
        q: &'a DVector<f64>,
        d: Option<&'a DVector<f64>>,
    ) -> Result<Metric<'a>, HarnessError> {
        let mut denom = 0.0;
        for i in 0..q.len() {
            let w = d.map_or(1.0, |d| d[i]);
            denom += w * q[i] * q[i];
        }
        if denom <= 0.0 {
            return Err(HarnessError::ZeroNormReference);
        }
        Ok(Metric::Nmse { x, q, d, denom })
    }

    pub(super) fn eval(&self, w: &DVector<f64>) -> f64 {
        match self {
            Metric::Nmse { x, q, d, denom } => {
                let est = *x * w;
                let mut err = 0.0;
                for i in 0..q.len() {
                    let wi = d.map_or(1.0, |d| d[i]);
                    let diff = est[i] - q[i];
                    err += wi * diff * diff;
                }
                err / denom
            }
            Metric::Mspbe(eval) => eval.eval(w),
        }
    }
}

pub(super) fn build_scheme(
    agent: AgentKind,
    param: f64,
    mu: &Policy,
    pi: &Policy,
) -> Result<BootstrapScheme, HarnessError> {
    Ok(match agent {
        AgentKind::Abq => BootstrapScheme::abq(param, mu, pi)?,
        AgentKind::Abtrace => BootstrapScheme::ab_trace(param)?,
        AgentKind::Treebackup => BootstrapScheme::tree_backup(param)?,
        // GQ's associated fixed point is the constant-λ one; used only for
        // metric construction, never inside the GQ update itself.
        AgentKind::Gq => BootstrapScheme::constant_lambda(param)?,
    })
}

fn build_learner(
    agent: AgentKind,
    scheme: &BootstrapScheme,
    n_features: usize,
    param: f64,
    gamma: f64,
    alpha: f64,
    beta: f64,
) -> Result<Box<dyn Learner>, HarnessError> {
    Ok(match agent {
        AgentKind::Abq => Box::new(AbqLearner::new(n_features, scheme.clone(), gamma, alpha, beta)?),
        AgentKind::Abtrace => Box::new(AbTraceLearner::new(
            n_features,
            scheme.clone(),
            gamma,
            alpha,
            beta,
        )?),
        AgentKind::Gq => Box::new(GqLearner::new(n_features, param, gamma, alpha, beta)?),
        AgentKind::Treebackup => {
            Box::new(TreeBackupLearner::new(n_features, scheme.clone(), gamma, alpha)?)
        }
    })
}

fn window_mean(series: &[f64], fraction: f64) -> f64 {
    if series.is_empty() {
        return f64::NAN;
    }
    let count = ((series.len() as f64) * fraction).round().max(1.0) as usize;
    let start = series.len().saturating_sub(count);
    let tail = &series[start..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

fn finish_run(
    seed: u64,
    series: Vec<f64>,
    diverged_at: Option<u64>,
    window_fraction: f64,
) -> RunResult {
    let summary = window_mean(&series, window_fraction);
    RunResult {
        seed,
        series,
        summary,
        diverged_at,
    }
}

#[allow(clippy::too_many_arguments)]
fn run_finite_single(
    task: &MdpTask,
    d_mu: &StateActionDist,
    metric: &Metric<'_>,
    agent: AgentKind,
    scheme: &BootstrapScheme,
    param: f64,
    alpha: f64,
    beta: f64,
    n_steps: usize,
    window_fraction: f64,
    seed: u64,
) -> Result<RunResult, HarnessError> {
    let gamma = task.mdp.discount();
    let mut learner =
        build_learner(agent, scheme, task.n_features(), param, gamma, alpha, beta)?;
    if let Some(w0) = &task.initial_weights {
        learner.state_mut().w = w0.clone();
    }
    let mut sampler =
        MdpSampler::from_stationary(task, ChaCha8Rng::seed_from_u64(seed), d_mu);
    let mut series = Vec::with_capacity(n_steps + 1);
    series.push(metric.eval(learner.weights()));
    let mut diverged_at = None;
    for _ in 0..n_steps {
        let tr = sampler.step();
        match learner.step(&tr) {
            Ok(()) => series.push(metric.eval(learner.weights())),
            Err(AgentError::Diverged { step }) => {
                diverged_at = Some(step);
                break;
            }
            Err(other) => return Err(other.into()),
        }
    }
    Ok(finish_run(seed, series, diverged_at, window_fraction))
}

#[allow(clippy::too_many_arguments)]
fn run_mountain_car_single(
    metric: &Metric<'_>,
    agent: AgentKind,
    scheme: &BootstrapScheme,
    param: f64,
    alpha: f64,
    beta: f64,
    n_episodes: usize,
    window_fraction: f64,
    seed: u64,
) -> Result<RunResult, HarnessError> {
    let gamma = mountain_car::DISCOUNT;
    let mut learner = build_learner(
        agent,
        scheme,
        mountain_car::N_FEATURES,
        param,
        gamma,
        alpha,
        beta,
    )?;
    let mut sampler = MountainCarSampler::new(ChaCha8Rng::seed_from_u64(seed));
    let mut series = Vec::with_capacity(n_episodes + 1);
    series.push(metric.eval(learner.weights()));
    let mut diverged_at = None;
    let mut episodes = 0usize;
    while episodes < n_episodes {
        let tr = sampler.step()?;
        let terminal = tr.is_terminal();
        match learner.step(&tr) {
            Ok(()) => {}
            Err(AgentError::Diverged { step }) => {
                diverged_at = Some(step);
                break;
            }
            Err(other) => return Err(other.into()),
        }
        if terminal {
            episodes += 1;
            series.push(metric.eval(learner.weights()));
            learner.begin_episode();
        }
    }
    Ok(finish_run(seed, series, diverged_at, window_fraction))
}

/// Runs the configured sweep: every (ζ or λ) × α × β point, `n_runs` seeded
/// runs each (run i uses seed `config.seed + i`), aggregated into one
/// summary row per point. Writes CSV when `config.out` is set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome, HarnessError> {
    config.validate()?;
    let data = build_task_data(config)?;

    let (mu_table, pi_table) = match &data {
        TaskData::Finite { task, .. } => (task.behavior.clone(), task.target.clone()),
        TaskData::MountainCar { .. } => mountain_car::policy_tables(),
    };

    let mut rows = Vec::new();
    let mut all_runs = Vec::new();
    for &param in config.sweep_params() {
        let scheme = build_scheme(config.agent, param, &mu_table, &pi_table)?;
        // Metric: value-error NMSE where true values exist and are nonzero;
        // the 7-star's values are identically zero, so it is tracked by its
        // exact MSPBE (with the pseudo-inverse Gram, since the star features
        // are deliberately overcomplete).
        let metric = match &data {
            TaskData::Finite { task, d_mu, q_pi } => {
                if config.task == TaskKind::Baird {
                    Metric::Mspbe(MspbeEvaluator::new(
                        &task.mdp,
                        &task.target,
                        &task.behavior,
                        &task.features,
                        &scheme,
                        true,
                    )?)
                } else {
                    Metric::nmse(task.features.matrix(), q_pi, Some(d_mu.vector()))?
                }
            }
            TaskData::MountainCar { ground_truth } => {
                Metric::nmse(&ground_truth.features, &ground_truth.q_hat, None)?
            }
        };

        for &alpha in &config.alphas {
            for &beta in &config.betas {
                let results: Vec<Result<RunResult, HarnessError>> =
                    map_indexed(config.exec, config.n_runs, |i| {
                        let seed = config.seed + i as u64;
                        match &data {
                            TaskData::Finite { task, d_mu, .. } => run_finite_single(
                                task,
                                d_mu,
                                &metric,
                                config.agent,
                                &scheme,
                                param,
                                alpha,
                                beta,
                                config.n_steps.expect("validated"),
                                config.window_fraction,
                                seed,
                            ),
                            TaskData::MountainCar { .. } => run_mountain_car_single(
                                &metric,
                                config.agent,
                                &scheme,
                                param,
                                alpha,
                                beta,
                                config.n_episodes.expect("validated"),
                                config.window_fraction,
                                seed,
                            ),
                        }
                    });
                let runs = results.into_iter().collect::<Result<Vec<_>, _>>()?;
                let kept: Vec<f64> = runs
                    .iter()
                    .filter(|r| r.diverged_at.is_none())
                    .map(|r| r.summary)
                    .collect();
                let (metric_mean, metric_se) = mean_se(&kept);
                rows.push(SummaryRow {
                    task: config.task.name(),
                    agent: config.agent.name(),
                    zeta_or_lambda: param,
                    alpha,
                    beta,
                    run_count: config.n_runs,
                    diverged: config.n_runs - kept.len(),
                    metric_mean,
                    metric_se,
                });
                all_runs.push((SweepKey { param, alpha, beta }, runs));
            }
        }
    }

    let outcome = ExperimentOutcome {
        rows,
        runs: all_runs,
    };
    if let Some(out) = &config.out {
        super::csv::write_experiment(out, config, &outcome)?;
    }
    Ok(outcome)
}
