//! Experiment orchestration: config parsing, seeded multi-run execution,
//! metric computation, and CSV emission.
//!
//! Runs within a sweep execute concurrently (see [`crate::exec`]); each run
//! owns its learner, environment instance, and RNG stream, and aggregation
//! is an ordered reduction over seeds, so parallelism never changes output
//! bytes.

mod bias;
mod config;
mod csv;
pub mod oracle;
mod runner;

pub use bias::{bias_study, solve_curve, BiasStudy, BiasStudyRow, SolveRow};
pub use config::{AgentKind, ExperimentConfig, GroundTruthConfig, RandomMdpConfig, TaskKind};
pub use csv::{write_bias_csv, write_solve_csv, write_summary_csv};
pub use runner::{run_experiment, ExperimentOutcome, RunResult, SummaryRow, SweepKey};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] crate::mdp::ModelError),
    #[error(transparent)]
    Scheme(#[from] crate::bootstrap::SchemeError),
    #[error(transparent)]
    Solver(#[from] crate::solvers::SolverError),
    #[error(transparent)]
    Agent(#[from] crate::agents::AgentError),
    #[error(transparent)]
    Env(#[from] crate::envs::mountain_car::MountainCarError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("reference values have zero norm; NMSE undefined")]
    ZeroNormReference,
}

/// Normalized mean squared error of the linear estimate `Xw` against
/// reference values `q_ref` under optional weights `d` (unweighted Euclidean
/// when absent): `‖Xw - q_ref‖²_d / ‖q_ref‖²_d`.
pub fn nmse(
    x: &DMatrix<f64>,
    w: &DVector<f64>,
    q_ref: &DVector<f64>,
    d: Option<&DVector<f64>>,
) -> Result<f64, HarnessError> {
    assert_eq!(x.nrows(), q_ref.len(), "feature rows vs reference length");
    assert_eq!(x.ncols(), w.len(), "feature columns vs weight length");
    let estimate = x * w;
    let weight = |i: usize| d.map_or(1.0, |d| d[i]);
    let mut err = 0.0;
    let mut denom = 0.0;
    for i in 0..q_ref.len() {
        let di = weight(i);
        let diff = estimate[i] - q_ref[i];
        err += di * diff * diff;
        denom += di * q_ref[i] * q_ref[i];
    }
    if denom <= 0.0 {
        return Err(HarnessError::ZeroNormReference);
    }
    Ok(err / denom)
}

/// Sample mean and standard error (sd/√n) of a slice.
pub(crate) fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
