//! CSV emission. Floats are written with Rust's shortest round-trip
//! formatting, so identical (config, seeds) produce byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use super::bias::{BiasStudy, SolveRow};
use super::config::ExperimentConfig;
use super::runner::ExperimentOutcome;
use super::HarnessError;

pub(super) const SUMMARY_HEADER: &str =
    "task,agent,zeta_or_lambda,alpha,beta,run_count,diverged,metric_mean,metric_se";

/// Writes the sweep summary (and per-step series when configured) into the
/// `out` directory.
pub(super) fn write_experiment(
    out: &Path,
    config: &ExperimentConfig,
    outcome: &ExperimentOutcome,
) -> Result<(), HarnessError> {
    std::fs::create_dir_all(out)?;
    let mut text = String::from(SUMMARY_HEADER);
    text.push('\n');
    for row in &outcome.rows {
        writeln!(
            text,
            "{},{},{},{},{},{},{},{},{}",
            row.task,
            row.agent,
            row.zeta_or_lambda,
            row.alpha,
            row.beta,
            row.run_count,
            row.diverged,
            row.metric_mean,
            row.metric_se
        )
        .expect("string write");
    }
    std::fs::write(out.join("summary.csv"), text)?;

    if config.record_series {
        for (key, runs) in &outcome.runs {
            let mut text = String::from("seed,step,metric\n");
            for run in runs {
                for (step, value) in run.series.iter().enumerate() {
                    writeln!(text, "{},{},{}", run.seed, step, value).expect("string write");
                }
            }
            let name = format!(
                "series_{}_{}_p{}_a{}_b{}.csv",
                config.task.name(),
                config.agent.name(),
                key.param,
                key.alpha,
                key.beta
            );
            std::fs::write(out.join(name), text)?;
        }
    }
    Ok(())
}

/// Exact-solution curve rows: `scheme,zeta_or_lambda,nmse,mspbe_at_winf,cond_a`.
pub fn write_solve_csv(path: &Path, rows: &[SolveRow]) -> Result<(), HarnessError> {
    let mut text = String::from("scheme,zeta_or_lambda,nmse,mspbe_at_winf,cond_a\n");
    for row in rows {
        writeln!(
            text,
            "{},{},{},{},{}",
            row.scheme, row.zeta_or_lambda, row.nmse, row.mspbe_at_winf, row.cond_a
        )
        .expect("string write");
    }
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Per-instance bias-study rows: `instance_seed,lambda,nmse,invertible`.
pub fn write_bias_csv(path: &Path, study: &BiasStudy) -> Result<(), HarnessError> {
    let mut text = String::from("instance_seed,lambda,nmse,invertible\n");
    for row in &study.rows {
        writeln!(
            text,
            "{},{},{},{}",
            row.instance_seed, row.lambda, row.nmse, row.invertible
        )
        .expect("string write");
    }
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Summary rows rendered to a string (used by tests and the CLI).
pub fn write_summary_csv(outcome: &ExperimentOutcome) -> String {
    let mut text = String::from(SUMMARY_HEADER);
    text.push('\n');
    for row in &outcome.rows {
        writeln!(
            text,
            "{},{},{},{},{},{},{},{},{}",
            row.task,
            row.agent,
            row.zeta_or_lambda,
            row.alpha,
            row.beta,
            row.run_count,
            row.diverged,
            row.metric_mean,
            row.metric_se
        )
        .expect("string write");
    }
    text
}

#[cfg(test)]
mod tests {
    use super::super::runner::run_experiment;
    use super::*;
    use crate::harness::ExperimentConfig;

    #[test]
    fn csv_bytes_are_reproducible() {
        let dir = std::env::temp_dir().join("abq_lab_csv_test");
        let _ = std::fs::remove_dir_all(&dir);
        let cfg = ExperimentConfig::from_json_str(&format!(
            r#"{{
                "task": "two_state", "agent": "gq",
                "lambdas": [0.0, 0.4], "alphas": [0.01],
                "n_runs": 2, "n_steps": 200, "seed": 3,
                "record_series": true,
                "out": "{}"
            }}"#,
            dir.display()
        ))
        .unwrap();
        run_experiment(&cfg).unwrap();
        let first = std::fs::read(dir.join("summary.csv")).unwrap();
        run_experiment(&cfg).unwrap();
        let second = std::fs::read(dir.join("summary.csv")).unwrap();
        assert_eq!(first, second);
        assert!(dir.join("series_two_state_gq_p0.4_a0.01_b0.csv").exists());
        let text = String::from_utf8(first).unwrap();
        assert!(text.starts_with(SUMMARY_HEADER));
        assert_eq!(text.lines().count(), 3);
        let _ = std::fs::remove_dir_all(&dir);
    }
}
