//! Exact-solution studies: NMSE curves over ζ/λ grids for a fixed task, and
//! the multi-instance bias study over seeded random MDPs.

use super::runner::build_scheme;
use super::{AgentKind, HarnessError};
use crate::envs::{random_mdp, MdpTask, RandomMdpSpec};
use crate::exec::{map_indexed, ExecMode};
use crate::mdp::{exact_q_pi, stationary_distribution};
use crate::solvers::{mspbe_pinv, solution_abq, solution_constant_lambda};

/// One exact-solution sweep point.
#[derive(Debug, Clone)]
pub struct SolveRow {
    pub scheme: &'static str,
    pub zeta_or_lambda: f64,
    pub nmse: f64,
    pub mspbe_at_winf: f64,
    pub cond_a: f64,
}

/// Exact asymptotic-solution NMSE curve for one task and scheme family.
/// Non-invertible points report NaN error values and keep the condition
/// estimate.
pub fn solve_curve(
    task: &MdpTask,
    agent: AgentKind,
    grid: &[f64],
) -> Result<Vec<SolveRow>, HarnessError> {
    let d_mu = stationary_distribution(&task.mdp, &task.behavior)?;
    let q_pi = exact_q_pi(&task.mdp, &task.target)?;
    let mut rows = Vec::with_capacity(grid.len());
    for &param in grid {
        let scheme = build_scheme(agent, param, &task.behavior, &task.target)?;
        let sol = if agent == AgentKind::Gq {
            solution_constant_lambda(&task.mdp, &task.target, &task.behavior, &task.features, param)?
        } else {
            solution_abq(&task.mdp, &task.target, &task.behavior, &task.features, &scheme)?
        };
        let (nmse, mspbe_at_winf) = match &sol.w_inf {
            Some(w) => (
                super::nmse(task.features.matrix(), w, &q_pi, Some(d_mu.vector()))?,
                mspbe_pinv(&task.mdp, &task.target, &task.behavior, &task.features, &scheme, w)?,
            ),
            None => (f64::NAN, f64::NAN),
        };
        rows.push(SolveRow {
            scheme: agent.name(),
            zeta_or_lambda: param,
            nmse,
            mspbe_at_winf,
            cond_a: sol.condition,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct BiasStudyRow {
    pub instance_seed: u64,
    pub lambda: f64,
    pub nmse: f64,
    pub invertible: bool,
}

/// Output of the multi-instance bias study.
#[derive(Debug, Clone)]
pub struct BiasStudy {
    pub rows: Vec<BiasStudyRow>,
    /// Instances whose NMSE(λ) is nonincreasing across the whole grid.
    pub monotone_count: usize,
    /// Instances with every grid point invertible.
    pub valid_instances: usize,
    /// Seeds excluded because some grid point was not invertible.
    pub flagged: Vec<u64>,
    /// Median NMSE at the first and last grid point over valid instances.
    pub median_first: f64,
    pub median_last: f64,
}

fn median(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite NMSE"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Asymptotic-bias study: for each of `n_instances` seeded random MDPs,
/// computes the constant-λ solution NMSE across `lambda_grid` and counts how
/// many instances are monotone nonincreasing in λ.
pub fn bias_study(
    spec: &RandomMdpSpec,
    n_instances: usize,
    lambda_grid: &[f64],
    exec: ExecMode,
) -> Result<BiasStudy, HarnessError> {
    assert!(!lambda_grid.is_empty());
    let per_instance: Vec<Result<Vec<BiasStudyRow>, HarnessError>> =
        map_indexed(exec, n_instances, |i| {
            let instance_seed = spec.seed + i as u64;
            let (task, _) = random_mdp(&RandomMdpSpec {
                seed: instance_seed,
                ..*spec
            });
            let q_pi = exact_q_pi(&task.mdp, &task.target)?;
            let d_mu = stationary_distribution(&task.mdp, &task.behavior)?;
            lambda_grid
                .iter()
                .map(|&lambda| {
                    let sol = solution_constant_lambda(
                        &task.mdp,
                        &task.target,
                        &task.behavior,
                        &task.features,
                        lambda,
                    )?;
                    let (nmse, invertible) = match &sol.w_inf {
                        Some(w) => (
                            super::nmse(
                                task.features.matrix(),
                                w,
                                &q_pi,
                                Some(d_mu.vector()),
                            )?,
                            true,
                        ),
                        None => (f64::NAN, false),
                    };
                    Ok(BiasStudyRow {
                        instance_seed,
                        lambda,
                        nmse,
                        invertible,
                    })
                })
                .collect()
        });

    let mut rows = Vec::new();
    let mut monotone_count = 0usize;
    let mut valid_instances = 0usize;
    let mut flagged = Vec::new();
    let mut firsts = Vec::new();
    let mut lasts = Vec::new();
    for instance in per_instance {
        let instance = instance?;
        let valid = instance.iter().all(|r| r.invertible);
        if valid {
            valid_instances += 1;
            let curve: Vec<f64> = instance.iter().map(|r| r.nmse).collect();
            // Nonincreasing with an absolute slack far below any meaningful
            // NMSE difference.
            if curve.windows(2).all(|w| w[1] <= w[0] + 1e-12) {
                monotone_count += 1;
            }
            firsts.push(curve[0]);
            lasts.push(*curve.last().expect("non-empty grid"));
        } else {
            flagged.push(instance[0].instance_seed);
        }
        rows.extend(instance);
    }

    Ok(BiasStudy {
        rows,
        monotone_count,
        valid_instances,
        flagged,
        median_first: median(firsts),
        median_last: median(lasts),
    })
}
