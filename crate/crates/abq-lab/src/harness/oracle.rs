//! Sampling-versus-analytic verification: the machinery behind the `oracle`
//! CLI subcommand and the statistical acceptance checks.
//!
//! Three families of checks live here:
//! - off-line forward/backward equivalence on randomized episodes,
//! - empirical expected updates versus `b_ζ - A_ζ w` (batch-means standard
//!   errors to absorb the trace autocorrelation),
//! - the analytic MSPBE gradient versus central finite differences.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::HarnessError;
use crate::agents::{offline_backward_deltas, offline_forward_deltas, Transition};
use crate::bootstrap::BootstrapScheme;
use crate::envs::{random_mdp, two_state, MdpSampler, MdpTask, RandomMdpSpec};
use crate::mdp::{stationary_distribution, Policy};
use crate::solvers::{expected_update, mspbe, mspbe_gradient};

/// Componentwise batch-means estimate of a vector-valued per-step mean.
pub struct BatchMeans {
    pub mean: DVector<f64>,
    pub se: DVector<f64>,
    pub n_batches: usize,
}

/// Empirical mean of the backward-view update direction δ_t e_t over a long
/// stationary behavior trajectory, with batch-means standard errors.
pub fn empirical_expected_update(
    task: &MdpTask,
    scheme: &BootstrapScheme,
    w: &DVector<f64>,
    n_steps: usize,
    burn_in: usize,
    n_batches: usize,
    seed: u64,
) -> Result<BatchMeans, HarnessError> {
    assert!(n_batches >= 2 && n_steps > burn_in);
    let gamma = task.mdp.discount();
    let n = task.n_features();
    let d_mu = stationary_distribution(&task.mdp, &task.behavior)?;
    let mut sampler =
        MdpSampler::from_stationary(task, ChaCha8Rng::seed_from_u64(seed), &d_mu);

    let mut e = DVector::zeros(n);
    // Warm the trace into stationarity before measuring.
    for _ in 0..burn_in {
        let tr = sampler.step();
        e *= gamma * scheme.trace_decay(tr.mu_prob, tr.pi_prob);
        e += &tr.x;
    }

    let measured = n_steps - burn_in;
    let batch_len = measured / n_batches;
    let mut batch_sums: Vec<DVector<f64>> = vec![DVector::zeros(n); n_batches];
    for batch in batch_sums.iter_mut() {
        for _ in 0..batch_len {
            let tr = sampler.step();
            e *= gamma * scheme.trace_decay(tr.mu_prob, tr.pi_prob);
            e += &tr.x;
            let delta = tr.reward + gamma * w.dot(&tr.x_bar_next()) - w.dot(&tr.x);
            batch.axpy(delta, &e, 1.0);
        }
    }

    let batch_means: Vec<DVector<f64>> = batch_sums
        .into_iter()
        .map(|s| s / batch_len as f64)
        .collect();
    let mut mean = DVector::zeros(n);
    for bm in &batch_means {
        mean += bm;
    }
    mean /= n_batches as f64;
    let mut var: DVector<f64> = DVector::zeros(n);
    for bm in &batch_means {
        for i in 0..n {
            let d = bm[i] - mean[i];
            var[i] += d * d;
        }
    }
    let divisor = (n_batches - 1) as f64 * n_batches as f64;
    let se = DVector::from_fn(n, |i, _| f64::sqrt(var[i] / divisor));
    Ok(BatchMeans {
        mean,
        se,
        n_batches,
    })
}

/// Frozen-w correction-weight iteration `h += β_t (δ_t e_t - (hᵀx_t) x_t)`
/// with diminishing `β_t = 1/t^c`, over a stationary behavior trajectory.
pub fn h_iteration(
    task: &MdpTask,
    scheme: &BootstrapScheme,
    w: &DVector<f64>,
    n_steps: usize,
    beta_exponent: f64,
    seed: u64,
) -> Result<DVector<f64>, HarnessError> {
    let gamma = task.mdp.discount();
    let n = task.n_features();
    let d_mu = stationary_distribution(&task.mdp, &task.behavior)?;
    let mut sampler =
        MdpSampler::from_stationary(task, ChaCha8Rng::seed_from_u64(seed), &d_mu);
    let mut e = DVector::zeros(n);
    let mut h = DVector::zeros(n);
    for t in 1..=n_steps {
        let tr = sampler.step();
        e *= gamma * scheme.trace_decay(tr.mu_prob, tr.pi_prob);
        e += &tr.x;
        let delta = tr.reward + gamma * w.dot(&tr.x_bar_next()) - w.dot(&tr.x);
        let beta = 1.0 / (t as f64).powf(beta_exponent);
        let h_dot_x = h.dot(&tr.x);
        h.axpy(beta * delta, &e, 1.0);
        h.axpy(-beta * h_dot_x, &tr.x, 1.0);
    }
    Ok(h)
}

/// A policy drawn uniformly on the simplex, then mixed with the uniform
/// policy. The mixing keeps importance ratios in the fb-equivalence episodes
/// bounded, so the comparison stays in absolute precision.
pub fn smoothed_random_policy(rng: &mut ChaCha8Rng, s: usize, a: usize, mix: f64) -> Policy {
    let mut m = DMatrix::zeros(s, a);
    for i in 0..s {
        let draws: Vec<f64> = (0..a).map(|_| -f64::ln(1.0 - rng.random::<f64>())).collect();
        let sum: f64 = draws.iter().sum();
        for j in 0..a {
            m[(i, j)] = (1.0 - mix) * draws[j] / sum + mix / a as f64;
        }
    }
    Policy::new(m).expect("mixed simplex rows")
}

/// Uniformly random scheme over the four variants.
pub fn random_scheme(
    rng: &mut ChaCha8Rng,
    mu: &Policy,
    pi: &Policy,
) -> Result<BootstrapScheme, HarnessError> {
    let param: f64 = rng.random();
    Ok(match rng.random_range(0..4u8) {
        0 => BootstrapScheme::abq(param, mu, pi)?,
        1 => BootstrapScheme::ab_trace(param)?,
        2 => BootstrapScheme::constant_lambda(param)?,
        3 => BootstrapScheme::tree_backup(param)?,
        _ => unreachable!(),
    })
}

/// ∞-norm gap between total forward-view and total backward-view deltas on
/// one frozen trajectory.
pub fn forward_backward_gap(
    traj: &[Transition],
    scheme: &BootstrapScheme,
    w: &DVector<f64>,
    gamma: f64,
    alpha: f64,
) -> f64 {
    let forward = offline_forward_deltas(traj, scheme, w, gamma, alpha);
    let backward = offline_backward_deltas(traj, scheme, w, gamma, alpha);
    let n = w.len();
    let mut total_f = DVector::zeros(n);
    let mut total_b = DVector::zeros(n);
    for d in &forward {
        total_f += d;
    }
    for d in &backward {
        total_b += d;
    }
    (total_f - total_b).amax()
}

/// One randomized fb-equivalence episode on a small random MDP; returns the
/// realized gap.
pub fn random_episode_gap(seed: u64, max_len: usize) -> Result<f64, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_states = rng.random_range(2..=6);
    let n_actions = rng.random_range(2..=3);
    let (mut task, _) = random_mdp(&RandomMdpSpec {
        n_states,
        n_actions,
        n_features: rng.random_range(2..=4),
        seed: seed ^ 0xABCD,
    });
    task.behavior = smoothed_random_policy(&mut rng, n_states, n_actions, 0.25);
    task.target = smoothed_random_policy(&mut rng, n_states, n_actions, 0.25);
    let scheme = random_scheme(&mut rng, &task.behavior, &task.target)?;
    let len = rng.random_range(1..=max_len);
    let w = DVector::from_fn(task.n_features(), |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let d_mu = stationary_distribution(&task.mdp, &task.behavior)?;
    let mut sampler = MdpSampler::from_stationary(&task, rng, &d_mu);
    let traj: Vec<Transition> = (0..len).map(|_| sampler.step()).collect();
    Ok(forward_backward_gap(
        &traj,
        &scheme,
        &w,
        task.mdp.discount(),
        0.1,
    ))
}

/// Result of one oracle check.
#[derive(Debug, Clone)]
pub struct OracleCheck {
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
}

/// The verification suite behind `abq-lab oracle`: forward/backward
/// equivalence, the expected-update oracle, and the gradient
/// finite-difference check, at sizes that finish in seconds.
pub fn oracle_suite(seed: u64) -> Result<Vec<OracleCheck>, HarnessError> {
    let mut checks = Vec::new();

    let mut max_gap: f64 = 0.0;
    for i in 0..50 {
        max_gap = max_gap.max(random_episode_gap(seed + i, 50)?);
    }
    checks.push(OracleCheck {
        name: "forward_backward_equivalence",
        passed: max_gap <= 1e-10,
        details: format!("max |Σfwd - Σbwd| = {max_gap:.3e} over 50 episodes (tol 1e-10)"),
    });

    let task = two_state();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
    let w = DVector::from_fn(1, |_, _| rng.random::<f64>() * 4.0 - 2.0);
    let mut worst_z: f64 = 0.0;
    for zeta in [0.25, 0.75] {
        let scheme = BootstrapScheme::abq(zeta, &task.behavior, &task.target)?;
        let analytic = expected_update(
            &task.mdp,
            &task.target,
            &task.behavior,
            &task.features,
            &scheme,
            &w,
        )?;
        let emp = empirical_expected_update(&task, &scheme, &w, 200_000, 2_000, 100, seed + 99)?;
        for i in 0..analytic.len() {
            worst_z = worst_z.max((emp.mean[i] - analytic[i]).abs() / emp.se[i]);
        }
    }
    checks.push(OracleCheck {
        name: "expected_update",
        passed: worst_z <= 3.0,
        details: format!("max |empirical - analytic| = {worst_z:.2} SE (tol 3 SE)"),
    });

    let scheme = BootstrapScheme::abq(0.5, &task.behavior, &task.target)?;
    let mut worst_rel: f64 = 0.0;
    for _ in 0..5 {
        let w = DVector::from_fn(1, |_, _| rng.random::<f64>() * 8.0 - 4.0);
        let grad = mspbe_gradient(
            &task.mdp,
            &task.target,
            &task.behavior,
            &task.features,
            &scheme,
            &w,
        )?;
        for i in 0..w.len() {
            let h = 1e-6 * (1.0 + w[i].abs());
            let mut wp = w.clone();
            wp[i] += h;
            let mut wm = w.clone();
            wm[i] -= h;
            let jp = mspbe(&task.mdp, &task.target, &task.behavior, &task.features, &scheme, &wp)?;
            let jm = mspbe(&task.mdp, &task.target, &task.behavior, &task.features, &scheme, &wm)?;
            let fd = (jp - jm) / (2.0 * h);
            let scale = grad[i].abs().max(fd.abs()).max(1e-8);
            worst_rel = worst_rel.max((grad[i] - fd).abs() / scale);
        }
    }
    checks.push(OracleCheck {
        name: "gradient_finite_difference",
        passed: worst_rel <= 1e-5,
        details: format!("max relative error {worst_rel:.3e} (tol 1e-5)"),
    });

    Ok(checks)
}
