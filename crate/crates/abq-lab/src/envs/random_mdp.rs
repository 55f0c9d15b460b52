//! Seeded random-MDP generator: uniform random transition kernels and mean
//! rewards, binary feature matrices, and policies drawn uniformly on the
//! action simplex. Feature matrices that are rank deficient under d_μ are
//! resampled with an incremented sub-seed, and the resample count is
//! reported alongside the task.

use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::MdpTask;
use crate::mdp::{stationary_distribution, FeatureMap, Mdp, Policy};

/// Discount used for generated instances (the bias-study figures sweep λ,
/// not γ).
pub const RANDOM_MDP_DISCOUNT: f64 = 0.9;

const MAX_FEATURE_RESAMPLES: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomMdpSpec {
    pub n_states: usize,
    pub n_actions: usize,
    pub n_features: usize,
    pub seed: u64,
}

impl Default for RandomMdpSpec {
    /// The bias-study dimensions: 100 states, 5 actions, 40 binary features.
    fn default() -> Self {
        Self {
            n_states: 100,
            n_actions: 5,
            n_features: 40,
            seed: 0,
        }
    }
}

fn simplex_row(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    // Normalized iid Exp(1) draws are uniform on the simplex.
    let draws: Vec<f64> = (0..k).map(|_| -f64::ln(1.0 - rng.random::<f64>())).collect();
    let sum: f64 = draws.iter().sum();
    draws.into_iter().map(|v| v / sum).collect()
}

fn random_policy(rng: &mut ChaCha8Rng, s: usize, a: usize) -> Policy {
    let mut m = DMatrix::zeros(s, a);
    for i in 0..s {
        let row = simplex_row(rng, a);
        for (j, v) in row.into_iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    Policy::new(m).expect("simplex rows are stochastic")
}

fn binary_features(seed: u64, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| if rng.random::<bool>() { 1.0 } else { 0.0 })
}

/// Generates one instance. Returns the task and the number of feature
/// resamples that were needed to reach full column rank under d_μ.
pub fn random_mdp(spec: &RandomMdpSpec) -> (MdpTask, u64) {
    let (s, a, n) = (spec.n_states, spec.n_actions, spec.n_features);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut transition = DMatrix::zeros(s * a, s);
    for row in 0..s * a {
        let probs = simplex_row(&mut rng, s);
        for (col, v) in probs.into_iter().enumerate() {
            transition[(row, col)] = v;
        }
    }
    let reward = DMatrix::from_fn(s, a, |_, _| rng.random::<f64>());
    let mdp = Mdp::new(s, a, transition, reward, RANDOM_MDP_DISCOUNT)
        .expect("generated rows are stochastic");

    let behavior = random_policy(&mut rng, s, a);
    let target = random_policy(&mut rng, s, a);

    let d_mu = stationary_distribution(&mdp, &behavior)
        .expect("dense random chains are irreducible");

    // Feature sub-stream: independent of the model stream so a resample
    // never perturbs the MDP itself.
    let feature_seed_base = spec.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1);
    let mut resamples = 0u64;
    let features = loop {
        let x = binary_features(feature_seed_base.wrapping_add(resamples), s * a, n);
        // Rank of XᵀD X via singular values of sqrt(D)X.
        let weighted = DMatrix::from_fn(s * a, n, |i, j| d_mu.prob(i).sqrt() * x[(i, j)]);
        let svd = weighted.svd(false, false);
        let smax = svd.singular_values.max();
        let rank = svd
            .singular_values
            .iter()
            .filter(|&&v| v > smax * 1e-10)
            .count();
        if rank == n {
            break FeatureMap::new(s, a, x).expect("feature shape");
        }
        resamples += 1;
        assert!(
            resamples < MAX_FEATURE_RESAMPLES,
            "could not draw full-rank features after {MAX_FEATURE_RESAMPLES} attempts"
        );
    };

    (
        MdpTask {
            mdp,
            target,
            behavior,
            features,
            initial_weights: None,
        },
        resamples,
    )
}
