//! The 7-star counterexample, adapted to action values.
//!
//! Seven states, two actions. The solid action jumps to state 7; the dashed
//! action lands uniformly on states 1-6. The target policy always takes
//! solid, the behavior takes dashed with probability 6/7, all rewards are
//! zero, and γ = 0.99. State features follow the classical star layout
//! (2·onehot(s) plus a shared bias component for states 1-6, a doubled bias
//! for state 7), placed in per-action blocks of 8, with the classical
//! initial weights (the 10 on the seventh component) in each block.
//!
//! Uncorrected one-step off-policy updates diverge here in expectation --
//! the solution matrix A has eigenvalues with negative real part -- which is
//! exactly what the gradient correction is supposed to survive.

use nalgebra::{DMatrix, DVector};

use super::MdpTask;
use crate::mdp::{FeatureMap, Mdp, Policy};

pub const DASHED: usize = 0;
pub const SOLID: usize = 1;
pub const N_STATES: usize = 7;
/// Eight state features per action block.
pub const STATE_FEATURES: usize = 8;
pub const N_FEATURES: usize = 2 * STATE_FEATURES;

/// Classical star features for one state.
fn phi(state: usize) -> [f64; STATE_FEATURES] {
    let mut row = [0.0; STATE_FEATURES];
    if state < 6 {
        row[state] = 2.0;
        row[7] = 1.0;
    } else {
        row[6] = 1.0;
        row[7] = 2.0;
    }
    row
}

pub fn baird() -> MdpTask {
    let mut transition = DMatrix::zeros(N_STATES * 2, N_STATES);
    for s in 0..N_STATES {
        for s2 in 0..6 {
            transition[(s * 2 + DASHED, s2)] = 1.0 / 6.0;
        }
        transition[(s * 2 + SOLID, 6)] = 1.0;
    }
    let mdp = Mdp::new(
        N_STATES,
        2,
        transition,
        DMatrix::zeros(N_STATES, 2),
        0.99,
    )
    .expect("star constants");

    let behavior = Policy::new(DMatrix::from_fn(N_STATES, 2, |_, a| {
        if a == DASHED { 6.0 / 7.0 } else { 1.0 / 7.0 }
    }))
    .expect("behavior policy");
    let target = Policy::new(DMatrix::from_fn(
        N_STATES,
        2,
        |_, a| if a == SOLID { 1.0 } else { 0.0 },
    ))
    .expect("target policy");

    let mut x = DMatrix::zeros(N_STATES * 2, N_FEATURES);
    for s in 0..N_STATES {
        let row = phi(s);
        for (k, &v) in row.iter().enumerate() {
            x[(s * 2 + DASHED, k)] = v;
            x[(s * 2 + SOLID, STATE_FEATURES + k)] = v;
        }
    }
    let features = FeatureMap::new(N_STATES, 2, x).expect("feature map");

    let mut w0 = DVector::from_element(N_FEATURES, 1.0);
    w0[6] = 10.0;
    w0[STATE_FEATURES + 6] = 10.0;

    MdpTask {
        mdp,
        target,
        behavior,
        features,
        initial_weights: Some(w0),
    }
}
