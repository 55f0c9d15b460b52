//! The four test problems as seeded sample generators: the two-state task,
//! off-policy Mountain Car with tile coding, the 7-star counterexample, and
//! a random-MDP generator. Finite tasks share [`MdpTask`] and the generic
//! [`MdpSampler`]; Mountain Car has its own episodic sampler.
//!
//! Generators are seeded and pure; independent instances are safe to run in
//! parallel.

pub mod baird;
pub mod mountain_car;
pub mod random_mdp;
pub mod two_state;

pub use baird::baird;
pub use mountain_car::MountainCarSampler;
pub use random_mdp::{random_mdp, RandomMdpSpec};
pub use two_state::two_state;

use nalgebra::DVector;
use rand::Rng;

use crate::agents::{NextStep, Transition};
use crate::mdp::{FeatureMap, Mdp, Policy, StateActionDist};

/// A finite task bundle: the MDP, target and behavior policies, features,
/// and (where the task prescribes them) initial weights.
#[derive(Debug, Clone)]
pub struct MdpTask {
    pub mdp: Mdp,
    pub target: Policy,
    pub behavior: Policy,
    pub features: FeatureMap,
    pub initial_weights: Option<DVector<f64>>,
}

impl MdpTask {
    pub fn n_features(&self) -> usize {
        self.features.n_features()
    }
}

/// Draws an index from an explicit probability vector.
pub(crate) fn sample_categorical<R: Rng>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Streams behavior-policy transitions from a finite task. The tasks built
/// here are continuing, so every transition carries a successor.
pub struct MdpSampler<'a, R: Rng> {
    task: &'a MdpTask,
    rng: R,
    state: usize,
}

impl<'a, R: Rng> MdpSampler<'a, R> {
    pub fn new(task: &'a MdpTask, rng: R, start_state: usize) -> Self {
        assert!(start_state < task.mdp.n_states());
        Self {
            task,
            rng,
            state: start_state,
        }
    }

    /// Starts from a state drawn from the stationary state marginal, so the
    /// emitted pair stream is stationary from the first step on.
    pub fn from_stationary(task: &'a MdpTask, mut rng: R, d_mu: &StateActionDist) -> Self {
        let n_actions = task.mdp.n_actions();
        let marginal: Vec<f64> = (0..task.mdp.n_states())
            .map(|s| {
                (0..n_actions)
                    .map(|a| d_mu.prob(s * n_actions + a))
                    .sum()
            })
            .collect();
        let state = sample_categorical(&mut rng, &marginal);
        Self { task, rng, state }
    }

    pub fn state(&self) -> usize {
        self.state
    }

    fn next_step_view(&self, state: usize) -> NextStep {
        let n_actions = self.task.mdp.n_actions();
        NextStep {
            pi_probs: self.task.target.action_probs(state),
            mu_probs: self.task.behavior.action_probs(state),
            features: (0..n_actions)
                .map(|a| self.task.features.feature(state, a))
                .collect(),
        }
    }

    pub fn step(&mut self) -> Transition {
        let s = self.state;
        let mu_probs = self.task.behavior.action_probs(s);
        let a = sample_categorical(&mut self.rng, &mu_probs);
        let next_probs = self.task.mdp.transition_row(s, a);
        let s2 = sample_categorical(&mut self.rng, &next_probs);
        let tr = Transition {
            x: self.task.features.feature(s, a),
            reward: self.task.mdp.reward(s, a),
            pi_prob: self.task.target.prob(s, a),
            mu_prob: mu_probs[a],
            next: Some(self.next_step_view(s2)),
        };
        self.state = s2;
        tr
    }
}
