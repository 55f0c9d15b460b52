//! Off-policy policy evaluation on Mountain Car.
//!
//! Standard deterministic dynamics on position [-1.2, 0.5] and velocity
//! [-0.07, 0.07], reward -1 per step, γ = 0.999, three actions (reverse, no
//! throttle, forward). Both policies derive from the energy-pumping rule
//! "full throttle in the direction of motion": when the velocity is strictly
//! positive (toward the goal) the behavior policy plays
//! [1/300, 1/300, 298/300] and the target [0.1, 0.1, 0.8]; otherwise the
//! mirrored tables. The importance sampling ratio therefore peaks at
//! 0.1 × 300 = 30.
//!
//! Features are tile coded: ten 4×4 tilings over the position×velocity box,
//! offset by i/10 of a tile width per dimension, hashed into 32 slots per
//! action with only the taken action's block active. The offsets shift cell
//! indices by at most one, which makes the `(tile + 2·tiling) mod 32` slot
//! assignment collision-free within a single state's ten active tiles.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use thiserror::Error;

use crate::agents::{NextStep, Transition};

pub const POS_MIN: f64 = -1.2;
pub const POS_MAX: f64 = 0.5;
pub const VEL_LIMIT: f64 = 0.07;
pub const GOAL_POS: f64 = 0.5;
pub const DISCOUNT: f64 = 0.999;
pub const N_ACTIONS: usize = 3;
pub const N_TILINGS: usize = 10;
pub const TILES_PER_DIM: usize = 4;
pub const FEATURES_PER_ACTION: usize = 32;
pub const N_FEATURES: usize = N_ACTIONS * FEATURES_PER_ACTION;

/// Episodes longer than this indicate a broken policy, not a slow car.
pub const EPISODE_STEP_CAP: usize = 100_000;

/// Rollout tails are truncated once γ^t drops below this.
pub const ROLLOUT_EPS: f64 = 1e-6;

pub const REVERSE: usize = 0;
pub const NO_THROTTLE: usize = 1;
pub const FORWARD: usize = 2;

#[derive(Debug, Error)]
pub enum MountainCarError {
    #[error("state out of range: pos {pos}, vel {vel}")]
    OutOfRange { pos: f64, vel: f64 },
    #[error("unknown action index {0}")]
    BadAction(usize),
    #[error("episode exceeded {EPISODE_STEP_CAP} steps")]
    EpisodeTooLong,
}

fn check_state(pos: f64, vel: f64) -> Result<(), MountainCarError> {
    if !(POS_MIN..=POS_MAX).contains(&pos) || vel.abs() > VEL_LIMIT {
        return Err(MountainCarError::OutOfRange { pos, vel });
    }
    Ok(())
}

/// One dynamics step. Deterministic; returns (pos', vel', reward, terminal).
pub fn step(
    pos: f64,
    vel: f64,
    action: usize,
) -> Result<(f64, f64, f64, bool), MountainCarError> {
    check_state(pos, vel)?;
    if action >= N_ACTIONS {
        return Err(MountainCarError::BadAction(action));
    }
    let throttle = action as f64 - 1.0;
    let mut vel2 = vel + 0.001 * throttle - 0.0025 * (3.0 * pos).cos();
    vel2 = vel2.clamp(-VEL_LIMIT, VEL_LIMIT);
    let mut pos2 = (pos + vel2).clamp(POS_MIN, POS_MAX);
    if pos2 <= POS_MIN {
        pos2 = POS_MIN;
        vel2 = 0.0;
    }
    let terminal = pos2 >= GOAL_POS;
    Ok((pos2, vel2, -1.0, terminal))
}

/// (behavior, target) action probabilities at a state. "Toward the goal"
/// means strictly positive velocity; zero falls to the otherwise-branch.
pub fn policies(_pos: f64, vel: f64) -> ([f64; 3], [f64; 3]) {
    if vel > 0.0 {
        (
            [1.0 / 300.0, 1.0 / 300.0, 298.0 / 300.0],
            [0.1, 0.1, 0.8],
        )
    } else {
        (
            [298.0 / 300.0, 1.0 / 300.0, 1.0 / 300.0],
            [0.8, 0.1, 0.1],
        )
    }
}

/// The two policy branches laid out as two-row policy tables (row 0: velocity
/// toward the goal, row 1: otherwise). The branch tables carry every
/// probability either policy ever assigns, so ψ pivots computed from them
/// are the pivots of the full continuous-state task.
pub fn policy_tables() -> (crate::mdp::Policy, crate::mdp::Policy) {
    use nalgebra::DMatrix;
    let (mu_fwd, pi_fwd) = policies(0.0, 0.01);
    let (mu_rev, pi_rev) = policies(0.0, 0.0);
    let rows = |a: [f64; 3], b: [f64; 3]| {
        DMatrix::from_row_slice(2, 3, &[a[0], a[1], a[2], b[0], b[1], b[2]])
    };
    (
        crate::mdp::Policy::new(rows(mu_fwd, mu_rev)).expect("behavior branches"),
        crate::mdp::Policy::new(rows(pi_fwd, pi_rev)).expect("target branches"),
    )
}

/// Active slot indices (within an action block) for a state.
fn active_slots(pos: f64, vel: f64) -> [usize; N_TILINGS] {
    let pos_width = (POS_MAX - POS_MIN) / TILES_PER_DIM as f64;
    let vel_width = (2.0 * VEL_LIMIT) / TILES_PER_DIM as f64;
    let mut slots = [0usize; N_TILINGS];
    for (tiling, slot) in slots.iter_mut().enumerate() {
        let offset = tiling as f64 / N_TILINGS as f64;
        let col = (((pos - POS_MIN + offset * pos_width) / pos_width) as usize)
            .min(TILES_PER_DIM - 1);
        let row = (((vel + VEL_LIMIT + offset * vel_width) / vel_width) as usize)
            .min(TILES_PER_DIM - 1);
        let tile = row * TILES_PER_DIM + col;
        *slot = (tile + 2 * tiling) % FEATURES_PER_ACTION;
    }
    slots
}

/// Tile-coded feature vector for (pos, vel, action): 96 entries, exactly ten
/// ones, all inside the action's 32-slot block.
pub fn tile_code(pos: f64, vel: f64, action: usize) -> Result<DVector<f64>, MountainCarError> {
    check_state(pos, vel)?;
    if action >= N_ACTIONS {
        return Err(MountainCarError::BadAction(action));
    }
    let mut x = DVector::zeros(N_FEATURES);
    for slot in active_slots(pos, vel) {
        let idx = action * FEATURES_PER_ACTION + slot;
        debug_assert_eq!(x[idx], 0.0, "tile hash collision");
        x[idx] = 1.0;
    }
    Ok(x)
}

/// Start distribution: near the valley bottom with a small, strictly nonzero
/// speed (magnitude in [0.005, 0.02], either sign).
pub fn start_state<R: Rng>(rng: &mut R) -> (f64, f64) {
    let pos = -0.6 + 0.2 * rng.random::<f64>();
    let magnitude = 0.005 + 0.015 * rng.random::<f64>();
    let vel = if rng.random::<bool>() { magnitude } else { -magnitude };
    (pos, vel)
}

/// Episodic behavior-policy sampler. Terminal transitions carry no successor
/// view; the next call starts a fresh episode from the start distribution.
pub struct MountainCarSampler<R: Rng> {
    rng: R,
    pos: f64,
    vel: f64,
    episode_steps: usize,
}

impl<R: Rng> MountainCarSampler<R> {
    pub fn new(mut rng: R) -> Self {
        let (pos, vel) = start_state(&mut rng);
        Self {
            rng,
            pos,
            vel,
            episode_steps: 0,
        }
    }

    pub fn state(&self) -> (f64, f64) {
        (self.pos, self.vel)
    }

    fn next_step_view(pos: f64, vel: f64) -> NextStep {
        let (mu, pi) = policies(pos, vel);
        NextStep {
            pi_probs: pi.to_vec(),
            mu_probs: mu.to_vec(),
            features: (0..N_ACTIONS)
                .map(|a| tile_code(pos, vel, a).expect("in-range state"))
                .collect(),
        }
    }

    pub fn step(&mut self) -> Result<Transition, MountainCarError> {
        let (mu, pi) = policies(self.pos, self.vel);
        let action = super::sample_categorical(&mut self.rng, &mu);
        let x = tile_code(self.pos, self.vel, action)?;
        let (pos2, vel2, reward, terminal) = step(self.pos, self.vel, action)?;

        let tr = Transition {
            x,
            reward,
            pi_prob: pi[action],
            mu_prob: mu[action],
            next: if terminal {
                None
            } else {
                Some(Self::next_step_view(pos2, vel2))
            },
        };

        if terminal {
            let (pos, vel) = start_state(&mut self.rng);
            self.pos = pos;
            self.vel = vel;
            self.episode_steps = 0;
        } else {
            self.pos = pos2;
            self.vel = vel2;
            self.episode_steps += 1;
            if self.episode_steps > EPISODE_STEP_CAP {
                return Err(MountainCarError::EpisodeTooLong);
            }
        }
        Ok(tr)
    }
}

/// Ground-truth bundle: the probe pairs, their Monte Carlo value estimates,
/// and the pairs' feature rows for fast NMSE evaluation.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub pairs: Vec<(f64, f64, usize)>,
    pub q_hat: DVector<f64>,
    /// Feature rows of the probe pairs, n_pairs × 96.
    pub features: DMatrix<f64>,
    /// Rollouts cut off by the γ^t < ROLLOUT_EPS rule before terminating.
    pub truncated_rollouts: u64,
}

/// Single target-policy rollout return from (pos, vel) after forcing
/// `action` first. Returns (discounted return, was truncated).
fn rollout_return<R: Rng>(
    rng: &mut R,
    mut pos: f64,
    mut vel: f64,
    mut action: usize,
) -> (f64, bool) {
    let mut ret = 0.0;
    let mut discount_pow = 1.0;
    loop {
        let (pos2, vel2, reward, terminal) = step(pos, vel, action).expect("in-range rollout");
        ret += discount_pow * reward;
        if terminal {
            return (ret, false);
        }
        discount_pow *= DISCOUNT;
        if discount_pow < ROLLOUT_EPS {
            return (ret, true);
        }
        pos = pos2;
        vel = vel2;
        let (_, pi) = policies(pos, vel);
        action = super::sample_categorical(rng, &pi);
    }
}

/// Probe-pair construction: run the behavior policy for `behavior_steps`
/// (restarting episodes on termination), draw `n_pairs` pairs uniformly from
/// the second half of the run, then estimate each pair's value by averaging
/// `n_rollouts` target-policy rollouts.
pub fn ground_truth_pairs<R: Rng>(
    mut rng: R,
    behavior_steps: usize,
    n_pairs: usize,
    n_rollouts: usize,
) -> Result<GroundTruth, MountainCarError> {
    let window_start = behavior_steps / 2;
    let mut window: Vec<(f64, f64, usize)> = Vec::with_capacity(behavior_steps - window_start);
    let (mut pos, mut vel) = start_state(&mut rng);
    let mut episode_steps = 0usize;
    for t in 0..behavior_steps {
        let (mu, _) = policies(pos, vel);
        let action = super::sample_categorical(&mut rng, &mu);
        if t >= window_start {
            window.push((pos, vel, action));
        }
        let (pos2, vel2, _, terminal) = step(pos, vel, action)?;
        if terminal {
            let (p, v) = start_state(&mut rng);
            pos = p;
            vel = v;
            episode_steps = 0;
        } else {
            pos = pos2;
            vel = vel2;
            episode_steps += 1;
            if episode_steps > EPISODE_STEP_CAP {
                return Err(MountainCarError::EpisodeTooLong);
            }
        }
    }

    // Uniform draw without replacement.
    let mut pairs = Vec::with_capacity(n_pairs);
    let mut chosen = std::collections::HashSet::new();
    while pairs.len() < n_pairs && chosen.len() < window.len() {
        let idx = rng.random_range(0..window.len());
        if chosen.insert(idx) {
            pairs.push(window[idx]);
        }
    }

    let mut q_hat = DVector::zeros(pairs.len());
    let mut truncated = 0u64;
    for (i, &(pos, vel, action)) in pairs.iter().enumerate() {
        let mut sum = 0.0;
        for _ in 0..n_rollouts {
            let (ret, was_truncated) = rollout_return(&mut rng, pos, vel, action);
            sum += ret;
            truncated += was_truncated as u64;
        }
        q_hat[i] = sum / n_rollouts as f64;
    }

    let features = DMatrix::from_fn(pairs.len(), N_FEATURES, |i, j| {
        let (pos, vel, action) = pairs[i];
        tile_code(pos, vel, action).expect("in-range pair")[j]
    });

    Ok(GroundTruth {
        pairs,
        q_hat,
        features,
        truncated_rollouts: truncated,
    })
}
