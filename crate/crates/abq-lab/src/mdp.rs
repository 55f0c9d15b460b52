//! Finite-MDP model types and the derived linear-algebra objects that the
//! solvers and environments consume: the state-action transition matrix
//! `P_pi`, the behavior stationary distribution `d_mu`, and the exact
//! action-value function `q_pi`.
//!
//! All vectors and matrices over state-action pairs use one canonical
//! enumeration, `sa = s * n_actions + a` (see [`pair_index`]). Types are
//! immutable after construction and all operations here are pure functions,
//! so everything can be shared freely across threads.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use thiserror::Error;

/// Probability rows must sum to one within this tolerance at construction;
/// they are then renormalized exactly. Anything worse is rejected.
pub const PROB_TOL: f64 = 1e-12;

/// Residual tolerance for the stationary-distribution fixed point.
pub const STATIONARY_TOL: f64 = 1e-10;

/// Residual tolerance for the Bellman equation satisfied by `q_pi`.
pub const BELLMAN_TOL: f64 = 1e-10;

/// Pair counts up to this size use a direct linear solve for the stationary
/// distribution; larger chains fall back to power iteration.
const DIRECT_SOLVE_LIMIT: usize = 600;

const POWER_ITER_CAP: usize = 1_000_000;
const POWER_ITER_TOL: f64 = 1e-12;

/// Canonical state-action enumeration used by every matrix and vector over
/// pairs in this crate.
#[inline]
pub fn pair_index(state: usize, action: usize, n_actions: usize) -> usize {
    state * n_actions + action
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{what} row {row} sums to {sum:e}, expected 1 within {PROB_TOL:e}")]
    NotStochastic {
        what: &'static str,
        row: usize,
        sum: f64,
    },
    #[error("{what} row {row} contains negative entry {value:e}")]
    NegativeProbability {
        what: &'static str,
        row: usize,
        value: f64,
    },
    #[error("discount factor must lie in [0, 1), got {0}")]
    BadDiscount(f64),
    #[error("behavior chain not irreducible: {0}")]
    NotIrreducible(String),
    #[error("singular linear system: {0}")]
    SingularSystem(String),
    #[error("model file: {0}")]
    File(String),
}

/// Validates that each row of `m` is a probability distribution, fixing tiny
/// negative entries and renormalizing in place. Rejects anything outside
/// [`PROB_TOL`].
fn validate_rows(m: &mut DMatrix<f64>, what: &'static str) -> Result<(), ModelError> {
    for row in 0..m.nrows() {
        let mut sum = 0.0;
        for col in 0..m.ncols() {
            let v = m[(row, col)];
            if v < -PROB_TOL {
                return Err(ModelError::NegativeProbability {
                    what,
                    row,
                    value: v,
                });
            }
            if v < 0.0 {
                m[(row, col)] = 0.0;
            }
            sum += m[(row, col)];
        }
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(ModelError::NotStochastic { what, row, sum });
        }
        for col in 0..m.ncols() {
            m[(row, col)] /= sum;
        }
    }
    Ok(())
}

/// A finite Markov decision process: transition kernel `p(s'|s,a)`, mean
/// rewards `r(s,a)`, and discount `γ < 1`.
#[derive(Debug, Clone)]
pub struct Mdp {
    n_states: usize,
    n_actions: usize,
    /// Row `sa` holds `p(·|s,a)`; shape (S·A) × S.
    transition: DMatrix<f64>,
    /// Shape S × A.
    reward: DMatrix<f64>,
    discount: f64,
}

impl Mdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        mut transition: DMatrix<f64>,
        reward: DMatrix<f64>,
        discount: f64,
    ) -> Result<Self, ModelError> {
        if n_states == 0 || n_actions == 0 {
            return Err(ModelError::DimensionMismatch(
                "state and action counts must be positive".into(),
            ));
        }
        let pairs = n_states * n_actions;
        if transition.nrows() != pairs || transition.ncols() != n_states {
            return Err(ModelError::DimensionMismatch(format!(
                "transition is {}x{}, expected {}x{}",
                transition.nrows(),
                transition.ncols(),
                pairs,
                n_states
            )));
        }
        if reward.nrows() != n_states || reward.ncols() != n_actions {
            return Err(ModelError::DimensionMismatch(format!(
                "reward is {}x{}, expected {}x{}",
                reward.nrows(),
                reward.ncols(),
                n_states,
                n_actions
            )));
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(ModelError::BadDiscount(discount));
        }
        validate_rows(&mut transition, "transition")?;
        Ok(Self {
            n_states,
            n_actions,
            transition,
            reward,
            discount,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Number of state-action pairs, S·A.
    pub fn n_pairs(&self) -> usize {
        self.n_states * self.n_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// `p(next | state, action)`.
    pub fn transition_prob(&self, state: usize, action: usize, next: usize) -> f64 {
        self.transition[(pair_index(state, action, self.n_actions), next)]
    }

    /// Row `sa` of the transition kernel as a slice over next states.
    pub fn transition_row(&self, state: usize, action: usize) -> Vec<f64> {
        self.transition
            .row(pair_index(state, action, self.n_actions))
            .iter()
            .copied()
            .collect()
    }

    pub fn reward(&self, state: usize, action: usize) -> f64 {
        self.reward[(state, action)]
    }

    /// Mean rewards as a vector over pairs in canonical order.
    pub fn reward_pairs(&self) -> DVector<f64> {
        DVector::from_fn(self.n_pairs(), |sa, _| {
            self.reward[(sa / self.n_actions, sa % self.n_actions)]
        })
    }
}

/// A randomized stationary policy: `probs[(s, a)] = Pr(a | s)`. Used for both
/// the target policy π and the behavior policy μ.
#[derive(Debug, Clone)]
pub struct Policy {
    probs: DMatrix<f64>,
}

impl Policy {
    pub fn new(mut probs: DMatrix<f64>) -> Result<Self, ModelError> {
        if probs.nrows() == 0 || probs.ncols() == 0 {
            return Err(ModelError::DimensionMismatch("empty policy".into()));
        }
        validate_rows(&mut probs, "policy")?;
        Ok(Self { probs })
    }

    /// Uniform policy over `n_actions` in every state.
    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            probs: DMatrix::from_element(n_states, n_actions, 1.0 / n_actions as f64),
        }
    }

    pub fn n_states(&self) -> usize {
        self.probs.nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.probs.ncols()
    }

    pub fn prob(&self, state: usize, action: usize) -> f64 {
        self.probs[(state, action)]
    }

    pub fn action_probs(&self, state: usize) -> Vec<f64> {
        self.probs.row(state).iter().copied().collect()
    }
}

/// Feature matrix X with one row per state-action pair in canonical order.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    n_actions: usize,
    x: DMatrix<f64>,
}

impl FeatureMap {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        x: DMatrix<f64>,
    ) -> Result<Self, ModelError> {
        if x.nrows() != n_states * n_actions {
            return Err(ModelError::DimensionMismatch(format!(
                "feature matrix has {} rows, expected {}",
                x.nrows(),
                n_states * n_actions
            )));
        }
        if x.ncols() == 0 {
            return Err(ModelError::DimensionMismatch(
                "feature dimension must be positive".into(),
            ));
        }
        Ok(Self { n_actions, x })
    }

    /// Tabular features: X is the (S·A) identity.
    pub fn tabular(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_actions,
            x: DMatrix::identity(n_states * n_actions, n_states * n_actions),
        }
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// Feature vector x(s,a) as a column vector.
    pub fn feature(&self, state: usize, action: usize) -> DVector<f64> {
        self.x
            .row(pair_index(state, action, self.n_actions))
            .transpose()
    }

    /// True when X is exactly the identity (lookup-table representation).
    pub fn is_tabular(&self) -> bool {
        self.x.is_square() && self.x == DMatrix::identity(self.x.nrows(), self.x.ncols())
    }
}

/// A probability distribution over state-action pairs, canonically ordered.
#[derive(Debug, Clone)]
pub struct StateActionDist {
    d: DVector<f64>,
}

impl StateActionDist {
    pub fn new(mut d: DVector<f64>) -> Result<Self, ModelError> {
        for i in 0..d.len() {
            if d[i] < -STATIONARY_TOL {
                return Err(ModelError::NegativeProbability {
                    what: "state-action distribution",
                    row: i,
                    value: d[i],
                });
            }
            if d[i] < 0.0 {
                d[i] = 0.0;
            }
        }
        let sum = d.sum();
        if (sum - 1.0).abs() > STATIONARY_TOL {
            return Err(ModelError::NotStochastic {
                what: "state-action distribution",
                row: 0,
                sum,
            });
        }
        d /= sum;
        Ok(Self { d })
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.d
    }

    pub fn prob(&self, sa: usize) -> f64 {
        self.d[sa]
    }
}

fn check_dims(mdp: &Mdp, policy: &Policy) -> Result<(), ModelError> {
    if policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions() {
        return Err(ModelError::DimensionMismatch(format!(
            "policy is {}x{}, MDP is {} states x {} actions",
            policy.n_states(),
            policy.n_actions(),
            mdp.n_states(),
            mdp.n_actions()
        )));
    }
    Ok(())
}

/// The transition matrix of the Markov chain on state-action pairs induced
/// by following `pi`: `[P_pi]_{sa,s'a'} = p(s'|s,a) π(a'|s')`.
pub fn target_transition_matrix(mdp: &Mdp, pi: &Policy) -> Result<DMatrix<f64>, ModelError> {
    check_dims(mdp, pi)?;
    let pairs = mdp.n_pairs();
    let na = mdp.n_actions();
    let mut p = DMatrix::zeros(pairs, pairs);
    for sa in 0..pairs {
        for s2 in 0..mdp.n_states() {
            let trans = mdp.transition[(sa, s2)];
            if trans == 0.0 {
                continue;
            }
            for a2 in 0..na {
                p[(sa, pair_index(s2, a2, na))] = trans * pi.prob(s2, a2);
            }
        }
    }
    Ok(p)
}

/// Stationary distribution of the behavior chain `P_mu` over pairs.
///
/// Solves the null-space system `(P_muᵀ - I) d = 0` with the normalization
/// `Σd = 1` directly at desk scale, falling back to power iteration for
/// large chains. Chains for which no valid fixed point is found (reducible
/// or otherwise degenerate) are rejected with [`ModelError::NotIrreducible`],
/// never answered silently.
pub fn stationary_distribution(mdp: &Mdp, mu: &Policy) -> Result<StateActionDist, ModelError> {
    let p_mu = target_transition_matrix(mdp, mu)?;
    let pairs = p_mu.nrows();

    let d = if pairs <= DIRECT_SOLVE_LIMIT {
        // (P^T - I) with the last equation replaced by the normalization row.
        // For an irreducible chain the rows of (P^T - I) sum to zero, so
        // dropping one keeps rank S·A - 1 and the bordered system is
        // nonsingular; reducible chains make it singular.
        let mut m = p_mu.transpose() - DMatrix::identity(pairs, pairs);
        let mut rhs = DVector::zeros(pairs);
        for col in 0..pairs {
            m[(pairs - 1, col)] = 1.0;
        }
        rhs[pairs - 1] = 1.0;
        m.lu().solve(&rhs).ok_or_else(|| {
            ModelError::NotIrreducible("null-space system is singular".into())
        })?
    } else {
        let pt = p_mu.transpose();
        let mut d = DVector::from_element(pairs, 1.0 / pairs as f64);
        let mut converged = false;
        for _ in 0..POWER_ITER_CAP {
            let mut next = &pt * &d;
            next /= next.sum();
            let delta = (&next - &d).amax();
            d = next;
            if delta < POWER_ITER_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(ModelError::NotIrreducible(format!(
                "power iteration did not converge within {POWER_ITER_CAP} iterations"
            )));
        }
        d
    };

    let dist = StateActionDist::new(d).map_err(|e| {
        ModelError::NotIrreducible(format!("fixed point is not a distribution: {e}"))
    })?;
    let residual = (dist.vector().transpose() * &p_mu - dist.vector().transpose()).amax();
    if residual > STATIONARY_TOL {
        return Err(ModelError::NotIrreducible(format!(
            "fixed-point residual {residual:e} exceeds {STATIONARY_TOL:e}"
        )));
    }
    Ok(dist)
}

/// Exact action values of the target policy: `q_pi = (I - γ P_pi)^{-1} r`.
pub fn exact_q_pi(mdp: &Mdp, pi: &Policy) -> Result<DVector<f64>, ModelError> {
    let p_pi = target_transition_matrix(mdp, pi)?;
    let pairs = p_pi.nrows();
    let m = DMatrix::identity(pairs, pairs) - mdp.discount() * &p_pi;
    let r = mdp.reward_pairs();
    let q = m
        .lu()
        .solve(&r)
        .ok_or_else(|| ModelError::SingularSystem("(I - γP_pi) q = r".into()))?;
    let residual = (&r + mdp.discount() * &p_pi * &q - &q).amax();
    if residual > BELLMAN_TOL * (1.0 + q.amax()) {
        return Err(ModelError::SingularSystem(format!(
            "Bellman residual {residual:e} after solve"
        )));
    }
    Ok(q)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelPoliciesJson {
    target: Vec<Vec<f64>>,
    behavior: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFileJson {
    n_states: usize,
    n_actions: usize,
    /// Row-major nesting in canonical order: transition[s][a][s'].
    transition: Vec<Vec<Vec<f64>>>,
    reward_mean: Vec<Vec<f64>>,
    discount: f64,
    policies: ModelPoliciesJson,
    features: Vec<Vec<f64>>,
}

/// A complete model loaded from a JSON document: the MDP, both policies,
/// and the feature map.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub mdp: Mdp,
    pub target: Policy,
    pub behavior: Policy,
    pub features: FeatureMap,
}

fn nested_to_matrix(
    rows: &[Vec<f64>],
    ncols: usize,
    what: &str,
) -> Result<DMatrix<f64>, ModelError> {
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(ModelError::File(format!(
                "{what} row {i} has {} entries, expected {ncols}",
                row.len()
            )));
        }
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]))
}

impl LoadedModel {
    pub fn from_json_str(text: &str) -> Result<Self, ModelError> {
        let raw: ModelFileJson =
            serde_json::from_str(text).map_err(|e| ModelError::File(e.to_string()))?;
        let s = raw.n_states;
        let a = raw.n_actions;
        if raw.transition.len() != s {
            return Err(ModelError::File(format!(
                "transition has {} state entries, expected {s}",
                raw.transition.len()
            )));
        }
        let mut trans = DMatrix::zeros(s * a, s);
        for (si, per_action) in raw.transition.iter().enumerate() {
            if per_action.len() != a {
                return Err(ModelError::File(format!(
                    "transition[{si}] has {} action entries, expected {a}",
                    per_action.len()
                )));
            }
            for (ai, row) in per_action.iter().enumerate() {
                if row.len() != s {
                    return Err(ModelError::File(format!(
                        "transition[{si}][{ai}] has {} entries, expected {s}",
                        row.len()
                    )));
                }
                for (s2, &p) in row.iter().enumerate() {
                    trans[(pair_index(si, ai, a), s2)] = p;
                }
            }
        }
        let reward = nested_to_matrix(&raw.reward_mean, a, "reward_mean")?;
        let mdp = Mdp::new(s, a, trans, reward, raw.discount)?;
        let target = Policy::new(nested_to_matrix(&raw.policies.target, a, "target policy")?)?;
        let behavior = Policy::new(nested_to_matrix(
            &raw.policies.behavior,
            a,
            "behavior policy",
        )?)?;
        let n_features = raw
            .features
            .first()
            .map(Vec::len)
            .ok_or_else(|| ModelError::File("features must be non-empty".into()))?;
        let features =
            FeatureMap::new(s, a, nested_to_matrix(&raw.features, n_features, "features")?)?;
        Ok(Self {
            mdp,
            target,
            behavior,
            features,
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ModelError::File(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::two_state;
    use approx::assert_abs_diff_eq;

    fn single_state_mdp(reward: f64, discount: f64) -> Mdp {
        Mdp::new(
            1,
            1,
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, reward),
            discount,
        )
        .unwrap()
    }

    #[test]
    fn one_state_one_action_chain() {
        let mdp = single_state_mdp(0.0, 0.5);
        let pi = Policy::uniform(1, 1);
        let p = target_transition_matrix(&mdp, &pi).unwrap();
        assert_eq!(p, DMatrix::from_element(1, 1, 1.0));
    }

    #[test]
    fn two_state_target_matrix_row() {
        let task = two_state();
        let p = target_transition_matrix(&task.mdp, &task.target).unwrap();
        // From (state 1, right) the chain lands in state 2 and then follows
        // the target policy: mass 0.1 on (2, left), 0.9 on (2, right).
        let row = pair_index(0, 1, 2);
        assert_abs_diff_eq!(p[(row, pair_index(1, 0, 2))], 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(p[(row, pair_index(1, 1, 2))], 0.9, epsilon = 1e-15);
        assert_eq!(p[(row, pair_index(0, 0, 2))], 0.0);
        assert_eq!(p[(row, pair_index(0, 1, 2))], 0.0);
    }

    #[test]
    fn target_matrix_rows_are_stochastic() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let (s, a) = (3, 2);
        let mut trans = DMatrix::zeros(s * a, s);
        for row in 0..s * a {
            let mut sum = 0.0;
            for col in 0..s {
                let v: f64 = rng.random();
                trans[(row, col)] = v;
                sum += v;
            }
            for col in 0..s {
                trans[(row, col)] /= sum;
            }
        }
        let mdp = Mdp::new(s, a, trans, DMatrix::zeros(s, a), 0.9).unwrap();
        let pi = Policy::uniform(s, a);
        let p = target_transition_matrix(&mdp, &pi).unwrap();
        for row in 0..s * a {
            let sum: f64 = p.row(row).iter().sum();
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn stationary_of_symmetric_swap_is_uniform() {
        // Two states, one action, deterministic swap. The chain is periodic
        // but irreducible; the direct solve must still find the uniform
        // fixed point.
        let trans = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let mdp = Mdp::new(2, 1, trans, DMatrix::zeros(2, 1), 0.9).unwrap();
        let d = stationary_distribution(&mdp, &Policy::uniform(2, 1)).unwrap();
        assert_abs_diff_eq!(d.prob(0), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(d.prob(1), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn two_state_stationary_distribution() {
        let task = two_state();
        let d = stationary_distribution(&task.mdp, &task.behavior).unwrap();
        // Hand-solved 4x4 eigenproblem for the behavior chain.
        let expected = [0.05, 0.45, 0.45, 0.05];
        for (sa, &e) in expected.iter().enumerate() {
            assert_abs_diff_eq!(d.prob(sa), e, epsilon = 1e-12);
        }
        let p_mu = target_transition_matrix(&task.mdp, &task.behavior).unwrap();
        let residual = (d.vector().transpose() * &p_mu - d.vector().transpose()).amax();
        assert!(residual <= STATIONARY_TOL);
    }

    #[test]
    fn reducible_chain_rejected() {
        // Two disjoint self-loops: stationary distribution is not unique.
        let trans = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let mdp = Mdp::new(2, 1, trans, DMatrix::zeros(2, 1), 0.9).unwrap();
        let err = stationary_distribution(&mdp, &Policy::uniform(2, 1)).unwrap_err();
        assert!(matches!(err, ModelError::NotIrreducible(_)));
    }

    #[test]
    fn q_pi_zero_rewards() {
        let task = two_state();
        let zero_reward = Mdp::new(
            2,
            2,
            DMatrix::from_fn(4, 2, |sa, s2| {
                task.mdp.transition_prob(sa / 2, sa % 2, s2)
            }),
            DMatrix::zeros(2, 2),
            0.9,
        )
        .unwrap();
        let q = exact_q_pi(&zero_reward, &task.target).unwrap();
        assert!(q.amax() <= 1e-12);
    }

    #[test]
    fn q_pi_geometric_series() {
        let mdp = single_state_mdp(1.0, 0.9);
        let q = exact_q_pi(&mdp, &Policy::uniform(1, 1)).unwrap();
        assert_abs_diff_eq!(q[0], 10.0, epsilon = 1e-10);
    }

    #[test]
    fn q_pi_satisfies_bellman_equation() {
        let task = two_state();
        let q = exact_q_pi(&task.mdp, &task.target).unwrap();
        let p = target_transition_matrix(&task.mdp, &task.target).unwrap();
        let residual = (task.mdp.reward_pairs() + 0.9 * &p * &q - &q).amax();
        assert!(residual <= BELLMAN_TOL);
    }

    #[test]
    fn rejects_malformed_probabilities() {
        let trans = DMatrix::from_row_slice(1, 1, &[0.5]);
        let err = Mdp::new(1, 1, trans, DMatrix::zeros(1, 1), 0.9).unwrap_err();
        assert!(matches!(err, ModelError::NotStochastic { .. }));

        let err = Policy::new(DMatrix::from_row_slice(1, 2, &[1.2, -0.2])).unwrap_err();
        assert!(matches!(err, ModelError::NegativeProbability { .. }));

        let err = Mdp::new(
            1,
            1,
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
            1.0,
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::BadDiscount(_)));
    }

    #[test]
    fn model_file_round_trip() {
        let text = r#"{
            "n_states": 2, "n_actions": 2,
            "transition": [[[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 1.0]]],
            "reward_mean": [[0.0, 0.0], [0.0, 1.0]],
            "discount": 0.9,
            "policies": {
                "target": [[0.1, 0.9], [0.1, 0.9]],
                "behavior": [[0.1, 0.9], [0.9, 0.1]]
            },
            "features": [[1.0], [1.0], [2.0], [2.0]]
        }"#;
        let model = LoadedModel::from_json_str(text).unwrap();
        assert_eq!(model.mdp.n_states(), 2);
        assert_eq!(model.features.n_features(), 1);
        // Matches the built-in two-state task exactly.
        let task = two_state();
        assert_eq!(model.mdp.reward_pairs(), task.mdp.reward_pairs());
        assert_eq!(model.features.matrix(), task.features.matrix());
    }

    #[test]
    fn model_file_rejects_unknown_fields_and_bad_shapes() {
        assert!(LoadedModel::from_json_str(r#"{"bogus": 1}"#).is_err());
        let short = r#"{
            "n_states": 2, "n_actions": 1,
            "transition": [[[1.0, 0.0]]],
            "reward_mean": [[0.0], [0.0]],
            "discount": 0.9,
            "policies": {"target": [[1.0], [1.0]], "behavior": [[1.0], [1.0]]},
            "features": [[1.0], [1.0]]
        }"#;
        assert!(matches!(
            LoadedModel::from_json_str(short).unwrap_err(),
            ModelError::File(_)
        ));
    }

    #[test]
    fn tabular_feature_map() {
        let f = FeatureMap::tabular(2, 2);
        assert!(f.is_tabular());
        assert_eq!(f.n_features(), 4);
        let x = f.feature(1, 0);
        assert_eq!(x[pair_index(1, 0, 2)], 1.0);
        assert_eq!(x.sum(), 1.0);
    }
}
