//! Online learners sharing one transition interface.
//!
//! A [`Transition`] carries everything a learner needs from one sampled step:
//! the current pair's feature vector and policy probabilities, the reward,
//! and the next state's per-action probabilities and features (absent at
//! terminals, where the expected next features are zero by convention and
//! traces reset at the following episode start).
//!
//! [`AbqLearner`] and [`AbTraceLearner`] implement the two-timescale
//! gradient-corrected update
//!
//! ```text
//! δ_t   = R_{t+1} + γ wᵀx̄_{t+1} - wᵀx_t
//! e_t   = γ ν_t π_t e_{t-1} + x_t
//! w_{t+1} = w_t + α (δ_t e_t - γ (e_tᵀ h_t)(x̄_{t+1} - x̃_{t+1}))
//! h_{t+1} = h_t + β (δ_t e_t - (h_tᵀ x_t) x_t)
//! ```
//!
//! with no importance sampling ratio anywhere. [`GqLearner`] is the
//! ratio-based comparator (trace decay γλρ, correction direction
//! (1-λ)x̄_{t+1}); [`TreeBackupLearner`] is the uncorrected tabular special
//! case with constant ν.
//!
//! The expected next feature x̃ has two published weightings that coincide
//! only for deterministic behavior: per-pair λ (the form consistent with the
//! MSPBE gradient, default here) and plain ν. [`XTildeForm`] selects between
//! them.

use nalgebra::DVector;
use thiserror::Error;

use crate::bootstrap::{BootstrapScheme, Variant};

/// Weight magnitude beyond which a run is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("weights diverged at step {step}")]
    Diverged { step: u64 },
    #[error("scheme variant {found:?} not accepted by this learner (expected {expected:?})")]
    WrongVariant { expected: Variant, found: Variant },
    #[error("Tree Backup requires tabular features; got a non-basis feature vector at step {step}")]
    NonTabularFeatures { step: u64 },
    #[error("transition has mu probability {0}, but sampled actions must have mu > 0")]
    UnsampledAction(f64),
}

/// Per-action view of the successor state.
#[derive(Debug, Clone)]
pub struct NextStep {
    pub pi_probs: Vec<f64>,
    pub mu_probs: Vec<f64>,
    pub features: Vec<DVector<f64>>,
}

/// One sampled step `(S_t, A_t, R_{t+1}, S_{t+1})`, reduced to the quantities
/// learners consume. `next` is `None` exactly at terminal transitions.
#[derive(Debug, Clone)]
pub struct Transition {
    /// x(S_t, A_t).
    pub x: DVector<f64>,
    pub reward: f64,
    /// π(A_t | S_t).
    pub pi_prob: f64,
    /// μ(A_t | S_t); positive, since the action was sampled from μ.
    pub mu_prob: f64,
    pub next: Option<NextStep>,
}

/// Which weighting builds x̃: the per-pair λ = ν·μ (consistent with the
/// MSPBE-gradient derivation) or plain ν.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum XTildeForm {
    #[default]
    LambdaWeighted,
    NuWeighted,
}

impl Transition {
    pub fn is_terminal(&self) -> bool {
        self.next.is_none()
    }

    /// Importance sampling ratio ρ_t = π_t/μ_t. Housed here for GQ and the
    /// oracles; the ABQ-family updates never touch it.
    pub fn rho(&self) -> f64 {
        self.pi_prob / self.mu_prob
    }

    /// x̄_{t+1} = Σ_a π(a|S_{t+1}) x(S_{t+1}, a); zero at terminals.
    pub fn x_bar_next(&self) -> DVector<f64> {
        let mut out = DVector::zeros(self.x.len());
        if let Some(next) = &self.next {
            for (a, x) in next.features.iter().enumerate() {
                let p = next.pi_probs[a];
                if p != 0.0 {
                    out.axpy(p, x, 1.0);
                }
            }
        }
        out
    }

    /// x̃_{t+1} = Σ_a weight(S_{t+1},a) π(a|S_{t+1}) x(S_{t+1}, a); zero at
    /// terminals. Terms with π = 0 are dropped before the weight is formed,
    /// which realizes the 0·∞ = 0 convention for unsupported pairs.
    pub fn x_tilde_next(&self, scheme: &BootstrapScheme, form: XTildeForm) -> DVector<f64> {
        let mut out = DVector::zeros(self.x.len());
        if let Some(next) = &self.next {
            for (a, x) in next.features.iter().enumerate() {
                let p = next.pi_probs[a];
                if p == 0.0 {
                    continue;
                }
                let weight = match form {
                    XTildeForm::LambdaWeighted => scheme.lambda_probs(next.mu_probs[a], p),
                    XTildeForm::NuWeighted => scheme.nu_probs(next.mu_probs[a], p),
                };
                if weight != 0.0 {
                    out.axpy(weight * p, x, 1.0);
                }
            }
        }
        out
    }
}

/// A step-size sequence. Constant steps are what the experiments use;
/// diminishing polynomial schedules (α_t ~ 1/t, β_t ~ 1/t^c with
/// c ∈ (1/2, 1)) are the two-timescale theory setting.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSchedule {
    Constant(f64),
    /// `scale / t^exponent`, with t counted from 1.
    Polynomial { scale: f64, exponent: f64 },
}

impl StepSchedule {
    pub fn at(&self, t: u64) -> f64 {
        match self {
            StepSchedule::Constant(v) => *v,
            StepSchedule::Polynomial { scale, exponent } => {
                scale / (t.max(1) as f64).powf(*exponent)
            }
        }
    }

    fn initial_nonnegative(&self) -> bool {
        self.at(1) >= 0.0
    }
}

/// Mutable per-run learner state: main weights, correction weights,
/// eligibility trace, and the current step sizes.
#[derive(Debug, Clone)]
pub struct LearnerState {
    pub w: DVector<f64>,
    pub h: DVector<f64>,
    pub e: DVector<f64>,
    pub alpha: f64,
    pub beta: f64,
}

impl LearnerState {
    pub fn new(n_features: usize, alpha: f64, beta: f64) -> Self {
        assert!(alpha > 0.0, "alpha must be positive");
        assert!(beta >= 0.0, "beta must be nonnegative");
        Self {
            w: DVector::zeros(n_features),
            h: DVector::zeros(n_features),
            e: DVector::zeros(n_features),
            alpha,
            beta,
        }
    }

    fn check_finite(&self, step: u64) -> Result<(), AgentError> {
        let ok = self
            .w
            .iter()
            .chain(self.h.iter())
            .chain(self.e.iter())
            .all(|v| v.is_finite())
            && self.w.amax() <= DIVERGENCE_LIMIT;
        if ok {
            Ok(())
        } else {
            Err(AgentError::Diverged { step })
        }
    }
}

/// Common interface over the online learners: feed transitions, reset traces
/// at episode boundaries, read weights.
pub trait Learner {
    fn step(&mut self, tr: &Transition) -> Result<(), AgentError>;
    /// Resets the eligibility trace; call at every episode start.
    fn begin_episode(&mut self);
    fn weights(&self) -> &DVector<f64>;
    /// Step index at which divergence was detected, if it was.
    fn diverged_at(&self) -> Option<u64>;
    fn state(&self) -> &LearnerState;
    /// Direct access to the weights and trace, e.g. to set task-prescribed
    /// initial weights or freeze `w` for the h-timescale studies.
    fn state_mut(&mut self) -> &mut LearnerState;
}

/// Shared body of the gradient-corrected update. `decay` is the trace decay
/// factor ν_tπ_t (or λρ_t for GQ) and `corr_dir` the correction direction
/// ((x̄ - x̃) or (1-λ)x̄).
fn gradient_corrected_update(
    state: &mut LearnerState,
    tr: &Transition,
    gamma: f64,
    decay: f64,
    x_bar: &DVector<f64>,
    corr_dir: &DVector<f64>,
) {
    let delta = tr.reward + gamma * state.w.dot(x_bar) - state.w.dot(&tr.x);
    // e_t = γ·decay·e_{t-1} + x_t
    state.e *= gamma * decay;
    state.e += &tr.x;
    let e_dot_h = state.e.dot(&state.h);
    // w += α(δe - γ(eᵀh)·corr_dir), using h_t throughout
    state.w.axpy(state.alpha * delta, &state.e, 1.0);
    state.w.axpy(-state.alpha * gamma * e_dot_h, corr_dir, 1.0);
    // h += β(δe - (hᵀx)x)
    if state.beta != 0.0 {
        let h_dot_x = state.h.dot(&tr.x);
        state.h.axpy(state.beta * delta, &state.e, 1.0);
        state.h.axpy(-state.beta * h_dot_x, &tr.x, 1.0);
    }
}

macro_rules! learner_common {
    () => {
        fn begin_episode(&mut self) {
            self.state.e.fill(0.0);
        }

        fn weights(&self) -> &DVector<f64> {
            &self.state.w
        }

        fn diverged_at(&self) -> Option<u64> {
            self.diverged
        }

        fn state(&self) -> &LearnerState {
            &self.state
        }

        fn state_mut(&mut self) -> &mut LearnerState {
            &mut self.state
        }
    };
}

/// ABQ(ζ): action-dependent bootstrapping with gradient correction.
#[derive(Debug, Clone)]
pub struct AbqLearner {
    state: LearnerState,
    scheme: BootstrapScheme,
    gamma: f64,
    x_tilde_form: XTildeForm,
    alpha_schedule: StepSchedule,
    beta_schedule: StepSchedule,
    steps: u64,
    diverged: Option<u64>,
}

impl AbqLearner {
    pub fn new(
        n_features: usize,
        scheme: BootstrapScheme,
        gamma: f64,
        alpha: f64,
        beta: f64,
    ) -> Result<Self, AgentError> {
        if scheme.variant() != Variant::Abq {
            return Err(AgentError::WrongVariant {
                expected: Variant::Abq,
                found: scheme.variant(),
            });
        }
        Ok(Self {
            state: LearnerState::new(n_features, alpha, beta),
            scheme,
            gamma,
            x_tilde_form: XTildeForm::default(),
            alpha_schedule: StepSchedule::Constant(alpha),
            beta_schedule: StepSchedule::Constant(beta),
            steps: 0,
            diverged: None,
        })
    }

    /// Selects the x̃ weighting; the λ-weighted default is the one the MSPBE
    /// gradient derivation produces.
    pub fn with_x_tilde_form(mut self, form: XTildeForm) -> Self {
        self.x_tilde_form = form;
        self
    }

    /// Replaces the constant step sizes with diminishing schedules.
    pub fn with_schedules(mut self, alpha: StepSchedule, beta: StepSchedule) -> Self {
        assert!(alpha.initial_nonnegative() && beta.initial_nonnegative());
        self.alpha_schedule = alpha;
        self.beta_schedule = beta;
        self
    }
}

fn corrected_step(
    state: &mut LearnerState,
    scheme: &BootstrapScheme,
    form: XTildeForm,
    gamma: f64,
    tr: &Transition,
    steps: &mut u64,
    diverged: &mut Option<u64>,
) -> Result<(), AgentError> {
    if let Some(step) = *diverged {
        return Err(AgentError::Diverged { step });
    }
    if tr.mu_prob <= 0.0 {
        return Err(AgentError::UnsampledAction(tr.mu_prob));
    }
    let decay = scheme.trace_decay(tr.mu_prob, tr.pi_prob);
    let x_bar = tr.x_bar_next();
    let corr_dir = &x_bar - tr.x_tilde_next(scheme, form);
    gradient_corrected_update(state, tr, gamma, decay, &x_bar, &corr_dir);
    *steps += 1;
    state.check_finite(*steps).inspect_err(|_| {
        *diverged = Some(*steps);
    })
}

impl Learner for AbqLearner {
    fn step(&mut self, tr: &Transition) -> Result<(), AgentError> {
        self.state.alpha = self.alpha_schedule.at(self.steps + 1);
        self.state.beta = self.beta_schedule.at(self.steps + 1);
        corrected_step(
            &mut self.state,
            &self.scheme,
            self.x_tilde_form,
            self.gamma,
            tr,
            &mut self.steps,
            &mut self.diverged,
        )
    }

    learner_common!();
}

/// AB-Trace(ζ): the Retrace-style trace decay ζ·min(1, ρ) with the same
/// gradient-corrected update as ABQ.
#[derive(Debug, Clone)]
pub struct AbTraceLearner {
    state: LearnerState,
    scheme: BootstrapScheme,
    gamma: f64,
    x_tilde_form: XTildeForm,
    alpha_schedule: StepSchedule,
    beta_schedule: StepSchedule,
    steps: u64,
    diverged: Option<u64>,
}

impl AbTraceLearner {
    pub fn new(
        n_features: usize,
        scheme: BootstrapScheme,
        gamma: f64,
        alpha: f64,
        beta: f64,
    ) -> Result<Self, AgentError> {
        if scheme.variant() != Variant::AbTrace {
            return Err(AgentError::WrongVariant {
                expected: Variant::AbTrace,
                found: scheme.variant(),
            });
        }
        Ok(Self {
            state: LearnerState::new(n_features, alpha, beta),
            scheme,
            gamma,
            x_tilde_form: XTildeForm::default(),
            alpha_schedule: StepSchedule::Constant(alpha),
            beta_schedule: StepSchedule::Constant(beta),
            steps: 0,
            diverged: None,
        })
    }

    pub fn with_x_tilde_form(mut self, form: XTildeForm) -> Self {
        self.x_tilde_form = form;
        self
    }

    pub fn with_schedules(mut self, alpha: StepSchedule, beta: StepSchedule) -> Self {
        assert!(alpha.initial_nonnegative() && beta.initial_nonnegative());
        self.alpha_schedule = alpha;
        self.beta_schedule = beta;
        self
    }
}

impl Learner for AbTraceLearner {
    fn step(&mut self, tr: &Transition) -> Result<(), AgentError> {
        self.state.alpha = self.alpha_schedule.at(self.steps + 1);
        self.state.beta = self.beta_schedule.at(self.steps + 1);
        corrected_step(
            &mut self.state,
            &self.scheme,
            self.x_tilde_form,
            self.gamma,
            tr,
            &mut self.steps,
            &mut self.diverged,
        )
    }

    learner_common!();
}

/// GQ(λ): the constant-λ importance-sampling learner with gradient
/// correction. Trace decay γλρ_t; correction direction γ(1-λ)(eᵀh)x̄.
#[derive(Debug, Clone)]
pub struct GqLearner {
    state: LearnerState,
    lambda: f64,
    gamma: f64,
    alpha_schedule: StepSchedule,
    beta_schedule: StepSchedule,
    steps: u64,
    diverged: Option<u64>,
}

impl GqLearner {
    pub fn new(
        n_features: usize,
        lambda: f64,
        gamma: f64,
        alpha: f64,
        beta: f64,
    ) -> Result<Self, AgentError> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(AgentError::WrongVariant {
                expected: Variant::ConstantLambda,
                found: Variant::ConstantLambda,
            });
        }
        Ok(Self {
            state: LearnerState::new(n_features, alpha, beta),
            lambda,
            gamma,
            alpha_schedule: StepSchedule::Constant(alpha),
            beta_schedule: StepSchedule::Constant(beta),
            steps: 0,
            diverged: None,
        })
    }

    pub fn with_schedules(mut self, alpha: StepSchedule, beta: StepSchedule) -> Self {
        assert!(alpha.initial_nonnegative() && beta.initial_nonnegative());
        self.alpha_schedule = alpha;
        self.beta_schedule = beta;
        self
    }
}

impl Learner for GqLearner {
    fn step(&mut self, tr: &Transition) -> Result<(), AgentError> {
        if let Some(step) = self.diverged {
            return Err(AgentError::Diverged { step });
        }
        if tr.mu_prob <= 0.0 {
            return Err(AgentError::UnsampledAction(tr.mu_prob));
        }
        self.state.alpha = self.alpha_schedule.at(self.steps + 1);
        self.state.beta = self.beta_schedule.at(self.steps + 1);
        let decay = self.lambda * tr.rho();
        let x_bar = tr.x_bar_next();
        let corr_dir = (1.0 - self.lambda) * &x_bar;
        gradient_corrected_update(&mut self.state, tr, self.gamma, decay, &x_bar, &corr_dir);
        self.steps += 1;
        self.state.check_finite(self.steps).inspect_err(|_| {
            self.diverged = Some(self.steps);
        })
    }

    learner_common!();
}

/// Tree Backup(ζ): tabular, uncorrected, constant ν = ζ. Rejects any feature
/// vector that is not a standard basis vector.
#[derive(Debug, Clone)]
pub struct TreeBackupLearner {
    state: LearnerState,
    scheme: BootstrapScheme,
    gamma: f64,
    alpha_schedule: StepSchedule,
    steps: u64,
    diverged: Option<u64>,
}

fn is_standard_basis(x: &DVector<f64>) -> bool {
    let mut ones = 0usize;
    for &v in x.iter() {
        if v == 1.0 {
            ones += 1;
        } else if v != 0.0 {
            return false;
        }
    }
    ones == 1
}

impl TreeBackupLearner {
    pub fn new(
        n_features: usize,
        scheme: BootstrapScheme,
        gamma: f64,
        alpha: f64,
    ) -> Result<Self, AgentError> {
        if scheme.variant() != Variant::TreeBackup {
            return Err(AgentError::WrongVariant {
                expected: Variant::TreeBackup,
                found: scheme.variant(),
            });
        }
        Ok(Self {
            state: LearnerState::new(n_features, alpha, 0.0),
            scheme,
            gamma,
            alpha_schedule: StepSchedule::Constant(alpha),
            steps: 0,
            diverged: None,
        })
    }

    pub fn with_schedule(mut self, alpha: StepSchedule) -> Self {
        assert!(alpha.initial_nonnegative());
        self.alpha_schedule = alpha;
        self
    }
}

impl Learner for TreeBackupLearner {
    fn step(&mut self, tr: &Transition) -> Result<(), AgentError> {
        if let Some(step) = self.diverged {
            return Err(AgentError::Diverged { step });
        }
        if tr.mu_prob <= 0.0 {
            return Err(AgentError::UnsampledAction(tr.mu_prob));
        }
        if !is_standard_basis(&tr.x) {
            return Err(AgentError::NonTabularFeatures { step: self.steps });
        }
        self.state.alpha = self.alpha_schedule.at(self.steps + 1);
        let decay = self.scheme.trace_decay(tr.mu_prob, tr.pi_prob);
        let x_bar = tr.x_bar_next();
        let delta = tr.reward + self.gamma * self.state.w.dot(&x_bar) - self.state.w.dot(&tr.x);
        self.state.e *= self.gamma * decay;
        self.state.e += &tr.x;
        self.state.w.axpy(self.state.alpha * delta, &self.state.e, 1.0);
        self.steps += 1;
        self.state.check_finite(self.steps).inspect_err(|_| {
            self.diverged = Some(self.steps);
        })
    }

    learner_common!();
}

/// Off-line forward-view deltas `Δw_t = α (H_t - wᵀx_t) x_t` over a frozen
/// trajectory, with the multi-step return truncated at the trajectory end.
pub fn offline_forward_deltas(
    traj: &[Transition],
    scheme: &BootstrapScheme,
    w: &DVector<f64>,
    gamma: f64,
    alpha: f64,
) -> Vec<DVector<f64>> {
    (0..traj.len())
        .map(|t| {
            let horizon = traj.len() - 1 - t;
            let target = crate::solvers::truncated_return(traj, scheme, w, gamma, t, horizon)
                .expect("horizon fits the trajectory");
            let mut delta = traj[t].x.clone();
            delta *= alpha * (target - w.dot(&traj[t].x));
            delta
        })
        .collect()
}

/// Off-line backward-view deltas `Δw_t = α δ_t e_t` with the trace recursion
/// `e_t = γ ν_t π_t e_{t-1} + x_t`, `w` frozen over the pass.
pub fn offline_backward_deltas(
    traj: &[Transition],
    scheme: &BootstrapScheme,
    w: &DVector<f64>,
    gamma: f64,
    alpha: f64,
) -> Vec<DVector<f64>> {
    let n = w.len();
    let mut e = DVector::zeros(n);
    traj.iter()
        .map(|tr| {
            let decay = scheme.trace_decay(tr.mu_prob, tr.pi_prob);
            e *= gamma * decay;
            e += &tr.x;
            let delta = tr.reward + gamma * w.dot(&tr.x_bar_next()) - w.dot(&tr.x);
            let mut dw = e.clone();
            dw *= alpha * delta;
            dw
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bootstrap::BootstrapScheme;
    use approx::assert_abs_diff_eq;

    fn simple_transition(x: f64, reward: f64, next_x: [f64; 2]) -> Transition {
        Transition {
            x: DVector::from_element(1, x),
            reward,
            pi_prob: 0.9,
            mu_prob: 0.1,
            next: Some(NextStep {
                pi_probs: vec![0.1, 0.9],
                mu_probs: vec![0.9, 0.1],
                features: vec![
                    DVector::from_element(1, next_x[0]),
                    DVector::from_element(1, next_x[1]),
                ],
            }),
        }
    }

    #[test]
    fn x_bar_is_pi_expectation() {
        let tr = simple_transition(1.0, 0.0, [2.0, 2.0]);
        assert_abs_diff_eq!(tr.x_bar_next()[0], 2.0, epsilon = 1e-15);
        let terminal = Transition {
            next: None,
            ..simple_transition(1.0, 0.0, [0.0, 0.0])
        };
        assert_eq!(terminal.x_bar_next()[0], 0.0);
    }

    #[test]
    fn zeta_zero_reduces_to_one_step() {
        // ν = 0 kills both the trace decay and x̃.
        let task = crate::envs::two_state();
        let scheme = BootstrapScheme::abq(0.0, &task.behavior, &task.target).unwrap();
        let mut learner = AbqLearner::new(1, scheme.clone(), 0.9, 0.1, 0.05).unwrap();
        let tr = simple_transition(1.0, 1.0, [2.0, 2.0]);
        learner.step(&tr).unwrap();
        assert_abs_diff_eq!(learner.state().e[0], 1.0, epsilon = 1e-15);
        assert_eq!(tr.x_tilde_next(&scheme, XTildeForm::LambdaWeighted)[0], 0.0);
        // One-step expected-Sarsa-style value: δ = 1 + 0.9·(w·2) - w·1 = 1 at w=0,
        // correction is zero because h starts at zero, so w = α·δ·x = 0.1.
        assert_abs_diff_eq!(learner.weights()[0], 0.1, epsilon = 1e-15);
    }

    #[test]
    fn beta_zero_is_pure_backward_view() {
        let task = crate::envs::two_state();
        let scheme = BootstrapScheme::abq(0.7, &task.behavior, &task.target).unwrap();
        let mut learner = AbqLearner::new(1, scheme.clone(), 0.9, 0.05, 0.0).unwrap();
        let trs: Vec<_> = (0..5)
            .map(|i| simple_transition(1.0 + (i % 2) as f64, 0.5, [2.0, 1.0]))
            .collect();
        for tr in &trs {
            learner.step(tr).unwrap();
        }
        // Replay the pure backward view by hand; with h ≡ 0 they must agree.
        let mut w = DVector::zeros(1);
        let mut e = DVector::zeros(1);
        for tr in &trs {
            let decay = scheme.trace_decay(tr.mu_prob, tr.pi_prob);
            e *= 0.9 * decay;
            e += &tr.x;
            let delta = tr.reward + 0.9 * w.dot(&tr.x_bar_next()) - w.dot(&tr.x);
            w.axpy(0.05 * delta, &e, 1.0);
        }
        assert_abs_diff_eq!(learner.weights()[0], w[0], epsilon = 1e-15);
        assert_eq!(learner.state().h[0], 0.0);
    }

    #[test]
    fn gq_matches_abq_at_the_zero_point() {
        let task = crate::envs::two_state();
        let scheme = BootstrapScheme::abq(0.0, &task.behavior, &task.target).unwrap();
        let mut abq = AbqLearner::new(1, scheme, 0.9, 0.02, 0.01).unwrap();
        let mut gq = GqLearner::new(1, 0.0, 0.9, 0.02, 0.01).unwrap();
        for i in 0..50 {
            let tr = simple_transition(1.0 + (i % 2) as f64, (i % 3) as f64, [2.0, 1.0]);
            abq.step(&tr).unwrap();
            gq.step(&tr).unwrap();
            assert_eq!(abq.weights()[0], gq.weights()[0]);
            assert_eq!(abq.state().h[0], gq.state().h[0]);
        }
    }

    #[test]
    fn tree_backup_rejects_non_tabular_features() {
        let scheme = BootstrapScheme::tree_backup(0.5).unwrap();
        let mut learner = TreeBackupLearner::new(1, scheme, 0.9, 0.1).unwrap();
        let tr = simple_transition(2.0, 0.0, [1.0, 1.0]);
        assert!(matches!(
            learner.step(&tr).unwrap_err(),
            AgentError::NonTabularFeatures { .. }
        ));
    }

    #[test]
    fn tree_backup_trace_decay_capped_by_gamma_zeta() {
        let scheme = BootstrapScheme::tree_backup(0.8).unwrap();
        let gamma = 0.9;
        let mut learner = TreeBackupLearner::new(2, scheme, gamma, 0.1).unwrap();
        let mut x0 = DVector::zeros(2);
        x0[0] = 1.0;
        let tr = Transition {
            x: x0.clone(),
            reward: 0.0,
            pi_prob: 1.0,
            mu_prob: 0.5,
            next: Some(NextStep {
                pi_probs: vec![1.0, 0.0],
                mu_probs: vec![0.5, 0.5],
                features: vec![x0.clone(), DVector::zeros(2)],
            }),
        };
        let mut bound = 0.0;
        for _ in 0..100 {
            learner.step(&tr).unwrap();
            bound = bound * gamma * 0.8 + 1.0;
            assert!(learner.state().e.amax() <= bound + 1e-12);
        }
    }

    #[test]
    fn polynomial_schedules_diminish() {
        let schedule = StepSchedule::Polynomial {
            scale: 1.0,
            exponent: 0.7,
        };
        assert_eq!(schedule.at(1), 1.0);
        assert!((schedule.at(100) - 100f64.powf(-0.7)).abs() < 1e-15);

        let task = crate::envs::two_state();
        let scheme = BootstrapScheme::abq(0.5, &task.behavior, &task.target).unwrap();
        let mut learner = AbqLearner::new(1, scheme, 0.9, 0.01, 0.01)
            .unwrap()
            .with_schedules(
                StepSchedule::Polynomial {
                    scale: 0.5,
                    exponent: 1.0,
                },
                schedule,
            );
        let tr = simple_transition(1.0, 0.5, [2.0, 1.0]);
        for t in 1..=10u64 {
            learner.step(&tr).unwrap();
            assert_eq!(learner.state().alpha, 0.5 / t as f64);
            assert_abs_diff_eq!(
                learner.state().beta,
                1.0 / (t as f64).powf(0.7),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn divergence_is_detected_and_sticky() {
        let mut learner = GqLearner::new(1, 1.0, 0.999, 1e6, 0.0).unwrap();
        let tr = simple_transition(1.0, 1.0, [1.0, 1.0]);
        let mut diverged = None;
        for _ in 0..100_000 {
            if let Err(AgentError::Diverged { step }) = learner.step(&tr) {
                diverged = Some(step);
                break;
            }
        }
        let step = diverged.expect("blow-up should trip the limit");
        assert_eq!(learner.diverged_at(), Some(step));
        assert!(matches!(
            learner.step(&tr).unwrap_err(),
            AgentError::Diverged { .. }
        ));
    }

    #[test]
    fn unsampled_action_rejected() {
        let mut learner = GqLearner::new(1, 0.5, 0.9, 0.1, 0.0).unwrap();
        let tr = Transition {
            mu_prob: 0.0,
            ..simple_transition(1.0, 0.0, [1.0, 1.0])
        };
        assert!(matches!(
            learner.step(&tr).unwrap_err(),
            AgentError::UnsampledAction(_)
        ));
    }
}
