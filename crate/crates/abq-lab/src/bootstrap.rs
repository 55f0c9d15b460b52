//! Action-dependent bootstrapping schemes.
//!
//! Every learner in this crate decays its eligibility trace by `γ·ν·π` and
//! bootstraps each pair by `λ(s,a) = ν(s,a)·μ(a|s)`; the schemes here differ
//! only in how ν is produced:
//!
//! - `Abq`: ν = min(ψ(ζ), 1/max(μ, π)), with ψ a piecewise-linear rescaling
//!   of ζ ∈ [0,1] through the pivots ψ0 (first cap engages) and ψ_max (all
//!   caps engage). The product λ·ρ = ν·π never exceeds one, which is the
//!   whole point: no importance sampling ratio ever appears in an update.
//! - `AbTrace`: ν = ζ·min(1/π, 1/μ), so the trace decays by ζ·min(1, ρ);
//!   tabular and uncorrected this is exactly Retrace.
//! - `ConstantLambda`: ν = λ/μ, recovering ordinary off-policy Q(λ) with a
//!   constant bootstrapping parameter (and its ratio products).
//! - `TreeBackup`: ν = ζ constant.
//!
//! Division conventions follow 1/0 = ∞ and 0·∞ = 0, so λ is total even on
//! pairs the behavior policy never samples.

use nalgebra::DVector;
use thiserror::Error;

use crate::mdp::{pair_index, Policy};

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("{name} must lie in [0, 1], got {value}")]
    ParameterOutOfRange { name: &'static str, value: f64 },
    #[error("psi must lie in [0, psi_max = {psi_max}], got {psi}")]
    PsiOutOfRange { psi: f64, psi_max: f64 },
    #[error("policies disagree in shape: {0}")]
    DimensionMismatch(String),
    #[error(
        "state {state}, action {action} has max(mu, pi) = 0, so psi_max is infinite; \
         schemes require some support on every pair"
    )]
    UnboundedPsi { state: usize, action: usize },
}

/// Which member of the family a [`BootstrapScheme`] instantiates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Abq,
    AbTrace,
    ConstantLambda,
    TreeBackup,
}

/// The ψ pivots: ψ0 = 1/max_{s,a} max(μ,π), the largest ψ at which no cap is
/// active, and ψ_max = 1/min_{s,a} max(μ,π), beyond which every pair is
/// capped.
pub fn psi_pivots(mu: &Policy, pi: &Policy) -> Result<(f64, f64), SchemeError> {
    if mu.n_states() != pi.n_states() || mu.n_actions() != pi.n_actions() {
        return Err(SchemeError::DimensionMismatch(format!(
            "mu is {}x{}, pi is {}x{}",
            mu.n_states(),
            mu.n_actions(),
            pi.n_states(),
            pi.n_actions()
        )));
    }
    let mut largest = f64::NEG_INFINITY;
    let mut smallest = f64::INFINITY;
    for s in 0..mu.n_states() {
        for a in 0..mu.n_actions() {
            let m = mu.prob(s, a).max(pi.prob(s, a));
            if m == 0.0 {
                return Err(SchemeError::UnboundedPsi {
                    state: s,
                    action: a,
                });
            }
            largest = largest.max(m);
            smallest = smallest.min(m);
        }
    }
    Ok((1.0 / largest, 1.0 / smallest))
}

/// Piecewise-linear map from the tunable ζ ∈ [0,1] to ψ:
/// `ψ(ζ) = 2ζψ0 + (2ζ-1)⁺ (ψ_max - 2ψ0)`, so ζ = 0, 0.5, 1 give
/// ψ = 0, ψ0, ψ_max.
pub fn psi_from_zeta(zeta: f64, psi0: f64, psi_max: f64) -> Result<f64, SchemeError> {
    if !(0.0..=1.0).contains(&zeta) {
        return Err(SchemeError::ParameterOutOfRange {
            name: "zeta",
            value: zeta,
        });
    }
    let kink = (2.0 * zeta - 1.0).max(0.0);
    Ok(2.0 * zeta * psi0 + kink * (psi_max - 2.0 * psi0))
}

/// Exact inverse of [`psi_from_zeta`]:
/// `ζ = (ψ - ψ0)⁺ (2ψ0 - ψ_max) / (2(ψ_max - ψ0)ψ0) + ψ/(2ψ0)`.
pub fn zeta_from_psi(psi: f64, psi0: f64, psi_max: f64) -> Result<f64, SchemeError> {
    if psi < 0.0 || psi > psi_max {
        return Err(SchemeError::PsiOutOfRange { psi, psi_max });
    }
    let base = psi / (2.0 * psi0);
    if psi <= psi0 {
        // The (ψ - ψ0)⁺ factor vanishes; avoids 0/0 when ψ_max = ψ0.
        return Ok(base);
    }
    Ok((psi - psi0) * (2.0 * psi0 - psi_max) / (2.0 * (psi_max - psi0) * psi0) + base)
}

/// A fully configured bootstrapping scheme. ABQ caches its ψ pivots at
/// construction from the explicit policy pair, so per-step evaluation needs
/// only the sampled pair's probabilities.
#[derive(Clone, Debug)]
pub struct BootstrapScheme {
    variant: Variant,
    /// ζ for Abq/AbTrace/TreeBackup, λ for ConstantLambda.
    parameter: f64,
    /// Cached ψ(ζ), ψ0, ψ_max; meaningful for Abq only.
    psi: f64,
    psi0: f64,
    psi_max: f64,
}

fn check_unit_interval(name: &'static str, value: f64) -> Result<(), SchemeError> {
    if !(0.0..=1.0).contains(&value) {
        return Err(SchemeError::ParameterOutOfRange { name, value });
    }
    Ok(())
}

impl BootstrapScheme {
    /// ABQ(ζ) for a given policy pair; computes and caches ψ0, ψ_max, ψ(ζ).
    pub fn abq(zeta: f64, mu: &Policy, pi: &Policy) -> Result<Self, SchemeError> {
        check_unit_interval("zeta", zeta)?;
        let (psi0, psi_max) = psi_pivots(mu, pi)?;
        let psi = psi_from_zeta(zeta, psi0, psi_max)?;
        Ok(Self {
            variant: Variant::Abq,
            parameter: zeta,
            psi,
            psi0,
            psi_max,
        })
    }

    /// ABQ driven directly by ψ rather than ζ.
    pub fn abq_with_psi(psi: f64, mu: &Policy, pi: &Policy) -> Result<Self, SchemeError> {
        let (psi0, psi_max) = psi_pivots(mu, pi)?;
        if psi < 0.0 {
            return Err(SchemeError::PsiOutOfRange { psi, psi_max });
        }
        // ψ beyond ψ_max saturates every cap; keep ζ well-defined by clamping.
        let zeta = zeta_from_psi(psi.min(psi_max), psi0, psi_max)?;
        Ok(Self {
            variant: Variant::Abq,
            parameter: zeta,
            psi,
            psi0,
            psi_max,
        })
    }

    pub fn ab_trace(zeta: f64) -> Result<Self, SchemeError> {
        check_unit_interval("zeta", zeta)?;
        Ok(Self {
            variant: Variant::AbTrace,
            parameter: zeta,
            psi: f64::NAN,
            psi0: f64::NAN,
            psi_max: f64::NAN,
        })
    }

    pub fn constant_lambda(lambda: f64) -> Result<Self, SchemeError> {
        check_unit_interval("lambda", lambda)?;
        Ok(Self {
            variant: Variant::ConstantLambda,
            parameter: lambda,
            psi: f64::NAN,
            psi0: f64::NAN,
            psi_max: f64::NAN,
        })
    }

    pub fn tree_backup(zeta: f64) -> Result<Self, SchemeError> {
        check_unit_interval("zeta", zeta)?;
        Ok(Self {
            variant: Variant::TreeBackup,
            parameter: zeta,
            psi: f64::NAN,
            psi0: f64::NAN,
            psi_max: f64::NAN,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// ζ for Abq/AbTrace/TreeBackup, λ for ConstantLambda.
    pub fn parameter(&self) -> f64 {
        self.parameter
    }

    /// Cached (ψ0, ψ_max); finite only for the Abq variant.
    pub fn pivots(&self) -> (f64, f64) {
        (self.psi0, self.psi_max)
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    /// ν for a pair with behavior probability `mu_prob` and target
    /// probability `pi_prob`.
    pub fn nu_probs(&self, mu_prob: f64, pi_prob: f64) -> f64 {
        match self.variant {
            Variant::Abq => {
                let m = mu_prob.max(pi_prob);
                // 1/0 = ∞ makes the cap inactive on unsupported pairs.
                self.psi.min(1.0 / m)
            }
            Variant::AbTrace => {
                if self.parameter == 0.0 {
                    return 0.0;
                }
                self.parameter * (1.0 / pi_prob).min(1.0 / mu_prob)
            }
            Variant::ConstantLambda => {
                if self.parameter == 0.0 {
                    return 0.0;
                }
                self.parameter / mu_prob
            }
            Variant::TreeBackup => self.parameter,
        }
    }

    /// The effective bootstrapping parameter λ(s,a) = ν·μ (constant λ for the
    /// ConstantLambda variant). Always lies in [0, 1].
    pub fn lambda_probs(&self, mu_prob: f64, pi_prob: f64) -> f64 {
        match self.variant {
            Variant::Abq => {
                let m = mu_prob.max(pi_prob);
                // min(ψ·μ, μ/m): the second form divides the smaller by the
                // larger, so the cap can never exceed one even in the last ulp.
                (self.psi * mu_prob).min(mu_prob / m)
            }
            Variant::AbTrace => {
                if mu_prob == 0.0 {
                    return 0.0; // 0·∞ convention
                }
                self.parameter * (mu_prob / pi_prob).min(1.0)
            }
            Variant::ConstantLambda => self.parameter,
            Variant::TreeBackup => self.parameter * mu_prob,
        }
    }

    /// The trace-decay factor ν·π for a sampled pair. For ABQ this equals
    /// λ·ρ with the ratio cancelled away.
    pub fn trace_decay(&self, mu_prob: f64, pi_prob: f64) -> f64 {
        match self.variant {
            Variant::AbTrace => {
                if pi_prob == 0.0 {
                    return 0.0;
                }
                // ζ·min(1, ρ), written to stay exact when μ = 0.
                self.parameter * (pi_prob / mu_prob).min(1.0)
            }
            _ => {
                let nu = self.nu_probs(mu_prob, pi_prob);
                if pi_prob == 0.0 {
                    0.0
                } else {
                    nu * pi_prob
                }
            }
        }
    }

    pub fn nu(&self, mu: &Policy, pi: &Policy, state: usize, action: usize) -> f64 {
        self.nu_probs(mu.prob(state, action), pi.prob(state, action))
    }

    pub fn lambda_sa(&self, mu: &Policy, pi: &Policy, state: usize, action: usize) -> f64 {
        self.lambda_probs(mu.prob(state, action), pi.prob(state, action))
    }

    /// The diagonal of Λ: λ(s,a) for every pair in canonical order.
    pub fn bootstrap_matrix(&self, mu: &Policy, pi: &Policy) -> BootstrapMatrix {
        let na = mu.n_actions();
        let diag = DVector::from_fn(mu.n_states() * na, |sa, _| {
            self.lambda_sa(mu, pi, sa / na, sa % na)
        });
        BootstrapMatrix::new(diag)
    }
}

/// The diagonal matrix Λ of per-pair bootstrapping parameters, stored as its
/// diagonal in canonical order.
#[derive(Clone, Debug)]
pub struct BootstrapMatrix {
    diag: DVector<f64>,
}

impl BootstrapMatrix {
    /// Entries must already lie in [0, 1]; this asserts rather than clamps,
    /// since every scheme produces in-range values by construction.
    pub fn new(diag: DVector<f64>) -> Self {
        for (i, &v) in diag.iter().enumerate() {
            assert!(
                (0.0..=1.0).contains(&v),
                "lambda({i}) = {v} outside [0, 1]"
            );
        }
        Self { diag }
    }

    pub fn diag(&self) -> &DVector<f64> {
        &self.diag
    }

    pub fn lambda(&self, state: usize, action: usize, n_actions: usize) -> f64 {
        self.diag[pair_index(state, action, n_actions)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    /// One state, three actions: μ = [0.2, 0.3, 0.5], π = [0.2, 0.4, 0.4].
    fn three_action_pair() -> (Policy, Policy) {
        let mu = Policy::new(DMatrix::from_row_slice(1, 3, &[0.2, 0.3, 0.5])).unwrap();
        let pi = Policy::new(DMatrix::from_row_slice(1, 3, &[0.2, 0.4, 0.4])).unwrap();
        (mu, pi)
    }

    #[test]
    fn pivots_three_action_example() {
        let (mu, pi) = three_action_pair();
        let (psi0, psi_max) = psi_pivots(&mu, &pi).unwrap();
        assert_abs_diff_eq!(psi0, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(psi_max, 5.0, epsilon = 1e-15);
    }

    #[test]
    fn pivots_identical_uniform_policies() {
        for k in [2usize, 3, 7] {
            let mu = Policy::uniform(2, k);
            let (psi0, psi_max) = psi_pivots(&mu, &mu).unwrap();
            assert_abs_diff_eq!(psi0, k as f64, epsilon = 1e-12);
            assert_abs_diff_eq!(psi_max, k as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn pivots_two_state_task() {
        let task = crate::envs::two_state();
        let (psi0, psi_max) = psi_pivots(&task.behavior, &task.target).unwrap();
        assert_abs_diff_eq!(psi0, 1.0 / 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(psi_max, 10.0, epsilon = 1e-12);
    }

    #[test]
    fn pivots_reject_jointly_unsupported_pair() {
        let mu = Policy::new(DMatrix::from_row_slice(1, 2, &[1.0, 0.0])).unwrap();
        let pi = Policy::new(DMatrix::from_row_slice(1, 2, &[1.0, 0.0])).unwrap();
        assert!(matches!(
            psi_pivots(&mu, &pi).unwrap_err(),
            SchemeError::UnboundedPsi { .. }
        ));
    }

    #[test]
    fn psi_map_hits_the_three_pivots() {
        let (psi0, psi_max) = (2.0, 5.0);
        assert_abs_diff_eq!(psi_from_zeta(0.0, psi0, psi_max).unwrap(), 0.0);
        assert_abs_diff_eq!(psi_from_zeta(0.5, psi0, psi_max).unwrap(), psi0);
        assert_abs_diff_eq!(psi_from_zeta(1.0, psi0, psi_max).unwrap(), psi_max);
        assert_abs_diff_eq!(psi_from_zeta(0.25, psi0, psi_max).unwrap(), 1.0);
        assert!(psi_from_zeta(1.5, psi0, psi_max).is_err());
    }

    #[test]
    fn zeta_map_inverts_psi_map() {
        let (psi0, psi_max) = (2.0, 5.0);
        assert_abs_diff_eq!(zeta_from_psi(psi0, psi0, psi_max).unwrap(), 0.5);
        assert_abs_diff_eq!(zeta_from_psi(0.0, psi0, psi_max).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let zeta: f64 = rng.random();
            let psi = psi_from_zeta(zeta, psi0, psi_max).unwrap();
            let back = zeta_from_psi(psi, psi0, psi_max).unwrap();
            assert_abs_diff_eq!(back, zeta, epsilon = 1e-12);
        }
        assert!(zeta_from_psi(5.1, psi0, psi_max).is_err());
    }

    #[test]
    fn psi_map_monotone_even_when_pivots_coincide() {
        let (psi0, psi_max) = (3.0, 3.0);
        let mut prev = -1.0;
        for i in 0..=100 {
            let z = i as f64 / 100.0;
            let psi = psi_from_zeta(z, psi0, psi_max).unwrap();
            assert!(psi >= prev - 1e-15);
            prev = psi;
        }
        // Degenerate pivots: the inverse is still defined below the cap.
        assert_abs_diff_eq!(zeta_from_psi(1.5, psi0, psi_max).unwrap(), 0.25);
    }

    #[test]
    fn abq_nu_saturates_at_psi_max() {
        let (mu, pi) = three_action_pair();
        let scheme = BootstrapScheme::abq(1.0, &mu, &pi).unwrap();
        for a in 0..3 {
            let m = mu.prob(0, a).max(pi.prob(0, a));
            assert_abs_diff_eq!(scheme.nu(&mu, &pi, 0, a), 1.0 / m, epsilon = 1e-12);
        }
    }

    #[test]
    fn abq_nu_and_lambda_at_psi_one() {
        let (mu, pi) = three_action_pair();
        let scheme = BootstrapScheme::abq_with_psi(1.0, &mu, &pi).unwrap();
        // Action 2 (index 1): max(0.3, 0.4) = 0.4, cap 2.5 inactive at ψ=1.
        assert_abs_diff_eq!(scheme.nu(&mu, &pi, 0, 1), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(scheme.lambda_sa(&mu, &pi, 0, 1), 0.3, epsilon = 1e-12);
    }

    #[test]
    fn abq_lambda_at_full_saturation() {
        let (mu, pi) = three_action_pair();
        let scheme = BootstrapScheme::abq(1.0, &mu, &pi).unwrap();
        let expected = [1.0, 0.75, 1.0];
        for (a, &e) in expected.iter().enumerate() {
            assert_abs_diff_eq!(scheme.lambda_sa(&mu, &pi, 0, a), e, epsilon = 1e-12);
        }
    }

    #[test]
    fn zeta_zero_gives_zero_lambda_everywhere() {
        let (mu, pi) = three_action_pair();
        for scheme in [
            BootstrapScheme::abq(0.0, &mu, &pi).unwrap(),
            BootstrapScheme::ab_trace(0.0).unwrap(),
            BootstrapScheme::tree_backup(0.0).unwrap(),
            BootstrapScheme::constant_lambda(0.0).unwrap(),
        ] {
            let m = scheme.bootstrap_matrix(&mu, &pi);
            assert_eq!(m.diag().amax(), 0.0);
        }
    }

    #[test]
    fn ab_trace_decay_is_zeta_min_one_rho() {
        let (mu, pi) = three_action_pair();
        let scheme = BootstrapScheme::ab_trace(0.7).unwrap();
        for a in 0..3 {
            let rho = pi.prob(0, a) / mu.prob(0, a);
            let expected = 0.7 * rho.min(1.0);
            assert_abs_diff_eq!(
                scheme.trace_decay(mu.prob(0, a), pi.prob(0, a)),
                expected,
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn ab_trace_on_policy_full_lambda() {
        let mu = Policy::uniform(1, 4);
        let scheme = BootstrapScheme::ab_trace(1.0).unwrap();
        for a in 0..4 {
            assert_abs_diff_eq!(scheme.lambda_sa(&mu, &mu, 0, a), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_support_conventions() {
        // μ = 0 on an action the target still plays: λ must be 0 (0·∞),
        // and the pair stays total in the bootstrap matrix.
        let mu = Policy::new(DMatrix::from_row_slice(1, 2, &[1.0, 0.0])).unwrap();
        let pi = Policy::new(DMatrix::from_row_slice(1, 2, &[0.5, 0.5])).unwrap();
        let trace = BootstrapScheme::ab_trace(0.9).unwrap();
        assert_eq!(trace.lambda_probs(0.0, 0.5), 0.0);
        assert!(trace.nu_probs(0.0, 0.5).is_finite());
        // Both zero: ν = ∞ but λ = 0·∞ = 0.
        assert_eq!(trace.lambda_probs(0.0, 0.0), 0.0);
        let m = trace.bootstrap_matrix(&mu, &pi);
        assert!(m.diag().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn constant_lambda_is_constant() {
        let (mu, pi) = three_action_pair();
        let scheme = BootstrapScheme::constant_lambda(0.6).unwrap();
        for a in 0..3 {
            assert_eq!(scheme.lambda_sa(&mu, &pi, 0, a), 0.6);
        }
        // And the decay carries the ratio: ν·π = λ·ρ.
        let rho = pi.prob(0, 2) / mu.prob(0, 2);
        assert_abs_diff_eq!(
            scheme.trace_decay(mu.prob(0, 2), pi.prob(0, 2)),
            0.6 * rho,
            epsilon = 1e-15
        );
    }

    #[test]
    fn tree_backup_nu_is_constant() {
        let (mu, pi) = three_action_pair();
        let scheme = BootstrapScheme::tree_backup(0.8).unwrap();
        for a in 0..3 {
            assert_eq!(scheme.nu(&mu, &pi, 0, a), 0.8);
            assert_abs_diff_eq!(
                scheme.trace_decay(mu.prob(0, a), pi.prob(0, a)),
                0.8 * pi.prob(0, a),
                epsilon = 1e-15
            );
        }
    }

    fn random_policy(rng: &mut ChaCha8Rng, s: usize, a: usize) -> Policy {
        let mut m = DMatrix::zeros(s, a);
        for i in 0..s {
            let mut sum = 0.0;
            for j in 0..a {
                let v = -f64::ln(rng.random::<f64>());
                m[(i, j)] = v;
                sum += v;
            }
            for j in 0..a {
                m[(i, j)] /= sum;
            }
        }
        Policy::new(m).unwrap()
    }

    #[test]
    fn abq_products_bounded_by_one_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            let mu = random_policy(&mut rng, 3, 4);
            let pi = random_policy(&mut rng, 3, 4);
            let zeta: f64 = rng.random();
            let scheme = BootstrapScheme::abq(zeta, &mu, &pi).unwrap();
            let m = scheme.bootstrap_matrix(&mu, &pi);
            for s in 0..3 {
                for a in 0..4 {
                    let lambda = m.lambda(s, a, 4);
                    assert!((0.0..=1.0).contains(&lambda));
                    // λρ = νπ ≤ 1 for every pair and every ζ.
                    let decay = scheme.trace_decay(mu.prob(s, a), pi.prob(s, a));
                    assert!(decay <= 1.0 + 1e-12);
                    let rho = pi.prob(s, a) / mu.prob(s, a);
                    assert_abs_diff_eq!(decay, lambda * rho, epsilon = 1e-12);
                }
            }
        }
    }
}
