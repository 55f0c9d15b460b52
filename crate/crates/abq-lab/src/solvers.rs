//! Exact linear-algebra engine: asymptotic solution matrices, MSPBE and its
//! gradient, expected updates, and truncated multi-step returns.
//!
//! Everything here is computed from the model, making it the ground truth
//! the stochastic learners are tested against. The central objects, for a
//! bootstrap matrix Λ with per-pair diagonal λ(s,a):
//!
//! ```text
//! A = Xᵀ D_μ (I - γ P_π Λ)⁻¹ (I - γ P_π) X        b = Xᵀ D_μ (I - γ P_π Λ)⁻¹ r
//! w_∞ = A⁻¹ b                                     (when A is invertible)
//! J(w) = ‖Π_μ T_π^(Λ) Xw - Xw‖²_{D_μ} = gᵀ C⁻¹ g
//! g = Xᵀ D_μ (T_π^(Λ) Xw - Xw) = b - A w          C = Xᵀ D_μ X
//! H = Xᵀ D_μ (I - γ P_π Λ)⁻¹ P_π (I - Λ) X        ∇J(w) = -2 (g - γ Hᵀ C⁻¹ g)
//! ```
//!
//! Matrix inverses are realized as linear solves with partial pivoting;
//! "invertible" means the SVD condition estimate stays below
//! [`CONDITION_LIMIT`]. Constant-λ solutions are assembled along an
//! independent arithmetic path (scalar γλ scaling) from the Λ-diagonal
//! path, so the two can cross-check each other.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::agents::Transition;
use crate::bootstrap::{BootstrapMatrix, BootstrapScheme};
use crate::mdp::{
    stationary_distribution, target_transition_matrix, FeatureMap, Mdp, ModelError, Policy,
};

/// Condition-number estimate above which a solution matrix is reported as
/// non-invertible rather than solved.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Truncation threshold for infinite-sum horizons: the default horizon is
/// the smallest H with (γ · max decay)^H below this.
pub const TRUNCATION_EPS: f64 = 1e-10;

/// Hard cap on computed truncation horizons.
pub const TRUNCATION_CAP: usize = 10_000;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("feature Gram matrix XᵀD_μX is rank deficient: rank {rank} of {dim}")]
    RankDeficientGram { rank: usize, dim: usize },
    #[error("resolvent system (I - γP_πΛ) is singular")]
    SingularResolvent,
    #[error("trajectory of length {len} too short for window [{t}, {end}]")]
    TrajectoryTooShort { t: usize, end: usize, len: usize },
}

/// The solution matrices A, b for one bootstrapping configuration, plus the
/// asymptotic solution when A is well conditioned.
#[derive(Debug, Clone)]
pub struct SolutionMatrices {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    /// Condition estimate of A (ratio of extreme singular values).
    pub condition: f64,
    pub invertible: bool,
    /// `A⁻¹ b`, present iff `invertible`.
    pub w_inf: Option<DVector<f64>>,
}

/// Ingredients of the MSPBE at a given weight vector.
#[derive(Debug, Clone)]
pub struct MspbeContext {
    pub c: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
}

struct ModelParts {
    p_pi: DMatrix<f64>,
    d_mu: DVector<f64>,
    r: DVector<f64>,
}

fn model_parts(mdp: &Mdp, pi: &Policy, mu: &Policy) -> Result<ModelParts, SolverError> {
    Ok(ModelParts {
        p_pi: target_transition_matrix(mdp, pi)?,
        d_mu: stationary_distribution(mdp, mu)?.vector().clone(),
        r: mdp.reward_pairs(),
    })
}

/// Xᵀ D_μ M, with D_μ applied as a row scaling.
fn xt_d(x: &DMatrix<f64>, d: &DVector<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut scaled = m.clone();
    for (i, mut row) in scaled.row_iter_mut().enumerate() {
        row *= d[i];
    }
    x.transpose() * scaled
}

fn xt_d_vec(x: &DMatrix<f64>, d: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let scaled = DVector::from_fn(v.len(), |i, _| d[i] * v[i]);
    x.transpose() * scaled
}

fn finish_solution(a: DMatrix<f64>, b: DVector<f64>) -> SolutionMatrices {
    let svd = a.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let invertible = condition < CONDITION_LIMIT;
    let w_inf = if invertible {
        a.clone().lu().solve(&b)
    } else {
        None
    };
    SolutionMatrices {
        a,
        b,
        condition,
        invertible: invertible && w_inf.is_some(),
        w_inf,
    }
}

/// Asymptotic solution of off-policy Q(λ) with a constant bootstrapping
/// parameter: `A = XᵀD_μ(I - γλP_π)⁻¹(I - γP_π)X`, `b` likewise.
pub fn solution_constant_lambda(
    mdp: &Mdp,
    pi: &Policy,
    mu: &Policy,
    features: &FeatureMap,
    lambda: f64,
) -> Result<SolutionMatrices, SolverError> {
    assert!((0.0..=1.0).contains(&lambda), "lambda must lie in [0, 1]");
    let parts = model_parts(mdp, pi, mu)?;
    let pairs = parts.p_pi.nrows();
    let gamma = mdp.discount();
    let x = features.matrix();

    let m = DMatrix::identity(pairs, pairs) - (gamma * lambda) * &parts.p_pi;
    let lu = m.lu();
    let bellman_block = x - gamma * &parts.p_pi * x;
    let resolved_block = lu
        .solve(&bellman_block)
        .ok_or(SolverError::SingularResolvent)?;
    let resolved_r = lu.solve(&parts.r).ok_or(SolverError::SingularResolvent)?;

    let a = xt_d(x, &parts.d_mu, &resolved_block);
    let b = xt_d_vec(x, &parts.d_mu, &resolved_r);
    Ok(finish_solution(a, b))
}

fn scale_columns(m: &DMatrix<f64>, diag: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col *= diag[j];
    }
    out
}

/// Asymptotic ABQ-style solution for any bootstrap scheme:
/// `A_ζ = XᵀD_μ(I - γP_πΛ_ζ)⁻¹(I - γP_π)X`, `b_ζ` likewise.
pub fn solution_abq(
    mdp: &Mdp,
    pi: &Policy,
    mu: &Policy,
    features: &FeatureMap,
    scheme: &BootstrapScheme,
) -> Result<SolutionMatrices, SolverError> {
    let lambda = scheme.bootstrap_matrix(mu, pi);
    solution_with_bootstrap_matrix(mdp, pi, mu, features, &lambda)
}

/// Same assembly with an explicit diagonal Λ.
pub fn solution_with_bootstrap_matrix(
    mdp: &Mdp,
    pi: &Policy,
    mu: &Policy,
    features: &FeatureMap,
    lambda: &BootstrapMatrix,
) -> Result<SolutionMatrices, SolverError> {
    let parts = model_parts(mdp, pi, mu)?;
    let pairs = parts.p_pi.nrows();
    let gamma = mdp.discount();
    let x = features.matrix();

    let m = DMatrix::identity(pairs, pairs) - gamma * scale_columns(&parts.p_pi, lambda.diag());
    let lu = m.lu();
    let bellman_block = x - gamma * &parts.p_pi * x;
    let resolved_block = lu
        .solve(&bellman_block)
        .ok_or(SolverError::SingularResolvent)?;
    let resolved_r = lu.solve(&parts.r).ok_or(SolverError::SingularResolvent)?;

    let a = xt_d(x, &parts.d_mu, &resolved_block);
    let b = xt_d_vec(x, &parts.d_mu, &resolved_r);
    Ok(finish_solution(a, b))
}

/// Expected per-step update direction with `w` frozen: `b_ζ - A_ζ w`
/// (the step size is left to the caller).
pub fn expected_update(
    mdp: &Mdp,
    pi: &Policy,
    mu: &Policy,
    features: &FeatureMap,
    scheme: &BootstrapScheme,
    w: &DVector<f64>,
) -> Result<DVector<f64>, SolverError> {
    let sol = solution_abq(mdp, pi, mu, features, scheme)?;
    Ok(&sol.b - &sol.a * w)
}

/// The expected-trace matrix `E = (I - γP_πΛ)⁻¹(I - γP_π)X`, which satisfies
/// the recursion `E = (I - γP_π)X + γP_πΛE` and the identity `XᵀD_μE = A_ζ`.
pub fn trace_expectation_matrix(
    mdp: &Mdp,
    pi: &Policy,
    mu: &Policy,
    features: &FeatureMap,
    scheme: &BootstrapScheme,
) -> Result<DMatrix<f64>, SolverError> {
    let p_pi = target_transition_matrix(mdp, pi)?;
    let _ = mu; // Λ depends on both policies; D_μ does not enter E itself.
    let lambda = scheme.bootstrap_matrix(mu, pi);
    let pairs = p_pi.nrows();
    let gamma = mdp.discount();
    let x = features.matrix();
    let m = DMatrix::identity(pairs, pairs) - gamma * scale_columns(&p_pi, lambda.diag());
    let bellman_block = x - gamma * &p_pi * x;
    m.lu()
        .solve(&bellman_block)
        .ok_or(SolverError::SingularResolvent)
}

/// Gram matrix, H matrix, and error projection g at `w`, assembled along the
/// Bellman-operator route (independent of [`solution_abq`]'s `b - Aw`).
pub fn mspbe_context(
    mdp: &Mdp,
    pi: &Policy,
    mu: &Policy,
    features: &FeatureMap,
    scheme: &BootstrapScheme,
    w: &DVector<f64>,
) -> Result<MspbeContext, SolverError> {
    let parts = model_parts(mdp, pi, mu)?;
    let pairs = parts.p_pi.nrows();
    let gamma = mdp.discount();
    let x = features.matrix();
    let lambda = scheme.bootstrap_matrix(mu, pi);

    let m = DMatrix::identity(pairs, pairs) - gamma * scale_columns(&parts.p_pi, lambda.diag());
    let lu = m.lu();

    // T_π^(Λ) Xw = (I - γP_πΛ)⁻¹ [r + γP_π(I - Λ)Xw]
    let xw = x * w;
    let one_minus_lambda_xw = DVector::from_fn(pairs, |i, _| (1.0 - lambda.diag()[i]) * xw[i]);
    let bellman_image = lu
        .solve(&(&parts.r + gamma * &parts.p_pi * one_minus_lambda_xw))
        .ok_or(SolverError::SingularResolvent)?;
    let g = xt_d_vec(x, &parts.d_mu, &(bellman_image - &xw));

    let c = xt_d(x, &parts.d_mu, x);

    let one_minus_lambda_x = {
        let mut out = x.clone();
        for (i, mut row) in out.row_iter_mut().enumerate() {
            row *= 1.0 - lambda.diag()[i];
        }
        out
    };
    let h_inner = lu
        .solve(&(&parts.p_pi * one_minus_lambda_x))
        .ok_or(SolverError::SingularResolvent)?;
    let h = xt_d(x, &parts.d_mu, &h_inner);

    Ok(MspbeContext { c, h, g })
}

fn solve_gram(c: &DMatrix<f64>, g: &DVector<f64>) -> Result<DVector<f64>, SolverError> {
    let chol = c.clone().cholesky();
    if let Some(chol) = &chol {
        // Guard against numerically successful factorizations of
        // near-singular Gram matrices.
        let svd = c.clone().svd(false, false);
        let smin = svd.singular_values.min();
        let smax = svd.singular_values.max();
        if smin > 0.0 && smax / smin < CONDITION_LIMIT {
            return Ok(chol.solve(g));
        }
    }
    let svd = c.clone().svd(false, false);
    let tol = svd.singular_values.max() * 1e-12;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    Err(SolverError::RankDeficientGram {
        rank,
        dim: c.nrows(),
    })
}

/// MSPBE `J(w) = gᵀC⁻¹g`. Errors when the features are linearly dependent
/// under d_μ (rank-deficient C); see [`mspbe_pinv`] for the minimum-norm
/// generalization used to monitor such tasks.
pub fn mspbe(
    mdp: &Mdp,
    pi: &Policy,
    mu: &Policy,
    features: &FeatureMap,
    scheme: &BootstrapScheme,
    w: &DVector<f64>,
) -> Result<f64, SolverError> {
    let ctx = mspbe_context(mdp, pi, mu, features, scheme, w)?;
    let z = solve_gram(&ctx.c, &ctx.g)?;
    Ok(ctx.g.dot(&z).max(0.0))
}

/// MSPBE with `C⁻¹` replaced by the Moore-Penrose pseudo-inverse. Since g
/// always lies in the column space of C, this equals the projected-error
/// norm even when X has dependent columns (as in the classic 7-star task).
pub fn mspbe_pinv(
    mdp: &Mdp,
    pi: &Policy,
    mu: &Policy,
    features: &FeatureMap,
    scheme: &BootstrapScheme,
    w: &DVector<f64>,
) -> Result<f64, SolverError> {
    let ctx = mspbe_context(mdp, pi, mu, features, scheme, w)?;
    let svd = ctx.c.clone().svd(true, true);
    let z = svd
        .solve(&ctx.g, svd.singular_values.max() * 1e-12)
        .map_err(|_| SolverError::SingularResolvent)?;
    Ok(ctx.g.dot(&z).max(0.0))
}

/// Analytic MSPBE gradient `∇J(w) = -2(g - γHᵀC⁻¹g)`.
pub fn mspbe_gradient(
    mdp: &Mdp,
    pi: &Policy,
    mu: &Policy,
    features: &FeatureMap,
    scheme: &BootstrapScheme,
    w: &DVector<f64>,
) -> Result<DVector<f64>, SolverError> {
    let ctx = mspbe_context(mdp, pi, mu, features, scheme, w)?;
    let z = solve_gram(&ctx.c, &ctx.g)?;
    Ok(-2.0 * (&ctx.g - mdp.discount() * ctx.h.transpose() * z))
}

/// Reusable exact evaluator for monitoring J(w) along a learning run:
/// precomputes A, b and a factorization of C once, then each evaluation is
/// two small mat-vecs.
pub struct MspbeEvaluator {
    a: DMatrix<f64>,
    b: DVector<f64>,
    gram: GramSolver,
}

enum GramSolver {
    Cholesky(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Pinv(nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl MspbeEvaluator {
    pub fn new(
        mdp: &Mdp,
        pi: &Policy,
        mu: &Policy,
        features: &FeatureMap,
        scheme: &BootstrapScheme,
        allow_rank_deficient: bool,
    ) -> Result<Self, SolverError> {
        let sol = solution_abq(mdp, pi, mu, features, scheme)?;
        let d_mu = stationary_distribution(mdp, mu)?.vector().clone();
        let c = xt_d(features.matrix(), &d_mu, features.matrix());
        let gram = if allow_rank_deficient {
            GramSolver::Pinv(c.svd(true, true))
        } else {
            solve_gram(&c, &DVector::zeros(c.nrows()))?;
            GramSolver::Cholesky(c.cholesky().ok_or(SolverError::RankDeficientGram {
                rank: 0,
                dim: 0,
            })?)
        };
        Ok(Self {
            a: sol.a,
            b: sol.b,
            gram,
        })
    }

    pub fn eval(&self, w: &DVector<f64>) -> f64 {
        let g = &self.b - &self.a * w;
        let z = match &self.gram {
            GramSolver::Cholesky(chol) => chol.solve(&g),
            GramSolver::Pinv(svd) => svd
                .solve(&g, svd.singular_values.max() * 1e-12)
                .expect("pseudo-inverse solve"),
        };
        g.dot(&z).max(0.0)
    }
}

/// Default truncation horizon: the smallest H with
/// `(γ · max_decay)^H < TRUNCATION_EPS`, capped at [`TRUNCATION_CAP`].
pub fn default_truncation_horizon(gamma: f64, max_decay: f64) -> usize {
    let rate = gamma * max_decay;
    if rate <= 0.0 {
        return 1;
    }
    if rate >= 1.0 {
        return TRUNCATION_CAP;
    }
    let h = (TRUNCATION_EPS.ln() / rate.ln()).ceil() as usize;
    h.clamp(1, TRUNCATION_CAP)
}

/// Truncated multi-step return
/// `H_t = Σ_{n=t}^{t+horizon} γ^{n-t} (Π_{i=t+1}^n ν_iπ_i) δ_n + wᵀx_t`,
/// where the inner product is the scheme's trace decay, so the constant-λ
/// scheme recovers the (γλ)-weighted, ratio-corrected return.
pub fn truncated_return(
    traj: &[Transition],
    scheme: &BootstrapScheme,
    w: &DVector<f64>,
    gamma: f64,
    t: usize,
    horizon: usize,
) -> Result<f64, SolverError> {
    let end = t + horizon;
    if t >= traj.len() || end >= traj.len() {
        return Err(SolverError::TrajectoryTooShort {
            t,
            end,
            len: traj.len(),
        });
    }
    let mut total = w.dot(&traj[t].x);
    let mut coeff = 1.0;
    for (n, tr) in traj.iter().enumerate().take(end + 1).skip(t) {
        if n > t {
            coeff *= gamma * scheme.trace_decay(tr.mu_prob, tr.pi_prob);
        }
        let delta = tr.reward + gamma * w.dot(&tr.x_bar_next()) - w.dot(&tr.x);
        total += coeff * delta;
        if tr.is_terminal() {
            break;
        }
    }
    Ok(total)
}

/// The same return written with explicit bootstrapping-parameter and
/// importance-sampling-ratio products, `γ^{n-t} (Π λ_i)(Π ρ_i) δ_n`. For
/// every scheme the per-step identity λρ = νπ makes this agree with
/// [`truncated_return`] exactly; it exists as the cross-check of that
/// identity.
pub fn truncated_return_ratio_form(
    traj: &[Transition],
    scheme: &BootstrapScheme,
    w: &DVector<f64>,
    gamma: f64,
    t: usize,
    horizon: usize,
) -> Result<f64, SolverError> {
    let end = t + horizon;
    if t >= traj.len() || end >= traj.len() {
        return Err(SolverError::TrajectoryTooShort {
            t,
            end,
            len: traj.len(),
        });
    }
    let mut total = w.dot(&traj[t].x);
    let mut coeff = 1.0;
    for (n, tr) in traj.iter().enumerate().take(end + 1).skip(t) {
        if n > t {
            coeff *= gamma * scheme.lambda_probs(tr.mu_prob, tr.pi_prob) * tr.rho();
        }
        let delta = tr.reward + gamma * w.dot(&tr.x_bar_next()) - w.dot(&tr.x);
        total += coeff * delta;
        if tr.is_terminal() {
            break;
        }
    }
    Ok(total)
}
