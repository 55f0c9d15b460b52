//! Policy-evaluation workbench for multi-step off-policy temporal-difference
//! learning with linear function approximation.
//!
//! The centerpiece is action-dependent bootstrapping: the ABQ(ζ) family of
//! learners, its AB-Trace/Retrace and Tree Backup relatives, and the GQ(λ)
//! comparator. Everything stochastic is checked against an exact
//! linear-algebra engine ([`solvers`]) that computes asymptotic solutions,
//! MSPBE values and gradients, and expected updates from the model, so every
//! learner update has an analytic oracle.
//!
//! Module map:
//! - [`mdp`]: finite MDPs, policies, feature maps, `P_pi`, `d_mu`, `q_pi`
//! - [`bootstrap`]: the ν/ψ/ζ machinery producing per-pair λ(s,a)
//! - [`solvers`]: solution matrices, MSPBE and gradient, expected updates
//! - [`agents`]: online learners sharing a common transition interface
//! - [`envs`]: the four test problems as seeded sample generators
//! - [`harness`]: seeded multi-run experiments, metrics, CSV emission

pub mod agents;
pub mod bootstrap;
pub mod envs;
pub mod exec;
pub mod harness;
pub mod mdp;
pub mod solvers;
