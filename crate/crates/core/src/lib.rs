//! Dynamic programming for Markov decision processes, built on optics.
//!
//! The crate's central abstraction is the optic: a forward transition pass
//! into a residual×target pair plus a backward pass that consumes the
//! residual and a continuation value. Value functions are costates (optics
//! into the unit interface, i.e. plain functions), one Bellman backup is
//! precomposition of the value costate with the policy-lifted process optic,
//! and the optimal value function is the limit of a chain of such
//! compositions.
//!
//! Modules:
//! - [`kernels`]: deterministic, finite-stochastic and Gaussian-affine
//!   morphism families with pushforward, composition and expectation.
//! - [`optic`]: concrete optics, their composition, costate application, and
//!   the process/policy optic constructors per kernel family.
//! - [`mdp`]: decision-process data model (spaces, policies, value tables).
//! - [`solvers`]: policy iteration, value iteration, q-iteration and
//!   sample-based Q-learning.
//! - [`discretize`]: grids with multilinear cell weights that turn
//!   continuous processes into finite stochastic ones.
//! - [`envs`]: the built-in environments (gridworld, linearized inverted
//!   pendulum, consumption/savings).

pub mod discretize;
pub mod envs;
pub mod error;
pub mod kernels;
pub mod mdp;
pub mod optic;
pub mod solvers;
pub mod testing;

pub use error::{Error, Result};
pub use kernels::{
    dirac, expectation, gauss_compose, gauss_push, kernel_compose, pushforward, FiniteDist,
    GaussKernel, GaussState, Kernel,
};
pub use mdp::{Index, Mdp, Policy, Space, ValueFn};
pub use optic::{
    apply_costate, identity_optic, lambda_gauss, lambda_optic, optic_compose, policy_lift,
    policy_lift_gauss, GaussOptic, Optic,
};
pub use solvers::{
    bellman_backup, policy_improvement, policy_iteration, q_improvement, q_learning,
    q_value_iteration, value_improvement, value_iteration, IterRecord, IterationTrace,
    MdpSampler, QFn, QLearnConfig, QLearnResult, SampleEnv, SolverConfig, StepOutcome,
};
