//! Whittle and Gittins indices of restless bandit arms.
//!
//! [`compute_indices`] decides whether an arm is indexable and, when it is,
//! returns every state's index in a single pass over the states. The
//! [`oracle`] module holds slow exhaustive references for small arms.

pub mod arm;
pub mod index_solver;
pub mod linalg;
pub mod oracle;
pub mod samples;

pub use arm::{
    ArmError, ChainKind, ChainVerdict, Policy, RawArm, RestlessArm, classify_policy_chain,
    generate_banded, generate_dense_uniform, is_weakly_communicating, validate_arm,
};
pub use index_solver::{
    Criterion, IndexResult, SolverError, SolverOptions, Variant, Verdict, advantage_at,
    compute_indices, default_recompute_count, gittins_indices,
};
pub use linalg::{DenseMatrix, LinalgError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Arm(#[from] ArmError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}
