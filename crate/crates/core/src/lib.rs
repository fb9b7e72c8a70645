//! δ-invariants of pointwise curvature data, the fundamental inequality
//! `δ(n₁,…,n_k) ≤ c(n₁,…,n_k) H²` for Euclidean submanifolds, and
//! ideal-embedding decisions for compact homogeneous spaces through the first
//! Laplace eigenvalue.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod delta;
pub mod immersion;
pub mod linalg;
pub mod partition;
pub mod spectral;
pub mod tensor;
pub mod verdict;

pub use delta::{
    delta_bruteforce, delta_constant_curvature, delta_invariant, max_normalized_delta, DeltaError, DeltaResult,
    NormalizedDelta, OptimizerOptions, SubspaceConfig,
};
pub use partition::{enumerate_tuples, Partition};
pub use tensor::{CurvatureTensor, Frame, Subspace, TensorError};
