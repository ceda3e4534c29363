//! Zeroth-order random matrix search (ZO-RMS).
//!
//! Minimizes black-box costs over block-diagonal products of symmetric,
//! positive-semidefinite and eigenvalue-floored cones using only cost
//! values: each iteration draws a Gaussian-orthogonal-ensemble direction,
//! forms a forward-difference oracle from two evaluations, and takes a
//! projected step.
//!
//! Modules:
//! - [`symmat`]: packed symmetric matrices, block composites, Jacobi eigensolver.
//! - [`goe`]: ensemble sampling and norm moments.
//! - [`smoothing`]: black-box costs, the oracle, Gaussian-smoothing estimates.
//! - [`projections`]: cone projections and the gradient mapping.
//! - [`zorms`]: the search loop, bound-driven plans, random-search baseline.
//! - [`mpc`]: integrator-augmented MPC and closed-loop tuning costs.
//! - [`verify`]: statistical verifier suites.
//!
//! The matrix, projection and search code is generic over [`Real`]
//! (`f32`/`f64`); the MPC stack is `f64`.

// NaN-rejecting guards are written as `!(x > 0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod goe;
pub mod mpc;
pub mod problems;
pub mod projections;
pub mod scalar;
pub mod smoothing;
pub mod stats;
pub mod symmat;
pub mod verify;
pub mod zorms;

pub use error::{Error, Result};
pub use goe::GoeSampler;
pub use projections::{Block, BlockSpec, ConeKind};
pub use scalar::Real;
pub use smoothing::{BlackBoxCost, OracleEval};
pub use symmat::{BlockMat, SymMat};
pub use zorms::{optimize, run_repeated, Plan, RunRecord, StepSchedule};

pub type SymMatF64 = SymMat<f64>;
pub type SymMatF32 = SymMat<f32>;
pub type BlockMatF64 = BlockMat<f64>;
pub type BlockMatF32 = BlockMat<f32>;
pub type RunRecordF64 = RunRecord<f64>;
