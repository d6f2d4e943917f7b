//! Sparse recovery with the Difference Map.
//!
//! The crate solves `min ‖x‖₀ s.t. ‖ỹ − Φx‖₂² ≤ δ` by searching for a point
//! in the intersection of the sparsity set `{‖x‖₀ ≤ s}` and the data set
//! `{Φx = ỹ}` with the Difference Map, and ships the pieces needed to
//! benchmark it: baseline solvers (Alternating Map, normalized IHT,
//! Subspace Pursuit, OMP), a seeded random-problem generator, a patch-based
//! image sparse-coding pipeline with MOD dictionary learning, and the
//! experiment harness behind the `dmsparse` CLI.

pub mod bench;
pub mod dictionary;
pub mod error;
pub mod imaging;
pub mod linalg;
pub mod probgen;
pub mod projections;
pub mod solvers;

pub use dictionary::Dictionary;
pub use error::{Error, Result};
pub use linalg::{DenseMatrix, DenseVector, PseudoInverse};
pub use projections::{BetaParam, DataFidelitySet, SparsitySet};
pub use solvers::{Algorithm, RecoveryProblem, SolverConfig, SolverTrace, Termination};
