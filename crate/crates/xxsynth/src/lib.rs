//! Synthesis of two-qubit unitaries into circuits over fixed XX-type
//! interactions (fractional controlled-X gates).
//!
//! The pipeline, bottom to top:
//!
//! - [`weyl`]: canonical gates, the monodromy coordinate map, KAK
//!   decomposition, average-gate infidelity, mirror transform, and the Haar
//!   pushforward density on the Weyl alcove.
//! - [`polytope`]: H-representation polytope geometry over alcove
//!   coordinates, including density-weighted volumes and the skip-list
//!   inclusion-exclusion engine for unions.
//! - [`circuit_polytope`]: the two-body polytope of canonical coordinates
//!   reachable by a circuit with a prescribed sequence of XX strengths.
//! - [`decomposer`]: constructive synthesis of a circuit hitting a target
//!   coordinate exactly, one interaction at a time.
//! - [`approximator`]: best-in-polytope approximation under average gate
//!   infidelity via facet projection.
//! - [`optimizer`]: cost models, the best-first optimal synthesis driver,
//!   mirror synthesis, and exact / Monte-Carlo expected gate-set costs.

pub mod approximator;
pub mod circuit_polytope;
pub mod decomposer;
pub mod error;
pub mod matrix;
pub mod optimizer;
pub mod polytope;
pub mod weyl;

pub use error::{Error, Result};
