use thiserror::Error;

/// Errors produced by the synthesis library.
#[derive(Debug, Error)]
pub enum Error {
    /// The input matrix is not unitary within the stated tolerance.
    #[error("matrix is not unitary: max |U\u{2020}U - I| entry is {residual:.3e}")]
    NotUnitary { residual: f64 },

    /// A coordinate triple violates the invariants of its type.
    #[error("invalid coordinate {coord:?}: {reason}")]
    InvalidCoordinate { coord: [f64; 3], reason: String },

    /// An interaction strength lies outside [0, pi/4].
    #[error("interaction strength {strength} outside [0, pi/4]")]
    StrengthOutOfRange { strength: f64 },

    /// A gate set was empty or otherwise unusable.
    #[error("invalid gate set: {0}")]
    InvalidGateSet(String),

    /// A polytope is unbounded where a bounded one is required.
    #[error("polytope `{0}` is unbounded")]
    Unbounded(String),

    /// A polytope is empty where a nonempty one is required.
    #[error("polytope `{0}` is empty")]
    EmptyPolytope(String),

    /// An equality system for affine projection is rank-deficient.
    #[error("degenerate equality system: rank {rank} < {expected}")]
    DegenerateSystem { rank: usize, expected: usize },

    /// A requested point is outside the region it must belong to.
    #[error("point {point:?} violates bound `{bound}` by {violation:.3e}")]
    OutsideRegion {
        point: Vec<f64>,
        bound: String,
        violation: f64,
    },

    /// An alcove symmetry request cannot be realized by local gates.
    #[error("sign pattern {flips:?} is not realizable by local conjugation")]
    UnrealizableSymmetry { flips: [bool; 3] },

    /// Phase extraction could not find enough usable matrix entries.
    #[error("outer phase solve failed: {0}")]
    PhaseSolveFailed(String),

    /// The decomposer reached a state the local theorem forbids.
    #[error("internal synthesis inconsistency: {0}")]
    SynthesisInconsistency(String),

    /// Numeric field failed validation (CLI and deserialization paths).
    #[error("invalid value for {field}: {reason}")]
    InvalidValue { field: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
