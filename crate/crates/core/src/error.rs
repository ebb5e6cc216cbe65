use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("state ({i},{j}) is outside the state space")]
    StateOutsideSpace { i: usize, j: usize },

    #[error("phase {phase} out of range for {phases} phases per level")]
    PhaseOutOfRange { phase: usize, phases: usize },

    #[error("block role {role} is not defined at level {level}")]
    InvalidBlockLevel { role: &'static str, level: i64 },

    #[error("truncation window too small: k_neg={k_neg}, k_pos={k_pos}")]
    WindowTooSmall { k_neg: usize, k_pos: usize },

    #[error("generator is not conservative (row {row} sums to {sum:e})")]
    NotConservative { row: usize, sum: f64 },

    #[error("generator is reducible")]
    Reducible,

    #[error("singular block at position {index} (pivot ratio {pivot:e})")]
    SingularBlock { index: usize, pivot: f64 },

    #[error("level cap exhausted at {cap} without convergence")]
    CapExhausted { cap: usize },

    #[error("boundary system is degenerate: {0}")]
    DegenerateBoundary(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("transition ({from_i},{from_j}) -> ({to_i},{to_j}) disagrees with the event enumerator")]
    GeneratorMismatch {
        from_i: usize,
        from_j: usize,
        to_i: usize,
        to_j: usize,
    },

    #[error("stationary tail did not decay within {levels} levels")]
    TailNotConverged { levels: usize },

    #[error("residual {residual:e} exceeds tolerance {tol:e} ({what})")]
    Residual {
        what: &'static str,
        residual: f64,
        tol: f64,
    },

    #[error("{0}")]
    Invalid(String),
}
