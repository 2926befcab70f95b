use thiserror::Error;

/// Errors produced anywhere in the library.
///
/// States carried by variants are 1-indexed, matching every external
/// representation of the process.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("generator must be square with at least 2 states, got {rows}x{cols}")]
    BadShape { rows: usize, cols: usize },

    #[error("non-finite rate at ({i}, {j})")]
    NonFinite { i: usize, j: usize },

    #[error("NegativeOffDiagonal: rate ({i}, {j}) = {value} is negative")]
    NegativeOffDiagonal { i: usize, j: usize, value: f64 },

    #[error("RowSumNonzero: row {row} sums to {sum:e}")]
    RowSumNonzero { row: usize, sum: f64 },

    #[error("AbsorbingState: state {state} has zero exit rate")]
    AbsorbingState { state: usize },

    #[error("Reducible: state {to} is not reachable from state {from}")]
    Reducible { from: usize, to: usize },

    #[error("Overflow: t*mu = {0:e} is too large for the matrix exponential")]
    Overflow(f64),

    #[error("SingularSolve: {0}")]
    SingularSolve(&'static str),

    #[error("NotConverged: no stationary time below cap {cap}")]
    NotConverged { cap: f64 },

    #[error("InvalidPath: {0}")]
    InvalidPath(String),

    #[error("InvalidArgument: {0}")]
    InvalidArgument(String),

    #[error(
        "AttemptsExhausted: no bridge accepted in {max_attempts} attempts \
         (p_ab(T) = {acceptance:.3e})"
    )]
    AttemptsExhausted { max_attempts: u64, acceptance: f64 },

    #[error("NotDiagonalizable: eigenvector condition number {condition:.3e} exceeds cap")]
    NotDiagonalizable { condition: f64 },

    #[error("RootFindFailure: {0}")]
    RootFindFailure(String),

    #[error("SeriesTruncation: Poisson mixture mass {mass} below 1 - 1e-10 at cap {cap}")]
    SeriesTruncation { cap: usize, mass: f64 },

    #[error("RecursionDepthExceeded: bisection deeper than {0} levels")]
    RecursionDepthExceeded(usize),

    #[error("ZeroOccupation: state {0} has zero holding time")]
    ZeroOccupation(usize),

    #[error("UnreachableEndpoint: p({from}->{to}) vanishes over {time} (gap {gap:?})")]
    UnreachableEndpoint {
        from: usize,
        to: usize,
        time: f64,
        gap: Option<usize>,
    },

    #[error("UnknownName: {0}")]
    UnknownName(String),

    #[error("BadDimension: {0}")]
    BadDimension(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
