use thiserror::Error;

/// Errors raised by the solver, bound and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed or inconsistent input (bad dimensions, invalid distributions).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Input beyond the desk-scale limits the enumerating solvers accept.
    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    /// A signal with zero likelihood under both types was observed.
    #[error("undefined history: observed signal has zero probability under both types")]
    UndefinedHistory,

    /// A bound whose defining constant is zero or undefined.
    #[error("bound undefined: {0}")]
    BoundUndefined(String),

    /// The requested strategy profile cannot be built from the given witness.
    #[error("construction failed: {0}")]
    Construction(String),

    /// The profile is not representable as a finite regime automaton.
    #[error("unsupported profile: {0}")]
    UnsupportedProfile(String),

    /// No feasible `(A', beta)` pair satisfies the payoff floor.
    #[error("no equilibrium value: {0}")]
    NoEquilibriumValue(String),

    /// Violated internal invariant; indicates a bug rather than bad input.
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
