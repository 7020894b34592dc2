use thiserror::Error;

/// Errors reported by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on user-supplied data failed.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// The body geometry cannot be used (open mesh, zero volume, ...).
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    /// A linear or time-stepping solver failed.
    #[error("solver failure ({solver}): {detail}")]
    Solver { solver: &'static str, detail: String },
    /// A computed quantity violates an invariant it must satisfy.
    #[error("internal consistency: {0}")]
    Consistency(String),
    /// The discrete energy inequality could not be restored by step halving.
    #[error("energy ledger violated at t = {t}: slack {slack:e}")]
    Ledger { t: f64, slack: f64 },
    /// Configuration parsing or validation failed.
    #[error("config: {0}")]
    Config(String),
    /// A study grid point failed; `param` is its ν or σ.
    #[error("study point {param}: {source}")]
    Study { param: f64, source: Box<Error> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// The innermost error of a study failure.
    pub fn root(&self) -> &Error {
        match self {
            Error::Study { source, .. } => source.root(),
            e => e,
        }
    }

    pub(crate) fn solver(solver: &'static str, detail: impl Into<String>) -> Self {
        Error::Solver { solver, detail: detail.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
