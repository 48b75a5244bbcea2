use thiserror::Error;

/// Errors raised by the inference engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter-domain error: {0}")]
    ParameterDomain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Every particle carries zero weight.
    #[error("degenerate weights: all log-weights are -inf")]
    DegenerateWeights,

    #[error("model fault in `{capability}` at t = {t}: {detail}")]
    ModelFault {
        capability: &'static str,
        t: usize,
        detail: String,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular innovation covariance (condition number {0:.3e})")]
    SingularInnovation(f64),

    #[error("covariance is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPositiveSemidefinite(f64),

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("initialization failed: {0}")]
    Initialization(String),

    #[error("PMH iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{origin}:{line}: {msg}")]
    Parse {
        origin: String,
        line: u64,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
