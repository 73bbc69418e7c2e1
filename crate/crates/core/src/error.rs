use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid user-facing configuration. `field` is a dotted path such as `grid.nx`.
    #[error("configuration error in {field}: {message}")]
    Config { field: String, message: String },

    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The requested step exceeds the advective CFL bound.
    #[error("step size {dt:e} violates CFL condition at t = {t}; admissible dt <= {admissible:e}")]
    StepSize { dt: f64, admissible: f64, t: f64 },

    /// A non-finite value appeared while advancing the state.
    #[error("numerical divergence at t = {t}: non-finite value in {term}")]
    Divergence { term: String, t: f64 },

    /// A monitored invariant was breached while running in strict mode.
    #[error("invariant breach: {0}")]
    Invariant(String),

    #[error("snapshot format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn contract(message: impl Into<String>) -> Self {
        Error::Contract(message.into())
    }
}
