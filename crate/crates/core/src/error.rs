use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A shape, symmetry or range precondition was not met by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("matrix is not symmetric positive definite (eig_min = {eig_min:e}, eig_max = {eig_max:e})")]
    NotSpd { eig_min: f64, eig_max: f64 },

    /// The observability Gramian of a stacking window is singular or too badly
    /// conditioned to invert; usually the window is shorter than the
    /// observability index of the system.
    #[error("insufficient excitation at k = {k}: observability Gramian condition number {cond:e}")]
    Excitation { k: usize, cond: f64 },

    #[error("insufficient history: {0}")]
    InsufficientHistory(String),

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short stable identifier used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Contract(_) => "contract",
            Error::NotSpd { .. } => "not_spd",
            Error::Excitation { .. } => "excitation",
            Error::InsufficientHistory(_) => "insufficient_history",
            Error::Singular(_) => "singular",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
