use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("formula syntax error at position {pos}: {msg}")]
    FormulaSyntax { pos: usize, msg: String },
    #[error("invalid formula: {0}")]
    Formula(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("design error: {0}")]
    Design(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("failed to converge: {0}")]
    Convergence(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Errors caused by the numerics rather than by what the user asked for.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_) | Error::Convergence(_))
    }
}

macro_rules! ensure {
    ($cond:expr, $variant:ident, $($arg:tt)+) => {
        if !$cond {
            return Err($crate::error::Error::$variant(format!($($arg)+)));
        }
    };
}
pub(crate) use ensure;
