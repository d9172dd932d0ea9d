//! Error type shared by every module in the crate.
//!
//! Variants are grouped by what went wrong rather than where, so callers
//! (notably the CLI) can map them onto stable process exit codes:
//!
//! | Variant     | Meaning                                        | CLI exit |
//! |-------------|------------------------------------------------|----------|
//! | `Config`    | invalid parameter, shape, or option            | 2        |
//! | `Data`      | malformed file, bad label, infeasible split    | 3        |
//! | `Numerical` | non-finite value reached training or gradients | 4        |
//! | `Io`        | underlying filesystem failure                  | 3        |

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter, dimension, or option failed validation.
    #[error("config: {0}")]
    Config(String),

    /// A dataset, code file, or checkpoint is malformed or inconsistent.
    #[error("data: {0}")]
    Data(String),

    /// A non-finite value (NaN/Inf) was produced where finiteness is required.
    #[error("numerical: {0}")]
    Numerical(String),

    /// An I/O operation failed.
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code the CLI maps this error onto.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) | Error::Io(_) => 3,
            Error::Numerical(_) => 4,
        }
    }
}
