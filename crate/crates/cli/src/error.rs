use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAIL: i32 = 2;
    pub const NONEXISTENCE: i32 = 3;
    pub const CONFIG: i32 = 64;
    pub const NOT_SYMMETRIC: i32 = 65;
    pub const NUMERIC: i32 = 70;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Library(#[from] sublinear::Error),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("scenario file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("report file: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use sublinear::Error as E;
        match self {
            CliError::Library(e) => match e {
                E::NotSymmetric { .. } => exit::NOT_SYMMETRIC,
                E::NoConvergence(_)
                | E::BudgetExhausted { .. }
                | E::LpNumericalFailure { .. }
                | E::SeedNotSubsolution { .. }
                | E::MaxIterExceeded { .. }
                | E::GapStagnation { .. }
                | E::NotQuasiMetricModified(_) => exit::NUMERIC,
                _ => exit::CONFIG,
            },
            _ => exit::CONFIG,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}
