use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("replication {rep} (seed {seed:#018x}): {source}")]
    Replication {
        rep: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("divergent replications (non-finite average), seeds: {0:?}")]
    Divergent(Vec<u64>),

    #[error("csv row {row}, column '{column}': {message}")]
    CsvCell {
        row: usize,
        column: String,
        message: String,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_iteration(self, iteration: u64) -> Error {
        match self {
            e @ Error::AtIteration { .. } => e,
            e => Error::AtIteration {
                iteration,
                source: Box::new(e),
            },
        }
    }

    /// Innermost error, skipping iteration / replication context.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtIteration { source, .. } | Error::Replication { source, .. } => source.root(),
            e => e,
        }
    }

    /// Process exit code for the CLI: 2 config, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Config(_) | Error::InvalidParameter(_) | Error::DimensionMismatch { .. } => 2,
            Error::NonFinite(_) | Error::Numerical(_) | Error::Divergent(_) => 3,
            Error::Json(e) if !e.is_io() => 2,
            Error::CsvCell { .. } | Error::Csv(_) | Error::Json(_) | Error::Io(_) => 4,
            Error::AtIteration { .. } | Error::Replication { .. } => unreachable!(),
        }
    }
}

pub(crate) fn ensure_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

pub(crate) fn ensure_finite(what: &str, xs: &[f64]) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}
