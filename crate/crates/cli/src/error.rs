use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("no rows left after dropping {dropped} rows with missing values")]
    EmptyAfterFiltering { dropped: usize },

    #[error("{block} design matrix is rank deficient")]
    RankDeficientDesign { block: &'static str },

    #[error("{n} observations are too few for {needed} regressors plus one")]
    InsufficientObservations { n: usize, needed: usize },

    #[error("failed to write output: {0}")]
    Output(String),

    #[error(transparent)]
    Core(#[from] kps_core::Error),
}

impl CliError {
    /// Process exit status for this error. Success, including a rejected
    /// null, is 0; clap reports usage errors with 2.
    pub fn exit_code(&self) -> u8 {
        use kps_core::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Parse(_) => 4,
            CliError::Schema(_) => 5,
            CliError::EmptyAfterFiltering { .. } => 6,
            CliError::RankDeficientDesign { .. } => 7,
            CliError::InsufficientObservations { .. } => 8,
            CliError::Output(_) => 12,
            CliError::Core(e) => match e {
                E::DimensionError { .. } => 9,
                E::DegenerateSample(_) | E::SingularSecondMoment(_) | E::TooFewClusters(_) => 10,
                E::InvalidArgument(_) | E::SigmaOutOfRange { .. } | E::ShapeMismatch(_) => 2,
                _ => 11,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
