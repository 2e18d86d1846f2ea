use thiserror::Error;

pub type Result<T> = std::result::Result<T, RrnnError>;

#[derive(Debug, Error)]
pub enum RrnnError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point {point:?} lies outside {region}")]
    OutOfDomain { point: Vec<f64>, region: String },

    #[error("assembly failed: {what} is not finite at {point:?}")]
    Assembly { what: &'static str, point: Vec<f64> },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("least-squares solver failed: {0}")]
    Solver(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("internal consistency error: {0}")]
    Dimension(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<RrnnError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl RrnnError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        RrnnError::InvalidArgument(msg.into())
    }

    /// Wraps the error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        RrnnError::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, with all stage wrappers removed.
    pub fn root(&self) -> &RrnnError {
        match self {
            RrnnError::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            RrnnError::Solver(_)
                | RrnnError::Assembly { .. }
                | RrnnError::UndefinedMetric(_)
                | RrnnError::Dimension(_)
        )
    }
}
