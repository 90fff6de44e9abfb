use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] wrof_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("verification suite has no instances")]
    EmptySuite,

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Self::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// Stable identifier printed next to the message.
    pub fn kind(&self) -> &'static str {
        use wrof_core::Error as E;
        match self {
            Self::Core(e) => match e {
                E::EmptyMeasure => "EmptyMeasure",
                E::NegativeWeight { .. } => "NegativeWeight",
                E::NonFiniteWeight { .. } => "NonFiniteWeight",
                E::NonFiniteCoordinate { .. } => "NonFiniteCoordinate",
                E::DimensionMismatch { .. } => "DimensionMismatch",
                E::LengthMismatch { .. } => "LengthMismatch",
                E::AllZeroImage => "AllZeroImage",
                E::InvalidGrid { .. } => "InvalidGrid",
                E::InvalidDomain(_) => "InvalidDomain",
                E::NonPositiveLambda(_) => "NonPositiveLambda",
                E::SolverFailure(_) => "SolverFailure",
                E::FewerThanTwoPoints => "FewerThanTwoPoints",
                E::CostMismatch => "CostMismatch",
                E::EmptyGrid => "EmptyGrid",
                E::BudgetExceeded { .. } => "BudgetExceeded",
                E::AtomBudgetExceeded { .. } => "AtomBudgetExceeded",
                E::EmptySchedule => "EmptySchedule",
            },
            Self::Io { .. } => "Io",
            Self::Parse { .. } => "Parse",
            Self::EmptySuite => "EmptySuite",
            Self::Usage(_) => "Usage",
        }
    }

    /// 2 for bad input or usage, 1 when a computation could not finish.
    pub fn exit_code(&self) -> u8 {
        use wrof_core::Error as E;
        match self {
            Self::Core(
                E::SolverFailure(_) | E::BudgetExceeded { .. } | E::AtomBudgetExceeded { .. },
            ) => 1,
            _ => 2,
        }
    }
}
