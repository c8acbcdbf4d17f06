//! Error-to-exit-code mapping for the CLI.
//!
//! Codes are stable: 2 parse errors, 3 alignment errors, 4 gain
//! unavailable, 5 beta on a non-GLM, 6 bad groups, 1 anything else.

use std::fmt;

use shapkit::plots::PlotError;
use shapkit::{AttributionError, DatasetError, ImportanceError, ModelError, PackingError};

#[derive(Debug)]
pub enum CliError {
    Parse(String),
    Alignment(String),
    GainUnavailable(String),
    BetaRequiresGlm,
    Groups(String),
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Other(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Alignment(_) => 3,
            CliError::GainUnavailable(_) => 4,
            CliError::BetaRequiresGlm => 5,
            CliError::Groups(_) => 6,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse(m)
            | CliError::Alignment(m)
            | CliError::Groups(m)
            | CliError::Other(m) => f.write_str(m),
            CliError::GainUnavailable(m) => write!(f, "gain importance unavailable: {m}"),
            CliError::BetaRequiresGlm => f.write_str("beta importance requires a glm model"),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::RowLength { .. } | ModelError::GlmMissingValue { .. } => {
                CliError::Alignment(e.to_string())
            }
            other => CliError::Parse(other.to_string()),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::NameMismatch { .. } | DatasetError::NominalColumn(_) => {
                CliError::Alignment(e.to_string())
            }
            other => CliError::Parse(other.to_string()),
        }
    }
}

impl From<AttributionError> for CliError {
    fn from(e: AttributionError) -> Self {
        match e {
            AttributionError::Model(m) => m.into(),
            AttributionError::Dataset(d) => d.into(),
            AttributionError::EmptyDataset => CliError::Alignment(e.to_string()),
            AttributionError::BadMatrix(_) => CliError::Parse(e.to_string()),
            AttributionError::TooManyFeatures { .. } => CliError::Other(e.to_string()),
        }
    }
}

impl From<ImportanceError> for CliError {
    fn from(e: ImportanceError) -> Self {
        match e {
            ImportanceError::MissingGain { .. } => CliError::GainUnavailable(e.to_string()),
            ImportanceError::StatsMismatch { .. } => CliError::Alignment(e.to_string()),
        }
    }
}

impl From<PackingError> for CliError {
    fn from(e: PackingError) -> Self {
        CliError::Groups(e.to_string())
    }
}

impl From<PlotError> for CliError {
    fn from(e: PlotError) -> Self {
        match e {
            PlotError::UnknownFeature(_) | PlotError::FeatureAllMissing(_) => {
                CliError::Alignment(e.to_string())
            }
            PlotError::BadGrid(_) => CliError::Parse(e.to_string()),
            PlotError::Dataset(d) => d.into(),
            PlotError::Model(m) => m.into(),
            PlotError::Attribution(a) => a.into(),
        }
    }
}
