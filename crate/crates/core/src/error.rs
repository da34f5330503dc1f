use thiserror::Error;

use crate::entity::EntityType;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("unknown entity type `{0}`")]
    UnknownEntityType(String),
    #[error("invalid value `{raw}`: {reason}")]
    InvalidValue { raw: String, reason: String },
    #[error("entity `{entity}` has duplicate attribute `{attribute}`")]
    DuplicateAttribute { entity: String, attribute: String },
    #[error("entity `{entity}` has no attribute `{attribute}`")]
    UnknownAttribute { entity: String, attribute: String },
    #[error("malformed resource {file}:{line}: {reason}")]
    Resource { file: String, line: usize, reason: String },
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<DataError>,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error, PartialEq)]
pub enum PerturbError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("only {found} of {wanted} distinct alternatives available")]
    InsufficientAlternatives { wanted: usize, found: usize },
    #[error("no curated value set for `{0}`")]
    NoCuratedSet(String),
    #[error("generator reply malformed: {0}")]
    GeneratorFormatError(String),
    #[error("generator unavailable: {0}")]
    GeneratorUnavailable(String),
    #[error("attribute `{0}` has no perturbation method")]
    NotPerturbable(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum SourceError {
    #[error("template error: {0}")]
    TemplateError(String),
    #[error("feature error: {0}")]
    FeatureError(String),
    #[error("configuration error: {0}")]
    ConfigError(String),
    #[error("vocabulary split violation: {0}")]
    SplitViolation(String),
    #[error("cannot parse source display `{0}`")]
    Unparseable(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("no question template for {entity_type}.{attribute}")]
    MissingQuestion { entity_type: EntityType, attribute: String },
    #[error("template error: {0}")]
    TemplateError(String),
    #[error("invalid layout: {0}")]
    Layout(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("both answer probabilities are zero")]
    DegenerateProbs,
    #[error("incomplete measurement: {0}")]
    IncompleteMeasurement(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("key mismatch: {0}")]
    KeyMismatch(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
}

#[derive(Debug, Error)]
pub enum MitigationError {
    #[error("invalid distribution: {0}")]
    DistributionError(String),
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("export schema: {0}")]
    Schema(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
