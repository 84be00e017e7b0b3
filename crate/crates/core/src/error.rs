use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("CSV error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    // manifest
    #[error("duplicate dataset id `{0}`")]
    DuplicateDatasetId(String),

    #[error("duplicate record id `{record_id}` (datasets `{first_dataset}` and `{second_dataset}`)")]
    DuplicateRecordId {
        record_id: String,
        first_dataset: String,
        second_dataset: String,
    },

    #[error("record `{0}` has no canonical class; run projection first")]
    UnprojectedRecord(String),

    #[error("record `{record_id}` has class `{class_id}` which is not among the requested classes")]
    UnknownClass { record_id: String, class_id: String },

    #[error("dataset `{dataset_id}` declares {declared} images but {found} records were ingested")]
    CountMismatch {
        dataset_id: String,
        declared: u64,
        found: u64,
    },

    // taxonomy
    #[error("taxonomy cycle through class `{0}`")]
    CycleDetected(String),

    #[error("duplicate class id `{0}`")]
    DuplicateClassId(String),

    #[error("class `{class_id}` references unknown parent `{parent}`")]
    UnknownParent { class_id: String, parent: String },

    #[error("class `{0}` is not defined in the taxonomy")]
    UnknownTaxonomyClass(String),

    #[error("target class `{0}` listed twice")]
    DuplicateTargetClass(String),

    #[error("mapping for (`{dataset_id}`, `{raw_label}`) defined twice with different targets")]
    ConflictingMapping { dataset_id: String, raw_label: String },

    #[error("no mapping entry for dataset `{dataset_id}`, raw label `{raw_label}`")]
    UnmappedLabel { dataset_id: String, raw_label: String },

    #[error("{} unmapped (dataset, raw label) pairs, first: {:?}", .0.len(), .0.first())]
    UnmappedLabels(Vec<(String, String)>),

    // adapters
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },

    #[error("file name `{0}` does not match the configured pattern")]
    PatternMismatch(String),

    #[error("invalid filename pattern `{pattern}`: {reason}")]
    InvalidPattern { pattern: String, reason: String },

    #[error("invalid adapter config for `{dataset_id}`: {reason}")]
    InvalidAdapterConfig { dataset_id: String, reason: String },

    #[error("invalid group policy: {0}")]
    InvalidGroupPolicy(String),

    #[error("record `{0}` yields no group key under the configured fallback chain")]
    NoGroupKey(String),

    #[error("invalid split hint `{0}`")]
    InvalidSplitHint(String),

    // splitter
    #[error("invalid split spec: {0}")]
    InvalidSpec(String),

    #[error("k = {k} exceeds the number of groups ({groups})")]
    KTooLarge { k: usize, groups: usize },

    #[error("record `{0}` is not in the manifest")]
    UnknownRecord(String),

    #[error("split `{0}` does not exist in the assignment")]
    UnknownSplit(String),

    #[error("rebalance target unreachable: {0}")]
    UnreachableTarget(String),

    #[error("match key `{key}` is mapped to both `{first}` and `{second}`")]
    ConflictingExternalEntry { key: String, first: String, second: String },

    #[error("records `{first}` and `{second}` share match key `{key}` within dataset `{dataset_id}`")]
    AmbiguousMatch {
        key: String,
        dataset_id: String,
        first: String,
        second: String,
    },

    #[error("{} record(s) have no external split entry, first: `{}`", .0.len(), .0.first().map(String::as_str).unwrap_or(""))]
    UnmatchedRecords(Vec<String>),

    #[error("external split map is empty")]
    EmptyExternalSplit,

    // weights / metrics
    #[error("no records to compute over")]
    EmptyInput,

    #[error("{} record(s) have no prediction, first: `{}`", .0.len(), .0.first().map(String::as_str).unwrap_or(""))]
    MissingPrediction(Vec<String>),

    #[error("class order mismatch: {0}")]
    ClassOrderMismatch(String),

    #[error("invalid prediction set: {0}")]
    InvalidPredictions(String),

    #[error("confusion matrix has no ground-truth records")]
    EmptyMatrix,

    #[error("labels are all {}", if *.0 { "positive" } else { "negative" })]
    DegenerateLabels(bool),

    #[error("no positive labels")]
    NoPositives,

    #[error("value {0} outside [0, 1]")]
    OutOfRange(f64),

    #[error("scores and labels differ in length ({scores} vs {labels})")]
    LengthMismatch { scores: usize, labels: usize },

    #[error("unknown fixture preset `{0}`")]
    UnknownPreset(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
