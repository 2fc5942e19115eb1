use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("duplicate object id `{0}`")]
    DuplicateId(String),

    #[error("unknown object `{0}`")]
    UnknownObject(String),

    #[error("conflicting constraints: `{a}` and `{b}` are must-linked but also cannot-linked")]
    ConflictingConstraints { a: String, b: String },

    #[error("degenerate input: k = {k} exceeds the number of objects n = {n}")]
    DegenerateInput { k: usize, n: usize },

    #[error("no seed for class {0}")]
    MissingSeedClass(usize),

    #[error("seed class {class} is outside 0..{k}")]
    SeedClassOutOfRange { class: usize, k: usize },

    #[error("no feasible cluster for object {object} under the pairwise constraints")]
    InfeasibleAssignment { object: usize },

    #[error("row {row} is the zero vector and cannot be normalized")]
    ZeroVector { row: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("table of size {k} exceeds the enumeration bound {max}")]
    TooLarge { k: usize, max: usize },

    #[error("label {0} has no entry in the alignment map")]
    UnmappedLabel(usize),

    #[error("index {index} out of range for {len} partitions")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("weight must be finite and non-negative, got {0}")]
    NegativeWeight(f64),

    #[error("every combined weight is zero")]
    AllZeroWeights,

    #[error("fewer than two jointly labeled objects")]
    TooFewObjects,

    #[error("{path}: parse error at row {row}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: non-finite feature value at row {row}, column {column}")]
    NonNumericFeature {
        path: PathBuf,
        row: usize,
        column: usize,
    },

    #[error("{path}: row {row} has {found} fields, expected {expected}")]
    RaggedRows {
        path: PathBuf,
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("{path}: partition column {column} has no labels")]
    EmptyColumn { path: PathBuf, column: usize },

    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("ensemble entry {index} ({algorithm}): {source}")]
    Entry {
        index: usize,
        algorithm: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{stage} stage: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

/// Pipeline stage names used to tag errors surfaced by [`crate::consensus::scev_run`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ensemble,
    Reference,
    Alignment,
    Weights,
    Voting,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Ensemble => "ensemble",
            Stage::Reference => "reference",
            Stage::Alignment => "alignment",
            Stage::Weights => "weights",
            Stage::Voting => "voting",
        })
    }
}

impl Error {
    pub(crate) fn in_stage(self, stage: Stage) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Strips stage and entry tags, returning the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Entry { source, .. } | Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}
