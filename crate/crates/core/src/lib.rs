//! Tag-aware recommendations from social bookmarking data.
//!
//! The crate turns a stream of `(article, user, timestamp, tag)` annotations
//! into a tripartite folksonomy, clusters the tag vocabulary by semantic
//! similarity (information content over an IS-A taxonomy, exemplars found by
//! affinity propagation), and scores unseen items for a user by combining the
//! cluster profiles, annotation diversity, and tagging effort of the item's
//! annotators. Four reference recommenders (random, tag and cluster transition
//! probabilities, vector space cosine) and a seeded cross-validation harness
//! round out the pipeline so the whole chain is reproducible end to end.
//!
//! Modules follow the pipeline order:
//!
//! * [`corpus`] parses annotations, applies population filters, samples users
//!   and splits folds.
//! * [`taxonomy`] computes concept information content and tag-to-tag
//!   similarity matrices.
//! * [`clustering`] groups tags with deterministic affinity propagation.
//! * [`recommender`] implements the competency-weighted scoring model.
//! * [`baselines`] implements the reference recommenders.
//! * [`eval`] runs the cross-validation protocol and emits report files.
//! * [`synth`] generates seeded bookmarking corpora for benchmarks and tests.

pub mod baselines;
pub mod clustering;
pub mod corpus;
pub mod eval;
pub mod recommender;
pub mod synth;
pub mod taxonomy;

use thiserror::Error;

/// Errors shared across the pipeline.
///
/// `InvalidArgument` marks caller mistakes (bad thresholds, unknown names),
/// everything else marks defective input data. The CLI maps the two groups to
/// distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("annotation format error: {0}")]
    AnnotationFormat(String),

    #[error("taxonomy format error: {0}")]
    TaxonomyFormat(String),

    #[error("similarity matrix format error: {0}")]
    MatrixFormat(String),

    #[error("snapshot format error: {0}")]
    SnapshotFormat(String),

    #[error("clustering format error: {0}")]
    ClusteringFormat(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True when the error blames the caller's configuration rather than the
    /// data being processed.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::InvalidArgument(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
