//! Retrieval metrics, problem-level splits, problem-group sampling and
//! configuration sweeps.

mod corpus;
mod metrics;
mod sweep;

use std::collections::BTreeMap;

use serde::Serialize;

pub use corpus::{sample_problem_groups, split_by_problem, LabeledCorpus, Split};
pub use metrics::{average_precision, map_at_r, map_at_r_by, pair_average_precision, precision_recall_points};
pub use sweep::{evaluate_group_ap, sweep_configs, GroupAp, MarginalRow, Program, ProgramCorpus, SweepReport, SweepRow};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("AP undefined: no positive labels")]
    NoPositives,
    #[error("scores and labels differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("duplicate program id {0:?}")]
    DuplicateId(String),
    #[error("program {0:?} has no class label")]
    MissingLabel(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("fractions must be non-negative and sum to 1, got {0:?}")]
    Fractions([f64; 3]),
    #[error("{classes} classes cannot fill {parts} non-empty partitions")]
    TooFewClasses { classes: usize, parts: usize },
    #[error("group size {size} exceeds the {classes} available classes")]
    GroupTooLarge { size: usize, classes: usize },
    #[error("class {0:?} not present in corpus")]
    UnknownClass(String),
    #[error(transparent)]
    Feature(#[from] crate::featurize::FeatureError),
    #[error(transparent)]
    Similarity(#[from] crate::simindex::SimError),
}

/// Result of one evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    /// `"map@r"` or `"ap"`.
    pub metric: String,
    pub value: f64,
    pub n_queries: usize,
    /// Queries without any same-class neighbour.
    pub skipped: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub per_query: Vec<(String, f64)>,
    /// `(recall, precision)` at each threshold.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub pr_points: Vec<(f64, f64)>,
    pub per_class: BTreeMap<String, usize>,
    pub config: Option<String>,
    pub seed: Option<u64>,
}
