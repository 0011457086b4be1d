//! Evaluation statistics over opinion logs and reference standards, plus the
//! tabular outputs behind each figure analogue.

mod concordance;
mod crowd;
mod curves;
mod learning;
mod report;
pub mod stats;

use std::collections::BTreeMap;

use crate::model::ClassLabel;

pub use concordance::{
    agreement_stratified_concordance, concordance, concordance_report, confusion_matrix,
    mean_report, ConcordanceReport, ConfusionMatrix, Stratum,
};
pub use crowd::{crowd_labels, eligible_votes, expert_agreement, CrowdClip};
pub use curves::{accuracy_vs_opinion_count, roc_per_class, CurvePoint, OpinionCountCurve, RocCurve, Sampling};
pub use learning::{cohort_curve, learning_curves, match_sequences, LearningCurve, LearningCurves, LearningPoint};
pub use report::{
    analyze, write_figure_files, AnalysisConfig, AnalysisInputs, AnalysisReport, Descriptives, ExpertSummary,
    OperatingPoint,
};
pub use stats::{
    auc, mann_whitney_u, mean_sem, paired_t_test, pearson_r, Correlation, MannWhitney, PValueMethod, TTest,
};

/// Clip id to label.
pub type LabelMap = BTreeMap<String, ClassLabel>;

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("key sets differ: {only_left} keys only on the left, {only_right} only on the right")]
    KeyMismatch { only_left: usize, only_right: usize },
    #[error("no values")]
    Empty,
    #[error("need at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("zero variance")]
    ZeroVariance,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("clip {0} has no eligible opinions")]
    NoOpinions(String),
    #[error("only one class present")]
    SingleClass,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Consensus(#[from] crate::consensus::ConsensusError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub(crate) fn check_keys<A, B>(left: &BTreeMap<String, A>, right: &BTreeMap<String, B>) -> Result<(), AnalysisError> {
    if left.len() == right.len() && left.keys().eq(right.keys()) {
        if left.is_empty() {
            return Err(AnalysisError::Empty);
        }
        return Ok(());
    }
    Err(AnalysisError::KeyMismatch {
        only_left: left.keys().filter(|k| !right.contains_key(*k)).count(),
        only_right: right.keys().filter(|k| !left.contains_key(*k)).count(),
    })
}
