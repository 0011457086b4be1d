//! Synthetic datasets, expert panels and learning crowd users, plus an
//! end-to-end experiment driver that runs a contest in-process and analyzes
//! its log.

mod dataset;
mod experiment;
mod labeler;

pub use dataset::{
    generate_dataset, paper_fixture_manifest, DatasetSpec, DifficultyDistribution, DifficultyDraw, SyntheticClip,
    PAPER_FIXTURE_CLIPS, PAPER_FIXTURE_PATIENTS, PAPER_FLAGGED, PAPER_SELECTED_PER_SET,
};
pub use experiment::{
    run_experiment, CrowdConfig, CrowdMember, DatasetConfig, ExperimentConfig, ExperimentOutput, PanelConfig,
    SetConfig,
};
pub use labeler::{answer, sample_expert_panel, ClipProfile, LabelerProfile};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("class mix {0:?} must be probabilities summing to 1")]
    BadMix([f64; 3]),
    #[error("difficulty {0} outside [0, 1)")]
    BadDifficulty(f64),
    #[error("invalid labeler profile: {0}")]
    BadProfile(String),
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Ingest(#[from] crate::ingest::IngestError),
    #[error(transparent)]
    Consensus(#[from] crate::consensus::ConsensusError),
    #[error(transparent)]
    Contest(#[from] crate::contest::ContestError),
    #[error(transparent)]
    Analysis(#[from] crate::analysis::AnalysisError),
}
