//! Labeling contests: clip serving, opinion intake with immediate feedback,
//! leaderboards, prize settlement and replay from the opinion log.
//!
//! Concurrency contract of [`Platform`]: submissions touching the same user
//! or the same clip of a contest are serialized (user lock, then clip lock);
//! everything else proceeds in parallel. The opinion log is appended while
//! both locks are held, so per-user and per-clip order in the log equals the
//! order in which state was updated, which is what makes replay exact.
//! Snapshot reads block submissions of that contest for their duration.

mod log;
mod platform;
mod prizes;

use std::io::Write;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::consensus::{ConsensusError, ConsensusPolicy};
use crate::model::{ClassLabel, Clip, Opinion};

pub use log::{read_log, JsonLinesLog, LogSink, MemoryLog, NullLog};
pub use platform::Platform;
pub use prizes::{settle, LedgerEntry, PrizeConfig};

#[derive(Debug, thiserror::Error)]
pub enum ContestError {
    #[error("unknown contest {0}")]
    UnknownContest(String),
    #[error("unknown clip {0}")]
    UnknownClip(String),
    #[error("contest {0} is closed")]
    ContestClosed(String),
    #[error("contest {0} is still open")]
    ContestStillOpen(String),
    #[error("clip {0} is not in the contest pool")]
    ClipNotInPool(String),
    #[error("clip {0} is excluded")]
    ClipExcluded(String),
    #[error("contest pool is empty")]
    EmptyPool,
    #[error("clip {0} has no reference label")]
    MissingReference(String),
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
    #[error("corrupt log at line {line}: {message}")]
    CorruptLog { line: u64, message: String },
    #[error("replay diverged at opinion {opinion_id}: {message}")]
    ReplayDivergence { opinion_id: u64, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl ContestError {
    /// Machine-readable error code used by the HTTP API.
    pub fn code(&self) -> &'static str {
        match self {
            ContestError::UnknownContest(_) => "UnknownContest",
            ContestError::UnknownClip(_) => "UnknownClip",
            ContestError::ContestClosed(_) => "ContestClosed",
            ContestError::ContestStillOpen(_) => "ContestStillOpen",
            ContestError::ClipNotInPool(_) => "ClipNotInPool",
            ContestError::ClipExcluded(_) => "ClipExcluded",
            ContestError::EmptyPool => "EmptyPool",
            ContestError::MissingReference(_) => "MissingReference",
            ContestError::Consensus(ConsensusError::InvalidPolicy(_)) => "InvalidPolicy",
            ContestError::Consensus(_) => "ConsensusError",
            ContestError::CorruptLog { .. } => "CorruptLog",
            ContestError::ReplayDivergence { .. } => "ReplayDivergence",
            ContestError::Io(_) => "IoError",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContestStatus {
    Open,
    Closed,
}

/// Parameters of a new contest. The contest id is a hash of these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContestSpec {
    pub pool: Vec<String>,
    #[serde(default)]
    pub policy: ConsensusPolicy,
    #[serde(default)]
    pub prize_pool_cents: u64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contest {
    pub contest_id: String,
    /// Sorted, deduplicated, exclusions removed.
    pub pool: Vec<String>,
    pub policy: ConsensusPolicy,
    pub prize_pool_cents: u64,
    pub status: ContestStatus,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeedbackDisposition {
    Revealed(ClassLabel),
    Recorded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackResponse {
    pub opinion_id: u64,
    pub disposition: FeedbackDisposition,
    pub trailing_accuracy: Option<f64>,
    pub score: Option<f64>,
    pub scored_count: u64,
}

/// What a client sees when asking for the next clip. Carries no role or label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServedClip {
    pub contest_id: String,
    pub clip_id: String,
    pub media_uri: String,
}

/// One line of the opinion log. Field order is the on-disk order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpinionLogEntry {
    pub opinion_id: u64,
    pub contest_id: String,
    pub user_id: String,
    pub clip_id: String,
    pub label: ClassLabel,
    pub submitted_at: DateTime<Utc>,
    pub trailing_accuracy_at_submission: Option<f64>,
    pub eligible: bool,
    pub feedback: FeedbackDisposition,
}

impl OpinionLogEntry {
    pub fn opinion(&self) -> Opinion {
        Opinion {
            opinion_id: self.opinion_id,
            user_id: self.user_id.clone(),
            clip_id: self.clip_id.clone(),
            label: self.label,
            submitted_at: self.submitted_at,
            trailing_accuracy_at_submission: self.trailing_accuracy_at_submission,
            eligible: self.eligible,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub rank: usize,
    pub user_id: String,
    pub score: f64,
    pub correct: u64,
    pub scored_count: u64,
}

pub fn write_leaderboard_csv<W: Write>(entries: &[LeaderboardEntry], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rank", "user_id", "score", "correct", "scored_count"])?;
    for e in entries {
        w.write_record([
            e.rank.to_string(),
            e.user_id.clone(),
            format!("{:.6}", e.score),
            e.correct.to_string(),
            e.scored_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Platform-wide house rules for scoring and payouts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlatformConfig {
    /// Scored opinions a user needs within a contest to appear on its leaderboard.
    pub leaderboard_min_scored: u64,
    pub prizes: PrizeConfig,
}

impl Default for PlatformConfig {
    fn default() -> Self {
        PlatformConfig {
            leaderboard_min_scored: 10,
            prizes: PrizeConfig::default(),
        }
    }
}

/// Everything replay needs besides the log: clips and contest definitions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlatformSetup {
    pub clips: Vec<Clip>,
    pub contests: Vec<Contest>,
}
