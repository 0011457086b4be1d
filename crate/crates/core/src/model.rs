//! Shared domain vocabulary: labels, clips, opinions and users.

use std::fmt;
use std::ops::{Add, AddAssign, Index};
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

/// B-line severity class, ordered from least to most severe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassLabel {
    #[serde(rename = "no")]
    NoBLines,
    #[serde(rename = "discrete")]
    DiscreteBLines,
    #[serde(rename = "confluent")]
    ConfluentBLines,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 3] = [
        ClassLabel::NoBLines,
        ClassLabel::DiscreteBLines,
        ClassLabel::ConfluentBLines,
    ];

    pub fn severity_rank(self) -> u8 {
        match self {
            ClassLabel::NoBLines => 0,
            ClassLabel::DiscreteBLines => 1,
            ClassLabel::ConfluentBLines => 2,
        }
    }

    pub fn from_rank(rank: usize) -> Option<ClassLabel> {
        Self::ALL.get(rank).copied()
    }

    pub fn index(self) -> usize {
        self.severity_rank() as usize
    }

    /// Wire name used in CSV files, the opinion log and the HTTP API.
    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::NoBLines => "no",
            ClassLabel::DiscreteBLines => "discrete",
            ClassLabel::ConfluentBLines => "confluent",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown class label `{0}` (expected no, discrete or confluent)")]
pub struct UnknownLabel(pub String);

impl FromStr for ClassLabel {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "no" => Ok(ClassLabel::NoBLines),
            "discrete" => Ok(ClassLabel::DiscreteBLines),
            "confluent" => Ok(ClassLabel::ConfluentBLines),
            _ => Err(UnknownLabel(s.to_string())),
        }
    }
}

/// The label a clip takes when both severities are present in it.
pub fn severity_max(a: ClassLabel, b: ClassLabel) -> ClassLabel {
    if b.severity_rank() > a.severity_rank() {
        b
    } else {
        a
    }
}

/// Per-class vote tally indexed by severity rank.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VoteCounts(pub [u32; 3]);

impl VoteCounts {
    pub fn new(no: u32, discrete: u32, confluent: u32) -> Self {
        VoteCounts([no, discrete, confluent])
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn get(&self, label: ClassLabel) -> u32 {
        self.0[label.index()]
    }

    pub fn add_vote(&mut self, label: ClassLabel) {
        self.0[label.index()] += 1;
    }

    /// Panics if there is no vote for `label` to remove.
    pub fn remove_vote(&mut self, label: ClassLabel) {
        let slot = &mut self.0[label.index()];
        assert!(*slot > 0, "removing a vote that was never counted");
        *slot -= 1;
    }

    pub fn modal_count(&self) -> u32 {
        self.0.iter().copied().max().unwrap_or(0)
    }

    /// Classes holding the modal count, in severity order. Empty when there are no votes.
    pub fn modal_classes(&self) -> Vec<ClassLabel> {
        let max = self.modal_count();
        if max == 0 {
            return Vec::new();
        }
        ClassLabel::ALL
            .into_iter()
            .filter(|l| self.get(*l) == max)
            .collect()
    }

    pub fn fraction(&self, label: ClassLabel) -> Option<f64> {
        let total = self.total();
        (total > 0).then(|| f64::from(self.get(label)) / f64::from(total))
    }
}

impl Index<ClassLabel> for VoteCounts {
    type Output = u32;

    fn index(&self, label: ClassLabel) -> &u32 {
        &self.0[label.index()]
    }
}

impl Add for VoteCounts {
    type Output = VoteCounts;

    fn add(mut self, rhs: VoteCounts) -> VoteCounts {
        self += rhs;
        self
    }
}

impl AddAssign for VoteCounts {
    fn add_assign(&mut self, rhs: VoteCounts) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
    }
}

impl FromIterator<ClassLabel> for VoteCounts {
    fn from_iter<I: IntoIterator<Item = ClassLabel>>(iter: I) -> Self {
        let mut counts = VoteCounts::default();
        for label in iter {
            counts.add_vote(label);
        }
        counts
    }
}

pub fn vote_counts(opinions: &[Opinion]) -> VoteCounts {
    opinions.iter().map(|o| o.label).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClipRole {
    Training,
    Test,
    Unlabeled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clip {
    pub clip_id: String,
    pub patient_id: String,
    pub role: ClipRole,
    pub reference_label: Option<ClassLabel>,
    pub excluded: bool,
    pub frame_rate_hz: f64,
    pub media_uri: String,
}

impl Clip {
    pub fn is_labeled_role(&self) -> bool {
        matches!(self.role, ClipRole::Training | ClipRole::Test)
    }
}

/// One submission event. Eligibility is frozen when the opinion is accepted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Opinion {
    pub opinion_id: u64,
    pub user_id: String,
    pub clip_id: String,
    pub label: ClassLabel,
    pub submitted_at: DateTime<Utc>,
    pub trailing_accuracy_at_submission: Option<f64>,
    pub eligible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UserKind {
    Expert,
    Crowd,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct User {
    pub user_id: String,
    pub kind: UserKind,
    pub reported_medical_experience: Option<bool>,
}
