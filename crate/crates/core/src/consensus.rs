//! Majority-rule aggregation: expert reference standards and quality-gated
//! crowd consensus.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::{ClassLabel, Opinion, VoteCounts};
use crate::rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConsensusError {
    #[error("no votes to aggregate")]
    EmptyVotes,
    #[error("clip {0} is excluded")]
    ClipExcluded(String),
    #[error("opinion for clip {got} applied to state of clip {expected}")]
    ClipMismatch { expected: String, got: String },
    #[error("clip {clip_id} has no opinion from expert {expert_id}")]
    MissingExpertOpinion { clip_id: String, expert_id: String },
    #[error("leave-one-out references need at least two experts, panel has {0}")]
    PanelTooSmall(usize),
    #[error("invalid consensus policy: {0}")]
    InvalidPolicy(String),
}

/// Modal class of `counts`; tied modal classes are resolved uniformly from `tie_rng`.
pub fn majority_label<R: Rng + ?Sized>(
    counts: &VoteCounts,
    tie_rng: &mut R,
) -> Result<ClassLabel, ConsensusError> {
    let modal = counts.modal_classes();
    match modal.len() {
        0 => Err(ConsensusError::EmptyVotes),
        1 => Ok(modal[0]),
        n => Ok(modal[tie_rng.gen_range(0..n)]),
    }
}

/// Share of votes held by the modal class.
pub fn agreement_level(counts: &VoteCounts) -> Result<f64, ConsensusError> {
    let total = counts.total();
    if total == 0 {
        return Err(ConsensusError::EmptyVotes);
    }
    Ok(f64::from(counts.modal_count()) / f64::from(total))
}

/// Modal class holds at least two thirds of the votes (boundary inclusive).
pub fn supermajority_reached(counts: &VoteCounts) -> Result<bool, ConsensusError> {
    let total = counts.total();
    if total == 0 {
        return Err(ConsensusError::EmptyVotes);
    }
    // integer form of modal/total >= 2/3
    Ok(3 * u64::from(counts.modal_count()) >= 2 * u64::from(total))
}

/// Expert opinions on the labeled clips, one per (clip, expert).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpertPanel {
    pub experts: Vec<String>,
    pub opinions: BTreeMap<String, BTreeMap<String, ClassLabel>>,
}

impl ExpertPanel {
    pub fn new(experts: Vec<String>) -> Self {
        ExpertPanel {
            experts,
            opinions: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, clip_id: &str, expert_id: &str, label: ClassLabel) {
        self.opinions
            .entry(clip_id.to_string())
            .or_default()
            .insert(expert_id.to_string(), label);
    }

    pub fn clip_ids(&self) -> impl Iterator<Item = &str> {
        self.opinions.keys().map(String::as_str)
    }

    /// Labels of one expert, keyed by clip.
    pub fn expert_labels(&self, expert_id: &str) -> BTreeMap<String, ClassLabel> {
        self.opinions
            .iter()
            .filter_map(|(clip, by_expert)| by_expert.get(expert_id).map(|l| (clip.clone(), *l)))
            .collect()
    }

    /// Per-clip tally over the whole panel.
    pub fn counts(&self, clip_id: &str) -> Option<VoteCounts> {
        self.opinions
            .get(clip_id)
            .map(|by_expert| by_expert.values().copied().collect())
    }

    fn check_complete(&self) -> Result<(), ConsensusError> {
        for (clip_id, by_expert) in &self.opinions {
            for expert in &self.experts {
                if !by_expert.contains_key(expert) {
                    return Err(ConsensusError::MissingExpertOpinion {
                        clip_id: clip_id.clone(),
                        expert_id: expert.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSource {
    FullPanel,
    LeaveOneOut { excluded_expert_id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceStandard {
    pub labels: BTreeMap<String, ClassLabel>,
    pub source: ReferenceSource,
    pub seed: u64,
}

impl ReferenceStandard {
    pub fn get(&self, clip_id: &str) -> Option<ClassLabel> {
        self.labels.get(clip_id).copied()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

fn reference_over<'a>(
    panel: &'a ExpertPanel,
    seed: u64,
    skip: Option<&'a str>,
) -> Result<BTreeMap<String, ClassLabel>, ConsensusError> {
    let mut labels = BTreeMap::new();
    for (clip_id, by_expert) in &panel.opinions {
        let counts: VoteCounts = panel
            .experts
            .iter()
            .filter(|e| Some(e.as_str()) != skip)
            .map(|e| by_expert[e])
            .collect();
        // Tie streams depend only on (seed, clip, excluded expert) so a clip's
        // label never depends on iteration order or on the excluded expert's votes.
        let mut tie = match skip {
            None => rng::stream(seed, &["reference", clip_id]),
            Some(expert) => rng::stream(seed, &["reference-loo", expert, clip_id]),
        };
        labels.insert(clip_id.clone(), majority_label(&counts, &mut tie)?);
    }
    Ok(labels)
}

pub fn build_reference_standard(
    panel: &ExpertPanel,
    seed: u64,
) -> Result<ReferenceStandard, ConsensusError> {
    panel.check_complete()?;
    Ok(ReferenceStandard {
        labels: reference_over(panel, seed, None)?,
        source: ReferenceSource::FullPanel,
        seed,
    })
}

/// One reference per expert, each built from the rest of the panel. Element
/// `i` corresponds to `panel.experts[i]`.
pub fn build_leave_one_out_references(
    panel: &ExpertPanel,
    seed: u64,
) -> Result<Vec<ReferenceStandard>, ConsensusError> {
    if panel.experts.len() < 2 {
        return Err(ConsensusError::PanelTooSmall(panel.experts.len()));
    }
    panel.check_complete()?;
    panel
        .experts
        .iter()
        .map(|expert| {
            Ok(ReferenceStandard {
                labels: reference_over(panel, seed, Some(expert))?,
                source: ReferenceSource::LeaveOneOut {
                    excluded_expert_id: expert.clone(),
                },
                seed,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConsensusPolicy {
    pub min_eligible_opinions: u32,
    pub min_agreement: f64,
    pub skill_threshold: f64,
    pub window: usize,
    /// Scored outcomes required before trailing accuracy is defined.
    pub min_scored: usize,
    pub one_opinion_per_user: bool,
}

impl Default for ConsensusPolicy {
    fn default() -> Self {
        ConsensusPolicy {
            min_eligible_opinions: 7,
            min_agreement: 0.6,
            skill_threshold: 0.8,
            window: 25,
            min_scored: 10,
            one_opinion_per_user: true,
        }
    }
}

impl ConsensusPolicy {
    pub fn validate(&self) -> Result<(), ConsensusError> {
        let bad = |m: &str| Err(ConsensusError::InvalidPolicy(m.to_string()));
        if self.min_eligible_opinions == 0 {
            return bad("min_eligible_opinions must be positive");
        }
        if !(self.min_agreement > 1.0 / 3.0 && self.min_agreement <= 1.0) {
            return bad("min_agreement must lie in (1/3, 1]");
        }
        if !(0.0..=1.0).contains(&self.skill_threshold) {
            return bad("skill_threshold must lie in [0, 1]");
        }
        if self.window == 0 {
            return bad("window must be positive");
        }
        if self.min_scored == 0 {
            return bad("min_scored must be positive");
        }
        Ok(())
    }
}

/// Vote tallies and current consensus of one clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusState {
    pub clip_id: String,
    pub excluded: bool,
    pub raw_counts: VoteCounts,
    pub eligible_counts: VoteCounts,
    pub consensus_label: Option<ClassLabel>,
    pub agreement: Option<f64>,
    /// Latest eligible label per user, used when one opinion per user counts.
    latest_eligible: BTreeMap<String, ClassLabel>,
}

impl ConsensusState {
    pub fn new(clip_id: impl Into<String>, excluded: bool) -> Self {
        ConsensusState {
            clip_id: clip_id.into(),
            excluded,
            raw_counts: VoteCounts::default(),
            eligible_counts: VoteCounts::default(),
            consensus_label: None,
            agreement: None,
            latest_eligible: BTreeMap::new(),
        }
    }

    /// Distinct users with at least one eligible opinion on the clip.
    pub fn eligible_users(&self) -> usize {
        self.latest_eligible.len()
    }

    /// Majority over eligible opinions ignoring the consensus thresholds.
    pub fn eligible_majority<R: Rng + ?Sized>(&self, tie_rng: &mut R) -> Option<ClassLabel> {
        majority_label(&self.eligible_counts, tie_rng).ok()
    }

    pub fn apply<R: Rng + ?Sized>(
        &mut self,
        opinion: &Opinion,
        policy: &ConsensusPolicy,
        tie_rng: &mut R,
    ) -> Result<(), ConsensusError> {
        if opinion.clip_id != self.clip_id {
            return Err(ConsensusError::ClipMismatch {
                expected: self.clip_id.clone(),
                got: opinion.clip_id.clone(),
            });
        }
        if self.excluded {
            return Err(ConsensusError::ClipExcluded(self.clip_id.clone()));
        }
        self.raw_counts.add_vote(opinion.label);
        if opinion.eligible {
            if policy.one_opinion_per_user {
                if let Some(previous) = self
                    .latest_eligible
                    .insert(opinion.user_id.clone(), opinion.label)
                {
                    self.eligible_counts.remove_vote(previous);
                }
            } else {
                self.latest_eligible
                    .entry(opinion.user_id.clone())
                    .or_insert(opinion.label);
            }
            self.eligible_counts.add_vote(opinion.label);
        }

        self.agreement = agreement_level(&self.eligible_counts).ok();
        self.consensus_label = match self.agreement {
            Some(agreement)
                if self.eligible_counts.total() >= policy.min_eligible_opinions
                    && agreement >= policy.min_agreement =>
            {
                Some(majority_label(&self.eligible_counts, tie_rng)?)
            }
            _ => None,
        };
        Ok(())
    }
}

pub fn update_consensus<R: Rng + ?Sized>(
    state: &ConsensusState,
    opinion: &Opinion,
    policy: &ConsensusPolicy,
    tie_rng: &mut R,
) -> Result<ConsensusState, ConsensusError> {
    let mut next = state.clone();
    next.apply(opinion, policy, tie_rng)?;
    Ok(next)
}

/// Writes consensus snapshots as CSV. Per-class columns count eligible opinions.
pub fn write_consensus_csv<'a, W: Write>(
    states: impl IntoIterator<Item = &'a ConsensusState>,
    out: W,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "clip_id",
        "n_raw",
        "n_eligible",
        "n_no",
        "n_discrete",
        "n_confluent",
        "agreement",
        "consensus_label",
    ])?;
    for s in states {
        let e = s.eligible_counts;
        w.write_record([
            s.clip_id.clone(),
            s.raw_counts.total().to_string(),
            e.total().to_string(),
            e[ClassLabel::NoBLines].to_string(),
            e[ClassLabel::DiscreteBLines].to_string(),
            e[ClassLabel::ConfluentBLines].to_string(),
            s.agreement.map(|a| format!("{a:.6}")).unwrap_or_default(),
            s.consensus_label
                .map(|l| l.as_str().to_string())
                .unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
