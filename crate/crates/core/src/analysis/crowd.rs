use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::consensus::{agreement_level, majority_label, ExpertPanel};
use crate::contest::OpinionLogEntry;
use crate::model::{ClassLabel, VoteCounts};
use crate::rng;

/// Crowd view of one clip: eligible votes and their majority.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrowdClip {
    pub votes: Vec<ClassLabel>,
    pub counts: VoteCounts,
    pub label: ClassLabel,
    pub agreement: f64,
}

/// Eligible votes per clip, one per user (the user's latest eligible
/// opinion), in order of the kept opinions' ids. Clips outside `clips` are
/// skipped.
pub fn eligible_votes<'a>(
    entries: impl IntoIterator<Item = &'a OpinionLogEntry>,
    clips: &BTreeSet<String>,
) -> BTreeMap<String, Vec<ClassLabel>> {
    let mut latest: BTreeMap<&str, BTreeMap<&str, (u64, ClassLabel)>> = BTreeMap::new();
    for e in entries {
        if !e.eligible || !clips.contains(&e.clip_id) {
            continue;
        }
        latest
            .entry(e.clip_id.as_str())
            .or_default()
            .insert(e.user_id.as_str(), (e.opinion_id, e.label));
    }
    latest
        .into_iter()
        .map(|(clip, by_user)| {
            let mut kept: Vec<(u64, ClassLabel)> = by_user.into_values().collect();
            kept.sort_by_key(|(id, _)| *id);
            (clip.to_string(), kept.into_iter().map(|(_, l)| l).collect())
        })
        .collect()
}

/// Majority label and agreement per clip, without count or agreement gates.
pub fn crowd_labels(
    votes: &BTreeMap<String, Vec<ClassLabel>>,
    seed: u64,
) -> Result<BTreeMap<String, CrowdClip>, AnalysisError> {
    votes
        .iter()
        .map(|(clip, v)| {
            if v.is_empty() {
                return Err(AnalysisError::NoOpinions(clip.clone()));
            }
            let counts: VoteCounts = v.iter().copied().collect();
            let mut tie = rng::stream(seed, &["crowd-label", clip]);
            let label = majority_label(&counts, &mut tie)?;
            Ok((
                clip.clone(),
                CrowdClip {
                    votes: v.clone(),
                    counts,
                    label,
                    agreement: agreement_level(&counts)?,
                },
            ))
        })
        .collect()
}

/// Share of the panel holding the modal label, per clip.
pub fn expert_agreement(panel: &ExpertPanel) -> BTreeMap<String, f64> {
    panel
        .clip_ids()
        .filter_map(|clip| {
            let counts = panel.counts(clip)?;
            agreement_level(&counts).ok().map(|a| (clip.to_string(), a))
        })
        .collect()
}
