use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::stats::mean_sem;
use super::LabelMap;
use crate::contest::OpinionLogEntry;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningPoint {
    /// 1-based count of test-set opinions given so far.
    pub index: usize,
    pub mean: f64,
    pub sem: Option<f64>,
    pub n_users: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub cohort: String,
    pub n_users: usize,
    pub points: Vec<LearningPoint>,
}

impl LearningCurve {
    pub fn at(&self, index: usize) -> Option<&LearningPoint> {
        self.points.get(index.checked_sub(1)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurves {
    pub window: usize,
    pub all_crowd: LearningCurve,
    pub skilled_crowd: LearningCurve,
    pub experts: LearningCurve,
}

/// Per user, whether each opinion on a reference clip matched the reference,
/// in log order. Repeat opinions on a clip all count.
pub fn match_sequences<'a>(
    entries: impl IntoIterator<Item = &'a OpinionLogEntry>,
    reference: &LabelMap,
) -> BTreeMap<String, Vec<bool>> {
    let mut out: BTreeMap<String, Vec<bool>> = BTreeMap::new();
    for e in entries {
        if let Some(truth) = reference.get(&e.clip_id) {
            out.entry(e.user_id.clone()).or_default().push(*truth == e.label);
        }
    }
    out
}

/// Average trailing concordance per opinion index. At index j a user's value
/// is the match share over their last min(j, window) opinions; users with
/// fewer than j opinions drop out of the average.
pub fn cohort_curve<'a>(
    cohort: &str,
    sequences: impl IntoIterator<Item = &'a Vec<bool>>,
    window: usize,
) -> LearningCurve {
    let window = window.max(1);
    let prefix: Vec<Vec<u32>> = sequences
        .into_iter()
        .filter(|s| !s.is_empty())
        .map(|s| {
            let mut acc = vec![0u32; s.len() + 1];
            for (i, &m) in s.iter().enumerate() {
                acc[i + 1] = acc[i] + u32::from(m);
            }
            acc
        })
        .collect();
    let longest = prefix.iter().map(|p| p.len() - 1).max().unwrap_or(0);
    let mut points = Vec::with_capacity(longest);
    for j in 1..=longest {
        let span = j.min(window);
        let values: Vec<f64> = prefix
            .iter()
            .filter(|p| p.len() > j)
            .map(|p| f64::from(p[j] - p[j - span]) / span as f64)
            .collect();
        let (mean, sem) = mean_sem(&values).expect("at least the longest user");
        points.push(LearningPoint {
            index: j,
            mean,
            sem,
            n_users: values.len(),
        });
    }
    LearningCurve {
        cohort: cohort.to_string(),
        n_users: prefix.len(),
        points,
    }
}

/// Curves for all crowd users, for crowd users who were ever skilled at a
/// test-set submission, and for the experts' own labeling sequences.
pub fn learning_curves(
    entries: &[OpinionLogEntry],
    reference: &LabelMap,
    expert_sequences: &BTreeMap<String, Vec<bool>>,
    window: usize,
    skilled_threshold: f64,
) -> LearningCurves {
    let crowd = match_sequences(entries, reference);
    let mut skilled: BTreeMap<&str, bool> = BTreeMap::new();
    for e in entries.iter().filter(|e| reference.contains_key(&e.clip_id)) {
        let now = e
            .trailing_accuracy_at_submission
            .is_some_and(|t| t >= skilled_threshold);
        *skilled.entry(e.user_id.as_str()).or_default() |= now;
    }
    LearningCurves {
        window,
        all_crowd: cohort_curve("all_crowd", crowd.values(), window),
        skilled_crowd: cohort_curve(
            "skilled_crowd",
            crowd.iter().filter(|(u, _)| skilled.get(u.as_str()) == Some(&true)).map(|(_, s)| s),
            window,
        ),
        experts: cohort_curve("experts", expert_sequences.values(), window),
    }
}
