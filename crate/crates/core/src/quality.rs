//! Per-user trailing accuracy over a sliding window of scored opinions.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::consensus::{ConsensusPolicy, ConsensusState};
use crate::model::{ClassLabel, Clip, ClipRole};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserQuality {
    pub user_id: String,
    capacity: usize,
    min_scored: usize,
    window: VecDeque<bool>,
    correct_in_window: usize,
    scored_count: u64,
}

impl UserQuality {
    pub fn new(user_id: impl Into<String>, capacity: usize, min_scored: usize) -> Self {
        assert!(capacity > 0, "window capacity must be positive");
        UserQuality {
            user_id: user_id.into(),
            capacity,
            min_scored,
            window: VecDeque::with_capacity(capacity),
            correct_in_window: 0,
            scored_count: 0,
        }
    }

    pub fn for_policy(user_id: impl Into<String>, policy: &ConsensusPolicy) -> Self {
        Self::new(user_id, policy.window, policy.min_scored)
    }

    pub fn record_outcome(&mut self, correct: bool) {
        if self.window.len() == self.capacity {
            if let Some(true) = self.window.pop_front() {
                self.correct_in_window -= 1;
            }
        }
        self.window.push_back(correct);
        if correct {
            self.correct_in_window += 1;
        }
        self.scored_count += 1;
    }

    pub fn scored_count(&self) -> u64 {
        self.scored_count
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Fraction correct over the current window, defined as soon as it is non-empty.
    pub fn window_accuracy(&self) -> Option<f64> {
        (!self.window.is_empty())
            .then(|| self.correct_in_window as f64 / self.window.len() as f64)
    }

    /// Trailing accuracy used for gating: undefined until `min_scored` outcomes exist.
    pub fn trailing_accuracy(&self) -> Option<f64> {
        if (self.scored_count as usize) < self.min_scored {
            None
        } else {
            self.window_accuracy()
        }
    }
}

pub fn record_outcome(q: &UserQuality, correct: bool) -> UserQuality {
    let mut next = q.clone();
    next.record_outcome(correct);
    next
}

pub fn is_skilled(q: &UserQuality, threshold: f64) -> bool {
    q.trailing_accuracy().is_some_and(|a| a >= threshold)
}

/// Label an opinion on `clip` is scored against, if any. Test clips never
/// score, so the test set stays independent of skill estimation.
pub fn score_source_for(clip: &Clip, consensus: Option<&ConsensusState>) -> Option<ClassLabel> {
    match clip.role {
        ClipRole::Training => clip.reference_label,
        ClipRole::Unlabeled => consensus.and_then(|c| c.consensus_label),
        ClipRole::Test => None,
    }
}

/// CSV columns: user_id, scored_count, trailing_accuracy, skilled.
pub fn write_quality_csv<'a, W: Write>(
    users: impl IntoIterator<Item = &'a UserQuality>,
    threshold: f64,
    out: W,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["user_id", "scored_count", "trailing_accuracy", "skilled"])?;
    for q in users {
        w.write_record([
            q.user_id.clone(),
            q.scored_count.to_string(),
            q.trailing_accuracy()
                .map(|a| format!("{a:.6}"))
                .unwrap_or_default(),
            is_skilled(q, threshold).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
