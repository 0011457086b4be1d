use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::model::ClassLabel;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipProfile {
    pub true_label: ClassLabel,
    /// Multiplicative damping of every labeler's accuracy on this clip.
    pub difficulty: f64,
}

impl ClipProfile {
    pub fn new(true_label: ClassLabel, difficulty: f64) -> Result<Self, SimError> {
        if !(0.0..1.0).contains(&difficulty) {
            return Err(SimError::BadDifficulty(difficulty));
        }
        Ok(ClipProfile { true_label, difficulty })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelerProfile {
    pub base_accuracy: f64,
    pub max_accuracy: f64,
    /// Feedback events per e-fold of remaining improvement.
    pub learning_time_constant: f64,
    /// Share of errors going to the severity-adjacent class.
    pub adjacency_error_bias: f64,
}

impl LabelerProfile {
    pub fn new(base: f64, max: f64, tau: f64, beta: f64) -> Result<Self, SimError> {
        let p = LabelerProfile {
            base_accuracy: base,
            max_accuracy: max,
            learning_time_constant: tau,
            adjacency_error_bias: beta,
        };
        p.validate()?;
        Ok(p)
    }

    /// Fixed-accuracy labeler.
    pub fn constant(accuracy: f64, beta: f64) -> Result<Self, SimError> {
        Self::new(accuracy, accuracy, 1.0, beta)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let ok = self.base_accuracy > 1.0 / 3.0
            && self.base_accuracy <= self.max_accuracy
            && self.max_accuracy <= 1.0
            && self.learning_time_constant > 0.0
            && (0.0..=1.0).contains(&self.adjacency_error_bias);
        if ok {
            Ok(())
        } else {
            Err(SimError::BadProfile(format!("{self:?}")))
        }
    }

    /// Accuracy before clip difficulty after `n_feedback` feedback events.
    pub fn skill(&self, n_feedback: u64) -> f64 {
        let progress = 1.0 - (-(n_feedback as f64) / self.learning_time_constant).exp();
        self.base_accuracy + (self.max_accuracy - self.base_accuracy) * progress
    }

    pub fn accuracy_on(&self, clip: &ClipProfile, n_feedback: u64) -> f64 {
        (self.skill(n_feedback) * (1.0 - clip.difficulty)).clamp(1.0 / 3.0, 1.0)
    }

    /// Probability of each answer, indexed in severity order.
    ///
    /// Errors on an end class (no or confluent B-lines) go to the middle class
    /// with probability β and to the opposite end otherwise. For the middle
    /// class both wrong answers are adjacent: β/2 goes to each side and the
    /// remaining 1 − β is also split evenly, so its errors are 50/50.
    pub fn answer_distribution(&self, clip: &ClipProfile, n_feedback: u64) -> [f64; 3] {
        let p = self.accuracy_on(clip, n_feedback);
        let err = 1.0 - p;
        let beta = self.adjacency_error_bias;
        let mut dist = [0.0; 3];
        match clip.true_label {
            ClassLabel::NoBLines => dist = [p, err * beta, err * (1.0 - beta)],
            ClassLabel::ConfluentBLines => dist = [err * (1.0 - beta), err * beta, p],
            ClassLabel::DiscreteBLines => {
                dist[0] = err / 2.0;
                dist[1] = p;
                dist[2] = err / 2.0;
            }
        }
        dist
    }
}

pub fn answer<R: Rng + ?Sized>(
    profile: &LabelerProfile,
    clip: &ClipProfile,
    n_feedback: u64,
    rng: &mut R,
) -> ClassLabel {
    let dist = profile.answer_distribution(clip, n_feedback);
    let u: f64 = rng.gen();
    if u < dist[0] {
        ClassLabel::NoBLines
    } else if u < dist[0] + dist[1] {
        ClassLabel::DiscreteBLines
    } else {
        ClassLabel::ConfluentBLines
    }
}

/// Non-learning experts at evenly spaced accuracies over `range`, in an
/// order shuffled by `seed`.
pub fn sample_expert_panel(
    n: usize,
    range: (f64, f64),
    adjacency_error_bias: f64,
    seed: u64,
) -> Result<Vec<LabelerProfile>, SimError> {
    if n == 0 {
        return Err(SimError::BadProfile("empty expert panel".into()));
    }
    let (lo, hi) = range;
    let mut panel = (0..n)
        .map(|i| {
            let a = if n == 1 { (lo + hi) / 2.0 } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
            LabelerProfile::constant(a, adjacency_error_bias)
        })
        .collect::<Result<Vec<_>, _>>()?;
    panel.shuffle(&mut rng::stream(seed, &["expert-panel"]));
    Ok(panel)
}
