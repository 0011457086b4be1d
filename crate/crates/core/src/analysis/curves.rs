use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::stats::{mean_sem, roc_points, trapezoid};
use super::{check_keys, AnalysisError, LabelMap};
use crate::consensus::majority_label;
use crate::model::{ClassLabel, VoteCounts};
use crate::rng;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    #[default]
    WithoutReplacement,
    WithReplacement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: usize,
    pub accuracy: f64,
    pub sem: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpinionCountCurve {
    pub points: Vec<CurvePoint>,
    pub n_samples: usize,
    pub seed: u64,
    pub sampling: Sampling,
}

impl OpinionCountCurve {
    pub fn at(&self, k: usize) -> Option<&CurvePoint> {
        self.points.get(k.checked_sub(1)?)
    }
}

/// Concordance of the majority of k sampled opinions per clip, for k in
/// 1..=k_max. A clip with fewer than k opinions contributes all of them.
/// Each Monte Carlo sample s draws once per clip; the sample's concordance is
/// taken over clips, and `sem` is the standard error across samples.
pub fn accuracy_vs_opinion_count(
    votes: &BTreeMap<String, Vec<ClassLabel>>,
    reference: &LabelMap,
    k_max: usize,
    n_samples: usize,
    seed: u64,
    sampling: Sampling,
) -> Result<OpinionCountCurve, AnalysisError> {
    if k_max == 0 || n_samples == 0 {
        return Err(AnalysisError::InvalidArgument("k_max and n_samples must be positive".into()));
    }
    if reference.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let extra = votes.keys().filter(|k| !reference.contains_key(*k)).count();
    if extra > 0 {
        return Err(AnalysisError::KeyMismatch { only_left: extra, only_right: 0 });
    }
    let mut clips: Vec<(&str, &[ClassLabel], ClassLabel)> = Vec::with_capacity(reference.len());
    for (clip, truth) in reference {
        match votes.get(clip) {
            Some(v) if !v.is_empty() => clips.push((clip, v, *truth)),
            _ => return Err(AnalysisError::NoOpinions(clip.clone())),
        }
    }

    let mut points = Vec::with_capacity(k_max);
    let mut scratch: Vec<ClassLabel> = Vec::new();
    for k in 1..=k_max {
        let mut hits = vec![0u32; n_samples];
        let k_text = k.to_string();
        for &(clip, v, truth) in &clips {
            let mut stream = rng::stream(seed, &["opinion-count", clip, &k_text]);
            let m = k.min(v.len());
            scratch.clear();
            scratch.extend_from_slice(v);
            for hit in hits.iter_mut() {
                let counts: VoteCounts = match sampling {
                    Sampling::WithoutReplacement if m == v.len() => v.iter().copied().collect(),
                    Sampling::WithoutReplacement => {
                        for i in 0..m {
                            let j = stream.gen_range(i..scratch.len());
                            scratch.swap(i, j);
                        }
                        scratch[..m].iter().copied().collect()
                    }
                    Sampling::WithReplacement => (0..m).map(|_| v[stream.gen_range(0..v.len())]).collect(),
                };
                if majority_label(&counts, &mut stream)? == truth {
                    *hit += 1;
                }
            }
        }
        let per_sample: Vec<f64> = hits.iter().map(|&h| h as f64 / clips.len() as f64).collect();
        let (accuracy, sem) = mean_sem(&per_sample)?;
        points.push(CurvePoint {
            k,
            accuracy,
            sem: sem.unwrap_or(0.0),
        });
    }
    Ok(OpinionCountCurve {
        points,
        n_samples,
        seed,
        sampling,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub class: ClassLabel,
    /// (false positive rate, true positive rate), thresholds descending.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// ROC of the crowd vote share for `class` as a predictor of the reference
/// label being `class`.
pub fn roc_per_class(
    vote_fractions: &BTreeMap<String, f64>,
    reference: &LabelMap,
    class: ClassLabel,
) -> Result<RocCurve, AnalysisError> {
    check_keys(vote_fractions, reference)?;
    if let Some((clip, f)) = vote_fractions.iter().find(|(_, f)| !(0.0..=1.0).contains(*f)) {
        return Err(AnalysisError::InvalidArgument(format!("fraction {f} for clip {clip}")));
    }
    let scores: Vec<f64> = vote_fractions.values().copied().collect();
    let labels: Vec<bool> = reference.values().map(|l| *l == class).collect();
    let points = roc_points(&scores, &labels)?;
    Ok(RocCurve {
        class,
        auc: trapezoid(&points),
        points,
    })
}
