use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::stats::mean_sem;
use super::{check_keys, AnalysisError, CrowdClip, LabelMap};
use crate::model::ClassLabel;

/// Fraction of clips on which the two maps agree.
pub fn concordance(predicted: &LabelMap, reference: &LabelMap) -> Result<f64, AnalysisError> {
    check_keys(predicted, reference)?;
    let hits = predicted
        .iter()
        .filter(|(clip, label)| reference[*clip] == **label)
        .count();
    Ok(hits as f64 / predicted.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcordanceReport {
    pub overall: f64,
    /// Only classes present in the reference.
    pub per_class: BTreeMap<ClassLabel, f64>,
    pub balanced: f64,
    pub n_clips: usize,
    /// Standard error of `overall` when the report is a mean over labelers.
    pub sem: Option<f64>,
}

pub fn concordance_report(predicted: &LabelMap, reference: &LabelMap) -> Result<ConcordanceReport, AnalysisError> {
    let overall = concordance(predicted, reference)?;
    let mut hits = [0usize; 3];
    let mut support = [0usize; 3];
    for (clip, truth) in reference {
        support[truth.index()] += 1;
        if predicted[clip] == *truth {
            hits[truth.index()] += 1;
        }
    }
    let per_class: BTreeMap<ClassLabel, f64> = ClassLabel::ALL
        .iter()
        .filter(|c| support[c.index()] > 0)
        .map(|c| (*c, hits[c.index()] as f64 / support[c.index()] as f64))
        .collect();
    let balanced = per_class.values().sum::<f64>() / per_class.len() as f64;
    Ok(ConcordanceReport {
        overall,
        per_class,
        balanced,
        n_clips: reference.len(),
        sem: None,
    })
}

/// Averages labeler reports field by field; `sem` is the standard error of
/// the overall concordances.
pub fn mean_report(reports: &[ConcordanceReport]) -> Result<ConcordanceReport, AnalysisError> {
    let overall: Vec<f64> = reports.iter().map(|r| r.overall).collect();
    let (mean, sem) = mean_sem(&overall)?;
    let mut per_class = BTreeMap::new();
    for c in ClassLabel::ALL {
        let vals: Vec<f64> = reports.iter().filter_map(|r| r.per_class.get(&c).copied()).collect();
        if !vals.is_empty() {
            per_class.insert(c, vals.iter().sum::<f64>() / vals.len() as f64);
        }
    }
    let balanced: Vec<f64> = reports.iter().map(|r| r.balanced).collect();
    Ok(ConcordanceReport {
        overall: mean,
        per_class,
        balanced: mean_sem(&balanced)?.0,
        n_clips: reports[0].n_clips,
        sem,
    })
}

/// Rows are reference classes, columns predicted classes, in severity order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix(pub [[u32; 3]; 3]);

impl ConfusionMatrix {
    pub fn get(&self, reference: ClassLabel, predicted: ClassLabel) -> u32 {
        self.0[reference.index()][predicted.index()]
    }

    pub fn row_sum(&self, reference: ClassLabel) -> u32 {
        self.0[reference.index()].iter().sum()
    }

    pub fn off_diagonal(&self, reference: ClassLabel) -> u32 {
        self.row_sum(reference) - self.get(reference, reference)
    }

    pub fn total(&self) -> u32 {
        ClassLabel::ALL.iter().map(|c| self.row_sum(*c)).sum()
    }
}

pub fn confusion_matrix(predicted: &LabelMap, reference: &LabelMap) -> Result<ConfusionMatrix, AnalysisError> {
    check_keys(predicted, reference)?;
    let mut m = ConfusionMatrix::default();
    for (clip, truth) in reference {
        m.0[truth.index()][predicted[clip].index()] += 1;
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub concordance: Option<f64>,
    pub n_clips: usize,
}

/// Concordance of the crowd label restricted to clips whose crowd agreement
/// is at least `cut`.
pub fn agreement_stratified_concordance(
    crowd: &BTreeMap<String, CrowdClip>,
    reference: &LabelMap,
    cut: f64,
) -> Result<Stratum, AnalysisError> {
    let mut n = 0;
    let mut hits = 0;
    for (clip, summary) in crowd {
        let truth = reference.get(clip).ok_or(AnalysisError::KeyMismatch {
            only_left: 1,
            only_right: 0,
        })?;
        if summary.agreement >= cut {
            n += 1;
            if summary.label == *truth {
                hits += 1;
            }
        }
    }
    Ok(Stratum {
        concordance: (n > 0).then(|| hits as f64 / n as f64),
        n_clips: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VoteCounts;
    use ClassLabel::*;

    fn map(labels: &[ClassLabel]) -> LabelMap {
        labels.iter().enumerate().map(|(i, l)| (format!("c{i}"), *l)).collect()
    }

    #[test]
    fn concordance_examples() {
        let a = map(&[NoBLines, NoBLines, DiscreteBLines]);
        let b = map(&[NoBLines, DiscreteBLines, DiscreteBLines]);
        assert_eq!(concordance(&a, &a).unwrap(), 1.0);
        assert!((concordance(&a, &b).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(concordance(&a, &b).unwrap(), concordance(&b, &a).unwrap());
        let mut other = LabelMap::new();
        other.insert("x".into(), NoBLines);
        assert!(matches!(concordance(&a, &other), Err(AnalysisError::KeyMismatch { .. })));
    }

    #[test]
    fn report_balanced_is_mean_of_present_classes() {
        // 10 No (9 right), 5 Discrete (3 right), no Confluent
        let mut reference = Vec::new();
        let mut predicted = Vec::new();
        for i in 0..10 {
            reference.push(NoBLines);
            predicted.push(if i < 9 { NoBLines } else { ConfluentBLines });
        }
        for i in 0..5 {
            reference.push(DiscreteBLines);
            predicted.push(if i < 3 { DiscreteBLines } else { NoBLines });
        }
        let r = concordance_report(&map(&predicted), &map(&reference)).unwrap();
        assert_eq!(r.per_class.len(), 2);
        assert!((r.per_class[&NoBLines] - 0.9).abs() < 1e-15);
        assert!((r.per_class[&DiscreteBLines] - 0.6).abs() < 1e-15);
        assert!((r.balanced - 0.75).abs() < 1e-15);
        assert!((r.overall - 12.0 / 15.0).abs() < 1e-15);

        let perfect = concordance_report(&map(&reference), &map(&reference)).unwrap();
        assert!(perfect.per_class.values().all(|&v| v == 1.0));
        assert_eq!(perfect.balanced, 1.0);
    }

    #[test]
    fn balanced_equals_overall_on_uniform_classes() {
        let reference = map(&[NoBLines, NoBLines, DiscreteBLines, DiscreteBLines, ConfluentBLines, ConfluentBLines]);
        let predicted = map(&[NoBLines, DiscreteBLines, DiscreteBLines, NoBLines, ConfluentBLines, ConfluentBLines]);
        let r = concordance_report(&predicted, &reference).unwrap();
        assert!((r.balanced - r.overall).abs() < 1e-15);
    }

    #[test]
    fn confusion_rows_follow_reference() {
        let reference = map(&[NoBLines, DiscreteBLines, DiscreteBLines]);
        let predicted = map(&[NoBLines, NoBLines, DiscreteBLines]);
        let m = confusion_matrix(&predicted, &reference).unwrap();
        assert_eq!(m.get(DiscreteBLines, NoBLines), 1);
        assert_eq!(m.row_sum(DiscreteBLines), 2);
        assert_eq!(m.off_diagonal(NoBLines), 0);
        let single = confusion_matrix(&map(&[DiscreteBLines]), &map(&[NoBLines])).unwrap();
        assert_eq!(single.0, [[0, 1, 0], [0, 0, 0], [0, 0, 0]]);
        let diag = confusion_matrix(&reference, &reference).unwrap();
        assert_eq!(diag.0, [[1, 0, 0], [0, 2, 0], [0, 0, 0]]);
    }

    fn crowd_clip(label: ClassLabel, agreement: f64) -> CrowdClip {
        CrowdClip {
            votes: vec![label],
            counts: VoteCounts::default(),
            label,
            agreement,
        }
    }

    #[test]
    fn stratification() {
        let reference = map(&[NoBLines, DiscreteBLines, ConfluentBLines]);
        let crowd: BTreeMap<String, CrowdClip> = [
            ("c0".to_string(), crowd_clip(NoBLines, 1.0)),
            ("c1".to_string(), crowd_clip(NoBLines, 0.5)),
            ("c2".to_string(), crowd_clip(ConfluentBLines, 0.85)),
        ]
        .into_iter()
        .collect();
        let s = agreement_stratified_concordance(&crowd, &reference, 0.8).unwrap();
        assert_eq!(s, Stratum { concordance: Some(1.0), n_clips: 2 });
        let all = agreement_stratified_concordance(&crowd, &reference, 0.0).unwrap();
        let predicted: LabelMap = crowd.iter().map(|(k, v)| (k.clone(), v.label)).collect();
        assert_eq!(all.concordance, Some(concordance(&predicted, &reference).unwrap()));
        let none = agreement_stratified_concordance(&crowd, &reference, 1.01).unwrap();
        assert_eq!(none, Stratum { concordance: None, n_clips: 0 });
    }
}
