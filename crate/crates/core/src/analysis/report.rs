use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::concordance::{concordance_report, confusion_matrix, mean_report};
use super::crowd::{crowd_labels, eligible_votes, expert_agreement};
use super::curves::{accuracy_vs_opinion_count, roc_per_class, OpinionCountCurve, RocCurve, Sampling};
use super::learning::{learning_curves, LearningCurves};
use super::stats::{mann_whitney_u, mean_sem, paired_t_test, pearson_r, Correlation, MannWhitney, TTest};
use super::{
    agreement_stratified_concordance, AnalysisError, ConcordanceReport, ConfusionMatrix, LabelMap, Stratum,
};
use crate::consensus::{supermajority_reached, ExpertPanel, ReferenceStandard};
use crate::contest::OpinionLogEntry;
use crate::model::ClassLabel;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub n_samples: usize,
    /// Defaults to the smallest eligible-opinion count on any test clip, so
    /// every point subsamples every clip.
    pub k_max: Option<usize>,
    pub sampling: Sampling,
    pub window: usize,
    pub skilled_threshold: f64,
    pub agreement_cut: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            n_samples: 1000,
            k_max: None,
            sampling: Sampling::WithoutReplacement,
            window: 25,
            skilled_threshold: 0.8,
            agreement_cut: 0.8,
        }
    }
}

pub struct AnalysisInputs<'a> {
    pub entries: &'a [OpinionLogEntry],
    pub test_clips: &'a BTreeSet<String>,
    pub panel: &'a ExpertPanel,
    pub reference: &'a ReferenceStandard,
    /// Aligned with `panel.experts`.
    pub leave_one_out: &'a [ReferenceStandard],
    pub config: AnalysisConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertSummary {
    pub expert_id: String,
    pub vs_full: ConcordanceReport,
    pub vs_leave_one_out: ConcordanceReport,
    /// Crowd against this expert's leave-one-out reference.
    pub crowd_vs_leave_one_out: ConcordanceReport,
    pub confusion: ConfusionMatrix,
}

/// One expert's one-vs-rest sensitivity and false positive rate for a class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub expert_id: String,
    pub class: ClassLabel,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptives {
    pub n_opinions: usize,
    pub n_users: usize,
    pub n_eligible_users: usize,
    pub n_test_clips: usize,
    /// Test clips without any eligible opinion, left out of crowd statistics.
    pub test_clips_without_crowd_label: usize,
    pub mean_eligible_per_test_clip: f64,
    pub sd_eligible_per_test_clip: f64,
    pub crowd_unanimous_share: f64,
    pub crowd_supermajority_share: f64,
    pub expert_unanimous_share: f64,
    pub expert_supermajority_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub seed: u64,
    pub config: AnalysisConfig,
    pub descriptives: Descriptives,
    pub crowd_vs_full: ConcordanceReport,
    /// Mean over the leave-one-out references.
    pub crowd_vs_leave_one_out: ConcordanceReport,
    pub experts: Vec<ExpertSummary>,
    pub expert_mean_vs_full: ConcordanceReport,
    pub expert_mean_vs_leave_one_out: ConcordanceReport,
    /// d_i = crowd − expert_i over the same reference.
    pub t_test_vs_full: Option<TTest>,
    pub t_test_vs_leave_one_out: Option<TTest>,
    pub crowd_confusion: ConfusionMatrix,
    pub roc: Vec<RocCurve>,
    pub expert_operating_points: Vec<OperatingPoint>,
    pub opinion_curve: OpinionCountCurve,
    pub learning: LearningCurves,
    pub agreement_correlation: Option<Correlation>,
    /// Expert agreement on clips where the crowd matched the reference vs where it did not.
    pub expert_agreement_by_crowd_match: Option<MannWhitney>,
    pub mean_expert_agreement_crowd_match: Option<f64>,
    pub mean_expert_agreement_crowd_miss: Option<f64>,
    pub stratified: Stratum,
}

impl AnalysisReport {
    pub fn auc(&self, class: ClassLabel) -> Option<f64> {
        self.roc.iter().find(|r| r.class == class).map(|r| r.auc)
    }
}

fn restrict(labels: &BTreeMap<String, ClassLabel>, keys: &BTreeSet<String>) -> LabelMap {
    labels
        .iter()
        .filter(|(k, _)| keys.contains(*k))
        .map(|(k, v)| (k.clone(), *v))
        .collect()
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

pub fn analyze(inputs: &AnalysisInputs) -> Result<AnalysisReport, AnalysisError> {
    let AnalysisInputs {
        entries,
        test_clips,
        panel,
        reference,
        leave_one_out,
        config,
        seed,
    } = *inputs;
    if leave_one_out.len() != panel.experts.len() {
        return Err(AnalysisError::LengthMismatch(leave_one_out.len(), panel.experts.len()));
    }
    let full = restrict(&reference.labels, test_clips);
    if full.len() != test_clips.len() {
        return Err(AnalysisError::KeyMismatch {
            only_left: 0,
            only_right: test_clips.len() - full.len(),
        });
    }

    let votes = eligible_votes(entries, test_clips);
    let crowd = crowd_labels(&votes, seed)?;
    let crowd_clips: BTreeSet<String> = crowd.keys().cloned().collect();
    let crowd_pred: LabelMap = crowd.iter().map(|(k, v)| (k.clone(), v.label)).collect();
    let full_on_crowd = restrict(&full, &crowd_clips);
    let crowd_vs_full = concordance_report(&crowd_pred, &full_on_crowd)?;

    let mut experts = Vec::with_capacity(panel.experts.len());
    for (expert, loo) in panel.experts.iter().zip(leave_one_out) {
        let own = restrict(&panel.expert_labels(expert), test_clips);
        let loo_test = restrict(&loo.labels, test_clips);
        experts.push(ExpertSummary {
            expert_id: expert.clone(),
            vs_full: concordance_report(&own, &full)?,
            vs_leave_one_out: concordance_report(&own, &loo_test)?,
            crowd_vs_leave_one_out: concordance_report(&crowd_pred, &restrict(&loo_test, &crowd_clips))?,
            confusion: confusion_matrix(&own, &full)?,
        });
    }
    let collect = |f: fn(&ExpertSummary) -> &ConcordanceReport| -> Vec<ConcordanceReport> {
        experts.iter().map(|e| f(e).clone()).collect()
    };
    let expert_mean_vs_full = mean_report(&collect(|e| &e.vs_full))?;
    let expert_mean_vs_leave_one_out = mean_report(&collect(|e| &e.vs_leave_one_out))?;
    let crowd_vs_leave_one_out = mean_report(&collect(|e| &e.crowd_vs_leave_one_out))?;
    let d_full: Vec<f64> = experts.iter().map(|e| crowd_vs_full.overall - e.vs_full.overall).collect();
    let d_loo: Vec<f64> = experts
        .iter()
        .map(|e| e.crowd_vs_leave_one_out.overall - e.vs_leave_one_out.overall)
        .collect();

    let mut roc = Vec::new();
    let mut expert_operating_points = Vec::new();
    for class in ClassLabel::ALL {
        let fractions: BTreeMap<String, f64> = crowd
            .iter()
            .map(|(k, v)| (k.clone(), v.counts.fraction(class).unwrap_or(0.0)))
            .collect();
        match roc_per_class(&fractions, &full_on_crowd, class) {
            Ok(curve) => roc.push(curve),
            Err(AnalysisError::SingleClass) => {}
            Err(e) => return Err(e),
        }
        let positives = full.values().filter(|l| **l == class).count();
        let negatives = full.len() - positives;
        if positives == 0 || negatives == 0 {
            continue;
        }
        for expert in &panel.experts {
            let own = panel.expert_labels(expert);
            let (mut tp, mut fp) = (0, 0);
            for (clip, truth) in &full {
                if own[clip] == class {
                    if *truth == class {
                        tp += 1;
                    } else {
                        fp += 1;
                    }
                }
            }
            expert_operating_points.push(OperatingPoint {
                expert_id: expert.clone(),
                class,
                fpr: fp as f64 / negatives as f64,
                tpr: tp as f64 / positives as f64,
            });
        }
    }

    let k_max = config
        .k_max
        .unwrap_or_else(|| votes.values().map(Vec::len).min().unwrap_or(1).max(1));
    let opinion_curve =
        accuracy_vs_opinion_count(&votes, &full_on_crowd, k_max, config.n_samples, seed, config.sampling)?;

    let mut expert_sequences = BTreeMap::new();
    for expert in &panel.experts {
        let own = restrict(&panel.expert_labels(expert), test_clips);
        let mut order: Vec<(&String, &ClassLabel)> = own.iter().collect();
        order.shuffle(&mut rng::stream(seed, &["expert-order", expert]));
        let seq: Vec<bool> = order.into_iter().map(|(clip, l)| full[clip] == *l).collect();
        expert_sequences.insert(expert.clone(), seq);
    }
    let test_entries: Vec<OpinionLogEntry> = entries
        .iter()
        .filter(|e| test_clips.contains(&e.clip_id))
        .cloned()
        .collect();
    let learning = learning_curves(
        &test_entries,
        &full,
        &expert_sequences,
        config.window,
        config.skilled_threshold,
    );

    let expert_agree = expert_agreement(panel);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let (mut matched, mut missed) = (Vec::new(), Vec::new());
    for (clip, summary) in &crowd {
        let Some(&ea) = expert_agree.get(clip) else { continue };
        xs.push(summary.agreement);
        ys.push(ea);
        if summary.label == full[clip] {
            matched.push(ea);
        } else {
            missed.push(ea);
        }
    }

    let eligible_counts: Vec<f64> = test_clips
        .iter()
        .map(|c| votes.get(c).map_or(0, Vec::len) as f64)
        .collect();
    let (mean_eligible, sem_eligible) = mean_sem(&eligible_counts)?;
    let share = |hits: usize, n: usize| if n == 0 { 0.0 } else { hits as f64 / n as f64 };
    let expert_counts: Vec<_> = test_clips.iter().filter_map(|c| panel.counts(c)).collect();
    let users: BTreeSet<&str> = entries.iter().map(|e| e.user_id.as_str()).collect();
    let eligible_users: BTreeSet<&str> = entries.iter().filter(|e| e.eligible).map(|e| e.user_id.as_str()).collect();
    let descriptives = Descriptives {
        n_opinions: entries.len(),
        n_users: users.len(),
        n_eligible_users: eligible_users.len(),
        n_test_clips: test_clips.len(),
        test_clips_without_crowd_label: test_clips.len() - crowd.len(),
        mean_eligible_per_test_clip: mean_eligible,
        sd_eligible_per_test_clip: sem_eligible.map_or(0.0, |s| s * (eligible_counts.len() as f64).sqrt()),
        crowd_unanimous_share: share(crowd.values().filter(|c| c.agreement == 1.0).count(), crowd.len()),
        crowd_supermajority_share: share(
            crowd.values().filter(|c| supermajority_reached(&c.counts).unwrap_or(false)).count(),
            crowd.len(),
        ),
        expert_unanimous_share: share(
            expert_counts.iter().filter(|c| c.modal_count() == c.total()).count(),
            expert_counts.len(),
        ),
        expert_supermajority_share: share(
            expert_counts.iter().filter(|c| supermajority_reached(c).unwrap_or(false)).count(),
            expert_counts.len(),
        ),
    };

    Ok(AnalysisReport {
        seed,
        config,
        descriptives,
        crowd_confusion: confusion_matrix(&crowd_pred, &full_on_crowd)?,
        stratified: agreement_stratified_concordance(&crowd, &full, config.agreement_cut)?,
        crowd_vs_full,
        crowd_vs_leave_one_out,
        experts,
        expert_mean_vs_full,
        expert_mean_vs_leave_one_out,
        t_test_vs_full: paired_t_test(&d_full).ok(),
        t_test_vs_leave_one_out: paired_t_test(&d_loo).ok(),
        roc,
        expert_operating_points,
        opinion_curve,
        learning,
        agreement_correlation: pearson_r(&xs, &ys).ok(),
        expert_agreement_by_crowd_match: mann_whitney_u(&matched, &missed).ok(),
        mean_expert_agreement_crowd_match: mean(&matched),
        mean_expert_agreement_crowd_miss: mean(&missed),
    })
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

fn concordance_row(labeler: &str, reference: &str, r: &ConcordanceReport) -> Vec<String> {
    let mut row = vec![labeler.to_string(), reference.to_string(), fmt(r.overall)];
    for c in ClassLabel::ALL {
        row.push(opt(r.per_class.get(&c).copied()));
    }
    row.extend([fmt(r.balanced), r.n_clips.to_string(), opt(r.sem)]);
    row
}

/// Writes the figure tables and `summary.json` into `dir`, returning the
/// file names written.
pub fn write_figure_files(report: &AnalysisReport, dir: &Path) -> Result<Vec<String>, AnalysisError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut open = |name: &str| -> Result<csv::Writer<File>, AnalysisError> {
        written.push(name.to_string());
        Ok(csv::Writer::from_path(dir.join(name))?)
    };

    let mut w = open("fig3_concordance.csv")?;
    w.write_record([
        "labeler", "reference", "overall", "no", "discrete", "confluent", "balanced", "n_clips", "sem",
    ])?;
    w.write_record(concordance_row("crowd", "full", &report.crowd_vs_full))?;
    w.write_record(concordance_row("crowd", "leave_one_out", &report.crowd_vs_leave_one_out))?;
    w.write_record(concordance_row("expert_mean", "full", &report.expert_mean_vs_full))?;
    w.write_record(concordance_row("expert_mean", "leave_one_out", &report.expert_mean_vs_leave_one_out))?;
    for e in &report.experts {
        w.write_record(concordance_row(&e.expert_id, "full", &e.vs_full))?;
        w.write_record(concordance_row(&e.expert_id, "leave_one_out", &e.vs_leave_one_out))?;
    }
    w.flush()?;

    let mut w = open("fig4_curve.csv")?;
    w.write_record(["k", "accuracy", "sem"])?;
    for p in &report.opinion_curve.points {
        w.write_record([p.k.to_string(), fmt(p.accuracy), fmt(p.sem)])?;
    }
    w.flush()?;

    for curve in &report.roc {
        let mut w = open(&format!("fig5_roc_{}.csv", curve.class.as_str()))?;
        w.write_record(["fpr", "tpr"])?;
        for (fpr, tpr) in &curve.points {
            w.write_record([fmt(*fpr), fmt(*tpr)])?;
        }
        w.flush()?;
    }

    let mut w = open("fig6_confusion.csv")?;
    w.write_record(["labeler", "reference_class", "predicted_no", "predicted_discrete", "predicted_confluent"])?;
    let mut matrix_rows = |who: &str, m: &ConfusionMatrix| -> csv::Result<()> {
        for c in ClassLabel::ALL {
            let row = &m.0[c.index()];
            w.write_record([
                who.to_string(),
                c.as_str().to_string(),
                row[0].to_string(),
                row[1].to_string(),
                row[2].to_string(),
            ])?;
        }
        Ok(())
    };
    matrix_rows("crowd", &report.crowd_confusion)?;
    for e in &report.experts {
        matrix_rows(&e.expert_id, &e.confusion)?;
    }
    w.flush()?;

    let mut w = open("fig7_learning.csv")?;
    w.write_record(["cohort", "index", "mean", "sem", "n_users"])?;
    for curve in [&report.learning.all_crowd, &report.learning.skilled_crowd, &report.learning.experts] {
        for p in &curve.points {
            w.write_record([
                curve.cohort.clone(),
                p.index.to_string(),
                fmt(p.mean),
                opt(p.sem),
                p.n_users.to_string(),
            ])?;
        }
    }
    w.flush()?;

    let summary = BufWriter::new(File::create(dir.join("summary.json"))?);
    serde_json::to_writer_pretty(summary, report).map_err(std::io::Error::from)?;
    written.push("summary.json".into());
    Ok(written)
}
