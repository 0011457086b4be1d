use std::collections::{BTreeMap, BTreeSet, HashSet};

use chrono::{TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{generate_dataset, DatasetSpec, DifficultyDistribution, DifficultyDraw, SyntheticClip};
use super::labeler::{answer, sample_expert_panel, ClipProfile, LabelerProfile};
use super::SimError;
use crate::analysis::{analyze, AnalysisConfig, AnalysisInputs, AnalysisReport};
use crate::consensus::{
    build_leave_one_out_references, build_reference_standard, ConsensusPolicy, ExpertPanel, ReferenceStandard,
};
use crate::contest::{
    ContestSpec, FeedbackDisposition, LedgerEntry, MemoryLog, OpinionLogEntry, Platform, PlatformConfig,
    PlatformSetup,
};
use crate::model::ClipRole;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetConfig {
    pub n_clips: usize,
    pub class_mix: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub training: SetConfig,
    pub test: SetConfig,
    pub unlabeled: SetConfig,
    pub difficulty: DifficultyDistribution,
    pub clips_per_patient: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            training: SetConfig {
                n_clips: 195,
                class_mix: [0.58, 0.29, 0.13],
            },
            test: SetConfig {
                n_clips: 198,
                class_mix: [0.70, 0.18, 0.12],
            },
            unlabeled: SetConfig {
                n_clips: 400,
                class_mix: [0.64, 0.24, 0.12],
            },
            difficulty: DifficultyDistribution([
                DifficultyDraw {
                    base_max: 0.05,
                    ambiguous_share: 0.25,
                    ambiguous_range: (0.45, 0.65),
                },
                DifficultyDraw {
                    base_max: 0.1,
                    ambiguous_share: 0.3,
                    ambiguous_range: (0.4, 0.6),
                },
                DifficultyDraw {
                    base_max: 0.05,
                    ambiguous_share: 0.08,
                    ambiguous_range: (0.4, 0.6),
                },
            ]),
            clips_per_patient: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PanelConfig {
    pub n_experts: usize,
    pub accuracy_range: (f64, f64),
    pub adjacency_error_bias: f64,
}

impl Default for PanelConfig {
    fn default() -> Self {
        PanelConfig {
            n_experts: 6,
            accuracy_range: (0.77, 0.91),
            adjacency_error_bias: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrowdConfig {
    pub n_users: usize,
    /// Interval of the uniform draw for each user's starting accuracy.
    pub base_accuracy_range: (f64, f64),
    pub uplift: f64,
    pub max_accuracy_cap: f64,
    pub learning_time_constant: f64,
    pub adjacency_error_bias: f64,
    /// Mean of the geometric per-user opinion budget.
    pub mean_opinions_per_user: f64,
}

impl Default for CrowdConfig {
    fn default() -> Self {
        CrowdConfig {
            n_users: 426,
            base_accuracy_range: (0.75, 0.92),
            uplift: 0.15,
            max_accuracy_cap: 0.99,
            learning_time_constant: 30.0,
            adjacency_error_bias: 0.5,
            mean_opinions_per_user: 233.0,
        }
    }
}

/// Defaults form the paper-profile configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub panel: PanelConfig,
    pub crowd: CrowdConfig,
    pub policy: ConsensusPolicy,
    pub platform: PlatformConfig,
    pub prize_pool_cents: u64,
    /// Collection stops once test clips average this many distinct eligible users.
    pub target_eligible_per_test_clip: f64,
    pub analysis: AnalysisConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetConfig::default(),
            panel: PanelConfig::default(),
            crowd: CrowdConfig::default(),
            policy: ConsensusPolicy::default(),
            platform: PlatformConfig::default(),
            prize_pool_cents: 110_000,
            target_eligible_per_test_clip: 40.0,
            analysis: AnalysisConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn paper_profile() -> Self {
        Self::default()
    }

    /// A scaled-down run for quick checks.
    pub fn small() -> Self {
        let mut c = Self::default();
        c.dataset.training.n_clips = 60;
        c.dataset.test.n_clips = 60;
        c.dataset.unlabeled.n_clips = 60;
        c.crowd.n_users = 80;
        c.crowd.mean_opinions_per_user = 150.0;
        c.target_eligible_per_test_clip = 15.0;
        c.analysis.n_samples = 100;
        c
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.policy.validate()?;
        let c = &self.crowd;
        if c.n_users == 0 || c.mean_opinions_per_user < 1.0 {
            return Err(SimError::BadConfig("crowd needs users with at least one opinion".into()));
        }
        if !(c.base_accuracy_range.0 > 1.0 / 3.0 && c.base_accuracy_range.0 <= c.base_accuracy_range.1) {
            return Err(SimError::BadConfig(format!("base_accuracy_range {:?}", c.base_accuracy_range)));
        }
        if self.dataset.test.n_clips == 0 {
            return Err(SimError::BadConfig("test set is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrowdMember {
    pub user_id: String,
    pub profile: LabelerProfile,
    pub budget: u64,
    pub submitted: u64,
    pub feedback_events: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub seed: u64,
    pub config: ExperimentConfig,
    pub contest_id: String,
    pub setup: PlatformSetup,
    pub log: Vec<OpinionLogEntry>,
    pub clip_profiles: BTreeMap<String, ClipProfile>,
    pub expert_profiles: BTreeMap<String, LabelerProfile>,
    pub panel: ExpertPanel,
    pub reference: ReferenceStandard,
    pub leave_one_out: Vec<ReferenceStandard>,
    pub crowd: Vec<CrowdMember>,
    pub ledger: Vec<LedgerEntry>,
    pub report: AnalysisReport,
}

impl ExperimentOutput {
    pub fn test_clips(&self) -> BTreeSet<String> {
        self.setup
            .clips
            .iter()
            .filter(|c| c.role == ClipRole::Test)
            .map(|c| c.clip_id.clone())
            .collect()
    }

    /// Expected concordance with the full reference on test clips of a fully
    /// trained user, averaged over crowd users with at least
    /// `min_test_opinions` test-set opinions in the log.
    pub fn crowd_asymptote(&self, min_test_opinions: usize) -> Option<f64> {
        let test = self.test_clips();
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for e in self.log.iter().filter(|e| test.contains(&e.clip_id)) {
            *counts.entry(e.user_id.as_str()).or_default() += 1;
        }
        let values: Vec<f64> = self
            .crowd
            .iter()
            .filter(|m| counts.get(m.user_id.as_str()).copied().unwrap_or(0) >= min_test_opinions)
            .map(|m| {
                test.iter()
                    .map(|clip| {
                        let reference = self.reference.labels[clip];
                        m.profile.answer_distribution(&self.clip_profiles[clip], u64::MAX)[reference.index()]
                    })
                    .sum::<f64>()
                    / test.len() as f64
            })
            .collect();
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    }
}

struct SimUser {
    member: CrowdMember,
    rng: ChaCha8Rng,
    trailing: Option<f64>,
}

fn geometric<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 1.0 {
        return 1;
    }
    let q = 1.0 / mean;
    let u: f64 = 1.0 - rng.gen::<f64>();
    (u.ln() / (1.0 - q).ln()).ceil().max(1.0) as u64
}

fn build_set(set: &SetConfig, role: ClipRole, prefix: &str, cfg: &DatasetConfig, seed: u64) -> Result<Vec<SyntheticClip>, SimError> {
    generate_dataset(
        &DatasetSpec {
            n_clips: set.n_clips,
            class_mix: set.class_mix,
            difficulty: cfg.difficulty,
            role,
            id_prefix: prefix.into(),
            clips_per_patient: cfg.clips_per_patient,
        },
        seed,
    )
}

/// Generates data and experts, runs the crowd contest in-process one
/// submission at a time, and analyzes the resulting log.
///
/// Crowd users act in rounds: each round every user with budget left submits
/// once, in a freshly shuffled order. Collection stops after the round in
/// which the test clips reach the configured mean of distinct eligible users,
/// or when every budget is spent.
pub fn run_experiment(config: &ExperimentConfig, seed: u64) -> Result<ExperimentOutput, SimError> {
    config.validate()?;
    let ds = &config.dataset;
    let mut clips = build_set(&ds.training, ClipRole::Training, "train", ds, seed)?;
    let test_start = clips.len();
    clips.extend(build_set(&ds.test, ClipRole::Test, "test", ds, seed)?);
    let test_end = clips.len();
    clips.extend(build_set(&ds.unlabeled, ClipRole::Unlabeled, "pool", ds, seed)?);

    let expert_profiles_list = sample_expert_panel(
        config.panel.n_experts,
        config.panel.accuracy_range,
        config.panel.adjacency_error_bias,
        seed,
    )?;
    let expert_ids: Vec<String> = (1..=expert_profiles_list.len()).map(|i| format!("expert-{i}")).collect();
    let mut panel = ExpertPanel::new(expert_ids.clone());
    for (id, profile) in expert_ids.iter().zip(&expert_profiles_list) {
        let mut stream = rng::stream(seed, &["expert", id]);
        for c in &clips[..test_end] {
            panel.insert(&c.clip.clip_id, id, answer(profile, &c.profile, 0, &mut stream));
        }
    }
    let reference = build_reference_standard(&panel, seed)?;
    let leave_one_out = build_leave_one_out_references(&panel, seed)?;
    for c in clips[..test_end].iter_mut() {
        c.clip.reference_label = reference.get(&c.clip.clip_id);
    }

    let log = MemoryLog::new();
    let start = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
    let platform = Platform::new(config.platform, Box::new(log.clone())).with_clock(Platform::ticking_clock(start));
    platform.register_clips(clips.iter().map(|c| c.clip.clone()));
    let contest_id = platform.create_contest(ContestSpec {
        pool: clips.iter().map(|c| c.clip.clip_id.clone()).collect(),
        policy: config.policy,
        prize_pool_cents: config.prize_pool_cents,
        seed,
    })?;
    let clip_profiles: BTreeMap<String, ClipProfile> =
        clips.iter().map(|c| (c.clip.clip_id.clone(), c.profile)).collect();
    let test_index: BTreeMap<&str, usize> = clips[test_start..test_end]
        .iter()
        .enumerate()
        .map(|(i, c)| (c.clip.clip_id.as_str(), i))
        .collect();

    let cc = &config.crowd;
    let mut users: Vec<SimUser> = (0..cc.n_users)
        .map(|i| {
            let user_id = format!("user-{i:04}");
            let mut stream = rng::stream(seed, &["crowd", &user_id]);
            let (lo, hi) = cc.base_accuracy_range;
            let a0 = if hi > lo { stream.gen_range(lo..=hi) } else { lo };
            let amax = (a0 + cc.uplift).min(cc.max_accuracy_cap).max(a0);
            let profile = LabelerProfile::new(a0, amax, cc.learning_time_constant, cc.adjacency_error_bias)?;
            let budget = geometric(&mut stream, cc.mean_opinions_per_user);
            Ok(SimUser {
                member: CrowdMember {
                    user_id,
                    profile,
                    budget,
                    submitted: 0,
                    feedback_events: 0,
                },
                rng: stream,
                trailing: None,
            })
        })
        .collect::<Result<_, SimError>>()?;

    let n_test = (test_end - test_start) as f64;
    let mut eligible_pairs: HashSet<(usize, usize)> = HashSet::new();
    let mut rounds = rng::stream(seed, &["rounds"]);
    let threshold = config.policy.skill_threshold;
    loop {
        let mut active: Vec<usize> = (0..users.len())
            .filter(|&i| users[i].member.submitted < users[i].member.budget)
            .collect();
        if active.is_empty() {
            break;
        }
        active.shuffle(&mut rounds);
        for i in active {
            let user = &mut users[i];
            let served = platform.next_clip(&contest_id, &user.member.user_id)?;
            let profile = &clip_profiles[&served.clip_id];
            let label = answer(&user.member.profile, profile, user.member.feedback_events, &mut user.rng);
            let eligible = user.trailing.is_some_and(|t| t >= threshold);
            let response = platform.submit_opinion(&contest_id, &user.member.user_id, &served.clip_id, label)?;
            user.member.submitted += 1;
            if matches!(response.disposition, FeedbackDisposition::Revealed(_)) {
                user.member.feedback_events += 1;
            }
            user.trailing = response.trailing_accuracy;
            if eligible {
                if let Some(&t) = test_index.get(served.clip_id.as_str()) {
                    eligible_pairs.insert((t, i));
                }
            }
        }
        if eligible_pairs.len() as f64 / n_test >= config.target_eligible_per_test_clip {
            break;
        }
    }
    platform.close_contest(&contest_id)?;
    let ledger = platform.settle_prizes(&contest_id)?;
    let entries = log.take();

    let test_clips: BTreeSet<String> = test_index.keys().map(|s| s.to_string()).collect();
    let report = analyze(&AnalysisInputs {
        entries: &entries,
        test_clips: &test_clips,
        panel: &panel,
        reference: &reference,
        leave_one_out: &leave_one_out,
        config: config.analysis,
        seed,
    })?;

    Ok(ExperimentOutput {
        seed,
        config: config.clone(),
        contest_id,
        setup: platform.setup(),
        log: entries,
        clip_profiles,
        expert_profiles: expert_ids.into_iter().zip(expert_profiles_list).collect(),
        panel,
        reference,
        leave_one_out,
        crowd: users.into_iter().map(|u| u.member).collect(),
        ledger,
        report,
    })
}
