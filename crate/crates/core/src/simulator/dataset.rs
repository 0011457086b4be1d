use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::labeler::ClipProfile;
use super::SimError;
use crate::ingest::{partition_by_patient, select_and_exclude, ClipManifest, ManifestRow};
use crate::model::{ClassLabel, Clip, ClipRole};
use crate::rng;

/// Difficulty draw for one class. A share of clips is ambiguous with
/// difficulty uniform on `ambiguous_range`; the rest are uniform on
/// `[0, base_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifficultyDraw {
    pub base_max: f64,
    pub ambiguous_share: f64,
    pub ambiguous_range: (f64, f64),
}

impl DifficultyDraw {
    pub const ZERO: DifficultyDraw = DifficultyDraw {
        base_max: 0.0,
        ambiguous_share: 0.0,
        ambiguous_range: (0.0, 0.0),
    };

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let ambiguous = rng.gen::<f64>() < self.ambiguous_share;
        let u: f64 = rng.gen();
        if ambiguous {
            let (lo, hi) = self.ambiguous_range;
            lo + (hi - lo) * u
        } else {
            self.base_max * u
        }
    }

    pub fn mean(&self) -> f64 {
        let (lo, hi) = self.ambiguous_range;
        self.ambiguous_share * (lo + hi) / 2.0 + (1.0 - self.ambiguous_share) * self.base_max / 2.0
    }

    fn validate(&self) -> Result<(), SimError> {
        let (lo, hi) = self.ambiguous_range;
        let ok = (0.0..1.0).contains(&self.base_max)
            && (0.0..=1.0).contains(&self.ambiguous_share)
            && 0.0 <= lo
            && lo <= hi
            && hi < 1.0;
        if ok {
            Ok(())
        } else {
            Err(SimError::BadConfig(format!("difficulty draw {self:?}")))
        }
    }
}

/// Per-class difficulty draws, in severity order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifficultyDistribution(pub [DifficultyDraw; 3]);

impl DifficultyDistribution {
    pub fn zero() -> Self {
        DifficultyDistribution([DifficultyDraw::ZERO; 3])
    }

    pub fn for_class(&self, c: ClassLabel) -> DifficultyDraw {
        self.0[c.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub n_clips: usize,
    /// Class probabilities in severity order.
    pub class_mix: [f64; 3],
    pub difficulty: DifficultyDistribution,
    pub role: ClipRole,
    pub id_prefix: String,
    /// Consecutive clips sharing a patient id.
    pub clips_per_patient: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticClip {
    pub clip: Clip,
    pub profile: ClipProfile,
}

pub fn generate_dataset(spec: &DatasetSpec, seed: u64) -> Result<Vec<SyntheticClip>, SimError> {
    let mix = spec.class_mix;
    if mix.iter().any(|p| !(0.0..=1.0).contains(p)) || (mix.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(SimError::BadMix(mix));
    }
    for d in &spec.difficulty.0 {
        d.validate()?;
    }
    let mut rng = rng::stream(seed, &["dataset", &spec.id_prefix]);
    let group = spec.clips_per_patient.max(1);
    (0..spec.n_clips)
        .map(|i| {
            let u: f64 = rng.gen();
            let label = if u < mix[0] {
                ClassLabel::NoBLines
            } else if u < mix[0] + mix[1] {
                ClassLabel::DiscreteBLines
            } else {
                ClassLabel::ConfluentBLines
            };
            let difficulty = spec.difficulty.for_class(label).sample(&mut rng);
            let clip_id = format!("{}-{:04}", spec.id_prefix, i);
            Ok(SyntheticClip {
                clip: Clip {
                    patient_id: format!("{}-p{:03}", spec.id_prefix, i / group),
                    media_uri: format!("synthetic://{clip_id}.mp4"),
                    clip_id,
                    role: spec.role,
                    reference_label: None,
                    excluded: false,
                    frame_rate_hz: 30.0,
                },
                profile: ClipProfile::new(label, difficulty)?,
            })
        })
        .collect()
}

pub const PAPER_FIXTURE_PATIENTS: usize = 203;
pub const PAPER_FIXTURE_CLIPS: usize = 2391;
pub const PAPER_SELECTED_PER_SET: usize = 200;
pub const PAPER_FLAGGED: (usize, usize) = (5, 2);

/// Manifest shaped like the source dataset: 2391 clips over 203 patients,
/// with 5 of the clips later selected for training and 2 selected for test
/// flagged as showing no lung. Selection never looks at the flags, so the
/// flagged clips are chosen by running the same partition and selection.
pub fn paper_fixture_manifest(seed: u64) -> Result<ClipManifest, SimError> {
    let mut rng = rng::stream(seed, &["fixture"]);
    // every patient gets at least one clip, the rest land uniformly
    let mut per_patient = vec![1usize; PAPER_FIXTURE_PATIENTS];
    for _ in PAPER_FIXTURE_PATIENTS..PAPER_FIXTURE_CLIPS {
        per_patient[rng.gen_range(0..PAPER_FIXTURE_PATIENTS)] += 1;
    }
    let mut rows = Vec::with_capacity(PAPER_FIXTURE_CLIPS);
    for (p, &n) in per_patient.iter().enumerate() {
        for k in 0..n {
            let clip_id = format!("clip-{p:03}-{k:02}");
            rows.push(ManifestRow {
                media_uri: format!("media/{clip_id}.mp4"),
                clip_id,
                patient_id: format!("patient-{p:03}"),
                frame_rate_hz: rng.gen_range(15.0..=46.0f64).round(),
                no_lung_flagged_by: Vec::new(),
                metadata: BTreeMap::new(),
            });
        }
    }
    let unflagged = ClipManifest::from_rows(rows.clone())?;
    let plan = select_and_exclude(&partition_by_patient(&unflagged, seed)?, &unflagged, PAPER_SELECTED_PER_SET, seed)?;
    let mut flag: Vec<&String> = plan.training_clips.iter().take(PAPER_FLAGGED.0).collect();
    flag.extend(plan.test_clips.iter().take(PAPER_FLAGGED.1));
    for row in rows.iter_mut() {
        if flag.contains(&&row.clip_id) {
            row.no_lung_flagged_by.push("expert-1".into());
        }
    }
    Ok(ClipManifest::from_rows(rows)?)
}
