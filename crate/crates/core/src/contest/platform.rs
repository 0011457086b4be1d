use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use parking_lot::{Mutex, RwLock};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::log::{read_log, LogSink};
use super::prizes::{settle, LedgerEntry};
use super::{
    Contest, ContestError, ContestSpec, ContestStatus, FeedbackDisposition, FeedbackResponse,
    LeaderboardEntry, OpinionLogEntry, PlatformConfig, PlatformSetup, ServedClip,
};
use crate::consensus::{ConsensusPolicy, ConsensusState};
use crate::model::{ClassLabel, Clip, ClipRole, Opinion};
use crate::quality::{is_skilled, score_source_for, UserQuality};
use crate::rng;

type Clock = Box<dyn Fn() -> DateTime<Utc> + Send + Sync>;

#[derive(Debug, Clone, Default)]
struct ScoreTally {
    correct: u64,
    scored: u64,
}

#[derive(Debug)]
struct UserRecord {
    quality: UserQuality,
    score: ScoreTally,
}

struct ClipSlot {
    clip: Clip,
    state: Mutex<ConsensusState>,
}

struct ContestRuntime {
    contest_id: String,
    policy: ConsensusPolicy,
    prize_pool_cents: u64,
    seed: u64,
    pool: Vec<String>,
    status: RwLock<ContestStatus>,
    clips: HashMap<String, ClipSlot>,
    users: Mutex<HashMap<String, Arc<Mutex<UserRecord>>>>,
    serve_streams: Mutex<HashMap<String, ChaCha8Rng>>,
}

impl ContestRuntime {
    fn user(&self, user_id: &str) -> Arc<Mutex<UserRecord>> {
        let mut users = self.users.lock();
        users
            .entry(user_id.to_string())
            .or_insert_with(|| {
                Arc::new(Mutex::new(UserRecord {
                    quality: UserQuality::for_policy(user_id, &self.policy),
                    score: ScoreTally::default(),
                }))
            })
            .clone()
    }

    fn definition(&self) -> Contest {
        Contest {
            contest_id: self.contest_id.clone(),
            pool: self.pool.clone(),
            policy: self.policy,
            prize_pool_cents: self.prize_pool_cents,
            status: *self.status.read(),
            seed: self.seed,
        }
    }
}

/// Verdicts fixed before an opinion is applied.
struct Intake {
    trailing: Option<f64>,
    eligible: bool,
    score_source: Option<ClassLabel>,
    disposition: FeedbackDisposition,
}

fn intake(policy: &ConsensusPolicy, user: &UserRecord, slot_clip: &Clip, state: &ConsensusState) -> Intake {
    let trailing = user.quality.trailing_accuracy();
    let eligible = is_skilled(&user.quality, policy.skill_threshold);
    let score_source = score_source_for(slot_clip, Some(state));
    let disposition = match slot_clip.role {
        ClipRole::Test => FeedbackDisposition::Recorded,
        ClipRole::Training | ClipRole::Unlabeled => match score_source {
            Some(label) => FeedbackDisposition::Revealed(label),
            None => FeedbackDisposition::Recorded,
        },
    };
    Intake {
        trailing,
        eligible,
        score_source,
        disposition,
    }
}

fn commit(
    runtime: &ContestRuntime,
    user: &mut UserRecord,
    state: &mut ConsensusState,
    opinion: &Opinion,
    score_source: Option<ClassLabel>,
) -> Result<(), ContestError> {
    let id = opinion.opinion_id.to_string();
    let mut tie = rng::stream(runtime.seed, &["consensus", &opinion.clip_id, &id]);
    state.apply(opinion, &runtime.policy, &mut tie)?;
    if let Some(truth) = score_source {
        let correct = truth == opinion.label;
        user.quality.record_outcome(correct);
        user.score.scored += 1;
        if correct {
            user.score.correct += 1;
        }
    }
    Ok(())
}

fn contest_id_for(pool: &[String], spec: &ContestSpec) -> String {
    let canonical = serde_json::to_string(&(pool, &spec.policy, spec.prize_pool_cents, spec.seed))
        .expect("contest spec serializes");
    format!("c{:016x}", rng::fnv1a(&[canonical.as_bytes()]))
}

struct LogState {
    next_id: u64,
    sink: Box<dyn LogSink>,
}

/// In-process contest service.
pub struct Platform {
    config: PlatformConfig,
    clips: RwLock<BTreeMap<String, Clip>>,
    contests: RwLock<BTreeMap<String, Arc<ContestRuntime>>>,
    log: Mutex<LogState>,
    clock: Clock,
}

impl Platform {
    pub fn new(config: PlatformConfig, sink: Box<dyn LogSink>) -> Self {
        Platform {
            config,
            clips: RwLock::new(BTreeMap::new()),
            contests: RwLock::new(BTreeMap::new()),
            log: Mutex::new(LogState { next_id: 1, sink }),
            clock: Box::new(Utc::now),
        }
    }

    /// Replaces the wall clock. Timestamps are recorded but never drive logic.
    pub fn with_clock(mut self, clock: impl Fn() -> DateTime<Utc> + Send + Sync + 'static) -> Self {
        self.clock = Box::new(clock);
        self
    }

    /// A clock that ticks one second per call from `start`.
    pub fn ticking_clock(start: DateTime<Utc>) -> impl Fn() -> DateTime<Utc> + Send + Sync {
        let ticks = AtomicU64::new(0);
        move || start + chrono::Duration::seconds(ticks.fetch_add(1, Ordering::Relaxed) as i64)
    }

    pub fn config(&self) -> &PlatformConfig {
        &self.config
    }

    /// Inserts or replaces clip records. Existing contests keep the records they were created with.
    pub fn register_clips(&self, clips: impl IntoIterator<Item = Clip>) {
        let mut registry = self.clips.write();
        for clip in clips {
            registry.insert(clip.clip_id.clone(), clip);
        }
    }

    pub fn clip(&self, clip_id: &str) -> Option<Clip> {
        self.clips.read().get(clip_id).cloned()
    }

    pub fn clip_count(&self) -> usize {
        self.clips.read().len()
    }

    fn contest(&self, contest_id: &str) -> Result<Arc<ContestRuntime>, ContestError> {
        self.contests
            .read()
            .get(contest_id)
            .cloned()
            .ok_or_else(|| ContestError::UnknownContest(contest_id.to_string()))
    }

    pub fn contest_ids(&self) -> Vec<String> {
        self.contests.read().keys().cloned().collect()
    }

    pub fn contest_info(&self, contest_id: &str) -> Result<Contest, ContestError> {
        Ok(self.contest(contest_id)?.definition())
    }

    /// Registers an open contest. Creating the same spec twice returns the same id.
    pub fn create_contest(&self, spec: ContestSpec) -> Result<String, ContestError> {
        spec.policy.validate()?;
        let registry = self.clips.read();
        let mut pool: Vec<String> = Vec::with_capacity(spec.pool.len());
        for id in &spec.pool {
            let clip = registry
                .get(id)
                .ok_or_else(|| ContestError::UnknownClip(id.clone()))?;
            if clip.excluded {
                continue;
            }
            if clip.is_labeled_role() && clip.reference_label.is_none() {
                return Err(ContestError::MissingReference(id.clone()));
            }
            pool.push(id.clone());
        }
        pool.sort();
        pool.dedup();
        if pool.is_empty() {
            return Err(ContestError::EmptyPool);
        }
        let contest_id = contest_id_for(&pool, &spec);
        let mut contests = self.contests.write();
        if contests.contains_key(&contest_id) {
            return Ok(contest_id);
        }
        let clips = pool
            .iter()
            .map(|id| {
                let clip = registry[id].clone();
                let state = ConsensusState::new(id.clone(), clip.excluded);
                (id.clone(), ClipSlot { clip, state: Mutex::new(state) })
            })
            .collect();
        contests.insert(
            contest_id.clone(),
            Arc::new(ContestRuntime {
                contest_id: contest_id.clone(),
                policy: spec.policy,
                prize_pool_cents: spec.prize_pool_cents,
                seed: spec.seed,
                pool,
                status: RwLock::new(ContestStatus::Open),
                clips,
                users: Mutex::new(HashMap::new()),
                serve_streams: Mutex::new(HashMap::new()),
            }),
        );
        Ok(contest_id)
    }

    pub fn close_contest(&self, contest_id: &str) -> Result<(), ContestError> {
        *self.contest(contest_id)?.status.write() = ContestStatus::Closed;
        Ok(())
    }

    /// Uniform draw with replacement from the pool, from a per-user stream.
    pub fn next_clip(&self, contest_id: &str, user_id: &str) -> Result<ServedClip, ContestError> {
        let contest = self.contest(contest_id)?;
        let status = contest.status.read();
        if *status == ContestStatus::Closed {
            return Err(ContestError::ContestClosed(contest_id.to_string()));
        }
        let index = {
            let mut streams = contest.serve_streams.lock();
            let stream = streams
                .entry(user_id.to_string())
                .or_insert_with(|| rng::stream(contest.seed, &["serve", user_id]));
            stream.gen_range(0..contest.pool.len())
        };
        let clip_id = &contest.pool[index];
        Ok(ServedClip {
            contest_id: contest_id.to_string(),
            clip_id: clip_id.clone(),
            media_uri: contest.clips[clip_id].clip.media_uri.clone(),
        })
    }

    fn slot<'a>(&self, contest: &'a ContestRuntime, clip_id: &str) -> Result<&'a ClipSlot, ContestError> {
        match contest.clips.get(clip_id) {
            Some(slot) => Ok(slot),
            None => match self.clips.read().get(clip_id) {
                Some(c) if c.excluded => Err(ContestError::ClipExcluded(clip_id.to_string())),
                _ => Err(ContestError::ClipNotInPool(clip_id.to_string())),
            },
        }
    }

    pub fn submit_opinion(
        &self,
        contest_id: &str,
        user_id: &str,
        clip_id: &str,
        label: ClassLabel,
    ) -> Result<FeedbackResponse, ContestError> {
        let contest = self.contest(contest_id)?;
        let status = contest.status.read();
        if *status == ContestStatus::Closed {
            return Err(ContestError::ContestClosed(contest_id.to_string()));
        }
        let slot = self.slot(&contest, clip_id)?;
        let user_arc = contest.user(user_id);
        let mut user = user_arc.lock();
        let mut state = slot.state.lock();

        let verdict = intake(&contest.policy, &user, &slot.clip, &state);
        let opinion = {
            let mut log = self.log.lock();
            let entry = OpinionLogEntry {
                opinion_id: log.next_id,
                contest_id: contest_id.to_string(),
                user_id: user_id.to_string(),
                clip_id: clip_id.to_string(),
                label,
                submitted_at: (self.clock)(),
                trailing_accuracy_at_submission: verdict.trailing,
                eligible: verdict.eligible,
                feedback: verdict.disposition,
            };
            log.sink.append(&entry)?;
            log.next_id += 1;
            entry.opinion()
        };
        commit(&contest, &mut user, &mut state, &opinion, verdict.score_source)?;

        Ok(FeedbackResponse {
            opinion_id: opinion.opinion_id,
            disposition: verdict.disposition,
            trailing_accuracy: user.quality.trailing_accuracy(),
            score: (user.score.scored > 0)
                .then(|| user.score.correct as f64 / user.score.scored as f64),
            scored_count: user.score.scored,
        })
    }

    fn apply_logged(&self, entry: &OpinionLogEntry) -> Result<(), ContestError> {
        let divergence = |message: String| ContestError::ReplayDivergence {
            opinion_id: entry.opinion_id,
            message,
        };
        let contest = self.contest(&entry.contest_id)?;
        let slot = self.slot(&contest, &entry.clip_id)?;
        let user_arc = contest.user(&entry.user_id);
        let mut user = user_arc.lock();
        let mut state = slot.state.lock();
        let verdict = intake(&contest.policy, &user, &slot.clip, &state);
        if verdict.eligible != entry.eligible
            || verdict.trailing != entry.trailing_accuracy_at_submission
        {
            return Err(divergence(format!(
                "logged eligibility {:?}/{} but state gives {:?}/{}",
                entry.trailing_accuracy_at_submission, entry.eligible, verdict.trailing, verdict.eligible
            )));
        }
        if verdict.disposition != entry.feedback {
            return Err(divergence(format!(
                "logged feedback {:?} but state gives {:?}",
                entry.feedback, verdict.disposition
            )));
        }
        commit(&contest, &mut user, &mut state, &entry.opinion(), verdict.score_source)
    }

    /// Rebuilds a platform from its setup document and opinion log. The
    /// replayed entries are not re-appended to `sink`; new opinions continue
    /// after the last logged id.
    pub fn replay<R: BufRead>(
        setup: &PlatformSetup,
        config: PlatformConfig,
        log: R,
        sink: Box<dyn LogSink>,
    ) -> Result<Platform, ContestError> {
        let entries = read_log(log)?;
        Self::replay_entries(setup, config, &entries, sink)
    }

    pub fn replay_entries(
        setup: &PlatformSetup,
        config: PlatformConfig,
        entries: &[OpinionLogEntry],
        sink: Box<dyn LogSink>,
    ) -> Result<Platform, ContestError> {
        let platform = Platform::new(config, sink);
        platform.restore_setup(setup)?;
        let mut last = 0;
        for entry in entries {
            if entry.opinion_id <= last {
                return Err(ContestError::ReplayDivergence {
                    opinion_id: entry.opinion_id,
                    message: format!("opinion id does not follow {last}"),
                });
            }
            platform.apply_logged(entry)?;
            last = entry.opinion_id;
        }
        platform.log.lock().next_id = last + 1;
        for contest in &setup.contests {
            if contest.status == ContestStatus::Closed {
                platform.close_contest(&contest.contest_id)?;
            }
        }
        Ok(platform)
    }

    /// Registers the clips and re-creates the contests of `setup`, all open.
    fn restore_setup(&self, setup: &PlatformSetup) -> Result<(), ContestError> {
        self.register_clips(setup.clips.iter().cloned());
        for contest in &setup.contests {
            let spec = ContestSpec {
                pool: contest.pool.clone(),
                policy: contest.policy,
                prize_pool_cents: contest.prize_pool_cents,
                seed: contest.seed,
            };
            let id = self.create_contest(spec)?;
            if id != contest.contest_id {
                return Err(ContestError::CorruptLog {
                    line: 0,
                    message: format!("setup contest {} re-creates as {id}", contest.contest_id),
                });
            }
        }
        Ok(())
    }

    /// Setup document describing the current clips and contests.
    pub fn setup(&self) -> PlatformSetup {
        PlatformSetup {
            clips: self.clips.read().values().cloned().collect(),
            contests: self.contests.read().values().map(|c| c.definition()).collect(),
        }
    }

    pub fn next_opinion_id(&self) -> u64 {
        self.log.lock().next_id
    }

    /// Consensus states of every pool clip, sorted by clip id.
    pub fn consensus_snapshot(&self, contest_id: &str) -> Result<Vec<ConsensusState>, ContestError> {
        let contest = self.contest(contest_id)?;
        let _quiesce = contest.status.write();
        let mut states: Vec<ConsensusState> =
            contest.clips.values().map(|s| s.state.lock().clone()).collect();
        states.sort_by(|a, b| a.clip_id.cmp(&b.clip_id));
        Ok(states)
    }

    /// Consensus state of a clip in every contest whose pool holds it.
    pub fn clip_consensus(&self, clip_id: &str) -> Result<Vec<(String, ConsensusState)>, ContestError> {
        if !self.clips.read().contains_key(clip_id) {
            return Err(ContestError::UnknownClip(clip_id.to_string()));
        }
        let contests: Vec<Arc<ContestRuntime>> = self.contests.read().values().cloned().collect();
        Ok(contests
            .iter()
            .filter_map(|c| {
                c.clips
                    .get(clip_id)
                    .map(|slot| (c.contest_id.clone(), slot.state.lock().clone()))
            })
            .collect())
    }

    /// Quality states of every user who submitted to the contest, sorted by user id.
    pub fn quality_snapshot(&self, contest_id: &str) -> Result<Vec<UserQuality>, ContestError> {
        let contest = self.contest(contest_id)?;
        let _quiesce = contest.status.write();
        let users: Vec<Arc<Mutex<UserRecord>>> = contest.users.lock().values().cloned().collect();
        let mut out: Vec<UserQuality> = users.iter().map(|u| u.lock().quality.clone()).collect();
        out.sort_by(|a, b| a.user_id.cmp(&b.user_id));
        Ok(out)
    }

    /// Users with enough scored opinions, by accuracy within the contest,
    /// then scored count, then user id.
    pub fn leaderboard(&self, contest_id: &str) -> Result<Vec<LeaderboardEntry>, ContestError> {
        let contest = self.contest(contest_id)?;
        let _quiesce = contest.status.write();
        let users: Vec<(String, ScoreTally)> = contest
            .users
            .lock()
            .iter()
            .map(|(id, u)| (id.clone(), u.lock().score.clone()))
            .collect();
        Ok(rank_scores(users, self.config.leaderboard_min_scored))
    }

    pub fn settle_prizes(&self, contest_id: &str) -> Result<Vec<LedgerEntry>, ContestError> {
        let contest = self.contest(contest_id)?;
        if *contest.status.read() == ContestStatus::Open {
            return Err(ContestError::ContestStillOpen(contest_id.to_string()));
        }
        let board = self.leaderboard(contest_id)?;
        Ok(settle(&board, contest.prize_pool_cents, &self.config.prizes))
    }
}

fn rank_scores(users: Vec<(String, ScoreTally)>, min_scored: u64) -> Vec<LeaderboardEntry> {
    let mut qualified: Vec<(String, ScoreTally)> = users
        .into_iter()
        .filter(|(_, s)| s.scored >= min_scored.max(1))
        .collect();
    qualified.sort_by(|(ida, a), (idb, b)| {
        // exact comparison of a.correct/a.scored against b.correct/b.scored
        let lhs = u128::from(a.correct) * u128::from(b.scored);
        let rhs = u128::from(b.correct) * u128::from(a.scored);
        rhs.cmp(&lhs)
            .then(b.scored.cmp(&a.scored))
            .then(ida.cmp(idb))
    });
    qualified
        .into_iter()
        .enumerate()
        .map(|(i, (user_id, s))| LeaderboardEntry {
            rank: i + 1,
            user_id,
            score: s.correct as f64 / s.scored as f64,
            correct: s.correct,
            scored_count: s.scored,
        })
        .collect()
}
