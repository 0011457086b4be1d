//! HTTP JSON API over a [`Platform`].
//!
//! | method | path | body / query |
//! |---|---|---|
//! | POST | `/contests` | `{pool?, policy?, prize_pool_cents?, seed?}` |
//! | POST | `/contests/{id}/close` | |
//! | GET | `/contests/{id}/next-clip` | `?user=` |
//! | POST | `/opinions` | `{contest_id, user_id, clip_id, label}` |
//! | GET | `/contests/{id}/leaderboard` | |
//! | GET | `/clips/{id}/consensus` | |
//! | POST | `/contests/{id}/settle` | |
//! | POST | `/ingest/manifest` | manifest text, `?format=csv\|jsonl` |
//! | POST | `/ingest/expert-opinions` | expert opinion CSV |
//!
//! Errors are `{"code": ..., "message": ...}` with the code of the
//! underlying error.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use crowdlabel::consensus::{build_reference_standard, ConsensusPolicy, ConsensusState, ExpertPanel};
use crowdlabel::contest::{
    Contest, ContestError, ContestSpec, FeedbackResponse, LeaderboardEntry, LedgerEntry, Platform, ServedClip,
};
use crowdlabel::ingest::{
    assemble_clips, partition_by_patient, read_expert_opinions, read_manifest, select_and_exclude, ClipManifest,
    IngestError, ManifestFormat, PartitionPlan,
};
use crowdlabel::{ClassLabel, ClipRole};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::ServerConfig;
use crate::store::DataDir;

pub struct AppState {
    pub platform: Platform,
    pub config: ServerConfig,
    pub data: Option<DataDir>,
    ingest: Mutex<IngestState>,
}

#[derive(Default)]
struct IngestState {
    manifest: Option<(ClipManifest, PartitionPlan)>,
}

impl AppState {
    pub fn new(platform: Platform, config: ServerConfig, data: Option<DataDir>) -> anyhow::Result<Self> {
        let manifest = match &data {
            Some(d) => d.read_ingest()?,
            None => None,
        };
        Ok(AppState {
            platform,
            config,
            data,
            ingest: Mutex::new(IngestState { manifest }),
        })
    }

    fn persist_setup(&self) -> Result<(), ApiError> {
        if let Some(d) = &self.data {
            d.write_setup(&self.platform.setup()).map_err(ApiError::internal)?;
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BadRequest", message)
    }

    fn internal(e: anyhow::Error) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", format!("{e:#}"))
    }
}

impl From<ContestError> for ApiError {
    fn from(e: ContestError) -> Self {
        let status = match &e {
            ContestError::UnknownContest(_) | ContestError::UnknownClip(_) => StatusCode::NOT_FOUND,
            ContestError::ContestClosed(_) | ContestError::ContestStillOpen(_) | ContestError::MissingReference(_) => {
                StatusCode::CONFLICT
            }
            ContestError::ClipNotInPool(_)
            | ContestError::ClipExcluded(_)
            | ContestError::EmptyPool
            | ContestError::Consensus(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ContestError::CorruptLog { .. } | ContestError::ReplayDivergence { .. } | ContestError::Io(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl From<IngestError> for ApiError {
    fn from(e: IngestError) -> Self {
        let code = match &e {
            IngestError::Io(_) => "IoError",
            IngestError::ParseError { .. } => "ParseError",
            IngestError::DuplicateClip(_) => "DuplicateClip",
            IngestError::MissingField { .. } => "MissingField",
            IngestError::DuplicateExpertOpinion { .. } => "DuplicateExpertOpinion",
            IngestError::TooFewPatients(_) => "TooFewPatients",
            IngestError::InsufficientClips { .. } => "InsufficientClips",
        };
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "code": self.code, "message": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_json<T: serde::de::DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(e.to_string()))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/contests", post(create_contest))
        .route("/contests/{id}/close", post(close_contest))
        .route("/contests/{id}/next-clip", get(next_clip))
        .route("/contests/{id}/leaderboard", get(leaderboard))
        .route("/contests/{id}/settle", post(settle))
        .route("/opinions", post(submit_opinion))
        .route("/clips/{id}/consensus", get(clip_consensus))
        .route("/ingest/manifest", post(ingest_manifest))
        .route("/ingest/expert-opinions", post(ingest_experts))
        .with_state(state)
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateContest {
    pool: Option<Vec<String>>,
    /// Keys given here override the configured policy.
    policy: Option<serde_json::Map<String, serde_json::Value>>,
    prize_pool_cents: Option<u64>,
    seed: Option<u64>,
}

async fn create_contest(State(s): State<Arc<AppState>>, body: Bytes) -> ApiResult<(StatusCode, Json<Contest>)> {
    let req: CreateContest = if body.is_empty() { CreateContest::default() } else { parse_json(&body)? };
    let policy = match req.policy {
        None => s.config.policy,
        Some(overrides) => {
            let mut merged = serde_json::to_value(s.config.policy).expect("policy serializes");
            merged.as_object_mut().expect("policy is an object").extend(overrides);
            serde_json::from_value::<ConsensusPolicy>(merged).map_err(|e| ApiError::bad_request(e.to_string()))?
        }
    };
    let pool = req.pool.unwrap_or_else(|| {
        s.platform
            .setup()
            .clips
            .into_iter()
            .filter(|c| !c.excluded)
            .map(|c| c.clip_id)
            .collect()
    });
    let id = s.platform.create_contest(ContestSpec {
        pool,
        policy,
        prize_pool_cents: req.prize_pool_cents.unwrap_or(0),
        seed: req.seed.unwrap_or(s.config.seeds.contest),
    })?;
    s.persist_setup()?;
    Ok((StatusCode::CREATED, Json(s.platform.contest_info(&id)?)))
}

async fn close_contest(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Contest>> {
    s.platform.close_contest(&id)?;
    s.persist_setup()?;
    Ok(Json(s.platform.contest_info(&id)?))
}

async fn next_clip(
    State(s): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Json<ServedClip>> {
    let user = q
        .get("user")
        .filter(|u| !u.is_empty())
        .ok_or_else(|| ApiError::bad_request("query parameter `user` is required"))?;
    Ok(Json(s.platform.next_clip(&id, user)?))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SubmitOpinion {
    contest_id: String,
    user_id: String,
    clip_id: String,
    label: ClassLabel,
}

async fn submit_opinion(State(s): State<Arc<AppState>>, body: Bytes) -> ApiResult<Json<FeedbackResponse>> {
    let req: SubmitOpinion = parse_json(&body)?;
    if req.user_id.is_empty() {
        return Err(ApiError::bad_request("user_id must not be empty"));
    }
    Ok(Json(s.platform.submit_opinion(&req.contest_id, &req.user_id, &req.clip_id, req.label)?))
}

async fn leaderboard(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Vec<LeaderboardEntry>>> {
    Ok(Json(s.platform.leaderboard(&id)?))
}

#[derive(Serialize)]
struct ContestConsensus {
    contest_id: String,
    #[serde(flatten)]
    state: ConsensusState,
}

async fn clip_consensus(
    State(s): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Json<Vec<ContestConsensus>>> {
    let states = s.platform.clip_consensus(&id)?;
    Ok(Json(
        states
            .into_iter()
            .map(|(contest_id, state)| ContestConsensus { contest_id, state })
            .collect(),
    ))
}

#[derive(Serialize)]
struct Settlement {
    contest_id: String,
    prize_pool_cents: u64,
    paid_cents: u64,
    ledger: Vec<LedgerEntry>,
}

async fn settle(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Settlement>> {
    let ledger = s.platform.settle_prizes(&id)?;
    let contest = s.platform.contest_info(&id)?;
    Ok(Json(Settlement {
        contest_id: id,
        prize_pool_cents: contest.prize_pool_cents,
        paid_cents: ledger.iter().map(|e| e.amount_cents).sum(),
        ledger,
    }))
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct IngestSummary {
    pub clips: usize,
    pub patients: usize,
    pub set_a_patients: usize,
    pub set_b_patients: usize,
    pub training_clips: usize,
    pub test_clips: usize,
    pub excluded_clips: usize,
    /// Training and test clips with a reference label.
    pub labeled_clips: usize,
}

fn summarize(manifest: &ClipManifest, plan: &PartitionPlan, labeled: usize) -> IngestSummary {
    IngestSummary {
        clips: manifest.len(),
        patients: manifest.patients().len(),
        set_a_patients: plan.set_a_patients.len(),
        set_b_patients: plan.set_b_patients.len(),
        training_clips: plan.training_clips.len(),
        test_clips: plan.test_clips.len(),
        excluded_clips: plan.excluded_clips.len(),
        labeled_clips: labeled,
    }
}

/// Partitions and selects with the configured seed, then registers every
/// manifest clip. Training and test clips have no reference label until
/// expert opinions arrive.
async fn ingest_manifest(
    State(s): State<Arc<AppState>>,
    Query(q): Query<HashMap<String, String>>,
    body: Bytes,
) -> ApiResult<Json<IngestSummary>> {
    let format = match q.get("format").map(String::as_str) {
        None | Some("csv") => ManifestFormat::Csv,
        Some("jsonl") => ManifestFormat::JsonLines,
        Some(other) => return Err(ApiError::bad_request(format!("unknown manifest format {other}"))),
    };
    let manifest = read_manifest(body.as_ref(), format)?;
    let seed = s.config.seeds.partition;
    let plan = select_and_exclude(&partition_by_patient(&manifest, seed)?, &manifest, s.config.ingest.n_per_set, seed)?;
    let mut ingest = s.ingest.lock().expect("ingest lock");
    s.platform.register_clips(assemble_clips(&manifest, &plan, None));
    if let Some(d) = &s.data {
        d.write_ingest(&manifest, &plan).map_err(ApiError::internal)?;
    }
    s.persist_setup()?;
    let summary = summarize(&manifest, &plan, 0);
    ingest.manifest = Some((manifest, plan));
    Ok(Json(summary))
}

/// Builds the full-panel reference from the uploaded opinions and attaches
/// it to the training and test clips of the last manifest. Contests created
/// earlier keep the clip records they were created with.
async fn ingest_experts(State(s): State<Arc<AppState>>, body: Bytes) -> ApiResult<Json<IngestSummary>> {
    let panel: ExpertPanel = read_expert_opinions(body.as_ref())?;
    let ingest = s.ingest.lock().expect("ingest lock");
    let Some((manifest, plan)) = &ingest.manifest else {
        return Err(ApiError::new(StatusCode::CONFLICT, "NoManifest", "ingest a manifest first"));
    };
    let reference = build_reference_standard(&panel, s.config.seeds.reference).map_err(ContestError::from)?;
    let clips = assemble_clips(manifest, plan, Some(&reference));
    let labeled = clips
        .iter()
        .filter(|c| c.role != ClipRole::Unlabeled && c.reference_label.is_some())
        .count();
    s.platform.register_clips(clips);
    if let Some(d) = &s.data {
        d.write_experts(&panel).map_err(ApiError::internal)?;
    }
    s.persist_setup()?;
    Ok(Json(summarize(manifest, plan, labeled)))
}
