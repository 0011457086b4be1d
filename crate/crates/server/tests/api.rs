use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use crowdlabel::contest::{NullLog, Platform};
use crowdlabel_server::api::{router, AppState};
use crowdlabel_server::config::ServerConfig;
use crowdlabel_server::store::DataDir;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

/// 10 patients with 3 clips each; clip m-7-2 is flagged.
fn manifest_csv() -> String {
    let mut s = String::from("clip_id,patient_id,media_uri,frame_rate_hz,no_lung_flags\n");
    for p in 0..10 {
        for k in 0..3 {
            let flag = if (p, k) == (7, 2) { "e1" } else { "" };
            s.push_str(&format!("m-{p}-{k},pt{p},media/m-{p}-{k}.mp4,30,{flag}\n"));
        }
    }
    s
}

/// Three experts; all say "discrete" except on clips of patient 0.
fn experts_csv() -> String {
    let mut s = String::from("clip_id,expert_id,label\n");
    for p in 0..10 {
        for k in 0..3 {
            for e in 1..=3 {
                let label = if p == 0 { "no" } else { "discrete" };
                s.push_str(&format!("m-{p}-{k},e{e},{label}\n"));
            }
        }
    }
    s
}

fn config() -> ServerConfig {
    let mut c = ServerConfig::default();
    c.ingest.n_per_set = 5;
    c.scoring.leaderboard_min_scored = 3;
    c
}

fn app_with(data: Option<DataDir>) -> Router {
    let c = config();
    let platform = match &data {
        Some(d) => d.restore(c.platform(), d.log_sink().unwrap()).unwrap(),
        None => Platform::new(c.platform(), Box::new(NullLog)),
    };
    router(Arc::new(AppState::new(platform, c, data).unwrap()))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<String>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    call(app, Method::POST, uri, Some(body.to_string())).await
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, Method::GET, uri, None).await
}

async fn ingested(app: &Router) {
    let (s, v) = call(app, Method::POST, "/ingest/manifest", Some(manifest_csv())).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let (s, v) = call(app, Method::POST, "/ingest/expert-opinions", Some(experts_csv())).await;
    assert_eq!(s, StatusCode::OK, "{v}");
}

async fn contest(app: &Router) -> String {
    let (s, v) = post(app, "/contests", json!({"prize_pool_cents": 10_000, "seed": 4})).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    v["contest_id"].as_str().unwrap().to_string()
}

fn clip_ids_with_role(app_setup: &Value, role: &str) -> Vec<String> {
    app_setup["clips"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["role"] == role && c["excluded"] == false)
        .map(|c| c["clip_id"].as_str().unwrap().to_string())
        .collect()
}

#[tokio::test]
async fn ingest_reports_partition() {
    let app = app_with(None);
    let (s, v) = call(&app, Method::POST, "/ingest/manifest", Some(manifest_csv())).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["clips"], 30);
    assert_eq!(v["patients"], 10);
    assert_eq!((v["set_a_patients"].as_u64(), v["set_b_patients"].as_u64()), (Some(5), Some(5)));
    assert_eq!(v["excluded_clips"], 1);
    let (s, v) = call(&app, Method::POST, "/ingest/expert-opinions", Some(experts_csv())).await;
    assert_eq!(s, StatusCode::OK);
    let labeled = v["labeled_clips"].as_u64().unwrap();
    assert_eq!(labeled, v["training_clips"].as_u64().unwrap() + v["test_clips"].as_u64().unwrap());

    let dup = format!("{}m-0-0,pt0,x,30,\n", manifest_csv());
    let (s, v) = call(&app, Method::POST, "/ingest/manifest", Some(dup)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["code"], "DuplicateClip");
    let (_, v) = call(&app, Method::POST, "/ingest/manifest?format=xml", Some(manifest_csv())).await;
    assert_eq!(v["code"], "BadRequest");
}

#[tokio::test]
async fn expert_opinions_need_a_manifest() {
    let app = app_with(None);
    let (s, v) = call(&app, Method::POST, "/ingest/expert-opinions", Some(experts_csv())).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["code"], "NoManifest");
}

#[tokio::test]
async fn contest_lifecycle() {
    let dir = tempfile::tempdir().unwrap();
    let data = DataDir::new(dir.path());
    let app = app_with(Some(data.clone()));
    ingested(&app).await;
    let id = contest(&app).await;
    let setup: Value = serde_json::from_slice(&std::fs::read(dir.path().join("setup.json")).unwrap()).unwrap();
    let training = clip_ids_with_role(&setup, "training");
    assert!(!training.is_empty());

    let (s, v) = get(&app, &format!("/contests/{id}/next-clip?user=ana")).await;
    assert_eq!(s, StatusCode::OK);
    let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
    assert_eq!(keys, ["clip_id", "contest_id", "media_uri"]);

    // ana answers every training clip correctly, ben always says "no"
    let mut last = Value::Null;
    for round in 0..2 {
        for clip in &training {
            let truth = if clip.starts_with("m-0-") { "no" } else { "discrete" };
            for (user, label) in [("ana", truth), ("ben", "no")] {
                let (s, v) = post(
                    &app,
                    "/opinions",
                    json!({"contest_id": id, "user_id": user, "clip_id": clip, "label": label}),
                )
                .await;
                assert_eq!(s, StatusCode::OK, "round {round}: {v}");
                assert_eq!(v["disposition"]["revealed"], truth);
                last = v;
            }
        }
    }
    assert!(last["opinion_id"].as_u64().unwrap() >= 4);

    let (s, board) = get(&app, &format!("/contests/{id}/leaderboard")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(board[0]["user_id"], "ana");
    assert_eq!(board[0]["score"], 1.0);

    let (s, v) = get(&app, &format!("/clips/{}/consensus", training[0])).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v[0]["contest_id"], id.as_str());
    assert_eq!(v[0]["raw_counts"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).sum::<u64>(), 4);

    let (s, v) = post(&app, &format!("/contests/{id}/settle"), json!({})).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::CONFLICT, Some("ContestStillOpen")));
    let (s, v) = post(&app, &format!("/contests/{id}/close"), json!({})).await;
    assert_eq!((s, v["status"].as_str()), (StatusCode::OK, Some("closed")));
    let (s, v) = post(&app, &format!("/contests/{id}/settle"), json!({})).await;
    assert_eq!(s, StatusCode::OK);
    assert!(v["paid_cents"].as_u64().unwrap() <= 10_000);
    assert!(v["ledger"].as_array().unwrap().iter().all(|e| e["amount_cents"].as_u64().unwrap() <= 2_500));

    let (s, v) = post(
        &app,
        "/opinions",
        json!({"contest_id": id, "user_id": "ana", "clip_id": training[0], "label": "no"}),
    )
    .await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::CONFLICT, Some("ContestClosed")));
    let (_, v) = get(&app, &format!("/contests/{id}/next-clip?user=ana")).await;
    assert_eq!(v["code"], "ContestClosed");

    // a restarted server replays the log into the same state
    drop(app);
    let again = app_with(Some(data));
    let (_, board_again) = get(&again, &format!("/contests/{id}/leaderboard")).await;
    assert_eq!(board, board_again);
    let (_, v) = post(
        &again,
        "/opinions",
        json!({"contest_id": id, "user_id": "ana", "clip_id": training[0], "label": "no"}),
    )
    .await;
    assert_eq!(v["code"], "ContestClosed");
}

#[tokio::test]
async fn test_clips_never_reveal() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_with(Some(DataDir::new(dir.path())));
    ingested(&app).await;
    let id = contest(&app).await;
    let setup: Value = serde_json::from_slice(&std::fs::read(dir.path().join("setup.json")).unwrap()).unwrap();
    let test = clip_ids_with_role(&setup, "test");
    assert!(!test.is_empty());
    for clip in test {
        let (s, v) = post(
            &app,
            "/opinions",
            json!({"contest_id": id, "user_id": "cy", "clip_id": clip, "label": "discrete"}),
        )
        .await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(v["disposition"], "recorded");
    }
}

#[tokio::test]
async fn error_responses_carry_codes() {
    let app = app_with(None);
    ingested(&app).await;
    let id = contest(&app).await;

    let cases = [
        (get(&app, "/contests/nope/leaderboard").await, StatusCode::NOT_FOUND, "UnknownContest"),
        (get(&app, "/contests/nope/next-clip?user=a").await, StatusCode::NOT_FOUND, "UnknownContest"),
        (get(&app, &format!("/contests/{id}/next-clip")).await, StatusCode::BAD_REQUEST, "BadRequest"),
        (get(&app, "/clips/nope/consensus").await, StatusCode::NOT_FOUND, "UnknownClip"),
        (
            post(&app, "/opinions", json!({"contest_id": id, "user_id": "a", "clip_id": "nope", "label": "no"})).await,
            StatusCode::UNPROCESSABLE_ENTITY,
            "ClipNotInPool",
        ),
        (
            post(&app, "/opinions", json!({"contest_id": id, "user_id": "a", "clip_id": "m-7-2", "label": "no"})).await,
            StatusCode::UNPROCESSABLE_ENTITY,
            "ClipExcluded",
        ),
        (
            post(&app, "/opinions", json!({"contest_id": id, "user_id": "a", "clip_id": "m-0-0", "label": "maybe"}))
                .await,
            StatusCode::BAD_REQUEST,
            "BadRequest",
        ),
        (post(&app, "/contests", json!({"pool": []})).await, StatusCode::UNPROCESSABLE_ENTITY, "EmptyPool"),
        (
            post(&app, "/contests", json!({"policy": {"min_agreement": 0.1}})).await,
            StatusCode::UNPROCESSABLE_ENTITY,
            "InvalidPolicy",
        ),
        (post(&app, "/contests/nope/settle", json!({})).await, StatusCode::NOT_FOUND, "UnknownContest"),
        (post(&app, "/contests/nope/close", json!({})).await, StatusCode::NOT_FOUND, "UnknownContest"),
    ];
    for (i, ((status, body), want_status, want_code)) in cases.into_iter().enumerate() {
        assert_eq!(status, want_status, "case {i}: {body}");
        assert_eq!(body["code"], want_code, "case {i}: {body}");
        assert!(body["message"].is_string());
    }
}

#[tokio::test]
async fn policy_overrides_merge_with_config() {
    let app = app_with(None);
    ingested(&app).await;
    let (s, v) = post(&app, "/contests", json!({"policy": {"min_eligible_opinions": 3}, "seed": 1})).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    assert_eq!(v["policy"]["min_eligible_opinions"], 3);
    assert_eq!(v["policy"]["min_agreement"], 0.6);
    assert_eq!(v["pool"].as_array().unwrap().len(), 29);
    let (s, again) = post(&app, "/contests", json!({"policy": {"min_eligible_opinions": 3}, "seed": 1})).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(again["contest_id"], v["contest_id"]);
}
