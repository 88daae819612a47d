use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use tokenqoe::files;
use tokenqoe::service::{router, Service, ServiceConfig};
use tokenqoe_core::assign::SessionPlan;
use tokenqoe_core::model::{ContentConfig, ContentFixture, Grid, RatingRecord};
use tokenqoe_core::shaper::{self, ClockKind};

fn sample_fixture() -> ContentFixture {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/sample_content.json");
    files::load_fixture(&p).unwrap()
}

fn config(fixture: ContentFixture, grid: Grid) -> ServiceConfig {
    ServiceConfig { fixture, grid, seed: 17, clock: ClockKind::Virtual }
}

fn open(dir: &Path) -> Arc<Service> {
    Service::open(config(sample_fixture(), Grid::standard()), dir).unwrap()
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn call_json(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (s, b) = call(app, method, uri, body).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

async fn new_rater(app: &Router) -> String {
    let (s, v) = call_json(app, "POST", "/raters", Some(json!({"mbti": "INTJ", "patience": 3, "language": "en"}))).await;
    assert_eq!(s, StatusCode::CREATED);
    v["rater_id"].as_str().unwrap().to_owned()
}

async fn new_session(app: &Router, rater: &str) -> SessionPlan {
    let (s, v) = call_json(app, "POST", "/sessions", Some(json!({ "rater_id": rater }))).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    serde_json::from_value(v).unwrap()
}

fn ndjson(body: &[u8]) -> Vec<Value> {
    body.split(|b| *b == b'\n').filter(|l| !l.is_empty()).map(|l| serde_json::from_slice(l).unwrap()).collect()
}

fn rating(o: i32, c: i32, r: i32) -> Option<Value> {
    Some(json!({"scores": {"overall": o, "content": c, "response": r}}))
}

#[tokio::test]
async fn health_and_registration() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(open(dir.path()));
    let (s, v) = call_json(&app, "GET", "/health", None).await;
    assert_eq!((s, v), (StatusCode::OK, json!({"status": "ok"})));

    let a = new_rater(&app).await;
    let b = new_rater(&app).await;
    assert_ne!(a, b, "registration is not idempotent");

    let (s, v) = call_json(&app, "POST", "/raters", Some(json!({"mbti": "XXXX", "patience": 3, "language": "en"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], "bad-mbti");
    assert!(v["detail"].is_string());

    let (s, v) = call_json(&app, "POST", "/raters", Some(json!({"mbti": "INTJ", "patience": 9, "language": "en"}))).await;
    assert_eq!((s, v["error"].as_str()), (StatusCode::BAD_REQUEST, Some("bad-patience")));
}

#[tokio::test]
async fn session_covers_fixture_and_limit_applies() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(open(dir.path()));
    let rater = new_rater(&app).await;
    let mut seen = std::collections::BTreeSet::new();
    for _ in 0..4 {
        let plan = new_session(&app, &rater).await;
        let mut qs: Vec<&str> = plan.items.iter().map(|i| i.question_id.as_str()).collect();
        qs.sort_unstable();
        qs.dedup();
        assert_eq!(qs.len(), 10);
        assert_eq!(plan.items.len(), 10);
        for item in &plan.items {
            assert!(seen.insert(item.condition()), "condition repeated for one rater");
        }
    }
    let (s, v) = call_json(&app, "POST", "/sessions", Some(json!({ "rater_id": rater }))).await;
    assert_eq!((s, v["error"].as_str()), (StatusCode::CONFLICT, Some("session-limit-exceeded")));

    let (s, v) = call_json(&app, "POST", "/sessions", Some(json!({"rater_id": "nobody"}))).await;
    assert_eq!((s, v["error"].as_str()), (StatusCode::NOT_FOUND, Some("unknown-rater")));
    let (s, v) = call_json(&app, "POST", "/sessions", Some(json!({}))).await;
    assert_eq!((s, v["error"].as_str()), (StatusCode::BAD_REQUEST, Some("missing-field")));
}

#[tokio::test]
async fn two_questions_two_qos_four_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let all = sample_fixture();
    let fixture = ContentFixture::new(all.items()[..2].to_vec()).unwrap();
    let grid = Grid { speeds: vec![0.01, 0.05], pause_positions: vec![0.0], pause_durations: vec![3.0], ..Grid::standard() };
    let svc = Service::open(config(fixture.clone(), grid.clone()), dir.path()).unwrap();
    let app = router(svc.clone());
    for _ in 0..2 {
        let rater = new_rater(&app).await;
        new_session(&app, &rater).await;
        new_session(&app, &rater).await;
    }
    let planner = svc.planner();
    for q in fixture.items() {
        assert_eq!(planner.counter().qos_counts(&q.question_id, &grid.qos_points()), vec![2, 2]);
        assert_eq!(planner.counter().content_counts(&q.question_id, &ContentConfig::ALL), vec![1, 1, 1, 1]);
    }
}

#[tokio::test]
async fn stream_rate_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path());
    let app = router(svc.clone());
    let rater = new_rater(&app).await;
    let plan = new_session(&app, &rater).await;
    let sid = &plan.session_id;

    let (s, v) = call_json(&app, "POST", &format!("/sessions/{sid}/items/0/rating"), rating(4, 5, 2)).await;
    assert_eq!((s, v["error"].as_str()), (StatusCode::CONFLICT, Some("not-streamed")));

    let (s, body) = call(&app, "GET", &format!("/sessions/{sid}/items/0/stream"), None).await;
    assert_eq!(s, StatusCode::OK);
    let events = ndjson(&body);
    let (last, tokens) = events.split_last().unwrap();
    assert_eq!(last, &json!({"done": true, "count": tokens.len()}));
    for (i, e) in tokens.iter().enumerate() {
        assert_eq!(e["index"], i);
    }

    let (s, v) = call_json(&app, "POST", &format!("/sessions/{sid}/items/0/rating"), rating(6, 5, 2)).await;
    assert_eq!((s, v["error"].as_str()), (StatusCode::BAD_REQUEST, Some("score-out-of-range")));

    let (s, v) = call_json(&app, "POST", &format!("/sessions/{sid}/items/0/rating"), rating(4, 5, 2)).await;
    assert_eq!(s, StatusCode::CREATED);
    let stored: RatingRecord = serde_json::from_value(v).unwrap();
    let item = &plan.items[0];
    assert_eq!((stored.question_id.as_str(), stored.content, stored.qos), (item.question_id.as_str(), item.content, item.qos));
    assert_eq!(stored.rater_id, rater);

    let (s, v) = call_json(&app, "POST", &format!("/sessions/{sid}/items/0/rating"), rating(4, 5, 2)).await;
    assert_eq!((s, v["error"].as_str()), (StatusCode::CONFLICT, Some("duplicate-submission")));
    let (s, v) = call_json(&app, "GET", &format!("/sessions/{sid}/items/0/stream"), None).await;
    assert_eq!((s, v["error"].as_str()), (StatusCode::CONFLICT, Some("already-rated")));
    let n = plan.items.len();
    let (s, v) = call_json(&app, "GET", &format!("/sessions/{sid}/items/{n}/stream"), None).await;
    assert_eq!((s, v["error"].as_str()), (StatusCode::NOT_FOUND, Some("bad-index")));
    let (s, v) = call_json(&app, "GET", "/sessions/nope/items/0/stream", None).await;
    assert_eq!((s, v["error"].as_str()), (StatusCode::NOT_FOUND, Some("unknown-session")));

    let (s, body) = call(&app, "GET", "/export/ratings", None).await;
    assert_eq!(s, StatusCode::OK);
    let exported: Vec<RatingRecord> = ndjson(&body).into_iter().map(|v| serde_json::from_value(v).unwrap()).collect();
    assert_eq!(exported, vec![stored]);
}

#[tokio::test]
async fn stream_matches_the_scheduler() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = sample_fixture();
    // a one-point grid pins the QoS of every item to (0.05, 0.5, 3)
    let grid = Grid { speeds: vec![0.05], pause_positions: vec![0.5], pause_durations: vec![3.0], ..Grid::standard() };
    let svc = Service::open(config(fixture.clone(), grid), dir.path()).unwrap();
    let app = router(svc);
    let rater = new_rater(&app).await;
    let plan = new_session(&app, &rater).await;
    for (idx, item) in plan.items.iter().enumerate() {
        let q = fixture.get(&item.question_id).unwrap();
        let text = &q.variant(item.content).unwrap().answer_text;
        let schedule = shaper::schedule_emission(&shaper::tokenize(text, q.language), &item.qos);
        let (_, body) = call(&app, "GET", &format!("/sessions/{}/items/{idx}/stream", plan.session_id), None).await;
        let events = ndjson(&body);
        let streamed: Vec<&str> = events.iter().filter_map(|e| e["token"].as_str()).collect();
        let scheduled: Vec<&str> = schedule.items.iter().map(|t| t.token.as_str()).collect();
        assert_eq!(streamed, scheduled);
        assert_eq!(streamed.concat(), *text);
    }
}

fn store_dir(dir: &Path) -> PathBuf {
    dir.join("store")
}

#[tokio::test]
async fn replay_restores_state() {
    let dir = tempfile::tempdir().unwrap();
    let store = store_dir(dir.path());
    let (before, ratings, sid) = {
        let svc = open(&store);
        let app = router(svc.clone());
        let a = new_rater(&app).await;
        let b = new_rater(&app).await;
        new_session(&app, &a).await;
        let plan = new_session(&app, &b).await;
        new_session(&app, &a).await;
        for i in 0..3 {
            call(&app, "GET", &format!("/sessions/{}/items/{i}/stream", plan.session_id), None).await;
            let (s, _) = call(&app, "POST", &format!("/sessions/{}/items/{i}/rating", plan.session_id), rating(3, 4, 5)).await;
            assert_eq!(s, StatusCode::CREATED);
        }
        // streamed but not rated
        call(&app, "GET", &format!("/sessions/{}/items/3/stream", plan.session_id), None).await;
        (svc.planner(), svc.ratings(), plan.session_id)
    };

    // a crash mid-append leaves a torn line behind
    use std::io::Write;
    let mut f = std::fs::OpenOptions::new().append(true).open(store.join("plans.jsonl")).unwrap();
    f.write_all(br#"{"session_id":"s9999","rater_id":"#).unwrap();
    drop(f);

    let svc = open(&store);
    assert_eq!(svc.planner(), before);
    assert_eq!(svc.ratings(), ratings);
    assert_eq!(svc.rater("r000001").unwrap().sessions_completed, 2);
    let app = router(svc);
    let (s, v) = call_json(&app, "POST", &format!("/sessions/{sid}/items/0/rating"), rating(1, 1, 1)).await;
    assert_eq!((s, v["error"].as_str()), (StatusCode::CONFLICT, Some("duplicate-submission")));
    let (s, _) = call(&app, "POST", &format!("/sessions/{sid}/items/3/rating"), rating(1, 1, 1)).await;
    assert_eq!(s, StatusCode::CREATED, "streamed flag survives a restart");
    // ids continue after the replayed ones
    assert_eq!(new_rater(&app).await, "r000003");
    assert_eq!(new_session(&app, "r000003").await.session_id, "s000004");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_sessions_stay_balanced() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path());
    let app = router(svc.clone());
    let mut raters = Vec::new();
    for _ in 0..12 {
        raters.push(new_rater(&app).await);
    }
    let mut tasks = Vec::new();
    for r in raters {
        for _ in 0..3 {
            let app = app.clone();
            let r = r.clone();
            tasks.push(tokio::spawn(async move { new_session(&app, &r).await }));
        }
    }
    let mut ids = std::collections::BTreeSet::new();
    for t in tasks {
        assert!(ids.insert(t.await.unwrap().session_id));
    }
    assert_eq!(ids.len(), 36);
    let planner = svc.planner();
    let qos = Grid::standard().qos_points();
    for q in sample_fixture().items() {
        let counts = planner.counter().qos_counts(&q.question_id, &qos);
        assert_eq!(counts.iter().sum::<u64>(), 36);
        assert!(tokenqoe_core::assign::spread(&counts) <= 1, "{counts:?}");
    }
    // the store replays to the same counters
    drop(app);
    drop(svc);
    assert_eq!(open(dir.path()).planner(), planner);
}
