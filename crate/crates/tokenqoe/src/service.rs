//! HTTP rating service.
//!
//! All mutations (registration, planning, stream completion, rating
//! submission) go through one mutex, which is the single commit point for
//! the store and the assignment counters. Each event is persisted before
//! the in-memory state changes, so a restart that replays the store ends
//! in the same state.

use std::collections::{BTreeMap, BTreeSet};
use std::convert::Infallible;
use std::path::Path;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::body::{Body, Bytes};
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use tokio::sync::mpsc;

use tokenqoe_core::assign::{Planner, SessionPlan};
use tokenqoe_core::model::{validate_scores, ContentFixture, Grid, RaterProfile, RatingRecord, Scores};
use tokenqoe_core::shaper::{self, ClockKind, SinkClosed, StreamEvent, VirtualClock};

use crate::clock::WallClock;
use crate::error::Error;
use crate::store::{Snapshot, Store, StreamedItem};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub fixture: ContentFixture,
    pub grid: Grid,
    /// Base seed; session `n` plans with a seed derived from it and `n`.
    pub seed: u64,
    pub clock: ClockKind,
}

/// Error body `{"error": code, "detail": text}` with a status code.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub error: Error,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    detail: &'a str,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody { error: self.error.code, detail: &self.error.detail };
        (self.status, Json(body)).into_response()
    }
}

fn status_of(code: &str) -> StatusCode {
    match code {
        "unknown-rater" | "unknown-session" | "bad-index" => StatusCode::NOT_FOUND,
        "session-limit-exceeded" | "exhausted" | "already-rated" | "duplicate-submission" | "not-streamed" => {
            StatusCode::CONFLICT
        }
        "io-error" | "internal" => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::BAD_REQUEST,
    }
}

impl From<Error> for ApiError {
    fn from(error: Error) -> Self {
        Self { status: status_of(error.code), error }
    }
}

fn api_err(code: &'static str, detail: impl Into<String>) -> ApiError {
    Error::new(code, detail).into()
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug)]
struct Inner {
    store: Store,
    planner: Planner,
    raters: BTreeMap<String, RaterProfile>,
    sessions: BTreeMap<String, SessionPlan>,
    streamed: BTreeSet<(String, usize)>,
    rated: BTreeSet<(String, usize)>,
    ratings: Vec<RatingRecord>,
    rater_seq: u64,
    session_seq: u64,
}

/// Shared service state.
#[derive(Debug)]
pub struct Service {
    config: ServiceConfig,
    inner: Mutex<Inner>,
}

fn session_seed(base: u64, n: u64) -> u64 {
    // splitmix64 finalizer so consecutive sessions get unrelated streams
    let mut z = base.wrapping_add(n.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn item_index(plan: &SessionPlan, question_id: &str) -> Option<usize> {
    plan.items.iter().position(|i| i.question_id == question_id)
}

impl Service {
    /// Opens the store under `dir` and rebuilds state by replaying it.
    pub fn open(config: ServiceConfig, dir: &Path) -> Result<Arc<Self>, Error> {
        config.grid.validate()?;
        let (store, snap) = Store::open(dir)?;
        let questions = config.fixture.items().iter().map(|i| i.question_id.clone()).collect();
        let mut inner = Inner {
            store,
            planner: Planner::new(questions, &config.grid),
            raters: BTreeMap::new(),
            sessions: BTreeMap::new(),
            streamed: BTreeSet::new(),
            rated: BTreeSet::new(),
            ratings: Vec::new(),
            rater_seq: 0,
            session_seq: 0,
        };
        let Snapshot { raters, plans, streamed, ratings } = snap;
        for p in raters {
            inner.rater_seq += 1;
            inner.raters.insert(p.rater_id.clone(), p);
        }
        for plan in plans {
            inner.planner.apply(&plan);
            inner.session_seq += 1;
            if let Some(r) = inner.raters.get_mut(&plan.rater_id) {
                r.sessions_completed += 1;
            }
            inner.sessions.insert(plan.session_id.clone(), plan);
        }
        for s in streamed {
            inner.streamed.insert((s.session_id, s.item_index));
        }
        for r in ratings {
            let idx = inner.sessions.get(&r.session_id).and_then(|p| item_index(p, &r.question_id));
            match idx {
                Some(i) => {
                    inner.rated.insert((r.session_id.clone(), i));
                }
                None => log::warn!("rating for unknown item {}/{} in store", r.session_id, r.question_id),
            }
            inner.ratings.push(r);
        }
        log::info!(
            "store {} replayed: {} raters, {} sessions, {} ratings",
            dir.display(),
            inner.raters.len(),
            inner.sessions.len(),
            inner.ratings.len()
        );
        Ok(Arc::new(Self { config, inner: Mutex::new(inner) }))
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        // a panic while holding the lock cannot leave half-applied state
        // because every event is persisted before memory is touched
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn register_rater(&self, mut profile: RaterProfile) -> Result<String, Error> {
        profile.validate()?;
        let mut inner = self.lock();
        let id = format!("r{:06}", inner.rater_seq + 1);
        profile.rater_id = id.clone();
        profile.sessions_completed = 0;
        inner.store.append_rater(&profile)?;
        inner.rater_seq += 1;
        inner.raters.insert(id.clone(), profile);
        Ok(id)
    }

    pub fn create_session(&self, rater_id: &str, now: DateTime<Utc>) -> Result<SessionPlan, Error> {
        let mut inner = self.lock();
        if !inner.raters.contains_key(rater_id) {
            return Err(Error::new("unknown-rater", rater_id));
        }
        let n = inner.session_seq;
        let session_id = format!("s{:06}", n + 1);
        let plan = inner.planner.plan(rater_id, &session_id, session_seed(self.config.seed, n), now)?;
        inner.store.append_plan(&plan)?;
        inner.planner.apply(&plan);
        inner.session_seq += 1;
        if let Some(r) = inner.raters.get_mut(rater_id) {
            r.sessions_completed += 1;
        }
        inner.sessions.insert(session_id, plan.clone());
        Ok(plan)
    }

    /// Answer text, language and QoS of an item that may be streamed.
    fn stream_source(&self, session_id: &str, index: usize) -> Result<(String, tokenqoe_core::model::Language, tokenqoe_core::QosConfig), Error> {
        let inner = self.lock();
        let plan = inner.sessions.get(session_id).ok_or_else(|| Error::new("unknown-session", session_id))?;
        let item = plan
            .items
            .get(index)
            .ok_or_else(|| Error::new("bad-index", format!("{index} (session has {} items)", plan.items.len())))?;
        if inner.rated.contains(&(session_id.to_owned(), index)) {
            return Err(Error::new("already-rated", format!("{session_id}/{index}")));
        }
        let q = self
            .config
            .fixture
            .get(&item.question_id)
            .ok_or_else(|| Error::new("unknown-question", item.question_id.clone()))?;
        let v = q
            .variant(item.content)
            .ok_or_else(|| Error::new("bad-fixture", format!("no variant for {}", item.question_id)))?;
        Ok((v.answer_text.clone(), q.language, item.qos))
    }

    fn mark_streamed(&self, session_id: &str, index: usize) -> Result<(), Error> {
        let mut inner = self.lock();
        let key = (session_id.to_owned(), index);
        if inner.streamed.contains(&key) {
            return Ok(());
        }
        inner.store.append_streamed(&StreamedItem { session_id: session_id.into(), item_index: index })?;
        inner.streamed.insert(key);
        Ok(())
    }

    pub fn submit_rating(&self, session_id: &str, index: usize, scores: Scores, now: DateTime<Utc>) -> Result<RatingRecord, Error> {
        validate_scores(&scores)?;
        let mut inner = self.lock();
        let plan = inner.sessions.get(session_id).ok_or_else(|| Error::new("unknown-session", session_id))?;
        let item = plan
            .items
            .get(index)
            .ok_or_else(|| Error::new("bad-index", format!("{index} (session has {} items)", plan.items.len())))?;
        let key = (session_id.to_owned(), index);
        if inner.rated.contains(&key) {
            return Err(Error::new("duplicate-submission", format!("{session_id}/{index}")));
        }
        if !inner.streamed.contains(&key) {
            return Err(Error::new("not-streamed", format!("{session_id}/{index}")));
        }
        let category = self
            .config
            .fixture
            .get(&item.question_id)
            .map(|q| q.category)
            .ok_or_else(|| Error::new("unknown-question", item.question_id.clone()))?;
        let record = RatingRecord {
            session_id: session_id.into(),
            rater_id: plan.rater_id.clone(),
            question_id: item.question_id.clone(),
            category,
            content: item.content,
            qos: item.qos,
            scores,
            timestamp: DateTime::from_timestamp_millis(now.timestamp_millis()).unwrap_or(now),
        };
        inner.store.append_rating(&record)?;
        inner.rated.insert(key);
        inner.ratings.push(record.clone());
        Ok(record)
    }

    pub fn ratings(&self) -> Vec<RatingRecord> {
        self.lock().ratings.clone()
    }

    pub fn planner(&self) -> Planner {
        self.lock().planner.clone()
    }

    pub fn rater(&self, id: &str) -> Option<RaterProfile> {
        self.lock().raters.get(id).cloned()
    }
}

#[derive(Debug, Deserialize)]
struct SessionRequest {
    rater_id: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RaterReceipt {
    pub rater_id: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RatingRequest {
    pub scores: Scores,
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| {
        // unknown dimension keys and non-integer scores surface here
        let msg = e.to_string();
        let code = if msg.contains("missing field") { "missing-field" } else { "bad-request" };
        api_err(code, msg)
    })
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({"status": "ok"}))
}

async fn post_rater(State(svc): State<Arc<Service>>, body: Bytes) -> ApiResult<(StatusCode, Json<RaterReceipt>)> {
    let profile: RaterProfile = parse_body(&body)?;
    let rater_id = svc.register_rater(profile)?;
    Ok((StatusCode::CREATED, Json(RaterReceipt { rater_id })))
}

async fn post_session(State(svc): State<Arc<Service>>, body: Bytes) -> ApiResult<(StatusCode, Json<SessionPlan>)> {
    let req: SessionRequest = parse_body(&body)?;
    let plan = svc.create_session(&req.rater_id, Utc::now())?;
    Ok((StatusCode::CREATED, Json(plan)))
}

fn event_line(e: &StreamEvent) -> Bytes {
    let mut v = serde_json::to_vec(e).expect("events serialize");
    v.push(b'\n');
    Bytes::from(v)
}

fn parse_index(raw: &str) -> ApiResult<usize> {
    raw.parse().map_err(|_| api_err("bad-index", raw.to_owned()))
}

async fn get_stream(State(svc): State<Arc<Service>>, UrlPath((sid, n)): UrlPath<(String, String)>) -> ApiResult<Response> {
    let n = parse_index(&n)?;
    let (text, language, qos) = svc.stream_source(&sid, n)?;
    let tokens = shaper::tokenize(&text, language);
    let schedule = shaper::schedule_emission(&tokens, &qos);
    let (tx, rx) = mpsc::channel::<Bytes>(64);
    let clock = svc.config.clock;
    tokio::task::spawn_blocking(move || {
        let mut sink = |index: usize, token: &str| {
            tx.blocking_send(event_line(&StreamEvent::Token { index, token: token.into() })).map_err(|_| SinkClosed)
        };
        let played = match clock {
            ClockKind::Virtual => shaper::play(&schedule, &VirtualClock, &mut sink),
            ClockKind::Wall => shaper::play(&schedule, &WallClock, &mut sink),
        };
        match played {
            Ok(trace) => {
                if let Err(e) = svc.mark_streamed(&sid, n) {
                    log::error!("could not record stream completion of {sid}/{n}: {e}");
                    return;
                }
                if clock == ClockKind::Wall {
                    log::debug!("{sid}/{n}: p95 lateness {:.4}s", crate::clock::p95(&trace.lateness()));
                }
                let _ = tx.blocking_send(event_line(&StreamEvent::done(trace.len())));
            }
            Err(e) => log::info!("{sid}/{n}: stream ended early: {e}"),
        }
    });
    let stream = futures_util::stream::unfold(rx, |mut rx| async move {
        rx.recv().await.map(|b| (Ok::<_, Infallible>(b), rx))
    });
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], Body::from_stream(stream)).into_response())
}

async fn post_rating(
    State(svc): State<Arc<Service>>,
    UrlPath((sid, n)): UrlPath<(String, String)>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<RatingRecord>)> {
    let n = parse_index(&n)?;
    let req: RatingRequest = parse_body(&body)?;
    let record = svc.submit_rating(&sid, n, req.scores, Utc::now())?;
    Ok((StatusCode::CREATED, Json(record)))
}

async fn export_ratings(State(svc): State<Arc<Service>>) -> Response {
    let mut out = Vec::new();
    for r in svc.ratings() {
        serde_json::to_writer(&mut out, &r).expect("records serialize");
        out.push(b'\n');
    }
    ([(header::CONTENT_TYPE, "application/x-ndjson")], out).into_response()
}

pub fn router(svc: Arc<Service>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/raters", post(post_rater))
        .route("/sessions", post(post_session))
        .route("/sessions/{id}/items/{n}/stream", get(get_stream))
        .route("/sessions/{id}/items/{n}/rating", post(post_rating))
        .route("/export/ratings", get(export_ratings))
        .with_state(svc)
}
