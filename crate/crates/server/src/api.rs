//! HTTP routes under `/v1`. See `docs/protocol.md` for the full contract.

use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;

use dccflow::pipeline::Event;

use crate::error::ApiError;
use crate::service::{CreateRequest, SelectionRequest, SessionService, Slot};

pub type AppState = Arc<SessionService>;

pub fn router(service: AppState, app_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/v1/health", get(|| async { Json(json!({"status": "ok"})) }))
        .route("/v1/sessions", post(create_session).get(list_sessions))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/candidates", get(get_candidates))
        .route("/v1/sessions/{id}/selection", post(post_selection))
        .route("/v1/sessions/{id}/finalize", post(post_finalize))
        .route("/v1/sessions/{id}/scene/{candidate_id}", get(get_scene))
        .route("/v1/sessions/{id}/thumbnail/{candidate_id}", get(get_thumbnail))
        .route("/v1/sessions/{id}/events", get(stream_events))
        .fallback(|| async { ApiError::new(404, "not_found", "no such route") })
        .with_state(service);
    match app_dir {
        Some(dir) => api.nest_service("/app", tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

/// JSON bodies are parsed here so malformed input gets the API's error
/// shape instead of the framework's plain-text rejection.
fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(400, "invalid_body", e.to_string()))
}

fn session_json(slot: &Slot) -> serde_json::Value {
    slot.read(|r| serde_json::to_value(r.view()).expect("session serializes"))
}

async fn create_session(State(svc): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateRequest = parse(&body)?;
    let slot = svc.create(req).await?;
    Ok((StatusCode::CREATED, Json(session_json(&slot))).into_response())
}

async fn list_sessions(State(svc): State<AppState>) -> Json<serde_json::Value> {
    Json(json!({ "sessions": svc.ids() }))
}

async fn get_session(State(svc): State<AppState>, Path(id): Path<String>) -> Result<Json<serde_json::Value>, ApiError> {
    let slot = svc.slot(&id)?;
    Ok(Json(session_json(&slot)))
}

async fn get_candidates(
    State(svc): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let slot = svc.slot(&id)?;
    Ok(Json(slot.read(|r| {
        let l = &r.core.loop_state;
        json!({
            "round": l.round,
            "status": l.status,
            "selected_ids": l.selected_ids,
            "candidates": l.current,
        })
    })))
}

async fn post_selection(
    State(svc): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<serde_json::Value>, ApiError> {
    svc.slot(&id)?;
    let req: SelectionRequest = parse(&body)?;
    let slot = svc.select(&id, req).await?;
    Ok(Json(slot.read(|r| serde_json::to_value(&r.core.loop_state).expect("loop serializes"))))
}

async fn post_finalize(State(svc): State<AppState>, Path(id): Path<String>) -> Result<Json<serde_json::Value>, ApiError> {
    let slot = svc.finalize(&id).await?;
    Ok(Json(session_json(&slot)))
}

fn candidate_lookup<R>(
    slot: &Slot,
    candidate_id: &str,
    f: impl FnOnce(&crate::service::SessionRecord) -> Option<R>,
) -> Result<R, ApiError> {
    slot.read(|r| {
        let known = r.core.loop_state.candidate(candidate_id).is_some()
            || r.core.loop_state.history.iter().any(|h| h.selection.selected_ids.contains(candidate_id));
        match f(r) {
            Some(v) => Ok(v),
            None if known => Err(ApiError::new(404, "scene_not_built", format!("candidate '{candidate_id}' has no scene yet"))),
            None => Err(ApiError::new(404, "unknown_candidate", format!("no candidate '{candidate_id}'"))),
        }
    })
}

async fn get_scene(
    State(svc): State<AppState>,
    Path((id, candidate_id)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let slot = svc.slot(&id)?;
    let snapshot = candidate_lookup(&slot, &candidate_id, |r| r.core.scene(&candidate_id).map(str::to_string))?;
    Ok(([(header::CONTENT_TYPE, "application/json")], snapshot).into_response())
}

async fn get_thumbnail(
    State(svc): State<AppState>,
    Path((id, candidate_id)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let slot = svc.slot(&id)?;
    let svg = slot
        .read(|r| r.core.loop_state.candidate(&candidate_id).map(|c| c.thumbnail.clone()))
        .ok_or_else(|| ApiError::new(404, "unknown_candidate", format!("no candidate '{candidate_id}' in the current round")))?;
    Ok(([(header::CONTENT_TYPE, "image/svg+xml")], svg).into_response())
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    /// First event sequence number to send.
    since: Option<u64>,
}

/// Server-sent events, one JSON object per event. Resumes after the
/// `Last-Event-ID` header or from `?since=`; ends after the `done` event.
async fn stream_events(
    State(svc): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
    headers: HeaderMap,
) -> Result<Sse<impl Stream<Item = Result<SseEvent, Infallible>>>, ApiError> {
    let slot = svc.slot(&id)?;
    let resume = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.parse::<u64>().ok())
        .map(|last| last + 1);
    let start = resume.or(q.since).unwrap_or(0);
    Ok(Sse::new(event_stream(slot, start)).keep_alive(KeepAlive::default()))
}

pub fn event_stream(slot: Arc<Slot>, start: u64) -> impl Stream<Item = Result<SseEvent, Infallible>> {
    let rx = slot.subscribe();
    stream::unfold((slot, rx, start, false), |(slot, mut rx, next, finished)| async move {
        if finished {
            return None;
        }
        loop {
            rx.borrow_and_update();
            let pending = slot.events_since(next);
            if !pending.is_empty() {
                let next = next + pending.len() as u64;
                let finished = pending.iter().any(|e| matches!(e.event, Event::Done { .. }));
                return Some((pending, (slot, rx, next, finished)));
            }
            if rx.changed().await.is_err() {
                return None;
            }
        }
    })
    .flat_map(|batch| {
        stream::iter(batch.into_iter().map(|e| {
            Ok(SseEvent::default()
                .id(e.seq.to_string())
                .event(e.event.name())
                .data(serde_json::to_string(&e).expect("event serializes")))
        }))
    })
}
