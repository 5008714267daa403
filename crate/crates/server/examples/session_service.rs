//! Drives the session API in process: create a session, answer two rounds,
//! then read the finished session and its event stream.
//!
//! cargo run -p dccflow-server --example session_service

use std::sync::Arc;

use axum::body::Body;
use axum::http::Request;
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use dccflow::agents::ProceduralProvider;
use dccflow::pipeline::Services;
use dccflow_server::api::router;
use dccflow_server::service::{ServiceOptions, SessionService};

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (u16, String) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status().as_u16();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8_lossy(&bytes).into_owned())
}

#[tokio::main]
async fn main() {
    let svc = SessionService::new(Services::new(Arc::new(ProceduralProvider)), ServiceOptions::default()).unwrap();
    let app = router(Arc::new(svc), None);

    let (status, body) = call(&app, "POST", "/v1/sessions", Some(json!({"prompt": "a park bench", "n": 3}))).await;
    let session: Value = serde_json::from_str(&body).unwrap();
    let id = session["id"].as_str().unwrap().to_string();
    println!("POST /v1/sessions -> {status}, session {id}");

    let base = format!("/v1/sessions/{id}");
    let first = json!({"round": 1, "selected_ids": ["r1s2"], "rejection_reasons": {"r1s1": "too long"}});
    let (status, body) = call(&app, "POST", &format!("{base}/selection"), Some(first)).await;
    let state: Value = serde_json::from_str(&body).unwrap();
    println!("round 1 selection -> {status}, now round {}", state["round"]);

    let (status, body) = call(&app, "POST", &format!("{base}/selection"), Some(json!({"round": 1, "selected_ids": []}))).await;
    println!("stale round -> {status} {body}");

    let ids: Vec<Value> = state["current"].as_array().unwrap().iter().map(|c| c["id"].clone()).collect();
    let (status, body) = call(&app, "POST", &format!("{base}/selection"), Some(json!({"round": 2, "selected_ids": ids}))).await;
    let state: Value = serde_json::from_str(&body).unwrap();
    println!("round 2 selection -> {status}, status {}", state["status"]);

    let (_, body) = call(&app, "GET", &base, None).await;
    let session: Value = serde_json::from_str(&body).unwrap();
    for b in session["reports"].as_array().unwrap() {
        let steps = b["report"]["steps"].as_array().unwrap().len();
        println!("built {} in {steps} steps", b["candidate_id"]);
    }

    let (_, stream) = call(&app, "GET", &format!("{base}/events"), None).await;
    for line in stream.lines().filter(|l| l.starts_with("event: ")) {
        println!("{line}");
    }
}
