use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use serde_json::{json, Value};

use dccflow::agents::AgentError;
use dccflow::feedback::{FinalizeError, LoopError};
use dccflow::pipeline::PipelineError;

/// Every error response carries a stable symbolic `code`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    pub code: &'static str,
    pub message: String,
    #[serde(skip)]
    pub http_status: u16,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub current_round: Option<u32>,
}

impl ApiError {
    pub fn new(http_status: u16, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            http_status,
            current_round: None,
        }
    }

    pub fn unknown_session(id: &str) -> Self {
        Self::new(404, "unknown_session", format!("no session '{id}'"))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(500, "internal", message)
    }

    pub fn body(&self) -> Value {
        json!({ "error": self })
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}: {}", self.http_status, self.code, self.message)
    }
}

impl std::error::Error for ApiError {}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.http_status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.body())).into_response()
    }
}

fn agent(e: &AgentError) -> ApiError {
    match e {
        AgentError::Provider(p) => ApiError::new(503, "provider_unavailable", p.to_string()),
        other => ApiError::new(502, "provider_protocol", other.to_string()),
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let msg = e.to_string();
        match &e {
            PipelineError::EmptyPrompt => ApiError::new(400, "empty_prompt", msg),
            PipelineError::BadCount(_) | PipelineError::Loop(LoopError::BadCount) => {
                ApiError::new(400, "bad_candidate_count", msg)
            }
            PipelineError::StaleRound { current, .. } => ApiError {
                current_round: Some(*current),
                ..ApiError::new(422, "stale_round", msg)
            },
            PipelineError::Loop(LoopError::NotCollecting(_)) => ApiError::new(409, "not_collecting", msg),
            PipelineError::Loop(LoopError::UnknownCandidate(_) | LoopError::ReasonOnSelected(_)) => {
                ApiError::new(422, "invalid_selection", msg)
            }
            PipelineError::Loop(LoopError::Agent(a)) => agent(a),
            PipelineError::Finalize(FinalizeError::NotFinalizing(_)) => ApiError::new(409, "not_finalizing", msg),
            PipelineError::Finalize(FinalizeError::Agent(a)) => agent(a),
            PipelineError::Finalize(FinalizeError::Connect(_) | FinalizeError::Execution { .. }) => {
                ApiError::new(502, "dcc_unavailable", msg)
            }
        }
    }
}
