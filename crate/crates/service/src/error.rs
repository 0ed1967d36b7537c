//! Stage-tagged JSON error bodies.

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use peripartum_sql::pipeline::PipelineError;
use peripartum_sql::stored::StoredError;
use serde_json::{json, Value};

/// An error response: `{"error": {"stage", "message", "detail"}}`.
#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub stage: &'static str,
    pub message: String,
    pub detail: Value,
}

impl ApiError {
    pub fn new(status: StatusCode, stage: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, stage, message: message.into(), detail: Value::Null }
    }

    pub fn bad_request(stage: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, stage, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = detail;
        self
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        ApiError::bad_request(e.stage().as_str(), e.to_string()).with_detail(e.detail())
    }
}

impl From<StoredError> for ApiError {
    fn from(e: StoredError) -> Self {
        match e {
            StoredError::Pipeline(p) => p.into(),
            StoredError::UnknownQuery(_) => ApiError::new(StatusCode::NOT_FOUND, "query", e.to_string()),
            StoredError::UnknownParam { .. } | StoredError::InvalidParam { .. } => {
                ApiError::bad_request("params", e.to_string())
            }
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(stage = self.stage, "{}", self.message);
        }
        let body = json!({"error": {"stage": self.stage, "message": self.message, "detail": self.detail}});
        (self.status, Json(body)).into_response()
    }
}
