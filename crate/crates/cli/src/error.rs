use axum::extract::rejection::JsonRejection;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use walle_core::dialogue::DialogueError;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("no session {0}")]
    UnknownSession(String),
    #[error("{0}")]
    BadRequest(String),
    #[error(transparent)]
    Dialogue(#[from] DialogueError),
    #[error("{0}")]
    Internal(String),
}

/// Wire form of every error response.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

impl ApiError {
    pub fn status_and_code(&self) -> (StatusCode, &'static str) {
        use DialogueError as D;
        match self {
            ApiError::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
            ApiError::BadRequest(_) => (StatusCode::BAD_REQUEST, "bad_request"),
            ApiError::Internal(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
            ApiError::Dialogue(e) => match e {
                D::IllegalTransition { .. } => (StatusCode::CONFLICT, "illegal_state"),
                D::NotRequester { .. } => (StatusCode::CONFLICT, "not_requester"),
                D::UnknownUser(_) => (StatusCode::BAD_REQUEST, "unknown_user"),
                D::InvalidUsers(_) => (StatusCode::BAD_REQUEST, "invalid_users"),
                D::EmptyUtterance => (StatusCode::BAD_REQUEST, "empty_utterance"),
                D::Chat(_) => (StatusCode::BAD_GATEWAY, "backend_error"),
                D::Scene(_) | D::BackoffMismatch => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
            },
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::BadRequest(r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code) = self.status_and_code();
        let body = ErrorBody {
            code: code.into(),
            message: self.to_string(),
        };
        (status, Json(body)).into_response()
    }
}
