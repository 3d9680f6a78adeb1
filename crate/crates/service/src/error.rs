use axum::http::StatusCode;
use selfcheck_core::annotation::AnnotationError;
use selfcheck_core::consistency::ConsistencyError;
use selfcheck_core::gateway::GatewayError;
use selfcheck_core::text::TextError;
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ServiceError {
    #[error("{0}")]
    Validation(String),
    #[error("unknown {kind} {id:?}")]
    NotFound { kind: &'static str, id: String },
    /// The model produced no usable question; the client may retry.
    #[error("no usable question: {0}")]
    Question(String),
    #[error("question cannot be answered from the presented text: {0}")]
    Unanswerable(String),
    #[error("model backend failed: {0}")]
    Backend(String),
    #[error("session store: {0}")]
    Store(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::Validation(_) => StatusCode::BAD_REQUEST,
            ServiceError::NotFound { .. } => StatusCode::NOT_FOUND,
            ServiceError::Question(_) | ServiceError::Unanswerable(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            ServiceError::Backend(_) => StatusCode::BAD_GATEWAY,
            ServiceError::Store(_) | ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::Validation(_) => "validation_error",
            ServiceError::NotFound { .. } => "not_found",
            ServiceError::Question(_) => "malformed_question",
            ServiceError::Unanswerable(_) => "unanswerable",
            ServiceError::Backend(_) => "backend_error",
            ServiceError::Store(_) => "store_error",
            ServiceError::Internal(_) => "internal_error",
        }
    }

    pub fn detail(&self) -> Value {
        match self {
            ServiceError::NotFound { kind, id } => json!({ "kind": kind, "id": id }),
            ServiceError::Question(_) | ServiceError::Backend(_) => json!({ "retry": true }),
            _ => Value::Null,
        }
    }

    /// The `{code, message, detail}` error body.
    pub fn body(&self) -> Value {
        json!({ "code": self.code(), "message": self.to_string(), "detail": self.detail() })
    }
}

impl From<GatewayError> for ServiceError {
    fn from(e: GatewayError) -> Self {
        if e.is_backend_failure() {
            ServiceError::Backend(e.to_string())
        } else {
            match e {
                GatewayError::InvalidRequest(m) => ServiceError::Validation(m),
                e => ServiceError::Internal(e.to_string()),
            }
        }
    }
}

impl From<TextError> for ServiceError {
    fn from(e: TextError) -> Self {
        match e {
            TextError::Gateway(g) => g.into(),
            TextError::MalformedQuestion { completion } => ServiceError::Question(completion),
            e @ (TextError::Span { .. } | TextError::Empty(_)) => {
                ServiceError::Validation(e.to_string())
            }
            e => ServiceError::Internal(e.to_string()),
        }
    }
}

impl From<ConsistencyError> for ServiceError {
    fn from(e: ConsistencyError) -> Self {
        match e {
            ConsistencyError::Precondition(m) => ServiceError::Validation(m),
            ConsistencyError::Gateway(g) | ConsistencyError::Sample { source: g, .. } => g.into(),
            ConsistencyError::Text(t) => t.into(),
            e => ServiceError::Internal(e.to_string()),
        }
    }
}

impl From<AnnotationError> for ServiceError {
    fn from(e: AnnotationError) -> Self {
        match e {
            AnnotationError::Unknown { kind, id } => ServiceError::NotFound { kind, id },
            e => ServiceError::Validation(e.to_string()),
        }
    }
}
