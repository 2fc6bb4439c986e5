use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use masgraph::abstraction::AbsError;
use masgraph::kernel::KernelError;
use masgraph::textlang::{LoadError, ParseError, TypeError};
use masgraph::votecorpus::VoteError;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("unknown {0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    /// Rejected input. Parse and type errors carry their position.
    #[error("{message}")]
    Invalid {
        kind: &'static str,
        message: String,
        line: Option<usize>,
        col: Option<usize>,
    },
}

impl ApiError {
    pub fn invalid(message: impl Into<String>) -> ApiError {
        ApiError::Invalid {
            kind: "invalid",
            message: message.into(),
            line: None,
            col: None,
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Invalid { .. } => StatusCode::UNPROCESSABLE_ENTITY,
        }
    }

    pub fn body(&self) -> ErrorBody {
        let (kind, line, col) = match self {
            ApiError::NotFound(_) => ("not_found", None, None),
            ApiError::Conflict(_) => ("conflict", None, None),
            ApiError::Invalid { kind, line, col, .. } => (*kind, *line, *col),
        };
        ErrorBody {
            error: kind,
            message: match self {
                ApiError::Invalid { message, .. } => message.clone(),
                e => e.to_string(),
            },
            line,
            col,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ErrorBody {
    pub error: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub col: Option<usize>,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(self.body())).into_response()
    }
}

impl From<ParseError> for ApiError {
    fn from(e: ParseError) -> Self {
        ApiError::Invalid {
            kind: "parse",
            message: e.message,
            line: Some(e.line),
            col: Some(e.col),
        }
    }
}

impl From<TypeError> for ApiError {
    fn from(e: TypeError) -> Self {
        ApiError::Invalid {
            kind: "type",
            message: e.message,
            line: Some(e.line),
            col: Some(e.col),
        }
    }
}

impl From<LoadError> for ApiError {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Parse(p) => p.into(),
            LoadError::Type(t) => t.into(),
        }
    }
}

impl From<KernelError> for ApiError {
    fn from(e: KernelError) -> Self {
        ApiError::Invalid {
            kind: "kernel",
            message: e.to_string(),
            line: None,
            col: None,
        }
    }
}

impl From<VoteError> for ApiError {
    fn from(e: VoteError) -> Self {
        match e {
            VoteError::Load(l) => l.into(),
            VoteError::Parse(p) => p.into(),
            e => ApiError::invalid(e.to_string()),
        }
    }
}

impl From<AbsError> for ApiError {
    fn from(e: AbsError) -> Self {
        match e {
            AbsError::Parse(p) => p.into(),
            AbsError::Type(t) => t.into(),
            e => ApiError::Invalid {
                kind: "abstraction",
                message: e.to_string(),
                line: None,
                col: None,
            },
        }
    }
}
