use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use serde::Serialize;

use rlo_core::curation::CurationError;
use rlo_core::export::ExportError;
use rlo_core::import::ImportError;
use rlo_core::ops::{ParseError, ScriptError};
use rlo_core::store::StoreError;

use crate::canonical_json;

/// Error payload: `{"error": {"rule", "message", "path"?, ...}}`.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorBody {
    pub rule: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, rule: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                rule: rule.into(),
                message: message.into(),
                path: None,
                index: None,
                line: None,
            },
        }
    }

    pub fn with_path(mut self, path: Option<String>) -> Self {
        self.body.path = path;
        self
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not-found", format!("unknown {what} {id:?}"))
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad-request", message)
    }

    pub fn unprocessable(rule: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, rule, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        #[derive(Serialize)]
        struct Wrapper<'a> {
            error: &'a ErrorBody,
        }
        canonical_json(self.status, &Wrapper { error: &self.body })
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        if e.is_io() {
            ApiError::internal(e.to_string())
        } else {
            ApiError::unprocessable("bad-store", e.to_string())
        }
    }
}

impl From<CurationError> for ApiError {
    fn from(e: CurationError) -> Self {
        let status = match e {
            CurationError::UnknownDocument(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError::new(status, e.rule(), e.to_string()).with_path(e.path())
    }
}

impl From<ImportError> for ApiError {
    fn from(e: ImportError) -> Self {
        let status = match e {
            ImportError::Unreachable(_) => StatusCode::BAD_GATEWAY,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        let path = match &e {
            ImportError::KindConflict { path, .. } => Some(path.to_string()),
            _ => None,
        };
        ApiError::new(status, e.rule(), e.to_string()).with_path(path)
    }
}

impl From<ExportError> for ApiError {
    fn from(e: ExportError) -> Self {
        let path = match &e {
            ExportError::UnknownPath(p) => Some(p.to_string()),
            _ => None,
        };
        ApiError::unprocessable(e.rule(), e.to_string()).with_path(path)
    }
}

impl From<ParseError> for ApiError {
    fn from(e: ParseError) -> Self {
        let mut err = ApiError::unprocessable("parse-error", e.to_string());
        err.body.line = Some(e.line);
        err
    }
}

impl From<ScriptError> for ApiError {
    fn from(e: ScriptError) -> Self {
        match e {
            ScriptError::InvalidInput(report) => {
                ApiError::unprocessable("invalid-collection", report.to_string())
            }
            ScriptError::Op {
                index, op, error, ..
            } => {
                let mut err = ApiError::unprocessable(error.rule(), format!("op {index} ({op}): {error}"))
                    .with_path(error.path().map(ToString::to_string));
                err.body.index = Some(index);
                err
            }
        }
    }
}
