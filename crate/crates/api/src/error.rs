use axum::extract::rejection::{JsonRejection, PathRejection, QueryRejection};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use odes_core::{ErrorKind, OdesError};
use serde::Serialize;

/// Error body shared by every route.
#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub code: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError(pub OdesError);

impl From<OdesError> for ApiError {
    fn from(e: OdesError) -> Self {
        ApiError(e)
    }
}

fn bad_request(message: String) -> ApiError {
    ApiError(OdesError::new(ErrorKind::Validation, "bad_request", message))
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        bad_request(r.body_text())
    }
}

impl From<PathRejection> for ApiError {
    fn from(r: PathRejection) -> Self {
        bad_request(r.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        bad_request(r.body_text())
    }
}

pub fn status_for(kind: ErrorKind, code: &str) -> StatusCode {
    match kind {
        ErrorKind::Validation if code == "bad_request" => StatusCode::BAD_REQUEST,
        ErrorKind::Validation => StatusCode::UNPROCESSABLE_ENTITY,
        ErrorKind::NotFound => StatusCode::NOT_FOUND,
        ErrorKind::Conflict => StatusCode::CONFLICT,
        ErrorKind::Unauthorized => StatusCode::UNAUTHORIZED,
        ErrorKind::Forbidden => StatusCode::FORBIDDEN,
        ErrorKind::Unavailable => StatusCode::SERVICE_UNAVAILABLE,
        ErrorKind::Internal => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let e = self.0;
        let status = status_for(e.kind, e.code);
        if status.is_server_error() {
            tracing::error!(code = e.code, message = %e.message, "request failed");
        }
        let body = ErrorBody {
            code: e.code.to_string(),
            field: e.field.map(str::to_string),
            message: e.message,
        };
        (status, Json(body)).into_response()
    }
}
