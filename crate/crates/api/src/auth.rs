//! Credential extraction.
//!
//! Staff send `Authorization: Bearer <token>`. Students send their session
//! token in `X-Session-Token` (a bearer header is accepted too). A valid
//! credential of the wrong kind is answered with 403, an unknown one with 401.

use axum::extract::FromRequestParts;
use axum::http::request::Parts;
use odes_core::service::Staff;
use odes_core::OdesError;

use crate::error::ApiError;
use crate::AppState;

pub const SESSION_TOKEN_HEADER: &str = "x-session-token";

fn bearer(parts: &Parts) -> Option<&str> {
    let value = parts.headers.get(axum::http::header::AUTHORIZATION)?.to_str().ok()?;
    let (scheme, token) = value.split_once(' ')?;
    scheme.eq_ignore_ascii_case("bearer").then(|| token.trim())
}

fn session_header(parts: &Parts) -> Option<&str> {
    parts
        .headers
        .get(SESSION_TOKEN_HEADER)?
        .to_str()
        .ok()
        .map(str::trim)
}

/// An authenticated teacher or admin.
pub struct StaffAuth(pub Staff);

impl FromRequestParts<AppState> for StaffAuth {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, odes: &AppState) -> Result<Self, Self::Rejection> {
        if let Some(token) = bearer(parts) {
            match odes.authenticate(token) {
                Ok(staff) => return Ok(StaffAuth(staff)),
                Err(_) if odes.is_session_token(token) => return Err(OdesError::forbidden().into()),
                Err(e) => return Err(e.into()),
            }
        }
        match session_header(parts) {
            Some(token) if odes.is_session_token(token) => Err(OdesError::forbidden().into()),
            _ => Err(OdesError::unauthorized().into()),
        }
    }
}

/// The raw session token of a student request.
pub struct SessionAuth(pub String);

impl FromRequestParts<AppState> for SessionAuth {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, odes: &AppState) -> Result<Self, Self::Rejection> {
        if let Some(token) = session_header(parts) {
            if !odes.is_session_token(token) && odes.authenticate(token).is_ok() {
                return Err(OdesError::forbidden().into());
            }
            return Ok(SessionAuth(token.to_string()));
        }
        match bearer(parts) {
            Some(token) if odes.is_session_token(token) => Ok(SessionAuth(token.to_string())),
            Some(token) if odes.authenticate(token).is_ok() => Err(OdesError::forbidden().into()),
            _ => Err(OdesError::unauthorized().into()),
        }
    }
}
