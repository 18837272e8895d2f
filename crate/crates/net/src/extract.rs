//! Request extractors that fail with wire error envelopes.

use axum::extract::{FromRequest, FromRequestParts, Request};
use axum::http::header::AUTHORIZATION;
use axum::http::request::Parts;
use axum::Json;
use lbs_core::domain::Token;
use serde::de::DeserializeOwned;

use crate::envelope::{ApiError, ErrorCode};

/// JSON body; malformed input becomes `ParseError`.
pub struct ApiJson<T>(pub T);

impl<S, T> FromRequest<S> for ApiJson<T>
where
    T: DeserializeOwned,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(ApiJson(v)),
            Err(rejection) => Err(ApiError::new(ErrorCode::ParseError, rejection.body_text())),
        }
    }
}

/// `Authorization: Bearer <64 hex>`; anything else is `InvalidToken`.
pub struct Bearer(pub Token);

pub fn parse_bearer(value: &str) -> Option<Token> {
    let raw = value.strip_prefix("Bearer ")?;
    Token::parse(raw.trim()).ok()
}

impl<S: Send + Sync> FromRequestParts<S> for Bearer {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, _state: &S) -> Result<Self, Self::Rejection> {
        parts
            .headers
            .get(AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(parse_bearer)
            .map(Bearer)
            .ok_or_else(|| ApiError::new(ErrorCode::InvalidToken, "missing or malformed bearer token"))
    }
}

/// Like [`Bearer`] but absent headers are allowed.
pub struct OptionalBearer(pub Option<Token>);

impl<S: Send + Sync> FromRequestParts<S> for OptionalBearer {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, Self::Rejection> {
        if parts.headers.contains_key(AUTHORIZATION) {
            Bearer::from_request_parts(parts, state).await.map(|b| OptionalBearer(Some(b.0)))
        } else {
            Ok(OptionalBearer(None))
        }
    }
}
