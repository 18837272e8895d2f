//! The uniform response wrapper and the error-code table.

use std::fmt;

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use lbs_core::Error as CoreError;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const OK_MESSAGE: &str = "OK";
pub const AUTHENTICATED_MESSAGE: &str = "Authenticated User";
pub const AUTH_FAILED_MESSAGE: &str = "Authentication Failed";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Error,
}

/// `{status, message, data}`; `data` is absent on errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub status: Status,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<Value>,
}

impl Envelope {
    pub fn ok(message: impl Into<String>, data: Value) -> Self {
        Self {
            status: Status::Ok,
            message: message.into(),
            data: Some(data),
        }
    }

    pub fn error(code: ErrorCode) -> Self {
        Self {
            status: Status::Error,
            message: code.text().to_string(),
            data: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == Status::Ok
    }

    /// The error code for an error envelope, if its message is a known text.
    pub fn error_code(&self) -> Option<ErrorCode> {
        match self.status {
            Status::Error => ErrorCode::from_text(&self.message),
            Status::Ok => None,
        }
    }

    pub fn data_field(&self, key: &str) -> Option<&Value> {
        self.data.as_ref().and_then(|d| d.get(key))
    }
}

macro_rules! error_codes {
    ($($name:ident => $status:expr),* $(,)?) => {
        /// Documented wire error codes.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum ErrorCode { $($name),* }

        impl ErrorCode {
            pub const ALL: &'static [ErrorCode] = &[$(ErrorCode::$name),*];

            pub fn as_str(self) -> &'static str {
                match self { $(ErrorCode::$name => stringify!($name)),* }
            }

            pub fn http_status(self) -> StatusCode {
                match self { $(ErrorCode::$name => $status),* }
            }
        }
    };
}

error_codes! {
    InvalidPhone => StatusCode::BAD_REQUEST,
    DuplicatePhone => StatusCode::CONFLICT,
    WeakPassword => StatusCode::BAD_REQUEST,
    AuthFailed => StatusCode::UNAUTHORIZED,
    InvalidToken => StatusCode::UNAUTHORIZED,
    UnknownUser => StatusCode::NOT_FOUND,
    UnknownZone => StatusCode::NOT_FOUND,
    UnknownTag => StatusCode::NOT_FOUND,
    NotCovered => StatusCode::UNPROCESSABLE_ENTITY,
    Underdetermined => StatusCode::UNPROCESSABLE_ENTITY,
    DegenerateGeometry => StatusCode::UNPROCESSABLE_ENTITY,
    NotFound => StatusCode::NOT_FOUND,
    NotAuthorized => StatusCode::FORBIDDEN,
    WrongZone => StatusCode::CONFLICT,
    CspUnreachable => StatusCode::BAD_GATEWAY,
    NoCuForZone => StatusCode::NOT_FOUND,
    PartialResult => StatusCode::OK,
    ConfigError => StatusCode::INTERNAL_SERVER_ERROR,
    BindError => StatusCode::INTERNAL_SERVER_ERROR,
    ParseError => StatusCode::BAD_REQUEST,
    ZoneMismatch => StatusCode::UNPROCESSABLE_ENTITY,
    StepFailed => StatusCode::INTERNAL_SERVER_ERROR,
}

impl ErrorCode {
    /// The envelope message for this code. Identical to the code name except
    /// for `AuthFailed`.
    pub fn text(self) -> &'static str {
        match self {
            ErrorCode::AuthFailed => AUTH_FAILED_MESSAGE,
            other => other.as_str(),
        }
    }

    pub fn from_text(text: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|c| c.text() == text)
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<&CoreError> for ErrorCode {
    fn from(e: &CoreError) -> Self {
        match e {
            CoreError::InvalidPhone(_) => ErrorCode::InvalidPhone,
            CoreError::InvalidCategory(_)
            | CoreError::InvalidField(_)
            | CoreError::InvalidObservation(_)
            | CoreError::InvalidZoneMap(_)
            | CoreError::Parse { .. } => ErrorCode::ParseError,
            CoreError::ZoneMismatch(_) => ErrorCode::ZoneMismatch,
            CoreError::UnknownZone(_) => ErrorCode::UnknownZone,
            CoreError::DuplicatePhone(_) => ErrorCode::DuplicatePhone,
            CoreError::WeakPassword { .. } => ErrorCode::WeakPassword,
            CoreError::AuthFailed => ErrorCode::AuthFailed,
            CoreError::InvalidToken => ErrorCode::InvalidToken,
            CoreError::UnknownUser(_) => ErrorCode::UnknownUser,
            CoreError::UnknownTag(_) => ErrorCode::UnknownTag,
            CoreError::NotCovered { .. } => ErrorCode::NotCovered,
            CoreError::Underdetermined(_) => ErrorCode::Underdetermined,
            CoreError::DegenerateGeometry => ErrorCode::DegenerateGeometry,
            CoreError::NotFound(_) => ErrorCode::NotFound,
            CoreError::NotAuthorized(_) => ErrorCode::NotAuthorized,
            CoreError::WrongZone { .. } => ErrorCode::WrongZone,
            CoreError::NoCuForZone(_) => ErrorCode::NoCuForZone,
        }
    }
}

/// A handler failure, rendered as an error envelope.
#[derive(Debug, Clone)]
pub struct ApiError {
    pub code: ErrorCode,
    pub status: StatusCode,
    pub detail: String,
}

impl ApiError {
    pub fn new(code: ErrorCode, detail: impl Into<String>) -> Self {
        Self {
            code,
            status: code.http_status(),
            detail: detail.into(),
        }
    }

    pub fn with_status(mut self, status: StatusCode) -> Self {
        self.status = status;
        self
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        ApiError::new(ErrorCode::from(&e), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        tracing::debug!(code = %self.code, detail = %self.detail, "request failed");
        (self.status, Json(Envelope::error(self.code))).into_response()
    }
}

impl IntoResponse for Envelope {
    fn into_response(self) -> Response {
        let status = match self.status {
            Status::Ok => StatusCode::OK,
            Status::Error => self
                .error_code()
                .map_or(StatusCode::INTERNAL_SERVER_ERROR, ErrorCode::http_status),
        };
        (status, Json(self)).into_response()
    }
}

pub type ApiResult = Result<Envelope, ApiError>;
