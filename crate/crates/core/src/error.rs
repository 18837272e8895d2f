use thiserror::Error;

/// Every failure the service logic can report.
///
/// Variants line up one-to-one with the wire error codes, except for the
/// input-validation variants (`InvalidCategory`, `InvalidField`,
/// `InvalidObservation`, `InvalidZoneMap`) which the wire layer reports as a
/// parse failure.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid phone number {0:?}")]
    InvalidPhone(String),
    #[error("invalid service category {0:?}")]
    InvalidCategory(String),
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("position of {0} lies outside its zone")]
    ZoneMismatch(String),
    #[error("unknown zone {0:?}")]
    UnknownZone(String),
    #[error("an account already exists for {0}")]
    DuplicatePhone(String),
    #[error("password must be at least {min} characters")]
    WeakPassword { min: usize },
    #[error("authentication failed")]
    AuthFailed,
    #[error("invalid or expired token")]
    InvalidToken,
    #[error("unknown user {0}")]
    UnknownUser(String),
    #[error("unknown rfid tag {0:?}")]
    UnknownTag(String),
    #[error("point ({x}, {y}) is not covered by any zone")]
    NotCovered { x: f64, y: f64 },
    #[error("need at least 3 observations, got {0}")]
    Underdetermined(usize),
    #[error("beacon geometry is degenerate")]
    DegenerateGeometry,
    #[error("invalid observation: {0}")]
    InvalidObservation(String),
    #[error("restaurant {0:?} not found")]
    NotFound(String),
    #[error("not authorized for category {0:?}")]
    NotAuthorized(String),
    #[error("request for zone {requested:?} reached the cloud unit of zone {served:?}")]
    WrongZone { requested: String, served: String },
    #[error("no live cloud unit for zone {0:?}")]
    NoCuForZone(String),
    #[error("invalid zone map: {0}")]
    InvalidZoneMap(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
