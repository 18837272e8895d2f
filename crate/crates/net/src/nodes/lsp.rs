//! HTTP surface of the location service provider, including `/locate`.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::routing::{get, post};
use axum::Router;
use lbs_core::domain::{PhoneNumber, ServiceCategory, Token, ZoneId};
use lbs_core::formats::AccountRecord;
use lbs_core::geolocation::{resolve_rfid, trilaterate_fix, BeaconObservation, GeoPoint, ZoneMap};
use lbs_core::lsp::Lsp;
use lbs_core::Error as CoreError;
use parking_lot::Mutex;
use serde::Deserialize;
use serde_json::json;

use crate::envelope::{ApiError, ApiResult, Envelope, ErrorCode, AUTHENTICATED_MESSAGE, OK_MESSAGE};
use crate::extract::{ApiJson, OptionalBearer};

#[derive(Debug)]
pub struct LspNode {
    pub lsp: Arc<Lsp>,
    pub zones: Arc<ZoneMap>,
    accounts_file: Option<(PathBuf, Mutex<()>)>,
}

impl LspNode {
    pub fn new(lsp: Arc<Lsp>, zones: Arc<ZoneMap>, accounts_file: Option<PathBuf>) -> Self {
        Self {
            lsp,
            zones,
            accounts_file: accounts_file.map(|p| (p, Mutex::new(()))),
        }
    }

    fn persist(&self, user_id: &PhoneNumber) {
        let (Some((path, lock)), Some(account)) = (&self.accounts_file, self.lsp.account(user_id)) else {
            return;
        };
        let line = serde_json::to_string(&AccountRecord::from(&account)).expect("account serializes");
        let _guard = lock.lock();
        let result = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .and_then(|mut f| writeln!(f, "{line}"));
        if let Err(e) = result {
            tracing::warn!(path = %path.display(), error = %e, "could not persist account");
        }
    }
}

pub fn router(state: Arc<LspNode>) -> Router {
    Router::new()
        .route("/lsp/register", post(register))
        .route("/lsp/login", post(login))
        .route("/lsp/logout", post(logout))
        .route("/lsp/introspect", post(introspect))
        .route("/lsp/subscribe", post(subscribe))
        .route("/lsp/presence", post(presence))
        .route("/lsp/presence/{zone_id}", get(presence_count))
        .route("/lsp/users/{user_id}", get(user))
        .route("/lsp/services", post(services))
        .route("/locate", post(locate))
        .route("/healthz", get(|| async { super::health("lsp", true) }))
        .with_state(state)
}

fn categories(raw: &[String]) -> Result<Vec<ServiceCategory>, ApiError> {
    raw.iter()
        .map(|c| ServiceCategory::parse(c).map_err(ApiError::from))
        .collect()
}

fn token(raw: &str) -> Result<Token, ApiError> {
    Token::parse(raw).map_err(ApiError::from)
}

fn user_id(raw: &str) -> Result<PhoneNumber, ApiError> {
    // An id that cannot be canonical cannot belong to anyone.
    PhoneNumber::parse(raw).map_err(|_| ApiError::new(ErrorCode::UnknownUser, raw.to_string()))
}

fn zone_id(raw: &str) -> Result<ZoneId, ApiError> {
    ZoneId::parse(raw).map_err(|_| ApiError::new(ErrorCode::UnknownZone, raw.to_string()))
}

#[derive(Deserialize)]
struct RegisterBody {
    phone: String,
    password: String,
    #[serde(default)]
    preferences: Vec<String>,
}

async fn register(State(s): State<Arc<LspNode>>, ApiJson(body): ApiJson<RegisterBody>) -> ApiResult {
    let prefs = categories(&body.preferences)?;
    let id = s.lsp.register_user(&body.phone, &body.password, &prefs)?;
    s.persist(&id);
    tracing::info!(user = %id, "registered");
    Ok(Envelope::ok(OK_MESSAGE, json!({ "user_id": id })))
}

#[derive(Deserialize)]
struct LoginBody {
    user_id: String,
    password: String,
}

async fn login(State(s): State<Arc<LspNode>>, ApiJson(body): ApiJson<LoginBody>) -> ApiResult {
    let session = s.lsp.authenticate(&body.user_id, &body.password)?;
    Ok(Envelope::ok(
        AUTHENTICATED_MESSAGE,
        json!({ "token": session.token.to_hex(), "user_id": session.user_id }),
    ))
}

#[derive(Deserialize)]
struct TokenBody {
    token: String,
}

async fn logout(State(s): State<Arc<LspNode>>, ApiJson(body): ApiJson<TokenBody>) -> ApiResult {
    s.lsp.logout(&token(&body.token)?)?;
    Ok(Envelope::ok(OK_MESSAGE, json!({})))
}

async fn introspect(State(s): State<Arc<LspNode>>, ApiJson(body): ApiJson<TokenBody>) -> ApiResult {
    let info = s.lsp.introspect(&token(&body.token)?)?;
    Ok(Envelope::ok(OK_MESSAGE, serde_json::to_value(info).expect("introspection serializes")))
}

#[derive(Deserialize)]
struct SubscribeBody {
    user_id: String,
    category: String,
}

async fn subscribe(State(s): State<Arc<LspNode>>, ApiJson(body): ApiJson<SubscribeBody>) -> ApiResult {
    let id = user_id(&body.user_id)?;
    let category = ServiceCategory::parse(&body.category)?;
    let subs = s.lsp.subscribe(&id, &category)?;
    s.persist(&id);
    Ok(Envelope::ok(OK_MESSAGE, json!({ "subscriptions": subs })))
}

#[derive(Deserialize)]
struct PresenceBody {
    token: String,
    zone_id: String,
}

async fn presence(State(s): State<Arc<LspNode>>, ApiJson(body): ApiJson<PresenceBody>) -> ApiResult {
    s.lsp.record_presence(&token(&body.token)?, &zone_id(&body.zone_id)?)?;
    Ok(Envelope::ok(OK_MESSAGE, json!({})))
}

async fn presence_count(State(s): State<Arc<LspNode>>, Path(zone): Path<String>) -> ApiResult {
    let count = s.lsp.count_users(&zone_id(&zone)?)?;
    Ok(Envelope::ok(OK_MESSAGE, json!({ "count": count })))
}

async fn user(State(s): State<Arc<LspNode>>, Path(raw): Path<String>) -> ApiResult {
    let id = user_id(&raw)?;
    let account = s
        .lsp
        .account(&id)
        .ok_or_else(|| ApiError::from(CoreError::UnknownUser(id.to_string())))?;
    Ok(Envelope::ok(
        OK_MESSAGE,
        json!({ "user_id": account.user_id, "subscriptions": account.subscriptions }),
    ))
}

#[derive(Deserialize)]
struct ServicesBody {
    user_id: String,
    zone_id: String,
    #[serde(default)]
    offered: Vec<String>,
}

async fn services(State(s): State<Arc<LspNode>>, ApiJson(body): ApiJson<ServicesBody>) -> ApiResult {
    let offered: BTreeSet<ServiceCategory> = categories(&body.offered)?.into_iter().collect();
    let list = s
        .lsp
        .list_available_services(&user_id(&body.user_id)?, &zone_id(&body.zone_id)?, &offered)?;
    Ok(Envelope::ok(OK_MESSAGE, json!({ "services": list })))
}

#[derive(Deserialize)]
struct ObservationBody {
    bx: f64,
    by: f64,
    d: f64,
}

#[derive(Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
enum LocateBody {
    Gps { observations: Vec<ObservationBody> },
    Rfid { tag: String },
}

/// Resolves a zone; with a bearer token the caller's presence is recorded too.
async fn locate(
    State(s): State<Arc<LspNode>>,
    OptionalBearer(bearer): OptionalBearer,
    ApiJson(body): ApiJson<LocateBody>,
) -> ApiResult {
    let (zone, data) = match body {
        LocateBody::Gps { observations } => {
            let obs: Vec<BeaconObservation> = observations
                .iter()
                .map(|o| BeaconObservation::new(GeoPoint::new(o.bx, o.by), o.d))
                .collect();
            let fix = trilaterate_fix(&obs)?;
            let p = fix.position;
            let zone = s
                .zones
                .zone_at(p)
                .ok_or(CoreError::NotCovered { x: p.x, y: p.y })?;
            (
                zone.zone_id.clone(),
                json!({
                    "method": "gps",
                    "zone_id": zone.zone_id,
                    "display_name": zone.display_name,
                    "x": p.x,
                    "y": p.y,
                    "rms": fix.rms,
                }),
            )
        }
        LocateBody::Rfid { tag } => {
            let zone_id = resolve_rfid(&tag, &s.zones)?;
            let display = s.zones.zone(&zone_id).map(|z| z.display_name.clone()).unwrap_or_default();
            (
                zone_id.clone(),
                json!({
                    "method": "rfid",
                    "zone_id": zone_id,
                    "display_name": display,
                    "x": null,
                    "y": null,
                }),
            )
        }
    };
    if let Some(t) = bearer {
        s.lsp.record_presence(&t, &zone)?;
    }
    Ok(Envelope::ok(OK_MESSAGE, data))
}
