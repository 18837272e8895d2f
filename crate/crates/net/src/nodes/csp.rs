//! HTTP surface of the cloud service provider.

use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use axum::extract::{Path, State};
use axum::routing::{get, post};
use axum::Router;
use futures::future::join_all;
use lbs_core::csp::{merge_search, Csp, EscalationRequest, EscalationResult, ZoneAnswer, FAN_OUT_TIMEOUT};
use lbs_core::domain::{Restaurant, ServiceCategory, ZoneId};
use lbs_core::formats::AuditRecord;
use lbs_core::Error as CoreError;
use parking_lot::Mutex;
use serde::Deserialize;
use serde_json::json;

use crate::client::NodeClient;
use crate::envelope::{ApiError, ApiResult, Envelope, ErrorCode, OK_MESSAGE};
use crate::extract::ApiJson;

#[derive(Debug)]
pub struct CspNode {
    pub csp: Arc<Csp>,
    lsp: NodeClient,
    http: reqwest::Client,
    audit_file: Option<(PathBuf, Mutex<()>)>,
}

impl CspNode {
    pub fn new(csp: Arc<Csp>, lsp: NodeClient, audit_file: Option<PathBuf>) -> Self {
        Self {
            csp,
            lsp,
            http: reqwest::Client::new(),
            audit_file: audit_file.map(|p| (p, Mutex::new(()))),
        }
    }

    fn persist(&self, record: &AuditRecord) {
        let Some((path, lock)) = &self.audit_file else {
            return;
        };
        let line = serde_json::to_string(record).expect("audit record serializes");
        let _guard = lock.lock();
        let result = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .and_then(|mut f| writeln!(f, "{line}"));
        if let Err(e) = result {
            tracing::warn!(path = %path.display(), error = %e, "could not append audit record");
        }
    }

    /// Asks one CU per live zone in parallel; each call has its own timeout.
    pub async fn cross_location_search(&self, category: &ServiceCategory) -> EscalationResult {
        let now = Instant::now();
        let targets = self.csp.directory.fan_out_targets_at(now);
        let calls = targets.into_iter().map(|(zone, endpoint)| {
            let client = NodeClient::with_http(self.http.clone(), &endpoint);
            async move {
                let answer: ZoneAnswer = match client.search(category.as_str(), FAN_OUT_TIMEOUT).await {
                    Ok(env) if env.is_ok() => env
                        .data_field("restaurants")
                        .and_then(|v| serde_json::from_value::<Vec<Restaurant>>(v.clone()).ok())
                        .ok_or_else(|| "malformed search answer".to_string()),
                    Ok(env) => Err(env.message),
                    Err(e) => Err(e.to_string()),
                };
                if let Err(e) = &answer {
                    tracing::warn!(zone = %zone, error = %e, "fan-out failed");
                }
                (zone, answer)
            }
        });
        let answers = join_all(calls).await;
        let (grouped, mut failed) = merge_search(category, answers);
        failed.extend(self.csp.directory.dead_zones_at(now));
        failed.sort();
        failed.dedup();
        EscalationResult {
            grouped,
            granted_subscription: false,
            failed_zones: failed,
        }
    }
}

pub fn router(state: Arc<CspNode>) -> Router {
    Router::new()
        .route("/csp/register_cu", post(register_cu))
        .route("/csp/escalate", post(escalate))
        .route("/csp/route/{zone_id}", get(route))
        .route("/csp/directory", get(directory))
        .route("/csp/audit", get(audit))
        .route("/healthz", get(|| async { super::health("csp", true) }))
        .with_state(state)
}

fn zone_id(raw: &str) -> Result<ZoneId, ApiError> {
    ZoneId::parse(raw).map_err(|_| ApiError::new(ErrorCode::UnknownZone, raw.to_string()))
}

#[derive(Deserialize)]
struct RegisterCuBody {
    zone_id: String,
    endpoint: String,
}

async fn register_cu(State(s): State<Arc<CspNode>>, ApiJson(body): ApiJson<RegisterCuBody>) -> ApiResult {
    if body.endpoint.trim().is_empty() {
        return Err(ApiError::new(ErrorCode::ParseError, "empty endpoint"));
    }
    s.csp.directory.register(&zone_id(&body.zone_id)?, &body.endpoint)?;
    Ok(Envelope::ok(OK_MESSAGE, json!({})))
}

async fn escalate(State(s): State<Arc<CspNode>>, ApiJson(req): ApiJson<EscalationRequest>) -> ApiResult {
    s.csp.check_request(&req)?;

    // The LSP is the authority on users. If it cannot be asked, the search
    // still runs but nothing is granted.
    let lsp_up = match s.lsp.user(req.user_id.as_str()).await {
        Ok(env) if env.is_ok() => true,
        Ok(env) => {
            return Err(ApiError::new(env.error_code().unwrap_or(ErrorCode::UnknownUser), env.message));
        }
        Err(e) => {
            tracing::warn!(error = %e, "lsp unreachable; escalation will not grant");
            false
        }
    };

    let mut result = s.cross_location_search(&req.category).await;

    if s.csp.grant_on_escalation && lsp_up {
        result.granted_subscription = matches!(
            s.lsp.subscribe(req.user_id.as_str(), req.category.as_str()).await,
            Ok(env) if env.is_ok()
        );
    }

    if let Some(record) = s.csp.audit.append(&req) {
        s.persist(&record);
    }
    tracing::info!(
        request = %req.request_id,
        category = %req.category,
        zones = result.grouped.len(),
        failed = result.failed_zones.len(),
        "escalation served"
    );

    let message = if result.is_partial() { ErrorCode::PartialResult.text() } else { OK_MESSAGE };
    Ok(Envelope::ok(message, serde_json::to_value(result).expect("result serializes")))
}

async fn route(State(s): State<Arc<CspNode>>, Path(zone): Path<String>) -> ApiResult {
    let zone = zone_id(&zone)?;
    if !s.csp.directory.knows_zone(&zone) {
        return Err(CoreError::UnknownZone(zone.to_string()).into());
    }
    let endpoint = s.csp.directory.route(&zone)?;
    Ok(Envelope::ok(OK_MESSAGE, json!({ "zone_id": zone, "endpoint": endpoint })))
}

async fn directory(State(s): State<Arc<CspNode>>) -> ApiResult {
    Ok(Envelope::ok(OK_MESSAGE, json!({ "entries": s.csp.directory.snapshot() })))
}

async fn audit(State(s): State<Arc<CspNode>>) -> ApiResult {
    Ok(Envelope::ok(OK_MESSAGE, json!({ "records": s.csp.audit.records() })))
}
