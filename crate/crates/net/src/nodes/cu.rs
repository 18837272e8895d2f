//! HTTP surface of a cloud unit.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::Router;
use lbs_core::cloud_unit::{CloudUnit, QueryPlan, QueryResult};
use lbs_core::csp::EscalationResult;
use lbs_core::domain::{ServiceCategory, Token};
use lbs_core::lsp::Introspection;
use lbs_core::Error as CoreError;
use parking_lot::Mutex;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::client::NodeClient;
use crate::envelope::{ApiError, ApiResult, Envelope, ErrorCode, OK_MESSAGE};
use crate::extract::{ApiJson, Bearer};

/// How long a successful introspection is trusted.
pub const INTROSPECTION_TTL: Duration = Duration::from_secs(2);

#[derive(Debug)]
pub struct CuNode {
    pub unit: Arc<CloudUnit>,
    lsp: NodeClient,
    csp: NodeClient,
    cache: Mutex<HashMap<Token, (Introspection, Instant)>>,
    registered: AtomicBool,
}

impl CuNode {
    pub fn new(unit: Arc<CloudUnit>, lsp: NodeClient, csp: NodeClient) -> Self {
        Self {
            unit,
            lsp,
            csp,
            cache: Mutex::new(HashMap::new()),
            registered: AtomicBool::new(false),
        }
    }

    pub fn is_registered(&self) -> bool {
        self.registered.load(Ordering::Relaxed)
    }

    pub fn csp(&self) -> &NodeClient {
        &self.csp
    }

    pub(crate) fn set_registered(&self, yes: bool) {
        self.registered.store(yes, Ordering::Relaxed);
    }

    /// Validates a token with the LSP. A cached answer is reused only while
    /// fresh and while it still places the user in this zone, so a user who
    /// just relocated here is not bounced with a stale zone.
    async fn who(&self, token: &Token) -> Result<(Introspection, bool), ApiError> {
        if let Some((info, at)) = self.cache.lock().get(token).cloned() {
            if at.elapsed() < INTROSPECTION_TTL && info.current_zone.as_ref() == Some(self.unit.zone()) {
                return Ok((info, true));
            }
        }
        self.introspect(token).await.map(|info| (info, false))
    }

    /// Subscriptions only grow, so a cached grant is always right but a
    /// cached refusal may predate a grant made through another unit.
    /// Refusals are therefore confirmed with the LSP.
    async fn who_allowed(&self, token: &Token, category: &ServiceCategory) -> Result<Introspection, ApiError> {
        let (info, cached) = self.who(token).await?;
        if cached && !info.subscriptions.contains(category) {
            return self.introspect(token).await;
        }
        Ok(info)
    }

    async fn introspect(&self, token: &Token) -> Result<Introspection, ApiError> {
        let env = self.lsp.introspect(&token.to_hex()).await.map_err(|e| {
            ApiError::new(ErrorCode::InvalidToken, e.to_string()).with_status(StatusCode::SERVICE_UNAVAILABLE)
        })?;
        if !env.is_ok() {
            return Err(ApiError::new(env.error_code().unwrap_or(ErrorCode::InvalidToken), env.message));
        }
        let info: Introspection = env
            .data
            .and_then(|d| serde_json::from_value(d).ok())
            .ok_or_else(|| ApiError::new(ErrorCode::InvalidToken, "malformed introspection"))?;
        let mut cache = self.cache.lock();
        cache.retain(|_, (_, at)| at.elapsed() < INTROSPECTION_TTL);
        cache.insert(token.clone(), (info.clone(), Instant::now()));
        Ok(info)
    }

    fn remember_grant(&self, token: &Token, category: &ServiceCategory) {
        if let Some((info, _)) = self.cache.lock().get_mut(token) {
            info.subscriptions.insert(category.clone());
        }
    }

    async fn escalate(&self, req: &lbs_core::csp::EscalationRequest) -> Result<(EscalationResult, bool), ApiError> {
        let env = self
            .csp
            .escalate(req)
            .await
            .map_err(|e| ApiError::new(ErrorCode::CspUnreachable, e.to_string()))?;
        if !env.is_ok() {
            return Err(ApiError::new(env.error_code().unwrap_or(ErrorCode::CspUnreachable), env.message));
        }
        let partial = env.message == ErrorCode::PartialResult.text();
        let result: EscalationResult = env
            .data
            .and_then(|d| serde_json::from_value(d).ok())
            .ok_or_else(|| ApiError::new(ErrorCode::CspUnreachable, "malformed escalation result"))?;
        Ok((result, partial))
    }
}

pub fn router(state: Arc<CuNode>) -> Router {
    Router::new()
        .route("/cu/restaurants", get(restaurants))
        .route("/cu/restaurants/{id}", get(restaurant))
        .route("/cu/query", post(query))
        .route("/cu/services", get(services))
        .route("/cu/search", post(search))
        .route("/cu/ingest", post(ingest))
        .route("/healthz", get(health))
        .with_state(state)
}

async fn health(State(s): State<Arc<CuNode>>) -> Envelope {
    super::health("cu", s.is_registered())
}

async fn restaurants(State(s): State<Arc<CuNode>>, Bearer(token): Bearer) -> ApiResult {
    let (who, _) = s.who(&token).await?;
    s.unit.check_requester(&who)?;
    let list = s.unit.list_restaurants(s.unit.zone())?;
    Ok(Envelope::ok(OK_MESSAGE, json!({ "zone_id": s.unit.zone(), "restaurants": list })))
}

async fn restaurant(State(s): State<Arc<CuNode>>, Bearer(token): Bearer, Path(id): Path<String>) -> ApiResult {
    let (who, _) = s.who(&token).await?;
    let who = match s.unit.store().get(&id) {
        Some(r) if !who.subscriptions.contains(&r.food_style) => s.who_allowed(&token, &r.food_style).await?,
        _ => who,
    };
    let record = s.unit.get_restaurant_info(&who, &id)?;
    Ok(Envelope::ok(OK_MESSAGE, json!({ "restaurant": record })))
}

#[derive(Deserialize)]
struct CategoryBody {
    category: String,
}

fn query_body(result: &QueryResult) -> Value {
    let mut body = json!({
        "restaurants": result.restaurants,
        "served_by": result.served_by,
        "source_zone": result.source_zone,
    });
    if let Some(esc) = &result.escalation {
        body["grouped"] = json!(esc.grouped);
        body["granted_subscription"] = json!(esc.granted_subscription);
        body["failed_zones"] = json!(esc.failed_zones);
    }
    body
}

async fn query(
    State(s): State<Arc<CuNode>>,
    Bearer(token): Bearer,
    ApiJson(body): ApiJson<CategoryBody>,
) -> ApiResult {
    let category = ServiceCategory::parse(&body.category)?;
    let who = s.who_allowed(&token, &category).await?;
    match s.unit.plan_query(&who, &category)? {
        QueryPlan::Local(result) => Ok(Envelope::ok(OK_MESSAGE, query_body(&result))),
        QueryPlan::Escalate(req) => {
            tracing::info!(request = %req.request_id, category = %category, "escalating");
            let (result, partial) = s.escalate(&req).await?;
            if result.granted_subscription {
                s.remember_grant(&token, &category);
            }
            let partial = partial || result.is_partial();
            let relayed = s.unit.relay(result);
            let message = if partial { ErrorCode::PartialResult.text() } else { OK_MESSAGE };
            Ok(Envelope::ok(message, query_body(&relayed)))
        }
    }
}

async fn services(State(s): State<Arc<CuNode>>, Bearer(token): Bearer) -> ApiResult {
    let (who, _) = s.who(&token).await?;
    s.unit.check_requester(&who)?;
    let offered: Vec<String> = s.unit.offered_categories().iter().map(|c| c.to_string()).collect();
    let env = s
        .lsp
        .services(who.user_id.as_str(), s.unit.zone().as_str(), &offered)
        .await
        .map_err(|e| ApiError::new(ErrorCode::InvalidToken, e.to_string()).with_status(StatusCode::SERVICE_UNAVAILABLE))?;
    if !env.is_ok() {
        return Err(ApiError::new(env.error_code().unwrap_or(ErrorCode::UnknownUser), env.message));
    }
    let available = env.data_field("services").cloned().unwrap_or(json!([]));
    Ok(Envelope::ok(
        OK_MESSAGE,
        json!({ "zone_id": s.unit.zone(), "offered": offered, "available": available }),
    ))
}

/// Fan-out target for the CSP.
async fn search(State(s): State<Arc<CuNode>>, ApiJson(body): ApiJson<CategoryBody>) -> ApiResult {
    let category = ServiceCategory::parse(&body.category)?;
    Ok(Envelope::ok(
        OK_MESSAGE,
        json!({ "zone_id": s.unit.zone(), "restaurants": s.unit.search(&category) }),
    ))
}

async fn ingest(State(s): State<Arc<CuNode>>, text: String) -> ApiResult {
    let unit = Arc::clone(&s.unit);
    let report = tokio::task::spawn_blocking(move || unit.ingest_text(&text))
        .await
        .map_err(|e| ApiError::from(CoreError::InvalidField(e.to_string())))??;
    tracing::info!(loaded = report.loaded, rejected = report.rejected.len(), "ingested");
    Ok(Envelope::ok(OK_MESSAGE, serde_json::to_value(report).expect("report serializes")))
}

/// Registers with the CSP, then keeps heartbeating. Failures retry sooner.
pub(crate) async fn heartbeat_loop(node: Arc<CuNode>, advertise: String, interval: Duration) {
    let retry = interval.min(Duration::from_secs(1));
    loop {
        let ok = matches!(
            node.csp.register_cu(node.unit.zone().as_str(), &advertise).await,
            Ok(env) if env.is_ok()
        );
        if ok != node.is_registered() {
            tracing::info!(zone = %node.unit.zone(), registered = ok, "csp registration changed");
        }
        node.set_registered(ok);
        tokio::time::sleep(if ok { interval } else { retry }).await;
    }
}
