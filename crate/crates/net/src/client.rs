//! Typed HTTP client for every node's endpoints. All calls return the raw
//! [`Envelope`]; transport failures are reported separately.

use std::time::Duration;

use lbs_core::csp::EscalationRequest;
use serde_json::{json, Value};
use thiserror::Error;

use crate::envelope::Envelope;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("{endpoint} unreachable: {source}")]
    Unreachable {
        endpoint: String,
        #[source]
        source: reqwest::Error,
    },
    #[error("{endpoint} answered with a non-envelope body: {detail}")]
    BadResponse { endpoint: String, detail: String },
}

/// Normalizes `host:port` to a base URL.
pub fn base_url(endpoint: &str) -> String {
    let trimmed = endpoint.trim_end_matches('/');
    if trimmed.starts_with("http://") || trimmed.starts_with("https://") {
        trimmed.to_string()
    } else {
        format!("http://{trimmed}")
    }
}

#[derive(Debug, Clone)]
pub struct NodeClient {
    http: reqwest::Client,
    endpoint: String,
    base: String,
}

impl NodeClient {
    pub fn new(endpoint: &str) -> Self {
        let http = reqwest::Client::builder()
            .timeout(DEFAULT_TIMEOUT)
            .build()
            .expect("http client builds");
        Self::with_http(http, endpoint)
    }

    pub fn with_http(http: reqwest::Client, endpoint: &str) -> Self {
        Self {
            http,
            endpoint: endpoint.to_string(),
            base: base_url(endpoint),
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    async fn send(&self, req: reqwest::RequestBuilder) -> Result<Envelope, ClientError> {
        let resp = req.send().await.map_err(|source| ClientError::Unreachable {
            endpoint: self.endpoint.clone(),
            source,
        })?;
        let bytes = resp.bytes().await.map_err(|source| ClientError::Unreachable {
            endpoint: self.endpoint.clone(),
            source,
        })?;
        serde_json::from_slice(&bytes).map_err(|e| ClientError::BadResponse {
            endpoint: self.endpoint.clone(),
            detail: format!("{e}: {}", String::from_utf8_lossy(&bytes)),
        })
    }

    fn authed(req: reqwest::RequestBuilder, token: Option<&str>) -> reqwest::RequestBuilder {
        match token {
            Some(t) => req.header("Authorization", format!("Bearer {t}")),
            None => req,
        }
    }

    pub async fn get(&self, path: &str, token: Option<&str>) -> Result<Envelope, ClientError> {
        let req = self.http.get(format!("{}{path}", self.base));
        self.send(Self::authed(req, token)).await
    }

    pub async fn post(&self, path: &str, body: &Value, token: Option<&str>) -> Result<Envelope, ClientError> {
        let req = self.http.post(format!("{}{path}", self.base)).json(body);
        self.send(Self::authed(req, token)).await
    }

    pub async fn post_with_timeout(
        &self,
        path: &str,
        body: &Value,
        timeout: Duration,
    ) -> Result<Envelope, ClientError> {
        let req = self.http.post(format!("{}{path}", self.base)).json(body).timeout(timeout);
        self.send(req).await
    }

    pub async fn healthz(&self) -> Result<Envelope, ClientError> {
        self.get("/healthz", None).await
    }

    // LSP

    pub async fn register(&self, phone: &str, password: &str, preferences: &[String]) -> Result<Envelope, ClientError> {
        self.post(
            "/lsp/register",
            &json!({"phone": phone, "password": password, "preferences": preferences}),
            None,
        )
        .await
    }

    pub async fn login(&self, user_id: &str, password: &str) -> Result<Envelope, ClientError> {
        self.post("/lsp/login", &json!({"user_id": user_id, "password": password}), None)
            .await
    }

    pub async fn logout(&self, token: &str) -> Result<Envelope, ClientError> {
        self.post("/lsp/logout", &json!({"token": token}), None).await
    }

    pub async fn introspect(&self, token: &str) -> Result<Envelope, ClientError> {
        self.post("/lsp/introspect", &json!({"token": token}), None).await
    }

    pub async fn subscribe(&self, user_id: &str, category: &str) -> Result<Envelope, ClientError> {
        self.post("/lsp/subscribe", &json!({"user_id": user_id, "category": category}), None)
            .await
    }

    pub async fn record_presence(&self, token: &str, zone_id: &str) -> Result<Envelope, ClientError> {
        self.post("/lsp/presence", &json!({"token": token, "zone_id": zone_id}), None)
            .await
    }

    pub async fn presence_count(&self, zone_id: &str) -> Result<Envelope, ClientError> {
        self.get(&format!("/lsp/presence/{zone_id}"), None).await
    }

    pub async fn user(&self, user_id: &str) -> Result<Envelope, ClientError> {
        self.get(&format!("/lsp/users/{user_id}"), None).await
    }

    pub async fn services(&self, user_id: &str, zone_id: &str, offered: &[String]) -> Result<Envelope, ClientError> {
        self.post(
            "/lsp/services",
            &json!({"user_id": user_id, "zone_id": zone_id, "offered": offered}),
            None,
        )
        .await
    }

    /// `body` is `{"method":"rfid","tag":..}` or `{"method":"gps","observations":[..]}`.
    pub async fn locate(&self, body: &Value, token: Option<&str>) -> Result<Envelope, ClientError> {
        self.post("/locate", body, token).await
    }

    // Cloud unit

    pub async fn restaurants(&self, token: &str) -> Result<Envelope, ClientError> {
        self.get("/cu/restaurants", Some(token)).await
    }

    pub async fn restaurant(&self, token: &str, id: &str) -> Result<Envelope, ClientError> {
        self.get(&format!("/cu/restaurants/{id}"), Some(token)).await
    }

    pub async fn query(&self, token: &str, category: &str) -> Result<Envelope, ClientError> {
        self.post("/cu/query", &json!({"category": category}), Some(token)).await
    }

    pub async fn cu_services(&self, token: &str) -> Result<Envelope, ClientError> {
        self.get("/cu/services", Some(token)).await
    }

    pub async fn search(&self, category: &str, timeout: Duration) -> Result<Envelope, ClientError> {
        self.post_with_timeout("/cu/search", &json!({"category": category}), timeout)
            .await
    }

    pub async fn ingest(&self, seed_text: &str) -> Result<Envelope, ClientError> {
        let req = self
            .http
            .post(format!("{}/cu/ingest", self.base))
            .header("Content-Type", "application/x-ndjson")
            .body(seed_text.to_string());
        self.send(req).await
    }

    // CSP

    pub async fn register_cu(&self, zone_id: &str, endpoint: &str) -> Result<Envelope, ClientError> {
        self.post("/csp/register_cu", &json!({"zone_id": zone_id, "endpoint": endpoint}), None)
            .await
    }

    pub async fn escalate(&self, req: &EscalationRequest) -> Result<Envelope, ClientError> {
        let body = serde_json::to_value(req).expect("escalation request serializes");
        self.post("/csp/escalate", &body, None).await
    }

    pub async fn route(&self, zone_id: &str) -> Result<Envelope, ClientError> {
        self.get(&format!("/csp/route/{zone_id}"), None).await
    }

    pub async fn directory(&self) -> Result<Envelope, ClientError> {
        self.get("/csp/directory", None).await
    }

    pub async fn audit(&self) -> Result<Envelope, ClientError> {
        self.get("/csp/audit", None).await
    }
}
