//! Booting LSP, CU and CSP nodes from a [`NodeConfig`].

pub mod csp;
pub mod cu;
pub mod lsp;

use std::net::SocketAddr;
use std::sync::Arc;

use axum::Router;
use lbs_core::cloud_unit::CloudUnit;
use lbs_core::csp::{Csp, CuDirectory};
use lbs_core::domain::ZoneId;
use lbs_core::formats::{load_zones, parse_lines, AccountRecord};
use lbs_core::geolocation::ZoneMap;
use lbs_core::lsp::{Lsp, LspConfig};
use serde_json::json;
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;
use tower_http::cors::CorsLayer;

use crate::client::NodeClient;
use crate::config::{NodeConfig, Role};
use crate::envelope::{Envelope, ErrorCode, OK_MESSAGE};

pub use csp::CspNode;
pub use cu::CuNode;
pub use lsp::LspNode;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("ConfigError: {0}")]
    Config(String),
    #[error("BindError: {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
}

impl ServeError {
    pub fn code(&self) -> ErrorCode {
        match self {
            ServeError::Config(_) => ErrorCode::ConfigError,
            ServeError::Bind { .. } => ErrorCode::BindError,
        }
    }
}

pub(crate) fn health(role: &str, healthy: bool) -> Envelope {
    let status = if healthy { "ok" } else { "degraded" };
    Envelope::ok(OK_MESSAGE, json!({ "status": status, "role": role }))
}

/// Shared state of a running node, for in-process inspection.
#[derive(Debug, Clone)]
pub enum NodeHandle {
    Lsp(Arc<LspNode>),
    Cu(Arc<CuNode>),
    Csp(Arc<CspNode>),
}

#[derive(Debug)]
pub struct RunningNode {
    pub role: Role,
    pub addr: SocketAddr,
    pub handle: NodeHandle,
    shutdown: Option<oneshot::Sender<()>>,
    server: JoinHandle<()>,
    tasks: Vec<JoinHandle<()>>,
}

impl RunningNode {
    /// `host:port` as other nodes should address it.
    pub fn endpoint(&self) -> String {
        self.addr.to_string()
    }

    /// Stops background tasks and drains the server.
    pub async fn shutdown(mut self) {
        for t in &self.tasks {
            t.abort();
        }
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        let _ = (&mut self.server).await;
    }

    /// Serves until the process is interrupted.
    pub async fn wait(mut self) {
        let _ = (&mut self.server).await;
    }
}

impl Drop for RunningNode {
    fn drop(&mut self) {
        for t in &self.tasks {
            t.abort();
        }
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> ServeError {
    ServeError::Config(e.to_string())
}

fn read_accounts(lsp: &Lsp, cfg: &NodeConfig) -> Result<(), ServeError> {
    let Some(path) = &cfg.accounts_file else {
        return Ok(());
    };
    if !path.exists() {
        return Ok(());
    }
    let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    // Later lines supersede earlier ones for the same user.
    let accounts = parse_lines::<AccountRecord>(&text)
        .map_err(config_err)?
        .into_iter()
        .map(AccountRecord::into_account)
        .collect::<Result<Vec<_>, _>>()
        .map_err(config_err)?;
    lsp.load_accounts(accounts);
    Ok(())
}

/// Loads the node's inputs, binds its port, and starts serving.
pub async fn serve(cfg: NodeConfig) -> Result<RunningNode, ServeError> {
    cfg.validate().map_err(config_err)?;
    let zones: Arc<ZoneMap> = Arc::new(
        load_zones(&cfg.zones_file).map_err(|e| config_err(format!("{}: {e}", cfg.zones_file.display())))?,
    );
    let zone_ids: Vec<ZoneId> = zones.zone_ids().cloned().collect();

    // Prepare state before binding so a bad config never holds a port.
    let mut pending_cu = None;
    let (router, handle): (Router, NodeHandle) = match cfg.role {
        Role::Lsp => {
            let lsp = Arc::new(Lsp::new(zone_ids, LspConfig::default()));
            read_accounts(&lsp, &cfg)?;
            let node = Arc::new(LspNode::new(lsp, Arc::clone(&zones), cfg.accounts_file.clone()));
            (lsp::router(Arc::clone(&node)), NodeHandle::Lsp(node))
        }
        Role::Csp => {
            let directory = CuDirectory::with_heartbeat(zone_ids, cfg.heartbeat());
            let state = Arc::new(Csp::new(directory, cfg.grant_on_escalation.unwrap_or(true)));
            let lsp = NodeClient::new(cfg.lsp_endpoint.as_deref().unwrap_or_default());
            let node = Arc::new(CspNode::new(state, lsp, cfg.audit_file.clone()));
            (csp::router(Arc::clone(&node)), NodeHandle::Csp(node))
        }
        Role::Cu => {
            let raw_zone = cfg.zone_id.as_deref().unwrap_or_default();
            let zone = ZoneId::parse(raw_zone).map_err(config_err)?;
            let unit = Arc::new(CloudUnit::new(zone, Arc::clone(&zones)).map_err(config_err)?);
            if let Some(seed) = &cfg.seed_file {
                let report = unit.ingest_restaurants(seed).map_err(config_err)?;
                for r in &report.rejected {
                    tracing::warn!(line = r.line, id = %r.restaurant_id, reason = %r.reason, "seed record rejected");
                }
                tracing::info!(zone = %unit.zone(), loaded = report.loaded, "seeded");
            }
            let node = Arc::new(CuNode::new(
                unit,
                NodeClient::new(cfg.lsp_endpoint.as_deref().unwrap_or_default()),
                NodeClient::new(cfg.csp_endpoint.as_deref().unwrap_or_default()),
            ));
            pending_cu = Some(Arc::clone(&node));
            (cu::router(Arc::clone(&node)), NodeHandle::Cu(node))
        }
    };

    let listener = TcpListener::bind(&cfg.listen).await.map_err(|source| ServeError::Bind {
        addr: cfg.listen.clone(),
        source,
    })?;
    let addr = listener.local_addr().map_err(|source| ServeError::Bind {
        addr: cfg.listen.clone(),
        source,
    })?;

    let (tx, rx) = oneshot::channel::<()>();
    let app = router.layer(CorsLayer::permissive());
    let server = tokio::spawn(async move {
        let result = axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await;
        if let Err(e) = result {
            tracing::error!(error = %e, "server stopped");
        }
    });

    let mut tasks = Vec::new();
    if let Some(node) = pending_cu {
        let advertise = cfg.advertise.clone().unwrap_or_else(|| addr.to_string());
        tasks.push(tokio::spawn(cu::heartbeat_loop(node, advertise, cfg.heartbeat())));
    }
    tracing::info!(role = %cfg.role, %addr, "listening");

    Ok(RunningNode {
        role: cfg.role,
        addr,
        handle,
        shutdown: Some(tx),
        server,
        tasks,
    })
}
