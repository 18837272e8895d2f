//! One-process demo topology: a CSP, an LSP and one CU per zone.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use lbs_core::formats::load_zones;

use crate::client::NodeClient;
use crate::config::{NodeConfig, Role};
use crate::nodes::{serve, RunningNode, ServeError};

/// How long `up` waits for every CU to appear in the CSP directory.
pub const READY_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Clone)]
pub struct DemoOptions {
    pub zones_file: PathBuf,
    /// Directory of `<zone_id>.jsonl` seed files. Defaults to
    /// `restaurants/` beside the zones file.
    pub seeds_dir: Option<PathBuf>,
    /// 0 picks ephemeral ports. Otherwise the CSP takes `base`, the LSP
    /// `base + 1` and CU number `i` takes `base + 10 + i`.
    pub base_port: u16,
    pub host: String,
    pub heartbeat_ms: Option<u64>,
    pub grant_on_escalation: bool,
}

impl DemoOptions {
    pub fn new(zones_file: impl Into<PathBuf>) -> Self {
        Self {
            zones_file: zones_file.into(),
            seeds_dir: None,
            base_port: 0,
            host: "127.0.0.1".into(),
            heartbeat_ms: None,
            grant_on_escalation: true,
        }
    }

    fn listen(&self, offset: u16) -> String {
        let port = if self.base_port == 0 { 0 } else { self.base_port + offset };
        format!("{}:{port}", self.host)
    }

    fn seeds_dir(&self) -> PathBuf {
        self.seeds_dir.clone().unwrap_or_else(|| {
            self.zones_file
                .parent()
                .unwrap_or(Path::new("."))
                .join("restaurants")
        })
    }
}

#[derive(Debug)]
pub struct Demo {
    pub lsp: RunningNode,
    pub csp: RunningNode,
    pub cus: Vec<(String, RunningNode)>,
}

impl Demo {
    pub fn lsp_endpoint(&self) -> String {
        self.lsp.endpoint()
    }

    pub fn csp_endpoint(&self) -> String {
        self.csp.endpoint()
    }

    pub fn cu_endpoint(&self, zone_id: &str) -> Option<String> {
        self.cus.iter().find(|(z, _)| z == zone_id).map(|(_, n)| n.endpoint())
    }

    pub async fn shutdown(self) {
        for (_, cu) in self.cus {
            cu.shutdown().await;
        }
        self.csp.shutdown().await;
        self.lsp.shutdown().await;
    }
}

pub async fn up(opts: &DemoOptions) -> Result<Demo, ServeError> {
    let zones = load_zones(&opts.zones_file)
        .map_err(|e| ServeError::Config(format!("{}: {e}", opts.zones_file.display())))?;

    let lsp_cfg = NodeConfig::new(Role::Lsp, &opts.listen(1), &opts.zones_file);
    let lsp = serve(lsp_cfg).await?;

    let mut csp_cfg = NodeConfig::new(Role::Csp, &opts.listen(0), &opts.zones_file);
    csp_cfg.lsp_endpoint = Some(lsp.endpoint());
    csp_cfg.grant_on_escalation = Some(opts.grant_on_escalation);
    csp_cfg.heartbeat_ms = opts.heartbeat_ms;
    let csp = serve(csp_cfg).await?;

    let seeds = opts.seeds_dir();
    let mut cus = Vec::new();
    for (i, zone) in zones.zone_ids().enumerate() {
        let mut cfg = NodeConfig::new(Role::Cu, &opts.listen(10 + i as u16), &opts.zones_file);
        cfg.lsp_endpoint = Some(lsp.endpoint());
        cfg.csp_endpoint = Some(csp.endpoint());
        cfg.zone_id = Some(zone.to_string());
        cfg.heartbeat_ms = opts.heartbeat_ms;
        let seed = seeds.join(format!("{zone}.jsonl"));
        cfg.seed_file = seed.exists().then_some(seed);
        cus.push((zone.to_string(), serve(cfg).await?));
    }

    let demo = Demo { lsp, csp, cus };
    wait_ready(&demo).await?;
    Ok(demo)
}

async fn wait_ready(demo: &Demo) -> Result<(), ServeError> {
    let csp = NodeClient::new(&demo.csp_endpoint());
    let deadline = Instant::now() + READY_TIMEOUT;
    loop {
        let mut ready = true;
        for (zone, _) in &demo.cus {
            let routed = matches!(csp.route(zone).await, Ok(env) if env.is_ok());
            ready &= routed;
        }
        if ready {
            return Ok(());
        }
        if Instant::now() > deadline {
            return Err(ServeError::Config("cloud units did not register with the CSP in time".into()));
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
}
