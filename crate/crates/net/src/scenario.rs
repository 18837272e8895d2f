//! Scripted user journeys against a running topology.
//!
//! ```json
//! {"v": 1, "steps": [
//!   {"actor": "ana", "action": "register",
//!    "args": {"phone": "+1 555 0100", "password": "s3cret-pw", "preferences": ["indian"]}},
//!   {"actor": "ana", "action": "login", "expect": {"message": "Authenticated User"}},
//!   {"actor": "ana", "action": "locate", "args": {"method": "rfid", "tag": "T-17"}},
//!   {"actor": "ana", "action": "list"},
//!   {"actor": "ana", "action": "detail", "args": {"restaurant_id": "dt-001"}}
//! ]}
//! ```
//!
//! `expect` is matched as a subset of the response envelope: objects may
//! carry extra keys, arrays must have equal length, numbers compare within
//! [`NUMERIC_TOLERANCE`]. A step without `expect` must merely succeed.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::client::{ClientError, NodeClient};
use crate::envelope::Envelope;

pub const SCENARIO_VERSION: u32 = 1;
pub const NUMERIC_TOLERANCE: f64 = 1e-6;
pub const REDACTED: &str = "<redacted>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Register,
    Login,
    Locate,
    List,
    Query,
    Detail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    pub actor: String,
    pub action: Action,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub args: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub v: u32,
    #[serde(default)]
    pub steps: Vec<Step>,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("ParseError: {0}")]
    Parse(String),
    #[error("StepFailed: step {index}: {reason}")]
    StepFailed { index: usize, reason: String },
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        if s.v != SCENARIO_VERSION {
            return Err(ScenarioError::Parse(format!("unsupported scenario version {}", s.v)));
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Parse(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub method: String,
    pub node: String,
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    pub actor: String,
    pub action: Action,
    pub request: RequestRecord,
    /// `None` when the node could not be reached.
    pub response: Option<Envelope>,
    pub latency_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub served_by: Option<String>,
    pub matched: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mismatch: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Transcript {
    pub steps: Vec<StepRecord>,
}

impl Transcript {
    pub fn first_failure(&self) -> Option<usize> {
        self.steps.iter().find(|s| !s.matched).map(|s| s.index)
    }

    pub fn passed(&self) -> bool {
        self.first_failure().is_none()
    }

    /// Fails with the first mismatching step.
    pub fn into_result(self) -> Result<Self, ScenarioError> {
        match self.steps.iter().find(|s| !s.matched) {
            Some(s) => Err(ScenarioError::StepFailed {
                index: s.index,
                reason: s.mismatch.clone().unwrap_or_default(),
            }),
            None => Ok(self),
        }
    }

    /// The transcript with latencies zeroed, for run-to-run comparison.
    pub fn normalized(&self) -> Transcript {
        let mut t = self.clone();
        for s in &mut t.steps {
            s.latency_ms = 0.0;
        }
        t
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcript serializes")
    }
}

/// Checks that `expected` is a subset of `actual`, returning the first
/// difference as a JSON-pointer-ish path.
pub fn match_subset(expected: &Value, actual: &Value) -> Result<(), String> {
    fn walk(expected: &Value, actual: &Value, path: &str) -> Result<(), String> {
        match (expected, actual) {
            (Value::Object(e), Value::Object(a)) => {
                for (k, ev) in e {
                    let sub = format!("{path}/{k}");
                    match a.get(k) {
                        Some(av) => walk(ev, av, &sub)?,
                        None if ev.is_null() => {}
                        None => return Err(format!("{sub}: missing")),
                    }
                }
                Ok(())
            }
            (Value::Array(e), Value::Array(a)) => {
                if e.len() != a.len() {
                    return Err(format!("{path}: expected {} items, got {}", e.len(), a.len()));
                }
                for (i, (ev, av)) in e.iter().zip(a).enumerate() {
                    walk(ev, av, &format!("{path}/{i}"))?;
                }
                Ok(())
            }
            (Value::Number(e), Value::Number(a)) => {
                let (e, a) = (e.as_f64().unwrap_or(f64::NAN), a.as_f64().unwrap_or(f64::NAN));
                if (e - a).abs() <= NUMERIC_TOLERANCE * e.abs().max(1.0) {
                    Ok(())
                } else {
                    Err(format!("{path}: expected {e}, got {a}"))
                }
            }
            (e, a) if e == a => Ok(()),
            (e, a) => Err(format!("{path}: expected {e}, got {a}")),
        }
    }
    walk(expected, actual, "")
}

#[derive(Debug, Default, Clone)]
struct ActorState {
    user_id: Option<String>,
    password: Option<String>,
    token: Option<String>,
    zone: Option<String>,
}

/// Executes scenarios. CUs are found through the CSP directory unless an
/// explicit endpoint is given for the zone.
#[derive(Debug, Clone)]
pub struct Runner {
    lsp: NodeClient,
    csp: NodeClient,
    cu_overrides: BTreeMap<String, String>,
}

enum Target {
    Lsp,
    Cu,
}

impl Runner {
    pub fn new(lsp_endpoint: &str, csp_endpoint: &str) -> Self {
        Self {
            lsp: NodeClient::new(lsp_endpoint),
            csp: NodeClient::new(csp_endpoint),
            cu_overrides: BTreeMap::new(),
        }
    }

    pub fn with_cu(mut self, zone_id: &str, endpoint: &str) -> Self {
        self.cu_overrides.insert(zone_id.to_string(), endpoint.to_string());
        self
    }

    async fn cu_for(&self, zone: &str) -> Result<NodeClient, String> {
        if let Some(ep) = self.cu_overrides.get(zone) {
            return Ok(NodeClient::new(ep));
        }
        let env = self.csp.route(zone).await.map_err(|e| e.to_string())?;
        match env.data_field("endpoint").and_then(Value::as_str) {
            Some(ep) if env.is_ok() => Ok(NodeClient::new(ep)),
            _ => Err(format!("no cloud unit for zone {zone}: {}", env.message)),
        }
    }

    pub async fn run(&self, scenario: &Scenario) -> Transcript {
        let mut actors: HashMap<String, ActorState> = HashMap::new();
        let mut transcript = Transcript::default();
        for (index, step) in scenario.steps.iter().enumerate() {
            let state = actors.entry(step.actor.clone()).or_default();
            let record = self.run_step(index, step, state).await;
            tracing::debug!(index, matched = record.matched, "step done");
            transcript.steps.push(record);
        }
        transcript
    }

    async fn run_step(&self, index: usize, step: &Step, state: &mut ActorState) -> StepRecord {
        let arg = |k: &str| step.args.get(k).and_then(Value::as_str).map(str::to_string);
        let token = state.token.clone().unwrap_or_default();

        let (target, method, path, body): (Target, &str, String, Option<Value>) = match step.action {
            Action::Register => {
                let mut body = step.args.clone();
                if body.get("preferences").is_none() {
                    body["preferences"] = json!([]);
                }
                state.user_id = arg("phone");
                state.password = arg("password");
                (Target::Lsp, "POST", "/lsp/register".into(), Some(body))
            }
            Action::Login => {
                let body = json!({
                    "user_id": arg("user_id").or_else(|| state.user_id.clone()).unwrap_or_default(),
                    "password": arg("password").or_else(|| state.password.clone()).unwrap_or_default(),
                });
                (Target::Lsp, "POST", "/lsp/login".into(), Some(body))
            }
            Action::Locate => (Target::Lsp, "POST", "/locate".into(), Some(step.args.clone())),
            Action::List => (Target::Cu, "GET", "/cu/restaurants".into(), None),
            Action::Query => (
                Target::Cu,
                "POST",
                "/cu/query".into(),
                Some(json!({ "category": arg("category").unwrap_or_default() })),
            ),
            Action::Detail => (
                Target::Cu,
                "GET",
                format!("/cu/restaurants/{}", arg("restaurant_id").unwrap_or_default()),
                None,
            ),
        };

        let mut record = StepRecord {
            index,
            actor: step.actor.clone(),
            action: step.action,
            request: RequestRecord {
                method: method.to_string(),
                node: String::new(),
                path: path.clone(),
                body: body.clone().map(redact_request),
            },
            response: None,
            latency_ms: 0.0,
            served_by: None,
            matched: false,
            mismatch: None,
        };

        let client = match target {
            Target::Lsp => {
                record.request.node = "lsp".into();
                self.lsp.clone()
            }
            Target::Cu => {
                let Some(zone) = state.zone.clone() else {
                    record.mismatch = Some("actor has no located zone".into());
                    return record;
                };
                record.request.node = format!("cu:{zone}");
                match self.cu_for(&zone).await {
                    Ok(c) => c,
                    Err(e) => {
                        record.mismatch = Some(e);
                        return record;
                    }
                }
            }
        };

        let bearer = (!token.is_empty()).then_some(token.as_str());
        let started = Instant::now();
        let outcome: Result<Envelope, ClientError> = match (method, &body) {
            ("POST", Some(b)) => client.post(&path, b, bearer).await,
            _ => client.get(&path, bearer).await,
        };
        record.latency_ms = started.elapsed().as_secs_f64() * 1e3;

        let env = match outcome {
            Ok(env) => env,
            Err(e) => {
                record.mismatch = Some(e.to_string());
                return record;
            }
        };

        if env.is_ok() {
            match step.action {
                Action::Register => {
                    if let Some(id) = env.data_field("user_id").and_then(Value::as_str) {
                        state.user_id = Some(id.to_string());
                    }
                }
                Action::Login => {
                    state.token = env.data_field("token").and_then(Value::as_str).map(str::to_string);
                }
                Action::Locate => {
                    state.zone = env.data_field("zone_id").and_then(Value::as_str).map(str::to_string);
                }
                _ => {}
            }
        }
        record.served_by = env.data_field("served_by").and_then(Value::as_str).map(str::to_string);

        let actual = serde_json::to_value(&env).expect("envelope serializes");
        let expected = step.expect.clone().unwrap_or_else(|| json!({ "status": "ok" }));
        match match_subset(&expected, &actual) {
            Ok(()) => record.matched = true,
            Err(e) => record.mismatch = Some(e),
        }
        record.response = Some(redact_response(env));
        record
    }
}

fn redact_request(mut body: Value) -> Value {
    if let Some(p) = body.get_mut("password") {
        *p = json!(REDACTED);
    }
    body
}

fn redact_response(mut env: Envelope) -> Envelope {
    if let Some(t) = env.data.as_mut().and_then(|d| d.get_mut("token")) {
        *t = json!(REDACTED);
    }
    env
}
