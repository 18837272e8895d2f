//! Cloud service provider state: the directory of cloud units, the
//! escalation audit log, and merging of cross-zone search results.
//!
//! Network fan-out is driven by the caller; this module decides where to send
//! requests and how to combine what comes back.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::time::{Duration, Instant};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::domain::{unix_now, PhoneNumber, Restaurant, ServiceCategory, ZoneId};
use crate::error::{Error, Result};
use crate::formats::AuditRecord;

pub const HEARTBEAT_INTERVAL: Duration = Duration::from_secs(5);
/// An endpoint is dead after this many missed heartbeats.
pub const MISSED_BEATS_LIMIT: u32 = 3;
pub const FAN_OUT_TIMEOUT: Duration = Duration::from_secs(2);

/// A cloud unit asking the CSP to serve a category the user is not
/// subscribed to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EscalationRequest {
    pub request_id: String,
    pub user_id: PhoneNumber,
    pub origin_zone: ZoneId,
    pub category: ServiceCategory,
}

impl EscalationRequest {
    pub fn new(user_id: PhoneNumber, origin_zone: ZoneId, category: ServiceCategory) -> Self {
        let id: [u8; 16] = rand::random();
        Self {
            request_id: hex::encode(id),
            user_id,
            origin_zone,
            category,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EscalationResult {
    /// Matching restaurants per zone, each list sorted by id. Zones without
    /// matches are omitted.
    pub grouped: BTreeMap<ZoneId, Vec<Restaurant>>,
    pub granted_subscription: bool,
    /// Zones whose cloud unit could not be reached.
    #[serde(default)]
    pub failed_zones: Vec<ZoneId>,
}

impl EscalationResult {
    pub fn is_partial(&self) -> bool {
        !self.failed_zones.is_empty()
    }

    /// Zone order, then id order.
    pub fn flattened(&self) -> Vec<Restaurant> {
        self.grouped.values().flatten().cloned().collect()
    }
}

#[derive(Debug, Clone)]
struct Endpoint {
    addr: String,
    last_heartbeat: Instant,
}

#[derive(Debug, Default)]
struct ZoneEntry {
    endpoints: Vec<Endpoint>,
    cursor: usize,
}

/// Snapshot row for operators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DirectoryEntry {
    pub zone_id: ZoneId,
    pub endpoint: String,
    pub alive: bool,
    pub heartbeat_age_ms: u64,
}

/// Zone to cloud-unit endpoints, with liveness from heartbeats.
#[derive(Debug)]
pub struct CuDirectory {
    zones: BTreeSet<ZoneId>,
    liveness: Duration,
    entries: Mutex<BTreeMap<ZoneId, ZoneEntry>>,
}

impl CuDirectory {
    pub fn new(zones: impl IntoIterator<Item = ZoneId>) -> Self {
        Self::with_heartbeat(zones, HEARTBEAT_INTERVAL)
    }

    pub fn with_heartbeat(zones: impl IntoIterator<Item = ZoneId>, interval: Duration) -> Self {
        Self {
            zones: zones.into_iter().collect(),
            liveness: interval * MISSED_BEATS_LIMIT,
            entries: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn register(&self, zone: &ZoneId, endpoint: &str) -> Result<()> {
        self.register_at(zone, endpoint, Instant::now())
    }

    /// Adds the endpoint or refreshes its heartbeat.
    pub fn register_at(&self, zone: &ZoneId, endpoint: &str, now: Instant) -> Result<()> {
        if !self.zones.contains(zone) {
            return Err(Error::UnknownZone(zone.to_string()));
        }
        let mut entries = self.entries.lock();
        let entry = entries.entry(zone.clone()).or_default();
        match entry.endpoints.iter_mut().find(|e| e.addr == endpoint) {
            Some(e) => e.last_heartbeat = now,
            None => entry.endpoints.push(Endpoint {
                addr: endpoint.to_string(),
                last_heartbeat: now,
            }),
        }
        Ok(())
    }

    fn alive(&self, e: &Endpoint, now: Instant) -> bool {
        now.saturating_duration_since(e.last_heartbeat) <= self.liveness
    }

    pub fn route(&self, zone: &ZoneId) -> Result<String> {
        self.route_at(zone, Instant::now())
    }

    /// Round-robin over the zone's live endpoints.
    pub fn route_at(&self, zone: &ZoneId, now: Instant) -> Result<String> {
        let mut entries = self.entries.lock();
        let entry = entries
            .get_mut(zone)
            .ok_or_else(|| Error::NoCuForZone(zone.to_string()))?;
        let live: Vec<usize> = (0..entry.endpoints.len())
            .filter(|&i| self.alive(&entry.endpoints[i], now))
            .collect();
        if live.is_empty() {
            return Err(Error::NoCuForZone(zone.to_string()));
        }
        let pick = live[entry.cursor % live.len()];
        entry.cursor = entry.cursor.wrapping_add(1);
        Ok(entry.endpoints[pick].addr.clone())
    }

    /// One endpoint per zone that has any live endpoint, in zone order.
    pub fn fan_out_targets_at(&self, now: Instant) -> Vec<(ZoneId, String)> {
        let zones: Vec<ZoneId> = self.entries.lock().keys().cloned().collect();
        zones
            .into_iter()
            .filter_map(|z| self.route_at(&z, now).ok().map(|ep| (z, ep)))
            .collect()
    }

    pub fn fan_out_targets(&self) -> Vec<(ZoneId, String)> {
        self.fan_out_targets_at(Instant::now())
    }

    /// Zones that have registered at least once but have no live endpoint.
    pub fn dead_zones_at(&self, now: Instant) -> Vec<ZoneId> {
        self.entries
            .lock()
            .iter()
            .filter(|(_, e)| !e.endpoints.iter().any(|ep| self.alive(ep, now)))
            .map(|(z, _)| z.clone())
            .collect()
    }

    pub fn snapshot(&self) -> Vec<DirectoryEntry> {
        let now = Instant::now();
        let entries = self.entries.lock();
        entries
            .iter()
            .flat_map(|(zone, e)| {
                e.endpoints.iter().map(move |ep| DirectoryEntry {
                    zone_id: zone.clone(),
                    endpoint: ep.addr.clone(),
                    alive: self.alive(ep, now),
                    heartbeat_age_ms: now.saturating_duration_since(ep.last_heartbeat).as_millis() as u64,
                })
            })
            .collect()
    }

    pub fn knows_zone(&self, zone: &ZoneId) -> bool {
        self.zones.contains(zone)
    }
}

/// Append-only record of escalations, at most one entry per request id.
#[derive(Debug, Default)]
pub struct AuditLog {
    inner: Mutex<(Vec<AuditRecord>, HashSet<String>)>,
}

impl AuditLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the new record, or `None` when the request id was already logged.
    pub fn append(&self, req: &EscalationRequest) -> Option<AuditRecord> {
        let mut inner = self.inner.lock();
        if !inner.1.insert(req.request_id.clone()) {
            return None;
        }
        let record = AuditRecord {
            request_id: req.request_id.clone(),
            user_id: req.user_id.clone(),
            origin_zone: req.origin_zone.clone(),
            category: req.category.clone(),
            timestamp: unix_now(),
        };
        inner.0.push(record.clone());
        Some(record)
    }

    pub fn records(&self) -> Vec<AuditRecord> {
        self.inner.lock().0.clone()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Outcome of asking one zone's cloud unit for a category.
pub type ZoneAnswer = std::result::Result<Vec<Restaurant>, String>;

/// Groups per-zone answers, keeping only records of the requested category
/// that belong to the answering zone. Failed zones are collected separately.
pub fn merge_search(
    category: &ServiceCategory,
    answers: impl IntoIterator<Item = (ZoneId, ZoneAnswer)>,
) -> (BTreeMap<ZoneId, Vec<Restaurant>>, Vec<ZoneId>) {
    let mut grouped = BTreeMap::new();
    let mut failed = Vec::new();
    for (zone, answer) in answers {
        match answer {
            Ok(records) => {
                let mut matching: Vec<Restaurant> = records
                    .into_iter()
                    .filter(|r| &r.food_style == category && r.zone_id == zone)
                    .collect();
                if matching.is_empty() {
                    continue;
                }
                matching.sort_by(|a, b| a.restaurant_id.cmp(&b.restaurant_id));
                matching.dedup_by(|a, b| a.restaurant_id == b.restaurant_id);
                grouped.insert(zone, matching);
            }
            Err(_) => failed.push(zone),
        }
    }
    failed.sort();
    failed.dedup();
    (grouped, failed)
}

/// CSP-wide state.
#[derive(Debug)]
pub struct Csp {
    pub directory: CuDirectory,
    pub audit: AuditLog,
    /// Whether an escalation permanently subscribes the user to the category.
    pub grant_on_escalation: bool,
}

impl Csp {
    pub fn new(directory: CuDirectory, grant_on_escalation: bool) -> Self {
        Self {
            directory,
            audit: AuditLog::new(),
            grant_on_escalation,
        }
    }

    pub fn check_request(&self, req: &EscalationRequest) -> Result<()> {
        if !self.directory.knows_zone(&req.origin_zone) {
            return Err(Error::UnknownZone(req.origin_zone.to_string()));
        }
        Ok(())
    }
}
