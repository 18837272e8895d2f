//! A cloud unit serves one zone's restaurant records.
//!
//! Requests for categories the user subscribes to are answered from the local
//! store; anything else becomes an [`EscalationRequest`] for the CSP. Token
//! validation and the CSP call are performed by the caller, which keeps this
//! type free of I/O.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use crate::csp::{EscalationRequest, EscalationResult};
use crate::domain::{validate_restaurant, Restaurant, ServiceCategory, ZoneId};
use crate::error::{Error, Result};
use crate::formats::parse_seed;
use crate::geolocation::ZoneMap;
use crate::lsp::Introspection;

/// Records keyed by id, plus the category inverted index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RestaurantStore {
    by_id: BTreeMap<String, Restaurant>,
    by_category: BTreeMap<ServiceCategory, BTreeSet<String>>,
}

impl RestaurantStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false (and changes nothing) when the id is already present.
    pub fn insert(&mut self, r: Restaurant) -> bool {
        if self.by_id.contains_key(&r.restaurant_id) {
            return false;
        }
        self.by_category
            .entry(r.food_style.clone())
            .or_default()
            .insert(r.restaurant_id.clone());
        self.by_id.insert(r.restaurant_id.clone(), r);
        true
    }

    pub fn get(&self, id: &str) -> Option<&Restaurant> {
        self.by_id.get(id)
    }

    /// All records sorted by id.
    pub fn all(&self) -> Vec<Restaurant> {
        self.by_id.values().cloned().collect()
    }

    /// Records of one category, sorted by id.
    pub fn by_category(&self, category: &ServiceCategory) -> Vec<Restaurant> {
        self.by_category
            .get(category)
            .into_iter()
            .flatten()
            .filter_map(|id| self.by_id.get(id).cloned())
            .collect()
    }

    pub fn categories(&self) -> BTreeSet<ServiceCategory> {
        self.by_category.keys().cloned().collect()
    }

    pub fn index(&self) -> &BTreeMap<ServiceCategory, BTreeSet<String>> {
        &self.by_category
    }

    /// The inverted index rebuilt from scratch.
    pub fn rebuild_index(&self) -> BTreeMap<ServiceCategory, BTreeSet<String>> {
        let mut index: BTreeMap<ServiceCategory, BTreeSet<String>> = BTreeMap::new();
        for r in self.by_id.values() {
            index.entry(r.food_style.clone()).or_default().insert(r.restaurant_id.clone());
        }
        index
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }
}

/// A seed record that was skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub line: usize,
    pub restaurant_id: String,
    /// Error code name, e.g. `ZoneMismatch`.
    pub reason: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub loaded: usize,
    pub rejected: Vec<Rejection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ServedBy {
    Local,
    Escalated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub restaurants: Vec<Restaurant>,
    pub served_by: ServedBy,
    pub source_zone: ZoneId,
    /// Present when escalated.
    pub escalation: Option<EscalationResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum QueryPlan {
    Local(QueryResult),
    Escalate(EscalationRequest),
}

fn reason_code(e: &Error) -> &'static str {
    match e {
        Error::ZoneMismatch(_) | Error::UnknownZone(_) => "ZoneMismatch",
        Error::InvalidPhone(_) => "InvalidPhone",
        _ => "InvalidField",
    }
}

#[derive(Debug)]
pub struct CloudUnit {
    zone: ZoneId,
    zones: Arc<ZoneMap>,
    // Swapped wholesale on ingest so readers never see a partial load.
    store: RwLock<Arc<RestaurantStore>>,
}

impl CloudUnit {
    pub fn new(zone: ZoneId, zones: Arc<ZoneMap>) -> Result<Self> {
        if !zones.contains_zone(&zone) {
            return Err(Error::UnknownZone(zone.to_string()));
        }
        Ok(Self {
            zone,
            zones,
            store: RwLock::new(Arc::new(RestaurantStore::new())),
        })
    }

    pub fn zone(&self) -> &ZoneId {
        &self.zone
    }

    pub fn zone_map(&self) -> &ZoneMap {
        &self.zones
    }

    pub fn store(&self) -> Arc<RestaurantStore> {
        Arc::clone(&self.store.read())
    }

    /// Replaces the store with the valid records of a seed file's text.
    /// A malformed line aborts the whole load and leaves the store untouched.
    pub fn ingest_text(&self, text: &str) -> Result<IngestReport> {
        let parsed = parse_seed(text)?;
        let mut store = RestaurantStore::new();
        let mut rejected = Vec::new();
        for (line, rec) in parsed {
            let outcome = rec.to_restaurant().and_then(|r| {
                if r.zone_id != self.zone {
                    return Err(Error::ZoneMismatch(r.restaurant_id));
                }
                validate_restaurant(r, &self.zones)
            });
            let reject = |e: &Error| Rejection {
                line,
                restaurant_id: rec.restaurant_id.clone(),
                reason: reason_code(e).to_string(),
                detail: e.to_string(),
            };
            match outcome {
                Ok(r) => {
                    if !store.insert(r) {
                        let e = Error::InvalidField(format!("duplicate restaurant_id {}", rec.restaurant_id));
                        rejected.push(reject(&e));
                    }
                }
                Err(e) => rejected.push(reject(&e)),
            }
        }
        let loaded = store.len();
        *self.store.write() = Arc::new(store);
        Ok(IngestReport { loaded, rejected })
    }

    pub fn ingest_restaurants(&self, seed_file: &Path) -> Result<IngestReport> {
        let text = std::fs::read_to_string(seed_file).map_err(|e| Error::Parse {
            line: 0,
            message: format!("{}: {e}", seed_file.display()),
        })?;
        self.ingest_text(&text)
    }

    pub fn list_restaurants(&self, zone: &ZoneId) -> Result<Vec<Restaurant>> {
        self.check_zone(zone)?;
        Ok(self.store().all())
    }

    fn check_zone(&self, zone: &ZoneId) -> Result<()> {
        if zone == &self.zone {
            Ok(())
        } else {
            Err(Error::WrongZone {
                requested: zone.to_string(),
                served: self.zone.to_string(),
            })
        }
    }

    /// The requester must currently be located in this unit's zone.
    pub fn check_requester(&self, who: &Introspection) -> Result<()> {
        match &who.current_zone {
            Some(z) => self.check_zone(z),
            None => Err(Error::WrongZone {
                requested: String::new(),
                served: self.zone.to_string(),
            }),
        }
    }

    /// Serve locally when subscribed, otherwise prepare an escalation.
    pub fn plan_query(&self, who: &Introspection, category: &ServiceCategory) -> Result<QueryPlan> {
        self.check_requester(who)?;
        if who.subscriptions.contains(category) {
            Ok(QueryPlan::Local(QueryResult {
                restaurants: self.store().by_category(category),
                served_by: ServedBy::Local,
                source_zone: self.zone.clone(),
                escalation: None,
            }))
        } else {
            Ok(QueryPlan::Escalate(EscalationRequest::new(
                who.user_id.clone(),
                self.zone.clone(),
                category.clone(),
            )))
        }
    }

    /// Wraps the CSP's answer for the user.
    pub fn relay(&self, result: EscalationResult) -> QueryResult {
        QueryResult {
            restaurants: result.flattened(),
            served_by: ServedBy::Escalated,
            source_zone: self.zone.clone(),
            escalation: Some(result),
        }
    }

    /// Full record, only for users subscribed to its category.
    pub fn get_restaurant_info(&self, who: &Introspection, restaurant_id: &str) -> Result<Restaurant> {
        let store = self.store();
        let record = store
            .get(restaurant_id)
            .ok_or_else(|| Error::NotFound(restaurant_id.to_string()))?;
        if who.subscriptions.contains(&record.food_style) {
            Ok(record.clone())
        } else {
            Err(Error::NotAuthorized(record.food_style.to_string()))
        }
    }

    /// Category search on behalf of the CSP; no user context.
    pub fn search(&self, category: &ServiceCategory) -> Vec<Restaurant> {
        self.store().by_category(category)
    }

    pub fn offered_categories(&self) -> BTreeSet<ServiceCategory> {
        self.store().categories()
    }
}
