//! On-disk formats: the zones file, restaurant seed files, the CSP audit log
//! and the LSP account log. All are UTF-8; the line-oriented ones hold one
//! JSON object per line.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{PhoneNumber, Restaurant, ServiceCategory, UserAccount, ZoneId};
use crate::error::{Error, Result};
use crate::geolocation::{GeoPoint, Zone, ZoneMap};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZoneSpec {
    pub zone_id: String,
    pub display_name: String,
    /// `[x, y]` pairs in metres.
    pub polygon: Vec<[f64; 2]>,
}

/// `{"zones": [...], "rfid_tags": {"tag": "zone_id"}}`
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZonesFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<u32>,
    pub zones: Vec<ZoneSpec>,
    #[serde(default)]
    pub rfid_tags: BTreeMap<String, String>,
}

impl ZonesFile {
    pub fn into_map(self) -> Result<ZoneMap> {
        let zones = self
            .zones
            .into_iter()
            .map(|z| {
                let polygon = z.polygon.iter().map(|[x, y]| GeoPoint::new(*x, *y)).collect();
                Zone::new(&z.zone_id, &z.display_name, polygon)
            })
            .collect::<Result<Vec<_>>>()?;
        let tags = self
            .rfid_tags
            .into_iter()
            .map(|(tag, zone)| Ok((tag, ZoneId::parse(&zone)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        ZoneMap::new(zones, tags)
    }

    pub fn from_map(map: &ZoneMap) -> Self {
        Self {
            v: Some(1),
            zones: map
                .zones()
                .map(|z| ZoneSpec {
                    zone_id: z.zone_id.to_string(),
                    display_name: z.display_name.clone(),
                    polygon: z.polygon().iter().map(|p| [p.x, p.y]).collect(),
                })
                .collect(),
            rfid_tags: map
                .rfid_tags()
                .iter()
                .map(|(t, z)| (t.clone(), z.to_string()))
                .collect(),
        }
    }
}

pub fn parse_zones(text: &str) -> Result<ZoneMap> {
    let file: ZonesFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    file.into_map()
}

pub fn load_zones(path: &Path) -> Result<ZoneMap> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
        line: 0,
        message: format!("{}: {e}", path.display()),
    })?;
    parse_zones(&text)
}

/// One line of a restaurants seed file, before semantic validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedRecord {
    pub restaurant_id: String,
    pub name: String,
    pub address: String,
    pub contact: String,
    pub food_style: String,
    pub x: f64,
    pub y: f64,
    pub zone_id: String,
}

impl SeedRecord {
    /// Field-level checks only; zone membership is checked separately.
    pub fn to_restaurant(&self) -> Result<Restaurant> {
        Ok(Restaurant {
            restaurant_id: self.restaurant_id.clone(),
            name: self.name.clone(),
            address: self.address.clone(),
            contact: PhoneNumber::parse(&self.contact)?,
            food_style: ServiceCategory::parse(&self.food_style)?,
            position: GeoPoint::new(self.x, self.y),
            zone_id: ZoneId::parse(&self.zone_id)?,
        })
    }
}

impl From<&Restaurant> for SeedRecord {
    fn from(r: &Restaurant) -> Self {
        Self {
            restaurant_id: r.restaurant_id.clone(),
            name: r.name.clone(),
            address: r.address.clone(),
            contact: r.contact.to_string(),
            food_style: r.food_style.to_string(),
            x: r.position.x,
            y: r.position.y,
            zone_id: r.zone_id.to_string(),
        }
    }
}

/// Parses every non-blank line; the first malformed line aborts with its
/// 1-based line number.
pub fn parse_seed(text: &str) -> Result<Vec<(usize, SeedRecord)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str::<SeedRecord>(line)
                .map(|r| (i + 1, r))
                .map_err(|e| Error::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })
        })
        .collect()
}

pub fn write_seed<'a>(records: impl IntoIterator<Item = &'a Restaurant>) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(&SeedRecord::from(r)).expect("seed record serializes"));
        out.push('\n');
    }
    out
}

/// One escalation as recorded by the CSP.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub request_id: String,
    pub user_id: PhoneNumber,
    pub origin_zone: ZoneId,
    pub category: ServiceCategory,
    /// UTC seconds.
    pub timestamp: u64,
}

/// Persisted account; `credential_hash` is hex.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccountRecord {
    pub user_id: PhoneNumber,
    pub credential_hash: String,
    pub subscriptions: Vec<ServiceCategory>,
    pub created_at: u64,
}

impl From<&UserAccount> for AccountRecord {
    fn from(a: &UserAccount) -> Self {
        Self {
            user_id: a.user_id.clone(),
            credential_hash: hex::encode(&a.credential_hash),
            subscriptions: a.subscriptions.iter().cloned().collect(),
            created_at: a.created_at,
        }
    }
}

impl AccountRecord {
    pub fn into_account(self) -> Result<UserAccount> {
        let credential_hash = hex::decode(&self.credential_hash)
            .ok()
            .filter(|h| !h.is_empty())
            .ok_or_else(|| Error::InvalidField(format!("{}: credential_hash", self.user_id)))?;
        Ok(UserAccount {
            user_id: self.user_id,
            credential_hash,
            subscriptions: self.subscriptions.into_iter().collect(),
            created_at: self.created_at,
        })
    }
}

/// Generic reader for the line-delimited logs.
pub fn parse_lines<T: serde::de::DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
