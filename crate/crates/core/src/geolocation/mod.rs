//! Zone resolution from simulated GPS ranges or RFID tag reads.
//!
//! The service area is a flat local map in metres. Zones are simple polygons
//! with pairwise-disjoint interiors; a point on a shared edge belongs to the
//! zone with the lexicographically smallest id.

mod polygon;
mod trilateration;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::ZoneId;
use crate::error::{Error, Result};

pub use polygon::{is_simple, on_boundary, point_in_polygon, BOUNDARY_TOLERANCE};
pub use trilateration::{
    range_residual, trilaterate, trilaterate_fix, BeaconObservation, Fix, DEGENERACY_RATIO,
};

/// Metres east (`x`) and north (`y`) of the map origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub x: f64,
    pub y: f64,
}

impl GeoPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: GeoPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Zone {
    pub zone_id: ZoneId,
    pub display_name: String,
    polygon: Vec<GeoPoint>,
}

impl Zone {
    /// Validates that the polygon is simple with positive area.
    pub fn new(zone_id: &str, display_name: &str, polygon: Vec<GeoPoint>) -> Result<Self> {
        let zone_id = ZoneId::parse(zone_id)?;
        if polygon.len() < 3 {
            return Err(Error::InvalidZoneMap(format!("zone {zone_id}: fewer than 3 vertices")));
        }
        if polygon.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidZoneMap(format!("zone {zone_id}: non-finite vertex")));
        }
        if !polygon::is_simple(&polygon) {
            return Err(Error::InvalidZoneMap(format!("zone {zone_id}: polygon is not simple")));
        }
        if polygon::signed_area(&polygon).abs() <= 0.0 {
            return Err(Error::InvalidZoneMap(format!("zone {zone_id}: zero area")));
        }
        Ok(Self {
            zone_id,
            display_name: display_name.to_string(),
            polygon,
        })
    }

    pub fn polygon(&self) -> &[GeoPoint] {
        &self.polygon
    }

    /// Inside or on the boundary.
    pub fn contains(&self, p: GeoPoint) -> bool {
        point_in_polygon(p, &self.polygon)
    }

    pub fn area(&self) -> f64 {
        polygon::signed_area(&self.polygon).abs()
    }
}

/// All zones of a service area plus the RFID tag table.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneMap {
    // Ordered by id, so the first containing zone is the tie-break winner.
    zones: BTreeMap<ZoneId, Zone>,
    rfid_tags: BTreeMap<String, ZoneId>,
}

impl ZoneMap {
    /// Rejects duplicate ids, tags that point at missing zones and zones whose
    /// interiors overlap.
    pub fn new(zones: Vec<Zone>, rfid_tags: BTreeMap<String, ZoneId>) -> Result<Self> {
        let mut by_id = BTreeMap::new();
        for zone in zones {
            let id = zone.zone_id.clone();
            if by_id.insert(id.clone(), zone).is_some() {
                return Err(Error::InvalidZoneMap(format!("duplicate zone id {id}")));
            }
        }
        for (tag, zone) in &rfid_tags {
            if !by_id.contains_key(zone) {
                return Err(Error::InvalidZoneMap(format!(
                    "rfid tag {tag:?} maps to unknown zone {zone}"
                )));
            }
        }
        let list: Vec<&Zone> = by_id.values().collect();
        for (i, a) in list.iter().enumerate() {
            for b in &list[i + 1..] {
                if polygon::interiors_overlap(&a.polygon, &b.polygon) {
                    return Err(Error::InvalidZoneMap(format!(
                        "zones {} and {} overlap",
                        a.zone_id, b.zone_id
                    )));
                }
            }
        }
        Ok(Self {
            zones: by_id,
            rfid_tags,
        })
    }

    pub fn zone(&self, id: &ZoneId) -> Option<&Zone> {
        self.zones.get(id)
    }

    pub fn contains_zone(&self, id: &ZoneId) -> bool {
        self.zones.contains_key(id)
    }

    /// Zones in id order.
    pub fn zones(&self) -> impl Iterator<Item = &Zone> {
        self.zones.values()
    }

    pub fn zone_ids(&self) -> impl Iterator<Item = &ZoneId> {
        self.zones.keys()
    }

    pub fn rfid_tags(&self) -> &BTreeMap<String, ZoneId> {
        &self.rfid_tags
    }

    /// The zone containing `p`; on shared boundaries, the smallest zone id.
    pub fn zone_at(&self, p: GeoPoint) -> Option<&Zone> {
        self.zones.values().find(|z| z.contains(p))
    }

    pub fn len(&self) -> usize {
        self.zones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zones.is_empty()
    }
}

/// Trilaterate, then locate the fix on the map.
pub fn resolve_gps(observations: &[BeaconObservation], map: &ZoneMap) -> Result<(ZoneId, GeoPoint)> {
    let p = trilaterate(observations)?;
    map.zone_at(p)
        .map(|z| (z.zone_id.clone(), p))
        .ok_or(Error::NotCovered { x: p.x, y: p.y })
}

pub fn resolve_rfid(tag_id: &str, map: &ZoneMap) -> Result<ZoneId> {
    map.rfid_tags
        .get(tag_id)
        .cloned()
        .ok_or_else(|| Error::UnknownTag(tag_id.to_string()))
}
