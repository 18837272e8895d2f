//! Bulk geolocation over many independent inputs.
//!
//! With the `parallel` feature (on by default) the public entry points fan
//! out over rayon's global pool; without it they run the `*_sequential`
//! variants. The sequential variants are always available so both paths can
//! be compared directly.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::domain::ZoneId;
use crate::error::Result;
use crate::geolocation::{resolve_gps, trilaterate_fix, BeaconObservation, Fix, GeoPoint, ZoneMap};

pub fn trilaterate_batch_sequential(instances: &[Vec<BeaconObservation>]) -> Vec<Result<Fix>> {
    instances.iter().map(|o| trilaterate_fix(o)).collect()
}

pub fn trilaterate_batch(instances: &[Vec<BeaconObservation>]) -> Vec<Result<Fix>> {
    #[cfg(feature = "parallel")]
    {
        instances.par_iter().map(|o| trilaterate_fix(o)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        trilaterate_batch_sequential(instances)
    }
}

pub fn locate_points_sequential(map: &ZoneMap, points: &[GeoPoint]) -> Vec<Option<ZoneId>> {
    points
        .iter()
        .map(|p| map.zone_at(*p).map(|z| z.zone_id.clone()))
        .collect()
}

/// Zone for each point, `None` where uncovered.
pub fn locate_points(map: &ZoneMap, points: &[GeoPoint]) -> Vec<Option<ZoneId>> {
    #[cfg(feature = "parallel")]
    {
        points
            .par_iter()
            .map(|p| map.zone_at(*p).map(|z| z.zone_id.clone()))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        locate_points_sequential(map, points)
    }
}

pub fn resolve_gps_batch(
    map: &ZoneMap,
    instances: &[Vec<BeaconObservation>],
) -> Vec<Result<(ZoneId, GeoPoint)>> {
    #[cfg(feature = "parallel")]
    {
        instances.par_iter().map(|o| resolve_gps(o, map)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        instances.iter().map(|o| resolve_gps(o, map)).collect()
    }
}
