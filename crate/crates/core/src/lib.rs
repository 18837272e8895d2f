//! Core logic for a location-based restaurant information service.
//!
//! Three tiers cooperate:
//!
//! - the location service provider ([`lsp`]) owns identities, sessions,
//!   category subscriptions and per-zone presence;
//! - one cloud unit per zone ([`cloud_unit`]) stores that zone's restaurants
//!   and serves subscribed categories directly;
//! - the cloud service provider ([`csp`]) keeps the cloud-unit directory and
//!   answers escalated requests with a cross-zone search.
//!
//! Users are placed into zones by [`geolocation`], either from beacon ranges
//! or from an RFID tag read. Everything here is free of network I/O; the
//! `lbs-net` crate exposes it over HTTP.

pub mod batch;
pub mod cloud_unit;
pub mod csp;
pub mod domain;
mod error;
pub mod formats;
pub mod geolocation;
pub mod lsp;

pub use error::{Error, Result};
