//! Vocabulary shared by every tier: phone-number identities, service
//! categories, restaurants and session tokens.

use std::collections::BTreeSet;
use std::fmt;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geolocation::{GeoPoint, ZoneMap};

const PHONE_MIN_DIGITS: usize = 7;
const PHONE_MAX_DIGITS: usize = 15;
const CATEGORY_MAX_LEN: usize = 32;

/// Canonical phone number: 7 to 15 ASCII digits, nothing else.
///
/// This is the user's unique identity at the location service provider.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PhoneNumber(String);

/// Strips an optional leading `+` and any spaces or hyphens, then checks that
/// 7 to 15 decimal digits remain.
pub fn canonicalize_phone(raw: &str) -> Result<PhoneNumber> {
    let trimmed = raw.trim();
    let body = trimmed.strip_prefix('+').unwrap_or(trimmed);
    let digits: String = body.chars().filter(|c| *c != ' ' && *c != '-').collect();
    let len = digits.len();
    if !(PHONE_MIN_DIGITS..=PHONE_MAX_DIGITS).contains(&len)
        || !digits.bytes().all(|b| b.is_ascii_digit())
    {
        return Err(Error::InvalidPhone(raw.to_string()));
    }
    Ok(PhoneNumber(digits))
}

impl PhoneNumber {
    pub fn parse(raw: &str) -> Result<Self> {
        canonicalize_phone(raw)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PhoneNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for PhoneNumber {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for PhoneNumber {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        canonicalize_phone(&raw).map_err(serde::de::Error::custom)
    }
}

/// A food style, which doubles as the service category a user subscribes to.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ServiceCategory(String);

impl ServiceCategory {
    /// Case-insensitive on input; stored lowercase. Must match `[a-z0-9_-]{1,32}`.
    pub fn parse(raw: &str) -> Result<Self> {
        let lower = raw.trim().to_ascii_lowercase();
        let ok = (1..=CATEGORY_MAX_LEN).contains(&lower.len())
            && lower
                .bytes()
                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_' || b == b'-');
        if ok {
            Ok(Self(lower))
        } else {
            Err(Error::InvalidCategory(raw.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ServiceCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for ServiceCategory {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for ServiceCategory {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        Self::parse(&raw).map_err(serde::de::Error::custom)
    }
}

/// Identifier of a zone. Used in URL paths, so whitespace and `/` are rejected.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ZoneId(String);

impl ZoneId {
    pub fn parse(raw: &str) -> Result<Self> {
        if raw.is_empty() || raw.chars().any(|c| c.is_whitespace() || c == '/') {
            return Err(Error::InvalidField(format!("zone id {raw:?}")));
        }
        Ok(Self(raw.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ZoneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for ZoneId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for ZoneId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        Self::parse(&raw).map_err(serde::de::Error::custom)
    }
}

/// A registered user.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserAccount {
    pub user_id: PhoneNumber,
    /// 16-byte salt followed by SHA-256(salt || password).
    pub credential_hash: Vec<u8>,
    pub subscriptions: BTreeSet<ServiceCategory>,
    /// UTC seconds.
    pub created_at: u64,
}

/// A restaurant record held by a cloud unit.
///
/// Serializes flat (`x`/`y` at top level), the same shape as a seed-file line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Restaurant {
    pub restaurant_id: String,
    pub name: String,
    pub address: String,
    pub contact: PhoneNumber,
    pub food_style: ServiceCategory,
    #[serde(flatten)]
    pub position: GeoPoint,
    pub zone_id: ZoneId,
}

/// Checks a record against the zone map: non-empty id/name/address and a
/// position inside the polygon of the zone it names.
pub fn validate_restaurant(record: Restaurant, zones: &ZoneMap) -> Result<Restaurant> {
    if record.restaurant_id.trim().is_empty() {
        return Err(Error::InvalidField("restaurant_id is empty".into()));
    }
    if record.name.trim().is_empty() {
        return Err(Error::InvalidField(format!("{}: name is empty", record.restaurant_id)));
    }
    if record.address.trim().is_empty() {
        return Err(Error::InvalidField(format!("{}: address is empty", record.restaurant_id)));
    }
    if !record.position.is_finite() {
        return Err(Error::InvalidField(format!("{}: position not finite", record.restaurant_id)));
    }
    let zone = zones
        .zone(&record.zone_id)
        .ok_or_else(|| Error::UnknownZone(record.zone_id.to_string()))?;
    if !zone.contains(record.position) {
        return Err(Error::ZoneMismatch(record.restaurant_id.clone()));
    }
    Ok(record)
}

/// Opaque 32-byte bearer credential, rendered as 64 lowercase hex characters.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Token([u8; 32]);

impl Token {
    pub fn generate() -> Self {
        Self(rand::random())
    }

    pub fn parse(hex_str: &str) -> Result<Self> {
        let mut bytes = [0u8; 32];
        if hex_str.len() != 64 || hex_str.bytes().any(|b| b.is_ascii_uppercase()) {
            return Err(Error::InvalidToken);
        }
        hex::decode_to_slice(hex_str, &mut bytes).map_err(|_| Error::InvalidToken)?;
        Ok(Self(bytes))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Never log a live credential in full.
        write!(f, "Token({}…)", &self.to_hex()[..8])
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// A session issued at login.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthToken {
    pub token: Token,
    pub user_id: PhoneNumber,
    pub issued_at: u64,
    pub current_zone: Option<ZoneId>,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
