//! Location service provider: accounts keyed by phone number, bearer-token
//! sessions, category authorization and per-zone presence.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::{Duration, Instant};

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{
    canonicalize_phone, unix_now, AuthToken, PhoneNumber, ServiceCategory, Token, UserAccount, ZoneId,
};
use crate::error::{Error, Result};

pub const MIN_PASSWORD_LEN: usize = 8;
const SALT_LEN: usize = 16;

fn hash_credential(salt: &[u8], password: &str) -> Vec<u8> {
    let mut hasher = Sha256::new();
    hasher.update(salt);
    hasher.update(password.as_bytes());
    let mut out = salt.to_vec();
    out.extend_from_slice(&hasher.finalize());
    out
}

fn new_credential(password: &str) -> Vec<u8> {
    let salt: [u8; SALT_LEN] = rand::random();
    hash_credential(&salt, password)
}

fn constant_time_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

fn credential_matches(stored: &[u8], password: &str) -> bool {
    if stored.len() <= SALT_LEN {
        return false;
    }
    constant_time_eq(stored, &hash_credential(&stored[..SALT_LEN], password))
}

/// What a cloud unit learns about a bearer token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Introspection {
    pub user_id: PhoneNumber,
    pub subscriptions: BTreeSet<ServiceCategory>,
    pub current_zone: Option<ZoneId>,
}

#[derive(Debug, Clone)]
struct Session {
    token: AuthToken,
    issued: Instant,
}

#[derive(Debug, Default)]
struct PresenceTable {
    by_zone: HashMap<ZoneId, BTreeSet<PhoneNumber>>,
    by_user: HashMap<PhoneNumber, ZoneId>,
}

impl PresenceTable {
    fn place(&mut self, user: &PhoneNumber, zone: &ZoneId) {
        if let Some(previous) = self.by_user.insert(user.clone(), zone.clone()) {
            if let Some(set) = self.by_zone.get_mut(&previous) {
                set.remove(user);
            }
        }
        self.by_zone.entry(zone.clone()).or_default().insert(user.clone());
    }

    fn count(&self, zone: &ZoneId) -> usize {
        self.by_zone.get(zone).map_or(0, BTreeSet::len)
    }
}

#[derive(Debug, Clone, Default)]
pub struct LspConfig {
    /// `None` means sessions live until logout.
    pub session_ttl: Option<Duration>,
}

/// All stores are internally synchronized; share behind an `Arc`.
#[derive(Debug)]
pub struct Lsp {
    zones: BTreeSet<ZoneId>,
    config: LspConfig,
    accounts: RwLock<HashMap<PhoneNumber, UserAccount>>,
    sessions: RwLock<HashMap<Token, Session>>,
    presence: Mutex<PresenceTable>,
}

impl Lsp {
    pub fn new(zones: impl IntoIterator<Item = ZoneId>, config: LspConfig) -> Self {
        Self {
            zones: zones.into_iter().collect(),
            config,
            accounts: RwLock::new(HashMap::new()),
            sessions: RwLock::new(HashMap::new()),
            presence: Mutex::new(PresenceTable::default()),
        }
    }

    fn check_zone(&self, zone: &ZoneId) -> Result<()> {
        if self.zones.contains(zone) {
            Ok(())
        } else {
            Err(Error::UnknownZone(zone.to_string()))
        }
    }

    /// Creates an account keyed by the canonical phone number.
    pub fn register_user(
        &self,
        phone: &str,
        password: &str,
        preferences: &[ServiceCategory],
    ) -> Result<PhoneNumber> {
        let user_id = canonicalize_phone(phone)?;
        if password.chars().count() < MIN_PASSWORD_LEN {
            return Err(Error::WeakPassword { min: MIN_PASSWORD_LEN });
        }
        let credential_hash = new_credential(password);
        let mut accounts = self.accounts.write();
        if accounts.contains_key(&user_id) {
            return Err(Error::DuplicatePhone(user_id.to_string()));
        }
        accounts.insert(
            user_id.clone(),
            UserAccount {
                user_id: user_id.clone(),
                credential_hash,
                subscriptions: preferences.iter().cloned().collect(),
                created_at: unix_now(),
            },
        );
        Ok(user_id)
    }

    /// Restores accounts from persisted records; later records for the same
    /// user replace earlier ones.
    pub fn load_accounts(&self, records: impl IntoIterator<Item = UserAccount>) {
        let mut accounts = self.accounts.write();
        for account in records {
            accounts.insert(account.user_id.clone(), account);
        }
    }

    pub fn account(&self, user_id: &PhoneNumber) -> Option<UserAccount> {
        self.accounts.read().get(user_id).cloned()
    }

    pub fn account_count(&self) -> usize {
        self.accounts.read().len()
    }

    /// Issues a fresh session. Unknown users and wrong passwords both yield
    /// `AuthFailed`.
    pub fn authenticate(&self, user_id: &str, password: &str) -> Result<AuthToken> {
        let Ok(user_id) = canonicalize_phone(user_id) else {
            return Err(Error::AuthFailed);
        };
        let stored = self.accounts.read().get(&user_id).map(|a| a.credential_hash.clone());
        let ok = match &stored {
            Some(hash) => credential_matches(hash, password),
            None => {
                // Same work as a real check.
                let _ = hash_credential(&[0u8; SALT_LEN], password);
                false
            }
        };
        if !ok {
            return Err(Error::AuthFailed);
        }
        let token = AuthToken {
            token: Token::generate(),
            user_id,
            issued_at: unix_now(),
            current_zone: None,
        };
        self.sessions.write().insert(
            token.token.clone(),
            Session {
                token: token.clone(),
                issued: Instant::now(),
            },
        );
        Ok(token)
    }

    pub fn logout(&self, token: &Token) -> Result<()> {
        self.sessions.write().remove(token).map(|_| ()).ok_or(Error::InvalidToken)
    }

    fn expired(&self, session: &Session) -> bool {
        self.config
            .session_ttl
            .is_some_and(|ttl| session.issued.elapsed() > ttl)
    }

    /// The live session for `token`.
    pub fn validate(&self, token: &Token) -> Result<AuthToken> {
        {
            let sessions = self.sessions.read();
            match sessions.get(token) {
                Some(s) if !self.expired(s) => return Ok(s.token.clone()),
                None => return Err(Error::InvalidToken),
                Some(_) => {}
            }
        }
        self.sessions.write().remove(token);
        Err(Error::InvalidToken)
    }

    pub fn introspect(&self, token: &Token) -> Result<Introspection> {
        let session = self.validate(token)?;
        let subscriptions = self
            .accounts
            .read()
            .get(&session.user_id)
            .map(|a| a.subscriptions.clone())
            .ok_or_else(|| Error::UnknownUser(session.user_id.to_string()))?;
        Ok(Introspection {
            user_id: session.user_id,
            subscriptions,
            current_zone: session.current_zone,
        })
    }

    pub fn authorize(&self, user_id: &PhoneNumber, category: &ServiceCategory) -> Result<bool> {
        self.accounts
            .read()
            .get(user_id)
            .map(|a| a.subscriptions.contains(category))
            .ok_or_else(|| Error::UnknownUser(user_id.to_string()))
    }

    /// Sorted intersection of the user's subscriptions with what the zone offers.
    pub fn list_available_services(
        &self,
        user_id: &PhoneNumber,
        zone: &ZoneId,
        offered: &BTreeSet<ServiceCategory>,
    ) -> Result<Vec<ServiceCategory>> {
        self.check_zone(zone)?;
        let accounts = self.accounts.read();
        let account = accounts
            .get(user_id)
            .ok_or_else(|| Error::UnknownUser(user_id.to_string()))?;
        Ok(account.subscriptions.intersection(offered).cloned().collect())
    }

    /// Idempotently adds `category`; returns the updated set.
    pub fn subscribe(
        &self,
        user_id: &PhoneNumber,
        category: &ServiceCategory,
    ) -> Result<BTreeSet<ServiceCategory>> {
        let mut accounts = self.accounts.write();
        let account = accounts
            .get_mut(user_id)
            .ok_or_else(|| Error::UnknownUser(user_id.to_string()))?;
        account.subscriptions.insert(category.clone());
        Ok(account.subscriptions.clone())
    }

    /// Moves the token's user into `zone`, out of any previous zone.
    pub fn record_presence(&self, token: &Token, zone: &ZoneId) -> Result<()> {
        self.check_zone(zone)?;
        let mut sessions = self.sessions.write();
        let session = match sessions.get_mut(token) {
            Some(s) if !self.expired(s) => s,
            _ => return Err(Error::InvalidToken),
        };
        session.token.current_zone = Some(zone.clone());
        let user = session.token.user_id.clone();
        self.presence.lock().place(&user, zone);
        Ok(())
    }

    pub fn count_users(&self, zone: &ZoneId) -> Result<usize> {
        self.check_zone(zone)?;
        Ok(self.presence.lock().count(zone))
    }

    /// Count per known zone, including empty ones.
    pub fn presence_counts(&self) -> BTreeMap<ZoneId, usize> {
        let presence = self.presence.lock();
        self.zones.iter().map(|z| (z.clone(), presence.count(z))).collect()
    }

    pub fn zones(&self) -> impl Iterator<Item = &ZoneId> {
        self.zones.iter()
    }
}
