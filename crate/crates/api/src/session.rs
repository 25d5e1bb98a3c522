//! Bearer-token sessions.

use std::collections::HashMap;

use axum::extract::FromRequestParts;
use axum::http::header::AUTHORIZATION;
use axum::http::request::Parts;
use chrono::{DateTime, Duration, Utc};
use hmms_core::access::{authorize, Action, Principal};
use parking_lot::RwLock;
use rand::RngExt;
use serde::Serialize;

use crate::error::ApiError;
use crate::AppState;

/// 256 random bits, hex encoded.
pub fn new_token() -> String {
    let bytes: [u8; 32] = rand::rng().random();
    hex::encode(bytes)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Session {
    pub token: String,
    pub principal_id: String,
    pub issued_at: DateTime<Utc>,
    pub expires_at: DateTime<Utc>,
}

#[derive(Debug)]
pub struct Sessions {
    ttl: Duration,
    map: RwLock<HashMap<String, Session>>,
}

impl Sessions {
    pub fn new(ttl: Duration) -> Self {
        Sessions { ttl, map: RwLock::new(HashMap::new()) }
    }

    pub fn issue(&self, principal_id: &str, now: DateTime<Utc>) -> Session {
        let session = Session {
            token: new_token(),
            principal_id: principal_id.to_string(),
            issued_at: now,
            expires_at: now + self.ttl,
        };
        let mut map = self.map.write();
        map.retain(|_, s| s.expires_at > now);
        map.insert(session.token.clone(), session.clone());
        session
    }

    /// The live session for `token`; expired sessions are dropped.
    pub fn get(&self, token: &str, now: DateTime<Utc>) -> Option<Session> {
        let found = self.map.read().get(token).cloned()?;
        if found.expires_at <= now {
            self.map.write().remove(token);
            return None;
        }
        Some(found)
    }

    pub fn revoke(&self, token: &str) -> bool {
        self.map.write().remove(token).is_some()
    }

    pub fn revoke_principal(&self, principal_id: &str) {
        self.map.write().retain(|_, s| s.principal_id != principal_id);
    }

    pub fn len(&self) -> usize {
        self.map.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The authenticated caller of a request.
#[derive(Debug, Clone)]
pub struct Caller {
    pub principal: Principal,
    pub token: String,
}

impl Caller {
    pub fn id(&self) -> &str {
        &self.principal.principal_id
    }

    pub fn require(&self, action: Action, target: Option<&str>) -> Result<(), ApiError> {
        match authorize(&self.principal, action, target) {
            hmms_core::access::Decision::Allow => Ok(()),
            hmms_core::access::Decision::Deny(reason) => Err(ApiError::forbidden(reason)),
        }
    }

    pub fn may(&self, action: Action) -> bool {
        authorize(&self.principal, action, None).is_allowed()
    }
}

impl FromRequestParts<AppState> for Caller {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, ApiError> {
        let header = parts
            .headers
            .get(AUTHORIZATION)
            .ok_or_else(|| ApiError::unauthenticated("MissingToken", "Authorization: Bearer <token> required"))?;
        let token = header
            .to_str()
            .ok()
            .and_then(|h| h.strip_prefix("Bearer "))
            .map(str::trim)
            .ok_or_else(|| ApiError::unauthenticated("MissingToken", "Authorization: Bearer <token> required"))?;
        let session = state
            .sessions
            .get(token, state.store.now())
            .ok_or_else(|| ApiError::unauthenticated("InvalidToken", "session unknown or expired"))?;
        let principal = state
            .store
            .principal(&session.principal_id)
            .ok_or_else(|| ApiError::unauthenticated("InvalidToken", "principal no longer exists"))?;
        Ok(Caller { principal, token: token.to_string() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_are_long_and_distinct() {
        let a = new_token();
        assert_eq!(a.len(), 64);
        assert!(a.chars().all(|c| c.is_ascii_hexdigit()));
        assert_ne!(a, new_token());
    }

    #[test]
    fn expiry() {
        let sessions = Sessions::new(Duration::minutes(10));
        let t0 = DateTime::parse_from_rfc3339("2024-01-01T08:00:00Z").unwrap().with_timezone(&Utc);
        let s = sessions.issue("nurse1", t0);
        assert!(sessions.get(&s.token, t0 + Duration::minutes(9)).is_some());
        assert!(sessions.get(&s.token, t0 + Duration::minutes(10)).is_none());
        assert!(sessions.is_empty());
    }
}
