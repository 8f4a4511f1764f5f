//! Capability tokens and their canonical JSON form.
//!
//! A token names the channel it lives on, the policy a holder must satisfy,
//! whether it is still in force, and the (resource, action) rights it
//! grants. Two tokens are equal exactly when their canonical serializations
//! are byte-identical, so the order of rights matters.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::abe::parse_policy;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TokenError {
    #[error("invalid token: {0}")]
    InvalidToken(String),
    #[error("malformed token: {0}")]
    MalformedToken(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TokenStatus {
    Active,
    Inactive,
}

impl fmt::Display for TokenStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TokenStatus::Active => "ACTIVE",
            TokenStatus::Inactive => "INACTIVE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Right {
    pub resource: String,
    pub actions: Vec<String>,
}

impl Right {
    /// Builds a right, dropping repeated actions but keeping first-seen order.
    pub fn new<S: Into<String>>(
        resource: impl Into<String>,
        actions: impl IntoIterator<Item = S>,
    ) -> Self {
        let mut deduped: Vec<String> = Vec::new();
        for a in actions {
            let a = a.into();
            if !deduped.contains(&a) {
                deduped.push(a);
            }
        }
        Self {
            resource: resource.into(),
            actions: deduped,
        }
    }

    /// Parses `resource:ACTION1,ACTION2`.
    pub fn parse_spec(spec: &str) -> Result<Self, TokenError> {
        let (resource, actions) = spec.rsplit_once(':').ok_or_else(|| {
            TokenError::InvalidToken(format!("right {spec:?} is not resource:ACTIONS"))
        })?;
        let right = Right::new(
            resource.trim(),
            actions.split(',').map(str::trim).filter(|a| !a.is_empty()),
        );
        right.validate()?;
        Ok(right)
    }

    fn validate(&self) -> Result<(), TokenError> {
        if self.resource.is_empty() {
            return Err(TokenError::InvalidToken("right with empty resource".into()));
        }
        if self.actions.is_empty() || self.actions.iter().any(String::is_empty) {
            return Err(TokenError::InvalidToken(format!(
                "right on {} has no actions",
                self.resource
            )));
        }
        for (i, a) in self.actions.iter().enumerate() {
            if self.actions[..i].contains(a) {
                return Err(TokenError::InvalidToken(format!(
                    "duplicate action {a} on {}",
                    self.resource
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Token {
    pub id: String,
    pub issuer: String,
    pub address: String,
    pub policy: String,
    pub status: TokenStatus,
    pub rights: Vec<Right>,
}

impl Token {
    pub fn validate(&self) -> Result<(), TokenError> {
        for (name, v) in [
            ("id", &self.id),
            ("issuer", &self.issuer),
            ("address", &self.address),
        ] {
            if v.is_empty() {
                return Err(TokenError::InvalidToken(format!("empty {name}")));
            }
        }
        let policy = parse_policy(&self.policy)
            .map_err(|e| TokenError::InvalidToken(format!("policy: {e}")))?;
        if policy.render() != self.policy {
            return Err(TokenError::InvalidToken(format!(
                "policy {:?} is not canonical",
                self.policy
            )));
        }
        self.rights.iter().try_for_each(Right::validate)
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("token is plain data")
    }

    pub fn to_canonical_bytes(&self) -> Result<Vec<u8>, TokenError> {
        self.validate()?;
        Ok(canonical_json(&self.to_value()).into_bytes())
    }

    pub fn from_value(v: Value) -> Result<Self, TokenError> {
        let token: Token =
            serde_json::from_value(v).map_err(|e| TokenError::MalformedToken(e.to_string()))?;
        token.validate().map_err(|e| match e {
            TokenError::InvalidToken(m) => TokenError::MalformedToken(m),
            other => other,
        })?;
        Ok(token)
    }

    pub fn has_right(&self, resource: &str, action: &str) -> bool {
        token_has_right(self, resource, action)
    }
}

/// Writes JSON with object keys sorted at every level and no whitespace.
pub fn canonical_json(v: &Value) -> String {
    let mut out = String::new();
    write_canonical(v, &mut out);
    out
}

fn write_canonical(v: &Value, out: &mut String) {
    match v {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_canonical(&map[k], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        scalar => out.push_str(&scalar.to_string()),
    }
}

pub fn token_serialize(t: &Token) -> Result<Vec<u8>, TokenError> {
    t.to_canonical_bytes()
}

/// Accepts any key order on input.
pub fn token_parse(bytes: &[u8]) -> Result<Token, TokenError> {
    let v: Value =
        serde_json::from_slice(bytes).map_err(|e| TokenError::MalformedToken(e.to_string()))?;
    Token::from_value(v)
}

pub fn token_equals(a: &Token, b: &Token) -> bool {
    match (a.to_canonical_bytes(), b.to_canonical_bytes()) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

/// Exact resource match; no prefixes or wildcards.
pub fn token_has_right(t: &Token, resource: &str, action: &str) -> bool {
    t.rights
        .iter()
        .any(|r| r.resource == resource && r.actions.iter().any(|a| a == action))
}
