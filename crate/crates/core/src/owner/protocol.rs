//! Messages exchanged between subject and owner.
//!
//! ```text
//! POST /auth    {"policy": "..."}        -> 200 {"otp_ct": b64} | 400 {"error": "parse"}
//! POST /access  {"request_ct": b64}      -> 200 {"decision": "GRANT", "payload": b64}
//!                                        |  200 {"decision": "DENY", "reason": "..."}
//! ```

use std::fmt;
use std::str::FromStr;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::token::{canonical_json, Token, TokenError};

/// The policy every access request is encrypted under.
pub const OWNER_POLICY: &str = "Role:Owner";

#[derive(Debug, thiserror::Error)]
pub enum WireError {
    #[error("bad json: {0}")]
    Json(String),
    #[error("bad base64 in {0}")]
    Base64(&'static str),
    #[error("unexpected message: {0}")]
    Unexpected(String),
    #[error(transparent)]
    Token(#[from] TokenError),
}

/// Plaintext of an access request before encryption.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessRequest {
    pub resource: String,
    pub action: String,
    pub token: Token,
    pub otp: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RequestFields {
    resource: String,
    action: String,
    token: Value,
    otp: String,
}

impl AccessRequest {
    pub fn to_canonical_bytes(&self) -> Result<Vec<u8>, TokenError> {
        self.token.validate()?;
        let v = json!({
            "action": self.action,
            "otp": self.otp,
            "resource": self.resource,
            "token": self.token.to_value(),
        });
        Ok(canonical_json(&v).into_bytes())
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, WireError> {
        let f: RequestFields =
            serde_json::from_slice(bytes).map_err(|e| WireError::Json(e.to_string()))?;
        if f.resource.is_empty() || f.action.is_empty() || f.otp.is_empty() {
            return Err(WireError::Unexpected("empty request field".into()));
        }
        Ok(Self {
            resource: f.resource,
            action: f.action,
            token: Token::from_value(f.token)?,
            otp: f.otp,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    Grant,
    Deny,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Reason {
    Ok,
    InvalidOtp,
    TamperedToken,
    InactiveToken,
    RightNotGranted,
    Malformed,
}

impl Reason {
    pub fn as_str(self) -> &'static str {
        match self {
            Reason::Ok => "OK",
            Reason::InvalidOtp => "INVALID_OTP",
            Reason::TamperedToken => "TAMPERED_TOKEN",
            Reason::InactiveToken => "INACTIVE_TOKEN",
            Reason::RightNotGranted => "RIGHT_NOT_GRANTED",
            Reason::Malformed => "MALFORMED",
        }
    }
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Reason {
    type Err = WireError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(Value::String(s.to_owned()))
            .map_err(|_| WireError::Unexpected(format!("reason {s:?}")))
    }
}

/// GRANT always carries reason OK; every DENY carries some other reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decision {
    outcome: Outcome,
    reason: Reason,
    payload: Option<Vec<u8>>,
}

impl Decision {
    pub fn grant(payload: Vec<u8>) -> Self {
        Self {
            outcome: Outcome::Grant,
            reason: Reason::Ok,
            payload: Some(payload),
        }
    }

    /// Panics if `reason` is OK.
    pub fn deny(reason: Reason) -> Self {
        assert_ne!(reason, Reason::Ok, "a denial needs a failure reason");
        Self {
            outcome: Outcome::Deny,
            reason,
            payload: None,
        }
    }

    pub fn outcome(&self) -> Outcome {
        self.outcome
    }

    pub fn reason(&self) -> Reason {
        self.reason
    }

    pub fn payload(&self) -> Option<&[u8]> {
        self.payload.as_deref()
    }

    pub fn is_grant(&self) -> bool {
        self.outcome == Outcome::Grant
    }

    pub fn to_json(&self) -> Value {
        match self.outcome {
            Outcome::Grant => json!({
                "decision": "GRANT",
                "payload": B64.encode(self.payload.as_deref().unwrap_or_default()),
            }),
            Outcome::Deny => json!({"decision": "DENY", "reason": self.reason.as_str()}),
        }
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, WireError> {
        let v: Value = serde_json::from_slice(bytes).map_err(|e| WireError::Json(e.to_string()))?;
        match v.get("decision").and_then(Value::as_str) {
            Some("GRANT") => {
                let p = v
                    .get("payload")
                    .and_then(Value::as_str)
                    .ok_or(WireError::Base64("payload"))?;
                Ok(Decision::grant(
                    B64.decode(p).map_err(|_| WireError::Base64("payload"))?,
                ))
            }
            Some("DENY") => {
                let r: Reason = v
                    .get("reason")
                    .and_then(Value::as_str)
                    .ok_or_else(|| WireError::Unexpected("deny without reason".into()))?
                    .parse()?;
                if r == Reason::Ok {
                    return Err(WireError::Unexpected("deny with reason OK".into()));
                }
                Ok(Decision::deny(r))
            }
            _ => Err(WireError::Unexpected(v.to_string())),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuthBody {
    pub policy: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuthReply {
    pub otp_ct: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccessBody {
    pub request_ct: String,
}

pub fn b64_encode(bytes: &[u8]) -> String {
    B64.encode(bytes)
}

pub fn b64_decode(text: &str, field: &'static str) -> Result<Vec<u8>, WireError> {
    B64.decode(text).map_err(|_| WireError::Base64(field))
}
