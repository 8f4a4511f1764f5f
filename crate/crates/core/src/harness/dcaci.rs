//! Baseline: one plaintext token and one channel per subject, no OTP phase.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::mam::{channel_open, fetch_latest, ChannelState, MamError};
use crate::owner::{Decision, MockResources, Reason};
use crate::tangle::{Address, TangleStore};
use crate::token::{canonical_json, Right, TokenStatus};

#[derive(Debug, thiserror::Error)]
pub enum DcaciError {
    #[error("subject {0:?} already holds a token")]
    AlreadyGranted(String),
    #[error("unknown subject {0:?}")]
    UnknownSubject(String),
    #[error(transparent)]
    Mam(#[from] MamError),
}

/// Token schema of the baseline: a subject id takes the place of the policy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcaciToken {
    pub id: String,
    pub issuer: String,
    pub address: String,
    pub subject_id: String,
    pub status: TokenStatus,
    pub rights: Vec<Right>,
}

impl DcaciToken {
    pub fn to_canonical_bytes(&self) -> Vec<u8> {
        canonical_json(&serde_json::to_value(self).expect("plain data")).into_bytes()
    }

    pub fn parse(bytes: &[u8]) -> Option<Self> {
        serde_json::from_slice(bytes).ok()
    }

    pub fn has_right(&self, resource: &str, action: &str) -> bool {
        self.rights
            .iter()
            .any(|r| r.resource == resource && r.actions.iter().any(|a| a == action))
    }
}

pub struct DcaciState {
    issuer: String,
    seed: [u8; 32],
    channels: BTreeMap<String, ChannelState>,
    rng: ChaCha20Rng,
    resources: MockResources,
    publishes: u64,
}

impl DcaciState {
    pub fn new(issuer: impl Into<String>, seed: [u8; 32]) -> Self {
        let rng = ChaCha20Rng::from_seed(seed);
        Self {
            issuer: issuer.into(),
            seed,
            channels: BTreeMap::new(),
            rng,
            resources: MockResources::default(),
            publishes: 0,
        }
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn publish_count(&self) -> u64 {
        self.publishes
    }

    pub fn root_of(&self, subject_id: &str) -> Option<Address> {
        self.channels.get(subject_id).map(ChannelState::root)
    }

    fn channel_seed(&self, subject_id: &str) -> [u8; 32] {
        Sha256::new()
            .chain_update(b"dcaci-channel")
            .chain_update(self.seed)
            .chain_update(subject_id.as_bytes())
            .finalize()
            .into()
    }

    fn token_for(&mut self, subject_id: &str, root: Address, rights: Vec<Right>) -> DcaciToken {
        DcaciToken {
            id: uuid::Builder::from_random_bytes(self.rng.gen())
                .into_uuid()
                .to_string(),
            issuer: self.issuer.clone(),
            address: root.to_hex(),
            subject_id: subject_id.to_owned(),
            status: TokenStatus::Active,
            rights,
        }
    }

    pub fn dcaci_grant(
        &mut self,
        subject_id: &str,
        rights: Vec<Right>,
        store: &TangleStore,
    ) -> Result<DcaciToken, DcaciError> {
        if self.channels.contains_key(subject_id) {
            return Err(DcaciError::AlreadyGranted(subject_id.to_owned()));
        }
        let mut channel = channel_open(&self.channel_seed(subject_id))?;
        channel.sync(store);
        let token = self.token_for(subject_id, channel.root(), rights);
        channel.publish(&token.to_canonical_bytes(), store)?;
        self.publishes += 1;
        self.channels.insert(subject_id.to_owned(), channel);
        Ok(token)
    }

    /// Appends a new token and returns it with the address it went to.
    pub fn dcaci_update(
        &mut self,
        subject_id: &str,
        new_rights: Vec<Right>,
        store: &TangleStore,
    ) -> Result<(DcaciToken, Address), DcaciError> {
        let root = self
            .root_of(subject_id)
            .ok_or_else(|| DcaciError::UnknownSubject(subject_id.to_owned()))?;
        let token = self.token_for(subject_id, root, new_rights);
        let channel = self.channels.get_mut(subject_id).expect("checked above");
        let address = channel.publish(&token.to_canonical_bytes(), store)?;
        self.publishes += 1;
        Ok((token, address))
    }

    pub fn dcaci_get_access(
        &self,
        subject_id: &str,
        token: &DcaciToken,
        resource: &str,
        action: &str,
        store: &TangleStore,
    ) -> Decision {
        let Some(channel) = self.channels.get(subject_id) else {
            return Decision::deny(Reason::Malformed);
        };
        let original = match fetch_latest(store, &channel.root(), &channel.verify_key()) {
            Ok((body, _)) => match DcaciToken::parse(&body) {
                Some(t) => t,
                None => return Decision::deny(Reason::Malformed),
            },
            Err(_) => return Decision::deny(Reason::Malformed),
        };
        if original.status == TokenStatus::Inactive {
            return Decision::deny(Reason::InactiveToken);
        }
        if token.to_canonical_bytes() != original.to_canonical_bytes() {
            return Decision::deny(Reason::TamperedToken);
        }
        if !original.has_right(resource, action) {
            return Decision::deny(Reason::RightNotGranted);
        }
        Decision::grant(self.resources.respond(resource, action))
    }
}
