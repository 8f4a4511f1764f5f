//! Masked Authenticated Messaging, public mode.
//!
//! A channel is a chain of addresses derived from a secret seed. Each
//! message is an envelope holding the body, the address of the next
//! message, and an Ed25519 signature over both; the signing key is derived
//! from the same seed. Bodies are not masked: confidentiality of tokens
//! comes from attribute-based encryption above this layer.
//!
//! Envelope layout (big-endian lengths):
//!
//! ```text
//! body_len u32 | body | next_address [32] | sig_len u32 | signature
//! ```

use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use sha2::{Digest, Sha256};

use crate::tangle::{Address, TangleError, TangleStore};

pub const SEED_LEN: usize = 32;
const SIGNATURE_LEN: usize = 64;

#[derive(Debug, thiserror::Error)]
pub enum MamError {
    #[error("seed must be {SEED_LEN} bytes, got {0}")]
    BadSeedLength(usize),
    #[error("no message at {0}")]
    NotFound(Address),
    #[error("message at {0} does not carry a valid signature for this channel")]
    BadSignature(Address),
    #[error("malformed envelope: {0}")]
    MalformedEnvelope(String),
    #[error(transparent)]
    Tangle(#[from] TangleError),
}

/// Channel secret. Never leaves the publisher.
#[derive(Clone, PartialEq, Eq)]
pub struct Seed([u8; SEED_LEN]);

impl Seed {
    pub fn from_slice(bytes: &[u8]) -> Result<Self, MamError> {
        <[u8; SEED_LEN]>::try_from(bytes)
            .map(Seed)
            .map_err(|_| MamError::BadSeedLength(bytes.len()))
    }

    pub fn random<R: rand::RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut s = [0u8; SEED_LEN];
        rng.fill_bytes(&mut s);
        Seed(s)
    }

    pub fn as_bytes(&self) -> &[u8; SEED_LEN] {
        &self.0
    }
}

impl fmt::Debug for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Seed(<redacted>)")
    }
}

pub fn channel_address(seed: &Seed, index: u64) -> Address {
    let digest = Sha256::new()
        .chain_update(b"mam-addr")
        .chain_update(seed.0)
        .chain_update(index.to_be_bytes())
        .finalize();
    Address(digest.into())
}

fn signing_key(seed: &Seed) -> SigningKey {
    let digest = Sha256::new()
        .chain_update(b"mam-sign")
        .chain_update(seed.0)
        .finalize();
    SigningKey::from_bytes(&digest.into())
}

/// Publisher-side state of one channel.
#[derive(Debug, Clone)]
pub struct ChannelState {
    seed: Seed,
    index: u64,
    signing: SigningKey,
}

pub fn channel_open(seed: &[u8]) -> Result<ChannelState, MamError> {
    let seed = Seed::from_slice(seed)?;
    let signing = signing_key(&seed);
    Ok(ChannelState {
        seed,
        index: 0,
        signing,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MamMessage {
    pub body: Vec<u8>,
    pub next_address: Address,
    pub signature: [u8; SIGNATURE_LEN],
}

fn signed_bytes(body: &[u8], next: &Address) -> Vec<u8> {
    let mut m = Vec::with_capacity(body.len() + 32);
    m.extend_from_slice(body);
    m.extend_from_slice(&next.0);
    m
}

impl MamMessage {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.body.len() + 32 + SIGNATURE_LEN + 8);
        out.extend_from_slice(&(self.body.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.body);
        out.extend_from_slice(&self.next_address.0);
        out.extend_from_slice(&(SIGNATURE_LEN as u32).to_be_bytes());
        out.extend_from_slice(&self.signature);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, MamError> {
        let bad = |why: &str| MamError::MalformedEnvelope(why.to_owned());
        let take_u32 = |b: &[u8]| -> Option<usize> {
            Some(u32::from_be_bytes(b.get(..4)?.try_into().ok()?) as usize)
        };
        let body_len = take_u32(bytes).ok_or_else(|| bad("truncated body length"))?;
        let rest = &bytes[4..];
        if rest.len() < body_len {
            return Err(bad("truncated body"));
        }
        let (body, rest) = rest.split_at(body_len);
        let next = rest
            .get(..32)
            .and_then(Address::from_slice)
            .ok_or_else(|| bad("truncated next address"))?;
        let rest = &rest[32..];
        let sig_len = take_u32(rest).ok_or_else(|| bad("truncated signature length"))?;
        let sig = &rest[4..];
        if sig_len != SIGNATURE_LEN || sig.len() != SIGNATURE_LEN {
            return Err(bad("signature has the wrong length"));
        }
        Ok(Self {
            body: body.to_vec(),
            next_address: next,
            signature: sig.try_into().expect("checked length"),
        })
    }

    pub fn verify(&self, key: &VerifyingKey) -> bool {
        key.verify(
            &signed_bytes(&self.body, &self.next_address),
            &Signature::from_bytes(&self.signature),
        )
        .is_ok()
    }
}

impl ChannelState {
    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn address(&self, index: u64) -> Address {
        channel_address(&self.seed, index)
    }

    pub fn root(&self) -> Address {
        self.address(0)
    }

    /// Address the next publish will use.
    pub fn current_address(&self) -> Address {
        self.address(self.index)
    }

    pub fn verify_key(&self) -> VerifyingKey {
        self.signing.verifying_key()
    }

    /// Advances the index past messages already on the tangle, for a
    /// publisher resuming an existing channel.
    pub fn sync(&mut self, store: &TangleStore) {
        while store.bundle_count(&self.current_address()) > 0 {
            self.index += 1;
        }
    }

    pub fn envelope(&self, body: &[u8]) -> MamMessage {
        let next_address = self.address(self.index + 1);
        let signature = self
            .signing
            .sign(&signed_bytes(body, &next_address))
            .to_bytes();
        MamMessage {
            body: body.to_vec(),
            next_address,
            signature,
        }
    }

    /// Attaches `body` at the current address and advances the channel.
    /// Returns the address the message was written to.
    pub fn publish(&mut self, body: &[u8], store: &TangleStore) -> Result<Address, MamError> {
        let address = self.current_address();
        store.attach(address, &self.envelope(body).encode())?;
        self.index += 1;
        Ok(address)
    }
}

/// Reads and authenticates the message at `address`. Bundles there that do
/// not verify under `key` are skipped; `Ok(None)` means nothing is there.
pub fn fetch_message(
    store: &TangleStore,
    address: &Address,
    key: &VerifyingKey,
) -> Result<Option<MamMessage>, MamError> {
    let payloads = store.fetch_bundles(address)?;
    if payloads.is_empty() {
        return Ok(None);
    }
    for payload in &payloads {
        if let Ok(msg) = MamMessage::decode(payload) {
            if msg.verify(key) {
                return Ok(Some(msg));
            }
        }
    }
    Err(MamError::BadSignature(*address))
}

/// Follows next-address links from `root` to the last message. Returns its
/// body and the number of messages walked.
pub fn fetch_latest(
    store: &TangleStore,
    root: &Address,
    key: &VerifyingKey,
) -> Result<(Vec<u8>, usize), MamError> {
    store.metrics().record_channel_walk();
    let mut msg = fetch_message(store, root, key)?.ok_or(MamError::NotFound(*root))?;
    let mut count = 1;
    while let Some(next) = fetch_message(store, &msg.next_address, key)? {
        msg = next;
        count += 1;
    }
    Ok((msg.body, count))
}

pub fn verify_key_from_hex(text: &str) -> Option<VerifyingKey> {
    let mut raw = [0u8; 32];
    hex::decode_to_slice(text.trim(), &mut raw).ok()?;
    VerifyingKey::from_bytes(&raw).ok()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegistryEntry {
    pub policy: String,
    pub root: Address,
    pub verify_key: VerifyingKey,
}

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("registry line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Out-of-band directory of channels: one
/// `policy <TAB> root_hex <TAB> verify_key_hex` line per channel.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChannelRegistry {
    entries: Vec<RegistryEntry>,
}

impl ChannelRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self, RegistryError> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let syntax = |reason: &str| RegistryError::Syntax {
                line: n + 1,
                reason: reason.to_owned(),
            };
            let fields: Vec<&str> = line.split('\t').collect();
            let [policy, root, key] = fields[..] else {
                return Err(syntax("expected three tab-separated fields"));
            };
            if policy.trim().is_empty() {
                return Err(syntax("empty policy"));
            }
            entries.push(RegistryEntry {
                policy: policy.trim().to_owned(),
                root: root.parse().map_err(|_| syntax("bad root address"))?,
                verify_key: verify_key_from_hex(key).ok_or_else(|| syntax("bad verify key"))?,
            });
        }
        Ok(Self { entries })
    }

    pub fn render(&self) -> String {
        self.entries
            .iter()
            .map(|e| {
                format!(
                    "{}\t{}\t{}\n",
                    e.policy,
                    e.root,
                    hex::encode(e.verify_key.as_bytes())
                )
            })
            .collect()
    }

    pub fn load(path: &Path) -> Result<Self, RegistryError> {
        match fs::read_to_string(path) {
            Ok(text) => Self::parse(&text),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Self::new()),
            Err(e) => Err(e.into()),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), RegistryError> {
        fs::write(path, self.render())?;
        Ok(())
    }

    /// Adds or replaces the entry for `entry.policy`.
    pub fn upsert(&mut self, entry: RegistryEntry) {
        match self.entries.iter_mut().find(|e| e.policy == entry.policy) {
            Some(slot) => *slot = entry,
            None => self.entries.push(entry),
        }
    }

    pub fn by_root(&self, root: &Address) -> Option<&RegistryEntry> {
        self.entries.iter().find(|e| e.root == *root)
    }

    pub fn by_policy(&self, policy: &str) -> Option<&RegistryEntry> {
        self.entries.iter().find(|e| e.policy == policy)
    }

    pub fn entries(&self) -> &[RegistryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
