//! The object owner: issues tokens on per-policy channels and decides
//! access requests.
//!
//! Granting publishes an encrypted token as the first message of a channel
//! whose seed is derived from the owner seed and the policy. Updating appends
//! a fresh token to the same channel. Verification is two-phase: a subject
//! first proves it can decrypt under the token's policy by recovering an
//! OTP, then sends the token, the OTP and the requested (resource, action)
//! encrypted under `Role:Owner`.

mod otp;
mod protocol;
mod server;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::abe::{
    decrypt, encrypt, parse_policy, AbeCiphertext, AbeError, Attribute, PairingGroup, ParseError,
    Policy, PublicParams, SecretKey,
};
use crate::mam::{
    channel_open, fetch_latest, ChannelRegistry, ChannelState, MamError, RegistryEntry,
    RegistryError,
};
use crate::tangle::{Address, TangleStore};
use crate::token::{token_equals, token_parse, Right, Token, TokenError, TokenStatus};

pub use otp::{Clock, ManualClock, OtpRecord, OtpRegistry, SystemClock, OTP_LEN};
pub use protocol::{
    b64_decode, b64_encode, AccessBody, AccessRequest, AuthBody, AuthReply, Decision, Outcome,
    Reason, WireError, OWNER_POLICY,
};
pub use server::{serve, ServerHandle};

pub const DEFAULT_OTP_TTL_S: u64 = 60;

#[derive(Debug, thiserror::Error)]
pub enum OwnerError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("policy {0:?} already has a channel; use update")]
    PolicyExists(String),
    #[error("no channel for policy {0:?}")]
    UnknownPolicy(String),
    #[error("a token needs at least one right")]
    EmptyRights,
    #[error("owner key does not hold {OWNER_POLICY}")]
    NotAnOwnerKey,
    #[error("owner key cannot satisfy {0:?}, so it could not verify tokens under it")]
    OwnerCannotRead(String),
    #[error("channel at {0} does not belong to this owner")]
    ForeignChannel(Address),
    #[error(transparent)]
    Abe(#[from] AbeError),
    #[error(transparent)]
    Mam(#[from] MamError),
    #[error(transparent)]
    Token(#[from] TokenError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

#[derive(Debug, Clone)]
pub struct OwnerConfig {
    pub issuer: String,
    pub seed: [u8; 32],
    pub otp_ttl_s: u64,
    /// Channel registry file rewritten on every grant.
    pub registry_path: Option<PathBuf>,
    /// Fixes OTPs, token ids and encryption randomness; `None` draws from the OS.
    pub rng_seed: Option<u64>,
}

impl OwnerConfig {
    pub fn new(issuer: impl Into<String>, seed: [u8; 32]) -> Self {
        Self {
            issuer: issuer.into(),
            seed,
            otp_ttl_s: DEFAULT_OTP_TTL_S,
            registry_path: None,
            rng_seed: None,
        }
    }
}

/// What an update does to the policy's token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Update {
    Rights(Vec<Right>),
    Inactive,
}

#[derive(Debug)]
pub struct PolicyEntry {
    pub rights: Vec<Right>,
    pub channel: ChannelState,
    pub root: Address,
    /// Plaintext of the latest published token.
    pub token: Token,
}

/// Canned device responses keyed by resource path.
#[derive(Debug, Clone)]
pub struct MockResources(BTreeMap<String, Vec<u8>>);

impl Default for MockResources {
    fn default() -> Self {
        let mut m = BTreeMap::new();
        m.insert("sensor1/temperature".to_owned(), b"23.4 C".to_vec());
        m.insert("sensor1/humidity".to_owned(), b"41 %RH".to_vec());
        m.insert(
            "camera1/snapshot".to_owned(),
            b"\xff\xd8\xff\xe0 snapshot".to_vec(),
        );
        m.insert("led1/power".to_owned(), b"led1 ok".to_vec());
        Self(m)
    }
}

impl MockResources {
    pub fn insert(&mut self, resource: impl Into<String>, payload: impl Into<Vec<u8>>) {
        self.0.insert(resource.into(), payload.into());
    }

    pub fn respond(&self, resource: &str, action: &str) -> Vec<u8> {
        match self.0.get(resource) {
            Some(p) if action == "GET" => p.clone(),
            _ => format!("{action} {resource}: done").into_bytes(),
        }
    }
}

/// Seed of the channel that carries tokens for `policy`.
pub fn policy_channel_seed(owner_seed: &[u8; 32], canonical_policy: &str) -> [u8; 32] {
    Sha256::new()
        .chain_update(b"owner-channel")
        .chain_update(owner_seed)
        .chain_update(canonical_policy.as_bytes())
        .finalize()
        .into()
}

pub struct Owner<G: PairingGroup> {
    cfg: OwnerConfig,
    pp: PublicParams<G>,
    key: SecretKey<G>,
    store: Arc<TangleStore>,
    clock: Arc<dyn Clock>,
    rng: Mutex<ChaCha20Rng>,
    table: RwLock<BTreeMap<String, Arc<Mutex<PolicyEntry>>>>,
    otps: OtpRegistry,
    registry: Mutex<ChannelRegistry>,
    resources: MockResources,
    publishes: AtomicU64,
}

impl<G: PairingGroup> Owner<G> {
    /// `key` must hold `Role:Owner` and should cover every policy the owner
    /// will issue under.
    pub fn new(
        cfg: OwnerConfig,
        pp: PublicParams<G>,
        key: SecretKey<G>,
        store: Arc<TangleStore>,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, OwnerError> {
        let owner_attr: Attribute = OWNER_POLICY.parse().expect("constant attribute");
        if !key.attributes().contains(&owner_attr) {
            return Err(OwnerError::NotAnOwnerKey);
        }
        let rng = match cfg.rng_seed {
            Some(s) => ChaCha20Rng::seed_from_u64(s),
            None => ChaCha20Rng::from_entropy(),
        };
        let registry = match &cfg.registry_path {
            Some(p) => ChannelRegistry::load(p)?,
            None => ChannelRegistry::new(),
        };
        Ok(Self {
            otps: OtpRegistry::new(cfg.otp_ttl_s),
            cfg,
            pp,
            key,
            store,
            clock,
            rng: Mutex::new(rng),
            table: RwLock::new(BTreeMap::new()),
            registry: Mutex::new(registry),
            resources: MockResources::default(),
            publishes: AtomicU64::new(0),
        })
    }

    pub fn with_resources(mut self, resources: MockResources) -> Self {
        self.resources = resources;
        self
    }

    /// Rebuilds the policy table from the channels listed in the registry,
    /// reading each latest token back off the tangle.
    pub fn restore(&self) -> Result<usize, OwnerError> {
        let entries: Vec<RegistryEntry> = self
            .registry
            .lock()
            .expect("registry poisoned")
            .entries()
            .to_vec();
        let mut restored = 0;
        for e in entries {
            let policy = parse_policy(&e.policy)?.render();
            let mut channel = channel_open(&policy_channel_seed(&self.cfg.seed, &policy))?;
            if channel.root() != e.root {
                return Err(OwnerError::ForeignChannel(e.root));
            }
            channel.sync(&self.store);
            let token = self.read_original(&channel)?;
            let entry = PolicyEntry {
                rights: token.rights.clone(),
                root: channel.root(),
                channel,
                token,
            };
            self.table
                .write()
                .expect("table poisoned")
                .insert(policy, Arc::new(Mutex::new(entry)));
            restored += 1;
        }
        Ok(restored)
    }

    pub fn public_params(&self) -> &PublicParams<G> {
        &self.pp
    }

    pub fn store(&self) -> &TangleStore {
        &self.store
    }

    pub fn otp_registry(&self) -> &OtpRegistry {
        &self.otps
    }

    pub fn registry(&self) -> ChannelRegistry {
        self.registry.lock().expect("registry poisoned").clone()
    }

    /// Number of token messages this owner has published.
    pub fn publish_count(&self) -> u64 {
        self.publishes.load(Ordering::SeqCst)
    }

    pub fn policies(&self) -> Vec<String> {
        self.table
            .read()
            .expect("table poisoned")
            .keys()
            .cloned()
            .collect()
    }

    pub fn root_of(&self, policy_text: &str) -> Option<Address> {
        let policy = parse_policy(policy_text).ok()?.render();
        let entry = self
            .table
            .read()
            .expect("table poisoned")
            .get(&policy)
            .cloned()?;
        let root = entry.lock().expect("policy entry poisoned").root;
        Some(root)
    }

    /// Plaintext of the latest token for `policy_text`, as the owner holds it.
    pub fn current_token(&self, policy_text: &str) -> Option<Token> {
        let policy = parse_policy(policy_text).ok()?.render();
        let entry = self
            .table
            .read()
            .expect("table poisoned")
            .get(&policy)
            .cloned()?;
        let token = entry.lock().expect("policy entry poisoned").token.clone();
        Some(token)
    }

    fn fork_rng(&self) -> ChaCha20Rng {
        ChaCha20Rng::from_seed(self.rng.lock().expect("rng poisoned").gen())
    }

    fn new_token_id(&self, rng: &mut ChaCha20Rng) -> String {
        uuid::Builder::from_random_bytes(rng.gen())
            .into_uuid()
            .to_string()
    }

    fn publish_token(
        &self,
        channel: &mut ChannelState,
        policy: &Policy,
        token: &Token,
    ) -> Result<Address, OwnerError> {
        let mut rng = self.fork_rng();
        let ct = encrypt(&self.pp, policy, &token.to_canonical_bytes()?, &mut rng)?;
        let address = channel.publish(&ct.to_bytes(), &self.store)?;
        self.publishes.fetch_add(1, Ordering::SeqCst);
        Ok(address)
    }

    fn read_original(&self, channel: &ChannelState) -> Result<Token, OwnerError> {
        let (body, _) = fetch_latest(&self.store, &channel.root(), &channel.verify_key())?;
        let ct = AbeCiphertext::<G>::from_bytes(&body)?;
        let pt = decrypt(&self.key, &ct)?
            .plaintext()
            .ok_or_else(|| OwnerError::OwnerCannotRead(ct.policy_text().to_owned()))?;
        Ok(token_parse(&pt)?)
    }

    /// Issues the first token for a new policy and returns its channel root.
    pub fn grant_access(
        &self,
        policy_text: &str,
        rights: Vec<Right>,
    ) -> Result<Address, OwnerError> {
        let policy = parse_policy(policy_text)?;
        let canonical = policy.render();
        if rights.is_empty() {
            return Err(OwnerError::EmptyRights);
        }
        if !policy.satisfies(self.key.attributes()) {
            return Err(OwnerError::OwnerCannotRead(canonical));
        }
        let mut table = self.table.write().expect("table poisoned");
        if table.contains_key(&canonical) {
            return Err(OwnerError::PolicyExists(canonical));
        }
        let mut channel = channel_open(&policy_channel_seed(&self.cfg.seed, &canonical))?;
        channel.sync(&self.store);
        let root = channel.root();
        let mut rng = self.fork_rng();
        let token = Token {
            id: self.new_token_id(&mut rng),
            issuer: self.cfg.issuer.clone(),
            address: root.to_hex(),
            policy: canonical.clone(),
            status: TokenStatus::Active,
            rights: rights.clone(),
        };
        self.publish_token(&mut channel, &policy, &token)?;
        let verify_key = channel.verify_key();
        table.insert(
            canonical.clone(),
            Arc::new(Mutex::new(PolicyEntry {
                rights,
                channel,
                root,
                token,
            })),
        );
        drop(table);

        let mut registry = self.registry.lock().expect("registry poisoned");
        registry.upsert(RegistryEntry {
            policy: canonical.clone(),
            root,
            verify_key,
        });
        if let Some(path) = &self.cfg.registry_path {
            registry.save(path)?;
        }
        log::info!("granted {canonical:?} at {root}");
        Ok(root)
    }

    /// Appends a fresh token to an existing policy's channel and returns the
    /// address it was written to.
    pub fn update_access(&self, policy_text: &str, update: Update) -> Result<Address, OwnerError> {
        let policy = parse_policy(policy_text)?;
        let canonical = policy.render();
        let entry = self
            .table
            .read()
            .expect("table poisoned")
            .get(&canonical)
            .cloned()
            .ok_or_else(|| OwnerError::UnknownPolicy(canonical.clone()))?;
        let mut entry = entry.lock().expect("policy entry poisoned");
        let (rights, status) = match update {
            Update::Rights(r) if r.is_empty() => return Err(OwnerError::EmptyRights),
            Update::Rights(r) => (r, TokenStatus::Active),
            Update::Inactive => (entry.rights.clone(), TokenStatus::Inactive),
        };
        let mut rng = self.fork_rng();
        let token = Token {
            id: self.new_token_id(&mut rng),
            issuer: self.cfg.issuer.clone(),
            address: entry.root.to_hex(),
            policy: canonical.clone(),
            status,
            rights: rights.clone(),
        };
        let address = self.publish_token(&mut entry.channel, &policy, &token)?;
        entry.rights = rights;
        entry.token = token;
        log::info!("updated {canonical:?} at {address} ({status})");
        Ok(address)
    }

    /// Phase one: returns an OTP encrypted under the declared policy.
    pub fn handle_auth_request(&self, policy_text: &str) -> Result<Vec<u8>, OwnerError> {
        let policy = parse_policy(policy_text)?;
        let mut rng = self.fork_rng();
        let record = self
            .otps
            .issue(&policy.render(), self.clock.now_s(), &mut rng);
        let ct = encrypt(&self.pp, &policy, record.otp_hex().as_bytes(), &mut rng)?;
        Ok(ct.to_bytes())
    }

    /// Consumes `(policy, otp)` if it is outstanding and unexpired.
    pub fn check_otp(&self, policy_text: &str, otp: &str) -> bool {
        match parse_policy(policy_text) {
            Ok(p) => self.otps.check(&p.render(), otp, self.clock.now_s()),
            Err(_) => false,
        }
    }

    /// Phase two. Every failure is a denial; nothing here returns an error.
    pub fn handle_access_request(&self, encrypted_request: &[u8]) -> Decision {
        let request = match self.open_request(encrypted_request) {
            Some(r) => r,
            None => return Decision::deny(Reason::Malformed),
        };
        if !self.check_otp(&request.token.policy, &request.otp) {
            return Decision::deny(Reason::InvalidOtp);
        }
        let entry = match self
            .table
            .read()
            .expect("table poisoned")
            .get(&request.token.policy)
            .cloned()
        {
            Some(e) => e,
            None => return Decision::deny(Reason::TamperedToken),
        };
        let channel = entry.lock().expect("policy entry poisoned").channel.clone();
        let original = match self.read_original(&channel) {
            Ok(t) => t,
            Err(OwnerError::Mam(MamError::BadSignature(at))) => {
                log::warn!("channel message at {at} failed signature verification");
                return Decision::deny(Reason::Malformed);
            }
            Err(e) => {
                log::warn!(
                    "could not read original token for {:?}: {e}",
                    request.token.policy
                );
                return Decision::deny(Reason::Malformed);
            }
        };
        if original.status == TokenStatus::Inactive {
            return Decision::deny(Reason::InactiveToken);
        }
        if !token_equals(&request.token, &original) {
            return Decision::deny(Reason::TamperedToken);
        }
        if !original.has_right(&request.resource, &request.action) {
            return Decision::deny(Reason::RightNotGranted);
        }
        Decision::grant(self.resources.respond(&request.resource, &request.action))
    }

    fn open_request(&self, encrypted_request: &[u8]) -> Option<AccessRequest> {
        let ct = AbeCiphertext::<G>::from_bytes(encrypted_request).ok()?;
        let pt = decrypt(&self.key, &ct).ok()?.plaintext()?;
        AccessRequest::parse(&pt).ok()
    }

    /// Dispatches one wire request. Shared by the HTTP server and in-process
    /// transports; returns status code and JSON body.
    pub fn handle_wire(&self, path: &str, body: &[u8]) -> (u16, Vec<u8>) {
        let reply = |code: u16, v: serde_json::Value| (code, v.to_string().into_bytes());
        match path {
            "/auth" => {
                let Ok(req) = serde_json::from_slice::<AuthBody>(body) else {
                    return reply(400, json!({"error": "bad_request"}));
                };
                match self.handle_auth_request(&req.policy) {
                    Ok(ct) => reply(200, json!({"otp_ct": b64_encode(&ct)})),
                    Err(OwnerError::Parse(_)) => reply(400, json!({"error": "parse"})),
                    Err(e) => {
                        log::error!("auth request failed: {e}");
                        reply(500, json!({"error": "internal"}))
                    }
                }
            }
            "/access" => {
                let decision = match serde_json::from_slice::<AccessBody>(body)
                    .ok()
                    .and_then(|b| b64_decode(&b.request_ct, "request_ct").ok())
                {
                    Some(ct) => self.handle_access_request(&ct),
                    None => Decision::deny(Reason::Malformed),
                };
                reply(200, decision.to_json())
            }
            _ => reply(404, json!({"error": "not_found"})),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abe::{keygen, setup, AttributeSet, ToyGroup};
    use crate::tangle::PowConfig;

    const STUDENT: &str = "Division:IS AND Role:Student";
    const STAFF: &str = "Division:IS AND Role:Staff";

    struct Fixture {
        owner: Owner<ToyGroup>,
        clock: Arc<ManualClock>,
        student: SecretKey<ToyGroup>,
    }

    fn fixture() -> Fixture {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let (pp, mk) = setup::<ToyGroup, _>(&mut rng);
        let owner_attrs =
            AttributeSet::parse_list("Role:Owner, Division:IS, Role:Student, Role:Staff").unwrap();
        let owner_key = keygen(&mk, &owner_attrs, &mut rng).unwrap();
        let student = keygen(
            &mk,
            &AttributeSet::parse_list("Division:IS, Role:Student").unwrap(),
            &mut rng,
        )
        .unwrap();
        let store = Arc::new(
            TangleStore::in_memory(PowConfig {
                difficulty: 4,
                ..PowConfig::default()
            })
            .unwrap(),
        );
        let clock = Arc::new(ManualClock::new(1_000));
        let mut cfg = OwnerConfig::new("owner1", [9; 32]);
        cfg.rng_seed = Some(11);
        let owner = Owner::new(cfg, pp, owner_key, store, clock.clone()).unwrap();
        Fixture {
            owner,
            clock,
            student,
        }
    }

    fn student_rights() -> Vec<Right> {
        vec![Right::new("led1/power", ["TURN_ON", "TURN_OFF"])]
    }

    #[test]
    fn grant_publishes_one_channel_per_policy() {
        let f = fixture();
        let a = f.owner.grant_access(STUDENT, student_rights()).unwrap();
        let b = f
            .owner
            .grant_access(STAFF, vec![Right::new("camera1/snapshot", ["GET"])])
            .unwrap();
        assert_ne!(a, b);
        assert_eq!(f.owner.publish_count(), 2);
        assert_eq!(f.owner.registry().len(), 2);
        assert!(matches!(
            f.owner.grant_access(STUDENT, student_rights()),
            Err(OwnerError::PolicyExists(_))
        ));
        assert!(matches!(
            f.owner
                .grant_access("Division:IS and  Role:Student", student_rights()),
            Err(OwnerError::PolicyExists(_))
        ));
        let t = f.owner.current_token(STUDENT).unwrap();
        assert_eq!(t.address, a.to_hex());
        assert_eq!(t.status, TokenStatus::Active);
        assert_eq!(t.issuer, "owner1");
    }

    #[test]
    fn grant_rejects_bad_input() {
        let f = fixture();
        assert!(matches!(
            f.owner.grant_access("Role:", student_rights()),
            Err(OwnerError::Parse(_))
        ));
        assert!(matches!(
            f.owner.grant_access(STUDENT, vec![]),
            Err(OwnerError::EmptyRights)
        ));
        assert!(matches!(
            f.owner.grant_access("Role:Janitor", student_rights()),
            Err(OwnerError::OwnerCannotRead(_))
        ));
    }

    #[test]
    fn update_appends_and_unknown_fails() {
        let f = fixture();
        let root = f.owner.grant_access(STUDENT, student_rights()).unwrap();
        let before = f.owner.current_token(STUDENT).unwrap();
        let at = f.owner.update_access(STUDENT, Update::Inactive).unwrap();
        assert_ne!(at, root);
        let after = f.owner.current_token(STUDENT).unwrap();
        assert_ne!(after.id, before.id);
        assert_eq!(after.status, TokenStatus::Inactive);
        assert_eq!(after.rights, before.rights);
        assert!(matches!(
            f.owner.update_access(STAFF, Update::Inactive),
            Err(OwnerError::UnknownPolicy(_))
        ));
    }

    #[test]
    fn otp_decrypts_only_under_matching_key() {
        let f = fixture();
        let blob = f.owner.handle_auth_request(STUDENT).unwrap();
        let ct = AbeCiphertext::<ToyGroup>::from_bytes(&blob).unwrap();
        let otp =
            String::from_utf8(decrypt(&f.student, &ct).unwrap().plaintext().unwrap()).unwrap();
        assert_eq!(otp.len(), 32);
        assert!(otp.chars().all(|c| c.is_ascii_hexdigit()));

        let staff_blob = f.owner.handle_auth_request(STAFF).unwrap();
        let ct = AbeCiphertext::<ToyGroup>::from_bytes(&staff_blob).unwrap();
        assert!(!decrypt(&f.student, &ct).unwrap().is_satisfied());

        assert!(!f.owner.check_otp(STAFF, &otp));
        f.clock.advance(DEFAULT_OTP_TTL_S);
        assert!(f.owner.check_otp(STUDENT, &otp));
        assert!(!f.owner.check_otp(STUDENT, &otp));
    }

    #[test]
    fn restore_reads_tokens_back() {
        let f = fixture();
        f.owner.grant_access(STUDENT, student_rights()).unwrap();
        f.owner
            .update_access(
                STUDENT,
                Update::Rights(vec![Right::new("sensor1/humidity", ["GET"])]),
            )
            .unwrap();
        let latest = f.owner.current_token(STUDENT).unwrap();

        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let (pp, mk) = setup::<ToyGroup, _>(&mut rng);
        let key = keygen(
            &mk,
            &AttributeSet::parse_list("Role:Owner, Division:IS, Role:Student").unwrap(),
            &mut rng,
        )
        .unwrap();
        let mut cfg = OwnerConfig::new("owner1", [9; 32]);
        cfg.rng_seed = Some(12);
        let store = Arc::clone(&f.owner.store);
        let second = Owner::new(cfg, pp, key, store, Arc::new(ManualClock::new(0))).unwrap();
        *second.registry.lock().unwrap() = f.owner.registry();
        assert_eq!(second.restore().unwrap(), 1);
        assert_eq!(second.current_token(STUDENT).unwrap(), latest);
    }

    #[test]
    fn wire_errors() {
        let f = fixture();
        let (code, body) = f.owner.handle_wire("/auth", br#"{"policy":"Role: AND"}"#);
        assert_eq!((code, body), (400, br#"{"error":"parse"}"#.to_vec()));
        let (code, body) = f.owner.handle_wire("/access", br#"{"request_ct":"!!"}"#);
        assert_eq!(code, 200);
        assert_eq!(
            Decision::from_json(&body).unwrap().reason(),
            Reason::Malformed
        );
        assert_eq!(f.owner.handle_wire("/nope", b"{}").0, 404);
    }

    #[test]
    fn mock_resources() {
        let r = MockResources::default();
        assert_eq!(r.respond("sensor1/temperature", "GET"), b"23.4 C");
        assert_eq!(
            r.respond("led1/power", "TURN_ON"),
            b"TURN_ON led1/power: done"
        );
    }
}
