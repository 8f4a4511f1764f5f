//! Subject-side client: reads tokens off policy channels and runs the
//! two-phase verification protocol against an owner.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::abe::{
    decrypt, encrypt, parse_policy, AbeCiphertext, AbeError, PairingGroup, PublicParams, SecretKey,
};
use crate::mam::{fetch_latest, ChannelRegistry, MamError};
use crate::owner::{
    b64_decode, b64_encode, AccessBody, AccessRequest, AuthBody, AuthReply, Decision, Owner,
    WireError, OWNER_POLICY,
};
use crate::tangle::{Address, TangleStore};
use crate::token::{token_parse, Token, TokenError};

#[derive(Debug, thiserror::Error)]
pub enum SubjectError {
    #[error("key does not satisfy policy {0:?}")]
    NotSatisfied(String),
    #[error("no message on channel {0}")]
    NotFound(Address),
    #[error("channel {0} is not in the registry")]
    UnknownChannel(Address),
    #[error(transparent)]
    MalformedToken(#[from] TokenError),
    #[error("otp is empty")]
    EmptyOtp,
    #[error("transport: {0}")]
    Transport(String),
    #[error("owner answered {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Abe(#[from] AbeError),
    #[error(transparent)]
    Mam(MamError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Carries one POST to the owner and returns status and body.
pub trait Transport: Send + Sync {
    fn post(&self, path: &str, body: &[u8]) -> Result<(u16, Vec<u8>), SubjectError>;
}

pub struct HttpTransport {
    endpoint: String,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(endpoint: impl Into<String>) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(std::time::Duration::from_secs(30))
            .build();
        Self {
            endpoint: endpoint.into().trim_end_matches('/').to_owned(),
            agent,
        }
    }
}

impl Transport for HttpTransport {
    fn post(&self, path: &str, body: &[u8]) -> Result<(u16, Vec<u8>), SubjectError> {
        let url = format!("{}{}", self.endpoint, path);
        let response = match self
            .agent
            .post(&url)
            .set("Content-Type", "application/json")
            .send_bytes(body)
        {
            Ok(r) => r,
            Err(ureq::Error::Status(_, r)) => r,
            Err(e) => return Err(SubjectError::Transport(e.to_string())),
        };
        let status = response.status();
        let mut out = Vec::new();
        io::Read::read_to_end(&mut response.into_reader(), &mut out)
            .map_err(|e| SubjectError::Transport(e.to_string()))?;
        Ok((status, out))
    }
}

/// Calls an in-process owner directly.
pub struct LocalTransport<G: PairingGroup> {
    owner: Arc<Owner<G>>,
}

impl<G: PairingGroup> LocalTransport<G> {
    pub fn new(owner: Arc<Owner<G>>) -> Self {
        Self { owner }
    }
}

impl<G: PairingGroup> Transport for LocalTransport<G> {
    fn post(&self, path: &str, body: &[u8]) -> Result<(u16, Vec<u8>), SubjectError> {
        Ok(self.owner.handle_wire(path, body))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exchange {
    pub path: String,
    pub request: Vec<u8>,
    pub response: Vec<u8>,
}

/// Records every exchange passing through the wrapped transport.
pub struct TapTransport {
    inner: Arc<dyn Transport>,
    log: Mutex<Vec<Exchange>>,
}

impl TapTransport {
    pub fn new(inner: Arc<dyn Transport>) -> Self {
        Self {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn exchanges(&self) -> Vec<Exchange> {
        self.log.lock().expect("tap poisoned").clone()
    }

    pub fn count(&self, path: &str) -> usize {
        self.log
            .lock()
            .expect("tap poisoned")
            .iter()
            .filter(|e| e.path == path)
            .count()
    }

    pub fn clear(&self) {
        self.log.lock().expect("tap poisoned").clear();
    }
}

impl Transport for TapTransport {
    fn post(&self, path: &str, body: &[u8]) -> Result<(u16, Vec<u8>), SubjectError> {
        let (status, response) = self.inner.post(path, body)?;
        self.log.lock().expect("tap poisoned").push(Exchange {
            path: path.to_owned(),
            request: body.to_vec(),
            response: response.clone(),
        });
        Ok((status, response))
    }
}

/// File a token for `policy` is stored under inside the token directory.
pub fn token_file_name(policy: &str) -> String {
    let readable: String = policy
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .take(48)
        .collect();
    let digest = Sha256::digest(policy.as_bytes());
    format!("{readable}-{}.json", hex::encode(&digest[..4]))
}

pub fn load_token(path: &Path) -> Result<Token, SubjectError> {
    Ok(token_parse(&fs::read(path)?)?)
}

pub struct SubjectState<G: PairingGroup> {
    key: SecretKey<G>,
    pp: PublicParams<G>,
    registry: ChannelRegistry,
    token_dir: Option<PathBuf>,
    transport: Arc<dyn Transport>,
    rng: Mutex<ChaCha20Rng>,
}

impl<G: PairingGroup> SubjectState<G> {
    pub fn new(
        key: SecretKey<G>,
        pp: PublicParams<G>,
        registry: ChannelRegistry,
        transport: Arc<dyn Transport>,
    ) -> Self {
        Self {
            key,
            pp,
            registry,
            token_dir: None,
            transport,
            rng: Mutex::new(ChaCha20Rng::from_entropy()),
        }
    }

    /// Persist fetched tokens as files in `dir`.
    pub fn with_token_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.token_dir = Some(dir.into());
        self
    }

    pub fn with_rng_seed(self, seed: u64) -> Self {
        *self.rng.lock().expect("rng poisoned") = ChaCha20Rng::seed_from_u64(seed);
        self
    }

    pub fn secret_key(&self) -> &SecretKey<G> {
        &self.key
    }

    pub fn registry(&self) -> &ChannelRegistry {
        &self.registry
    }

    fn fork_rng(&self) -> ChaCha20Rng {
        ChaCha20Rng::from_seed(self.rng.lock().expect("rng poisoned").gen())
    }

    /// Reads, decrypts and stores the latest token on the channel at `root`.
    pub fn fetch_token(&self, root: &Address, store: &TangleStore) -> Result<Token, SubjectError> {
        let entry = self
            .registry
            .by_root(root)
            .ok_or(SubjectError::UnknownChannel(*root))?;
        let (body, _) = fetch_latest(store, root, &entry.verify_key).map_err(|e| match e {
            MamError::NotFound(a) => SubjectError::NotFound(a),
            other => SubjectError::Mam(other),
        })?;
        let ct = AbeCiphertext::<G>::from_bytes(&body)?;
        let pt = decrypt(&self.key, &ct)?
            .plaintext()
            .ok_or_else(|| SubjectError::NotSatisfied(ct.policy_text().to_owned()))?;
        let token = token_parse(&pt)?;
        if let Some(dir) = &self.token_dir {
            self.persist(dir, &token, &pt)?;
        }
        Ok(token)
    }

    fn persist(&self, dir: &Path, token: &Token, bytes: &[u8]) -> Result<(), SubjectError> {
        fs::create_dir_all(dir)?;
        let path = dir.join(token_file_name(&token.policy));
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    /// Stored token for `policy`, if one was fetched before.
    pub fn stored_token(&self, policy: &str) -> Option<Token> {
        let dir = self.token_dir.as_ref()?;
        load_token(&dir.join(token_file_name(policy))).ok()
    }

    /// Phase one: declares the token's policy and decrypts the OTP.
    pub fn authenticate(&self, token: &Token) -> Result<String, SubjectError> {
        let body = serde_json::to_vec(&AuthBody {
            policy: token.policy.clone(),
        })
        .expect("plain struct");
        let (status, reply) = self.transport.post("/auth", &body)?;
        if status != 200 {
            return Err(SubjectError::Rejected {
                status,
                body: String::from_utf8_lossy(&reply).into_owned(),
            });
        }
        let reply: AuthReply =
            serde_json::from_slice(&reply).map_err(|e| WireError::Json(e.to_string()))?;
        let ct = AbeCiphertext::<G>::from_bytes(&b64_decode(&reply.otp_ct, "otp_ct")?)?;
        let otp = decrypt(&self.key, &ct)?
            .plaintext()
            .ok_or_else(|| SubjectError::NotSatisfied(token.policy.clone()))?;
        String::from_utf8(otp)
            .map_err(|_| SubjectError::Wire(WireError::Unexpected("otp is not text".into())))
    }

    /// Encrypts the request under `Role:Owner`.
    pub fn build_access_request(
        &self,
        token: &Token,
        resource: &str,
        action: &str,
        otp: &str,
    ) -> Result<Vec<u8>, SubjectError> {
        if otp.is_empty() {
            return Err(SubjectError::EmptyOtp);
        }
        let request = AccessRequest {
            resource: resource.to_owned(),
            action: action.to_owned(),
            token: token.clone(),
            otp: otp.to_owned(),
        };
        let policy = parse_policy(OWNER_POLICY).expect("constant policy");
        let ct = encrypt(
            &self.pp,
            &policy,
            &request.to_canonical_bytes()?,
            &mut self.fork_rng(),
        )?;
        Ok(ct.to_bytes())
    }

    /// Full flow: authenticate, build the request, submit it.
    pub fn request_access(
        &self,
        token: &Token,
        resource: &str,
        action: &str,
    ) -> Result<Decision, SubjectError> {
        let otp = self.authenticate(token)?;
        let ct = self.build_access_request(token, resource, action, &otp)?;
        let body = serde_json::to_vec(&AccessBody {
            request_ct: b64_encode(&ct),
        })
        .expect("plain struct");
        let (status, reply) = self.transport.post("/access", &body)?;
        if status != 200 {
            return Err(SubjectError::Rejected {
                status,
                body: String::from_utf8_lossy(&reply).into_owned(),
            });
        }
        Ok(Decision::from_json(&reply)?)
    }
}
