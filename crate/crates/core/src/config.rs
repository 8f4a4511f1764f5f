//! TOML configuration shared by the command-line tools.
//!
//! ```toml
//! [pow]
//! difficulty = 8
//! payload_capacity = 1024
//!
//! [tangle]
//! log_path = "tangle.jsonl"
//!
//! [abe]
//! params_path = "keys/params.abe"
//!
//! [owner]
//! seed = "<64 hex chars>"
//! issuer = "owner1"
//! otp_ttl_s = 60
//! listen_addr = "127.0.0.1:8700"
//! key_path = "keys/owner.key"
//! registry_path = "registry.tsv"
//!
//! [subject]
//! owner_endpoint = "http://127.0.0.1:8700"
//! registry_path = "registry.tsv"
//! key_path = "keys/subject.key"
//! token_dir = "tokens"
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::owner::DEFAULT_OTP_TTL_S;
use crate::tangle::{PowConfig, TangleConfig};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Toml {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub pow: PowSection,
    #[serde(default)]
    pub tangle: TangleSection,
    #[serde(default)]
    pub abe: AbeSection,
    #[serde(default)]
    pub owner: OwnerSection,
    #[serde(default)]
    pub subject: SubjectSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowSection {
    pub difficulty: u32,
    pub payload_capacity: usize,
    pub nonce_start: u64,
}

impl Default for PowSection {
    fn default() -> Self {
        let d = PowConfig::default();
        Self {
            difficulty: d.difficulty,
            payload_capacity: d.payload_capacity,
            nonce_start: d.nonce_start,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TangleSection {
    pub log_path: Option<PathBuf>,
    pub seed: u64,
}

impl Default for TangleSection {
    fn default() -> Self {
        Self {
            log_path: Some("tangle.jsonl".into()),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AbeSection {
    pub params_path: PathBuf,
    pub master_path: PathBuf,
}

impl Default for AbeSection {
    fn default() -> Self {
        Self {
            params_path: "keys/params.abe".into(),
            master_path: "keys/master.abe".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OwnerSection {
    pub seed: Option<String>,
    pub issuer: String,
    pub otp_ttl_s: u64,
    pub listen_addr: String,
    pub key_path: PathBuf,
    pub registry_path: PathBuf,
    pub workers: usize,
}

impl Default for OwnerSection {
    fn default() -> Self {
        Self {
            seed: None,
            issuer: "owner1".into(),
            otp_ttl_s: DEFAULT_OTP_TTL_S,
            listen_addr: "127.0.0.1:8700".into(),
            key_path: "keys/owner.key".into(),
            registry_path: "registry.tsv".into(),
            workers: 4,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SubjectSection {
    pub owner_endpoint: String,
    pub registry_path: PathBuf,
    pub key_path: PathBuf,
    pub token_dir: PathBuf,
}

impl Default for SubjectSection {
    fn default() -> Self {
        Self {
            owner_endpoint: "http://127.0.0.1:8700".into(),
            registry_path: "registry.tsv".into(),
            key_path: "keys/subject.key".into(),
            token_dir: "tokens".into(),
        }
    }
}

impl Config {
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg: Config = toml::from_str(text).map_err(|source| ConfigError::Toml {
            path: base.to_path_buf(),
            source,
        })?;
        cfg.resolve(base);
        cfg.pow_config()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }

    /// Loads `path`; a missing file yields the defaults.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        match fs::read_to_string(path) {
            Ok(text) => Self::parse(&text, &base),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                let mut cfg = Config::default();
                cfg.resolve(&base);
                Ok(cfg)
            }
            Err(source) => Err(ConfigError::Io {
                path: path.to_path_buf(),
                source,
            }),
        }
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.tangle.log_path.as_mut() {
            fix(p);
        }
        fix(&mut self.abe.params_path);
        fix(&mut self.abe.master_path);
        fix(&mut self.owner.key_path);
        fix(&mut self.owner.registry_path);
        fix(&mut self.subject.registry_path);
        fix(&mut self.subject.key_path);
        fix(&mut self.subject.token_dir);
    }

    pub fn pow_config(&self) -> PowConfig {
        PowConfig {
            difficulty: self.pow.difficulty,
            payload_capacity: self.pow.payload_capacity,
            nonce_start: self.pow.nonce_start,
        }
    }

    pub fn tangle_config(&self) -> TangleConfig {
        TangleConfig {
            pow: self.pow_config(),
            seed: self.tangle.seed,
            log_path: self.tangle.log_path.clone(),
        }
    }

    /// The owner seed, required for any owner command.
    pub fn owner_seed(&self) -> Result<[u8; 32], ConfigError> {
        let text = self
            .owner
            .seed
            .as_deref()
            .ok_or_else(|| ConfigError::Invalid("owner.seed is not set".into()))?;
        let mut seed = [0u8; 32];
        hex::decode_to_slice(text.trim(), &mut seed)
            .map_err(|_| ConfigError::Invalid("owner.seed must be 64 hex characters".into()))?;
        Ok(seed)
    }
}
