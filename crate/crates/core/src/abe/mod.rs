//! Ciphertext-policy attribute-based encryption.
//!
//! Policies are monotone access trees over `Name:Value` attributes; a
//! secret key decrypts a ciphertext exactly when its attribute set
//! satisfies the ciphertext's policy. Two group backends are provided:
//! [`Bls12`] for real use and [`ToyGroup`], an insecure exponent-level model
//! that makes exhaustive correctness sweeps cheap.

mod bls;
mod group;
mod policy;
mod scheme;
mod toy;
mod wire;

pub use bls::Bls12;
pub use group::PairingGroup;
pub use policy::{
    canonicalize, parse_policy, satisfies, Attribute, AttributeError, AttributeSet, ParseError,
    Policy,
};
pub use scheme::{
    decrypt, encrypt, keygen, setup, AbeCiphertext, Decryption, MasterKey, PublicParams, SecretKey,
};
pub use toy::{Fp, ToyGroup};
pub use wire::{peek_key_file, KeyKind, CIPHERTEXT_MAGIC, KEY_MAGIC};

#[derive(Debug, thiserror::Error)]
pub enum AbeError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("policy {0:?} has a gate with an invalid threshold")]
    MalformedPolicy(String),
    #[error("attribute set is empty")]
    EmptyAttributeSet,
    #[error("plaintext is empty")]
    EmptyPlaintext,
    #[error("malformed ciphertext: {0}")]
    MalformedCiphertext(String),
    #[error("decode error: {0}")]
    Decode(String),
    #[error("object was produced by backend {found:#04x}, expected {expected:#04x}")]
    BackendMismatch { expected: u8, found: u8 },
}
