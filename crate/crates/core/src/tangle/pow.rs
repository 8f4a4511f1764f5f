use sha2::{Digest, Sha256};

use super::{TangleError, Transaction, TxId};

/// Number of bits produced by the transaction digest.
pub const DIGEST_BITS: u32 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PowConfig {
    /// Required leading zero bits in a transaction id.
    pub difficulty: u32,
    /// Maximum payload bytes carried by one transaction.
    pub payload_capacity: usize,
    /// First nonce tried by the search. Fixing it makes runs reproducible.
    pub nonce_start: u64,
}

impl Default for PowConfig {
    fn default() -> Self {
        Self {
            difficulty: 8,
            payload_capacity: 1024,
            nonce_start: 0,
        }
    }
}

impl PowConfig {
    pub fn validate(&self) -> Result<(), TangleError> {
        if self.difficulty > DIGEST_BITS {
            return Err(TangleError::DifficultyUnreachable(self.difficulty));
        }
        if self.payload_capacity == 0 {
            return Err(TangleError::InvalidConfig(
                "payload capacity must be at least 1 byte".into(),
            ));
        }
        Ok(())
    }
}

pub fn leading_zero_bits(bytes: &[u8]) -> u32 {
    let mut zeros = 0;
    for b in bytes {
        if *b == 0 {
            zeros += 8;
        } else {
            zeros += b.leading_zeros();
            break;
        }
    }
    zeros
}

pub fn meets_difficulty(id: &TxId, difficulty: u32) -> bool {
    leading_zero_bits(&id.0) >= difficulty
}

fn put_field(hasher: &mut Sha256, bytes: &[u8]) {
    hasher.update((bytes.len() as u32).to_be_bytes());
    hasher.update(bytes);
}

/// Digest over every field of a transaction except its id, each field
/// preceded by its 32-bit big-endian length.
pub fn transaction_digest(tx: &Transaction) -> TxId {
    let mut h = Sha256::new();
    put_field(&mut h, &tx.address.0);
    put_field(&mut h, &tx.payload);
    put_field(&mut h, &tx.fragment_index.to_be_bytes());
    put_field(&mut h, &tx.fragment_total.to_be_bytes());
    put_field(&mut h, &tx.trunk.0);
    put_field(&mut h, &tx.branch.0);
    put_field(&mut h, &tx.nonce);
    put_field(&mut h, &tx.timestamp.to_be_bytes());
    TxId(h.finalize().into())
}

/// Searches for a nonce sealing `draft`. The draft's own nonce and id are
/// ignored; candidates are tried in counter order from `cfg.nonce_start`.
pub fn pow_search(draft: &Transaction, cfg: &PowConfig) -> Result<[u8; 8], TangleError> {
    if cfg.difficulty > DIGEST_BITS {
        return Err(TangleError::DifficultyUnreachable(cfg.difficulty));
    }
    let mut candidate = draft.clone();
    let mut counter = cfg.nonce_start;
    loop {
        candidate.nonce = counter.to_be_bytes();
        if meets_difficulty(&transaction_digest(&candidate), cfg.difficulty) {
            return Ok(candidate.nonce);
        }
        counter = counter.wrapping_add(1);
        if counter == cfg.nonce_start {
            return Err(TangleError::DifficultyUnreachable(cfg.difficulty));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tangle::{Address, GENESIS};

    fn draft() -> Transaction {
        Transaction {
            id: GENESIS,
            address: Address([7; 32]),
            payload: b"hello tangle".to_vec(),
            fragment_index: 0,
            fragment_total: 1,
            trunk: GENESIS,
            branch: GENESIS,
            nonce: [0; 8],
            timestamp: 1,
        }
    }

    #[test]
    fn zero_difficulty_accepts_first_candidate() {
        let cfg = PowConfig {
            difficulty: 0,
            nonce_start: 42,
            ..PowConfig::default()
        };
        let nonce = pow_search(&draft(), &cfg).unwrap();
        assert_eq!(u64::from_be_bytes(nonce), 42);
    }

    #[test]
    fn difficulty_eight_gives_zero_first_byte() {
        let cfg = PowConfig {
            difficulty: 8,
            ..PowConfig::default()
        };
        let mut tx = draft();
        tx.nonce = pow_search(&tx, &cfg).unwrap();
        let id = transaction_digest(&tx);
        assert_eq!(id.0[0], 0x00);
    }

    #[test]
    fn search_is_reproducible() {
        let cfg = PowConfig {
            difficulty: 6,
            nonce_start: 1000,
            ..PowConfig::default()
        };
        assert_eq!(
            pow_search(&draft(), &cfg).unwrap(),
            pow_search(&draft(), &cfg).unwrap()
        );
    }

    #[test]
    fn impossible_difficulty_is_rejected() {
        let cfg = PowConfig {
            difficulty: DIGEST_BITS + 1,
            ..PowConfig::default()
        };
        assert!(matches!(
            pow_search(&draft(), &cfg),
            Err(TangleError::DifficultyUnreachable(257))
        ));
    }

    #[test]
    fn leading_zeros_counts_across_bytes() {
        assert_eq!(leading_zero_bits(&[0, 0, 0x10]), 19);
        assert_eq!(leading_zero_bits(&[0x80]), 0);
        assert_eq!(leading_zero_bits(&[0, 0]), 16);
    }
}
