//! A desk-scale simulator of the IOTA Tangle.
//!
//! Transactions form a DAG: every new transaction approves two current tips
//! (its trunk and branch) and is sealed with a leading-zero-bits proof of
//! work. Payloads larger than the configured capacity are split across the
//! transactions of one bundle, and bundles are indexed by address so that
//! MAM channels can look them up.

mod log;
mod pow;

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, RwLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub use self::log::{LogRecord, TransactionLog};
pub use self::pow::{
    leading_zero_bits, meets_difficulty, pow_search, transaction_digest, PowConfig, DIGEST_BITS,
};

#[derive(Debug, thiserror::Error)]
pub enum TangleError {
    #[error("difficulty {0} exceeds the digest length")]
    DifficultyUnreachable(u32),
    #[error("invalid tangle configuration: {0}")]
    InvalidConfig(String),
    #[error("payload is empty")]
    EmptyPayload,
    #[error("unknown transaction {0}")]
    UnknownTransaction(TxId),
    #[error("corrupt bundle at {address}: {reason}")]
    CorruptBundle { address: Address, reason: String },
    #[error("transaction log: {0}")]
    Log(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

macro_rules! digest_newtype {
    ($name:ident, $what:literal) => {
        #[doc = $what]
        #[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
        pub struct $name(pub [u8; 32]);

        impl $name {
            pub fn to_hex(&self) -> String {
                hex::encode(self.0)
            }

            pub fn from_slice(bytes: &[u8]) -> Option<Self> {
                <[u8; 32]>::try_from(bytes).ok().map(Self)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.to_hex())
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({}..)", stringify!($name), &self.to_hex()[..12])
            }
        }

        impl FromStr for $name {
            type Err = hex::FromHexError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let mut out = [0u8; 32];
                hex::decode_to_slice(s.trim(), &mut out)?;
                Ok(Self(out))
            }
        }
    };
}

digest_newtype!(TxId, "Digest identifying a transaction.");
digest_newtype!(
    Address,
    "32-byte routing key under which bundles are filed."
);

/// Marker id trunk/branch point to when the ledger has no tips yet.
pub const GENESIS: TxId = TxId([0; 32]);

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Transaction {
    pub id: TxId,
    pub address: Address,
    pub payload: Vec<u8>,
    pub fragment_index: u32,
    pub fragment_total: u32,
    pub trunk: TxId,
    pub branch: TxId,
    pub nonce: [u8; 8],
    /// Logical milliseconds; the store advances it by one per transaction.
    pub timestamp: u64,
}

impl Transaction {
    /// Whether the stored id matches the digest of the other fields.
    pub fn digest_matches(&self) -> bool {
        transaction_digest(self) == self.id
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Bundle {
    pub address: Address,
    pub transactions: Vec<Transaction>,
}

impl Bundle {
    pub fn len(&self) -> usize {
        self.transactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transactions.is_empty()
    }

    pub fn payload(&self) -> Vec<u8> {
        self.transactions
            .iter()
            .flat_map(|tx| tx.payload.iter().copied())
            .collect()
    }
}

/// Operation counters, read by the benchmarks.
#[derive(Debug, Default)]
pub struct Metrics {
    bundles_attached: AtomicU64,
    transactions_attached: AtomicU64,
    bundle_fetches: AtomicU64,
    channel_walks: AtomicU64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct MetricsSnapshot {
    pub bundles_attached: u64,
    pub transactions_attached: u64,
    pub bundle_fetches: u64,
    pub channel_walks: u64,
}

impl Metrics {
    pub fn snapshot(&self) -> MetricsSnapshot {
        MetricsSnapshot {
            bundles_attached: self.bundles_attached.load(Ordering::Relaxed),
            transactions_attached: self.transactions_attached.load(Ordering::Relaxed),
            bundle_fetches: self.bundle_fetches.load(Ordering::Relaxed),
            channel_walks: self.channel_walks.load(Ordering::Relaxed),
        }
    }

    /// Counts one fetch-latest traversal of a channel.
    pub fn record_channel_walk(&self) {
        self.channel_walks.fetch_add(1, Ordering::Relaxed);
    }
}

impl std::ops::Sub for MetricsSnapshot {
    type Output = MetricsSnapshot;

    fn sub(self, rhs: Self) -> Self {
        MetricsSnapshot {
            bundles_attached: self.bundles_attached - rhs.bundles_attached,
            transactions_attached: self.transactions_attached - rhs.transactions_attached,
            bundle_fetches: self.bundle_fetches - rhs.bundle_fetches,
            channel_walks: self.channel_walks - rhs.channel_walks,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct TangleConfig {
    pub pow: PowConfig,
    /// Seed for tip selection.
    pub seed: u64,
    pub log_path: Option<PathBuf>,
}

#[derive(Debug)]
struct Ledger {
    transactions: HashMap<TxId, Transaction>,
    tips: BTreeSet<TxId>,
    address_index: HashMap<Address, Vec<Vec<TxId>>>,
    clock: u64,
    rng: ChaCha20Rng,
}

impl Ledger {
    fn resolves(&self, id: &TxId) -> bool {
        *id == GENESIS || self.transactions.contains_key(id)
    }

    fn insert(&mut self, tx: Transaction) {
        self.tips.remove(&tx.trunk);
        self.tips.remove(&tx.branch);
        self.tips.insert(tx.id);
        self.clock = self.clock.max(tx.timestamp);
        self.transactions.insert(tx.id, tx);
    }
}

/// Picks trunk and branch uniformly (with replacement) among `tips`, or
/// the genesis marker when there are none.
pub fn tip_select<R: Rng + ?Sized>(tips: &BTreeSet<TxId>, rng: &mut R) -> (TxId, TxId) {
    if tips.is_empty() {
        return (GENESIS, GENESIS);
    }
    let mut pick = || {
        *tips
            .iter()
            .nth(rng.gen_range(0..tips.len()))
            .expect("index in range")
    };
    let trunk = pick();
    let branch = pick();
    (trunk, branch)
}

/// Shared, linearizable ledger. Attaches take the write lock for tip
/// selection, proof of work and insertion together; reads share the lock.
#[derive(Debug)]
pub struct TangleStore {
    cfg: PowConfig,
    ledger: RwLock<Ledger>,
    log: Option<Mutex<TransactionLog>>,
    metrics: Metrics,
}

impl TangleStore {
    pub fn new(cfg: TangleConfig) -> Result<Self, TangleError> {
        cfg.pow.validate()?;
        let mut store = Self {
            cfg: cfg.pow,
            ledger: RwLock::new(Ledger {
                transactions: HashMap::new(),
                tips: BTreeSet::new(),
                address_index: HashMap::new(),
                clock: 0,
                rng: ChaCha20Rng::seed_from_u64(cfg.seed),
            }),
            log: None,
            metrics: Metrics::default(),
        };
        if let Some(path) = cfg.log_path {
            store.replay_and_attach_log(&path)?;
        }
        Ok(store)
    }

    /// In-memory store with the given proof-of-work settings.
    pub fn in_memory(pow: PowConfig) -> Result<Self, TangleError> {
        Self::new(TangleConfig {
            pow,
            ..TangleConfig::default()
        })
    }

    fn replay_and_attach_log(&mut self, path: &Path) -> Result<(), TangleError> {
        let records = TransactionLog::read_all(path)?;
        {
            let ledger = self.ledger.get_mut().expect("ledger lock poisoned");
            let mut pending: Option<Vec<TxId>> = None;
            for (line, tx) in records.into_iter().enumerate() {
                if !ledger.resolves(&tx.trunk) || !ledger.resolves(&tx.branch) {
                    return Err(TangleError::Log(format!(
                        "line {}: transaction {} approves an unknown transaction",
                        line + 1,
                        tx.id
                    )));
                }
                if tx.fragment_index >= tx.fragment_total {
                    return Err(TangleError::Log(format!(
                        "line {}: bad fragment index",
                        line + 1
                    )));
                }
                let ids = pending.get_or_insert_with(Vec::new);
                if ids.len() as u32 != tx.fragment_index {
                    return Err(TangleError::Log(format!(
                        "line {}: fragment {} out of order",
                        line + 1,
                        tx.fragment_index
                    )));
                }
                ids.push(tx.id);
                let (address, complete) = (tx.address, tx.fragment_index + 1 == tx.fragment_total);
                ledger.insert(tx);
                if complete {
                    let ids = pending.take().expect("bundle in progress");
                    ledger.address_index.entry(address).or_default().push(ids);
                }
            }
            if pending.is_some() {
                return Err(TangleError::Log("log ends inside a bundle".into()));
            }
        }
        self.log = Some(Mutex::new(TransactionLog::open_append(path)?));
        Ok(())
    }

    pub fn pow_config(&self) -> &PowConfig {
        &self.cfg
    }

    pub fn metrics(&self) -> &Metrics {
        &self.metrics
    }

    /// Splits `payload` into capacity-sized fragments and attaches them as
    /// one bundle under `address`.
    pub fn attach(&self, address: Address, payload: &[u8]) -> Result<Bundle, TangleError> {
        if payload.is_empty() {
            return Err(TangleError::EmptyPayload);
        }
        let chunks: Vec<&[u8]> = payload.chunks(self.cfg.payload_capacity).collect();
        let total = chunks.len() as u32;
        let mut guard = self.ledger.write().expect("ledger lock poisoned");
        let ledger = &mut *guard;
        let mut bundle = Vec::with_capacity(chunks.len());
        for (index, chunk) in chunks.into_iter().enumerate() {
            let (trunk, branch) = tip_select(&ledger.tips, &mut ledger.rng);
            let mut tx = Transaction {
                id: GENESIS,
                address,
                payload: chunk.to_vec(),
                fragment_index: index as u32,
                fragment_total: total,
                trunk,
                branch,
                nonce: [0; 8],
                timestamp: ledger.clock + 1,
            };
            tx.nonce = pow_search(&tx, &self.cfg)?;
            tx.id = transaction_digest(&tx);
            ledger.insert(tx.clone());
            bundle.push(tx);
        }
        if let Some(log) = &self.log {
            let mut log = log.lock().expect("log lock poisoned");
            for tx in &bundle {
                log.append(tx)?;
            }
            log.flush()?;
        }
        ledger
            .address_index
            .entry(address)
            .or_default()
            .push(bundle.iter().map(|tx| tx.id).collect());
        drop(guard);

        self.metrics
            .bundles_attached
            .fetch_add(1, Ordering::Relaxed);
        self.metrics
            .transactions_attached
            .fetch_add(bundle.len() as u64, Ordering::Relaxed);
        Ok(Bundle {
            address,
            transactions: bundle,
        })
    }

    /// Reassembled payloads of every bundle filed under `address`, in
    /// insertion order. Every member transaction is re-verified.
    pub fn fetch_bundles(&self, address: &Address) -> Result<Vec<Vec<u8>>, TangleError> {
        self.metrics.bundle_fetches.fetch_add(1, Ordering::Relaxed);
        let ledger = self.ledger.read().expect("ledger lock poisoned");
        let Some(bundles) = ledger.address_index.get(address) else {
            return Ok(Vec::new());
        };
        let corrupt = |reason: String| TangleError::CorruptBundle {
            address: *address,
            reason,
        };
        let mut out = Vec::with_capacity(bundles.len());
        for ids in bundles {
            let mut payload = Vec::new();
            for (expected_index, id) in ids.iter().enumerate() {
                let tx = ledger
                    .transactions
                    .get(id)
                    .ok_or_else(|| corrupt(format!("missing fragment {id}")))?;
                if !self.check(&ledger, id, tx) {
                    return Err(corrupt(format!("transaction {id} fails verification")));
                }
                if tx.address != *address
                    || tx.fragment_index as usize != expected_index
                    || tx.fragment_total as usize != ids.len()
                {
                    return Err(corrupt(format!("fragment layout broken at {id}")));
                }
                payload.extend_from_slice(&tx.payload);
            }
            out.push(payload);
        }
        Ok(out)
    }

    fn check(&self, ledger: &Ledger, key: &TxId, tx: &Transaction) -> bool {
        tx.id == *key
            && tx.digest_matches()
            && meets_difficulty(&tx.id, self.cfg.difficulty)
            && tx.fragment_index < tx.fragment_total
            && tx.payload.len() <= self.cfg.payload_capacity
            && ledger.resolves(&tx.trunk)
            && ledger.resolves(&tx.branch)
    }

    pub fn verify_transaction(&self, id: &TxId) -> Result<bool, TangleError> {
        let ledger = self.ledger.read().expect("ledger lock poisoned");
        let tx = ledger
            .transactions
            .get(id)
            .ok_or(TangleError::UnknownTransaction(*id))?;
        Ok(self.check(&ledger, id, tx))
    }

    pub fn transaction(&self, id: &TxId) -> Option<Transaction> {
        self.ledger
            .read()
            .expect("ledger lock poisoned")
            .transactions
            .get(id)
            .cloned()
    }

    pub fn tips(&self) -> BTreeSet<TxId> {
        self.ledger
            .read()
            .expect("ledger lock poisoned")
            .tips
            .clone()
    }

    pub fn transaction_ids(&self) -> Vec<TxId> {
        let ledger = self.ledger.read().expect("ledger lock poisoned");
        let mut ids: Vec<TxId> = ledger.transactions.keys().copied().collect();
        ids.sort();
        ids
    }

    pub fn len(&self) -> usize {
        self.ledger
            .read()
            .expect("ledger lock poisoned")
            .transactions
            .len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of bundles filed under `address`.
    pub fn bundle_count(&self, address: &Address) -> usize {
        self.ledger
            .read()
            .expect("ledger lock poisoned")
            .address_index
            .get(address)
            .map_or(0, Vec::len)
    }

    /// Ids of the transactions in each bundle under `address`.
    pub fn bundle_ids(&self, address: &Address) -> Vec<Vec<TxId>> {
        self.ledger
            .read()
            .expect("ledger lock poisoned")
            .address_index
            .get(address)
            .cloned()
            .unwrap_or_default()
    }

    /// Orders transactions so that every transaction follows the ones it
    /// approves. `None` means the approval graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<TxId>> {
        let ledger = self.ledger.read().expect("ledger lock poisoned");
        let mut pending: HashMap<TxId, usize> = HashMap::new();
        let mut approvers: HashMap<TxId, Vec<TxId>> = HashMap::new();
        for tx in ledger.transactions.values() {
            let parents: BTreeSet<TxId> = [tx.trunk, tx.branch]
                .into_iter()
                .filter(|p| *p != GENESIS)
                .collect();
            pending.insert(tx.id, parents.len());
            for p in parents {
                approvers.entry(p).or_default().push(tx.id);
            }
        }
        let mut ready: VecDeque<TxId> = pending
            .iter()
            .filter(|(_, n)| **n == 0)
            .map(|(id, _)| *id)
            .collect();
        let mut order = Vec::with_capacity(pending.len());
        while let Some(id) = ready.pop_front() {
            order.push(id);
            for child in approvers.get(&id).into_iter().flatten() {
                let n = pending.get_mut(child).expect("child is a transaction");
                *n -= 1;
                if *n == 0 {
                    ready.push_back(*child);
                }
            }
        }
        (order.len() == ledger.transactions.len()).then_some(order)
    }

    /// Fault injection: rewrites the stored transaction filed under `id`
    /// without resealing it. Used to exercise tamper detection.
    pub fn tamper_with<F: FnOnce(&mut Transaction)>(
        &self,
        id: &TxId,
        f: F,
    ) -> Result<(), TangleError> {
        let mut ledger = self.ledger.write().expect("ledger lock poisoned");
        let tx = ledger
            .transactions
            .get_mut(id)
            .ok_or(TangleError::UnknownTransaction(*id))?;
        f(tx);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(capacity: usize) -> TangleStore {
        TangleStore::in_memory(PowConfig {
            difficulty: 4,
            payload_capacity: capacity,
            nonce_start: 0,
        })
        .unwrap()
    }

    fn addr(n: u8) -> Address {
        Address([n; 32])
    }

    #[test]
    fn tip_select_on_empty_returns_genesis() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        assert_eq!(tip_select(&BTreeSet::new(), &mut rng), (GENESIS, GENESIS));
    }

    #[test]
    fn tip_select_single_tip() {
        let t = TxId([9; 32]);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        assert_eq!(tip_select(&BTreeSet::from([t]), &mut rng), (t, t));
    }

    #[test]
    fn tip_select_two_tips_is_seeded() {
        let (a, b) = (TxId([1; 32]), TxId([2; 32]));
        let tips = BTreeSet::from([a, b]);
        let draw = |seed| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            (0..16)
                .map(|_| tip_select(&tips, &mut rng))
                .collect::<Vec<_>>()
        };
        let first = draw(5);
        assert_eq!(first, draw(5));
        assert!(first
            .iter()
            .all(|(x, y)| [a, b].contains(x) && [a, b].contains(y)));
        // 16 draws of 4 equally likely pairs: all four show up for this seed.
        let distinct: BTreeSet<_> = first.iter().collect();
        assert_eq!(distinct.len(), 4);
    }

    #[test]
    fn attach_boundary_sizes() {
        let s = store(16);
        assert_eq!(s.attach(addr(1), &[1; 16]).unwrap().len(), 1);
        let b = s.attach(addr(2), &[1; 33]).unwrap();
        assert_eq!(b.len(), 3);
        assert!(b.transactions.iter().all(|t| t.fragment_total == 3));
    }

    #[test]
    fn empty_payload_rejected() {
        assert!(matches!(
            store(16).attach(addr(1), &[]),
            Err(TangleError::EmptyPayload)
        ));
    }

    #[test]
    fn second_attach_approves_tips_after_first() {
        let s = store(64);
        let first = s.attach(addr(1), b"one").unwrap();
        let tips_after_first = s.tips();
        assert_eq!(tips_after_first, BTreeSet::from([first.transactions[0].id]));
        let second = s.attach(addr(1), b"two").unwrap();
        let tx = &second.transactions[0];
        assert!(tips_after_first.contains(&tx.trunk));
        assert!(tips_after_first.contains(&tx.branch));
    }

    #[test]
    fn first_transaction_approves_genesis() {
        let s = store(64);
        let b = s.attach(addr(1), b"x").unwrap();
        assert_eq!(b.transactions[0].trunk, GENESIS);
        assert_eq!(b.transactions[0].branch, GENESIS);
    }

    #[test]
    fn fetch_round_trip_and_unknown() {
        let s = store(8);
        assert!(s.fetch_bundles(&addr(3)).unwrap().is_empty());
        let payload: Vec<u8> = (0..50).collect();
        s.attach(addr(3), &payload).unwrap();
        assert_eq!(s.fetch_bundles(&addr(3)).unwrap(), vec![payload]);
    }

    #[test]
    fn mutated_fragment_is_corrupt() {
        let s = store(8);
        let b = s.attach(addr(3), &[5u8; 20]).unwrap();
        s.tamper_with(&b.transactions[1].id, |tx| tx.payload[0] ^= 1)
            .unwrap();
        assert!(matches!(
            s.fetch_bundles(&addr(3)),
            Err(TangleError::CorruptBundle { .. })
        ));
    }

    #[test]
    fn verify_transaction_cases() {
        // counter starts at 1, so the sealing nonce is never all zeros
        let s = TangleStore::in_memory(PowConfig {
            difficulty: 4,
            payload_capacity: 8,
            nonce_start: 1,
        })
        .unwrap();
        let id = s.attach(addr(1), b"abc").unwrap().transactions[0].id;
        assert!(s.verify_transaction(&id).unwrap());
        s.tamper_with(&id, |tx| tx.nonce = [0; 8]).unwrap();
        assert!(!s.verify_transaction(&id).unwrap());
        assert!(matches!(
            s.verify_transaction(&TxId([0xAB; 32])),
            Err(TangleError::UnknownTransaction(_))
        ));
    }

    #[test]
    fn difficulty_above_digest_rejected_at_construction() {
        let cfg = PowConfig {
            difficulty: 300,
            ..PowConfig::default()
        };
        assert!(matches!(
            TangleStore::in_memory(cfg),
            Err(TangleError::DifficultyUnreachable(300))
        ));
    }

    #[test]
    fn address_hex_round_trip() {
        let a = addr(0xC4);
        assert_eq!(a.to_hex().parse::<Address>().unwrap(), a);
        assert!("zz".parse::<Address>().is_err());
    }
}
