//! Ready-made deployments: one tangle, one attribute authority, one owner.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::abe::{keygen, setup, AttributeSet, MasterKey, PairingGroup, PublicParams, SecretKey};
use crate::owner::{ManualClock, Owner, OwnerConfig, OWNER_POLICY};
use crate::subject::{LocalTransport, SubjectState, Transport};
use crate::tangle::{PowConfig, TangleStore};
use crate::token::Right;

pub const STUDENT_POLICY: &str = "Division:IS AND Role:Student";
pub const STAFF_POLICY: &str = "Division:IS AND Role:Staff";
pub const STUDENT_ATTRS: &str = "Division:IS, Role:Student";
pub const STAFF_ATTRS: &str = "Division:IS, Role:Staff";

/// Student rights before the update.
pub fn student_rights() -> Vec<Right> {
    vec![Right::new("led1/power", ["TURN_ON", "TURN_OFF"])]
}

pub fn staff_rights() -> Vec<Right> {
    vec![
        Right::new("camera1/snapshot", ["GET"]),
        Right::new("led1/power", ["TURN_ON", "TURN_OFF"]),
    ]
}

/// Student rights after the update: the sensor readings are added.
pub fn updated_student_rights() -> Vec<Right> {
    vec![
        Right::new("led1/power", ["TURN_ON", "TURN_OFF"]),
        Right::new("sensor1/temperature", ["GET"]),
        Right::new("sensor1/humidity", ["GET"]),
    ]
}

pub struct Deployment<G: PairingGroup> {
    pub store: Arc<TangleStore>,
    pub pp: PublicParams<G>,
    pub mk: MasterKey<G>,
    pub owner: Arc<Owner<G>>,
    pub clock: Arc<ManualClock>,
    rng: ChaCha20Rng,
}

impl<G: PairingGroup> Deployment<G> {
    /// `owner_universe` is added to `Role:Owner` in the owner's key; it must
    /// cover every policy the owner will grant.
    pub fn new(seed: u64, pow: PowConfig, owner_universe: &AttributeSet) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (pp, mk) = setup::<G, _>(&mut rng);
        let owner_attrs = owner_universe
            .union(&AttributeSet::parse_list(OWNER_POLICY).expect("constant attribute"));
        let owner_key = keygen(&mk, &owner_attrs, &mut rng).expect("non-empty attribute set");
        let store = Arc::new(TangleStore::in_memory(pow).expect("valid pow config"));
        let clock = Arc::new(ManualClock::new(1_700_000_000));
        let mut cfg = OwnerConfig::new("owner1", derive_seed(seed, b"owner"));
        cfg.rng_seed = Some(seed ^ 0x6f_776e_6572);
        let owner = Owner::new(
            cfg,
            pp.clone(),
            owner_key,
            Arc::clone(&store),
            clock.clone(),
        )
        .expect("owner key carries Role:Owner");
        Self {
            store,
            pp,
            mk,
            owner: Arc::new(owner),
            clock,
            rng,
        }
    }

    /// The lab scenario: student and staff policies over one division.
    pub fn lab(seed: u64, pow: PowConfig) -> Self {
        let universe =
            AttributeSet::parse_list("Division:IS, Role:Student, Role:Staff").expect("static list");
        Self::new(seed, pow, &universe)
    }

    pub fn issue_key(&mut self, attrs: &str) -> SecretKey<G> {
        let attrs = AttributeSet::parse_list(attrs).expect("caller passes a valid list");
        keygen(&self.mk, &attrs, &mut self.rng).expect("non-empty attribute set")
    }

    pub fn local_transport(&self) -> Arc<dyn Transport> {
        Arc::new(LocalTransport::new(Arc::clone(&self.owner)))
    }

    /// A subject holding a fresh key for `attrs`, seeing the owner's current
    /// registry and talking over `transport`.
    pub fn subject(&mut self, attrs: &str, transport: Arc<dyn Transport>) -> SubjectState<G> {
        let key = self.issue_key(attrs);
        let seed = rand::Rng::gen(&mut self.rng);
        SubjectState::new(key, self.pp.clone(), self.owner.registry(), transport)
            .with_rng_seed(seed)
    }
}

pub fn derive_seed(seed: u64, label: &[u8]) -> [u8; 32] {
    use sha2::{Digest, Sha256};
    Sha256::new()
        .chain_update(label)
        .chain_update(seed.to_be_bytes())
        .finalize()
        .into()
}
