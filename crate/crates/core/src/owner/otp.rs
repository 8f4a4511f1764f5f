//! One-time passwords bound to a policy.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::RngCore;

pub const OTP_LEN: usize = 16;

/// Seconds since some fixed origin.
pub trait Clock: Send + Sync {
    fn now_s(&self) -> u64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_s(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    }
}

/// Logical clock for tests and benchmarks.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn new(start: u64) -> Self {
        Self(AtomicU64::new(start))
    }

    pub fn advance(&self, secs: u64) {
        self.0.fetch_add(secs, Ordering::SeqCst);
    }

    pub fn set(&self, now: u64) {
        self.0.store(now, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_s(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OtpRecord {
    pub policy: String,
    pub otp: [u8; OTP_LEN],
    pub issued_at: u64,
    pub ttl: u64,
}

impl OtpRecord {
    pub fn otp_hex(&self) -> String {
        hex::encode(self.otp)
    }

    /// Valid up to and including `issued_at + ttl`.
    pub fn is_live(&self, now: u64) -> bool {
        now.saturating_sub(self.issued_at) <= self.ttl
    }
}

/// Outstanding OTPs keyed by their hex form. Insert and check-and-delete
/// each happen under one lock, so an OTP can succeed at most once.
#[derive(Debug)]
pub struct OtpRegistry {
    ttl: u64,
    records: Mutex<HashMap<String, OtpRecord>>,
}

impl OtpRegistry {
    pub fn new(ttl: u64) -> Self {
        Self {
            ttl,
            records: Mutex::new(HashMap::new()),
        }
    }

    pub fn ttl(&self) -> u64 {
        self.ttl
    }

    /// Draws a fresh OTP for `policy` and registers it. Expired records are
    /// swept on the way.
    pub fn issue<R: RngCore + ?Sized>(&self, policy: &str, now: u64, rng: &mut R) -> OtpRecord {
        let mut records = self.records.lock().expect("otp registry poisoned");
        records.retain(|_, r| r.is_live(now));
        loop {
            let mut otp = [0u8; OTP_LEN];
            rng.fill_bytes(&mut otp);
            let record = OtpRecord {
                policy: policy.to_owned(),
                otp,
                issued_at: now,
                ttl: self.ttl,
            };
            let key = record.otp_hex();
            if let Entry::Vacant(slot) = records.entry(key) {
                slot.insert(record.clone());
                return record;
            }
        }
    }

    /// True iff `(policy, otp)` is outstanding and unexpired; a true result
    /// consumes the record. Expired records are dropped when touched.
    pub fn check(&self, policy: &str, otp: &str, now: u64) -> bool {
        let mut records = self.records.lock().expect("otp registry poisoned");
        let key = otp.to_ascii_lowercase();
        match records.get(&key) {
            Some(r) if !r.is_live(now) => {
                records.remove(&key);
                false
            }
            Some(r) if r.policy == policy => {
                records.remove(&key);
                true
            }
            _ => false,
        }
    }

    pub fn outstanding(&self) -> usize {
        self.records.lock().expect("otp registry poisoned").len()
    }

    pub fn is_outstanding(&self, otp: &str) -> bool {
        self.records
            .lock()
            .expect("otp registry poisoned")
            .contains_key(&otp.to_ascii_lowercase())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    const P: &str = "Division:IS AND Role:Student";

    #[test]
    fn single_use() {
        let reg = OtpRegistry::new(60);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let rec = reg.issue(P, 100, &mut rng);
        assert_eq!(rec.otp_hex().len(), 32);
        assert!(reg.check(P, &rec.otp_hex(), 100));
        assert!(!reg.check(P, &rec.otp_hex(), 100));
    }

    #[test]
    fn bound_to_policy() {
        let reg = OtpRegistry::new(60);
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let rec = reg.issue(P, 0, &mut rng);
        assert!(!reg.check("Division:IS AND Role:Staff", &rec.otp_hex(), 0));
        assert!(reg.check(P, &rec.otp_hex(), 0));
    }

    #[test]
    fn expiry_boundary() {
        let reg = OtpRegistry::new(60);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let a = reg.issue(P, 1000, &mut rng);
        let b = reg.issue(P, 1000, &mut rng);
        assert!(reg.check(P, &a.otp_hex(), 1060));
        assert!(!reg.check(P, &b.otp_hex(), 1061));
        assert!(!reg.is_outstanding(&b.otp_hex()));
    }

    #[test]
    fn consecutive_issues_are_distinct_and_outstanding() {
        let reg = OtpRegistry::new(60);
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let a = reg.issue(P, 0, &mut rng);
        let b = reg.issue(P, 0, &mut rng);
        assert_ne!(a.otp, b.otp);
        assert_eq!(reg.outstanding(), 2);
        assert!(reg.is_outstanding(&a.otp_hex()) && reg.is_outstanding(&b.otp_hex()));
    }

    #[test]
    fn manual_clock_moves() {
        let c = ManualClock::new(5);
        c.advance(61);
        assert_eq!(c.now_s(), 66);
        c.set(1);
        assert_eq!(c.now_s(), 1);
    }
}
