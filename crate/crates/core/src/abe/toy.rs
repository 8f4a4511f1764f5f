//! INSECURE test-only backend.
//!
//! Every group element is stored as its discrete logarithm modulo the
//! Mersenne prime 2^61 - 1, so "pairing" is field multiplication. The
//! algebra is that of a genuine symmetric bilinear group, which makes the
//! scheme's correctness and key-mixing behaviour observable, but anyone can
//! read every secret. Use it only for fast exhaustive sweeps.

use std::ops::{Add, Mul, Neg, Sub};

use rand::RngCore;
use sha2::{Digest, Sha256};

use super::group::PairingGroup;

pub const MODULUS: u64 = (1 << 61) - 1;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub struct Fp(u64);

impl Fp {
    pub fn new(v: u64) -> Self {
        Fp(v % MODULUS)
    }

    pub fn value(self) -> u64 {
        self.0
    }

    fn pow(self, mut e: u64) -> Self {
        let (mut base, mut acc) = (self, Fp(1));
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }

    fn from_bytes(bytes: &[u8]) -> Option<Self> {
        let raw = u64::from_be_bytes(bytes.try_into().ok()?);
        (raw < MODULUS).then_some(Fp(raw))
    }
}

impl Add for Fp {
    type Output = Fp;
    fn add(self, rhs: Fp) -> Fp {
        Fp::new(self.0 + rhs.0)
    }
}

impl Sub for Fp {
    type Output = Fp;
    fn sub(self, rhs: Fp) -> Fp {
        Fp::new(self.0 + MODULUS - rhs.0)
    }
}

impl Mul for Fp {
    type Output = Fp;
    fn mul(self, rhs: Fp) -> Fp {
        Fp(((self.0 as u128 * rhs.0 as u128) % MODULUS as u128) as u64)
    }
}

impl Neg for Fp {
    type Output = Fp;
    fn neg(self) -> Fp {
        Fp::new(MODULUS - self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToyGroup;

impl PairingGroup for ToyGroup {
    const ID: u8 = 0xF0;
    const NAME: &'static str = "toy";

    type Scalar = Fp;
    type G1 = Fp;
    type G2 = Fp;
    type Gt = Fp;

    fn random_scalar<R: RngCore + ?Sized>(rng: &mut R) -> Fp {
        loop {
            let v = rng.next_u64() >> 3;
            if v < MODULUS {
                return Fp(v);
            }
        }
    }

    fn scalar_from_u64(v: u64) -> Fp {
        Fp::new(v)
    }

    fn scalar_inverse(s: &Fp) -> Option<Fp> {
        (s.0 != 0).then(|| s.pow(MODULUS - 2))
    }

    fn g1_generator() -> Fp {
        Fp(1)
    }

    fn g1_add(a: &Fp, b: &Fp) -> Fp {
        *a + *b
    }

    fn g1_mul(a: &Fp, s: &Fp) -> Fp {
        *a * *s
    }

    fn g2_generator() -> Fp {
        Fp(1)
    }

    fn g2_add(a: &Fp, b: &Fp) -> Fp {
        *a + *b
    }

    fn g2_mul(a: &Fp, s: &Fp) -> Fp {
        *a * *s
    }

    fn hash_to_g2(msg: &[u8]) -> Fp {
        let digest = Sha256::new()
            .chain_update(b"toy-hash-to-g2")
            .chain_update(msg)
            .finalize();
        Fp::new(u64::from_be_bytes(digest[..8].try_into().expect("8 bytes")))
    }

    // Gt elements are exponents of e(g, g); the group operation is addition.
    fn gt_one() -> Fp {
        Fp(0)
    }

    fn gt_mul(a: &Fp, b: &Fp) -> Fp {
        *a + *b
    }

    fn gt_div(a: &Fp, b: &Fp) -> Fp {
        *a - *b
    }

    fn gt_pow(a: &Fp, s: &Fp) -> Fp {
        *a * *s
    }

    fn pair(a: &Fp, b: &Fp) -> Fp {
        *a * *b
    }

    fn encode_scalar(s: &Fp) -> Vec<u8> {
        s.0.to_be_bytes().to_vec()
    }

    fn decode_scalar(bytes: &[u8]) -> Option<Fp> {
        Fp::from_bytes(bytes)
    }

    fn encode_g1(p: &Fp) -> Vec<u8> {
        p.0.to_be_bytes().to_vec()
    }

    fn decode_g1(bytes: &[u8]) -> Option<Fp> {
        Fp::from_bytes(bytes)
    }

    fn encode_g2(p: &Fp) -> Vec<u8> {
        p.0.to_be_bytes().to_vec()
    }

    fn decode_g2(bytes: &[u8]) -> Option<Fp> {
        Fp::from_bytes(bytes)
    }

    fn encode_gt(p: &Fp) -> Vec<u8> {
        p.0.to_be_bytes().to_vec()
    }

    fn decode_gt(bytes: &[u8]) -> Option<Fp> {
        Fp::from_bytes(bytes)
    }
}
