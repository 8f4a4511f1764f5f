//! The bilinear-group interface the CP-ABE scheme is written against.

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use rand::RngCore;

/// A pairing `e: G1 x G2 -> Gt` over groups of prime order with scalar
/// field `Scalar`. G1 and G2 are written additively, Gt multiplicatively.
pub trait PairingGroup: Sized + Copy + Debug + PartialEq + Eq + Send + Sync + 'static {
    /// Tag written into serialized objects so that backends cannot be mixed.
    const ID: u8;
    const NAME: &'static str;

    type Scalar: Copy
        + Eq
        + Debug
        + Send
        + Sync
        + Add<Output = Self::Scalar>
        + Sub<Output = Self::Scalar>
        + Mul<Output = Self::Scalar>
        + Neg<Output = Self::Scalar>;
    type G1: Copy + Eq + Debug + Send + Sync;
    type G2: Copy + Eq + Debug + Send + Sync;
    type Gt: Copy + Eq + Debug + Send + Sync;

    fn random_scalar<R: RngCore + ?Sized>(rng: &mut R) -> Self::Scalar;
    fn scalar_from_u64(v: u64) -> Self::Scalar;
    fn scalar_inverse(s: &Self::Scalar) -> Option<Self::Scalar>;

    fn g1_generator() -> Self::G1;
    fn g1_add(a: &Self::G1, b: &Self::G1) -> Self::G1;
    fn g1_mul(a: &Self::G1, s: &Self::Scalar) -> Self::G1;

    fn g2_generator() -> Self::G2;
    fn g2_add(a: &Self::G2, b: &Self::G2) -> Self::G2;
    fn g2_mul(a: &Self::G2, s: &Self::Scalar) -> Self::G2;
    /// Hashes arbitrary bytes onto G2 with unknown discrete logarithm.
    fn hash_to_g2(msg: &[u8]) -> Self::G2;

    fn gt_one() -> Self::Gt;
    fn gt_mul(a: &Self::Gt, b: &Self::Gt) -> Self::Gt;
    fn gt_div(a: &Self::Gt, b: &Self::Gt) -> Self::Gt;
    fn gt_pow(a: &Self::Gt, s: &Self::Scalar) -> Self::Gt;

    fn pair(a: &Self::G1, b: &Self::G2) -> Self::Gt;

    fn encode_scalar(s: &Self::Scalar) -> Vec<u8>;
    fn decode_scalar(bytes: &[u8]) -> Option<Self::Scalar>;
    fn encode_g1(p: &Self::G1) -> Vec<u8>;
    fn decode_g1(bytes: &[u8]) -> Option<Self::G1>;
    fn encode_g2(p: &Self::G2) -> Vec<u8>;
    fn decode_g2(bytes: &[u8]) -> Option<Self::G2>;
    fn encode_gt(p: &Self::Gt) -> Vec<u8>;
    fn decode_gt(bytes: &[u8]) -> Option<Self::Gt>;
}
