//! BLS12-381 backend built on arkworks.

use ark_bls12_381::{g2, Bls12_381, Fr, G1Affine, G1Projective, G2Affine, G2Projective};
use ark_ec::hashing::curve_maps::wb::WBMap;
use ark_ec::hashing::map_to_curve_hasher::MapToCurveBasedHasher;
use ark_ec::hashing::HashToCurve;
use ark_ec::pairing::{Pairing, PairingOutput};
use ark_ec::{CurveGroup, Group};
use ark_ff::field_hashers::DefaultFieldHasher;
use ark_ff::{Field, PrimeField, Zero};
use ark_serialize::{CanonicalDeserialize, CanonicalSerialize};
use rand::RngCore;
use sha2::Sha256;

use super::group::PairingGroup;

const HASH_DOMAIN: &[u8] = b"IOTACAP-CPABE-V01-CS01-with-BLS12381G2_XMD:SHA-256_SSWU_RO_";

type Gt = PairingOutput<Bls12_381>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bls12;

fn encode<T: CanonicalSerialize>(v: &T) -> Vec<u8> {
    let mut out = Vec::with_capacity(v.compressed_size());
    v.serialize_compressed(&mut out)
        .expect("serializing into a Vec cannot fail");
    out
}

fn decode<T: CanonicalDeserialize>(bytes: &[u8]) -> Option<T> {
    let mut reader = bytes;
    let v = T::deserialize_compressed(&mut reader).ok()?;
    reader.is_empty().then_some(v)
}

impl PairingGroup for Bls12 {
    const ID: u8 = 0x01;
    const NAME: &'static str = "bls12-381";

    type Scalar = Fr;
    type G1 = G1Projective;
    type G2 = G2Projective;
    type Gt = Gt;

    fn random_scalar<R: RngCore + ?Sized>(rng: &mut R) -> Fr {
        let mut wide = [0u8; 64];
        rng.fill_bytes(&mut wide);
        Fr::from_le_bytes_mod_order(&wide)
    }

    fn scalar_from_u64(v: u64) -> Fr {
        Fr::from(v)
    }

    fn scalar_inverse(s: &Fr) -> Option<Fr> {
        s.inverse()
    }

    fn g1_generator() -> G1Projective {
        G1Projective::generator()
    }

    fn g1_add(a: &G1Projective, b: &G1Projective) -> G1Projective {
        *a + *b
    }

    fn g1_mul(a: &G1Projective, s: &Fr) -> G1Projective {
        *a * *s
    }

    fn g2_generator() -> G2Projective {
        G2Projective::generator()
    }

    fn g2_add(a: &G2Projective, b: &G2Projective) -> G2Projective {
        *a + *b
    }

    fn g2_mul(a: &G2Projective, s: &Fr) -> G2Projective {
        *a * *s
    }

    fn hash_to_g2(msg: &[u8]) -> G2Projective {
        let hasher = MapToCurveBasedHasher::<
            G2Projective,
            DefaultFieldHasher<Sha256, 128>,
            WBMap<g2::Config>,
        >::new(HASH_DOMAIN)
        .expect("static domain is valid");
        hasher.hash(msg).expect("hashing to G2 cannot fail").into()
    }

    // PairingOutput is written additively; its zero is the identity of Gt.
    fn gt_one() -> Gt {
        Gt::zero()
    }

    fn gt_mul(a: &Gt, b: &Gt) -> Gt {
        *a + *b
    }

    fn gt_div(a: &Gt, b: &Gt) -> Gt {
        *a - *b
    }

    fn gt_pow(a: &Gt, s: &Fr) -> Gt {
        *a * *s
    }

    fn pair(a: &G1Projective, b: &G2Projective) -> Gt {
        Bls12_381::pairing(a.into_affine(), b.into_affine())
    }

    fn encode_scalar(s: &Fr) -> Vec<u8> {
        encode(s)
    }

    fn decode_scalar(bytes: &[u8]) -> Option<Fr> {
        decode(bytes)
    }

    fn encode_g1(p: &G1Projective) -> Vec<u8> {
        encode(&p.into_affine())
    }

    fn decode_g1(bytes: &[u8]) -> Option<G1Projective> {
        decode::<G1Affine>(bytes).map(Into::into)
    }

    fn encode_g2(p: &G2Projective) -> Vec<u8> {
        encode(&p.into_affine())
    }

    fn decode_g2(bytes: &[u8]) -> Option<G2Projective> {
        decode::<G2Affine>(bytes).map(Into::into)
    }

    fn encode_gt(p: &Gt) -> Vec<u8> {
        encode(p)
    }

    fn decode_gt(bytes: &[u8]) -> Option<Gt> {
        decode(bytes)
    }
}
