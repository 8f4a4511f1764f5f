//! Ciphertext-policy ABE in the style of Bethencourt, Sahai and Waters,
//! written for an asymmetric pairing and used as a KEM: the encapsulated
//! `e(g1, g2)^(alpha s)` keys an AEAD that carries the actual plaintext.
//!
//! | object     | components                                                       |
//! |------------|------------------------------------------------------------------|
//! | params     | `g1, g2, h = g1^b, f = g2^(1/b), e(g1,g2)^a`                     |
//! | master key | `b, g2^a`                                                        |
//! | secret key | `D = g2^((a+r)/b)`; per attribute j: `g2^r H(j)^rj`, `g1^rj`     |
//! | ciphertext | `C = h^s`; per leaf y: `g1^qy(0)`, `H(att(y))^qy(0)`             |

use std::collections::BTreeMap;

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use hkdf::Hkdf;
use rand::RngCore;
use sha2::Sha256;

use super::group::PairingGroup;
use super::policy::{satisfies, Attribute, AttributeSet, Policy};
use super::AbeError;

const NONCE_LEN: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicParams<G: PairingGroup> {
    pub(crate) g1: G::G1,
    pub(crate) g2: G::G2,
    pub(crate) h: G::G1,
    pub(crate) f: G::G2,
    pub(crate) egg_alpha: G::Gt,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MasterKey<G: PairingGroup> {
    pub(crate) beta: G::Scalar,
    pub(crate) g2_alpha: G::G2,
}

/// Per-attribute key material: `(g2^r H(j)^rj, g1^rj)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct AttributeComponent<G: PairingGroup> {
    pub(crate) d: G::G2,
    pub(crate) d_prime: G::G1,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecretKey<G: PairingGroup> {
    pub(crate) attrs: AttributeSet,
    pub(crate) d: G::G2,
    pub(crate) components: BTreeMap<Attribute, AttributeComponent<G>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct LeafComponent<G: PairingGroup> {
    pub(crate) c: G::G1,
    pub(crate) c_prime: G::G2,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbeCiphertext<G: PairingGroup> {
    pub(crate) policy: Policy,
    pub(crate) policy_text: String,
    pub(crate) c: G::G1,
    pub(crate) leaves: Vec<LeafComponent<G>>,
    /// AEAD nonce followed by the sealed plaintext.
    pub(crate) body: Vec<u8>,
}

/// Result of a decryption attempt that was not malformed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decryption {
    Plaintext(Vec<u8>),
    NotSatisfied,
}

impl Decryption {
    pub fn plaintext(self) -> Option<Vec<u8>> {
        match self {
            Decryption::Plaintext(p) => Some(p),
            Decryption::NotSatisfied => None,
        }
    }

    pub fn is_satisfied(&self) -> bool {
        matches!(self, Decryption::Plaintext(_))
    }
}

impl<G: PairingGroup> SecretKey<G> {
    pub fn attributes(&self) -> &AttributeSet {
        &self.attrs
    }

    /// Base component plus one pair per attribute.
    pub fn component_count(&self) -> usize {
        1 + self.components.len()
    }

    /// Combines this key's base component with the attribute components of
    /// both keys. No authority ever issues such a key; it models two
    /// subjects pooling their keys and is used to check that the pooled key
    /// does not decrypt.
    pub fn spliced_with(&self, donor: &SecretKey<G>) -> SecretKey<G> {
        let mut components = self.components.clone();
        for (attr, comp) in &donor.components {
            components
                .entry(attr.clone())
                .or_insert_with(|| comp.clone());
        }
        SecretKey {
            attrs: self.attrs.union(&donor.attrs),
            d: self.d,
            components,
        }
    }
}

impl<G: PairingGroup> AbeCiphertext<G> {
    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn policy_text(&self) -> &str {
        &self.policy_text
    }

    pub fn leaf_component_count(&self) -> usize {
        self.leaves.len()
    }
}

pub fn setup<G: PairingGroup, R: RngCore + ?Sized>(rng: &mut R) -> (PublicParams<G>, MasterKey<G>) {
    let alpha = G::random_scalar(rng);
    let beta = loop {
        let b = G::random_scalar(rng);
        if G::scalar_inverse(&b).is_some() {
            break b;
        }
    };
    let (g1, g2) = (G::g1_generator(), G::g2_generator());
    let beta_inv = G::scalar_inverse(&beta).expect("beta is invertible");
    let pp = PublicParams {
        g1,
        g2,
        h: G::g1_mul(&g1, &beta),
        f: G::g2_mul(&g2, &beta_inv),
        egg_alpha: G::gt_pow(&G::pair(&g1, &g2), &alpha),
    };
    let mk = MasterKey {
        beta,
        g2_alpha: G::g2_mul(&g2, &alpha),
    };
    (pp, mk)
}

fn attribute_point<G: PairingGroup>(attr: &Attribute) -> G::G2 {
    G::hash_to_g2(attr.canonical().as_bytes())
}

pub fn keygen<G: PairingGroup, R: RngCore + ?Sized>(
    mk: &MasterKey<G>,
    attrs: &AttributeSet,
    rng: &mut R,
) -> Result<SecretKey<G>, AbeError> {
    if attrs.is_empty() {
        return Err(AbeError::EmptyAttributeSet);
    }
    let (g1, g2) = (G::g1_generator(), G::g2_generator());
    let r = G::random_scalar(rng);
    let g2_r = G::g2_mul(&g2, &r);
    let beta_inv = G::scalar_inverse(&mk.beta)
        .ok_or_else(|| AbeError::Decode("master key has zero beta".into()))?;
    let d = G::g2_mul(&G::g2_add(&mk.g2_alpha, &g2_r), &beta_inv);
    let components = attrs
        .iter()
        .map(|attr| {
            let rj = G::random_scalar(rng);
            let comp = AttributeComponent {
                d: G::g2_add(&g2_r, &G::g2_mul(&attribute_point::<G>(attr), &rj)),
                d_prime: G::g1_mul(&g1, &rj),
            };
            (attr.clone(), comp)
        })
        .collect();
    Ok(SecretKey {
        attrs: attrs.clone(),
        d,
        components,
    })
}

/// Evaluates the polynomial with the given coefficients (constant first).
fn eval_poly<G: PairingGroup>(coeffs: &[G::Scalar], x: u64) -> G::Scalar {
    let x = G::scalar_from_u64(x);
    coeffs
        .iter()
        .rev()
        .fold(G::scalar_from_u64(0), |acc, c| acc * x + *c)
}

fn share_secret<G: PairingGroup, R: RngCore + ?Sized>(
    node: &Policy,
    secret: G::Scalar,
    rng: &mut R,
    out: &mut Vec<LeafComponent<G>>,
) {
    match node {
        Policy::Leaf(attr) => out.push(LeafComponent {
            c: G::g1_mul(&G::g1_generator(), &secret),
            c_prime: G::g2_mul(&attribute_point::<G>(attr), &secret),
        }),
        Policy::Gate {
            threshold,
            children,
        } => {
            // q(0) = secret, degree threshold - 1; child i receives q(i).
            let mut coeffs = Vec::with_capacity(*threshold);
            coeffs.push(secret);
            for _ in 1..*threshold {
                coeffs.push(G::random_scalar(rng));
            }
            for (i, child) in children.iter().enumerate() {
                share_secret(child, eval_poly::<G>(&coeffs, i as u64 + 1), rng, out);
            }
        }
    }
}

fn body_cipher<G: PairingGroup>(key_element: &G::Gt) -> ChaCha20Poly1305 {
    let ikm = G::encode_gt(key_element);
    let hk = Hkdf::<Sha256>::new(None, &ikm);
    let mut key = [0u8; 32];
    hk.expand_multi_info(&[b"iotacap abe body key", &[G::ID]], &mut key)
        .expect("32 bytes is a valid HKDF output length");
    ChaCha20Poly1305::new(Key::from_slice(&key))
}

pub fn encrypt<G: PairingGroup, R: RngCore + ?Sized>(
    pp: &PublicParams<G>,
    policy: &Policy,
    plaintext: &[u8],
    rng: &mut R,
) -> Result<AbeCiphertext<G>, AbeError> {
    if plaintext.is_empty() {
        return Err(AbeError::EmptyPlaintext);
    }
    if !policy.is_well_formed() {
        return Err(AbeError::MalformedPolicy(policy.render()));
    }
    let s = G::random_scalar(rng);
    let mut leaves = Vec::with_capacity(policy.num_leaves());
    share_secret(policy, s, rng, &mut leaves);

    let policy_text = policy.render();
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    let sealed = body_cipher::<G>(&G::gt_pow(&pp.egg_alpha, &s))
        .encrypt(
            Nonce::from_slice(&nonce),
            Payload {
                msg: plaintext,
                aad: policy_text.as_bytes(),
            },
        )
        .expect("encryption into a Vec cannot fail");
    let mut body = nonce.to_vec();
    body.extend_from_slice(&sealed);

    Ok(AbeCiphertext {
        policy: policy.clone(),
        policy_text,
        c: G::g1_mul(&pp.h, &s),
        leaves,
        body,
    })
}

/// Lagrange basis polynomial for `i` over `indices`, evaluated at zero.
fn lagrange_at_zero<G: PairingGroup>(i: u64, indices: &[u64]) -> G::Scalar {
    let mut num = G::scalar_from_u64(1);
    let mut den = G::scalar_from_u64(1);
    for &j in indices.iter().filter(|&&j| j != i) {
        num = num * -G::scalar_from_u64(j);
        den = den * (G::scalar_from_u64(i) - G::scalar_from_u64(j));
    }
    num * G::scalar_inverse(&den).expect("indices are distinct")
}

/// Recovers `e(g1, g2)^(r qx(0))` for `node`, whose leaf components start
/// at `leaves[0]`. `None` if the key does not satisfy the node.
fn decrypt_node<G: PairingGroup>(
    node: &Policy,
    sk: &SecretKey<G>,
    leaves: &[LeafComponent<G>],
) -> Option<G::Gt> {
    match node {
        Policy::Leaf(attr) => {
            let comp = sk.components.get(attr)?;
            let leaf = &leaves[0];
            Some(G::gt_div(
                &G::pair(&leaf.c, &comp.d),
                &G::pair(&comp.d_prime, &leaf.c_prime),
            ))
        }
        Policy::Gate {
            threshold,
            children,
        } => {
            let mut shares = Vec::with_capacity(*threshold);
            let mut offset = 0;
            for (i, child) in children.iter().enumerate() {
                let width = child.num_leaves();
                if shares.len() < *threshold && satisfies(child, &sk.attrs) {
                    if let Some(v) = decrypt_node(child, sk, &leaves[offset..offset + width]) {
                        shares.push((i as u64 + 1, v));
                    }
                }
                offset += width;
            }
            if shares.len() < *threshold {
                return None;
            }
            let indices: Vec<u64> = shares.iter().map(|(i, _)| *i).collect();
            Some(shares.iter().fold(G::gt_one(), |acc, (i, v)| {
                G::gt_mul(&acc, &G::gt_pow(v, &lagrange_at_zero::<G>(*i, &indices)))
            }))
        }
    }
}

pub fn decrypt<G: PairingGroup>(
    sk: &SecretKey<G>,
    ct: &AbeCiphertext<G>,
) -> Result<Decryption, AbeError> {
    if ct.leaves.len() != ct.policy.num_leaves() {
        return Err(AbeError::MalformedCiphertext(format!(
            "{} leaf components for {} leaves",
            ct.leaves.len(),
            ct.policy.num_leaves()
        )));
    }
    if ct.body.len() < NONCE_LEN {
        return Err(AbeError::MalformedCiphertext(
            "body shorter than its nonce".into(),
        ));
    }
    if !satisfies(&ct.policy, &sk.attrs) {
        return Ok(Decryption::NotSatisfied);
    }
    let blinding = decrypt_node(&ct.policy, sk, &ct.leaves).ok_or_else(|| {
        AbeError::MalformedCiphertext("key components missing for a satisfied policy".into())
    })?;
    let key_element = G::gt_div(&G::pair(&ct.c, &sk.d), &blinding);
    let (nonce, sealed) = ct.body.split_at(NONCE_LEN);
    body_cipher::<G>(&key_element)
        .decrypt(
            Nonce::from_slice(nonce),
            Payload {
                msg: sealed,
                aad: ct.policy_text.as_bytes(),
            },
        )
        .map(Decryption::Plaintext)
        .map_err(|_| AbeError::MalformedCiphertext("body authentication failed".into()))
}
