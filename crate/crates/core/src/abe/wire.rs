//! Binary encodings.
//!
//! Key and parameter files:
//!
//! ```text
//! "ABE1" | kind u8 | backend u8 | count u32 | (len u32 | bytes) * count
//! ```
//!
//! Ciphertexts:
//!
//! ```text
//! "ABC1" | backend u8 | policy_len u32 | policy utf8
//!        | count u32 | (len u32 | bytes) * count | body_len u32 | body
//! ```
//!
//! Integers are big-endian. Secret keys store each attribute as its
//! canonical UTF-8 string followed by its two group elements.

use std::collections::BTreeMap;

use super::group::PairingGroup;
use super::policy::{parse_policy, Attribute, AttributeSet};
use super::scheme::{
    AbeCiphertext, AttributeComponent, LeafComponent, MasterKey, PublicParams, SecretKey,
};
use super::AbeError;

pub const KEY_MAGIC: &[u8; 4] = b"ABE1";
pub const CIPHERTEXT_MAGIC: &[u8; 4] = b"ABC1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum KeyKind {
    PublicParams = 1,
    MasterKey = 2,
    SecretKey = 3,
}

impl KeyKind {
    fn from_u8(b: u8) -> Option<Self> {
        match b {
            1 => Some(KeyKind::PublicParams),
            2 => Some(KeyKind::MasterKey),
            3 => Some(KeyKind::SecretKey),
            _ => None,
        }
    }
}

fn put_bytes(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
    out.extend_from_slice(bytes);
}

fn put_components(out: &mut Vec<u8>, comps: &[Vec<u8>]) {
    out.extend_from_slice(&(comps.len() as u32).to_be_bytes());
    for c in comps {
        put_bytes(out, c);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], AbeError> {
        if self.buf.len() < n {
            return Err(AbeError::Decode("truncated input".into()));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, AbeError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize, AbeError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    fn bytes(&mut self) -> Result<&'a [u8], AbeError> {
        let n = self.u32()?;
        self.take(n)
    }

    fn components(&mut self) -> Result<Vec<&'a [u8]>, AbeError> {
        let count = self.u32()?;
        // every component costs at least its 4-byte length prefix
        if count > self.buf.len() / 4 {
            return Err(AbeError::Decode("component count exceeds input".into()));
        }
        (0..count).map(|_| self.bytes()).collect()
    }

    fn finish(self) -> Result<(), AbeError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(AbeError::Decode(format!(
                "{} trailing bytes",
                self.buf.len()
            )))
        }
    }
}

fn key_header<G: PairingGroup>(kind: KeyKind) -> Vec<u8> {
    let mut out = KEY_MAGIC.to_vec();
    out.push(kind as u8);
    out.push(G::ID);
    out
}

/// Reads the kind and backend id of a key file without decoding it.
pub fn peek_key_file(bytes: &[u8]) -> Result<(KeyKind, u8), AbeError> {
    let mut r = Reader { buf: bytes };
    if r.take(4)? != KEY_MAGIC {
        return Err(AbeError::Decode("bad magic".into()));
    }
    let kind =
        KeyKind::from_u8(r.u8()?).ok_or_else(|| AbeError::Decode("unknown key kind".into()))?;
    Ok((kind, r.u8()?))
}

fn open_key_file<G: PairingGroup>(bytes: &[u8], want: KeyKind) -> Result<Vec<&[u8]>, AbeError> {
    let (kind, backend) = peek_key_file(bytes)?;
    if kind != want {
        return Err(AbeError::Decode(format!(
            "expected {want:?}, found {kind:?}"
        )));
    }
    if backend != G::ID {
        return Err(AbeError::BackendMismatch {
            expected: G::ID,
            found: backend,
        });
    }
    let mut r = Reader { buf: &bytes[6..] };
    let comps = r.components()?;
    r.finish()?;
    Ok(comps)
}

fn element<T>(decoded: Option<T>, what: &str) -> Result<T, AbeError> {
    decoded.ok_or_else(|| AbeError::Decode(format!("invalid {what}")))
}

impl<G: PairingGroup> PublicParams<G> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = key_header::<G>(KeyKind::PublicParams);
        put_components(
            &mut out,
            &[
                G::encode_g1(&self.g1),
                G::encode_g2(&self.g2),
                G::encode_g1(&self.h),
                G::encode_g2(&self.f),
                G::encode_gt(&self.egg_alpha),
            ],
        );
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AbeError> {
        let c = open_key_file::<G>(bytes, KeyKind::PublicParams)?;
        let [g1, g2, h, f, egg] = c[..] else {
            return Err(AbeError::Decode(format!(
                "params need 5 components, found {}",
                c.len()
            )));
        };
        Ok(Self {
            g1: element(G::decode_g1(g1), "g1")?,
            g2: element(G::decode_g2(g2), "g2")?,
            h: element(G::decode_g1(h), "h")?,
            f: element(G::decode_g2(f), "f")?,
            egg_alpha: element(G::decode_gt(egg), "e(g,g)^alpha")?,
        })
    }
}

impl<G: PairingGroup> MasterKey<G> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = key_header::<G>(KeyKind::MasterKey);
        put_components(
            &mut out,
            &[G::encode_scalar(&self.beta), G::encode_g2(&self.g2_alpha)],
        );
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AbeError> {
        let c = open_key_file::<G>(bytes, KeyKind::MasterKey)?;
        let [beta, g2_alpha] = c[..] else {
            return Err(AbeError::Decode(format!(
                "master key needs 2 components, found {}",
                c.len()
            )));
        };
        Ok(Self {
            beta: element(G::decode_scalar(beta), "beta")?,
            g2_alpha: element(G::decode_g2(g2_alpha), "g2^alpha")?,
        })
    }
}

impl<G: PairingGroup> SecretKey<G> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut comps = vec![G::encode_g2(&self.d)];
        for (attr, comp) in &self.components {
            comps.push(attr.canonical().into_bytes());
            comps.push(G::encode_g2(&comp.d));
            comps.push(G::encode_g1(&comp.d_prime));
        }
        let mut out = key_header::<G>(KeyKind::SecretKey);
        put_components(&mut out, &comps);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AbeError> {
        let c = open_key_file::<G>(bytes, KeyKind::SecretKey)?;
        let Some((d, rest)) = c.split_first() else {
            return Err(AbeError::Decode("secret key has no components".into()));
        };
        if rest.is_empty() || rest.len() % 3 != 0 {
            return Err(AbeError::Decode(
                "secret key attribute components come in triples".into(),
            ));
        }
        let mut components = BTreeMap::new();
        for triple in rest.chunks(3) {
            let text = std::str::from_utf8(triple[0])
                .map_err(|_| AbeError::Decode("attribute is not UTF-8".into()))?;
            let attr: Attribute = text.parse().map_err(|e| AbeError::Decode(format!("{e}")))?;
            if attr.canonical() != text {
                return Err(AbeError::Decode(format!(
                    "attribute {text:?} is not canonical"
                )));
            }
            let comp = AttributeComponent {
                d: element(G::decode_g2(triple[1]), "attribute component")?,
                d_prime: element(G::decode_g1(triple[2]), "attribute component")?,
            };
            if components.insert(attr, comp).is_some() {
                return Err(AbeError::Decode(format!("duplicate attribute {text}")));
            }
        }
        let attrs: AttributeSet = components.keys().cloned().collect();
        Ok(Self {
            attrs,
            d: element(G::decode_g2(d), "D")?,
            components,
        })
    }
}

impl<G: PairingGroup> AbeCiphertext<G> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut comps = vec![G::encode_g1(&self.c)];
        for leaf in &self.leaves {
            comps.push(G::encode_g1(&leaf.c));
            comps.push(G::encode_g2(&leaf.c_prime));
        }
        let mut out = CIPHERTEXT_MAGIC.to_vec();
        out.push(G::ID);
        put_bytes(&mut out, self.policy_text.as_bytes());
        put_components(&mut out, &comps);
        put_bytes(&mut out, &self.body);
        out
    }

    /// Serialized length in bytes.
    pub fn encoded_len(&self) -> usize {
        self.to_bytes().len()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AbeError> {
        let mut r = Reader { buf: bytes };
        if r.take(4)? != CIPHERTEXT_MAGIC {
            return Err(AbeError::Decode("bad magic".into()));
        }
        let backend = r.u8()?;
        if backend != G::ID {
            return Err(AbeError::BackendMismatch {
                expected: G::ID,
                found: backend,
            });
        }
        let policy_text = std::str::from_utf8(r.bytes()?)
            .map_err(|_| AbeError::Decode("policy is not UTF-8".into()))?
            .to_owned();
        let policy = parse_policy(&policy_text).map_err(AbeError::Parse)?;
        if policy.render() != policy_text {
            return Err(AbeError::MalformedCiphertext(
                "policy is not in canonical form".into(),
            ));
        }
        let comps = r.components()?;
        let body = r.bytes()?.to_vec();
        r.finish()?;

        if comps.len() != 1 + 2 * policy.num_leaves() {
            return Err(AbeError::MalformedCiphertext(format!(
                "{} components for a {}-leaf policy",
                comps.len(),
                policy.num_leaves()
            )));
        }
        let leaves = comps[1..]
            .chunks(2)
            .map(|pair| {
                Ok(LeafComponent {
                    c: element(G::decode_g1(pair[0]), "leaf component")?,
                    c_prime: element(G::decode_g2(pair[1]), "leaf component")?,
                })
            })
            .collect::<Result<_, AbeError>>()?;
        Ok(Self {
            c: element(G::decode_g1(comps[0]), "C")?,
            policy,
            policy_text,
            leaves,
            body,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abe::{decrypt, encrypt, keygen, setup, Bls12, ToyGroup};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn round_trip<G: PairingGroup>() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let (pp, mk) = setup::<G, _>(&mut rng);
        let sk = keygen(
            &mk,
            &AttributeSet::parse_list("Division:IS,Role:Student").unwrap(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(PublicParams::<G>::from_bytes(&pp.to_bytes()).unwrap(), pp);
        assert_eq!(MasterKey::<G>::from_bytes(&mk.to_bytes()).unwrap(), mk);
        assert_eq!(SecretKey::<G>::from_bytes(&sk.to_bytes()).unwrap(), sk);

        let policy = parse_policy("Division:IS AND Role:Student").unwrap();
        let ct = encrypt(&pp, &policy, b"payload", &mut rng).unwrap();
        let decoded = AbeCiphertext::<G>::from_bytes(&ct.to_bytes()).unwrap();
        assert_eq!(decoded, ct);
        assert_eq!(
            decrypt(&sk, &decoded).unwrap().plaintext().unwrap(),
            b"payload"
        );
    }

    #[test]
    fn toy_round_trips() {
        round_trip::<ToyGroup>();
    }

    #[test]
    fn bls_round_trips() {
        round_trip::<Bls12>();
    }

    #[test]
    fn layout_starts_with_magic() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let (pp, _) = setup::<ToyGroup, _>(&mut rng);
        let bytes = pp.to_bytes();
        assert_eq!(&bytes[..4], b"ABE1");
        assert_eq!(
            peek_key_file(&bytes).unwrap(),
            (KeyKind::PublicParams, ToyGroup::ID)
        );
        let ct = encrypt(&pp, &parse_policy("A:1").unwrap(), b"m", &mut rng)
            .unwrap()
            .to_bytes();
        assert_eq!(&ct[..4], b"ABC1");
        assert_eq!(&ct[5..9], &3u32.to_be_bytes());
        assert_eq!(&ct[9..12], b"A:1");
    }

    #[test]
    fn backend_mismatch_and_truncation() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let (pp, _) = setup::<ToyGroup, _>(&mut rng);
        let bytes = pp.to_bytes();
        assert!(matches!(
            PublicParams::<Bls12>::from_bytes(&bytes),
            Err(AbeError::BackendMismatch { .. })
        ));
        for cut in 0..bytes.len() {
            assert!(PublicParams::<ToyGroup>::from_bytes(&bytes[..cut]).is_err());
        }
        assert!(MasterKey::<ToyGroup>::from_bytes(&bytes).is_err());
    }

    #[test]
    fn component_count_must_match_leaves() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let (pp, _) = setup::<ToyGroup, _>(&mut rng);
        let mut ct = encrypt(&pp, &parse_policy("A:1 AND B:2").unwrap(), b"m", &mut rng).unwrap();
        ct.leaves.pop();
        assert!(matches!(
            AbeCiphertext::<ToyGroup>::from_bytes(&ct.to_bytes()),
            Err(AbeError::MalformedCiphertext(_))
        ));
    }

    #[test]
    fn non_canonical_policy_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let (pp, _) = setup::<ToyGroup, _>(&mut rng);
        let ct = encrypt(&pp, &parse_policy("A:1").unwrap(), b"m", &mut rng).unwrap();
        let mut bytes = ct.to_bytes();
        // "A:1" -> "A 1"
        bytes[10] = b' ';
        assert!(AbeCiphertext::<ToyGroup>::from_bytes(&bytes).is_err());
    }
}
