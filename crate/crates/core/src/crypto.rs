//! Digests, signatures and link MACs.
//!
//! Signatures sit behind the [`Signer`] / [`Verifier`] traits; the default
//! scheme is Ed25519 with strict verification. Keys are derived
//! deterministically from an execution seed so simulated runs are reproducible.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use ed25519_dalek::{Signer as _, SigningKey, VerifyingKey};
use hmac::{Hmac, KeyInit, Mac};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};

use crate::codec::{Canonical, DecodeError, Decoder, Encoder};
use crate::config::PartyId;

pub const DIGEST_LEN: usize = 32;
pub const SIGNATURE_LEN: usize = 64;
pub const MAC_LEN: usize = 32;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest(pub [u8; DIGEST_LEN]);

pub fn digest(bytes: &[u8]) -> Digest {
    Digest(Sha256::digest(bytes).into())
}

impl Digest {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn short(&self) -> String {
        hex::encode(&self.0[..4])
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.short())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let bytes = hex::decode(&s).map_err(serde::de::Error::custom)?;
        let arr: [u8; DIGEST_LEN] = bytes
            .try_into()
            .map_err(|_| serde::de::Error::custom("digest must be 32 bytes"))?;
        Ok(Digest(arr))
    }
}

impl Canonical for Digest {
    fn encode(&self, enc: &mut Encoder) {
        enc.raw(&self.0);
    }
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(Digest(dec.array()?))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature(pub [u8; SIGNATURE_LEN]);

impl Signature {
    /// Returns `None` for input of the wrong length.
    pub fn from_slice(bytes: &[u8]) -> Option<Self> {
        bytes.try_into().ok().map(Signature)
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({})", hex::encode(&self.0[..4]))
    }
}

impl Canonical for Signature {
    fn encode(&self, enc: &mut Encoder) {
        enc.raw(&self.0);
    }
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(Signature(dec.array()?))
    }
}

pub trait Signer: Send + Sync {
    fn party(&self) -> PartyId;
    fn sign(&self, message: &[u8]) -> Signature;
}

pub trait Verifier: Send + Sync {
    fn parties(&self) -> usize;
    /// True iff `sig` was produced by `party` over exactly `message`.
    /// Unknown parties and malformed signatures yield `false`.
    fn verify(&self, party: PartyId, message: &[u8], sig: &Signature) -> bool;
}

type CacheKey = (u32, Digest, [u8; SIGNATURE_LEN]);

/// Public keys of all parties.
///
/// An optional memo table short-circuits repeated verification of the same
/// `(party, message, signature)` triple. Verification is a pure function, so
/// the table changes cost, never results.
pub struct PublicKeyring {
    keys: Vec<VerifyingKey>,
    memo: Option<Mutex<HashMap<CacheKey, bool>>>,
}

impl PublicKeyring {
    pub fn from_bytes(keys: &[[u8; 32]]) -> Option<Self> {
        let keys = keys
            .iter()
            .map(|k| VerifyingKey::from_bytes(k).ok())
            .collect::<Option<Vec<_>>>()?;
        Some(PublicKeyring { keys, memo: None })
    }

    pub fn with_memo(mut self) -> Self {
        self.memo = Some(Mutex::new(HashMap::new()));
        self
    }

    pub fn public_bytes(&self) -> Vec<[u8; 32]> {
        self.keys.iter().map(|k| k.to_bytes()).collect()
    }

    fn verify_uncached(&self, party: PartyId, message: &[u8], sig: &Signature) -> bool {
        let Some(key) = self.keys.get(party.index()) else {
            return false;
        };
        let sig = ed25519_dalek::Signature::from_bytes(&sig.0);
        key.verify_strict(message, &sig).is_ok()
    }
}

impl Verifier for PublicKeyring {
    fn parties(&self) -> usize {
        self.keys.len()
    }

    fn verify(&self, party: PartyId, message: &[u8], sig: &Signature) -> bool {
        let Some(memo) = &self.memo else {
            return self.verify_uncached(party, message, sig);
        };
        let key = (party.0, digest(message), sig.0);
        if let Some(hit) = memo.lock().unwrap().get(&key) {
            return *hit;
        }
        let ok = self.verify_uncached(party, message, sig);
        memo.lock().unwrap().insert(key, ok);
        ok
    }
}

/// Signing key of one party plus the public keys of everybody.
#[derive(Clone)]
pub struct KeyMaterial {
    id: PartyId,
    signing: SigningKey,
    ring: Arc<PublicKeyring>,
}

impl KeyMaterial {
    /// Derives key material for all `n` parties from `seed`.
    pub fn generate(seed: u64, n: usize) -> Vec<KeyMaterial> {
        Self::generate_with(seed, n, false)
    }

    /// Like [`KeyMaterial::generate`] with a shared verification memo table.
    pub fn generate_memoized(seed: u64, n: usize) -> Vec<KeyMaterial> {
        Self::generate_with(seed, n, true)
    }

    fn generate_with(seed: u64, n: usize, memo: bool) -> Vec<KeyMaterial> {
        let signing: Vec<SigningKey> = (0..n)
            .map(|i| {
                let mut enc = Encoder::with_domain("qof/signing-key");
                enc.u64(seed).u32(i as u32);
                SigningKey::from_bytes(&digest(enc.as_slice()).0)
            })
            .collect();
        let mut ring = PublicKeyring {
            keys: signing.iter().map(|k| k.verifying_key()).collect(),
            memo: None,
        };
        if memo {
            ring = ring.with_memo();
        }
        let ring = Arc::new(ring);
        signing
            .into_iter()
            .enumerate()
            .map(|(i, signing)| KeyMaterial {
                id: PartyId(i as u32),
                signing,
                ring: ring.clone(),
            })
            .collect()
    }

    pub fn id(&self) -> PartyId {
        self.id
    }

    pub fn keyring(&self) -> &Arc<PublicKeyring> {
        &self.ring
    }

    pub fn verify(&self, party: PartyId, message: &[u8], sig: &Signature) -> bool {
        self.ring.verify(party, message, sig)
    }
}

impl Signer for KeyMaterial {
    fn party(&self) -> PartyId {
        self.id
    }

    fn sign(&self, message: &[u8]) -> Signature {
        Signature(self.signing.sign(message).to_bytes())
    }
}

impl fmt::Debug for KeyMaterial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyMaterial").field("id", &self.id).finish()
    }
}

type HmacSha256 = Hmac<Sha256>;

/// Pairwise shared secrets for message authentication on links.
#[derive(Clone)]
pub struct LinkKeys {
    me: PartyId,
    secrets: Vec<[u8; 32]>,
}

impl LinkKeys {
    /// Secret for the unordered pair `{me, j}`; both ends derive the same value.
    pub fn derive(seed: u64, me: PartyId, n: usize) -> Self {
        let secrets = (0..n as u32)
            .map(|j| {
                let (lo, hi) = (me.0.min(j), me.0.max(j));
                let mut enc = Encoder::with_domain("qof/link-secret");
                enc.u64(seed).u32(lo).u32(hi);
                digest(enc.as_slice()).0
            })
            .collect();
        LinkKeys { me, secrets }
    }

    pub fn me(&self) -> PartyId {
        self.me
    }

    pub fn parties(&self) -> usize {
        self.secrets.len()
    }

    fn keyed(&self, peer: PartyId) -> Option<HmacSha256> {
        let secret = self.secrets.get(peer.index())?;
        Some(<HmacSha256 as KeyInit>::new_from_slice(secret).expect("hmac accepts any key"))
    }

    pub fn tag(&self, from: PartyId, to: PartyId, seq: u64, body: &[u8]) -> [u8; MAC_LEN] {
        let peer = if from == self.me { to } else { from };
        let mut mac = self.keyed(peer).expect("peer within configured parties");
        let mut enc = Encoder::new();
        enc.u32(from.0).u32(to.0).u64(seq).bytes(body);
        mac.update(enc.as_slice());
        mac.finalize().into_bytes().into()
    }

    pub fn check(&self, from: PartyId, to: PartyId, seq: u64, body: &[u8], tag: &[u8]) -> bool {
        if to != self.me {
            return false;
        }
        let Some(mut mac) = self.keyed(from) else {
            return false;
        };
        let mut enc = Encoder::new();
        enc.u32(from.0).u32(to.0).u64(seq).bytes(body);
        mac.update(enc.as_slice());
        mac.verify_slice(tag).is_ok()
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn digest_is_deterministic_and_distinguishes() {
        assert_eq!(digest(b"x"), digest(b"x"));
        let corpus: Vec<&[u8]> = vec![b"", b"a", b"b", b"ab", b"ba", b"\0"];
        for (i, x) in corpus.iter().enumerate() {
            for y in &corpus[i + 1..] {
                assert_ne!(digest(x), digest(y));
            }
        }
    }

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            digest(b"abc").to_hex(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn sign_verify_round_trip_and_rejections() {
        let keys = KeyMaterial::generate(7, 4);
        let m = b"status";
        let sig = keys[1].sign(m);
        assert!(keys[0].verify(PartyId(1), m, &sig));
        assert!(!keys[0].verify(PartyId(2), m, &sig));
        assert!(!keys[0].verify(PartyId(1), b"statuS", &sig));
        assert!(!keys[0].verify(PartyId(9), m, &sig));
        let mut bad = sig;
        bad.0[10] ^= 1;
        assert!(!keys[0].verify(PartyId(1), m, &bad));
        assert!(Signature::from_slice(&[0u8; 63]).is_none());
    }

    #[test]
    fn keys_are_reproducible_from_seed() {
        let a = KeyMaterial::generate(3, 3);
        let b = KeyMaterial::generate(3, 3);
        let c = KeyMaterial::generate(4, 3);
        assert_eq!(a[0].keyring().public_bytes(), b[0].keyring().public_bytes());
        assert_ne!(a[0].keyring().public_bytes(), c[0].keyring().public_bytes());
    }

    #[test]
    fn memo_does_not_change_results() {
        let keys = KeyMaterial::generate_memoized(1, 2);
        let sig = keys[0].sign(b"m");
        for _ in 0..3 {
            assert!(keys[1].verify(PartyId(0), b"m", &sig));
            assert!(!keys[1].verify(PartyId(1), b"m", &sig));
        }
    }

    #[test]
    fn link_macs_bind_direction_and_content() {
        let a = LinkKeys::derive(5, PartyId(0), 3);
        let b = LinkKeys::derive(5, PartyId(1), 3);
        let c = LinkKeys::derive(5, PartyId(2), 3);
        let tag = a.tag(PartyId(0), PartyId(1), 0, b"hi");
        assert!(b.check(PartyId(0), PartyId(1), 0, b"hi", &tag));
        assert!(!b.check(PartyId(0), PartyId(1), 1, b"hi", &tag));
        assert!(!b.check(PartyId(0), PartyId(1), 0, b"ho", &tag));
        assert!(!c.check(PartyId(0), PartyId(2), 0, b"hi", &tag));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn signature_properties(signer in 0usize..4, other in 0usize..4, msg in proptest::collection::vec(any::<u8>(), 0..64), flip in 0usize..64) {
            let keys = KeyMaterial::generate(11, 4);
            let sig = keys[signer].sign(&msg);
            prop_assert!(keys[0].verify(PartyId(signer as u32), &msg, &sig));
            if other != signer {
                prop_assert!(!keys[0].verify(PartyId(other as u32), &msg, &sig));
            }
            let mut altered = msg.clone();
            if altered.is_empty() { altered.push(0) } else { let i = flip % altered.len(); altered[i] ^= 0x40 }
            prop_assert!(!keys[0].verify(PartyId(signer as u32), &altered, &sig));
        }
    }
}
