//! Signed delivered-batch files and their verifier.
//!
//! A file is the canonical encoding of
//! `("qof/signed-batches", batches, attestations)`. Every attestation signs
//! `("qof/batch-attest", batches)`. A verifier accepts a file iff it parses
//! with no trailing bytes, every attestation verifies, signers are distinct
//! and there are at least `f + 1` of them.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context};
use qof_core::codec::{Canonical, DecodeError, Decoder, Encoder};
use qof_core::crypto::{Signer, Verifier};
use qof_core::party::DeliveredBatch;
use qof_core::{Config, KeyMaterial, PartyId, PublicKeyring, Signature, TxRef};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FILE_DOMAIN: &str = "qof/signed-batches";
pub const ATTEST_DOMAIN: &str = "qof/batch-attest";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Attestation {
    pub signer: PartyId,
    pub sig: Signature,
}

impl Canonical for Attestation {
    fn encode(&self, enc: &mut Encoder) {
        enc.put(&self.signer).put(&self.sig);
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(Attestation {
            signer: dec.get()?,
            sig: dec.get()?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignedBatchFile {
    pub batches: Vec<DeliveredBatch>,
    pub attestations: Vec<Attestation>,
}

impl SignedBatchFile {
    /// The bytes each party signs.
    pub fn attested_bytes(batches: &[DeliveredBatch]) -> Vec<u8> {
        let mut enc = Encoder::with_domain(ATTEST_DOMAIN);
        enc.list(batches);
        enc.finish()
    }

    pub fn sign(batches: Vec<DeliveredBatch>, signers: &[&KeyMaterial]) -> Self {
        let msg = Self::attested_bytes(&batches);
        let attestations = signers
            .iter()
            .map(|k| Attestation {
                signer: k.id(),
                sig: k.sign(&msg),
            })
            .collect();
        SignedBatchFile {
            batches,
            attestations,
        }
    }

    pub fn signers(&self) -> Vec<PartyId> {
        self.attestations.iter().map(|a| a.signer).collect()
    }
}

impl Canonical for SignedBatchFile {
    fn encode(&self, enc: &mut Encoder) {
        enc.bytes(FILE_DOMAIN.as_bytes())
            .list(&self.batches)
            .list(&self.attestations);
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        if dec.bytes()? != FILE_DOMAIN.as_bytes() {
            return Err(DecodeError::Invalid("not a signed batch file"));
        }
        Ok(SignedBatchFile {
            batches: dec.list()?,
            attestations: dec.list()?,
        })
    }
}

/// Public verification material: `{"n": 4, "f": 1, "public_keys": ["<hex>", ...]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeysFile {
    pub n: usize,
    pub f: usize,
    pub public_keys: Vec<String>,
}

impl KeysFile {
    pub fn new(cfg: &Config, ring: &PublicKeyring) -> Self {
        KeysFile {
            n: cfg.n,
            f: cfg.f,
            public_keys: ring.public_bytes().iter().map(hex::encode).collect(),
        }
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let keys: KeysFile = serde_json::from_str(&text)
            .with_context(|| format!("malformed keys file {}", path.display()))?;
        keys.keyring()?;
        Ok(keys)
    }

    pub fn keyring(&self) -> anyhow::Result<PublicKeyring> {
        if self.public_keys.len() != self.n {
            bail!(
                "keys file lists {} keys for n = {}",
                self.public_keys.len(),
                self.n
            );
        }
        Config::new(self.n, self.f, 0)?;
        let keys = self
            .public_keys
            .iter()
            .enumerate()
            .map(|(i, h)| {
                let bytes =
                    hex::decode(h).with_context(|| format!("public_keys[{i}] is not hex"))?;
                <[u8; 32]>::try_from(bytes.as_slice())
                    .map_err(|_| anyhow::anyhow!("public_keys[{i}] must be 32 bytes"))
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        PublicKeyring::from_bytes(&keys).context("public_keys contains an invalid key")
    }

    pub fn threshold(&self) -> usize {
        self.f + 1
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Rejection {
    #[error("malformed file: {0}")]
    Malformed(#[from] DecodeError),
    #[error("signature of {0} does not verify")]
    BadSignature(PartyId),
    #[error("{0} signed more than once")]
    DuplicateSigner(PartyId),
    #[error("{have} signatures, {need} required")]
    BelowThreshold { have: usize, need: usize },
}

/// One executed transaction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LedgerEntry {
    pub round: u64,
    pub seq: u32,
    pub tx: TxRef,
}

impl LedgerEntry {
    pub fn line(&self) -> String {
        format!(
            "{} {} {} {} {} {}",
            self.round,
            self.seq,
            self.tx.client_id(),
            self.tx.client_seq(),
            self.tx.id().to_hex(),
            self.tx.label()
        )
    }
}

pub fn ledger_text(ledger: &[LedgerEntry]) -> String {
    let mut s = String::new();
    for e in ledger {
        writeln!(s, "{}", e.line()).unwrap();
    }
    s
}

/// Verifies `bytes` against `ring` with threshold `f + 1` and, on
/// acceptance, replays every transaction in batch order.
pub fn verify_batch_file(
    bytes: &[u8],
    ring: &PublicKeyring,
    f: usize,
) -> Result<Vec<LedgerEntry>, Rejection> {
    let file = SignedBatchFile::from_bytes(bytes)?;
    let msg = SignedBatchFile::attested_bytes(&file.batches);
    let mut seen = BTreeSet::new();
    for a in &file.attestations {
        if !seen.insert(a.signer) {
            return Err(Rejection::DuplicateSigner(a.signer));
        }
        if !ring.verify(a.signer, &msg, &a.sig) {
            return Err(Rejection::BadSignature(a.signer));
        }
    }
    if seen.len() < f + 1 {
        return Err(Rejection::BelowThreshold {
            have: seen.len(),
            need: f + 1,
        });
    }
    Ok(file
        .batches
        .iter()
        .flat_map(|b| {
            b.txs.iter().map(move |tx| LedgerEntry {
                round: b.round,
                seq: b.seq,
                tx: tx.clone(),
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use qof_core::Transaction;
    use std::sync::Arc;

    fn batches() -> Vec<DeliveredBatch> {
        vec![
            DeliveredBatch {
                round: 1,
                seq: 0,
                txs: vec![Arc::new(Transaction::new(0, 0, b"a".to_vec()))],
            },
            DeliveredBatch {
                round: 2,
                seq: 0,
                txs: vec![
                    Arc::new(Transaction::new(0, 1, b"b".to_vec())),
                    Arc::new(Transaction::new(1, 0, b"c".to_vec())),
                ],
            },
        ]
    }

    fn keys() -> Vec<KeyMaterial> {
        KeyMaterial::generate(5, 4)
    }

    #[test]
    fn three_of_four_accepted_in_order() {
        let k = keys();
        let file = SignedBatchFile::sign(batches(), &[&k[0], &k[1], &k[2]]);
        let ledger = verify_batch_file(&file.to_bytes(), k[0].keyring(), 1).unwrap();
        let labels: Vec<String> = ledger.iter().map(|e| e.tx.label()).collect();
        assert_eq!(labels, ["a", "b", "c"]);
    }

    #[test]
    fn single_signer_below_threshold() {
        let k = keys();
        let file = SignedBatchFile::sign(batches(), &[&k[2]]);
        assert_eq!(
            verify_batch_file(&file.to_bytes(), k[0].keyring(), 1),
            Err(Rejection::BelowThreshold { have: 1, need: 2 })
        );
    }

    #[test]
    fn duplicate_signer_rejected() {
        let k = keys();
        let file = SignedBatchFile::sign(batches(), &[&k[1], &k[1]]);
        assert_eq!(
            verify_batch_file(&file.to_bytes(), k[0].keyring(), 1),
            Err(Rejection::DuplicateSigner(PartyId(1)))
        );
    }

    #[test]
    fn signature_over_other_batches_rejected() {
        let k = keys();
        let mut file = SignedBatchFile::sign(batches(), &[&k[0], &k[1]]);
        file.batches.swap(0, 1);
        assert!(matches!(
            verify_batch_file(&file.to_bytes(), k[0].keyring(), 1),
            Err(Rejection::BadSignature(_))
        ));
    }

    #[test]
    fn trailing_byte_rejected() {
        let k = keys();
        let mut bytes = SignedBatchFile::sign(batches(), &[&k[0], &k[1]]).to_bytes();
        bytes.push(0);
        assert!(matches!(
            verify_batch_file(&bytes, k[0].keyring(), 1),
            Err(Rejection::Malformed(DecodeError::TrailingBytes(1)))
        ));
    }

    #[test]
    fn keys_file_round_trip() {
        let k = keys();
        let cfg = Config::new(4, 1, 0).unwrap();
        let kf = KeysFile::new(&cfg, k[0].keyring());
        let back: KeysFile = serde_json::from_str(&serde_json::to_string(&kf).unwrap()).unwrap();
        assert_eq!(
            back.keyring().unwrap().public_bytes(),
            k[0].keyring().public_bytes()
        );
    }

    proptest::proptest! {
        #[test]
        fn acceptance_follows_signer_count(mask in 0u8..16, f in 0usize..=1) {
            let k = keys();
            let signers: Vec<&KeyMaterial> = (0..4).filter(|i| mask & (1 << i) != 0).map(|i| &k[i]).collect();
            let bytes = SignedBatchFile::sign(batches(), &signers).to_bytes();
            let verdict = verify_batch_file(&bytes, k[0].keyring(), f);
            proptest::prop_assert_eq!(verdict.is_ok(), signers.len() > f);
            proptest::prop_assert_eq!(verdict, verify_batch_file(&bytes, k[0].keyring(), f));
        }

        #[test]
        fn any_flipped_byte_rejected(pos in 0usize..4096, x in 1u8..=255) {
            let k = keys();
            let mut bytes = SignedBatchFile::sign(batches(), &[&k[0], &k[3]]).to_bytes();
            let i = pos % bytes.len();
            bytes[i] ^= x;
            proptest::prop_assert!(verify_batch_file(&bytes, k[0].keyring(), 1).is_err());
        }
    }
}
