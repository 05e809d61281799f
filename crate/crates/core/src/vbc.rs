//! Validated Byzantine consensus over an atomic broadcast.
//!
//! A proposal for round `r` is abc-broadcast as the tagged value
//! `("vbc", r, L)`. The first abc-delivered value for the current round that
//! satisfies the external-validity predicate is decided; everything else is
//! discarded. A valid value for a round this party has not proposed in yet is
//! kept and decided as soon as the party proposes that round, without a second
//! broadcast, so late proposers decide what everybody else decided.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::abc::Admission;
use crate::clock::VectorClock;
use crate::codec::{Canonical, DecodeError, Decoder, Encoder};
use crate::config::{Config, PartyId};
use crate::crypto::{PublicKeyring, Signature, Verifier};
use crate::error::{Error, Result};
use crate::message::status_bytes;

/// Signed status rows collected for one round (`L` and `Σ` side by side).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClockMatrix {
    pub round: u64,
    pub rows: BTreeMap<PartyId, (VectorClock, Signature)>,
}

impl ClockMatrix {
    pub fn new(round: u64) -> Self {
        ClockMatrix {
            round,
            rows: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn clocks(&self) -> impl Iterator<Item = &VectorClock> {
        self.rows.values().map(|(vc, _)| vc)
    }
}

impl Canonical for ClockMatrix {
    fn encode(&self, enc: &mut Encoder) {
        enc.u64(self.round).len(self.rows.len());
        for (p, (vc, sig)) in &self.rows {
            enc.u32(p.0).put(vc).put(sig);
        }
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let round = dec.u64()?;
        let k = dec.len()?;
        let mut rows = BTreeMap::new();
        for _ in 0..k {
            let p = PartyId(dec.u32()?);
            let row = (dec.get()?, dec.get()?);
            if rows.insert(p, row).is_some() {
                return Err(DecodeError::Invalid("duplicate clock matrix row"));
            }
        }
        Ok(ClockMatrix { round, rows })
    }
}

/// External validity: at least `n - f` rows from known parties, each a
/// length-`n` clock whose signature verifies for round `r`.
pub fn predicate_p(cfg: &Config, verifier: &dyn Verifier, r: u64, m: &ClockMatrix) -> bool {
    m.round == r
        && m.rows.len() >= cfg.quorum()
        && m.rows.iter().all(|(p, (vc, sig))| {
            cfg.contains(*p) && vc.len() == cfg.n && verifier.verify(*p, &status_bytes(r, vc), sig)
        })
}

pub fn encode_tagged(round: u64, m: &ClockMatrix) -> Vec<u8> {
    let mut enc = Encoder::with_domain("vbc");
    enc.u64(round).put(m);
    enc.finish()
}

pub fn decode_tagged(bytes: &[u8]) -> Result<(u64, ClockMatrix), DecodeError> {
    let mut dec = Decoder::new(bytes);
    if dec.bytes()? != b"vbc" {
        return Err(DecodeError::Invalid("missing vbc tag"));
    }
    let round = dec.u64()?;
    let m = dec.get()?;
    dec.finish()?;
    Ok((round, m))
}

/// Propose and decide counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct VbcState {
    pub in_round: bool,
    pub rp: u64,
    pub rd: u64,
}

impl VbcState {
    pub fn is_consistent(&self) -> bool {
        self.rd <= self.rp && self.rp <= self.rd + 1 && self.in_round == (self.rp == self.rd + 1)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decision {
    pub round: u64,
    pub value: ClockMatrix,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ProposeOutcome {
    /// Tagged value to abc-broadcast.
    pub broadcast: Option<Vec<u8>>,
    /// Set when a valid value for this round was already delivered.
    pub decided: Option<Decision>,
}

pub struct Vbc {
    cfg: Config,
    ring: Arc<PublicKeyring>,
    state: VbcState,
    early: BTreeMap<u64, ClockMatrix>,
    discarded: u64,
}

impl Vbc {
    pub fn new(cfg: Config, ring: Arc<PublicKeyring>) -> Self {
        Vbc {
            cfg,
            ring,
            state: VbcState::default(),
            early: BTreeMap::new(),
            discarded: 0,
        }
    }

    pub fn state(&self) -> VbcState {
        self.state
    }

    pub fn discarded(&self) -> u64 {
        self.discarded
    }

    /// Proposes `value` for round `rp + 1`.
    pub fn propose(&mut self, value: ClockMatrix) -> Result<ProposeOutcome> {
        if self.state.in_round {
            return Err(Error::Misuse("vbc propose while a round is open"));
        }
        let r = self.state.rp + 1;
        if !predicate_p(&self.cfg, self.ring.as_ref(), r, &value) {
            return Err(Error::Misuse("vbc proposal fails the validity predicate"));
        }
        self.state.rp = r;
        self.state.in_round = true;
        if let Some(early) = self.early.remove(&r) {
            return Ok(ProposeOutcome {
                broadcast: None,
                decided: Some(self.decide(r, early)),
            });
        }
        Ok(ProposeOutcome {
            broadcast: Some(encode_tagged(r, &value)),
            decided: None,
        })
    }

    fn decide(&mut self, round: u64, value: ClockMatrix) -> Decision {
        self.state.rd += 1;
        self.state.in_round = false;
        Decision { round, value }
    }

    /// Consumes one abc-delivered value.
    pub fn on_abc_deliver(&mut self, bytes: &[u8]) -> Option<Decision> {
        let Ok((r, value)) = decode_tagged(bytes) else {
            self.discarded += 1;
            return None;
        };
        let current = self.state.in_round && r == self.state.rp;
        let future = r > self.state.rp && !self.early.contains_key(&r);
        if !(current || future) || !predicate_p(&self.cfg, self.ring.as_ref(), r, &value) {
            self.discarded += 1;
            return None;
        }
        if current {
            Some(self.decide(r, value))
        } else {
            self.early.insert(r, value);
            None
        }
    }
}

/// ABC admission filter accepting only well-formed, predicate-valid proposals.
pub struct VbcAdmission {
    cfg: Config,
    ring: Arc<PublicKeyring>,
}

impl VbcAdmission {
    pub fn new(cfg: Config, ring: Arc<PublicKeyring>) -> Self {
        VbcAdmission { cfg, ring }
    }
}

impl Admission for VbcAdmission {
    fn admit(&self, value: &[u8]) -> bool {
        match decode_tagged(value) {
            Ok((r, m)) => predicate_p(&self.cfg, self.ring.as_ref(), r, &m),
            Err(_) => false,
        }
    }
}
