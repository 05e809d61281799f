//! Authenticated perfect point-to-point links.
//!
//! [`Authenticator`] implements authenticate-and-filter: every outgoing body is
//! stamped with a per-link sequence number and an HMAC-SHA256 tag; incoming
//! messages are delivered only if the tag verifies and `(from, seq)` has not
//! been seen before. Bad messages are dropped and counted, never surfaced as
//! errors.

pub mod sim;
pub mod tcp;

use std::collections::BTreeSet;

use crate::codec::{Canonical, DecodeError, Decoder, Encoder};
use crate::config::PartyId;
use crate::crypto::{LinkKeys, MAC_LEN};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinkMessage {
    pub from: PartyId,
    pub to: PartyId,
    pub seq: u64,
    pub body: Vec<u8>,
    pub tag: [u8; MAC_LEN],
}

impl LinkMessage {
    pub fn wire_len(&self) -> usize {
        4 + 4 + 8 + 4 + self.body.len() + MAC_LEN
    }
}

impl Canonical for LinkMessage {
    fn encode(&self, enc: &mut Encoder) {
        enc.u32(self.from.0)
            .u32(self.to.0)
            .u64(self.seq)
            .bytes(&self.body)
            .raw(&self.tag);
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(LinkMessage {
            from: PartyId(dec.u32()?),
            to: PartyId(dec.u32()?),
            seq: dec.u64()?,
            body: dec.bytes()?.to_vec(),
            tag: dec.array()?,
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LinkStats {
    pub sent: u64,
    pub delivered: u64,
    pub bad_mac: u64,
    pub duplicates: u64,
}

impl LinkStats {
    pub fn dropped(&self) -> u64 {
        self.bad_mac + self.duplicates
    }
}

#[derive(Default, Clone)]
struct SeenSeqs {
    /// Every seq below the watermark has been seen.
    watermark: u64,
    above: BTreeSet<u64>,
}

impl SeenSeqs {
    fn insert(&mut self, seq: u64) -> bool {
        if seq < self.watermark || !self.above.insert(seq) {
            return false;
        }
        while self.above.remove(&self.watermark) {
            self.watermark += 1;
        }
        true
    }
}

/// Link endpoint state of one party.
#[derive(Clone)]
pub struct Authenticator {
    keys: LinkKeys,
    next_seq: Vec<u64>,
    seen: Vec<SeenSeqs>,
    stats: LinkStats,
}

impl Authenticator {
    pub fn new(keys: LinkKeys) -> Self {
        let n = keys.parties();
        Authenticator {
            keys,
            next_seq: vec![0; n],
            seen: vec![SeenSeqs::default(); n],
            stats: LinkStats::default(),
        }
    }

    pub fn me(&self) -> PartyId {
        self.keys.me()
    }

    pub fn stats(&self) -> LinkStats {
        self.stats
    }

    /// Stamps `body` for `to`. Panics if `to` is not a configured party, which
    /// is a setup error rather than a runtime condition.
    pub fn seal(&mut self, to: PartyId, body: Vec<u8>) -> LinkMessage {
        let from = self.me();
        let slot = self
            .next_seq
            .get_mut(to.index())
            .unwrap_or_else(|| panic!("unknown destination {to}"));
        let seq = *slot;
        *slot += 1;
        let tag = self.keys.tag(from, to, seq, &body);
        self.stats.sent += 1;
        LinkMessage {
            from,
            to,
            seq,
            body,
            tag,
        }
    }

    /// Returns the authenticated sender and body, or `None` if the message is
    /// forged, misaddressed or a replay.
    pub fn open(&mut self, msg: LinkMessage) -> Option<(PartyId, Vec<u8>)> {
        if !self
            .keys
            .check(msg.from, msg.to, msg.seq, &msg.body, &msg.tag)
        {
            self.stats.bad_mac += 1;
            return None;
        }
        if !self.seen[msg.from.index()].insert(msg.seq) {
            self.stats.duplicates += 1;
            return None;
        }
        self.stats.delivered += 1;
        Some((msg.from, msg.body))
    }
}
