//! Wire messages exchanged between parties, one enum per protocol layer.

use crate::abc::AbcWire;
use crate::bcch::BcchWire;
use crate::clock::VectorClock;
use crate::codec::{Canonical, DecodeError, Decoder, Encoder};
use crate::config::PartyId;
use crate::crypto::Signature;

/// Destination of an outgoing message.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dest {
    /// Every party including the sender.
    All,
    /// Every party except the sender.
    Others,
    One(PartyId),
}

/// Signed vector clock of one party for one round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StatusMessage {
    pub round: u64,
    pub vc: VectorClock,
    pub sig: Signature,
}

/// Bytes a party signs for its status in `round`.
pub fn status_bytes(round: u64, vc: &VectorClock) -> Vec<u8> {
    let mut enc = Encoder::with_domain("qof/status");
    enc.u64(round).put(vc);
    enc.finish()
}

impl Canonical for StatusMessage {
    fn encode(&self, enc: &mut Encoder) {
        enc.u64(self.round).put(&self.vc).put(&self.sig);
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(StatusMessage {
            round: dec.u64()?,
            vc: dec.get()?,
            sig: dec.get()?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Message {
    Bcch(BcchWire),
    Status(StatusMessage),
    Abc(AbcWire),
}

const TAG_BCCH: u8 = 1;
const TAG_STATUS: u8 = 2;
const TAG_ABC: u8 = 3;

impl Message {
    /// Signatures a receiver has to check, used by cost models.
    pub fn signature_count(&self) -> usize {
        match self {
            Message::Bcch(w) => w.signature_count(),
            Message::Status(_) => 1,
            Message::Abc(w) => w.signature_count(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Message::Bcch(w) => w.kind(),
            Message::Status(_) => "status",
            Message::Abc(w) => w.kind(),
        }
    }
}

impl Canonical for Message {
    fn encode(&self, enc: &mut Encoder) {
        match self {
            Message::Bcch(w) => {
                enc.u8(TAG_BCCH).put(w);
            }
            Message::Status(s) => {
                enc.u8(TAG_STATUS).put(s);
            }
            Message::Abc(w) => {
                enc.u8(TAG_ABC).put(w);
            }
        }
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        match dec.u8()? {
            TAG_BCCH => Ok(Message::Bcch(dec.get()?)),
            TAG_STATUS => Ok(Message::Status(dec.get()?)),
            TAG_ABC => Ok(Message::Abc(dec.get()?)),
            t => Err(DecodeError::InvalidTag(t, "message")),
        }
    }
}
