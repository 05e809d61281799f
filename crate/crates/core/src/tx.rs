use std::fmt;
use std::sync::Arc;

use crate::codec::{Canonical, DecodeError, Decoder, Encoder};
use crate::crypto::{digest, Digest};

pub type TxId = Digest;
pub type TxRef = Arc<Transaction>;

pub const MAX_PAYLOAD: usize = 4096;

/// A client-submitted payload. Its id is the digest of the canonical
/// encoding of `(client_id, client_seq, payload)`, so equal fields always
/// produce equal ids at every party.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Transaction {
    id: TxId,
    client_id: u64,
    client_seq: u64,
    payload: Vec<u8>,
}

impl Transaction {
    pub fn new(client_id: u64, client_seq: u64, payload: Vec<u8>) -> Self {
        let id = Self::compute_id(client_id, client_seq, &payload);
        Transaction {
            id,
            client_id,
            client_seq,
            payload,
        }
    }

    fn compute_id(client_id: u64, client_seq: u64, payload: &[u8]) -> TxId {
        let mut enc = Encoder::new();
        enc.u64(client_id).u64(client_seq).bytes(payload);
        digest(enc.as_slice())
    }

    pub fn id(&self) -> TxId {
        self.id
    }

    pub fn client_id(&self) -> u64 {
        self.client_id
    }

    pub fn client_seq(&self) -> u64 {
        self.client_seq
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn payload_within(&self, max: usize) -> bool {
        self.payload.len() <= max
    }

    /// Payload as text when it is printable, otherwise a short id.
    pub fn label(&self) -> String {
        match std::str::from_utf8(&self.payload) {
            Ok(s) if !s.is_empty() && s.chars().all(|c| c.is_ascii_graphic()) && s.len() <= 32 => {
                s.to_owned()
            }
            _ => self.id.short(),
        }
    }
}

impl fmt::Debug for Transaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Tx({}:{} {} bytes, {})",
            self.client_id,
            self.client_seq,
            self.payload.len(),
            self.id.short()
        )
    }
}

impl Canonical for Transaction {
    fn encode(&self, enc: &mut Encoder) {
        enc.u64(self.client_id)
            .u64(self.client_seq)
            .bytes(&self.payload);
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let client_id = dec.u64()?;
        let client_seq = dec.u64()?;
        let payload = dec.bytes()?;
        if payload.len() > MAX_PAYLOAD {
            return Err(DecodeError::Length(payload.len()));
        }
        Ok(Transaction::new(client_id, client_seq, payload.to_vec()))
    }
}

impl Canonical for TxRef {
    fn encode(&self, enc: &mut Encoder) {
        self.as_ref().encode(enc)
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(Arc::new(Transaction::decode(dec)?))
    }
}
