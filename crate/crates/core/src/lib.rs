//! Quick order-fair atomic broadcast.
//!
//! The crate is a set of sans-IO state machines stacked the same way a
//! deployment stacks them:
//!
//! * [`transport`]: authenticated perfect links (HMAC over a simulated queue or TCP).
//! * [`bcch`]: a FIFO Byzantine consistent broadcast channel built from signed
//!   echo broadcast instances, one active per sender.
//! * [`abc`] and [`vbc`]: a leader-sequencer atomic broadcast and the validated
//!   Byzantine consensus adapter that decides signed clock matrices.
//! * [`fairgraph`]: precedence counting, dependency edges, cycle collapse and
//!   stable set extraction.
//! * [`party`]: the per-party round engine tying everything together and
//!   emitting `of-deliver` batches.
//!
//! Every state machine consumes [`party::Input`]s and produces
//! [`party::Output`]s; the driver (a simulator or a TCP node) owns time and IO.

pub mod abc;
pub mod baseline;
pub mod bcch;
pub mod clock;
pub mod codec;
pub mod config;
pub mod crypto;
pub mod error;
pub mod fairgraph;
pub mod message;
pub mod party;
pub mod trace;
pub mod transport;
pub mod tx;
pub mod vbc;

pub use crate::clock::VectorClock;
pub use crate::config::{Config, PartyId};
pub use crate::crypto::{digest, Digest, KeyMaterial, PublicKeyring, Signature};
pub use crate::error::{Error, Result};
pub use crate::tx::{Transaction, TxId, TxRef};
