//! Plain sequencer atomic broadcast without the fairness layer.
//!
//! Client transactions go straight into the local pending pool of the
//! sequencer ABC and every committed block becomes one delivered batch.
//! Benchmarks run it next to [`crate::party::Party`] under the same harness.

use std::collections::HashSet;
use std::sync::Arc;

use crate::abc::{Abc, AbcOutput, Admission};
use crate::codec::Canonical;
use crate::config::{Config, PartyId};
use crate::crypto::KeyMaterial;
use crate::message::Message;
use crate::party::{DeliveredBatch, Input, Output, PartyParams, Protocol, TimerKind};
use crate::trace::TraceEvent;
use crate::tx::{Transaction, TxId, MAX_PAYLOAD};

struct TxAdmission;

impl Admission for TxAdmission {
    fn admit(&self, value: &[u8]) -> bool {
        Transaction::from_bytes(value).is_ok_and(|t| t.payload_within(MAX_PAYLOAD))
    }
}

pub struct BaselineParty {
    id: PartyId,
    abc: Abc,
    seen: HashSet<TxId>,
    delivered: HashSet<TxId>,
    batches: u32,
}

impl BaselineParty {
    pub fn new(cfg: Config, keys: KeyMaterial, params: PartyParams) -> Self {
        BaselineParty {
            id: keys.id(),
            abc: Abc::new(cfg, keys, params.abc, Box::new(TxAdmission)),
            seen: HashSet::new(),
            delivered: HashSet::new(),
            batches: 0,
        }
    }

    pub fn abc(&self) -> &Abc {
        &self.abc
    }

    fn push_abc(&mut self, abc_out: Vec<AbcOutput>, out: &mut Vec<Output>) {
        for o in abc_out {
            match o {
                AbcOutput::Send(dest, w) => out.push(Output::Send {
                    dest,
                    msg: Message::Abc(w),
                }),
                AbcOutput::Timer { epoch, after } => out.push(Output::Timer {
                    kind: TimerKind::Abc(epoch),
                    after,
                }),
                AbcOutput::Deliver { height, values } => {
                    let txs: Vec<_> = values
                        .iter()
                        .filter_map(|v| Transaction::from_bytes(v).ok())
                        .filter(|t| self.delivered.insert(t.id()))
                        .map(Arc::new)
                        .collect();
                    if txs.is_empty() {
                        continue;
                    }
                    let batch = DeliveredBatch {
                        round: height + 1,
                        seq: self.batches,
                        txs,
                    };
                    self.batches += 1;
                    out.push(Output::Trace(TraceEvent::Batch {
                        party: self.id,
                        round: batch.round,
                        seq: batch.seq,
                        txs: batch.ids(),
                    }));
                    out.push(Output::Deliver(batch));
                }
            }
        }
    }
}

impl Protocol for BaselineParty {
    fn id(&self) -> PartyId {
        self.id
    }

    fn handle(&mut self, input: Input) -> Vec<Output> {
        let mut out = Vec::new();
        match input {
            Input::Client(tx) => {
                if self.seen.insert(tx.id()) {
                    out.push(Output::Trace(TraceEvent::OfBroadcast {
                        party: self.id,
                        tx: tx.id(),
                    }));
                    let abc_out = self.abc.submit_local(tx.to_bytes());
                    self.push_abc(abc_out, &mut out);
                }
            }
            Input::Message {
                from,
                msg: Message::Abc(w),
            } => {
                let abc_out = self.abc.handle(from, w);
                self.push_abc(abc_out, &mut out);
            }
            Input::Message { .. } => {}
            Input::Timer(TimerKind::Abc(epoch)) => {
                let abc_out = self.abc.on_timer(epoch);
                self.push_abc(abc_out, &mut out);
            }
            Input::Timer(TimerKind::Flush(_)) => {}
        }
        out
    }
}
