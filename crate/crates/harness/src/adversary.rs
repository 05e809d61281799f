//! Fault injection: Byzantine and crash behaviors wrapped around a correct
//! party. A wrapper sees every input before the party does and rewrites or
//! drops what the party emits; it never touches the party's internal state.

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use qof_core::abc::AbcWire;
use qof_core::baseline::BaselineParty;
use qof_core::bcch::{echo_bytes, BcchWire, EchoCertificate, Final};
use qof_core::crypto::Signer;
use qof_core::message::{status_bytes, Dest, Message};
use qof_core::party::{Input, Output, Party, Protocol};
use qof_core::transport::sim::Micros;
use qof_core::vbc::{decode_tagged, encode_tagged};
use qof_core::{Config, KeyMaterial, PartyId, Signature, Transaction, TxRef, VectorClock};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scenario::ms;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LieMode {
    Inflate,
    Deflate,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Behavior {
    /// Stops processing entirely at `at_ms`.
    Crash { at_ms: f64 },
    /// Drops every outgoing message.
    Mute,
    /// Sends different transactions to different parties in each bcch
    /// instance and tries to certify the alternative.
    EquivocateBcch,
    /// Signs a falsified vector clock in status messages and proposals.
    LieStatus { mode: LieMode },
    /// On seeing a transaction of `victim_client`, broadcasts its own
    /// transaction first (and a second one after it when `sandwich`) and
    /// pushes them to the other parties. Parties in `race_lost` see the
    /// victim late, so the attacker wins the race there.
    Frontrun {
        victim_client: u64,
        #[serde(default)]
        sandwich: bool,
        #[serde(default)]
        race_lost: Vec<u32>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSpec {
    pub party: u32,
    pub behavior: Behavior,
}

/// Client ids at or above this are reserved for adversary transactions.
pub const ADVERSARY_CLIENT_BASE: u64 = u64::MAX - (1 << 20);

/// Extra client-to-party delay for victims at `race_lost` parties.
pub const RACE_LOST_DELAY: Micros = 20_000;
/// Range of the attacker's push delay to other parties.
pub const FRONTRUN_PUSH_MS: (f64, f64) = (5.0, 9.0);

pub enum Engine {
    Qof(Box<Party>),
    Baseline(Box<BaselineParty>),
}

impl Engine {
    fn handle(&mut self, input: Input) -> Vec<Output> {
        match self {
            Engine::Qof(p) => p.handle(input),
            Engine::Baseline(p) => p.handle(input),
        }
    }

    pub fn id(&self) -> PartyId {
        match self {
            Engine::Qof(p) => p.id(),
            Engine::Baseline(p) => p.id(),
        }
    }

    pub fn abc_stats(&self) -> qof_core::abc::AbcStats {
        match self {
            Engine::Qof(p) => p.abc().stats(),
            Engine::Baseline(p) => p.abc().stats(),
        }
    }

    pub fn as_qof(&self) -> Option<&Party> {
        match self {
            Engine::Qof(p) => Some(p),
            Engine::Baseline(_) => None,
        }
    }

    /// Local state invariants that must hold after every step.
    pub fn check(&self) -> Result<(), String> {
        if let Engine::Qof(p) = self {
            let s = p.vbc().state();
            if !s.is_consistent() {
                return Err(format!("{}: vbc counters inconsistent: {s:?}", p.id()));
            }
            let lens: Vec<u64> = p.msgs().iter().map(|l| l.len() as u64).collect();
            if lens != p.vc().counts() {
                return Err(format!(
                    "{}: vc {:?} disagrees with log lengths {lens:?}",
                    p.id(),
                    p.vc()
                ));
            }
        }
        Ok(())
    }
}

/// What a node asks the simulator to do.
#[derive(Debug)]
pub enum Effect {
    Out(Output),
    /// Deliver `tx` to `to` as if a client had submitted it, `after` from
    /// now. `target` is the transaction the injection races against.
    Inject {
        to: PartyId,
        tx: TxRef,
        after: Micros,
        target: qof_core::TxId,
    },
}

struct Shadow {
    alt: TxRef,
    echoes: BTreeMap<PartyId, Signature>,
    done: bool,
}

struct Adversary {
    behavior: Behavior,
    cfg: Config,
    keys: KeyMaterial,
    rng: ChaCha8Rng,
    shadows: BTreeMap<u64, Shadow>,
    attacked: HashSet<qof_core::TxId>,
    next_seq: u64,
}

pub struct Node {
    engine: Engine,
    adversary: Option<Adversary>,
    crashed: bool,
}

impl Node {
    pub fn correct(engine: Engine) -> Self {
        Node {
            engine,
            adversary: None,
            crashed: false,
        }
    }

    pub fn faulty(
        engine: Engine,
        behavior: Behavior,
        cfg: Config,
        keys: KeyMaterial,
        rng: ChaCha8Rng,
    ) -> Self {
        Node {
            engine,
            adversary: Some(Adversary {
                behavior,
                cfg,
                keys,
                rng,
                shadows: BTreeMap::new(),
                attacked: HashSet::new(),
                next_seq: 0,
            }),
            crashed: false,
        }
    }

    pub fn id(&self) -> PartyId {
        self.engine.id()
    }

    pub fn is_correct(&self) -> bool {
        self.adversary.is_none()
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn behavior(&self) -> Option<&Behavior> {
        self.adversary.as_ref().map(|a| &a.behavior)
    }

    pub fn step(&mut self, now: Micros, input: Input) -> Vec<Effect> {
        if self.crashed {
            return Vec::new();
        }
        let Some(adv) = self.adversary.as_mut() else {
            return self
                .engine
                .handle(input)
                .into_iter()
                .map(Effect::Out)
                .collect();
        };
        if let Behavior::Crash { at_ms } = adv.behavior {
            if now >= ms(at_ms) {
                self.crashed = true;
                return Vec::new();
            }
        }
        let me = self.engine.id();
        let mut effects = Vec::new();
        let inputs = adv.before(me, input, &mut effects);
        for input in inputs {
            for o in self.engine.handle(input) {
                adv.after(me, o, &mut effects);
            }
        }
        effects
    }
}

impl Adversary {
    fn adversary_tx(&mut self, me: PartyId, tag: &str, size: usize) -> TxRef {
        let seq = self.next_seq;
        self.next_seq += 1;
        let mut payload = format!("{tag}-{me}-{seq}").into_bytes();
        payload.resize(size.max(payload.len()), b'.');
        Arc::new(Transaction::new(
            ADVERSARY_CLIENT_BASE + me.0 as u64,
            seq,
            payload,
        ))
    }

    /// Rewrites one input into the inputs the wrapped party actually sees.
    fn before(&mut self, me: PartyId, input: Input, effects: &mut Vec<Effect>) -> Vec<Input> {
        match (&self.behavior, input) {
            (
                Behavior::Frontrun {
                    victim_client,
                    sandwich,
                    ..
                },
                Input::Client(tx),
            ) if tx.client_id() == *victim_client && self.attacked.insert(tx.id()) => {
                let sandwich = *sandwich;
                let target = tx.id();
                let size = tx.payload().len();
                let front = self.adversary_tx(me, "front", size);
                let mut inputs = vec![Input::Client(front.clone()), Input::Client(tx)];
                let mut pushed = vec![front];
                if sandwich {
                    let back = self.adversary_tx(me, "back", size);
                    inputs.push(Input::Client(back.clone()));
                    pushed.push(back);
                }
                for (k, atx) in pushed.into_iter().enumerate() {
                    for p in self.cfg.parties().filter(|p| *p != me) {
                        let base = self
                            .rng
                            .gen_range(ms(FRONTRUN_PUSH_MS.0)..=ms(FRONTRUN_PUSH_MS.1));
                        effects.push(Effect::Inject {
                            to: p,
                            tx: atx.clone(),
                            target,
                            // keep the back-runner behind the victim everywhere
                            after: base + k as Micros * RACE_LOST_DELAY * 2,
                        });
                    }
                }
                inputs
            }
            (
                Behavior::EquivocateBcch,
                Input::Message {
                    from,
                    msg:
                        Message::Bcch(BcchWire::Echo {
                            sender,
                            round,
                            digest,
                            sig,
                        }),
                },
            ) if sender == me
                && self
                    .shadows
                    .get(&round)
                    .is_some_and(|s| s.alt.id() == digest) =>
            {
                self.collect_shadow_echo(me, from, round, sig, effects);
                Vec::new()
            }
            (_, input) => vec![input],
        }
    }

    fn collect_shadow_echo(
        &mut self,
        me: PartyId,
        from: PartyId,
        round: u64,
        sig: Signature,
        effects: &mut Vec<Effect>,
    ) {
        let quorum = self.cfg.echo_quorum();
        let shadow = self.shadows.get_mut(&round).unwrap();
        if shadow.done
            || !self
                .keys
                .verify(from, &echo_bytes(me, round, &shadow.alt.id()), &sig)
        {
            return;
        }
        shadow.echoes.insert(from, sig);
        if shadow.echoes.len() >= quorum {
            shadow.done = true;
            let cert = EchoCertificate {
                sender: me,
                round,
                digest: shadow.alt.id(),
                sigs: shadow.echoes.iter().map(|(p, s)| (*p, *s)).collect(),
            };
            effects.push(Effect::Out(Output::Send {
                dest: Dest::All,
                msg: Message::Bcch(BcchWire::Final(Final {
                    tx: shadow.alt.clone(),
                    cert,
                })),
            }));
        }
    }

    /// Rewrites one output of the wrapped party.
    fn after(&mut self, me: PartyId, out: Output, effects: &mut Vec<Effect>) {
        match (&self.behavior, out) {
            (Behavior::Mute, Output::Send { .. }) => {}
            (
                Behavior::EquivocateBcch,
                Output::Send {
                    dest: Dest::All,
                    msg: Message::Bcch(BcchWire::Send { round, tx }),
                },
            ) => self.equivocate(me, round, tx, effects),
            (
                Behavior::LieStatus { mode },
                Output::Send {
                    dest,
                    msg: Message::Status(mut s),
                },
            ) => {
                let mode = *mode;
                s.vc = self.lie(mode, &s.vc);
                s.sig = self.keys.sign(&status_bytes(s.round, &s.vc));
                effects.push(Effect::Out(Output::Send {
                    dest,
                    msg: Message::Status(s),
                }));
            }
            (
                Behavior::LieStatus { mode },
                Output::Send {
                    dest,
                    msg: Message::Abc(AbcWire::Submit { value }),
                },
            ) => {
                let mode = *mode;
                let value = match decode_tagged(&value) {
                    Ok((r, mut m)) if m.rows.contains_key(&me) => {
                        let vc = self.lie(mode, &m.rows[&me].0);
                        let sig = self.keys.sign(&status_bytes(r, &vc));
                        m.rows.insert(me, (vc, sig));
                        encode_tagged(r, &m)
                    }
                    _ => value,
                };
                effects.push(Effect::Out(Output::Send {
                    dest,
                    msg: Message::Abc(AbcWire::Submit { value }),
                }));
            }
            (_, o) => effects.push(Effect::Out(o)),
        }
    }

    fn equivocate(&mut self, me: PartyId, round: u64, tx: TxRef, effects: &mut Vec<Effect>) {
        let mut payload = tx.payload().to_vec();
        payload.extend_from_slice(b"'");
        let alt = Arc::new(Transaction::new(
            ADVERSARY_CLIENT_BASE + (1 << 16) + me.0 as u64,
            round,
            payload,
        ));
        let own = self.keys.sign(&echo_bytes(me, round, &alt.id()));
        self.shadows.insert(
            round,
            Shadow {
                alt: alt.clone(),
                echoes: BTreeMap::from([(me, own)]),
                done: false,
            },
        );
        let others: Vec<PartyId> = self.cfg.parties().filter(|p| *p != me).collect();
        for p in self.cfg.parties() {
            let idx = others.iter().position(|o| *o == p);
            let gets_alt = idx.is_some_and(|i| (i as u64 + round) % 2 == 1);
            let tx = if gets_alt { alt.clone() } else { tx.clone() };
            effects.push(Effect::Out(Output::Send {
                dest: Dest::One(p),
                msg: Message::Bcch(BcchWire::Send { round, tx }),
            }));
        }
    }

    fn lie(&mut self, mode: LieMode, vc: &VectorClock) -> VectorClock {
        let counts = vc
            .counts()
            .iter()
            .map(|&c| match mode {
                LieMode::Inflate => c + 3,
                LieMode::Deflate => c / 2,
                LieMode::Random => self.rng.gen_range(0..=c + 3),
            })
            .collect();
        VectorClock::from_counts(counts)
    }
}
