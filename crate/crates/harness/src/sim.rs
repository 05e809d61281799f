//! Deterministic discrete-event simulator.
//!
//! One global event queue in virtual time drives `n` sans-IO nodes over
//! [`SimNetwork`] links. Every random choice (link delays, client delays,
//! payloads, adversaries) comes from ChaCha streams derived from the
//! scenario seed, so a run is a pure function of the scenario.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;

use qof_core::abc::AbcParams;
use qof_core::baseline::BaselineParty;
use qof_core::bcch::BcchWire;
use qof_core::codec::Canonical;
use qof_core::crypto::digest;
use qof_core::message::{Dest, Message};
use qof_core::party::{DeliveredBatch, Input, Output, Party, PartyParams, TimerKind};
use qof_core::trace::TraceEvent;
use qof_core::transport::sim::{EventQueue, Micros, SimNetwork, TamperingAdversary};
use qof_core::transport::{LinkMessage, LinkStats};
use qof_core::{Digest, KeyMaterial, PartyId, Transaction, TxId, TxRef};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::adversary::{Behavior, Effect, Engine, Node, RACE_LOST_DELAY};
use crate::scenario::{ms, Load, ProtocolKind, Scenario};

/// Client id used for scripted arrivals.
pub const SCRIPT_CLIENT: u64 = u64::MAX;

#[derive(Debug, Error)]
#[error("invariant violated at event {event} (t={time}us): {what}")]
pub struct RunError {
    pub event: u64,
    pub time: Micros,
    pub what: String,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Keep every trace line in memory (the digest is always computed).
    pub keep_trace: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatchRecord {
    pub round: u64,
    pub seq: u32,
    pub txs: Vec<TxId>,
    pub at: Micros,
}

/// Everything a run produced that oracles and metrics look at.
#[derive(Clone, Debug, Default)]
pub struct RunOutput {
    pub n: usize,
    pub correct: Vec<PartyId>,
    /// Per party, transactions in the order the party of-broadcast them.
    pub broadcast_orders: Vec<Vec<TxId>>,
    pub batches: Vec<Vec<BatchRecord>>,
    /// Per party, `(sender, instance, tx)` in bcch delivery order.
    pub bcch: Vec<Vec<(PartyId, u64, TxId)>>,
    /// Per party, decided round value digests.
    pub decisions: Vec<BTreeMap<u64, Digest>>,
    pub cuts: Vec<Vec<(u64, Vec<u64>)>>,
    /// Transactions injected by clients (including adversary pushes).
    pub submitted: Vec<TxId>,
    /// Every transaction that entered the system from outside the protocol.
    pub known: HashSet<TxId>,
    pub first_arrival: HashMap<TxId, Micros>,
    pub first_bcch: HashMap<TxId, Micros>,
    /// Client id per known transaction.
    pub client_of: HashMap<TxId, u64>,
    pub labels: HashMap<TxId, String>,
    /// Bodies of every delivered transaction.
    pub bodies: HashMap<TxId, TxRef>,
    /// Adversary-injected transaction to the transaction it raced against.
    pub targets: HashMap<TxId, TxId>,
    /// `(party, graph line)` for rounds that emitted a graph summary.
    pub graph_lines: Vec<(PartyId, String)>,
    /// `(time, party, event)` when [`RunOptions::keep_trace`] is set.
    pub trace: Vec<(Micros, TraceEvent)>,
    pub trace_digest: Digest,
    pub first_submit: Option<Micros>,
    pub end_time: Micros,
    pub events: u64,
    pub link: LinkStats,
    pub malformed: u64,
    pub protocol: ProtocolKind,
    pub phases: PhaseTimes,
    pub timed_out: bool,
    /// Sequencer view changes summed over correct parties.
    pub view_changes: u64,
}

impl RunOutput {
    pub fn correct_batches(&self) -> impl Iterator<Item = (PartyId, &Vec<BatchRecord>)> {
        self.correct.iter().map(|p| (*p, &self.batches[p.index()]))
    }

    pub fn label(&self, id: &TxId) -> String {
        self.labels.get(id).cloned().unwrap_or_else(|| id.short())
    }

    /// Per party in id order: graph summaries by round, then deliveries with
    /// transactions named by sorted label. Compared against golden files.
    pub fn golden_lines(&self) -> Vec<String> {
        let mut lines = Vec::new();
        for p in 0..self.n {
            let p = PartyId::from(p);
            lines.extend(
                self.graph_lines
                    .iter()
                    .filter(|(q, _)| *q == p)
                    .map(|(_, l)| format!("{p} {l}")),
            );
            for b in &self.batches[p.index()] {
                let mut names: Vec<String> = b.txs.iter().map(|t| self.label(t)).collect();
                names.sort();
                lines.push(format!(
                    "{p} deliver round={} seq={} [{}]",
                    b.round,
                    b.seq,
                    names.join(",")
                ));
            }
        }
        lines
    }

    /// Batches of-delivered by `p`, with transaction bodies.
    pub fn delivered_log(&self, p: PartyId) -> Vec<DeliveredBatch> {
        self.batches[p.index()]
            .iter()
            .map(|b| DeliveredBatch {
                round: b.round,
                seq: b.seq,
                txs: b.txs.iter().map(|id| self.bodies[id].clone()).collect(),
            })
            .collect()
    }

    /// Trace as JSON lines, each event carrying its virtual time.
    pub fn trace_jsonl(&self) -> String {
        let mut s = String::new();
        for (at, e) in &self.trace {
            s.push_str(&trace_line(*at, e));
            s.push('\n');
        }
        s
    }
}

fn trace_line(at: Micros, e: &TraceEvent) -> String {
    let mut v = serde_json::to_value(e).expect("trace events serialize");
    v.as_object_mut()
        .expect("tagged enum")
        .insert("t_us".into(), at.into());
    v.to_string()
}

/// Summed phase durations over correct parties and rounds.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhaseTimes {
    pub status_to_propose_us: f64,
    pub propose_to_decide_us: f64,
    pub decide_to_deliver_us: f64,
    pub rounds: u64,
}

#[derive(Default)]
struct PhaseClock {
    status: HashMap<(u32, u64), Micros>,
    propose: HashMap<(u32, u64), Micros>,
    decide: HashMap<(u32, u64), Micros>,
    sums: [Micros; 3],
    counts: [u64; 3],
}

impl PhaseClock {
    fn record(&mut self, at: Micros, e: &TraceEvent) {
        let span = |m: &HashMap<(u32, u64), Micros>, k| m.get(&k).map(|t0| at.saturating_sub(*t0));
        match e {
            TraceEvent::Status { party, round, .. } => {
                self.status.insert((party.0, *round), at);
            }
            TraceEvent::Propose { party, round } => {
                let k = (party.0, *round);
                self.propose.insert(k, at);
                if let Some(d) = span(&self.status, k) {
                    self.sums[0] += d;
                    self.counts[0] += 1;
                }
            }
            TraceEvent::Decide { party, round, .. } => {
                let k = (party.0, *round);
                self.decide.insert(k, at);
                if let Some(d) = span(&self.propose, k) {
                    self.sums[1] += d;
                    self.counts[1] += 1;
                }
            }
            TraceEvent::Batch {
                party,
                round,
                seq: 0,
                ..
            } => {
                if let Some(d) = span(&self.decide, (party.0, *round)) {
                    self.sums[2] += d;
                    self.counts[2] += 1;
                }
            }
            _ => {}
        }
    }

    fn finish(&self) -> PhaseTimes {
        let mean = |i: usize| {
            if self.counts[i] == 0 {
                0.0
            } else {
                self.sums[i] as f64 / self.counts[i] as f64
            }
        };
        PhaseTimes {
            status_to_propose_us: mean(0),
            propose_to_decide_us: mean(1),
            decide_to_deliver_us: mean(2),
            rounds: self.counts[1],
        }
    }
}

enum Event {
    Net(LinkMessage),
    Local {
        to: PartyId,
        msg: Message,
    },
    Client {
        to: PartyId,
        tx: TxRef,
    },
    Timer {
        party: PartyId,
        kind: TimerKind,
    },
    /// Client `client` creates its next transaction.
    Generate {
        client: usize,
    },
}

struct Sim<'a> {
    sc: &'a Scenario,
    opts: RunOptions,
    nodes: Vec<Node>,
    net: SimNetwork,
    queue: EventQueue<Event>,
    /// Queued events other than timers.
    active_events: usize,
    busy_until: Vec<Micros>,
    client_rng: ChaCha8Rng,
    client_seq: Vec<u64>,
    generated: usize,
    /// Extra delay per (party, client) for front-running races.
    client_lag: HashMap<(u32, u64), Micros>,
    out: RunOutput,
    expected: HashSet<TxId>,
    /// Correct parties that have not delivered each expected tx yet.
    missing: HashMap<TxId, usize>,
    delivered_at: Vec<HashSet<TxId>>,
    phase: PhaseClock,
    chain: Digest,
    event_index: u64,
}

pub fn run(sc: &Scenario) -> Result<RunOutput, RunError> {
    run_with(sc, RunOptions::default())
}

pub fn run_with(sc: &Scenario, opts: RunOptions) -> Result<RunOutput, RunError> {
    let mut sim = Sim::new(sc, opts);
    sim.run()?;
    Ok(sim.finish())
}

impl<'a> Sim<'a> {
    fn new(sc: &'a Scenario, opts: RunOptions) -> Self {
        let cfg = &sc.config;
        let n = cfg.n;
        let keys = KeyMaterial::generate_memoized(sc.seed, n);
        let params = PartyParams {
            flush_after: ms(sc.flush_ms),
            abc: AbcParams::for_delay(sc.delay().mean().max(1), ms(sc.abc_timeout_floor_ms)),
            trace_graphs: sc.trace_graphs,
            ..PartyParams::default()
        };
        let mut client_lag = HashMap::new();
        let nodes = keys
            .into_iter()
            .enumerate()
            .map(|(i, k)| {
                let engine = match sc.protocol {
                    ProtocolKind::Qof => {
                        Engine::Qof(Box::new(Party::new(cfg.clone(), k.clone(), params.clone())))
                    }
                    ProtocolKind::Baseline => Engine::Baseline(Box::new(BaselineParty::new(
                        cfg.clone(),
                        k.clone(),
                        params.clone(),
                    ))),
                };
                match sc.faults.iter().find(|f| f.party as usize == i) {
                    None => Node::correct(engine),
                    Some(fault) => {
                        if let Behavior::Frontrun {
                            victim_client,
                            race_lost,
                            ..
                        } = &fault.behavior
                        {
                            for p in race_lost {
                                client_lag.insert((*p, *victim_client), RACE_LOST_DELAY);
                            }
                        }
                        let rng = ChaCha8Rng::seed_from_u64(
                            sc.seed ^ (0xad00 + i as u64).rotate_left(40),
                        );
                        Node::faulty(engine, fault.behavior.clone(), cfg.clone(), k, rng)
                    }
                }
            })
            .collect::<Vec<_>>();
        let mut net = SimNetwork::new(n, sc.seed, sc.delay());
        if let Some(t) = sc.tamper {
            net = net.with_tamper(Box::new(TamperingAdversary {
                replay: t.replay,
                flip: t.flip,
                spoof: t.spoof,
            }));
        }
        let correct: Vec<PartyId> = (0..n)
            .filter(|i| !sc.is_faulty(*i))
            .map(PartyId::from)
            .collect();
        let out = RunOutput {
            n,
            correct,
            broadcast_orders: vec![Vec::new(); n],
            batches: vec![Vec::new(); n],
            bcch: vec![Vec::new(); n],
            decisions: vec![BTreeMap::new(); n],
            cuts: vec![Vec::new(); n],
            protocol: sc.protocol,
            ..RunOutput::default()
        };
        Sim {
            sc,
            opts,
            nodes,
            net,
            queue: EventQueue::new(),
            active_events: 0,
            busy_until: vec![0; n],
            client_rng: ChaCha8Rng::seed_from_u64(sc.seed ^ 0x636c_6965_6e74),
            client_seq: vec![0; sc.n_clients],
            generated: 0,
            client_lag,
            out,
            expected: HashSet::new(),
            missing: HashMap::new(),
            delivered_at: vec![HashSet::new(); n],
            phase: PhaseClock::default(),
            chain: digest(b"qof/trace"),
            event_index: 0,
        }
    }

    fn push(&mut self, at: Micros, e: Event) {
        if !matches!(e, Event::Timer { .. }) {
            self.active_events += 1;
        }
        self.queue.push(at, e);
    }

    fn schedule_load(&mut self) {
        let sc = self.sc;
        for a in &sc.arrivals {
            let tx = Arc::new(Transaction::new(
                SCRIPT_CLIENT,
                0,
                a.payload.clone().into_bytes(),
            ));
            self.register(&tx, SCRIPT_CLIENT);
            self.out.labels.insert(tx.id(), a.payload.clone());
            let at = ms(a.at_ms);
            self.out.first_submit = Some(self.out.first_submit.map_or(at, |t| t.min(at)));
            self.push(
                at,
                Event::Client {
                    to: PartyId(a.party),
                    tx,
                },
            );
        }
        if self.sc.tx_count == 0 {
            return;
        }
        match self.sc.load {
            Load::Open { interval_ms } => {
                for i in 0..self.sc.tx_count {
                    let client = i % self.sc.n_clients;
                    self.push(ms(interval_ms * i as f64), Event::Generate { client });
                }
                self.generated = self.sc.tx_count;
            }
            Load::Closed { window } => {
                'outer: for _ in 0..window {
                    for client in 0..self.sc.n_clients {
                        if self.generated == self.sc.tx_count {
                            break 'outer;
                        }
                        self.generated += 1;
                        self.push(0, Event::Generate { client });
                    }
                }
            }
        }
    }

    fn register(&mut self, tx: &TxRef, client: u64) {
        let id = tx.id();
        if self.out.known.insert(id) {
            self.out.client_of.insert(id, client);
            self.out.submitted.push(id);
        }
        if self.expected.insert(id) {
            self.missing.insert(id, self.out.correct.len());
        }
    }

    fn generate(&mut self, now: Micros, client: usize) {
        let seq = self.client_seq[client];
        self.client_seq[client] += 1;
        let mut payload = format!("c{client}-{seq}|").into_bytes();
        while payload.len() < self.sc.payload_size {
            payload.push(self.client_rng.gen_range(b'a'..=b'z'));
        }
        payload.truncate(self.sc.payload_size);
        let tx = Arc::new(Transaction::new(client as u64, seq, payload));
        self.register(&tx, client as u64);
        self.out.first_submit.get_or_insert(now);
        let cd = self.sc.client_delay();
        for p in 0..self.sc.config.n {
            let d = if cd.min == cd.max {
                cd.min
            } else {
                self.client_rng.gen_range(cd.min..=cd.max)
            };
            let lag = self
                .client_lag
                .get(&(p as u32, client as u64))
                .copied()
                .unwrap_or(0);
            self.push(
                now + d + lag,
                Event::Client {
                    to: PartyId::from(p),
                    tx: tx.clone(),
                },
            );
        }
    }

    fn run(&mut self) -> Result<(), RunError> {
        self.schedule_load();
        let horizon = ms(self.sc.duration_ms);
        while let Some((at, ev)) = self.queue.pop() {
            if at > horizon {
                self.out.timed_out = true;
                break;
            }
            if !matches!(ev, Event::Timer { .. }) {
                self.active_events -= 1;
            }
            self.out.end_time = at;
            self.event_index += 1;
            self.dispatch(at, ev)?;
            if self.quiescent() {
                break;
            }
        }
        Ok(())
    }

    fn quiescent(&self) -> bool {
        self.active_events == 0
            && self.missing.is_empty()
            && self.generated == self.sc.tx_count
            && self.sc.tx_count + self.sc.arrivals.len() > 0
    }

    fn dispatch(&mut self, at: Micros, ev: Event) -> Result<(), RunError> {
        match ev {
            Event::Generate { client } => {
                self.generate(at, client);
                Ok(())
            }
            Event::Net(m) => {
                let to = m.to;
                let wire = m.wire_len();
                let Some((from, body)) = self.net.receive(m) else {
                    return Ok(());
                };
                let Ok(msg) = Message::from_bytes(&body) else {
                    self.out.malformed += 1;
                    return Ok(());
                };
                let cost = self.sc.cost.per_kb_us * wire as f64 / 1024.0
                    + self.sc.cost.verify_us * msg.signature_count() as f64;
                self.step(at, to, Input::Message { from, msg }, cost)
            }
            Event::Local { to, msg } => self.step(at, to, Input::Message { from: to, msg }, 0.0),
            Event::Client { to, tx } => {
                let id = tx.id();
                if self.out.correct.contains(&to) {
                    self.out.first_arrival.entry(id).or_insert(at);
                }
                if self.sc.protocol == ProtocolKind::Baseline
                    && !self.out.broadcast_orders[to.index()].contains(&id)
                {
                    self.out.broadcast_orders[to.index()].push(id);
                }
                self.step(at, to, Input::Client(tx), 0.0)
            }
            Event::Timer { party, kind } => self.step(at, party, Input::Timer(kind), 0.0),
        }
    }

    fn step(&mut self, at: Micros, p: PartyId, input: Input, cost: f64) -> Result<(), RunError> {
        let start = at.max(self.busy_until[p.index()]);
        let effects = self.nodes[p.index()].step(start, input);
        let c = &self.sc.cost;
        let mut cost = cost + c.base_us;
        for e in &effects {
            match e {
                Effect::Out(Output::Send { dest, .. }) => {
                    let fan = match dest {
                        Dest::All => self.sc.config.n - 1,
                        Dest::Others => self.sc.config.n - 1,
                        Dest::One(q) => usize::from(*q != p),
                    };
                    cost += c.send_us * fan as f64;
                }
                Effect::Out(Output::Work(w)) => cost += c.work_us * *w as f64,
                _ => {}
            }
        }
        let done = start + cost.round() as Micros;
        self.busy_until[p.index()] = done;
        let faulty = !self.nodes[p.index()].is_correct();
        for e in effects {
            match e {
                Effect::Inject {
                    to,
                    tx,
                    after,
                    target,
                } => {
                    self.out.targets.insert(tx.id(), target);
                    let client = tx.client_id();
                    self.register(&tx, client);
                    self.push(done + after, Event::Client { to, tx });
                }
                Effect::Out(o) => self.output(done, p, o, faulty)?,
            }
        }
        if let Err(what) = self.nodes[p.index()].engine().check() {
            if !faulty {
                return Err(self.fail(done, what));
            }
        }
        Ok(())
    }

    fn fail(&self, time: Micros, what: String) -> RunError {
        RunError {
            event: self.event_index,
            time,
            what,
        }
    }

    fn output(&mut self, now: Micros, p: PartyId, o: Output, faulty: bool) -> Result<(), RunError> {
        match o {
            Output::Send { dest, msg } => {
                if faulty {
                    match &msg {
                        Message::Bcch(BcchWire::Send { tx, .. }) => {
                            self.out.known.insert(tx.id());
                        }
                        Message::Bcch(BcchWire::Final(f)) => {
                            self.out.known.insert(f.tx.id());
                        }
                        _ => {}
                    }
                }
                let targets: Vec<PartyId> = match dest {
                    Dest::All => (0..self.sc.config.n).map(PartyId::from).collect(),
                    Dest::Others => (0..self.sc.config.n)
                        .map(PartyId::from)
                        .filter(|q| *q != p)
                        .collect(),
                    Dest::One(q) => vec![q],
                };
                if targets.len() == 1 && targets[0] == p {
                    self.push(now, Event::Local { to: p, msg });
                    return Ok(());
                }
                let body = msg.to_bytes();
                for q in targets {
                    if q == p {
                        self.push(
                            now,
                            Event::Local {
                                to: p,
                                msg: msg.clone(),
                            },
                        );
                        continue;
                    }
                    for (at, lm) in self.net.send(now, p, q, body.clone()) {
                        self.push(at, Event::Net(lm));
                    }
                }
            }
            Output::Timer { kind, after } => {
                self.push(now + after, Event::Timer { party: p, kind })
            }
            Output::Deliver(batch) => {
                for tx in &batch.txs {
                    self.out.labels.entry(tx.id()).or_insert_with(|| tx.label());
                    self.out.bodies.entry(tx.id()).or_insert_with(|| tx.clone());
                }
                let rec = BatchRecord {
                    round: batch.round,
                    seq: batch.seq,
                    txs: batch.ids(),
                    at: now,
                };
                if !faulty {
                    self.on_correct_delivery(now, p, &rec)?;
                }
                self.out.batches[p.index()].push(rec);
            }
            Output::Trace(e) => self.trace(now, p, e, faulty),
            Output::Work(_) => {}
        }
        Ok(())
    }

    fn on_correct_delivery(
        &mut self,
        now: Micros,
        p: PartyId,
        rec: &BatchRecord,
    ) -> Result<(), RunError> {
        let k = self.out.batches[p.index()].len();
        let reference = self
            .out
            .correct
            .iter()
            .find_map(|q| self.out.batches[q.index()].get(k).map(|b| (*q, b)));
        if let Some((q, b)) = reference {
            if b.txs != rec.txs {
                return Err(self.fail(now, format!("{p} batch {k} differs from {q}'s")));
            }
        }
        let closed = matches!(self.sc.load, Load::Closed { .. });
        for id in &rec.txs {
            if !self.delivered_at[p.index()].insert(*id) {
                return Err(self.fail(now, format!("{p} delivered {} twice", id.short())));
            }
            let first_anywhere = self
                .out
                .correct
                .iter()
                .all(|q| *q == p || !self.delivered_at[q.index()].contains(id));
            if let Some(left) = self.missing.get_mut(id) {
                *left -= 1;
                if *left == 0 {
                    self.missing.remove(id);
                }
            }
            if closed && first_anywhere && self.generated < self.sc.tx_count {
                if let Some(&c) = self.out.client_of.get(id) {
                    if (c as usize) < self.sc.n_clients {
                        self.generated += 1;
                        self.push(now, Event::Generate { client: c as usize });
                    }
                }
            }
        }
        Ok(())
    }

    fn trace(&mut self, now: Micros, p: PartyId, e: TraceEvent, faulty: bool) {
        let line = trace_line(now, &e);
        let mut buf = Vec::with_capacity(32 + line.len());
        buf.extend_from_slice(&self.chain.0);
        buf.extend_from_slice(line.as_bytes());
        self.chain = digest(&buf);
        let i = p.index();
        match &e {
            TraceEvent::OfBroadcast { tx, .. } => self.out.broadcast_orders[i].push(*tx),
            TraceEvent::BcchDeliver {
                from, round, tx, ..
            } => {
                self.out.bcch[i].push((*from, *round, *tx));
                if !faulty {
                    self.out.first_bcch.entry(*tx).or_insert(now);
                }
            }
            TraceEvent::Decide { round, value, .. } => {
                self.out.decisions[i].insert(*round, *value);
            }
            TraceEvent::Cut { round, cut, .. } => self.out.cuts[i].push((*round, cut.clone())),
            TraceEvent::Graph { round, summary, .. } => {
                self.out.graph_lines.push((p, summary.line(*round)))
            }
            _ => {}
        }
        if !faulty {
            self.phase.record(now, &e);
        }
        if self.opts.keep_trace {
            self.out.trace.push((now, e));
        }
    }

    fn finish(mut self) -> RunOutput {
        self.out.trace_digest = self.chain;
        self.out.events = self.event_index;
        self.out.link = self.net.total_stats();
        self.out.phases = self.phase.finish();
        self.out.view_changes = self
            .nodes
            .iter()
            .filter(|n| n.is_correct())
            .map(|n| n.engine().abc_stats().view_changes)
            .sum();
        self.out
    }
}
