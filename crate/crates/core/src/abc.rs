//! Leader-sequencer atomic broadcast.
//!
//! The leader of view `v` is party `v mod n`. It packs up to `batch_cap`
//! pending values into a signed block for the next height and sends it to
//! everybody; parties acknowledge each block they accept to everybody, and a
//! block commits at a party once it holds the block and `n - f`
//! acknowledgements for its `(height, digest)`. The leader keeps one proposal
//! outstanding at a time.
//!
//! A party that sees no commit within its timeout moves to the next view and
//! announces the blocks it acknowledged but has not committed. Parties join a
//! view after `f + 1` announcements; the new leader waits for `n - f`, catches
//! up to the highest reported commit height and re-proposes the newest
//! announced block at each open height before taking fresh values. The
//! timeout doubles with every rotation and resets on commit.
//!
//! The block digest covers only `(height, values)`, so a re-proposal in a
//! later view collects acknowledgements towards the same commit.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use crate::codec::{Canonical, DecodeError, Decoder, Encoder};
use crate::config::{Config, PartyId};
use crate::crypto::{digest, Digest, KeyMaterial, Signature, Signer};
use crate::message::Dest;
use crate::transport::sim::Micros;

/// Filter applied to every value before it enters the pending pool.
pub trait Admission: Send {
    fn admit(&self, value: &[u8]) -> bool;
}

pub struct AcceptAll;

impl Admission for AcceptAll {
    fn admit(&self, _value: &[u8]) -> bool {
        true
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub leader: PartyId,
    pub view: u64,
    pub height: u64,
    pub values: Vec<Vec<u8>>,
    pub sig: Signature,
}

pub fn block_digest(height: u64, values: &[Vec<u8>]) -> Digest {
    let mut enc = Encoder::with_domain("qof/block");
    enc.u64(height).list(values);
    digest(enc.as_slice())
}

fn block_sign_bytes(leader: PartyId, view: u64, height: u64, d: &Digest) -> Vec<u8> {
    let mut enc = Encoder::with_domain("qof/block-sig");
    enc.u32(leader.0).u64(view).u64(height).put(d);
    enc.finish()
}

impl Block {
    pub fn digest(&self) -> Digest {
        block_digest(self.height, &self.values)
    }

    fn new(keys: &KeyMaterial, view: u64, height: u64, values: Vec<Vec<u8>>) -> Self {
        let d = block_digest(height, &values);
        let sig = keys.sign(&block_sign_bytes(keys.id(), view, height, &d));
        Block {
            leader: keys.id(),
            view,
            height,
            values,
            sig,
        }
    }

    fn verify(&self, keys: &KeyMaterial) -> bool {
        let bytes = block_sign_bytes(self.leader, self.view, self.height, &self.digest());
        keys.verify(self.leader, &bytes, &self.sig)
    }
}

impl Canonical for Block {
    fn encode(&self, enc: &mut Encoder) {
        enc.u32(self.leader.0)
            .u64(self.view)
            .u64(self.height)
            .list(&self.values)
            .put(&self.sig);
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(Block {
            leader: PartyId(dec.u32()?),
            view: dec.u64()?,
            height: dec.u64()?,
            values: dec.list()?,
            sig: dec.get()?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AbcWire {
    Submit {
        value: Vec<u8>,
    },
    Propose(Block),
    Ack {
        view: u64,
        height: u64,
        digest: Digest,
    },
    ViewChange {
        view: u64,
        committed: u64,
        prepared: Vec<Block>,
    },
}

impl AbcWire {
    pub fn signature_count(&self) -> usize {
        match self {
            AbcWire::Submit { .. } | AbcWire::Ack { .. } => 0,
            AbcWire::Propose(_) => 1,
            AbcWire::ViewChange { prepared, .. } => prepared.len(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AbcWire::Submit { .. } => "abc_submit",
            AbcWire::Propose(_) => "abc_propose",
            AbcWire::Ack { .. } => "abc_ack",
            AbcWire::ViewChange { .. } => "abc_view_change",
        }
    }
}

impl Canonical for AbcWire {
    fn encode(&self, enc: &mut Encoder) {
        match self {
            AbcWire::Submit { value } => {
                enc.u8(0).bytes(value);
            }
            AbcWire::Propose(b) => {
                enc.u8(1).put(b);
            }
            AbcWire::Ack {
                view,
                height,
                digest,
            } => {
                enc.u8(2).u64(*view).u64(*height).put(digest);
            }
            AbcWire::ViewChange {
                view,
                committed,
                prepared,
            } => {
                enc.u8(3).u64(*view).u64(*committed).list(prepared);
            }
        }
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(match dec.u8()? {
            0 => AbcWire::Submit {
                value: dec.bytes()?.to_vec(),
            },
            1 => AbcWire::Propose(dec.get()?),
            2 => AbcWire::Ack {
                view: dec.u64()?,
                height: dec.u64()?,
                digest: dec.get()?,
            },
            3 => AbcWire::ViewChange {
                view: dec.u64()?,
                committed: dec.u64()?,
                prepared: dec.list()?,
            },
            t => return Err(DecodeError::InvalidTag(t, "abc")),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AbcOutput {
    Send(Dest, AbcWire),
    /// Fire [`Abc::on_timer`] with `epoch` after `after` microseconds.
    Timer {
        epoch: u64,
        after: Micros,
    },
    Deliver {
        height: u64,
        values: Vec<Vec<u8>>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AbcParams {
    pub timeout: Micros,
    pub max_timeout: Micros,
}

impl AbcParams {
    /// Ten times the mean one-way delay, but never below `floor`.
    pub fn for_delay(mean_delay: Micros, floor: Micros) -> Self {
        let timeout = (10 * mean_delay).max(floor);
        AbcParams {
            timeout,
            max_timeout: timeout.saturating_mul(64),
        }
    }
}

impl Default for AbcParams {
    fn default() -> Self {
        AbcParams::for_delay(1_000, 20_000)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AbcStats {
    pub proposals: u64,
    pub commits: u64,
    pub view_changes: u64,
    pub rejected_values: u64,
    pub invalid_blocks: u64,
}

struct Establishing {
    target: u64,
    reproposals: BTreeMap<u64, Block>,
}

pub struct Abc {
    cfg: Config,
    keys: KeyMaterial,
    params: AbcParams,
    admission: Box<dyn Admission>,
    view: u64,
    established: bool,
    establishing: Option<Establishing>,
    reproposals: BTreeMap<u64, Vec<Vec<u8>>>,
    pending: VecDeque<Digest>,
    pending_values: HashMap<Digest, Vec<u8>>,
    delivered: HashSet<Digest>,
    committed: u64,
    outstanding: Option<u64>,
    blocks: BTreeMap<u64, BTreeMap<Digest, Block>>,
    /// Highest-view block this party acknowledged per uncommitted height.
    acked: BTreeMap<u64, Block>,
    acked_in_view: HashSet<(u64, u64)>,
    acks: BTreeMap<u64, BTreeMap<Digest, BTreeSet<PartyId>>>,
    view_changes: BTreeMap<u64, BTreeMap<PartyId, (u64, Vec<Block>)>>,
    timeout: Micros,
    timer_epoch: u64,
    timer_armed: bool,
    stats: AbcStats,
}

impl Abc {
    pub fn new(
        cfg: Config,
        keys: KeyMaterial,
        params: AbcParams,
        admission: Box<dyn Admission>,
    ) -> Self {
        Abc {
            cfg,
            keys,
            params,
            admission,
            view: 0,
            established: true,
            establishing: None,
            reproposals: BTreeMap::new(),
            pending: VecDeque::new(),
            pending_values: HashMap::new(),
            delivered: HashSet::new(),
            committed: 0,
            outstanding: None,
            blocks: BTreeMap::new(),
            acked: BTreeMap::new(),
            acked_in_view: HashSet::new(),
            acks: BTreeMap::new(),
            view_changes: BTreeMap::new(),
            timeout: params.timeout,
            timer_epoch: 0,
            timer_armed: false,
            stats: AbcStats::default(),
        }
    }

    pub fn me(&self) -> PartyId {
        self.keys.id()
    }

    pub fn view(&self) -> u64 {
        self.view
    }

    pub fn leader(&self, view: u64) -> PartyId {
        PartyId((view % self.cfg.n as u64) as u32)
    }

    /// Number of committed blocks.
    pub fn height(&self) -> u64 {
        self.committed
    }

    pub fn stats(&self) -> AbcStats {
        self.stats
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    /// Submits `value` to every party's pending pool.
    pub fn broadcast(&mut self, value: Vec<u8>) -> Vec<AbcOutput> {
        let mut out = vec![AbcOutput::Send(
            Dest::Others,
            AbcWire::Submit {
                value: value.clone(),
            },
        )];
        self.add_pending(value, &mut out);
        out
    }

    /// Adds `value` to this party's pending pool only.
    pub fn submit_local(&mut self, value: Vec<u8>) -> Vec<AbcOutput> {
        let mut out = Vec::new();
        self.add_pending(value, &mut out);
        out
    }

    pub fn handle(&mut self, from: PartyId, wire: AbcWire) -> Vec<AbcOutput> {
        let mut out = Vec::new();
        if !self.cfg.contains(from) {
            return out;
        }
        match wire {
            AbcWire::Submit { value } => self.add_pending(value, &mut out),
            AbcWire::Propose(block) => self.on_propose(from, block, &mut out),
            AbcWire::Ack { height, digest, .. } => {
                if height >= self.committed {
                    self.acks
                        .entry(height)
                        .or_default()
                        .entry(digest)
                        .or_default()
                        .insert(from);
                    self.try_commit(&mut out);
                }
            }
            AbcWire::ViewChange {
                view,
                committed,
                prepared,
            } => self.on_view_change(from, view, committed, prepared, &mut out),
        }
        out
    }

    pub fn on_timer(&mut self, epoch: u64) -> Vec<AbcOutput> {
        let mut out = Vec::new();
        if epoch != self.timer_epoch || !self.timer_armed {
            return out;
        }
        self.timer_armed = false;
        if !self.has_work() {
            return out;
        }
        self.timeout = (self.timeout * 2).min(self.params.max_timeout);
        self.enter_view(self.view + 1, true, &mut out);
        out
    }

    fn has_work(&self) -> bool {
        !self.pending.is_empty() || self.blocks.range(self.committed..).next().is_some()
    }

    fn arm_timer(&mut self, out: &mut Vec<AbcOutput>) {
        if self.timer_armed || !self.has_work() {
            return;
        }
        self.timer_epoch += 1;
        self.timer_armed = true;
        out.push(AbcOutput::Timer {
            epoch: self.timer_epoch,
            after: self.timeout,
        });
    }

    fn rearm_timer(&mut self, out: &mut Vec<AbcOutput>) {
        self.timer_armed = false;
        self.timer_epoch += 1;
        self.arm_timer(out);
    }

    fn add_pending(&mut self, value: Vec<u8>, out: &mut Vec<AbcOutput>) {
        let d = digest(&value);
        if self.delivered.contains(&d) || self.pending_values.contains_key(&d) {
            return;
        }
        if !self.admission.admit(&value) {
            self.stats.rejected_values += 1;
            return;
        }
        self.pending.push_back(d);
        self.pending_values.insert(d, value);
        self.arm_timer(out);
        self.try_propose(out);
    }

    fn try_propose(&mut self, out: &mut Vec<AbcOutput>) {
        if self.leader(self.view) != self.me() || !self.established || self.outstanding.is_some() {
            return;
        }
        let height = self.committed;
        let values = match self.reproposals.remove(&height) {
            Some(values) => values,
            None => {
                let mut values = Vec::new();
                for d in self.pending.iter() {
                    if values.len() >= self.cfg.batch_cap {
                        break;
                    }
                    if let Some(v) = self.pending_values.get(d) {
                        values.push(v.clone());
                    }
                }
                values
            }
        };
        if values.is_empty() {
            return;
        }
        self.outstanding = Some(height);
        self.stats.proposals += 1;
        let block = Block::new(&self.keys, self.view, height, values);
        out.push(AbcOutput::Send(Dest::All, AbcWire::Propose(block)));
    }

    fn on_propose(&mut self, from: PartyId, block: Block, out: &mut Vec<AbcOutput>) {
        if from != block.leader || block.leader != self.leader(block.view) || block.view < self.view
        {
            return;
        }
        if block.height < self.committed {
            return;
        }
        if !block.verify(&self.keys) {
            self.stats.invalid_blocks += 1;
            return;
        }
        if block.view > self.view {
            self.enter_view(block.view, false, out);
        }
        let d = block.digest();
        if self.acked_in_view.insert((block.view, block.height)) {
            let newer = self
                .acked
                .get(&block.height)
                .is_none_or(|b| b.view < block.view);
            if newer {
                self.acked.insert(block.height, block.clone());
            }
            out.push(AbcOutput::Send(
                Dest::All,
                AbcWire::Ack {
                    view: block.view,
                    height: block.height,
                    digest: d,
                },
            ));
        }
        self.blocks
            .entry(block.height)
            .or_default()
            .insert(d, block);
        self.arm_timer(out);
        self.try_commit(out);
    }

    fn try_commit(&mut self, out: &mut Vec<AbcOutput>) {
        let mut progressed = false;
        loop {
            let h = self.committed;
            let quorum = self.cfg.quorum();
            let ready = self.acks.get(&h).and_then(|by_digest| {
                by_digest
                    .iter()
                    .find(|(d, signers)| {
                        signers.len() >= quorum
                            && self.blocks.get(&h).is_some_and(|b| b.contains_key(*d))
                    })
                    .map(|(d, _)| *d)
            });
            let Some(d) = ready else {
                break;
            };
            let block = self.blocks.get_mut(&h).and_then(|b| b.remove(&d)).unwrap();
            let mut values = Vec::with_capacity(block.values.len());
            for v in block.values {
                let vd = digest(&v);
                if self.delivered.insert(vd) {
                    if self.pending_values.remove(&vd).is_some() {
                        self.pending.retain(|p| *p != vd);
                    }
                    values.push(v);
                }
            }
            self.committed += 1;
            self.stats.commits += 1;
            if self.outstanding.is_some_and(|o| o <= h) {
                self.outstanding = None;
            }
            self.blocks = self.blocks.split_off(&self.committed);
            self.acks = self.acks.split_off(&self.committed);
            self.acked = self.acked.split_off(&self.committed);
            self.acked_in_view
                .retain(|(_, height)| *height >= self.committed);
            progressed = true;
            out.push(AbcOutput::Deliver { height: h, values });
        }
        if progressed {
            self.timeout = self.params.timeout;
            self.try_establish(out);
            self.rearm_timer(out);
            self.try_propose(out);
        }
    }

    fn enter_view(&mut self, view: u64, announce: bool, out: &mut Vec<AbcOutput>) {
        self.view = view;
        self.established = false;
        self.establishing = None;
        self.reproposals.clear();
        self.outstanding = None;
        self.stats.view_changes += 1;
        self.view_changes = self.view_changes.split_off(&view);
        if announce {
            let prepared = self
                .acked
                .range(self.committed..)
                .map(|(_, b)| b.clone())
                .collect();
            out.push(AbcOutput::Send(
                Dest::All,
                AbcWire::ViewChange {
                    view,
                    committed: self.committed,
                    prepared,
                },
            ));
        }
        self.rearm_timer(out);
    }

    fn on_view_change(
        &mut self,
        from: PartyId,
        view: u64,
        committed: u64,
        prepared: Vec<Block>,
        out: &mut Vec<AbcOutput>,
    ) {
        if view < self.view {
            return;
        }
        let prepared = prepared
            .into_iter()
            .filter(|b| b.leader == self.leader(b.view) && b.view < view && b.verify(&self.keys))
            .collect();
        let me = self.me();
        let reports = self.view_changes.entry(view).or_default();
        reports.entry(from).or_insert((committed, prepared));
        let count = reports.len();
        let announced = reports.contains_key(&me);
        if view > self.view && count > self.cfg.f {
            self.enter_view(view, true, out);
        } else if view == self.view && !announced && count > self.cfg.f {
            // joined through a proposal: still owe the announcement
            self.enter_view(view, true, out);
        }
        if view != self.view
            || self.leader(view) != self.me()
            || self.established
            || self.establishing.is_some()
        {
            return;
        }
        let reports = &self.view_changes[&view];
        if reports.len() < self.cfg.quorum() {
            return;
        }
        let target = reports.values().map(|(c, _)| *c).max().unwrap_or(0);
        let mut reproposals: BTreeMap<u64, Block> = BTreeMap::new();
        for (_, prepared) in reports.values() {
            for b in prepared {
                if reproposals
                    .get(&b.height)
                    .is_none_or(|cur| cur.view < b.view)
                {
                    reproposals.insert(b.height, b.clone());
                }
            }
        }
        self.establishing = Some(Establishing {
            target,
            reproposals,
        });
        self.try_establish(out);
    }

    fn try_establish(&mut self, out: &mut Vec<AbcOutput>) {
        let Some(est) = self.establishing.as_ref() else {
            return;
        };
        if self.committed < est.target {
            return;
        }
        let est = self.establishing.take().unwrap();
        self.reproposals = est
            .reproposals
            .into_iter()
            .filter(|(h, _)| *h >= self.committed)
            .map(|(h, b)| (h, b.values))
            .collect();
        self.established = true;
        self.try_propose(out);
    }
}

#[cfg(test)]
mod tests {
    use std::collections::VecDeque;

    use super::*;

    struct Cluster {
        nodes: Vec<Abc>,
        queue: VecDeque<(PartyId, PartyId, AbcWire)>,
        timers: Vec<Vec<u64>>,
        delivered: Vec<Vec<Vec<u8>>>,
        crashed: BTreeSet<usize>,
    }

    impl Cluster {
        fn new(n: usize, f: usize, batch_cap: usize) -> Self {
            let mut cfg = Config::new(n, f, 0).unwrap();
            cfg.batch_cap = batch_cap;
            let nodes = KeyMaterial::generate(7, n)
                .into_iter()
                .map(|k| Abc::new(cfg.clone(), k, AbcParams::default(), Box::new(AcceptAll)))
                .collect();
            Cluster {
                nodes,
                queue: VecDeque::new(),
                timers: vec![Vec::new(); n],
                delivered: vec![Vec::new(); n],
                crashed: BTreeSet::new(),
            }
        }

        fn absorb(&mut self, at: usize, out: Vec<AbcOutput>) {
            let n = self.nodes.len();
            for o in out {
                match o {
                    AbcOutput::Send(dest, w) => {
                        let targets: Vec<usize> = match dest {
                            Dest::All => (0..n).collect(),
                            Dest::Others => (0..n).filter(|p| *p != at).collect(),
                            Dest::One(p) => vec![p.index()],
                        };
                        for t in targets {
                            self.queue
                                .push_back((PartyId::from(at), PartyId::from(t), w.clone()));
                        }
                    }
                    AbcOutput::Timer { epoch, .. } => self.timers[at].push(epoch),
                    AbcOutput::Deliver { values, .. } => self.delivered[at].extend(values),
                }
            }
        }

        fn run(&mut self) {
            while let Some((from, to, w)) = self.queue.pop_front() {
                if self.crashed.contains(&to.index()) || self.crashed.contains(&from.index()) {
                    continue;
                }
                let out = self.nodes[to.index()].handle(from, w);
                self.absorb(to.index(), out);
            }
        }

        /// Fires the latest timer at every live node; timeouts only matter
        /// once the message queue has drained.
        fn fire_timers(&mut self) {
            for p in 0..self.nodes.len() {
                if self.crashed.contains(&p) {
                    continue;
                }
                if let Some(epoch) = self.timers[p].last().copied() {
                    let out = self.nodes[p].on_timer(epoch);
                    self.absorb(p, out);
                }
            }
        }
    }

    fn v(i: u8) -> Vec<u8> {
        vec![i; 3]
    }

    #[test]
    fn concurrent_broadcasts_totally_ordered() {
        let mut c = Cluster::new(4, 1, 2);
        for p in 0..4 {
            let out = c.nodes[p].broadcast(v(p as u8));
            c.absorb(p, out);
        }
        c.run();
        assert_eq!(c.delivered[0].len(), 4);
        for p in 1..4 {
            assert_eq!(c.delivered[p], c.delivered[0]);
        }
    }

    #[test]
    fn duplicate_submission_delivered_once() {
        let mut c = Cluster::new(4, 1, 8);
        for p in [0, 2, 3] {
            let out = c.nodes[p].broadcast(v(1));
            c.absorb(p, out);
        }
        c.run();
        let out = c.nodes[1].broadcast(v(1));
        c.absorb(1, out);
        c.run();
        for p in 0..4 {
            assert_eq!(c.delivered[p], vec![v(1)]);
        }
    }

    #[test]
    fn leader_crash_rotates_and_delivers_everything() {
        let mut c = Cluster::new(4, 1, 4);
        c.crashed.insert(0);
        for p in 1..4 {
            let out = c.nodes[p].broadcast(v(p as u8));
            c.absorb(p, out);
        }
        for _ in 0..10 {
            c.run();
            c.fire_timers();
            if (1..4).all(|p| c.delivered[p].len() == 3) {
                break;
            }
        }
        c.run();
        for p in 1..4 {
            assert_eq!(c.delivered[p].len(), 3, "party {p}");
            assert_eq!(c.delivered[p], c.delivered[1]);
            assert!(c.nodes[p].view() >= 1);
        }
    }

    #[test]
    fn prepared_block_survives_view_change() {
        // p0 proposes, everyone acks, but acks reach only p0 before p0 crashes
        let mut c = Cluster::new(4, 1, 4);
        let out = c.nodes[0].broadcast(v(9));
        c.absorb(0, out);
        // deliver the Submit and Propose traffic, hold back acks to 1..3
        let mut held = Vec::new();
        while let Some((from, to, w)) = c.queue.pop_front() {
            if matches!(w, AbcWire::Ack { .. }) && to.index() != 0 {
                held.push((from, to, w));
                continue;
            }
            let out = c.nodes[to.index()].handle(from, w);
            c.absorb(to.index(), out);
        }
        assert_eq!(c.delivered[0], vec![v(9)]);
        c.crashed.insert(0);
        drop(held);
        for _ in 0..10 {
            c.run();
            c.fire_timers();
        }
        c.run();
        for p in 1..4 {
            assert_eq!(c.delivered[p], vec![v(9)], "party {p}");
        }
    }

    #[test]
    fn forged_block_rejected() {
        let mut c = Cluster::new(4, 1, 4);
        let keys = KeyMaterial::generate(7, 4);
        let mut block = Block::new(&keys[0], 0, 0, vec![v(1)]);
        block.values.push(v(2));
        let out = c.nodes[1].handle(PartyId(0), AbcWire::Propose(block));
        assert!(out
            .iter()
            .all(|o| !matches!(o, AbcOutput::Send(_, AbcWire::Ack { .. }))));
        assert_eq!(c.nodes[1].stats().invalid_blocks, 1);
    }

    #[test]
    fn admission_filters_values() {
        struct Short;
        impl Admission for Short {
            fn admit(&self, value: &[u8]) -> bool {
                value.len() < 3
            }
        }
        let cfg = Config::new(1, 0, 0).unwrap();
        let keys = KeyMaterial::generate(1, 1).pop().unwrap();
        let mut abc = Abc::new(cfg, keys, AbcParams::default(), Box::new(Short));
        let out = abc.submit_local(vec![1, 2, 3]);
        assert!(out.is_empty());
        assert_eq!(abc.stats().rejected_values, 1);
        let out = abc.submit_local(vec![1]);
        assert!(out
            .iter()
            .any(|o| matches!(o, AbcOutput::Send(Dest::All, AbcWire::Propose(_)))));
    }

    #[test]
    fn wire_round_trip() {
        let keys = KeyMaterial::generate(1, 4);
        let b = Block::new(&keys[2], 6, 3, vec![v(1), v(2)]);
        let msgs = [
            AbcWire::Submit { value: v(4) },
            AbcWire::Propose(b.clone()),
            AbcWire::Ack {
                view: 1,
                height: 2,
                digest: b.digest(),
            },
            AbcWire::ViewChange {
                view: 7,
                committed: 3,
                prepared: vec![b],
            },
        ];
        for m in msgs {
            assert_eq!(AbcWire::from_bytes(&m.to_bytes()).unwrap(), m);
        }
    }
}
