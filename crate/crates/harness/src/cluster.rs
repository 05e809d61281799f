//! Wall-clock node runner over TCP links, and an in-process loopback cluster.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};
use std::net::TcpListener;
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::Context;
use qof_core::codec::Canonical;
use qof_core::crypto::LinkKeys;
use qof_core::message::{Dest, Message};
use qof_core::party::{DeliveredBatch, Input, Output, Party, PartyParams, Protocol, TimerKind};
use qof_core::transport::tcp::{TcpTransport, Topology};
use qof_core::{Config, KeyMaterial, PartyId, TxId, TxRef};

/// How long a node keeps serving peers after its own work is done.
pub const LINGER: Duration = Duration::from_millis(300);

/// Drives `party` over `transport` until `expect` transactions are
/// delivered (plus [`LINGER`]) or `deadline` passes. `submit` is handed to
/// the party first.
pub fn run_node(
    mut party: Party,
    transport: &TcpTransport,
    submit: Vec<TxRef>,
    expect: usize,
    deadline: Duration,
    mut on_deliver: impl FnMut(&DeliveredBatch),
) -> anyhow::Result<Vec<DeliveredBatch>> {
    let start = Instant::now();
    let me = party.id();
    let n = party.config().n;
    let mut timers: BinaryHeap<Reverse<(Instant, TimerKind)>> = BinaryHeap::new();
    let mut delivered = Vec::new();
    let mut count = 0;
    let mut pending: Vec<Input> = submit.into_iter().map(Input::Client).collect();
    let mut done_at: Option<Instant> = None;
    while start.elapsed() < deadline && done_at.is_none_or(|t| t.elapsed() < LINGER) {
        let now = Instant::now();
        while let Some(Reverse((at, kind))) = timers.peek().copied() {
            if at > now {
                break;
            }
            timers.pop();
            pending.push(Input::Timer(kind));
        }
        if pending.is_empty() {
            let wait = timers
                .peek()
                .map(|Reverse((at, _))| at.saturating_duration_since(now))
                .unwrap_or(Duration::from_millis(50))
                .min(Duration::from_millis(50));
            if let Some((from, body)) = transport.recv_timeout(wait) {
                if let Ok(msg) = Message::from_bytes(&body) {
                    pending.push(Input::Message { from, msg });
                }
            }
        }
        for input in std::mem::take(&mut pending) {
            for o in party.handle(input) {
                match o {
                    Output::Send { dest, msg } => {
                        let body = msg.to_bytes();
                        let targets: Vec<PartyId> = match dest {
                            Dest::All => (0..n).map(PartyId::from).collect(),
                            Dest::Others => {
                                (0..n).map(PartyId::from).filter(|p| *p != me).collect()
                            }
                            Dest::One(p) => vec![p],
                        };
                        for p in targets {
                            // a peer that is down must not stop this node
                            let _ = transport.send(p, body.clone());
                        }
                    }
                    Output::Timer { kind, after } => {
                        timers.push(Reverse((
                            Instant::now() + Duration::from_micros(after),
                            kind,
                        )));
                    }
                    Output::Deliver(b) => {
                        count += b.txs.len();
                        if count >= expect {
                            done_at.get_or_insert_with(Instant::now);
                        }
                        on_deliver(&b);
                        delivered.push(b);
                    }
                    Output::Trace(_) | Output::Work(_) => {}
                }
            }
        }
    }
    Ok(delivered)
}

/// Runs `n` parties on loopback sockets in threads. Every party gets every
/// transaction, as from clients broadcasting to all servers.
pub fn local_cluster(
    cfg: &Config,
    seed: u64,
    txs: Vec<TxRef>,
    deadline: Duration,
) -> anyhow::Result<Vec<Vec<DeliveredBatch>>> {
    let n = cfg.n;
    let listeners = (0..n)
        .map(|_| TcpListener::bind("127.0.0.1:0"))
        .collect::<std::io::Result<Vec<_>>>()
        .context("binding loopback listeners")?;
    let topology = Topology {
        peers: listeners
            .iter()
            .enumerate()
            .map(|(i, l)| Ok((i as u32, l.local_addr()?.to_string())))
            .collect::<std::io::Result<_>>()?,
    };
    let keys = KeyMaterial::generate(seed, n);
    let unique: HashSet<TxId> = txs.iter().map(|t| t.id()).collect();
    let expect = unique.len();
    let txs = Arc::new(txs);
    let handles: Vec<_> = listeners
        .into_iter()
        .zip(keys)
        .enumerate()
        .map(|(i, (listener, k))| {
            let me = PartyId::from(i);
            let topology = topology.clone();
            let cfg = cfg.clone();
            let txs = txs.clone();
            std::thread::spawn(move || -> anyhow::Result<Vec<DeliveredBatch>> {
                let transport = TcpTransport::from_listener(
                    me,
                    listener,
                    topology,
                    LinkKeys::derive(seed, me, n),
                )?;
                let params = PartyParams {
                    abc: qof_core::abc::AbcParams::for_delay(1_000, 200_000),
                    ..PartyParams::default()
                };
                let party = Party::new(cfg, k, params);
                run_node(party, &transport, txs.to_vec(), expect, deadline, |_| {})
            })
        })
        .collect();
    handles
        .into_iter()
        .map(|h| {
            h.join()
                .map_err(|_| anyhow::anyhow!("node thread panicked"))?
        })
        .collect()
}
