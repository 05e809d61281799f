//! TCP link backend.
//!
//! One persistent connection per ordered pair of parties. Each frame is a
//! 4-byte big-endian length followed by the canonical [`LinkMessage`]
//! encoding, whose last 32 bytes are the HMAC tag.

use std::collections::{BTreeMap, HashMap};
use std::io::{self, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{Authenticator, LinkMessage, LinkStats};
use crate::codec::Canonical;
use crate::config::PartyId;
use crate::crypto::LinkKeys;
use crate::error::{Error, Result};

const MAX_FRAME: usize = 16 << 20;
const CONNECT_RETRY: Duration = Duration::from_millis(20);
const CONNECT_DEADLINE: Duration = Duration::from_secs(10);

/// Party id to `host:port`, read from a JSON file such as
/// `{"peers": {"0": "127.0.0.1:7000", "1": "127.0.0.1:7001"}}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topology {
    pub peers: BTreeMap<u32, String>,
}

impl Topology {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let topo: Topology =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("topology: {e}")))?;
        topo.validate()?;
        Ok(topo)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, id) in self.peers.keys().enumerate() {
            if *id as usize != i {
                return Err(Error::Config(format!(
                    "topology ids must be 0..n without gaps, found {id} at position {i}"
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.peers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peers.is_empty()
    }

    pub fn addr(&self, p: PartyId) -> Result<SocketAddr> {
        let s = self
            .peers
            .get(&p.0)
            .ok_or_else(|| Error::Config(format!("no address for {p}")))?;
        s.to_socket_addrs()?
            .next()
            .ok_or_else(|| Error::Config(format!("unresolvable address {s}")))
    }
}

pub fn write_frame(w: &mut impl Write, payload: &[u8]) -> io::Result<()> {
    w.write_all(&(payload.len() as u32).to_be_bytes())?;
    w.write_all(payload)
}

pub fn read_frame(r: &mut impl Read) -> io::Result<Vec<u8>> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            "frame too large",
        ));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

type Inbound = (PartyId, Vec<u8>);

pub struct TcpTransport {
    me: PartyId,
    topology: Topology,
    auth: Arc<Mutex<Authenticator>>,
    conns: Mutex<HashMap<PartyId, TcpStream>>,
    inbox_tx: Sender<Inbound>,
    inbox: Receiver<Inbound>,
    shutdown: Arc<AtomicBool>,
    local_addr: SocketAddr,
}

impl TcpTransport {
    /// Binds the listener at this party's topology address.
    pub fn bind(me: PartyId, topology: Topology, keys: LinkKeys) -> Result<Self> {
        let listener = TcpListener::bind(topology.addr(me)?)?;
        Self::from_listener(me, listener, topology, keys)
    }

    /// Uses an already bound listener, e.g. one bound to port 0 in tests.
    pub fn from_listener(
        me: PartyId,
        listener: TcpListener,
        topology: Topology,
        keys: LinkKeys,
    ) -> Result<Self> {
        if keys.me() != me {
            return Err(Error::Config("link keys belong to another party".into()));
        }
        topology.validate()?;
        let local_addr = listener.local_addr()?;
        let (inbox_tx, inbox) = mpsc::channel();
        let auth = Arc::new(Mutex::new(Authenticator::new(keys)));
        let shutdown = Arc::new(AtomicBool::new(false));
        {
            let auth = auth.clone();
            let tx = inbox_tx.clone();
            let shutdown = shutdown.clone();
            thread::Builder::new()
                .name(format!("qof-accept-{}", me.0))
                .spawn(move || accept_loop(listener, auth, tx, shutdown))?;
        }
        Ok(TcpTransport {
            me,
            topology,
            auth,
            conns: Mutex::new(HashMap::new()),
            inbox_tx,
            inbox,
            shutdown,
            local_addr,
        })
    }

    pub fn me(&self) -> PartyId {
        self.me
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn stats(&self) -> LinkStats {
        self.auth.lock().unwrap().stats()
    }

    /// Sends `body` to `to`; a send to oneself short-circuits the network.
    pub fn send(&self, to: PartyId, body: Vec<u8>) -> Result<()> {
        if to == self.me {
            let _ = self.inbox_tx.send((to, body));
            return Ok(());
        }
        let msg = self.auth.lock().unwrap().seal(to, body);
        let frame = msg.to_bytes();
        let mut conns = self.conns.lock().unwrap();
        for attempt in 0..2 {
            let stream = match conns.entry(to) {
                std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
                std::collections::hash_map::Entry::Vacant(e) => e.insert(self.connect(to)?),
            };
            match write_frame(stream, &frame) {
                Ok(()) => return Ok(()),
                Err(e) if attempt == 0 => {
                    tracing::debug!(%to, error = %e, "link write failed, reconnecting");
                    conns.remove(&to);
                }
                Err(e) => return Err(e.into()),
            }
        }
        unreachable!()
    }

    fn connect(&self, to: PartyId) -> Result<TcpStream> {
        let addr = self.topology.addr(to)?;
        let start = Instant::now();
        loop {
            match TcpStream::connect(addr) {
                Ok(s) => {
                    s.set_nodelay(true)?;
                    return Ok(s);
                }
                Err(e) if start.elapsed() < CONNECT_DEADLINE => {
                    tracing::trace!(%to, error = %e, "connect retry");
                    thread::sleep(CONNECT_RETRY);
                }
                Err(e) => return Err(e.into()),
            }
        }
    }

    pub fn recv_timeout(&self, timeout: Duration) -> Option<(PartyId, Vec<u8>)> {
        match self.inbox.recv_timeout(timeout) {
            Ok(m) => Some(m),
            Err(RecvTimeoutError::Timeout) | Err(RecvTimeoutError::Disconnected) => None,
        }
    }
}

impl Drop for TcpTransport {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // wake the accept loop
        let _ = TcpStream::connect(self.local_addr);
        for (_, s) in self.conns.lock().unwrap().drain() {
            let _ = s.shutdown(std::net::Shutdown::Both);
        }
    }
}

fn accept_loop(
    listener: TcpListener,
    auth: Arc<Mutex<Authenticator>>,
    tx: Sender<Inbound>,
    shutdown: Arc<AtomicBool>,
) {
    for stream in listener.incoming() {
        if shutdown.load(Ordering::SeqCst) {
            return;
        }
        let Ok(stream) = stream else { continue };
        let auth = auth.clone();
        let tx = tx.clone();
        let shutdown = shutdown.clone();
        let _ = thread::Builder::new()
            .name("qof-link-reader".into())
            .spawn(move || read_loop(stream, auth, tx, shutdown));
    }
}

fn read_loop(
    stream: TcpStream,
    auth: Arc<Mutex<Authenticator>>,
    tx: Sender<Inbound>,
    shutdown: Arc<AtomicBool>,
) {
    let mut reader = BufReader::new(stream);
    while !shutdown.load(Ordering::SeqCst) {
        let Ok(frame) = read_frame(&mut reader) else {
            return;
        };
        let Ok(msg) = LinkMessage::from_bytes(&frame) else {
            auth.lock().unwrap().stats.bad_mac += 1;
            continue;
        };
        let opened = auth.lock().unwrap().open(msg);
        if let Some(m) = opened {
            if tx.send(m).is_err() {
                return;
            }
        }
    }
}
