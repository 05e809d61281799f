//! Structured per-party trace events, serialized as JSON lines.

use serde::{Deserialize, Serialize};

use crate::clock::VectorClock;
use crate::config::PartyId;
use crate::crypto::Digest;
use crate::tx::TxId;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    OfBroadcast {
        party: PartyId,
        tx: TxId,
    },
    BcchDeliver {
        party: PartyId,
        from: PartyId,
        round: u64,
        tx: TxId,
    },
    Status {
        party: PartyId,
        round: u64,
        vc: VectorClock,
    },
    Propose {
        party: PartyId,
        round: u64,
    },
    Decide {
        party: PartyId,
        round: u64,
        rows: Vec<PartyId>,
        /// Digest of the decided matrix's canonical encoding.
        value: Digest,
    },
    Cut {
        party: PartyId,
        round: u64,
        cut: Vec<u64>,
    },
    Graph {
        party: PartyId,
        round: u64,
        summary: GraphSummary,
    },
    Batch {
        party: PartyId,
        round: u64,
        seq: u32,
        txs: Vec<TxId>,
    },
}

impl TraceEvent {
    pub fn party(&self) -> PartyId {
        match self {
            TraceEvent::OfBroadcast { party, .. }
            | TraceEvent::BcchDeliver { party, .. }
            | TraceEvent::Status { party, .. }
            | TraceEvent::Propose { party, .. }
            | TraceEvent::Decide { party, .. }
            | TraceEvent::Cut { party, .. }
            | TraceEvent::Graph { party, .. }
            | TraceEvent::Batch { party, .. } => *party,
        }
    }
}

/// Human-readable view of one round's graph phase, transactions named by label.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub cut: Vec<u64>,
    pub vertices: Vec<String>,
    pub components: Vec<Vec<String>>,
    pub edges: Vec<(usize, usize)>,
    pub batches: Vec<Vec<String>>,
}

fn list(items: &[String]) -> String {
    format!("[{}]", items.join(","))
}

impl GraphSummary {
    /// One-line rendering used by the golden trace files.
    pub fn line(&self, round: u64) -> String {
        let nums: Vec<String> = self.cut.iter().map(u64::to_string).collect();
        let comps: Vec<String> = self.components.iter().map(|c| list(c)).collect();
        let edges: Vec<String> = self
            .edges
            .iter()
            .map(|(a, b)| {
                format!(
                    "{}->{}",
                    list(&self.components[*a]),
                    list(&self.components[*b])
                )
            })
            .collect();
        let batches: Vec<String> = self.batches.iter().map(|b| list(b)).collect();
        format!(
            "round={round} cut={} vertices={} components={} edges={} batches={}",
            list(&nums),
            list(&self.vertices),
            list(&comps),
            list(&edges),
            list(&batches)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape() {
        let e = TraceEvent::Cut {
            party: PartyId(1),
            round: 2,
            cut: vec![4, 4, 4],
        };
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(s, r#"{"event":"cut","party":1,"round":2,"cut":[4,4,4]}"#);
        assert_eq!(serde_json::from_str::<TraceEvent>(&s).unwrap(), e);
    }

    #[test]
    fn summary_line() {
        let s = GraphSummary {
            cut: vec![4, 4, 4],
            vertices: vec!["a".into(), "b".into()],
            components: vec![vec!["a".into()], vec!["b".into()]],
            edges: vec![(0, 1)],
            batches: vec![vec!["a".into()]],
        };
        assert_eq!(
            s.line(2),
            "round=2 cut=[4,4,4] vertices=[a,b] components=[[a],[b]] edges=[[a]->[b]] batches=[[a]]"
        );
    }
}
