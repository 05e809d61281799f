//! Fair-order extraction for one round.
//!
//! Given every party's bcch log and the round's cut, [`order_round`] selects
//! the undelivered transactions inside the cut, counts pairwise precedence,
//! draws dependency edges, collapses cycles into strongly connected
//! components and emits stable components in dependency order. All functions
//! are pure, so parties that agree on the logs and the cut agree on the output.

mod graph;

use std::collections::{HashMap, HashSet};

pub use graph::{DependencyGraph, Vertex};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::tx::{TxId, TxRef};

/// Anything that carries a transaction id.
pub trait Keyed {
    fn key(&self) -> TxId;
}

impl Keyed for TxId {
    fn key(&self) -> TxId {
        *self
    }
}

impl Keyed for TxRef {
    fn key(&self) -> TxId {
        self.id()
    }
}

fn check_cut<T>(logs: &[Vec<T>], cut: &[u64]) -> Result<()> {
    if logs.len() != cut.len() {
        return Err(Error::Graph(format!(
            "cut has {} entries for {} logs",
            cut.len(),
            logs.len()
        )));
    }
    for (j, (log, &c)) in logs.iter().zip(cut).enumerate() {
        if c > log.len() as u64 {
            return Err(Error::Graph(format!(
                "cut[{j}] = {c} exceeds log length {}",
                log.len()
            )));
        }
    }
    Ok(())
}

/// Undelivered transactions appearing in some party's cut prefix, sorted by id.
pub fn build_vertices<T: Keyed>(
    logs: &[Vec<T>],
    cut: &[u64],
    delivered: &HashSet<TxId>,
) -> Result<Vec<TxId>> {
    check_cut(logs, cut)?;
    let mut ids: Vec<TxId> = logs
        .iter()
        .zip(cut)
        .flat_map(|(log, &c)| log[..c as usize].iter().map(Keyed::key))
        .filter(|id| !delivered.contains(id))
        .collect::<HashSet<_>>()
        .into_iter()
        .collect();
    ids.sort_unstable();
    Ok(ids)
}

/// `M[a][b]`: number of parties whose cut prefix holds both `a` and `b` with
/// `a` first, over a fixed vertex set. Also records per-vertex occurrence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrecedenceMatrix {
    ids: Vec<TxId>,
    index: HashMap<TxId, usize>,
    counts: Vec<u32>,
    occurrence: Vec<u32>,
    work: u64,
}

impl PrecedenceMatrix {
    pub fn ids(&self) -> &[TxId] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn at(&self, a: usize, b: usize) -> u32 {
        self.counts[a * self.ids.len() + b]
    }

    pub fn get(&self, a: &TxId, b: &TxId) -> Option<u32> {
        Some(self.at(*self.index.get(a)?, *self.index.get(b)?))
    }

    /// Number of cut prefixes containing `id`; zero for unknown ids.
    pub fn occurrence(&self, id: &TxId) -> usize {
        self.index
            .get(id)
            .map_or(0, |&i| self.occurrence[i] as usize)
    }

    /// Pair updates performed while counting.
    pub fn work(&self) -> u64 {
        self.work
    }
}

pub fn build_precedence<T: Keyed>(
    logs: &[Vec<T>],
    cut: &[u64],
    vertices: &[TxId],
) -> Result<PrecedenceMatrix> {
    check_cut(logs, cut)?;
    let v = vertices.len();
    let index: HashMap<TxId, usize> = vertices
        .iter()
        .enumerate()
        .map(|(i, id)| (*id, i))
        .collect();
    let mut counts = vec![0u32; v * v];
    let mut occurrence = vec![0u32; v];
    let mut work = 0u64;
    let mut seen = vec![false; v];
    for (log, &c) in logs.iter().zip(cut) {
        let mut order = Vec::new();
        for tx in &log[..c as usize] {
            if let Some(&i) = index.get(&tx.key()) {
                if !seen[i] {
                    seen[i] = true;
                    order.push(i);
                }
            }
        }
        for (k, &a) in order.iter().enumerate() {
            occurrence[a] += 1;
            for &b in &order[k + 1..] {
                counts[a * v + b] += 1;
            }
            seen[a] = false;
        }
        work += (order.len() * order.len()) as u64 / 2 + order.len() as u64;
    }
    Ok(PrecedenceMatrix {
        ids: vertices.to_vec(),
        index,
        counts,
        occurrence,
        work,
    })
}

/// Edge `a -> b` iff `max(M[a][b], n - f - M[b][a]) > M[b][a] - f + kappa`.
pub fn edge_rule(m_ab: u32, m_ba: u32, cfg: &Config) -> bool {
    let (n, f, k) = (cfg.n as i64, cfg.f as i64, cfg.kappa as i64);
    let (ab, ba) = (m_ab as i64, m_ba as i64);
    ab.max(n - f - ba) > ba - f + k
}

/// Dependency graph over the matrix's vertices, one singleton vertex per id.
pub fn add_edges(m: &PrecedenceMatrix, cfg: &Config) -> DependencyGraph {
    let mut g =
        DependencyGraph::with_vertices(m.ids.iter().map(|id| Vertex::single(*id)).collect());
    for a in 0..m.len() {
        for b in 0..m.len() {
            if a != b && edge_rule(m.at(a, b), m.at(b, a), cfg) {
                g.add_edge(a, b);
            }
        }
    }
    g
}

/// Everything one round of fair ordering produces.
#[derive(Clone, Debug)]
pub struct RoundOrder {
    pub vertices: Vec<TxId>,
    pub graph: DependencyGraph,
    pub collapsed: DependencyGraph,
    pub batches: Vec<Vec<TxId>>,
    /// Abstract cost: pair updates plus graph edges examined.
    pub work: u64,
}

pub fn order_round<T: Keyed>(
    logs: &[Vec<T>],
    cut: &[u64],
    delivered: &HashSet<TxId>,
    cfg: &Config,
) -> Result<RoundOrder> {
    let vertices = build_vertices(logs, cut, delivered)?;
    let m = build_precedence(logs, cut, &vertices)?;
    let graph = add_edges(&m, cfg);
    let collapsed = graph.collapse();
    let batches = collapsed.extract_deliverable(|id| m.occurrence(id), cfg)?;
    let work = m.work() + (vertices.len() * vertices.len()) as u64 + graph.edge_count() as u64;
    Ok(RoundOrder {
        vertices,
        graph,
        collapsed,
        batches,
        work,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::crypto::digest;

    fn id(name: &str) -> TxId {
        digest(name.as_bytes())
    }

    /// Local orders of the three-party example, `p_i`, `p_j`, `p_k`.
    fn figure_logs(round: u32) -> Vec<Vec<TxId>> {
        let names: [&[&str]; 3] = if round == 1 {
            [
                &["tx4", "tx2", "tx3", "tx1"],
                &["tx4", "tx3", "tx1"],
                &["tx4", "tx1"],
            ]
        } else {
            [
                &["tx4", "tx2", "tx3", "tx1"],
                &["tx4", "tx3", "tx1", "tx2"],
                &["tx4", "tx1", "tx2", "tx3"],
            ]
        };
        names
            .iter()
            .map(|l| l.iter().map(|s| id(s)).collect())
            .collect()
    }

    fn cfg3() -> Config {
        Config::new(3, 0, 0).unwrap()
    }

    fn set(names: &[&str]) -> Vec<TxId> {
        let mut v: Vec<TxId> = names.iter().map(|s| id(s)).collect();
        v.sort();
        v
    }

    #[test]
    fn vertices_within_cut() {
        let logs = figure_logs(1);
        let v = build_vertices(&logs, &[4, 3, 2], &HashSet::new()).unwrap();
        assert_eq!(v, set(&["tx1", "tx2", "tx3", "tx4"]));
        assert!(build_vertices(&logs, &[0, 0, 0], &HashSet::new())
            .unwrap()
            .is_empty());
        let logs = figure_logs(2);
        let done: HashSet<TxId> = [id("tx4")].into();
        assert_eq!(
            build_vertices(&logs, &[4, 4, 4], &done).unwrap(),
            set(&["tx1", "tx2", "tx3"])
        );
    }

    #[test]
    fn cut_beyond_log_is_an_error() {
        let logs = figure_logs(1);
        assert!(matches!(
            build_vertices(&logs, &[5, 3, 2], &HashSet::new()),
            Err(Error::Graph(_))
        ));
    }

    #[test]
    fn precedence_counts_from_local_orders() {
        let logs = figure_logs(1);
        let cut = [4, 3, 2];
        let v = build_vertices(&logs, &cut, &HashSet::new()).unwrap();
        let m = build_precedence(&logs, &cut, &v).unwrap();
        assert_eq!(m.get(&id("tx4"), &id("tx1")), Some(3));
        assert_eq!(m.get(&id("tx1"), &id("tx4")), Some(0));
        assert_eq!(m.get(&id("tx2"), &id("tx3")), Some(1));
        assert_eq!(m.get(&id("tx3"), &id("tx2")), Some(0));
        assert_eq!(m.occurrence(&id("tx2")), 1);
        assert_eq!(m.occurrence(&id("tx4")), 3);
    }

    #[test]
    fn single_party_order() {
        let logs = vec![vec![id("a"), id("b")]];
        let v = build_vertices(&logs, &[2], &HashSet::new()).unwrap();
        let m = build_precedence(&logs, &[2], &v).unwrap();
        assert_eq!(m.get(&id("a"), &id("b")), Some(1));
        assert_eq!(m.get(&id("b"), &id("a")), Some(0));
    }

    #[test]
    fn edge_rule_examples() {
        let c = cfg3();
        assert!(edge_rule(3, 0, &c));
        assert!(!edge_rule(0, 3, &c));
        assert!(edge_rule(1, 0, &c));
        assert!(edge_rule(0, 1, &c));
        let c4 = Config::new(4, 1, 0).unwrap();
        assert!(edge_rule(0, 0, &c4));
    }

    #[test]
    fn round_one_collapses_and_delivers_nothing() {
        let logs = figure_logs(1);
        let out = order_round(&logs, &[4, 3, 2], &HashSet::new(), &cfg3()).unwrap();
        assert_eq!(out.vertices.len(), 4);
        assert_eq!(out.collapsed.len(), 1);
        assert_eq!(
            out.collapsed.vertices()[0].members,
            set(&["tx1", "tx2", "tx3", "tx4"])
        );
        assert!(out.batches.is_empty());
    }

    #[test]
    fn round_two_emits_tx4_then_the_triple() {
        let logs = figure_logs(2);
        let out = order_round(&logs, &[4, 4, 4], &HashSet::new(), &cfg3()).unwrap();
        assert_eq!(out.collapsed.len(), 2);
        let tx4 = out
            .collapsed
            .vertices()
            .iter()
            .position(|v| v.members == vec![id("tx4")])
            .unwrap();
        assert!(out.collapsed.has_edge(tx4, 1 - tx4));
        assert!(!out.collapsed.has_edge(1 - tx4, tx4));
        assert_eq!(
            out.batches,
            vec![vec![id("tx4")], set(&["tx1", "tx2", "tx3"])]
        );
    }

    #[test]
    fn independent_stable_sources_by_smallest_id() {
        let mut g = DependencyGraph::new();
        let (a, b) = if id("a") < id("b") {
            (id("a"), id("b"))
        } else {
            (id("b"), id("a"))
        };
        g.add_vertex(Vertex::single(b));
        g.add_vertex(Vertex::single(a));
        let out = g.extract_deliverable(|_| 3, &cfg3()).unwrap();
        assert_eq!(out, vec![vec![a], vec![b]]);
    }

    #[test]
    fn extraction_rejects_cycles() {
        let mut g = DependencyGraph::new();
        g.add_vertex(Vertex::single(id("a")));
        g.add_vertex(Vertex::single(id("b")));
        g.add_edge(0, 1);
        g.add_edge(1, 0);
        assert!(g.extract_deliverable(|_| 3, &cfg3()).is_err());
    }

    #[test]
    fn chain_is_a_collapse_fixed_point() {
        let mut g = DependencyGraph::new();
        for name in ["a", "b", "c"] {
            g.add_vertex(Vertex::single(id(name)));
        }
        g.add_edge(0, 1);
        g.add_edge(1, 2);
        let h = g.collapse();
        assert_eq!(h.len(), 3);
        assert_eq!(h.edge_count(), 2);
        assert!(h.is_acyclic());
    }

    #[test]
    fn scc_of_two_cycle_and_empty() {
        let mut g = DependencyGraph::new();
        g.add_vertex(Vertex::single(id("a")));
        g.add_vertex(Vertex::single(id("b")));
        g.add_edge(0, 1);
        g.add_edge(1, 0);
        assert_eq!(g.scc(), vec![vec![0, 1]]);
        assert!(DependencyGraph::new().scc().is_empty());
        assert_eq!(g.indegree(0), 1);
    }

    #[test]
    fn dot_export_lists_members_and_edges() {
        let logs = figure_logs(2);
        let out = order_round(&logs, &[4, 4, 4], &HashSet::new(), &cfg3()).unwrap();
        let names: HashMap<TxId, &str> = ["tx1", "tx2", "tx3", "tx4"]
            .iter()
            .map(|s| (id(s), *s))
            .collect();
        let dot = out.collapsed.to_dot(|t| names[t].to_string());
        assert!(dot.starts_with("digraph G {"));
        assert_eq!(dot.matches(" -> ").count(), 1);
        assert!(dot.contains("\"tx4\" -> "));
    }

    fn random_graph(v: usize, edges: &[(usize, usize)]) -> DependencyGraph {
        let mut g = DependencyGraph::new();
        for i in 0..v {
            g.add_vertex(Vertex::single(digest(&[i as u8])));
        }
        for &(a, b) in edges {
            g.add_edge(a % v, b % v);
        }
        g
    }

    /// Mutual reachability classes via Floyd-Warshall closure.
    fn oracle_classes(g: &DependencyGraph) -> Vec<Vec<usize>> {
        let v = g.len();
        let mut r = vec![vec![false; v]; v];
        for i in 0..v {
            r[i][i] = true;
        }
        for (a, b) in g.edges() {
            r[a][b] = true;
        }
        for k in 0..v {
            for i in 0..v {
                for j in 0..v {
                    if r[i][k] && r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for i in 0..v {
            if classes.iter().any(|c| c.contains(&i)) {
                continue;
            }
            classes.push((0..v).filter(|&j| r[i][j] && r[j][i]).collect());
        }
        classes
    }

    proptest! {
        #[test]
        fn scc_matches_reachability_oracle(
            v in 0usize..=12,
            edges in prop::collection::vec((0usize..12, 0usize..12), 0..60),
        ) {
            let g = if v == 0 { DependencyGraph::new() } else { random_graph(v, &edges) };
            let mut got = g.scc();
            got.sort();
            let mut want = oracle_classes(&g);
            want.sort();
            prop_assert_eq!(got, want);
        }

        #[test]
        fn collapse_is_acyclic_and_partitions(
            v in 1usize..=12,
            edges in prop::collection::vec((0usize..12, 0usize..12), 0..60),
        ) {
            let g = random_graph(v, &edges);
            let h = g.collapse();
            prop_assert!(h.is_acyclic());
            let mut members: Vec<TxId> = h.vertices().iter().flat_map(|x| x.members.clone()).collect();
            let total = members.len();
            members.sort();
            members.dedup();
            prop_assert_eq!(members.len(), total);
            let mut original: Vec<TxId> = g.vertices().iter().map(|x| x.key).collect();
            original.sort();
            prop_assert_eq!(members, original);
        }

        #[test]
        fn add_edges_is_deterministic(
            counts in prop::collection::vec(0u32..5, 16),
            kappa in 0usize..3,
        ) {
            let cfg = Config::new(4, 1, kappa).unwrap();
            let ids: Vec<TxId> = (0..4u8).map(|i| digest(&[i])).collect();
            let logs: Vec<Vec<TxId>> = (0..4)
                .map(|p| {
                    let mut l = ids.clone();
                    l.rotate_left(counts[p] as usize % 4);
                    l.truncate(1 + counts[p + 4] as usize % 4);
                    l
                })
                .collect();
            let cut: Vec<u64> = logs.iter().map(|l| l.len() as u64).collect();
            let vs = build_vertices(&logs, &cut, &HashSet::new()).unwrap();
            let m1 = build_precedence(&logs, &cut, &vs).unwrap();
            let m2 = build_precedence(&logs, &cut, &vs).unwrap();
            let g1 = add_edges(&m1, &cfg);
            let g2 = add_edges(&m2, &cfg);
            prop_assert_eq!(g1.edges().collect::<Vec<_>>(), g2.edges().collect::<Vec<_>>());
            for a in 0..vs.len() {
                for b in 0..vs.len() {
                    prop_assert!(m1.at(a, b) + m1.at(b, a) <= 4);
                }
            }
        }
    }
}
