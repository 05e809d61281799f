use std::collections::HashMap;
use std::fmt::Write as _;

use crate::codec::Encoder;
use crate::config::Config;
use crate::crypto::{digest, Digest};
use crate::error::{Error, Result};
use crate::tx::TxId;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vertex {
    pub key: Digest,
    /// Sorted ascending.
    pub members: Vec<TxId>,
}

impl Vertex {
    pub fn single(id: TxId) -> Self {
        Vertex {
            key: id,
            members: vec![id],
        }
    }

    /// Condensation vertex; the key is the digest of the sorted member ids.
    pub fn merged(mut members: Vec<TxId>) -> Self {
        members.sort_unstable();
        if members.len() == 1 {
            return Vertex::single(members[0]);
        }
        let mut enc = Encoder::with_domain("qof/vertex");
        enc.list(&members);
        Vertex {
            key: digest(enc.as_slice()),
            members,
        }
    }

    pub fn smallest(&self) -> TxId {
        self.members[0]
    }
}

/// Directed graph over transaction sets. Adjacency lists are kept sorted and
/// free of duplicates and self-loops.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DependencyGraph {
    vertices: Vec<Vertex>,
    out: Vec<Vec<usize>>,
}

impl DependencyGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_vertices(vertices: Vec<Vertex>) -> Self {
        let out = vec![Vec::new(); vertices.len()];
        DependencyGraph { vertices, out }
    }

    pub fn add_vertex(&mut self, v: Vertex) -> usize {
        self.vertices.push(v);
        self.out.push(Vec::new());
        self.vertices.len() - 1
    }

    pub fn add_edge(&mut self, from: usize, to: usize) {
        if from == to {
            return;
        }
        if let Err(pos) = self.out[from].binary_search(&to) {
            self.out[from].insert(pos, to);
        }
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.out[from].binary_search(&to).is_ok()
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn successors(&self, v: usize) -> &[usize] {
        &self.out[v]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(u, succ)| succ.iter().map(move |&v| (u, v)))
    }

    pub fn edge_count(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    pub fn transpose(&self) -> DependencyGraph {
        let mut out = vec![Vec::new(); self.len()];
        for (u, v) in self.edges() {
            out[v].push(u);
        }
        // edges() walks sources in ascending order, so each list is sorted
        DependencyGraph {
            vertices: self.vertices.clone(),
            out,
        }
    }

    pub fn indegree(&self, v: usize) -> usize {
        self.out
            .iter()
            .filter(|succ| succ.binary_search(&v).is_ok())
            .count()
    }

    fn indegrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.len()];
        for (_, v) in self.edges() {
            deg[v] += 1;
        }
        deg
    }

    /// Vertices in order of DFS completion, roots taken in index order.
    pub fn dfs_finish_order(&self) -> Vec<usize> {
        let mut visited = vec![false; self.len()];
        let mut order = Vec::with_capacity(self.len());
        let mut stack: Vec<(usize, usize)> = Vec::new();
        for root in 0..self.len() {
            if visited[root] {
                continue;
            }
            visited[root] = true;
            stack.push((root, 0));
            while let Some((v, next)) = stack.last_mut() {
                let v = *v;
                if let Some(&w) = self.out[v].get(*next) {
                    *next += 1;
                    if !visited[w] {
                        visited[w] = true;
                        stack.push((w, 0));
                    }
                } else {
                    order.push(v);
                    stack.pop();
                }
            }
        }
        order
    }

    /// All vertices reachable from `root`, including `root`.
    pub fn visit(&self, root: usize, visited: &mut [bool]) -> Vec<usize> {
        let mut found = Vec::new();
        if visited[root] {
            return found;
        }
        visited[root] = true;
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            found.push(v);
            for &w in &self.out[v] {
                if !visited[w] {
                    visited[w] = true;
                    stack.push(w);
                }
            }
        }
        found
    }

    /// Strongly connected components (Kosaraju). Each component is sorted;
    /// components come out in topological order of the condensation.
    pub fn scc(&self) -> Vec<Vec<usize>> {
        let order = self.dfs_finish_order();
        let t = self.transpose();
        let mut visited = vec![false; self.len()];
        let mut comps = Vec::new();
        for &v in order.iter().rev() {
            if visited[v] {
                continue;
            }
            let mut comp = t.visit(v, &mut visited);
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }

    pub fn is_acyclic(&self) -> bool {
        self.scc().iter().all(|c| c.len() == 1)
    }

    /// Condensation: one vertex per strongly connected component, ordered by
    /// smallest member id, with an edge wherever an original edge crosses
    /// components.
    pub fn collapse(&self) -> DependencyGraph {
        if self.len() <= 1 {
            return self.clone();
        }
        let mut merged: Vec<(Vertex, Vec<usize>)> = self
            .scc()
            .into_iter()
            .map(|comp| {
                let members = comp
                    .iter()
                    .flat_map(|&v| self.vertices[v].members.iter().copied())
                    .collect();
                let vertex = if comp.len() == 1 {
                    self.vertices[comp[0]].clone()
                } else {
                    Vertex::merged(members)
                };
                (vertex, comp)
            })
            .collect();
        merged.sort_by_key(|(v, _)| v.smallest());
        let mut comp_of = vec![0; self.len()];
        for (i, (_, comp)) in merged.iter().enumerate() {
            for &v in comp {
                comp_of[v] = i;
            }
        }
        let mut g = DependencyGraph::with_vertices(merged.into_iter().map(|(v, _)| v).collect());
        for (u, v) in self.edges() {
            g.add_edge(comp_of[u], comp_of[v]);
        }
        g
    }

    /// Repeatedly takes the source vertex with the smallest member id and
    /// emits its members if all of them are stable; stops at the first
    /// unstable source.
    pub fn extract_deliverable(
        &self,
        occurrence: impl Fn(&TxId) -> usize,
        cfg: &Config,
    ) -> Result<Vec<Vec<TxId>>> {
        if !self.is_acyclic() {
            return Err(Error::Graph("extraction requires an acyclic graph".into()));
        }
        let mut indeg = self.indegrees();
        let mut removed = vec![false; self.len()];
        let mut batches = Vec::new();
        loop {
            let source = (0..self.len())
                .filter(|&v| !removed[v] && indeg[v] == 0)
                .min_by_key(|&v| self.vertices[v].smallest());
            let Some(v) = source else {
                break;
            };
            let members = &self.vertices[v].members;
            if !members.iter().all(|id| cfg.is_stable(occurrence(id))) {
                break;
            }
            batches.push(members.clone());
            removed[v] = true;
            for &w in &self.out[v] {
                indeg[w] -= 1;
            }
        }
        Ok(batches)
    }

    /// Graphviz text: member lists as comments, one edge per line.
    pub fn to_dot(&self, label: impl Fn(&TxId) -> String) -> String {
        let names: Vec<String> = self
            .vertices
            .iter()
            .map(|v| {
                let members: Vec<String> = v.members.iter().map(&label).collect();
                members.join(",")
            })
            .collect();
        let mut s = String::from("digraph G {\n");
        for (v, name) in self.vertices.iter().zip(&names) {
            let _ = writeln!(s, "  // {}: {}", v.key.short(), name);
            let _ = writeln!(s, "  \"{name}\";");
        }
        for (u, v) in self.edges() {
            let _ = writeln!(s, "  \"{}\" -> \"{}\";", names[u], names[v]);
        }
        s.push_str("}\n");
        s
    }

    /// Index of each member transaction's vertex.
    pub fn member_index(&self) -> HashMap<TxId, usize> {
        self.vertices
            .iter()
            .enumerate()
            .flat_map(|(i, v)| v.members.iter().map(move |m| (*m, i)))
            .collect()
    }
}
