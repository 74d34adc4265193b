//! Weighted undirected graphs with contiguous node IDs `1..=n`.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Node identifier, `1..=n`.
pub type NodeId = u32;

/// Edge weight; always `>= 1` on real edges.
pub type Weight = u64;

/// Distance sentinel for "no path". No legal path weight reaches this
/// (weights are polynomial in `n`), so it is safe in `min` folds.
pub const INF: u64 = u64::MAX;

/// Saturating distance addition that keeps [`INF`] absorbing.
#[inline]
pub fn dist_add(a: u64, b: u64) -> u64 {
    if a == INF || b == INF {
        INF
    } else {
        a + b
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphError {
    NodeOutOfRange { id: NodeId, n: u32 },
    SelfLoop { id: NodeId },
    DuplicateEdge { u: NodeId, v: NodeId },
    ZeroWeight { u: NodeId, v: NodeId },
    Disconnected,
}

impl fmt::Display for GraphError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphError::NodeOutOfRange { id, n } => write!(f, "node {id} out of range 1..={n}"),
            GraphError::SelfLoop { id } => write!(f, "self-loop at node {id}"),
            GraphError::DuplicateEdge { u, v } => write!(f, "duplicate edge {{{u},{v}}}"),
            GraphError::ZeroWeight { u, v } => write!(f, "zero weight on edge {{{u},{v}}}"),
            GraphError::Disconnected => write!(f, "graph is not connected"),
        }
    }
}

/// Weighted undirected graph. Nodes are `1..=n`; no self-loops, no parallel
/// edges, all weights `>= 1`.
#[derive(Clone, PartialEq, Eq)]
pub struct Graph {
    n: u32,
    adj: Vec<Vec<(NodeId, Weight)>>,
    m: usize,
}

impl Graph {
    /// Builds a graph from an edge list, validating the invariants.
    /// Connectivity is *not* checked here; see [`Graph::is_connected`].
    pub fn from_edges(n: u32, edges: &[(NodeId, NodeId, Weight)]) -> Result<Self, GraphError> {
        let mut adj = vec![Vec::new(); n as usize];
        let mut seen = BTreeSet::new();
        for &(u, v, w) in edges {
            if u < 1 || u > n {
                return Err(GraphError::NodeOutOfRange { id: u, n });
            }
            if v < 1 || v > n {
                return Err(GraphError::NodeOutOfRange { id: v, n });
            }
            if u == v {
                return Err(GraphError::SelfLoop { id: u });
            }
            if w == 0 {
                return Err(GraphError::ZeroWeight { u, v });
            }
            let key = (u.min(v), u.max(v));
            if !seen.insert(key) {
                return Err(GraphError::DuplicateEdge { u: key.0, v: key.1 });
            }
            adj[(u - 1) as usize].push((v, w));
            adj[(v - 1) as usize].push((u, w));
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        Ok(Graph {
            n,
            adj,
            m: seen.len(),
        })
    }

    #[inline]
    pub fn node_count(&self) -> u32 {
        self.n
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.m
    }

    /// Neighbors of `v` with edge weights, sorted by neighbor ID.
    #[inline]
    pub fn neighbors(&self, v: NodeId) -> &[(NodeId, Weight)] {
        &self.adj[(v - 1) as usize]
    }

    #[inline]
    pub fn degree(&self, v: NodeId) -> usize {
        self.neighbors(v).len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        1..=self.n
    }

    /// All edges as `(u, v, w)` with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(NodeId, NodeId, Weight)> {
        let mut out = Vec::with_capacity(self.m);
        for u in self.nodes() {
            for &(v, w) in self.neighbors(u) {
                if u < v {
                    out.push((u, v, w));
                }
            }
        }
        out
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.neighbors(u).binary_search_by_key(&v, |&(x, _)| x).is_ok()
    }

    pub fn edge_weight(&self, u: NodeId, v: NodeId) -> Option<Weight> {
        self.neighbors(u)
            .binary_search_by_key(&v, |&(x, _)| x)
            .ok()
            .map(|i| self.neighbors(u)[i].1)
    }

    pub fn max_weight(&self) -> Weight {
        self.adj
            .iter()
            .flat_map(|a| a.iter().map(|&(_, w)| w))
            .max()
            .unwrap_or(1)
    }

    /// `true` iff `w(e) == 1` for every edge.
    pub fn is_unweighted(&self) -> bool {
        self.max_weight() == 1
    }

    /// BFS reachability check from node 1.
    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut seen = vec![false; self.n as usize];
        let mut queue = alloc::collections::VecDeque::new();
        seen[0] = true;
        queue.push_back(1u32);
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &(v, _) in self.neighbors(u) {
                let i = (v - 1) as usize;
                if !seen[i] {
                    seen[i] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.n
    }
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Graph(n={}, m={})", self.n, self.m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_self_loop() {
        let err = Graph::from_edges(3, &[(1, 1, 5)]).unwrap_err();
        assert_eq!(err, GraphError::SelfLoop { id: 1 });
    }

    #[test]
    fn rejects_duplicate_edge() {
        let err = Graph::from_edges(3, &[(1, 2, 1), (2, 1, 3)]).unwrap_err();
        assert_eq!(err, GraphError::DuplicateEdge { u: 1, v: 2 });
    }

    #[test]
    fn rejects_zero_weight() {
        assert!(matches!(
            Graph::from_edges(2, &[(1, 2, 0)]),
            Err(GraphError::ZeroWeight { .. })
        ));
    }

    #[test]
    fn connectivity() {
        let g = Graph::from_edges(3, &[(1, 2, 1), (2, 3, 1)]).unwrap();
        assert!(g.is_connected());
        let g = Graph::from_edges(3, &[(1, 2, 1)]).unwrap();
        assert!(!g.is_connected());
    }

    #[test]
    fn adjacency_is_sorted_and_symmetric() {
        let g = Graph::from_edges(4, &[(3, 1, 2), (1, 2, 1), (4, 1, 7)]).unwrap();
        assert_eq!(g.neighbors(1), &[(2, 1), (3, 2), (4, 7)]);
        assert_eq!(g.edge_weight(3, 1), Some(2));
        assert_eq!(g.degree(2), 1);
    }

    #[test]
    fn inf_is_absorbing() {
        assert_eq!(dist_add(INF, 5), INF);
        assert_eq!(dist_add(3, 4), 7);
    }
}
