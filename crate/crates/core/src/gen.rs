//! Instance generators: random connected graphs, paths, and the two
//! worst-case families used as adversarial test instances. All generators are
//! deterministic per (parameters, seed) and always emit connected graphs.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{Graph, NodeId, Weight};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GenError {
    BadParameter(&'static str),
    BitStringLength { expected: usize, got: usize },
}

impl fmt::Display for GenError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GenError::BadParameter(msg) => write!(f, "bad parameter: {msg}"),
            GenError::BitStringLength { expected, got } => {
                write!(f, "bit string must have length {expected}, got {got}")
            }
        }
    }
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn draw_weight(rng: &mut ChaCha8Rng, wmax: Weight) -> Weight {
    if wmax <= 1 {
        1
    } else {
        rng.gen_range(1..=wmax)
    }
}

/// G(n, p) with uniform weights in `[1, wmax]`. If the raw sample is
/// disconnected it is augmented with a seeded random spanning tree (tree
/// edges first, then the sampled edges that are not already present), so the
/// output is connected and still deterministic for fixed inputs.
pub fn gen_gnp_connected(n: u32, p: f64, wmax: Weight, seed: u64) -> Graph {
    assert!(n >= 2, "n must be at least 2");
    assert!(p > 0.0 && p <= 1.0, "p must be in (0, 1]");
    assert!(wmax >= 1, "wmax must be at least 1");
    let mut rng = rng_for(seed);
    let threshold = if p >= 1.0 {
        u64::MAX
    } else {
        (p * 18_446_744_073_709_551_616.0) as u64
    };
    let mut sampled: Vec<(NodeId, NodeId, Weight)> = Vec::new();
    for u in 1..=n {
        for v in u + 1..=n {
            let hit = if p >= 1.0 {
                true
            } else {
                rng.next_u64() < threshold
            };
            if hit {
                let w = draw_weight(&mut rng, wmax);
                sampled.push((u, v, w));
            }
        }
    }
    let raw = Graph::from_edges(n, &sampled).expect("sampled pairs are valid");
    if raw.is_connected() {
        return raw;
    }
    // Random spanning tree: shuffle the nodes, attach each to a random
    // earlier one. Sampled duplicates of tree edges are dropped.
    let mut order: Vec<NodeId> = (1..=n).collect();
    order.shuffle(&mut rng);
    let mut edges: Vec<(NodeId, NodeId, Weight)> = Vec::with_capacity(sampled.len() + n as usize);
    let mut present = BTreeSet::new();
    for i in 1..order.len() {
        let u = order[rng.gen_range(0..i)];
        let v = order[i];
        let w = draw_weight(&mut rng, wmax);
        present.insert((u.min(v), u.max(v)));
        edges.push((u, v, w));
    }
    for (u, v, w) in sampled {
        if present.insert((u.min(v), u.max(v))) {
            edges.push((u, v, w));
        }
    }
    Graph::from_edges(n, &edges).expect("tree union sample is valid")
}

/// Path `1 - 2 - ... - n` with weights uniform in `[1, wmax]`.
pub fn gen_path(n: u32, wmax: Weight, seed: u64) -> Graph {
    assert!(n >= 2, "n must be at least 2");
    let mut rng = rng_for(seed);
    let edges: Vec<_> = (1..n)
        .map(|u| (u, u + 1, draw_weight(&mut rng, wmax)))
        .collect();
    Graph::from_edges(n, &edges).expect("path is valid")
}

// ---------------------------------------------------------------------------
// Worst-case instance for k-source shortest paths.
// ---------------------------------------------------------------------------

/// Unweighted instance with a long path, a distinguished endpoint `b`, and
/// two source bundles attached near to and far from `b`.
///
/// Layout: path nodes `1..=path_len+1` with `b = 1`, `v1 = 1 + l`,
/// `v2 = path_len + 1`; the `k` sources are `path_len+2 ..= path_len+1+k`,
/// shuffled into the near/far halves by the seed.
#[derive(Debug, Clone)]
pub struct KsspInstance {
    pub graph: Graph,
    pub b: NodeId,
    pub v1: NodeId,
    pub v2: NodeId,
    pub s1: Vec<NodeId>,
    pub s2: Vec<NodeId>,
    pub l: u64,
    pub path_len: u64,
}

impl KsspInstance {
    /// Ground-truth distance from `b` forced by the construction:
    /// `l + 1` for near sources, `path_len + 1` for far ones.
    pub fn expected_dist_from_b(&self, s: NodeId) -> Option<u64> {
        if self.s1.contains(&s) {
            Some(self.l + 1)
        } else if self.s2.contains(&s) {
            Some(self.path_len + 1)
        } else {
            None
        }
    }

    pub fn sources(&self) -> Vec<NodeId> {
        let mut all = self.s1.clone();
        all.extend_from_slice(&self.s2);
        all.sort_unstable();
        all
    }
}

pub fn gen_kssp_lowerbound(
    path_len: u64,
    k: u32,
    l: u64,
    seed: u64,
) -> Result<KsspInstance, GenError> {
    if k < 2 || k % 2 != 0 {
        return Err(GenError::BadParameter("k must be even and at least 2"));
    }
    if l < 1 || l >= path_len {
        return Err(GenError::BadParameter("require 1 <= L < pathLen"));
    }
    let path_nodes = (path_len + 1) as u32;
    let n = path_nodes + k;
    let b = 1u32;
    let v1 = 1 + l as u32;
    let v2 = path_nodes;
    let mut edges: Vec<(NodeId, NodeId, Weight)> = (1..path_nodes).map(|u| (u, u + 1, 1)).collect();
    let mut sources: Vec<NodeId> = (path_nodes + 1..=n).collect();
    let mut rng = rng_for(seed);
    sources.shuffle(&mut rng);
    let (near, far) = sources.split_at((k / 2) as usize);
    let mut s1 = near.to_vec();
    let mut s2 = far.to_vec();
    s1.sort_unstable();
    s2.sort_unstable();
    for &s in &s1 {
        edges.push((s, v1, 1));
    }
    for &s in &s2 {
        edges.push((s, v2, 1));
    }
    let graph = Graph::from_edges(n, &edges).expect("construction is valid");
    Ok(KsspInstance {
        graph,
        b,
        v1,
        v2,
        s1,
        s2,
        l,
        path_len,
    })
}

// ---------------------------------------------------------------------------
// Set-disjointness diameter instance.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeRole {
    V1,
    V2,
    U1,
    U2,
    VHat,
    UHat,
    PathInternal,
}

/// Four W-weighted cliques of size `k`, a hub on each side, matching paths of
/// `ell` unit-weight hops, and input bit strings encoded as cross edges.
///
/// Layout: `V1 = 1..=k`, `V2 = k+1..=2k`, `U1 = 2k+1..=3k`, `U2 = 3k+1..=4k`,
/// `vhat = 4k+1`, `uhat = 4k+2`, then path internals: the `V1[j] - U1[j]`
/// paths, the `V2[j] - U2[j]` paths, and the `vhat - uhat` path, in that
/// order. Bit `i = (r-1)k + c` (1-based) pairs `(V1[r], V2[c])` and the
/// matched `(U1[r], U2[c])`; the cross edge is present iff the bit is 0.
#[derive(Debug, Clone)]
pub struct GammaInstance {
    pub graph: Graph,
    pub k: u32,
    pub ell: u64,
    pub w: Weight,
    pub a_bits: Vec<bool>,
    pub b_bits: Vec<bool>,
    pub roles: Vec<NodeRole>,
}

impl GammaInstance {
    pub fn role(&self, v: NodeId) -> NodeRole {
        self.roles[(v - 1) as usize]
    }

    /// `true` iff no index has `a_i = b_i = 1`.
    pub fn inputs_disjoint(&self) -> bool {
        self.a_bits
            .iter()
            .zip(&self.b_bits)
            .all(|(&a, &b)| !(a && b))
    }
}

pub fn gen_gamma_diam(
    k: u32,
    ell: u64,
    w: Weight,
    a_bits: &[bool],
    b_bits: &[bool],
) -> Result<GammaInstance, GenError> {
    if k < 1 {
        return Err(GenError::BadParameter("k must be at least 1"));
    }
    if ell < 1 {
        return Err(GenError::BadParameter("ell must be at least 1"));
    }
    if w < 1 {
        return Err(GenError::BadParameter("W must be at least 1"));
    }
    let kk = (k * k) as usize;
    if a_bits.len() != kk {
        return Err(GenError::BitStringLength {
            expected: kk,
            got: a_bits.len(),
        });
    }
    if b_bits.len() != kk {
        return Err(GenError::BitStringLength {
            expected: kk,
            got: b_bits.len(),
        });
    }
    let v1 = |j: u32| j; // j in 1..=k
    let v2 = |j: u32| k + j;
    let u1 = |j: u32| 2 * k + j;
    let u2 = |j: u32| 3 * k + j;
    let vhat = 4 * k + 1;
    let uhat = 4 * k + 2;
    let internals_per_path = (ell - 1) as u32;
    let n = 4 * k + 2 + (2 * k + 1) * internals_per_path;
    let mut edges: Vec<(NodeId, NodeId, Weight)> = Vec::new();
    let mut roles = vec![NodeRole::PathInternal; n as usize];
    for j in 1..=k {
        roles[(v1(j) - 1) as usize] = NodeRole::V1;
        roles[(v2(j) - 1) as usize] = NodeRole::V2;
        roles[(u1(j) - 1) as usize] = NodeRole::U1;
        roles[(u2(j) - 1) as usize] = NodeRole::U2;
    }
    roles[(vhat - 1) as usize] = NodeRole::VHat;
    roles[(uhat - 1) as usize] = NodeRole::UHat;

    // Cliques with weight-W edges.
    for set in [&v1 as &dyn Fn(u32) -> u32, &v2, &u1, &u2] {
        for i in 1..=k {
            for j in i + 1..=k {
                edges.push((set(i), set(j), w));
            }
        }
    }
    // Hubs connect to both cliques on their side.
    for j in 1..=k {
        edges.push((vhat, v1(j), w));
        edges.push((vhat, v2(j), w));
        edges.push((uhat, u1(j), w));
        edges.push((uhat, u2(j), w));
    }
    // Matching paths of ell unit-weight hops; internal IDs handed out in
    // the documented order.
    let mut next_internal = 4 * k + 3;
    let mut add_path = |edges: &mut Vec<(NodeId, NodeId, Weight)>, from: NodeId, to: NodeId| {
        let mut prev = from;
        for _ in 0..internals_per_path {
            edges.push((prev, next_internal, 1));
            prev = next_internal;
            next_internal += 1;
        }
        edges.push((prev, to, 1));
    };
    for j in 1..=k {
        add_path(&mut edges, v1(j), u1(j));
    }
    for j in 1..=k {
        add_path(&mut edges, v2(j), u2(j));
    }
    add_path(&mut edges, vhat, uhat);

    // Input encoding: bit i = (r-1)k + c, cross edge present iff bit is 0.
    for r in 1..=k {
        for c in 1..=k {
            let i = ((r - 1) * k + c - 1) as usize;
            if !a_bits[i] {
                edges.push((v1(r), v2(c), w));
            }
            if !b_bits[i] {
                edges.push((u1(r), u2(c), w));
            }
        }
    }

    let graph = Graph::from_edges(n, &edges).expect("construction is valid");
    Ok(GammaInstance {
        graph,
        k,
        ell,
        w,
        a_bits: a_bits.to_vec(),
        b_bits: b_bits.to_vec(),
        roles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{bfs_hops, diameter_oracle, dijkstra_sssp};
    use crate::INF;

    #[test]
    fn gnp_two_nodes_full() {
        let g = gen_gnp_connected(2, 1.0, 1, 7);
        assert_eq!(g.edges(), vec![(1, 2, 1)]);
    }

    #[test]
    fn gnp_deterministic_and_connected() {
        let a = gen_gnp_connected(64, 0.1, 8, 1);
        let b = gen_gnp_connected(64, 0.1, 8, 1);
        assert_eq!(a.edges(), b.edges());
        let hops = bfs_hops(&a, 1);
        assert!(hops.iter().all(|&h| h != INF));
    }

    #[test]
    fn gnp_sparse_is_repaired_to_connected() {
        // p small enough that the raw sample is (almost surely) disconnected.
        let g = gen_gnp_connected(64, 0.001, 4, 3);
        assert!(g.is_connected());
        let g2 = gen_gnp_connected(64, 0.001, 4, 3);
        assert_eq!(g.edges(), g2.edges());
    }

    #[test]
    fn path_shape_and_distance() {
        let g = gen_path(3, 1, 0);
        assert_eq!(g.edges(), vec![(1, 2, 1), (2, 3, 1)]);
        assert_eq!(diameter_oracle(&g, false), 2);

        let g = gen_path(100, 5, 3);
        let total: u64 = g.edges().iter().map(|&(_, _, w)| w).sum();
        assert_eq!(dijkstra_sssp(&g, 1)[99], total);
    }

    #[test]
    fn kssp_small_instance_distances() {
        let inst = gen_kssp_lowerbound(4, 2, 2, 0).unwrap();
        let d = bfs_hops(&inst.graph, inst.b);
        assert_eq!(inst.s1.len(), 1);
        assert_eq!(inst.s2.len(), 1);
        assert_eq!(d[(inst.s1[0] - 1) as usize], 3); // L + 1
        assert_eq!(d[(inst.s2[0] - 1) as usize], 5); // pathLen + 1
    }

    #[test]
    fn kssp_halves_disjoint_and_oracle_matches() {
        let inst = gen_kssp_lowerbound(10, 8, 3, 5).unwrap();
        assert_eq!(inst.s1.len(), 4);
        assert_eq!(inst.s2.len(), 4);
        assert!(inst.s1.iter().all(|s| !inst.s2.contains(s)));
        let d = bfs_hops(&inst.graph, inst.b);
        for s in inst.sources() {
            assert_eq!(
                d[(s - 1) as usize],
                inst.expected_dist_from_b(s).unwrap(),
                "source {s}"
            );
        }
    }

    #[test]
    fn kssp_rejects_bad_attachment() {
        assert!(gen_kssp_lowerbound(4, 2, 4, 0).is_err());
        assert!(gen_kssp_lowerbound(4, 3, 2, 0).is_err());
    }

    #[test]
    fn gamma_disjoint_weighted_diameter() {
        let zeros = vec![false; 4];
        let inst = gen_gamma_diam(2, 2, 5, &zeros, &zeros).unwrap();
        assert!(inst.inputs_disjoint());
        assert!(diameter_oracle(&inst.graph, true) <= 5 + 2 * 2);
    }

    #[test]
    fn gamma_intersecting_weighted_diameter() {
        let ones = vec![true; 4];
        let inst = gen_gamma_diam(2, 2, 5, &ones, &ones).unwrap();
        assert!(!inst.inputs_disjoint());
        assert_eq!(diameter_oracle(&inst.graph, true), 2 * 5 + 2);
    }

    #[test]
    fn gamma_unweighted_disjoint_diameter() {
        let zeros = vec![false; 4];
        let inst = gen_gamma_diam(2, 3, 1, &zeros, &zeros).unwrap();
        assert_eq!(diameter_oracle(&inst.graph, false), 4); // ell + 1
    }

    #[test]
    fn gamma_rejects_wrong_bit_length() {
        let bits = vec![false; 3];
        assert!(matches!(
            gen_gamma_diam(2, 2, 5, &bits, &bits),
            Err(GenError::BitStringLength { expected: 4, .. })
        ));
    }

    #[test]
    fn gamma_roles_and_connectivity() {
        let zeros = vec![false; 9];
        let inst = gen_gamma_diam(3, 4, 10, &zeros, &zeros).unwrap();
        assert!(inst.graph.is_connected());
        assert_eq!(inst.role(1), NodeRole::V1);
        assert_eq!(inst.role(4), NodeRole::V2);
        assert_eq!(inst.role(7), NodeRole::U1);
        assert_eq!(inst.role(10), NodeRole::U2);
        assert_eq!(inst.role(13), NodeRole::VHat);
        assert_eq!(inst.role(14), NodeRole::UHat);
        assert_eq!(inst.role(15), NodeRole::PathInternal);
    }
}
