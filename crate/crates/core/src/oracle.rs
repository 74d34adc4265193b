//! Sequential reference algorithms. Everything the distributed layer produces
//! is checked against these.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

use crate::graph::{dist_add, Graph, NodeId, INF};

/// All-pairs distances, row per source (row `i` = distances from node `i+1`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMatrix {
    rows: Vec<Vec<u64>>,
}

impl DistanceMatrix {
    pub fn n(&self) -> u32 {
        self.rows.len() as u32
    }

    #[inline]
    pub fn dist(&self, u: NodeId, v: NodeId) -> u64 {
        self.rows[(u - 1) as usize][(v - 1) as usize]
    }

    pub fn row(&self, u: NodeId) -> &[u64] {
        &self.rows[(u - 1) as usize]
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.rows.len();
        (0..n).all(|i| (i + 1..n).all(|j| self.rows[i][j] == self.rows[j][i]))
    }

    /// Checks `d(u,w) <= d(u,v) + d(v,w)` for every triple.
    pub fn satisfies_triangle_inequality(&self) -> bool {
        let n = self.rows.len();
        for u in 0..n {
            for v in 0..n {
                for w in 0..n {
                    if self.rows[u][w] > dist_add(self.rows[u][v], self.rows[v][w]) {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Exact single-source distances. `INF` marks unreachable nodes.
pub fn dijkstra_sssp(g: &Graph, s: NodeId) -> Vec<u64> {
    assert!(
        s >= 1 && s <= g.node_count(),
        "unknown source ID {s} (n = {})",
        g.node_count()
    );
    let n = g.node_count() as usize;
    let mut dist = vec![INF; n];
    dist[(s - 1) as usize] = 0;
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((0u64, s)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if d > dist[(u - 1) as usize] {
            continue;
        }
        for &(v, w) in g.neighbors(u) {
            let nd = d + w;
            if nd < dist[(v - 1) as usize] {
                dist[(v - 1) as usize] = nd;
                heap.push(Reverse((nd, v)));
            }
        }
    }
    dist
}

/// BFS hop counts from `s`.
pub fn bfs_hops(g: &Graph, s: NodeId) -> Vec<u64> {
    let n = g.node_count() as usize;
    let mut hops = vec![INF; n];
    hops[(s - 1) as usize] = 0;
    let mut queue = alloc::collections::VecDeque::new();
    queue.push_back(s);
    while let Some(u) = queue.pop_front() {
        let hu = hops[(u - 1) as usize];
        for &(v, _) in g.neighbors(u) {
            if hops[(v - 1) as usize] == INF {
                hops[(v - 1) as usize] = hu + 1;
                queue.push_back(v);
            }
        }
    }
    hops
}

/// `h`-limited distances from `u`: minimum weight over paths with at most `h`
/// edges, computed as `h` rounds of Bellman-Ford relaxation (that is the
/// definition of `d_h`). Entry stays `INF` when no such path exists.
pub fn hop_limited_from(g: &Graph, u: NodeId, h: u64) -> Vec<u64> {
    let n = g.node_count() as usize;
    let mut dist = vec![INF; n];
    dist[(u - 1) as usize] = 0;
    let mut frontier: Vec<NodeId> = vec![u];
    for _ in 0..h {
        if frontier.is_empty() {
            break;
        }
        let mut changed: Vec<NodeId> = Vec::new();
        let snapshot = dist.clone();
        for &x in &frontier {
            let dx = snapshot[(x - 1) as usize];
            for &(y, w) in g.neighbors(x) {
                let nd = dist_add(dx, w);
                if nd < dist[(y - 1) as usize] {
                    dist[(y - 1) as usize] = nd;
                    if !changed.contains(&y) {
                        changed.push(y);
                    }
                }
            }
        }
        frontier = changed;
    }
    dist
}

/// `d_h(u, v)`.
pub fn hop_limited_dist(g: &Graph, u: NodeId, v: NodeId, h: u64) -> u64 {
    hop_limited_from(g, u, h)[(v - 1) as usize]
}

/// Exact all-pairs distances via repeated Dijkstra.
pub fn apsp_oracle(g: &Graph) -> DistanceMatrix {
    let rows = g.nodes().map(|s| dijkstra_sssp(g, s)).collect();
    DistanceMatrix { rows }
}

/// Exact diameter: maximum pairwise hop count (unweighted) or maximum
/// pairwise weighted distance.
pub fn diameter_oracle(g: &Graph, weighted: bool) -> u64 {
    let mut best = 0;
    for s in g.nodes() {
        let d = if weighted {
            dijkstra_sssp(g, s)
        } else {
            bfs_hops(g, s)
        };
        for x in d {
            if x != INF && x > best {
                best = x;
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{gen_gnp_connected, gen_path};

    fn path3() -> Graph {
        Graph::from_edges(3, &[(1, 2, 1), (2, 3, 1)]).unwrap()
    }

    #[test]
    fn dijkstra_on_unit_path() {
        assert_eq!(dijkstra_sssp(&path3(), 1), vec![0, 1, 2]);
    }

    #[test]
    fn dijkstra_self_distance_zero() {
        let g = gen_gnp_connected(32, 0.2, 5, 11);
        for v in g.nodes() {
            assert_eq!(dijkstra_sssp(&g, v)[(v - 1) as usize], 0);
        }
    }

    #[test]
    #[should_panic(expected = "unknown source")]
    fn dijkstra_rejects_bad_source() {
        dijkstra_sssp(&path3(), 9);
    }

    #[test]
    fn hop_limited_triangle() {
        let g = Graph::from_edges(3, &[(1, 2, 1), (2, 3, 1), (1, 3, 5)]).unwrap();
        assert_eq!(hop_limited_dist(&g, 1, 3, 1), 5);
        assert_eq!(hop_limited_dist(&g, 1, 3, 2), 2);
    }

    #[test]
    fn hop_limited_zero_budget() {
        let g = path3();
        assert_eq!(hop_limited_dist(&g, 1, 2, 0), INF);
        assert_eq!(hop_limited_dist(&g, 2, 2, 0), 0);
    }

    #[test]
    fn apsp_on_unit_path() {
        let m = apsp_oracle(&path3());
        assert_eq!(m.row(1), &[0, 1, 2]);
        assert_eq!(m.row(2), &[1, 0, 1]);
        assert_eq!(m.row(3), &[2, 1, 0]);
    }

    #[test]
    fn apsp_diagonal_zero_and_symmetric() {
        let g = gen_gnp_connected(64, 0.1, 8, 1);
        let m = apsp_oracle(&g);
        for v in g.nodes() {
            assert_eq!(m.dist(v, v), 0);
        }
        assert!(m.is_symmetric());
    }

    #[test]
    fn apsp_matches_saturated_hop_limit() {
        let g = gen_gnp_connected(32, 0.2, 6, 2);
        let m = apsp_oracle(&g);
        let h = (g.node_count() - 1) as u64;
        for u in g.nodes() {
            let row = hop_limited_from(&g, u, h);
            for v in g.nodes() {
                assert_eq!(m.dist(u, v), row[(v - 1) as usize]);
            }
        }
    }

    #[test]
    fn hop_limited_monotone_in_h() {
        let g = gen_gnp_connected(24, 0.15, 4, 3);
        for u in g.nodes() {
            let mut prev = hop_limited_from(&g, u, 0);
            for h in 1..g.node_count() as u64 {
                let cur = hop_limited_from(&g, u, h);
                for i in 0..cur.len() {
                    assert!(cur[i] <= prev[i]);
                }
                prev = cur;
            }
            assert_eq!(prev, dijkstra_sssp(&g, u));
        }
    }

    #[test]
    fn diameter_of_path_and_clique() {
        let p = gen_path(6, 1, 0);
        assert_eq!(diameter_oracle(&p, false), 5);
        let mut edges = alloc::vec::Vec::new();
        for u in 1..=5u32 {
            for v in u + 1..=5 {
                edges.push((u, v, 1));
            }
        }
        let k5 = Graph::from_edges(5, &edges).unwrap();
        assert_eq!(diameter_oracle(&k5, false), 1);
    }

    #[test]
    fn triangle_inequality_holds() {
        let g = gen_gnp_connected(40, 0.12, 7, 5);
        assert!(apsp_oracle(&g).satisfies_triangle_inequality());
    }
}
