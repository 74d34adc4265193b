//! Exact all-pairs shortest paths: full local exploration to depth h, a
//! public skeleton, one token-routing instance carrying a connector record
//! from every node to every skeleton member, and a final label flood. The
//! output is exact on every pair.

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::engine::{BitSized, EngineError, Session};
use crate::graph::{dist_add, NodeId, INF};
use crate::primitives::disseminate::{run_disseminate, WireItem};
use crate::primitives::PrimError;
use crate::randkit::{derive, sample_subset};
use crate::routing::{
    prepare_routing, token_routing, Label, RoutingError, RoutingInstance, Token,
};
use crate::skeleton::{run_limited_relaxation, Skeleton, SkeletonParams};
use crate::spsim::run_vector_flood;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ApspError {
    Engine(EngineError),
    Routing(RoutingError),
    EmptySkeleton,
    /// A skeleton member within range never delivered its label vector.
    MissingLabels(NodeId),
}

impl fmt::Display for ApspError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ApspError::Engine(e) => write!(f, "{e}"),
            ApspError::Routing(e) => write!(f, "{e}"),
            ApspError::EmptySkeleton => write!(f, "sampled skeleton is empty"),
            ApspError::MissingLabels(v) => write!(f, "no label vector from member {v}"),
        }
    }
}

impl From<EngineError> for ApspError {
    fn from(e: EngineError) -> Self {
        ApspError::Engine(e)
    }
}

impl From<RoutingError> for ApspError {
    fn from(e: RoutingError) -> Self {
        ApspError::Routing(e)
    }
}

impl From<PrimError> for ApspError {
    fn from(e: PrimError) -> Self {
        ApspError::Routing(RoutingError::Primitive(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct EdgeItem {
    a: u16,
    b: u16,
    w: u64,
}

impl BitSized for EdgeItem {
    fn bits(&self) -> u64 {
        (self.a as u64).bits() + (self.b as u64).bits() + self.w.bits()
    }
}

impl WireItem for EdgeItem {
    fn key(&self) -> u64 {
        ((self.a as u64) << 48) | ((self.b as u64) << 32) | (self.w & 0xFFFF_FFFF)
    }
}

// Connector payload: hop-limited distance to the connector plus the
// connector's member rank.
const CONN_RANK_BITS: u32 = 16;

fn encode_connector(dist: u64, rank: usize) -> u64 {
    debug_assert!(rank < 1 << CONN_RANK_BITS);
    (dist << CONN_RANK_BITS) | rank as u64
}

fn decode_connector(payload: u64) -> (u64, usize) {
    (
        payload >> CONN_RANK_BITS,
        (payload & ((1 << CONN_RANK_BITS) - 1)) as usize,
    )
}

#[derive(Debug, Clone)]
pub struct ApspResult {
    /// `dist[u-1][v-1]` is the exact distance computed at node `u`.
    pub dist: Vec<Vec<u64>>,
    pub h: u64,
    pub x: f64,
    pub skeleton_size: usize,
    pub t_b: u64,
}

impl ApspResult {
    pub fn get(&self, u: NodeId, v: NodeId) -> u64 {
        self.dist[(u - 1) as usize][(v - 1) as usize]
    }
}

/// The exact all-pairs pipeline at the square-root trade-off point.
pub fn hybrid_apsp(session: &mut Session<'_>, xi: f64) -> Result<ApspResult, ApspError> {
    let n = session.graph().node_count();
    let start_round = session.rounds_elapsed();
    let params = SkeletonParams::with_xi(0.5, xi);
    let p = params.sampling_probability(n);
    let h = params.hop_radius(n);

    // Sample the skeleton members (bounded retries against an empty draw).
    let mut member_flags = Vec::new();
    for attempt in 0..8u64 {
        member_flags = sample_subset(n, p, derive(session.config().seed, 0xA9 + attempt));
        if member_flags.iter().any(|&b| b) {
            break;
        }
    }
    let members: Vec<NodeId> = (1..=n).filter(|&v| member_flags[(v - 1) as usize]).collect();
    if members.is_empty() {
        return Err(ApspError::EmptySkeleton);
    }
    let m = members.len();

    // Full local exploration: h synchronous relaxation rounds with every
    // node as an origin. Afterwards full[v][u] = d_h(v, u+1).
    let all: Vec<NodeId> = (1..=n).collect();
    let full = run_limited_relaxation(session, "skeleton", &all, h)?;

    // Assemble the skeleton from the member columns and make its edges
    // public knowledge (each edge announced by its smaller endpoint).
    let dist_h: Vec<Vec<u64>> = full
        .iter()
        .map(|row| members.iter().map(|&s| row[(s - 1) as usize]).collect())
        .collect();
    let mut edges = Vec::new();
    for (a, &u) in members.iter().enumerate() {
        for (b, &v) in members.iter().enumerate().skip(a + 1) {
            let w = dist_h[(u - 1) as usize][b];
            if w != INF {
                edges.push((u, v, w));
            }
        }
    }
    let sk = Skeleton {
        x: params.x,
        xi: params.xi,
        h,
        members: members.clone(),
        member_flags,
        edges,
        dist_h,
    };
    let mut items: Vec<Vec<EdgeItem>> = vec![Vec::new(); n as usize];
    for &(u, v, w) in &sk.edges {
        let a = sk.rank_of(u).unwrap() as u16;
        let b = sk.rank_of(v).unwrap() as u16;
        items[(u - 1) as usize].push(EdgeItem { a, b, w });
    }
    run_disseminate(session, items)?;

    // Everyone can now solve the skeleton locally (it is public), and each
    // node picks its connector towards every member: the in-range member
    // minimizing d_h(v, u) + d_S(u, t).
    let sd = sk.skeleton_apsp();
    let mut member_dist = vec![vec![INF; m]; n as usize];
    let mut connector = vec![vec![0usize; m]; n as usize];
    for v in 1..=n {
        let vi = (v - 1) as usize;
        let row = &sk.dist_h[vi];
        let in_range: Vec<(usize, u64)> = row
            .iter()
            .enumerate()
            .filter(|&(_, &d)| d != INF)
            .map(|(u, &d)| (u, d))
            .collect();
        for t in 0..m {
            let mut best = (INF, 0usize);
            for &(u, dh) in &in_range {
                let cand = dist_add(dh, sd.by_rank(u, t));
                if cand < best.0 {
                    best = (cand, u);
                }
            }
            member_dist[vi][t] = best.0;
            connector[vi][t] = best.1;
        }
    }

    // One token per (node, member): the connector and the distance to it.
    let mut tokens: BTreeMap<NodeId, Vec<Token>> = BTreeMap::new();
    for v in 1..=n {
        let vi = (v - 1) as usize;
        let list: Vec<Token> = (0..m)
            .map(|t| {
                let conn = connector[vi][t];
                let dh = sk.dist_h[vi][conn];
                Token {
                    label: Label {
                        sender: v,
                        receiver: members[t],
                        index: 0,
                    },
                    payload: encode_connector(if dh == INF { 0 } else { dh }, conn),
                }
            })
            .collect();
        tokens.insert(v, list);
    }
    let inst = RoutingInstance::new(1.0, p, m as u32, n, tokens)?;
    let s_flags = vec![true; n as usize];
    let setup = prepare_routing(
        session,
        &s_flags,
        &sk.member_flags,
        m as u32,
        n,
        1.0,
        p,
        1,
    )?;
    let outcome = token_routing(session, &inst, &setup)?;

    // Members turn the received connector records into full label vectors
    // d(s, .), then flood them h hops out.
    let mut vectors: Vec<Option<Arc<Vec<u64>>>> = vec![None; n as usize];
    for (t, &s) in members.iter().enumerate() {
        let mut labels = vec![INF; n as usize];
        labels[(s - 1) as usize] = 0;
        if let Some(delivered) = outcome.delivered.get(&s) {
            for tok in delivered {
                let (dh, conn) = decode_connector(tok.payload);
                let via = dist_add(sd.by_rank(t, conn), dh);
                let vi = (tok.label.sender - 1) as usize;
                if via < labels[vi] {
                    labels[vi] = via;
                }
            }
        }
        vectors[(s - 1) as usize] = Some(Arc::new(labels));
    }
    let heard = run_vector_flood(session, "labels", vectors, h.max(1) as u32)?;

    // Final combine: the direct h-limited value against every in-range
    // member's label vector.
    let mut dist = vec![vec![INF; n as usize]; n as usize];
    for u in 1..=n {
        let ui = (u - 1) as usize;
        let mut local_members: Vec<(u64, &Arc<Vec<u64>>)> = Vec::new();
        for (t, &s) in members.iter().enumerate() {
            let dh = sk.dist_h[ui][t];
            if dh == INF {
                continue;
            }
            let labels = heard[ui].get(&s).ok_or(ApspError::MissingLabels(s))?;
            local_members.push((dh, labels));
        }
        for v in 1..=n {
            let vi = (v - 1) as usize;
            let mut best = full[ui][vi];
            for &(dh, labels) in &local_members {
                best = best.min(dist_add(dh, labels[vi]));
            }
            dist[ui][vi] = best;
        }
    }

    Ok(ApspResult {
        dist,
        h,
        x: params.x,
        skeleton_size: m,
        t_b: session.rounds_elapsed() - start_round,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::SimConfig;
    use crate::gen::{gen_gnp_connected, gen_path};
    use crate::oracle::apsp_oracle;

    #[test]
    fn exact_on_unit_path() {
        let g = gen_path(3, 1, 0);
        let mut s = Session::new(&g, SimConfig::for_n(3, 2)).unwrap();
        let got = hybrid_apsp(&mut s, 16.0).unwrap();
        let want = apsp_oracle(&g);
        for u in 1..=3u32 {
            for v in 1..=3u32 {
                assert_eq!(got.get(u, v), want.dist(u, v));
            }
        }
    }

    #[test]
    fn diagonal_is_zero() {
        let g = gen_gnp_connected(48, 0.1, 5, 4);
        let mut s = Session::new(&g, SimConfig::for_n(48, 4)).unwrap();
        let got = hybrid_apsp(&mut s, 16.0).unwrap();
        for v in 1..=48u32 {
            assert_eq!(got.get(v, v), 0);
        }
    }

    #[test]
    fn exact_on_random_weighted_graphs() {
        for seed in 0..3u64 {
            let n = 96u32;
            let g = gen_gnp_connected(n, 0.06, 8, seed);
            let mut s = Session::new(&g, SimConfig::for_n(n, seed)).unwrap();
            let got = hybrid_apsp(&mut s, 16.0).unwrap();
            let want = apsp_oracle(&g);
            for u in 1..=n {
                for v in 1..=n {
                    assert_eq!(got.get(u, v), want.dist(u, v), "pair ({u},{v}) seed {seed}");
                }
            }
            assert_eq!(s.metrics().global_dropped, 0);
        }
    }

    #[test]
    fn exact_with_small_radius() {
        // Small xi keeps h below saturation so the skeleton route carries
        // real weight; exactness must still hold.
        let n = 128u32;
        let g = gen_gnp_connected(n, 0.05, 6, 11);
        let mut s = Session::new(&g, SimConfig::for_n(n, 11)).unwrap();
        let got = hybrid_apsp(&mut s, 1.0).unwrap();
        assert!(got.h < (n - 1) as u64);
        let want = apsp_oracle(&g);
        for u in 1..=n {
            for v in 1..=n {
                assert_eq!(got.get(u, v), want.dist(u, v), "pair ({u},{v})");
            }
        }
    }
}
