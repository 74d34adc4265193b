//! Shortest-path framework: solve the source problem on the skeleton with a
//! clique program, then extend the result to the whole graph through the
//! local network. Sources that were not sampled are stood in for by their
//! closest skeleton node, and every node finally combines the skeleton
//! estimates with its own exact short-range exploration.

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::clique::{
    clique_simulation, prepare_clique, x_tradeoff, CliqueAlgoSpec, CliqueError, CliqueInfo,
    CliqueProgram, CliqueRun, FullExchangeApsp, BellmanFordSssp,
};
use crate::engine::{BitSized, Ctx, EngineError, NodeProgram, Session, Status};
use crate::graph::{dist_add, NodeId, INF};
use crate::skeleton::{
    compute_representatives, compute_skeleton, run_limited_relaxation, SkeletonError,
    SkeletonParams,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpSimError {
    Engine(EngineError),
    Skeleton(SkeletonError),
    Clique(CliqueError),
    TooManySources { got: usize, limit: usize },
    /// A required public record (representative or member estimate) was
    /// absent during the combine step.
    MissingRecord(NodeId),
}

impl fmt::Display for SpSimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpSimError::Engine(e) => write!(f, "{e}"),
            SpSimError::Skeleton(e) => write!(f, "{e}"),
            SpSimError::Clique(e) => write!(f, "{e}"),
            SpSimError::TooManySources { got, limit } => {
                write!(f, "{got} sources exceed the clique program's limit {limit}")
            }
            SpSimError::MissingRecord(v) => write!(f, "missing public record for node {v}"),
        }
    }
}

impl From<EngineError> for SpSimError {
    fn from(e: EngineError) -> Self {
        SpSimError::Engine(e)
    }
}

impl From<SkeletonError> for SpSimError {
    fn from(e: SkeletonError) -> Self {
        SpSimError::Skeleton(e)
    }
}

impl From<CliqueError> for SpSimError {
    fn from(e: CliqueError) -> Self {
        SpSimError::Clique(e)
    }
}

/// Clique programs usable inside the framework: constructible from the
/// public clique view and able to report distance estimates to the clique
/// sources afterwards.
pub trait CliqueSpSolver: CliqueProgram + Sized {
    fn build(info: &CliqueInfo, rank: usize) -> Self;
    /// Estimates from this member to each of `source_ranks`.
    fn source_estimates(&self, source_ranks: &[usize]) -> Vec<u64>;
}

impl CliqueSpSolver for FullExchangeApsp {
    fn build(info: &CliqueInfo, rank: usize) -> Self {
        FullExchangeApsp::new(info, rank)
    }

    fn source_estimates(&self, source_ranks: &[usize]) -> Vec<u64> {
        source_ranks
            .iter()
            .map(|&s| self.table()[s][self.rank()])
            .collect()
    }
}

impl CliqueSpSolver for BellmanFordSssp {
    fn build(info: &CliqueInfo, rank: usize) -> Self {
        let src = *info
            .source_ranks
            .first()
            .expect("single-source program needs a source rank");
        BellmanFordSssp::new(info, rank, src)
    }

    fn source_estimates(&self, source_ranks: &[usize]) -> Vec<u64> {
        debug_assert_eq!(source_ranks.len(), 1);
        vec![self.distance()]
    }
}

/// Eq-style combine: minimum of the local exploration value and, over the
/// in-range skeleton candidates, `d_h(v,u) + est(u, r_s) + d_h(r_s, s)`.
pub fn combine_estimate(local: u64, candidates: &[(u64, u64)], rep_dist: u64) -> u64 {
    let mut best = local;
    for &(via, est) in candidates {
        best = best.min(dist_add(dist_add(via, est), rep_dist));
    }
    best
}

/// Per-node estimates to every source, plus run diagnostics.
#[derive(Debug, Clone)]
pub struct DistanceEstimateStore {
    pub sources: Vec<NodeId>,
    /// `estimates[v-1][i]` is the node-v estimate to `sources[i]`.
    pub estimates: Vec<Vec<u64>>,
    pub h: u64,
    pub eta: u32,
    pub x: f64,
    pub skeleton_size: usize,
    pub cc_rounds: u64,
    /// Total simulated rounds the pipeline used.
    pub t_b: u64,
}

impl DistanceEstimateStore {
    pub fn estimate(&self, v: NodeId, source_idx: usize) -> u64 {
        self.estimates[(v - 1) as usize][source_idx]
    }
}

// ---------------------------------------------------------------------------
// Result spread: members flood their estimate vectors eta*h hops out.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct VecRec {
    pub origin: NodeId,
    pub ttl: u32,
    pub data: Arc<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct VecFloodMsg(pub Arc<Vec<VecRec>>);

impl BitSized for VecFloodMsg {
    fn bits(&self) -> u64 {
        self.0
            .iter()
            .map(|r| 64 + r.data.len() as u64 * 64)
            .sum()
    }
}

struct VecFloodProgram {
    own: Option<Arc<Vec<u64>>>,
    depth: u32,
    heard: BTreeMap<NodeId, Arc<Vec<u64>>>,
}

impl NodeProgram for VecFloodProgram {
    type Local = VecFloodMsg;
    type Global = ();

    fn step(&mut self, ctx: &mut Ctx<'_, VecFloodMsg, ()>) -> Status {
        let mut fresh: Vec<VecRec> = Vec::new();
        for (_, msg) in ctx.local_inbox {
            for rec in msg.0.iter() {
                if let alloc::collections::btree_map::Entry::Vacant(e) =
                    self.heard.entry(rec.origin)
                {
                    e.insert(rec.data.clone());
                    if rec.ttl > 1 {
                        fresh.push(VecRec {
                            origin: rec.origin,
                            ttl: rec.ttl - 1,
                            data: rec.data.clone(),
                        });
                    }
                }
            }
        }
        if ctx.round == 0 {
            if let Some(data) = self.own.take() {
                self.heard.insert(ctx.node, data.clone());
                fresh.push(VecRec {
                    origin: ctx.node,
                    ttl: self.depth,
                    data,
                });
            }
        }
        if !fresh.is_empty() {
            let payload = VecFloodMsg(Arc::new(fresh));
            for &(nb, _) in ctx.neighbors() {
                ctx.send_local(nb, payload.clone());
            }
        }
        if ctx.round >= self.depth as u64 {
            Status::Done
        } else {
            Status::Running
        }
    }
}

/// Floods one vector from each origin to the given hop depth; returns what
/// every node heard.
pub fn run_vector_flood(
    session: &mut Session<'_>,
    tag: &str,
    vectors: Vec<Option<Arc<Vec<u64>>>>,
    depth: u32,
) -> Result<Vec<BTreeMap<NodeId, Arc<Vec<u64>>>>, EngineError> {
    let n = session.graph().node_count();
    assert_eq!(vectors.len(), n as usize);
    let mut vectors = vectors;
    let programs = (1..=n)
        .map(|v| VecFloodProgram {
            own: core::mem::take(&mut vectors[(v - 1) as usize]),
            depth,
            heard: BTreeMap::new(),
        })
        .collect();
    let out = session.run_phase(tag, programs)?;
    Ok(out.into_iter().map(|p| p.heard).collect())
}

// ---------------------------------------------------------------------------
// The framework pipeline.
// ---------------------------------------------------------------------------

/// Source-count limit implied by the clique program's source exponent.
pub fn source_limit(n: u32, x: f64, gamma_src: f64) -> usize {
    if gamma_src >= 1.0 {
        usize::MAX
    } else if gamma_src <= 0.0 {
        1
    } else {
        libm::ceil(4.0 * libm::pow(n as f64, x * gamma_src)) as usize
    }
}

/// Runs the whole pipeline with the given clique solver. `eta` scales the
/// final local exploration (estimates are exact within `eta * h` hops).
pub fn sp_simulation<P: CliqueSpSolver>(
    session: &mut Session<'_>,
    spec: CliqueAlgoSpec,
    sources: &[NodeId],
    eta: u32,
    xi: f64,
) -> Result<DistanceEstimateStore, SpSimError> {
    assert!(!sources.is_empty(), "need at least one source");
    assert!(eta >= 1);
    let n = session.graph().node_count();
    let start_round = session.rounds_elapsed();
    let x = x_tradeoff(spec.delta);
    let limit = source_limit(n, x, spec.gamma_src);
    if sources.len() > limit {
        return Err(SpSimError::TooManySources {
            got: sources.len(),
            limit,
        });
    }

    // Skeleton; a lone source with gamma = 0 joins it outright.
    let forced: &[NodeId] = if spec.gamma_src <= 0.0 { sources } else { &[] };
    let sk = compute_skeleton(session, SkeletonParams::with_xi(x, xi), forced)?;

    // Representatives for all sources, public knowledge afterwards.
    let reps = compute_representatives(session, &sk, sources)?;

    // Clique computation on the skeleton.
    let info = CliqueInfo::from_skeleton(&sk, &reps.clique_sources);
    let setup = prepare_clique(session, &sk)?;
    let mut programs: Vec<P> = (0..info.size()).map(|r| P::build(&info, r)).collect();
    let CliqueRun { cc_rounds } = clique_simulation(
        session,
        &sk,
        &setup,
        &mut programs,
        16 * (info.size() as u64 + 2) * (info.size() as u64 + 2) + 64,
    )?;

    // Spread the member estimate vectors eta*h hops out.
    let depth = (eta as u64 * sk.h).max(1) as u32;
    let mut vectors: Vec<Option<Arc<Vec<u64>>>> = vec![None; n as usize];
    for (rank, prog) in programs.iter().enumerate() {
        let member = sk.members[rank];
        vectors[(member - 1) as usize] =
            Some(Arc::new(prog.source_estimates(&info.source_ranks)));
    }
    let heard = run_vector_flood(session, "spread", vectors, depth)?;

    // Exact local exploration to the sources, eta*h hops.
    let local = run_limited_relaxation(session, "explore", sources, depth as u64)?;

    // Combine. Candidates for node v are the members within h hops (their
    // vectors certainly reached v since eta >= 1).
    let mut estimates = vec![vec![INF; sources.len()]; n as usize];
    for v in 1..=n {
        let vi = (v - 1) as usize;
        let row = &sk.dist_h[vi];
        let mut candidates: Vec<(u64, &Arc<Vec<u64>>)> = Vec::new();
        for (rank, &dh) in row.iter().enumerate() {
            if dh == INF {
                continue;
            }
            let member = sk.members[rank];
            let est = heard[vi]
                .get(&member)
                .ok_or(SpSimError::MissingRecord(member))?;
            candidates.push((dh, est));
        }
        for (si, &s) in sources.iter().enumerate() {
            let &(rep, rep_dist) = reps
                .rep_of
                .get(&s)
                .ok_or(SpSimError::MissingRecord(s))?;
            let rep_rank = sk.rank_of(rep).ok_or(SpSimError::MissingRecord(rep))?;
            let src_idx = info
                .source_ranks
                .binary_search(&rep_rank)
                .map_err(|_| SpSimError::MissingRecord(rep))?;
            let mut best = local[vi][si];
            for &(via, est) in &candidates {
                best = best.min(dist_add(dist_add(via, est[src_idx]), rep_dist));
            }
            estimates[vi][si] = best;
        }
    }

    Ok(DistanceEstimateStore {
        sources: sources.to_vec(),
        estimates,
        h: sk.h,
        eta,
        x,
        skeleton_size: sk.members.len(),
        cc_rounds,
        t_b: session.rounds_elapsed() - start_round,
    })
}

/// Exact single-source distances via the framework: the source joins the
/// skeleton and the clique program is the exact relaxation.
pub fn hybrid_sssp(
    session: &mut Session<'_>,
    source: NodeId,
    xi: f64,
) -> Result<DistanceEstimateStore, SpSimError> {
    sp_simulation::<BellmanFordSssp>(session, CliqueAlgoSpec::exact_sssp(), &[source], 1, xi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::SimConfig;
    use crate::gen::{gen_gnp_connected, gen_path};
    use crate::oracle::{bfs_hops, dijkstra_sssp};

    #[test]
    fn combine_prefers_local_when_smaller() {
        assert_eq!(combine_estimate(4, &[(2, 7)], 1), 4);
        assert_eq!(combine_estimate(INF, &[(2, 7), (3, 5)], 1), 9);
        assert_eq!(combine_estimate(INF, &[], 1), INF);
    }

    #[test]
    fn x_rule_values() {
        assert_eq!(x_tradeoff(0.0), 2.0 / 3.0);
        assert_eq!(x_tradeoff(1.0), 0.4);
    }

    #[test]
    fn sssp_exact_on_path() {
        let g = gen_path(16, 1, 0);
        let mut s = Session::new(&g, SimConfig::for_n(16, 5)).unwrap();
        let store = hybrid_sssp(&mut s, 1, 16.0).unwrap();
        for v in 1..=16u32 {
            assert_eq!(store.estimate(v, 0), (v - 1) as u64);
        }
    }

    #[test]
    fn sssp_matches_oracle_on_random_graphs() {
        for seed in 0..3u64 {
            let n = 128u32;
            let g = gen_gnp_connected(n, 0.05, 8, seed);
            let mut s = Session::new(&g, SimConfig::for_n(n, seed)).unwrap();
            let src = 1 + (seed as u32 * 37) % n;
            let store = hybrid_sssp(&mut s, src, 16.0).unwrap();
            let want = dijkstra_sssp(&g, src);
            for v in 1..=n {
                assert_eq!(store.estimate(v, 0), want[(v - 1) as usize], "v={v}");
            }
            assert_eq!(s.metrics().global_dropped, 0);
        }
    }

    #[test]
    fn ksp_exact_reference_respects_ratio_contract() {
        let n = 128u32;
        let g = gen_gnp_connected(n, 0.05, 8, 7);
        let mut s = Session::new(&g, SimConfig::for_n(n, 7)).unwrap();
        let sources = alloc::vec![5u32, 60, 100, 17];
        let store = sp_simulation::<FullExchangeApsp>(
            &mut s,
            CliqueAlgoSpec::exact_apsp(),
            &sources,
            1,
            16.0,
        )
        .unwrap();
        for (si, &src) in sources.iter().enumerate() {
            let want = dijkstra_sssp(&g, src);
            let hops = bfs_hops(&g, src);
            for v in 1..=n {
                let est = store.estimate(v, si);
                let d = want[(v - 1) as usize];
                assert!(est >= d, "underestimate at v={v}");
                assert!(est as f64 <= 3.0 * d as f64 + 1e-9, "ratio at v={v}");
                if hops[(v - 1) as usize] <= store.eta as u64 * store.h {
                    assert_eq!(est, d, "exactness inside eta*h at v={v}");
                }
            }
        }
    }

    #[test]
    fn small_xi_still_meets_bounds() {
        // Forces a short exploration radius so the skeleton detour path is
        // actually exercised.
        let n = 96u32;
        let g = gen_gnp_connected(n, 0.08, 6, 3);
        let mut s = Session::new(&g, SimConfig::for_n(n, 3)).unwrap();
        let sources = alloc::vec![2u32, 71];
        let store = sp_simulation::<FullExchangeApsp>(
            &mut s,
            CliqueAlgoSpec::exact_apsp(),
            &sources,
            1,
            0.2,
        )
        .unwrap();
        assert!(store.h < (n - 1) as u64);
        for (si, &src) in sources.iter().enumerate() {
            let want = dijkstra_sssp(&g, src);
            let hops = bfs_hops(&g, src);
            for v in 1..=n {
                let est = store.estimate(v, si);
                let d = want[(v - 1) as usize];
                assert!(est >= d);
                assert!(est as f64 <= 3.0 * d as f64 + 1e-9);
                if hops[(v - 1) as usize] <= store.eta as u64 * store.h {
                    assert_eq!(est, d);
                }
            }
        }
    }

    #[test]
    fn too_many_sources_for_single_source_program() {
        let g = gen_path(8, 1, 0);
        let mut s = Session::new(&g, SimConfig::for_n(8, 0)).unwrap();
        let err = sp_simulation::<BellmanFordSssp>(
            &mut s,
            CliqueAlgoSpec::exact_sssp(),
            &[1, 2],
            1,
            16.0,
        )
        .unwrap_err();
        assert!(matches!(err, SpSimError::TooManySources { got: 2, limit: 1 }));
    }
}
