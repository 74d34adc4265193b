//! Skeleton graphs: a random node sample connected by hop-limited shortest
//! paths, plus source representatives. Distances between sampled nodes are
//! preserved exactly (validated against the oracle), which is what lets the
//! clique layer solve the global problem on a much smaller graph.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::engine::{BitSized, Ctx, EngineError, NodeProgram, Session, Status};
use crate::graph::{dist_add, Graph, NodeId, Weight, INF};
use crate::oracle::{bfs_hops, dijkstra_sssp};
use crate::primitives::disseminate::{run_disseminate, WireItem};
use crate::primitives::PrimError;
use crate::randkit::{derive, sample_subset};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SkeletonError {
    Engine(EngineError),
    Primitive(PrimError),
    /// Sampling produced no members after bounded retries.
    EmptySkeleton,
    /// A source saw no skeleton node within h hops (xi too small).
    NoSkeletonInRange(NodeId),
}

impl fmt::Display for SkeletonError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SkeletonError::Engine(e) => write!(f, "{e}"),
            SkeletonError::Primitive(e) => write!(f, "{e}"),
            SkeletonError::EmptySkeleton => write!(f, "sampled skeleton is empty"),
            SkeletonError::NoSkeletonInRange(s) => {
                write!(f, "source {s} has no skeleton node within h hops")
            }
        }
    }
}

impl From<EngineError> for SkeletonError {
    fn from(e: EngineError) -> Self {
        SkeletonError::Engine(e)
    }
}

impl From<PrimError> for SkeletonError {
    fn from(e: PrimError) -> Self {
        SkeletonError::Primitive(e)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SkeletonParams {
    /// Trade-off exponent: sampling probability is `1 / n^(1-x)`.
    pub x: f64,
    /// Sampling constant in the edge radius `h = xi * n^(1-x) * ln n`.
    pub xi: f64,
}

impl SkeletonParams {
    pub fn new(x: f64) -> Self {
        SkeletonParams { x, xi: 16.0 }
    }

    pub fn with_xi(x: f64, xi: f64) -> Self {
        SkeletonParams { x, xi }
    }

    pub fn sampling_probability(&self, n: u32) -> f64 {
        libm::pow(n as f64, self.x - 1.0)
    }

    /// Edge hop radius, floored at 3 so tiny graphs stay usable and capped
    /// at n-1 where hop-limited distances saturate anyway.
    pub fn hop_radius(&self, n: u32) -> u64 {
        let nf = n as f64;
        let raw = libm::ceil(self.xi * libm::pow(nf, 1.0 - self.x) * libm::log(nf));
        let raw = if raw < 0.0 { 0 } else { raw as u64 };
        raw.max(3).min((n - 1) as u64)
    }
}

/// The sampled node set with its hop-limited distance knowledge. Each member
/// knows its incident edges; `dist_h[v-1][rank]` is `d_h(v, member[rank])`
/// as learned by node `v` itself during the flooding.
#[derive(Debug, Clone)]
pub struct Skeleton {
    pub x: f64,
    pub xi: f64,
    pub h: u64,
    pub members: Vec<NodeId>,
    pub member_flags: Vec<bool>,
    /// Edges {u, v} of the skeleton graph with their d_h weights, u < v.
    pub edges: Vec<(NodeId, NodeId, Weight)>,
    pub dist_h: Vec<Vec<u64>>,
}

impl Skeleton {
    pub fn rank_of(&self, v: NodeId) -> Option<usize> {
        self.members.binary_search(&v).ok()
    }

    pub fn is_member(&self, v: NodeId) -> bool {
        self.member_flags[(v - 1) as usize]
    }

    /// `d_h(v, s)` for a member `s`, as known at `v`.
    pub fn dist_to_member(&self, v: NodeId, s: NodeId) -> u64 {
        match self.rank_of(s) {
            Some(r) => self.dist_h[(v - 1) as usize][r],
            None => INF,
        }
    }

    /// Exact all-pairs distances of the skeleton graph itself (Dijkstra on
    /// the member graph; every node can do this once the edges are known).
    pub fn skeleton_apsp(&self) -> SkeletonDistances {
        let m = self.members.len();
        let mut adj: Vec<Vec<(usize, u64)>> = vec![Vec::new(); m];
        for &(u, v, w) in &self.edges {
            let ru = self.rank_of(u).expect("edge endpoint is a member");
            let rv = self.rank_of(v).expect("edge endpoint is a member");
            adj[ru].push((rv, w));
            adj[rv].push((ru, w));
        }
        let mut dist = vec![vec![INF; m]; m];
        for s in 0..m {
            let d = &mut dist[s];
            d[s] = 0;
            let mut heap = alloc::collections::BinaryHeap::new();
            heap.push(core::cmp::Reverse((0u64, s)));
            while let Some(core::cmp::Reverse((du, u))) = heap.pop() {
                if du > d[u] {
                    continue;
                }
                for &(v, w) in &adj[u] {
                    let nd = du + w;
                    if nd < d[v] {
                        d[v] = nd;
                        heap.push(core::cmp::Reverse((nd, v)));
                    }
                }
            }
        }
        SkeletonDistances {
            members: self.members.clone(),
            dist,
        }
    }
}

/// Distances among skeleton members, indexed by member rank.
#[derive(Debug, Clone)]
pub struct SkeletonDistances {
    pub members: Vec<NodeId>,
    pub dist: Vec<Vec<u64>>,
}

impl SkeletonDistances {
    pub fn by_rank(&self, a: usize, b: usize) -> u64 {
        self.dist[a][b]
    }
}

// ---------------------------------------------------------------------------
// Distributed h-round relaxation.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct DistMsg(pub Arc<Vec<(u32, u64)>>);

impl BitSized for DistMsg {
    fn bits(&self) -> u64 {
        self.0
            .iter()
            .map(|&(r, d)| (r as u64).bits() + d.bits())
            .sum()
    }
}

struct RelaxProgram {
    own_rank: Option<u32>,
    rounds: u64,
    dist: Vec<u64>,
    changed: Vec<(u32, u64)>,
}

impl NodeProgram for RelaxProgram {
    type Local = DistMsg;
    type Global = ();

    fn step(&mut self, ctx: &mut Ctx<'_, DistMsg, ()>) -> Status {
        // Relax arrivals: neighbor's distance plus the connecting edge.
        for (from, msg) in ctx.local_inbox {
            let nbs = ctx.neighbors();
            let w = nbs[nbs
                .binary_search_by_key(from, |&(x, _)| x)
                .expect("local messages arrive from neighbors")]
            .1;
            for &(rank, d) in msg.0.iter() {
                let cand = dist_add(d, w);
                let slot = &mut self.dist[rank as usize];
                if cand < *slot {
                    *slot = cand;
                    self.changed.push((rank, cand));
                }
            }
        }
        if ctx.round == 0 {
            if let Some(r) = self.own_rank {
                self.dist[r as usize] = 0;
                self.changed.push((r, 0));
            }
        }
        // Deduplicate (keep the best per rank) and forward improvements.
        if !self.changed.is_empty() && ctx.round < self.rounds {
            self.changed.sort_unstable();
            self.changed.dedup_by_key(|e| e.0);
            let payload = DistMsg(Arc::new(core::mem::take(&mut self.changed)));
            for &(nb, _) in ctx.neighbors() {
                ctx.send_local(nb, payload.clone());
            }
        } else {
            self.changed.clear();
        }
        if ctx.round >= self.rounds {
            Status::Done
        } else {
            Status::Running
        }
    }
}

/// Runs `rounds` synchronous relaxation rounds from the flagged origin
/// nodes; afterwards node `v` knows the `rounds`-hop-limited distance to
/// every origin (by origin rank). Exactly the oracle's `d_h` definition.
pub fn run_limited_relaxation(
    session: &mut Session<'_>,
    tag: &str,
    origins: &[NodeId],
    rounds: u64,
) -> Result<Vec<Vec<u64>>, EngineError> {
    let n = session.graph().node_count();
    let rank: BTreeMap<NodeId, u32> = origins
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, i as u32))
        .collect();
    let programs = (1..=n)
        .map(|v| RelaxProgram {
            own_rank: rank.get(&v).copied(),
            rounds,
            dist: vec![INF; origins.len()],
            changed: Vec::new(),
        })
        .collect();
    let out = session.run_phase(tag, programs)?;
    Ok(out.into_iter().map(|p| p.dist).collect())
}

// ---------------------------------------------------------------------------
// Skeleton construction.
// ---------------------------------------------------------------------------

/// Samples the skeleton set (forced nodes always join), then floods
/// truncated distance vectors for `h` rounds so every node learns its
/// `d_h` to nearby members and members learn their incident edges.
pub fn compute_skeleton(
    session: &mut Session<'_>,
    params: SkeletonParams,
    forced: &[NodeId],
) -> Result<Skeleton, SkeletonError> {
    let g = session.graph();
    let n = g.node_count();
    let p = params.sampling_probability(n);
    let h = params.hop_radius(n);

    let mut member_flags = Vec::new();
    for attempt in 0..8u64 {
        member_flags = sample_subset(n, p, derive(session.config().seed, 0x58E1 + attempt));
        for &s in forced {
            member_flags[(s - 1) as usize] = true;
        }
        if member_flags.iter().any(|&b| b) {
            break;
        }
    }
    let members: Vec<NodeId> = (1..=n).filter(|&v| member_flags[(v - 1) as usize]).collect();
    if members.is_empty() {
        return Err(SkeletonError::EmptySkeleton);
    }

    let dist_h = run_limited_relaxation(session, "skeleton", &members, h)?;

    // Members read off their incident skeleton edges: hop(u,v) <= h is
    // exactly d_h(u,v) < INF.
    let mut edges = Vec::new();
    for (a, &u) in members.iter().enumerate() {
        for (b, &v) in members.iter().enumerate().skip(a + 1) {
            let w = dist_h[(u - 1) as usize][b];
            debug_assert_eq!(w, dist_h[(v - 1) as usize][a]);
            if w != INF {
                edges.push((u, v, w));
            }
        }
    }

    Ok(Skeleton {
        x: params.x,
        xi: params.xi,
        h,
        members,
        member_flags,
        edges,
        dist_h,
    })
}

// ---------------------------------------------------------------------------
// Representatives.
// ---------------------------------------------------------------------------

/// Disseminated record: source `s` is represented by skeleton node `rep` at
/// hop-limited distance `dist`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct RepRecord {
    pub source: NodeId,
    pub rep: NodeId,
    pub dist: u64,
}

impl BitSized for RepRecord {
    fn bits(&self) -> u64 {
        (self.source as u64).bits() + (self.rep as u64).bits() + self.dist.bits()
    }
}

impl WireItem for RepRecord {
    fn key(&self) -> u64 {
        ((self.source as u64) << 32) | self.rep as u64
    }
}

#[derive(Debug, Clone)]
pub struct Representatives {
    /// source -> (representative, d_h(source, representative)).
    pub rep_of: BTreeMap<NodeId, (NodeId, u64)>,
    /// The records, public knowledge after dissemination.
    pub records: Vec<RepRecord>,
    /// Skeleton nodes tagged by at least one source; these act as sources
    /// inside the clique computation.
    pub clique_sources: Vec<NodeId>,
}

/// Every source tags its d_h-closest skeleton node (itself if sampled; ties
/// to the smallest ID) and the records are made public knowledge.
pub fn compute_representatives(
    session: &mut Session<'_>,
    skeleton: &Skeleton,
    sources: &[NodeId],
) -> Result<Representatives, SkeletonError> {
    let n = session.graph().node_count();
    let mut rep_of = BTreeMap::new();
    let mut items: Vec<Vec<RepRecord>> = vec![Vec::new(); n as usize];
    for &s in sources {
        let rec = if skeleton.is_member(s) {
            RepRecord {
                source: s,
                rep: s,
                dist: 0,
            }
        } else {
            let row = &skeleton.dist_h[(s - 1) as usize];
            let mut best: Option<(u64, NodeId)> = None;
            for (rank, &d) in row.iter().enumerate() {
                if d == INF {
                    continue;
                }
                let cand = (d, skeleton.members[rank]);
                if best.is_none() || cand < best.unwrap() {
                    best = Some(cand);
                }
            }
            let (dist, rep) = best.ok_or(SkeletonError::NoSkeletonInRange(s))?;
            RepRecord {
                source: s,
                rep,
                dist,
            }
        };
        rep_of.insert(s, (rec.rep, rec.dist));
        items[(s - 1) as usize].push(rec);
    }
    let stores = run_disseminate(session, items)?;
    let records = stores.into_iter().next().unwrap_or_default();
    let mut clique_sources: Vec<NodeId> = records.iter().map(|r| r.rep).collect();
    clique_sources.sort_unstable();
    clique_sources.dedup();
    Ok(Representatives {
        rep_of,
        records,
        clique_sources,
    })
}

// ---------------------------------------------------------------------------
// Oracle-backed validation.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default)]
pub struct SkeletonReport {
    pub violations: Vec<String>,
    pub member_count: usize,
    pub edge_count: usize,
    pub pairs_checked: usize,
    pub long_pairs_checked: usize,
}

impl SkeletonReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks (a) skeleton connectivity, (b) exact distance preservation on all
/// member pairs, and (c) for pairs at hop distance >= h, the existence of a
/// shortest path whose gaps between consecutive members stay below h hops.
pub fn validate_skeleton(g: &Graph, sk: &Skeleton) -> SkeletonReport {
    let mut report = SkeletonReport {
        member_count: sk.members.len(),
        edge_count: sk.edges.len(),
        ..Default::default()
    };
    let sd = sk.skeleton_apsp();

    // (a) connectivity: finite skeleton distance from the first member.
    if let Some(row) = sd.dist.first() {
        for (b, &d) in row.iter().enumerate() {
            if d == INF {
                report.violations.push(format!(
                    "skeleton disconnected: no path {} -> {}",
                    sd.members[0], sd.members[b]
                ));
            }
        }
    }

    // (b) d_S == d_G on member pairs.
    for (a, &u) in sk.members.iter().enumerate() {
        let dg = dijkstra_sssp(g, u);
        for (b, &v) in sk.members.iter().enumerate() {
            report.pairs_checked += 1;
            let want = dg[(v - 1) as usize];
            let got = sd.by_rank(a, b);
            if got != want {
                report
                    .violations
                    .push(format!("d_S({u},{v}) = {got} but d_G = {want}"));
            }
        }
    }

    // (c) long pairs: a shortest path exists whose inter-member hop gaps
    // are at most h. Dynamic program over the shortest-path DAG, keeping
    // the minimal achievable gap at every node (weights >= 1, so sorting by
    // distance is a topological order).
    for u in g.nodes() {
        let hops = bfs_hops(g, u);
        if hops.iter().all(|&t| t < sk.h) {
            continue;
        }
        let dist = dijkstra_sssp(g, u);
        let mut order: Vec<NodeId> = g.nodes().collect();
        order.sort_unstable_by_key(|&v| dist[(v - 1) as usize]);
        let mut gap = vec![u64::MAX; g.node_count() as usize];
        gap[(u - 1) as usize] = 0;
        for &v in &order {
            let gv = gap[(v - 1) as usize];
            if gv == u64::MAX {
                continue;
            }
            let gv = if sk.is_member(v) { 0 } else { gv };
            gap[(v - 1) as usize] = gv;
            if gv + 1 > sk.h {
                continue;
            }
            let dv = dist[(v - 1) as usize];
            for &(w, wt) in g.neighbors(v) {
                if dist[(w - 1) as usize] == dv + wt {
                    let slot = &mut gap[(w - 1) as usize];
                    if gv + 1 < *slot {
                        *slot = gv + 1;
                    }
                }
            }
        }
        for v in g.nodes() {
            if hops[(v - 1) as usize] >= sk.h {
                report.long_pairs_checked += 1;
                if gap[(v - 1) as usize] == u64::MAX {
                    report.violations.push(format!(
                        "no shortest {u}-{v} path with skeleton gaps <= h = {}",
                        sk.h
                    ));
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::SimConfig;
    use crate::gen::{gen_gnp_connected, gen_path};
    use crate::oracle::apsp_oracle;

    fn full_sampling(session: &mut Session<'_>) -> Skeleton {
        compute_skeleton(session, SkeletonParams::new(1.0), &[]).unwrap()
    }

    #[test]
    fn full_sampling_path_preserves_distances() {
        let g = gen_path(4, 1, 0);
        let mut s = Session::new(&g, SimConfig::for_n(4, 0)).unwrap();
        let sk = full_sampling(&mut s);
        assert_eq!(sk.members, alloc::vec![1, 2, 3, 4]);
        assert!(sk.h >= 3);
        let sd = sk.skeleton_apsp();
        let oracle = apsp_oracle(&g);
        for (a, &u) in sk.members.iter().enumerate() {
            for (b, &v) in sk.members.iter().enumerate() {
                assert_eq!(sd.by_rank(a, b), oracle.dist(u, v));
            }
        }
    }

    #[test]
    fn relaxation_matches_hop_limited_oracle() {
        let g = gen_gnp_connected(48, 0.08, 6, 3);
        let mut s = Session::new(&g, SimConfig::for_n(48, 3)).unwrap();
        let origins = alloc::vec![3u32, 17, 40];
        for h in [1u64, 2, 4] {
            let got = run_limited_relaxation(&mut s, "skeleton", &origins, h).unwrap();
            for (oi, &o) in origins.iter().enumerate() {
                let want = crate::oracle::hop_limited_from(&g, o, h);
                for v in g.nodes() {
                    assert_eq!(
                        got[(v - 1) as usize][oi],
                        want[(v - 1) as usize],
                        "h={h} origin={o} v={v}"
                    );
                }
            }
        }
    }

    #[test]
    fn representative_is_self_for_members() {
        let g = gen_path(6, 1, 0);
        let mut s = Session::new(&g, SimConfig::for_n(6, 1)).unwrap();
        let sk = full_sampling(&mut s);
        let reps = compute_representatives(&mut s, &sk, &[2, 5]).unwrap();
        assert_eq!(reps.rep_of[&2], (2, 0));
        assert_eq!(reps.rep_of[&5], (5, 0));
    }

    #[test]
    fn shared_representative_collapses_to_one_clique_source() {
        // Path of 9, single member at node 5; sources 1 and 9 both tag 5.
        let g = gen_path(9, 1, 0);
        let mut s = Session::new(&g, SimConfig::for_n(9, 1)).unwrap();
        let h = 8;
        let dist_h = run_limited_relaxation(&mut s, "skeleton", &[5], h).unwrap();
        let mut member_flags = alloc::vec![false; 9];
        member_flags[4] = true;
        let sk = Skeleton {
            x: 0.5,
            xi: 16.0,
            h,
            members: alloc::vec![5],
            member_flags,
            edges: alloc::vec::Vec::new(),
            dist_h,
        };
        let reps = compute_representatives(&mut s, &sk, &[1, 9]).unwrap();
        assert_eq!(reps.clique_sources, alloc::vec![5]);
        assert_eq!(reps.records.len(), 2);
    }

    #[test]
    fn rep_records_are_public_at_every_node() {
        let n = 128u32;
        let g = gen_gnp_connected(n, 0.06, 4, 7);
        let mut s = Session::new(&g, SimConfig::for_n(n, 7)).unwrap();
        let sk = compute_skeleton(&mut s, SkeletonParams::new(0.5), &[]).unwrap();
        let sources: Vec<NodeId> = alloc::vec![3, 40, 77, 120];
        let reps = compute_representatives(&mut s, &sk, &sources).unwrap();
        assert_eq!(reps.records.len(), sources.len());
        for &src in &sources {
            assert!(reps.rep_of.contains_key(&src));
        }
    }

    #[test]
    fn validator_clean_on_honest_skeleton() {
        let g = gen_gnp_connected(128, 0.05, 5, 9);
        let mut s = Session::new(&g, SimConfig::for_n(128, 9)).unwrap();
        let sk = compute_skeleton(&mut s, SkeletonParams::new(0.5), &[]).unwrap();
        let report = validate_skeleton(&g, &sk);
        assert!(report.is_clean(), "{:?}", report.violations);
    }

    #[test]
    fn validator_flags_tampered_skeleton() {
        let g = gen_path(8, 1, 0);
        let mut s = Session::new(&g, SimConfig::for_n(8, 2)).unwrap();
        let mut sk = full_sampling(&mut s);
        // Drop every edge touching node 4: member-pair distances break.
        sk.edges.retain(|&(u, v, _)| u != 4 && v != 4);
        let report = validate_skeleton(&g, &sk);
        assert!(!report.is_clean());
    }

    #[test]
    fn small_xi_engages_long_pair_check() {
        let g = gen_path(32, 1, 0);
        let mut s = Session::new(&g, SimConfig::for_n(32, 4)).unwrap();
        // Tiny xi forces h below the path length; full sampling keeps the
        // gap condition satisfiable.
        let sk = compute_skeleton(&mut s, SkeletonParams::with_xi(1.0, 0.001), &[]).unwrap();
        assert!(sk.h < 31);
        let report = validate_skeleton(&g, &sk);
        assert!(report.long_pairs_checked > 0);
        assert!(report.is_clean(), "{:?}", report.violations);
    }
}
