//! Clustering around a ruling set and helper-set construction on top of it.
//!
//! Every node joins the cluster of its hop-closest ruler (ties to the
//! smallest ID), learns its cluster's full membership by cluster-scoped
//! flooding, and then the helper sets are a deterministic function of
//! (cluster composition, shared seed): node `x` joins `H_w` for `w` in its
//! own cluster with probability `q = min(2 mu / |C|, 1)`, topped up from the
//! smallest cluster IDs whenever the random joins fall short of `mu`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::engine::{BitSized, Ctx, NodeProgram, Session, Status};
use crate::graph::{Graph, NodeId};
use crate::oracle::bfs_hops;
use crate::primitives::ruling::{run_ruling_set, RulingSet};
use crate::primitives::PrimError;
use crate::randkit::{bernoulli, derive};

const JOIN_SALT: u64 = 0x4A01_4E00;

/// Per-cluster join probability from the construction.
pub fn join_probability(mu: u32, cluster_size: usize) -> f64 {
    if cluster_size == 0 {
        return 1.0;
    }
    let q = 2.0 * mu as f64 / cluster_size as f64;
    if q > 1.0 {
        1.0
    } else {
        q
    }
}

/// Helper sets for a marked node set `W`, plus the cluster views each node
/// holds after construction.
#[derive(Debug, Clone)]
pub struct HelperFamily {
    pub mu: u32,
    /// Covering radius of the underlying ruling set; helper distance is
    /// bounded by twice this. Zero for the identity family.
    pub beta: u32,
    /// `mu == 1` fast path: every `w` is its own single helper and no
    /// clustering is needed.
    pub identity: bool,
    pub cluster_of: Vec<NodeId>,
    /// Ruler -> sorted (member, member in W) view shared by that cluster.
    pub clusters: BTreeMap<NodeId, Arc<Vec<(NodeId, bool)>>>,
    /// w -> sorted helper set H_w.
    pub helpers: BTreeMap<NodeId, Vec<NodeId>>,
    /// Per node: sorted list of the w whose helper set it belongs to.
    pub helping: Vec<Vec<NodeId>>,
}

impl HelperFamily {
    pub fn helper_set(&self, w: NodeId) -> &[NodeId] {
        self.helpers.get(&w).map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// Upper bound on hop(w, x) for x in H_w.
    pub fn reach(&self) -> u32 {
        2 * self.beta
    }
}

/// The deterministic join rule shared by every member of one cluster.
/// Returns `w -> H_w` for the `W`-members of this cluster.
pub fn cluster_joins(
    members: &[(NodeId, bool)],
    mu: u32,
    seed: u64,
) -> BTreeMap<NodeId, Vec<NodeId>> {
    let q = join_probability(mu, members.len());
    let mut out = BTreeMap::new();
    for &(w, in_w) in members {
        if !in_w {
            continue;
        }
        let w_seed = derive(seed, JOIN_SALT ^ w as u64);
        let mut set: Vec<NodeId> = members
            .iter()
            .filter(|&&(x, _)| bernoulli(w_seed, x as u64, q))
            .map(|&(x, _)| x)
            .collect();
        // Desk-scale calibration: the Chernoff slack behind |H_w| >= mu is
        // too thin at these n, so deficits are topped up deterministically
        // from the smallest cluster IDs.
        if set.len() < mu as usize {
            for &(x, _) in members {
                if set.len() >= mu as usize {
                    break;
                }
                if !set.contains(&x) {
                    set.push(x);
                }
            }
            set.sort_unstable();
        }
        out.insert(w, set);
    }
    out
}

// ---------------------------------------------------------------------------
// Cluster assignment program.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct RulerRec {
    pub ruler: NodeId,
    pub ttl: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ClusterMsg(pub Arc<Vec<RulerRec>>);

impl BitSized for ClusterMsg {
    fn bits(&self) -> u64 {
        self.0.len() as u64 * 64
    }
}

struct ClusterProgram {
    is_ruler: bool,
    beta: u32,
    seen: BTreeSet<NodeId>,
    assigned: Option<NodeId>,
    hop: u64,
}

impl NodeProgram for ClusterProgram {
    type Local = ClusterMsg;
    type Global = ();

    fn step(&mut self, ctx: &mut Ctx<'_, ClusterMsg, ()>) -> Status {
        let mut fresh: Vec<RulerRec> = Vec::new();
        let mut best_new: Option<NodeId> = None;
        for (_, msg) in ctx.local_inbox {
            for rec in msg.0.iter() {
                if self.seen.insert(rec.ruler) {
                    if rec.ttl > 1 {
                        fresh.push(RulerRec {
                            ruler: rec.ruler,
                            ttl: rec.ttl - 1,
                        });
                    }
                    best_new = Some(best_new.map_or(rec.ruler, |b: NodeId| b.min(rec.ruler)));
                }
            }
        }
        if self.assigned.is_none() {
            if let Some(r) = best_new {
                // First round with any arrival: hop-closest, smallest ID.
                self.assigned = Some(r);
                self.hop = ctx.round;
            }
        }
        if ctx.round == 0 && self.is_ruler {
            self.assigned = Some(ctx.node);
            self.hop = 0;
            self.seen.insert(ctx.node);
            fresh.push(RulerRec {
                ruler: ctx.node,
                ttl: self.beta,
            });
        }
        if !fresh.is_empty() {
            let payload = ClusterMsg(Arc::new(fresh));
            for &(nb, _) in ctx.neighbors() {
                ctx.send_local(nb, payload.clone());
            }
        }
        if ctx.round >= self.beta as u64 {
            Status::Done
        } else {
            Status::Running
        }
    }
}

/// Assigns every node to its hop-closest ruler (ties by smallest ruler ID).
pub fn run_clusters(
    session: &mut Session<'_>,
    rs: &RulingSet,
) -> Result<Vec<NodeId>, PrimError> {
    let n = session.graph().node_count();
    let programs = (1..=n)
        .map(|v| ClusterProgram {
            is_ruler: rs.member[(v - 1) as usize],
            beta: rs.beta,
            seen: BTreeSet::new(),
            assigned: None,
            hop: 0,
        })
        .collect();
    let out = session.run_phase("cluster", programs)?;
    let mut assignment = Vec::with_capacity(n as usize);
    for (i, p) in out.iter().enumerate() {
        match p.assigned {
            Some(r) => assignment.push(r),
            None => {
                return Err(PrimError::PropertyViolation(format!(
                    "node {} saw no ruler within beta = {} hops",
                    i + 1,
                    rs.beta
                )))
            }
        }
    }
    Ok(assignment)
}

// ---------------------------------------------------------------------------
// Cluster-membership exchange (cluster-scoped flooding).
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct MemberRec {
    pub cluster: NodeId,
    pub node: NodeId,
    pub in_w: bool,
    pub ttl: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct MemberMsg(pub Arc<Vec<MemberRec>>);

impl BitSized for MemberMsg {
    fn bits(&self) -> u64 {
        self.0.len() as u64 * 96
    }
}

struct MembershipProgram {
    cluster: NodeId,
    in_w: bool,
    depth: u32,
    collected: Vec<(NodeId, bool)>,
    seen: BTreeSet<NodeId>,
}

impl NodeProgram for MembershipProgram {
    type Local = MemberMsg;
    type Global = ();

    fn step(&mut self, ctx: &mut Ctx<'_, MemberMsg, ()>) -> Status {
        let mut fresh: Vec<MemberRec> = Vec::new();
        for (_, msg) in ctx.local_inbox {
            for rec in msg.0.iter() {
                // Membership records only travel within their own cluster;
                // helpers are always cluster-local so nothing is lost.
                if rec.cluster != self.cluster {
                    continue;
                }
                if self.seen.insert(rec.node) {
                    self.collected.push((rec.node, rec.in_w));
                    if rec.ttl > 1 {
                        fresh.push(MemberRec {
                            ttl: rec.ttl - 1,
                            ..*rec
                        });
                    }
                }
            }
        }
        if ctx.round == 0 {
            self.seen.insert(ctx.node);
            self.collected.push((ctx.node, self.in_w));
            fresh.push(MemberRec {
                cluster: self.cluster,
                node: ctx.node,
                in_w: self.in_w,
                ttl: self.depth,
            });
        }
        if !fresh.is_empty() {
            let payload = MemberMsg(Arc::new(fresh));
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

// ---------------------------------------------------------------------------
// Full construction.
// ---------------------------------------------------------------------------

/// Builds helper sets for the marked set `W` with size parameter `mu`.
/// Phases: ruling set, clustering, membership exchange; the joins themselves
/// are evaluated from the shared seed. Validates the three defining
/// properties before returning.
pub fn compute_helpers(
    session: &mut Session<'_>,
    w_flags: &[bool],
    mu: u32,
    shared_seed: u64,
) -> Result<HelperFamily, PrimError> {
    let n = session.graph().node_count();
    assert_eq!(w_flags.len(), n as usize);
    if mu <= 1 {
        // Identity family: each w is its own single helper. Satisfies the
        // contract with zero rounds, so the machinery is skipped.
        let mut helpers = BTreeMap::new();
        let mut helping = vec![Vec::new(); n as usize];
        for v in 1..=n {
            if w_flags[(v - 1) as usize] {
                helpers.insert(v, vec![v]);
                helping[(v - 1) as usize].push(v);
            }
        }
        return Ok(HelperFamily {
            mu: 1,
            beta: 0,
            identity: true,
            cluster_of: (1..=n).collect(),
            clusters: BTreeMap::new(),
            helpers,
            helping,
        });
    }

    let rs = run_ruling_set(session, mu)?;
    let cluster_of = run_clusters(session, &rs)?;

    let programs = (1..=n)
        .map(|v| MembershipProgram {
            cluster: cluster_of[(v - 1) as usize],
            in_w: w_flags[(v - 1) as usize],
            depth: 2 * rs.beta,
            collected: Vec::new(),
            seen: BTreeSet::new(),
        })
        .collect();
    let out = session.run_phase("helpers", programs)?;

    // Each node now holds its cluster's member list; reproduce the shared
    // join computation once per cluster.
    let mut clusters: BTreeMap<NodeId, Arc<Vec<(NodeId, bool)>>> = BTreeMap::new();
    for (i, p) in out.iter().enumerate() {
        let ruler = cluster_of[i];
        if let Some(existing) = clusters.get(&ruler) {
            debug_assert_eq!(
                existing.len(),
                p.collected.len(),
                "cluster views must agree"
            );
        } else {
            let mut members = p.collected.clone();
            members.sort_unstable();
            clusters.insert(ruler, Arc::new(members));
        }
    }
    let mut helpers: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    let mut helping = vec![Vec::new(); n as usize];
    for members in clusters.values() {
        for (w, set) in cluster_joins(members, mu, shared_seed) {
            for &x in &set {
                helping[(x - 1) as usize].push(w);
            }
            helpers.insert(w, set);
        }
    }
    let family = HelperFamily {
        mu,
        beta: rs.beta,
        identity: false,
        cluster_of,
        clusters,
        helpers,
        helping,
    };
    validate_family(session.graph(), w_flags, &family)?;
    Ok(family)
}

/// Direct check of the three helper-set properties.
pub fn validate_family(
    g: &Graph,
    w_flags: &[bool],
    family: &HelperFamily,
) -> Result<(), PrimError> {
    let n = g.node_count();
    // (1) every marked node has at least mu helpers.
    for v in 1..=n {
        if w_flags[(v - 1) as usize] {
            let size = family.helper_set(v).len();
            if size < family.mu as usize {
                return Err(PrimError::PropertyViolation(format!(
                    "|H_{v}| = {size} < mu = {}",
                    family.mu
                )));
            }
        }
    }
    // (2) helpers lie within the cluster-diameter reach of their w.
    if !family.identity {
        let reach = family.reach() as u64;
        for (&w, set) in &family.helpers {
            let hops = bfs_hops(g, w);
            for &x in set {
                let h = hops[(x - 1) as usize];
                if h > reach {
                    return Err(PrimError::PropertyViolation(format!(
                        "helper {x} of {w} at hop {h} > {reach}"
                    )));
                }
            }
        }
    }
    // (3) no node helps more than E + 3c log n marked nodes (E = 2, c = 2,
    // natural log, from the construction's tail bound).
    let bound = 2.0 + 6.0 * libm::log(n.max(2) as f64);
    for v in 1..=n {
        let m = family.helping[(v - 1) as usize].len();
        if (m as f64) > bound {
            return Err(PrimError::PropertyViolation(format!(
                "node {v} is a member of {m} helper sets (bound {bound})"
            )));
        }
    }
    Ok(())
}
