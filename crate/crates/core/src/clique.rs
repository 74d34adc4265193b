//! Congested-clique runtime on the skeleton members and its simulation on
//! the hybrid network: every clique round becomes one token-routing
//! instance with both sides sampled at the skeleton rate. Reference clique
//! programs (exact all-pairs tables and single-source relaxation) stand in
//! for external clique algorithms; the framework parameters they advertise
//! drive the trade-off arithmetic.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::engine::{BitSized, EngineError, Session};
use crate::graph::{dist_add, NodeId, INF};
use crate::primitives::disseminate::{run_disseminate, WireItem};
use crate::primitives::PrimError;
use crate::routing::{
    prepare_routing, token_routing, Label, RoutingError, RoutingInstance, RoutingSetup, Token,
};
use crate::skeleton::Skeleton;

/// Parameters a clique algorithm advertises to the framework: source
/// exponent, runtime exponent and scale, and the approximation contract
/// `d <= est <= alpha_mul * d + beta_add`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CliqueAlgoSpec {
    pub gamma_src: f64,
    pub delta: f64,
    pub eta: f64,
    pub alpha_mul: f64,
    pub beta_add: f64,
}

impl CliqueAlgoSpec {
    /// Exact full-table reference program.
    pub fn exact_apsp() -> Self {
        CliqueAlgoSpec {
            gamma_src: 1.0,
            delta: 1.0,
            eta: 1.0,
            alpha_mul: 1.0,
            beta_add: 0.0,
        }
    }

    /// Exact single-source reference program.
    pub fn exact_sssp() -> Self {
        CliqueAlgoSpec {
            gamma_src: 0.0,
            delta: 1.0,
            eta: 1.0,
            alpha_mul: 1.0,
            beta_add: 0.0,
        }
    }
}

/// Sampling/locality trade-off: `x = 2 / (3 + 2 delta)`.
pub fn x_tradeoff(delta: f64) -> f64 {
    2.0 / (3.0 + 2.0 * delta)
}

/// Multiplicative bound for weighted estimates: `1 + 2 alpha + beta / t_b`.
pub fn weighted_ratio(alpha: f64, beta: f64, t_b: f64) -> f64 {
    1.0 + 2.0 * alpha + beta / t_b
}

/// Multiplicative bound on unweighted graphs: `alpha + 2/eta + beta / t_b`.
pub fn unweighted_ratio(alpha: f64, eta: f64, beta: f64, t_b: f64) -> f64 {
    alpha + 2.0 / eta + beta / t_b
}

/// Single-source bound: `alpha + beta / t_b` (no representative detour).
pub fn sssp_ratio(alpha: f64, beta: f64, t_b: f64) -> f64 {
    alpha + beta / t_b
}

/// Diameter bound: `alpha + 2/eta + beta / t_b`, same shape as unweighted.
pub fn diameter_ratio(alpha: f64, eta: f64, beta: f64, t_b: f64) -> f64 {
    unweighted_ratio(alpha, eta, beta, t_b)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliqueError {
    Engine(EngineError),
    Routing(RoutingError),
    /// A program emitted messages outside the receiver-predictable
    /// full-exchange pattern.
    PatternViolation { rank: usize, round: u64 },
    RoundLimit { rounds: u64 },
}

impl fmt::Display for CliqueError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliqueError::Engine(e) => write!(f, "{e}"),
            CliqueError::Routing(e) => write!(f, "{e}"),
            CliqueError::PatternViolation { rank, round } => {
                write!(f, "clique rank {rank} broke the exchange pattern in round {round}")
            }
            CliqueError::RoundLimit { rounds } => {
                write!(f, "clique program did not finish within {rounds} rounds")
            }
        }
    }
}

impl From<EngineError> for CliqueError {
    fn from(e: EngineError) -> Self {
        CliqueError::Engine(e)
    }
}

impl From<RoutingError> for CliqueError {
    fn from(e: RoutingError) -> Self {
        CliqueError::Routing(e)
    }
}

impl From<PrimError> for CliqueError {
    fn from(e: PrimError) -> Self {
        CliqueError::Routing(RoutingError::Primitive(e))
    }
}

/// What a clique member knows when the program starts: the sorted member
/// list (public), its own rank, its incident skeleton edges (by peer rank),
/// and the source ranks.
#[derive(Debug, Clone)]
pub struct CliqueInfo {
    pub members: Vec<NodeId>,
    /// rank -> incident edges (peer rank, weight).
    pub incident: Vec<Vec<(usize, u64)>>,
    /// Ranks acting as sources, sorted.
    pub source_ranks: Vec<usize>,
}

impl CliqueInfo {
    pub fn from_skeleton(sk: &Skeleton, sources: &[NodeId]) -> Self {
        let members = sk.members.clone();
        let mut incident = vec![Vec::new(); members.len()];
        for &(u, v, w) in &sk.edges {
            let ru = sk.rank_of(u).expect("member");
            let rv = sk.rank_of(v).expect("member");
            incident[ru].push((rv, w));
            incident[rv].push((ru, w));
        }
        for list in &mut incident {
            list.sort_unstable();
        }
        let mut source_ranks: Vec<usize> = sources
            .iter()
            .filter_map(|s| members.binary_search(s).ok())
            .collect();
        source_ranks.sort_unstable();
        source_ranks.dedup();
        CliqueInfo {
            members,
            incident,
            source_ranks,
        }
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// One clique round's sends: `(peer rank, word)`. Programs running the
/// full-exchange pattern emit exactly one word to every other member per
/// round until they finish; `done` must flip at the same round everywhere.
pub struct CliqueStep {
    pub outbox: Vec<(usize, u64)>,
    pub done: bool,
}

/// Per-member clique state machine. Messages are single words of
/// O(log n) bits; the simulation carries them as token payloads.
pub trait CliqueProgram {
    fn round(&mut self, round: u64, inbox: &[(usize, u64)]) -> CliqueStep;
}

/// Reference executor: runs the program directly, no network model. Serves
/// as the fidelity oracle for the simulation path.
pub fn run_direct<P: CliqueProgram>(
    programs: &mut [P],
    max_rounds: u64,
) -> Result<u64, CliqueError> {
    let m = programs.len();
    let mut inboxes: Vec<Vec<(usize, u64)>> = vec![Vec::new(); m];
    let mut done = vec![false; m];
    for round in 0..max_rounds {
        if done.iter().all(|&d| d) {
            return Ok(round);
        }
        let mut next: Vec<Vec<(usize, u64)>> = vec![Vec::new(); m];
        for (rank, prog) in programs.iter_mut().enumerate() {
            if done[rank] {
                continue;
            }
            let step = prog.round(round, &inboxes[rank]);
            for (to, word) in step.outbox {
                next[to].push((rank, word));
            }
            done[rank] = step.done;
        }
        for inbox in &mut next {
            inbox.sort_unstable();
        }
        inboxes = next;
    }
    if done.iter().all(|&d| d) {
        Ok(max_rounds)
    } else {
        Err(CliqueError::RoundLimit { rounds: max_rounds })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct MemberAnnouncement(NodeId);

impl BitSized for MemberAnnouncement {
    fn bits(&self) -> u64 {
        (self.0 as u64).bits()
    }
}

impl WireItem for MemberAnnouncement {
    fn key(&self) -> u64 {
        0x3A_0000_0000 | self.0 as u64
    }
}

/// Makes the member set public knowledge (so everyone can compute ranks and
/// expected label sets) and prepares the routing machinery both clique
/// sides share. Done once per simulation; the helper families depend only
/// on the member set, not on the round's tokens.
pub fn prepare_clique(
    session: &mut Session<'_>,
    sk: &Skeleton,
) -> Result<RoutingSetup, CliqueError> {
    let n = session.graph().node_count();
    let mut items: Vec<Vec<MemberAnnouncement>> = vec![Vec::new(); n as usize];
    for &m in &sk.members {
        items[(m - 1) as usize].push(MemberAnnouncement(m));
    }
    run_disseminate(session, items)?;
    let p = libm::pow(n as f64, sk.x - 1.0);
    let k = sk.members.len().max(1) as u32;
    let setup = prepare_routing(
        session,
        &sk.member_flags,
        &sk.member_flags,
        k,
        k,
        p,
        p,
        1,
    )?;
    Ok(setup)
}

/// Outcome of a simulated clique run.
pub struct CliqueRun {
    pub cc_rounds: u64,
}

/// Simulates the program on the skeleton members: each clique round's
/// messages form one token-routing instance between the members (everyone
/// else serves as helpers/intermediates).
pub fn clique_simulation<P: CliqueProgram>(
    session: &mut Session<'_>,
    sk: &Skeleton,
    setup: &RoutingSetup,
    programs: &mut [P],
    max_cc_rounds: u64,
) -> Result<CliqueRun, CliqueError> {
    let m = programs.len();
    assert_eq!(m, sk.members.len(), "one program per member");
    let members = &sk.members;
    let p = libm::pow(session.graph().node_count() as f64, sk.x - 1.0);
    let mut inboxes: Vec<Vec<(usize, u64)>> = vec![Vec::new(); m];
    let mut done = vec![false; m];
    let mut round: u64 = 0;
    loop {
        if done.iter().all(|&d| d) {
            return Ok(CliqueRun { cc_rounds: round });
        }
        if round >= max_cc_rounds {
            return Err(CliqueError::RoundLimit { rounds: max_cc_rounds });
        }
        // Step every live member locally.
        let mut tokens: BTreeMap<NodeId, Vec<Token>> = BTreeMap::new();
        let mut senders: BTreeSet<usize> = BTreeSet::new();
        for (rank, prog) in programs.iter_mut().enumerate() {
            if done[rank] {
                continue;
            }
            let step = prog.round(round, &inboxes[rank]);
            if !step.outbox.is_empty() {
                // Receiver-predictable pattern: one word to every peer.
                let mut targets: Vec<usize> = step.outbox.iter().map(|&(to, _)| to).collect();
                targets.sort_unstable();
                let expected: Vec<usize> = (0..m).filter(|&r| r != rank).collect();
                if targets != expected {
                    return Err(CliqueError::PatternViolation { rank, round });
                }
                senders.insert(rank);
                let list = tokens.entry(members[rank]).or_default();
                for (to, word) in step.outbox {
                    list.push(Token {
                        label: Label {
                            sender: members[rank],
                            receiver: members[to],
                            index: 0,
                        },
                        payload: word,
                    });
                }
            }
            done[rank] = step.done;
        }
        // Route this round's exchange (if anything was sent at all).
        let mut next: Vec<Vec<(usize, u64)>> = vec![Vec::new(); m];
        if !tokens.is_empty() {
            let k = m as u32;
            let inst = RoutingInstance::new(p, p, k, k, tokens)?;
            let outcome = session.scoped(&format!("cc.round.{round}"), |session| {
                token_routing(session, &inst, setup).map_err(|e| match e {
                    RoutingError::Engine(e) => e,
                    other => {
                        // Routing-level faults are turned into a panic-free
                        // sentinel via the engine error channel.
                        EngineError::InvalidConfig(routing_fault(other))
                    }
                })
            });
            match outcome {
                Ok(out) => {
                    for (rank, &member) in members.iter().enumerate() {
                        if let Some(delivered) = out.delivered.get(&member) {
                            for t in delivered {
                                let from = members
                                    .binary_search(&t.label.sender)
                                    .expect("token sender is a member");
                                next[rank].push((from, t.payload));
                            }
                        }
                    }
                }
                Err(EngineError::InvalidConfig(msg)) if msg.starts_with("routing:") => {
                    return Err(CliqueError::Routing(RoutingError::BadInstance(
                        String::from(msg),
                    )));
                }
                Err(e) => return Err(e.into()),
            }
        }
        for inbox in &mut next {
            inbox.sort_unstable();
        }
        inboxes = next;
        round += 1;
    }
}

fn routing_fault(e: RoutingError) -> &'static str {
    match e {
        RoutingError::MissingToken(_) => "routing: missing token",
        RoutingError::DuplicateToken(_) => "routing: duplicate token",
        RoutingError::UnansweredRequest(_) => "routing: unanswered request",
        RoutingError::HelperOverload { .. } => "routing: helper overload",
        _ => "routing: fault",
    }
}

// ---------------------------------------------------------------------------
// Reference program: everyone learns every skeleton edge, then solves the
// table locally. Exact, so it advertises alpha = 1, beta = 0.
// ---------------------------------------------------------------------------

// Word encoding: low 2 bits tag. 0 = padding, 1 = edge (rank, rank, weight),
// 2 = census count, 3 = estimate (used by the relaxation program).
const TAG_PAD: u64 = 0;
const TAG_EDGE: u64 = 1;
const TAG_COUNT: u64 = 2;
const TAG_EST: u64 = 3;
const RANK_BITS: u32 = 12;

fn encode_edge(a: usize, b: usize, w: u64) -> u64 {
    debug_assert!(a < (1 << RANK_BITS) && b < (1 << RANK_BITS));
    debug_assert!(w < 1u64 << (62 - 2 * RANK_BITS));
    TAG_EDGE
        | ((a as u64) << 2)
        | ((b as u64) << (2 + RANK_BITS))
        | (w << (2 + 2 * RANK_BITS))
}

fn decode_edge(word: u64) -> (usize, usize, u64) {
    let a = (word >> 2) & ((1 << RANK_BITS) - 1);
    let b = (word >> (2 + RANK_BITS)) & ((1 << RANK_BITS) - 1);
    let w = word >> (2 + 2 * RANK_BITS);
    (a as usize, b as usize, w)
}

/// Full-exchange table program: census of per-member edge counts, balanced
/// distribution of each edge to one relay, relay census, then relays
/// broadcast everything. Finally each member runs Dijkstra locally over the
/// collected edge set.
pub struct FullExchangeApsp {
    rank: usize,
    m: usize,
    owned: Vec<(usize, usize, u64)>,
    known: BTreeSet<(usize, usize, u64)>,
    relay: Vec<(usize, usize, u64)>,
    t1: u64,
    t2: u64,
    table: Vec<Vec<u64>>,
}

impl FullExchangeApsp {
    pub fn new(info: &CliqueInfo, rank: usize) -> Self {
        // Each edge is owned (and later announced) by its smaller endpoint.
        let owned: Vec<(usize, usize, u64)> = info.incident[rank]
            .iter()
            .filter(|&&(peer, _)| rank < peer)
            .map(|&(peer, w)| (rank, peer, w))
            .collect();
        let known = info.incident[rank]
            .iter()
            .map(|&(peer, w)| (rank.min(peer), rank.max(peer), w))
            .collect();
        FullExchangeApsp {
            rank,
            m: info.size(),
            owned,
            known,
            relay: Vec::new(),
            t1: 0,
            t2: 0,
            table: Vec::new(),
        }
    }

    /// Distance table by member rank, available once the program is done.
    pub fn table(&self) -> &[Vec<u64>] {
        &self.table
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn diameter(&self) -> u64 {
        let mut best = 0;
        for row in &self.table {
            for &d in row {
                if d != INF && d > best {
                    best = d;
                }
            }
        }
        best
    }

    fn peers(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.m).filter(move |&r| r != self.rank)
    }

    fn solve(&mut self) {
        let mut adj: Vec<Vec<(usize, u64)>> = vec![Vec::new(); self.m];
        for &(a, b, w) in &self.known {
            adj[a].push((b, w));
            adj[b].push((a, w));
        }
        self.table = vec![vec![INF; self.m]; self.m];
        for s in 0..self.m {
            let d = &mut self.table[s];
            d[s] = 0;
            let mut heap = alloc::collections::BinaryHeap::new();
            heap.push(core::cmp::Reverse((0u64, s)));
            while let Some(core::cmp::Reverse((du, u))) = heap.pop() {
                if du > d[u] {
                    continue;
                }
                for &(v, w) in &adj[u] {
                    if du + w < d[v] {
                        d[v] = du + w;
                        heap.push(core::cmp::Reverse((du + w, v)));
                    }
                }
            }
        }
    }
}

impl CliqueProgram for FullExchangeApsp {
    fn round(&mut self, round: u64, inbox: &[(usize, u64)]) -> CliqueStep {
        if self.m == 1 {
            self.solve();
            return CliqueStep {
                outbox: Vec::new(),
                done: true,
            };
        }
        let peers = self.m as u64 - 1;
        let mut outbox = Vec::new();
        if round == 0 {
            // Census 1: everyone announces how many edges it owns.
            let word = TAG_COUNT | ((self.owned.len() as u64) << 2);
            outbox = self.peers().map(|r| (r, word)).collect();
            return CliqueStep {
                outbox,
                done: false,
            };
        }
        if round == 1 {
            let max_owned = inbox
                .iter()
                .filter(|(_, w)| w & 3 == TAG_COUNT)
                .map(|(_, w)| w >> 2)
                .max()
                .unwrap_or(0)
                .max(self.owned.len() as u64);
            self.t1 = max_owned.div_ceil(peers);
        }
        // Distribution rounds: 1 ..= t1.
        if round >= 1 && round <= self.t1 {
            for (_, word) in inbox {
                if word & 3 == TAG_EDGE {
                    let e = decode_edge(*word);
                    self.relay.push(e);
                    self.known.insert(e);
                }
            }
            let base = (round - 1) as usize * (self.m - 1);
            for (j, peer) in self.peers().enumerate() {
                let word = match self.owned.get(base + j) {
                    Some(&(a, b, w)) => encode_edge(a, b, w),
                    None => TAG_PAD,
                };
                outbox.push((peer, word));
            }
            return CliqueStep {
                outbox,
                done: false,
            };
        }
        // Census 2 at round t1 + 1: collect the stragglers and announce the
        // relay loads.
        if round == self.t1 + 1 {
            for (_, word) in inbox {
                if word & 3 == TAG_EDGE {
                    let e = decode_edge(*word);
                    self.relay.push(e);
                    self.known.insert(e);
                }
            }
            self.relay.sort_unstable();
            self.relay.dedup();
            let word = TAG_COUNT | ((self.relay.len() as u64) << 2);
            outbox = self.peers().map(|r| (r, word)).collect();
            return CliqueStep {
                outbox,
                done: false,
            };
        }
        if round == self.t1 + 2 {
            let max_relay = inbox
                .iter()
                .filter(|(_, w)| w & 3 == TAG_COUNT)
                .map(|(_, w)| w >> 2)
                .max()
                .unwrap_or(0)
                .max(self.relay.len() as u64);
            self.t2 = max_relay;
        }
        // Broadcast rounds: t1 + 2 ..= t1 + 1 + t2 (nothing to send if the
        // relay loads were all zero).
        let bcast_start = self.t1 + 2;
        if round >= bcast_start && round < bcast_start + self.t2 {
            for (_, word) in inbox {
                if word & 3 == TAG_EDGE {
                    self.known.insert(decode_edge(*word));
                }
            }
            let idx = (round - bcast_start) as usize;
            let word = match self.relay.get(idx) {
                Some(&(a, b, w)) => encode_edge(a, b, w),
                None => TAG_PAD,
            };
            outbox = self.peers().map(|r| (r, word)).collect();
            return CliqueStep {
                outbox,
                done: false,
            };
        }
        // Final receive round: collect the last broadcasts and solve.
        for (_, word) in inbox {
            if word & 3 == TAG_EDGE {
                self.known.insert(decode_edge(*word));
            }
        }
        self.solve();
        CliqueStep {
            outbox: Vec::new(),
            done: true,
        }
    }
}

// ---------------------------------------------------------------------------
// Reference program: synchronous single-source relaxation with an explicit
// convergence bit. Exact.
// ---------------------------------------------------------------------------

fn encode_estimate(dist: u64, changed: bool) -> u64 {
    // dist + 1 so that 0 encodes "infinite"; bit 2 is the change flag.
    let d = if dist == INF { 0 } else { dist + 1 };
    TAG_EST | ((changed as u64) << 2) | (d << 3)
}

fn decode_estimate(word: u64) -> (u64, bool) {
    let d = word >> 3;
    let dist = if d == 0 { INF } else { d - 1 };
    (dist, (word >> 2) & 1 == 1)
}

/// Broadcast-and-relax single source program: every round each member
/// broadcasts its estimate plus a changed bit; a round in which nobody
/// changed is visible to everyone simultaneously, ending the run.
pub struct BellmanFordSssp {
    rank: usize,
    m: usize,
    incident: Vec<(usize, u64)>,
    dist: u64,
    changed: bool,
    pub rounds_used: u64,
}

impl BellmanFordSssp {
    pub fn new(info: &CliqueInfo, rank: usize, source_rank: usize) -> Self {
        BellmanFordSssp {
            rank,
            m: info.size(),
            incident: info.incident[rank].clone(),
            dist: if rank == source_rank { 0 } else { INF },
            changed: true,
            rounds_used: 0,
        }
    }

    pub fn distance(&self) -> u64 {
        self.dist
    }
}

impl CliqueProgram for BellmanFordSssp {
    fn round(&mut self, round: u64, inbox: &[(usize, u64)]) -> CliqueStep {
        self.rounds_used = round;
        if self.m == 1 {
            return CliqueStep {
                outbox: Vec::new(),
                done: true,
            };
        }
        let mut any_changed = false;
        if round > 0 {
            let mut estimates: BTreeMap<usize, u64> = BTreeMap::new();
            for (from, word) in inbox {
                if word & 3 == TAG_EST {
                    let (d, ch) = decode_estimate(*word);
                    estimates.insert(*from, d);
                    any_changed |= ch;
                }
            }
            any_changed |= self.changed;
            let mut best = self.dist;
            for &(peer, w) in &self.incident {
                if let Some(&d) = estimates.get(&peer) {
                    best = best.min(dist_add(d, w));
                }
            }
            if best < self.dist {
                self.dist = best;
                self.changed = true;
            } else {
                self.changed = false;
            }
            if !any_changed {
                // Last round carried no changes anywhere: everyone sees the
                // same silence and stops together.
                return CliqueStep {
                    outbox: Vec::new(),
                    done: true,
                };
            }
        }
        let word = encode_estimate(self.dist, self.changed);
        let outbox = (0..self.m)
            .filter(|&r| r != self.rank)
            .map(|r| (r, word))
            .collect();
        CliqueStep {
            outbox,
            done: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::SimConfig;
    use crate::gen::gen_gnp_connected;
    use crate::oracle::apsp_oracle;
    use crate::skeleton::{compute_skeleton, SkeletonParams};
    use crate::Graph;

    fn mini_info(edges: &[(usize, usize, u64)], m: usize, sources: &[usize]) -> CliqueInfo {
        let mut incident = vec![Vec::new(); m];
        for &(a, b, w) in edges {
            incident[a].push((b, w));
            incident[b].push((a, w));
        }
        for l in &mut incident {
            l.sort_unstable();
        }
        CliqueInfo {
            members: (1..=m as u32).collect(),
            incident,
            source_ranks: sources.to_vec(),
        }
    }

    #[test]
    fn tradeoff_values() {
        assert_eq!(x_tradeoff(0.0), 2.0 / 3.0);
        assert_eq!(x_tradeoff(1.0), 2.0 / 5.0);
    }

    #[test]
    fn direct_full_exchange_on_triangle() {
        let info = mini_info(&[(0, 1, 1), (1, 2, 1), (0, 2, 1)], 3, &[]);
        let mut progs: Vec<FullExchangeApsp> =
            (0..3).map(|r| FullExchangeApsp::new(&info, r)).collect();
        run_direct(&mut progs, 64).unwrap();
        for p in &progs {
            assert_eq!(p.table()[0], alloc::vec![0, 1, 1]);
            assert_eq!(p.table()[1], alloc::vec![1, 0, 1]);
        }
    }

    #[test]
    fn direct_full_exchange_weighted_path() {
        let info = mini_info(&[(0, 1, 2), (1, 2, 3)], 3, &[]);
        let mut progs: Vec<FullExchangeApsp> =
            (0..3).map(|r| FullExchangeApsp::new(&info, r)).collect();
        run_direct(&mut progs, 64).unwrap();
        for p in &progs {
            assert_eq!(p.table()[0][2], 5);
        }
    }

    #[test]
    fn direct_bellman_ford_matches_table() {
        let info = mini_info(&[(0, 1, 2), (1, 2, 3), (0, 3, 10), (2, 3, 1)], 4, &[0]);
        let mut bf: Vec<BellmanFordSssp> = (0..4)
            .map(|r| BellmanFordSssp::new(&info, r, 0))
            .collect();
        let rounds = run_direct(&mut bf, 64).unwrap();
        assert!(rounds <= 6);
        assert_eq!(bf[3].distance(), 6);
        assert_eq!(bf[0].distance(), 0);
    }

    #[test]
    fn direct_full_exchange_random_matches_oracle() {
        // A 64-member clique over a random "skeleton" graph.
        let g = gen_gnp_connected(64, 0.1, 7, 11);
        let edges: Vec<(usize, usize, u64)> = g
            .edges()
            .iter()
            .map(|&(u, v, w)| ((u - 1) as usize, (v - 1) as usize, w))
            .collect();
        let info = mini_info(&edges, 64, &[]);
        let mut progs: Vec<FullExchangeApsp> =
            (0..64).map(|r| FullExchangeApsp::new(&info, r)).collect();
        run_direct(&mut progs, 512).unwrap();
        let oracle = apsp_oracle(&g);
        for p in &progs {
            for u in 0..64usize {
                for v in 0..64usize {
                    assert_eq!(p.table()[u][v], oracle.dist(u as u32 + 1, v as u32 + 1));
                }
            }
        }
    }

    #[test]
    fn simulated_exchange_equals_direct() {
        let n = 128u32;
        let g = gen_gnp_connected(n, 0.06, 5, 13);
        let mut s = Session::new(&g, SimConfig::for_n(n, 13)).unwrap();
        let sk = compute_skeleton(&mut s, SkeletonParams::new(0.5), &[]).unwrap();
        assert!(sk.members.len() > 1, "want a non-trivial clique");
        let info = CliqueInfo::from_skeleton(&sk, &[]);
        let setup = prepare_clique(&mut s, &sk).unwrap();

        let mut sim: Vec<FullExchangeApsp> = (0..info.size())
            .map(|r| FullExchangeApsp::new(&info, r))
            .collect();
        clique_simulation(&mut s, &sk, &setup, &mut sim, 4096).unwrap();

        let mut direct: Vec<FullExchangeApsp> = (0..info.size())
            .map(|r| FullExchangeApsp::new(&info, r))
            .collect();
        run_direct(&mut direct, 4096).unwrap();

        for (a, b) in sim.iter().zip(&direct) {
            assert_eq!(a.table(), b.table());
        }
        assert_eq!(s.metrics().global_dropped, 0);
    }

    #[test]
    fn single_member_clique_sends_nothing() {
        let g = Graph::from_edges(4, &[(1, 2, 1), (2, 3, 1), (3, 4, 1)]).unwrap();
        let mut s = Session::new(&g, SimConfig::for_n(4, 1)).unwrap();
        let mut flags = alloc::vec![false; 4];
        flags[1] = true;
        let sk = Skeleton {
            x: 0.5,
            xi: 16.0,
            h: 3,
            members: alloc::vec![2],
            member_flags: flags,
            edges: alloc::vec::Vec::new(),
            dist_h: crate::skeleton::run_limited_relaxation(&mut s, "skeleton", &[2], 3).unwrap(),
        };
        let setup = prepare_clique(&mut s, &sk).unwrap();
        let info = CliqueInfo::from_skeleton(&sk, &[]);
        let before = s.metrics().global_sent;
        let mut progs = alloc::vec![FullExchangeApsp::new(&info, 0)];
        let run = clique_simulation(&mut s, &sk, &setup, &mut progs, 16).unwrap();
        assert!(run.cc_rounds <= 1);
        // No clique traffic beyond the preparation phases.
        assert_eq!(s.metrics().global_sent, before);
    }

    #[test]
    fn edge_word_roundtrip() {
        for &(a, b, w) in &[(0usize, 1usize, 1u64), (7, 3, 900), (100, 2047, 1 << 30)] {
            let (x, y, z) = decode_edge(encode_edge(a, b, w));
            assert_eq!((x, y, z), (a, b, w));
        }
    }
}
