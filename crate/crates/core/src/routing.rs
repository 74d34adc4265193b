//! Point-to-point token routing between sampled sender and receiver sets.
//!
//! Senders hand their tokens to nearby helpers (one cluster-scoped flood),
//! helpers push them over the global network to hash-selected intermediates,
//! receiver helpers fetch them with label requests, and a final local flood
//! delivers everything to the receivers. Push and request stages are
//! separated by hard barriers whose lengths come from cheap max-aggregates,
//! so a request can never race ahead of the push that feeds it.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{id_bits, BitSized, Ctx, EngineError, NodeProgram, Session, Status};
use crate::graph::NodeId;
use crate::primitives::aggregate::{run_aggregate, MaxU64};
use crate::primitives::disseminate::{run_disseminate, WireItem};
use crate::primitives::helpers::{compute_helpers, HelperFamily};
use crate::primitives::PrimError;
use crate::randkit::{ceil_log2, derive, node_hash_bits, routing_independence, HashFamilyMember};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Label {
    pub sender: NodeId,
    pub receiver: NodeId,
    pub index: u32,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.sender, self.receiver, self.index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Token {
    pub label: Label,
    pub payload: u64,
}

impl BitSized for Token {
    fn bits(&self) -> u64 {
        self.label.bits() + self.payload.bits()
    }
}

impl BitSized for Label {
    fn bits(&self) -> u64 {
        (self.sender as u64).bits() + (self.receiver as u64).bits() + (self.index as u64).bits()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RoutingError {
    Engine(EngineError),
    Primitive(PrimError),
    BadInstance(String),
    HelperOverload { node: NodeId, got: usize, bound: usize },
    UnansweredRequest(Label),
    MissingToken(Label),
    DuplicateToken(Label),
}

impl fmt::Display for RoutingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RoutingError::Engine(e) => write!(f, "{e}"),
            RoutingError::Primitive(e) => write!(f, "{e}"),
            RoutingError::BadInstance(msg) => write!(f, "bad routing instance: {msg}"),
            RoutingError::HelperOverload { node, got, bound } => {
                write!(f, "helper {node} was assigned {got} items, bound {bound}")
            }
            RoutingError::UnansweredRequest(l) => {
                write!(f, "intermediate had no token for requested label {l}")
            }
            RoutingError::MissingToken(l) => write!(f, "receiver never obtained token {l}"),
            RoutingError::DuplicateToken(l) => write!(f, "token {l} delivered more than once"),
        }
    }
}

impl From<EngineError> for RoutingError {
    fn from(e: EngineError) -> Self {
        RoutingError::Engine(e)
    }
}

impl From<PrimError> for RoutingError {
    fn from(e: PrimError) -> Self {
        RoutingError::Primitive(e)
    }
}

/// One token-routing workload: who sends what, and which labels every
/// receiver expects (receivers know their label sets up front).
#[derive(Debug, Clone)]
pub struct RoutingInstance {
    pub p_s: f64,
    pub p_r: f64,
    pub k_s: u32,
    pub k_r: u32,
    /// Sender -> its tokens (each sender holds at most `k_s`).
    pub tokens: BTreeMap<NodeId, Vec<Token>>,
    /// Receiver -> sorted labels it must end up holding (at most `k_r`).
    pub expected: BTreeMap<NodeId, Vec<Label>>,
    pub index_bits: u32,
}

impl RoutingInstance {
    pub fn new(
        p_s: f64,
        p_r: f64,
        k_s: u32,
        k_r: u32,
        tokens: BTreeMap<NodeId, Vec<Token>>,
    ) -> Result<Self, RoutingError> {
        let mut expected: BTreeMap<NodeId, Vec<Label>> = BTreeMap::new();
        let mut max_index = 0u32;
        for (&s, list) in &tokens {
            if list.len() > k_s as usize {
                return Err(RoutingError::BadInstance(format!(
                    "sender {s} holds {} tokens, bound k_S = {k_s}",
                    list.len()
                )));
            }
            for t in list {
                if t.label.sender != s {
                    return Err(RoutingError::BadInstance(format!(
                        "token {} held by wrong sender {s}",
                        t.label
                    )));
                }
                max_index = max_index.max(t.label.index);
                expected.entry(t.label.receiver).or_default().push(t.label);
            }
        }
        for (&r, labels) in &mut expected {
            labels.sort_unstable();
            if labels.len() > k_r as usize {
                return Err(RoutingError::BadInstance(format!(
                    "receiver {r} is target of {} tokens, bound k_R = {k_r}",
                    labels.len()
                )));
            }
            if labels.windows(2).any(|w| w[0] == w[1]) {
                return Err(RoutingError::BadInstance(format!(
                    "duplicate label addressed to receiver {r}"
                )));
            }
        }
        Ok(RoutingInstance {
            p_s,
            p_r,
            k_s,
            k_r,
            tokens,
            expected,
            index_bits: ceil_log2(max_index as u64 + 2).max(1),
        })
    }

    pub fn total_tokens(&self) -> usize {
        self.tokens.values().map(|v| v.len()).sum()
    }
}

/// `floor(min(sqrt(k), 1/p))`, floored at 1.
pub fn helper_mu(k: u32, p: f64) -> u32 {
    let by_k = libm::sqrt(k as f64);
    let by_p = if p <= 0.0 { f64::INFINITY } else { 1.0 / p };
    let m = libm::floor(if by_k < by_p { by_k } else { by_p }) as u32;
    m.max(1)
}

/// Label -> hash key. Field layout: sender, receiver, one zero spare ID
/// field, then the index; ID fields are `ceil(log2(n+1))` bits wide.
pub fn pack_label(label: &Label, n: u32, index_bits: u32) -> u64 {
    let idb = id_bits(n) as u32;
    ((label.sender as u64) << (2 * idb + index_bits))
        | ((label.receiver as u64) << (idb + index_bits))
        | label.index as u64
}

/// Input width for the label hash.
pub fn label_input_bits(n: u32, index_bits: u32) -> u32 {
    3 * id_bits(n) as u32 + index_bits
}

/// Everything the scheme needs that can be reused across instances with the
/// same sender/receiver sets: both helper families and the network-wide
/// hash function (whose seed is disseminated in-simulation, so its cost is
/// on the books).
#[derive(Debug, Clone)]
pub struct RoutingSetup {
    pub fam_s: HelperFamily,
    pub fam_r: HelperFamily,
    pub mu_s: u32,
    pub mu_r: u32,
    pub index_bits: u32,
    pub hash: HashFamilyMember,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct SeedChunk {
    pub idx: u32,
    pub word: u32,
}

impl BitSized for SeedChunk {
    fn bits(&self) -> u64 {
        (self.idx as u64).bits() + 32
    }
}

impl WireItem for SeedChunk {
    fn key(&self) -> u64 {
        0x5EED_C000 ^ self.idx as u64
    }
}

/// Builds helper families for both sides and broadcasts the hash seed.
#[allow(clippy::too_many_arguments)]
pub fn prepare_routing(
    session: &mut Session<'_>,
    s_flags: &[bool],
    r_flags: &[bool],
    k_s: u32,
    k_r: u32,
    p_s: f64,
    p_r: f64,
    index_bits: u32,
) -> Result<RoutingSetup, RoutingError> {
    let n = session.graph().node_count();
    if session.config().global_send_cap < 2 {
        return Err(RoutingError::BadInstance(String::from(
            "routing needs a send cap of at least 2",
        )));
    }
    let mu_s = helper_mu(k_s, p_s);
    let mu_r = helper_mu(k_r, p_r);
    let fam_s = compute_helpers(session, s_flags, mu_s, derive(session.config().seed, 0x5E17))?;
    let fam_r = compute_helpers(session, r_flags, mu_r, derive(session.config().seed, 0x5E18))?;

    // The hash seed is drawn from public randomness at node 1 and must be
    // known network-wide before the scheme runs; it travels as tokens.
    let a = label_input_bits(n, index_bits);
    let b = node_hash_bits(n);
    let k_ind = routing_independence(n);
    let w = a.max(b);
    let seed_bytes = ((k_ind * w) as usize + 7) / 8;
    let mut rng = ChaCha8Rng::seed_from_u64(derive(session.config().seed, 0x5EED));
    let mut bytes = vec![0u8; seed_bytes];
    rng.fill_bytes(&mut bytes);
    let mut items: Vec<Vec<SeedChunk>> = vec![Vec::new(); n as usize];
    items[0] = bytes
        .chunks(4)
        .enumerate()
        .map(|(i, ch)| {
            let mut word = [0u8; 4];
            word[..ch.len()].copy_from_slice(ch);
            SeedChunk {
                idx: i as u32,
                word: u32::from_le_bytes(word),
            }
        })
        .collect();
    run_disseminate(session, items)?;
    let hash = HashFamilyMember::new(a, b, k_ind, &bytes)
        .expect("seed length matches by construction");
    Ok(RoutingSetup {
        fam_s,
        fam_r,
        mu_s,
        mu_r,
        index_bits,
        hash,
    })
}

// ---------------------------------------------------------------------------
// Preparation: tokens to sender-helpers, labels to receiver-helpers.
// ---------------------------------------------------------------------------

/// One batch of assignments from `origin` to `helper`, shared by pointer
/// while it floods through the cluster.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum PrepPayload {
    Tokens(Arc<Vec<Token>>),
    Labels(Arc<Vec<Label>>),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct PrepRec {
    sender_side: bool,
    cluster: NodeId,
    origin: NodeId,
    helper: NodeId,
    ttl: u32,
    payload: PrepPayload,
}

impl PrepRec {
    /// Dedup key: (side, origin, helper) identifies a batch; the ttl is
    /// excluded because the same batch arrives over paths of different
    /// length.
    fn key(&self) -> u128 {
        ((self.sender_side as u128) << 80)
            | ((self.origin as u128) << 40)
            | self.helper as u128
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct PrepMsg(Arc<Vec<PrepRec>>);

impl BitSized for PrepMsg {
    fn bits(&self) -> u64 {
        self.0
            .iter()
            .map(|r| {
                96 + match &r.payload {
                    PrepPayload::Tokens(ts) => ts.iter().map(|t| t.bits()).sum::<u64>(),
                    PrepPayload::Labels(ls) => ls.iter().map(|l| l.bits()).sum::<u64>(),
                }
            })
            .sum()
    }
}

struct PrepProgram {
    cluster_s: NodeId,
    cluster_r: NodeId,
    depth: u32,
    /// Assignments this node emits in round 0 (it is the sender/receiver).
    outgoing: Vec<PrepRec>,
    /// Collected as helper.
    push_tokens: Vec<Token>,
    labels: Vec<Label>,
    seen: alloc::collections::BTreeSet<u128>,
}

impl PrepProgram {
    fn take_if_mine(&mut self, rec: &PrepRec, me: NodeId) {
        if rec.helper == me {
            match &rec.payload {
                PrepPayload::Tokens(ts) => self.push_tokens.extend(ts.iter().copied()),
                PrepPayload::Labels(ls) => self.labels.extend(ls.iter().copied()),
            }
        }
    }
}

impl NodeProgram for PrepProgram {
    type Local = PrepMsg;
    type Global = ();

    fn step(&mut self, ctx: &mut Ctx<'_, PrepMsg, ()>) -> Status {
        let mut fresh: Vec<PrepRec> = Vec::new();
        for (_, msg) in ctx.local_inbox {
            for rec in msg.0.iter() {
                // Assignments only travel inside the cluster (of the right
                // family) they belong to; helpers are cluster-local.
                let my_cluster = if rec.sender_side {
                    self.cluster_s
                } else {
                    self.cluster_r
                };
                if rec.cluster != my_cluster {
                    continue;
                }
                if self.seen.insert(rec.key()) {
                    let me = ctx.node;
                    self.take_if_mine(rec, me);
                    if rec.ttl > 1 {
                        fresh.push(PrepRec {
                            ttl: rec.ttl - 1,
                            ..rec.clone()
                        });
                    }
                }
            }
        }
        if ctx.round == 0 {
            for rec in core::mem::take(&mut self.outgoing) {
                if rec.helper == ctx.node {
                    self.take_if_mine(&rec.clone(), ctx.node);
                } else {
                    self.seen.insert(rec.key());
                    fresh.push(rec);
                }
            }
        }
        if !fresh.is_empty() {
            let payload = PrepMsg(Arc::new(fresh));
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
// Scheme: push to intermediates, request, answer, collect.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum SchemeMsg {
    Push(Token),
    Request(Label),
    Answer(Token),
}

impl BitSized for SchemeMsg {
    fn bits(&self) -> u64 {
        match self {
            SchemeMsg::Push(t) | SchemeMsg::Answer(t) => 2 + t.bits(),
            SchemeMsg::Request(l) => 2 + l.bits(),
        }
    }
}

struct PushProgram {
    queue: VecDeque<(NodeId, Token)>,
    rounds: u64,
    sigma: u32,
    /// label -> token received as intermediate.
    vault: BTreeMap<Label, Token>,
}

impl NodeProgram for PushProgram {
    type Local = ();
    type Global = SchemeMsg;

    fn step(&mut self, ctx: &mut Ctx<'_, (), SchemeMsg>) -> Status {
        for (_, msg) in ctx.global_inbox {
            if let SchemeMsg::Push(t) = msg {
                self.vault.insert(t.label, *t);
            }
        }
        let mut budget = self.sigma;
        while budget > 0 {
            match self.queue.pop_front() {
                Some((to, token)) => ctx.send_global(to, SchemeMsg::Push(token)),
                None => break,
            }
            budget -= 1;
        }
        if ctx.round >= self.rounds {
            Status::Done
        } else {
            Status::Running
        }
    }
}

struct RequestProgram {
    /// Labels this node must fetch as receiver-helper, with hash targets.
    requests: VecDeque<(NodeId, Label)>,
    /// Tokens parked here as intermediate.
    vault: BTreeMap<Label, Token>,
    /// Answer backlog as intermediate.
    backlog: VecDeque<(NodeId, Token)>,
    /// Tokens fetched as receiver-helper.
    fetched: Vec<Token>,
    missing: Option<Label>,
    rounds: u64,
    sigma_req: u32,
    sigma_ans: u32,
}

impl NodeProgram for RequestProgram {
    type Local = ();
    type Global = SchemeMsg;

    fn step(&mut self, ctx: &mut Ctx<'_, (), SchemeMsg>) -> Status {
        for (from, msg) in ctx.global_inbox {
            match msg {
                SchemeMsg::Request(label) => match self.vault.get(label) {
                    Some(t) => self.backlog.push_back((*from, *t)),
                    None => self.missing = Some(*label),
                },
                SchemeMsg::Answer(t) => self.fetched.push(*t),
                SchemeMsg::Push(_) => {}
            }
        }
        let mut budget = self.sigma_ans;
        while budget > 0 {
            match self.backlog.pop_front() {
                Some((to, token)) => ctx.send_global(to, SchemeMsg::Answer(token)),
                None => break,
            }
            budget -= 1;
        }
        let mut budget = self.sigma_req;
        while budget > 0 {
            match self.requests.pop_front() {
                Some((to, label)) => ctx.send_global(to, SchemeMsg::Request(label)),
                None => break,
            }
            budget -= 1;
        }
        if ctx.round >= self.rounds {
            Status::Done
        } else {
            Status::Running
        }
    }
}

// Collect: receiver-helpers flood fetched tokens back through the cluster.

/// A helper's fetched tokens for one receiver, batched and shared.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct CollectRec {
    cluster: NodeId,
    carrier: NodeId,
    receiver: NodeId,
    ttl: u32,
    tokens: Arc<Vec<Token>>,
}

impl CollectRec {
    fn key(&self) -> u64 {
        ((self.carrier as u64) << 32) | self.receiver as u64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct CollectMsg(Arc<Vec<CollectRec>>);

impl BitSized for CollectMsg {
    fn bits(&self) -> u64 {
        self.0
            .iter()
            .map(|r| 64 + r.tokens.iter().map(|t| t.bits()).sum::<u64>())
            .sum()
    }
}

struct CollectProgram {
    cluster_r: NodeId,
    depth: u32,
    outgoing: Vec<CollectRec>,
    received: Vec<Token>,
    seen: alloc::collections::BTreeSet<u64>,
}

impl NodeProgram for CollectProgram {
    type Local = CollectMsg;
    type Global = ();

    fn step(&mut self, ctx: &mut Ctx<'_, CollectMsg, ()>) -> Status {
        let mut fresh: Vec<CollectRec> = Vec::new();
        for (_, msg) in ctx.local_inbox {
            for rec in msg.0.iter() {
                if rec.cluster != self.cluster_r {
                    continue;
                }
                if self.seen.insert(rec.key()) {
                    if rec.receiver == ctx.node {
                        self.received.extend(rec.tokens.iter().copied());
                    }
                    if rec.ttl > 1 {
                        fresh.push(CollectRec {
                            ttl: rec.ttl - 1,
                            ..rec.clone()
                        });
                    }
                }
            }
        }
        if ctx.round == 0 {
            for rec in core::mem::take(&mut self.outgoing) {
                if rec.receiver == ctx.node {
                    self.received.extend(rec.tokens.iter().copied());
                } else {
                    self.seen.insert(rec.key());
                    fresh.push(rec);
                }
            }
        }
        if !fresh.is_empty() {
            let payload = CollectMsg(Arc::new(fresh));
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
// Orchestration.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct RoutingOutcome {
    /// Receiver -> tokens it holds after the run.
    pub delivered: BTreeMap<NodeId, Vec<Token>>,
    /// Largest number of tokens any sender-helper carried.
    pub max_push_load: usize,
    /// Largest number of labels any receiver-helper carried.
    pub max_label_load: usize,
}

/// Round-robin split of `items` over `helpers`: helper `j` gets items
/// `j, j + H, j + 2H, ...`, so nobody carries more than `ceil(len / H)`.
fn balanced_assignment<T: Clone>(items: &[T], helpers: &[NodeId]) -> Vec<(NodeId, Vec<T>)> {
    let mut batches: Vec<(NodeId, Vec<T>)> =
        helpers.iter().map(|&h| (h, Vec::new())).collect();
    for (j, item) in items.iter().enumerate() {
        batches[j % helpers.len()].1.push(item.clone());
    }
    batches.retain(|(_, b)| !b.is_empty());
    batches
}

/// Runs the full protocol for one instance and audits delivery: every
/// receiver must end up with exactly its expected label set.
pub fn token_routing(
    session: &mut Session<'_>,
    inst: &RoutingInstance,
    setup: &RoutingSetup,
) -> Result<RoutingOutcome, RoutingError> {
    let n = session.graph().node_count();
    let sigma = session.config().global_send_cap;
    let idx_bits = setup.index_bits;
    let hash_to = |label: &Label| -> NodeId {
        setup
            .hash
            .eval_to_node(pack_label(label, n, idx_bits), n)
            .expect("packed labels fit the hash input")
    };

    // --- Preparation: balanced assignment, then cluster-scoped floods.
    // Each (origin, helper) batch travels as one shared record.
    let mut outgoing: Vec<Vec<PrepRec>> = vec![Vec::new(); n as usize];
    for (&s, tokens) in &inst.tokens {
        let helpers = setup.fam_s.helper_set(s);
        if helpers.is_empty() {
            return Err(RoutingError::BadInstance(format!(
                "sender {s} is not in the sampled sender set"
            )));
        }
        for (h, batch) in balanced_assignment(tokens, helpers) {
            outgoing[(s - 1) as usize].push(PrepRec {
                sender_side: true,
                cluster: setup.fam_s.cluster_of[(s - 1) as usize],
                origin: s,
                helper: h,
                ttl: 2 * setup.fam_s.beta,
                payload: PrepPayload::Tokens(Arc::new(batch)),
            });
        }
    }
    for (&r, labels) in &inst.expected {
        let helpers = setup.fam_r.helper_set(r);
        if helpers.is_empty() {
            return Err(RoutingError::BadInstance(format!(
                "receiver {r} is not in the sampled receiver set"
            )));
        }
        for (h, batch) in balanced_assignment(labels, helpers) {
            outgoing[(r - 1) as usize].push(PrepRec {
                sender_side: false,
                cluster: setup.fam_r.cluster_of[(r - 1) as usize],
                origin: r,
                helper: h,
                ttl: 2 * setup.fam_r.beta,
                payload: PrepPayload::Labels(Arc::new(batch)),
            });
        }
    }
    let depth = (2 * setup.fam_s.beta).max(2 * setup.fam_r.beta);
    let prep = session.scoped("route.prep", |session| {
        let programs = (1..=n)
            .map(|v| PrepProgram {
                cluster_s: setup.fam_s.cluster_of[(v - 1) as usize],
                cluster_r: setup.fam_r.cluster_of[(v - 1) as usize],
                depth,
                outgoing: core::mem::take(&mut outgoing[(v - 1) as usize]),
                push_tokens: Vec::new(),
                labels: Vec::new(),
                seen: alloc::collections::BTreeSet::new(),
            })
            .collect();
        session.run_phase("flood", programs)
    })?;

    // Balance audit per the preparation contract: a helper carries at most
    // ceil(k_S / mu_S) tokens of any one sender and ceil(k_R / mu_R) labels
    // of any one receiver (it may serve several of each).
    let push_bound = (inst.k_s as usize).div_ceil(setup.mu_s as usize).max(1);
    let label_bound = (inst.k_r as usize).div_ceil(setup.mu_r as usize).max(1);
    let mut max_push_load = 0;
    let mut max_label_load = 0;
    for (i, p) in prep.iter().enumerate() {
        let mut per_sender: BTreeMap<NodeId, usize> = BTreeMap::new();
        for t in &p.push_tokens {
            *per_sender.entry(t.label.sender).or_insert(0) += 1;
        }
        if let Some((_, &got)) = per_sender.iter().max_by_key(|&(_, c)| c) {
            if got > push_bound {
                return Err(RoutingError::HelperOverload {
                    node: (i + 1) as NodeId,
                    got,
                    bound: push_bound,
                });
            }
            max_push_load = max_push_load.max(got);
        }
        let mut per_receiver: BTreeMap<NodeId, usize> = BTreeMap::new();
        for l in &p.labels {
            *per_receiver.entry(l.receiver).or_insert(0) += 1;
        }
        if let Some((_, &got)) = per_receiver.iter().max_by_key(|&(_, c)| c) {
            if got > label_bound {
                return Err(RoutingError::HelperOverload {
                    node: (i + 1) as NodeId,
                    got,
                    bound: label_bound,
                });
            }
            max_label_load = max_label_load.max(got);
        }
    }

    // --- Push stage, run for a globally agreed number of rounds.
    let push_counts = prep
        .iter()
        .map(|p| Some(p.push_tokens.len() as u64))
        .collect();
    let max_push = run_aggregate(session, MaxU64, push_counts)?;
    let push_rounds = max_push.div_ceil(sigma as u64) + 1;
    let mut sorted_tokens: Vec<Vec<Token>> = prep
        .iter()
        .map(|p| {
            let mut t = p.push_tokens.clone();
            t.sort_unstable();
            t
        })
        .collect();
    let push_out = session.scoped("route.push", |session| {
        let programs = (1..=n)
            .map(|v| PushProgram {
                queue: core::mem::take(&mut sorted_tokens[(v - 1) as usize])
                    .into_iter()
                    .map(|t| (hash_to(&t.label), t))
                    .collect(),
                rounds: push_rounds,
                sigma,
                vault: BTreeMap::new(),
            })
            .collect();
        session.run_phase("send", programs)
    })?;

    // --- Request/answer stage; length covers all requests plus the drain
    // of the largest possible answer backlog.
    let vault_counts = push_out
        .iter()
        .map(|p| Some(p.vault.len() as u64))
        .collect();
    let max_vault = run_aggregate(session, MaxU64, vault_counts)?;
    let label_counts = prep.iter().map(|p| Some(p.labels.len() as u64)).collect();
    let max_labels = run_aggregate(session, MaxU64, label_counts)?;
    let sigma_req = (sigma / 2).max(1);
    let sigma_ans = (sigma - sigma_req).max(1);
    let req_rounds =
        max_labels.div_ceil(sigma_req as u64) + max_vault.div_ceil(sigma_ans as u64) + 3;
    let mut vaults: Vec<BTreeMap<Label, Token>> =
        push_out.into_iter().map(|p| p.vault).collect();
    let mut label_lists: Vec<Vec<Label>> = prep
        .iter()
        .map(|p| {
            let mut l = p.labels.clone();
            l.sort_unstable();
            l
        })
        .collect();
    let req_out = session.scoped("route.request", |session| {
        let programs = (1..=n)
            .map(|v| RequestProgram {
                requests: core::mem::take(&mut label_lists[(v - 1) as usize])
                    .into_iter()
                    .map(|l| (hash_to(&l), l))
                    .collect(),
                vault: core::mem::take(&mut vaults[(v - 1) as usize]),
                backlog: VecDeque::new(),
                fetched: Vec::new(),
                missing: None,
                rounds: req_rounds,
                sigma_req,
                sigma_ans,
            })
            .collect();
        session.run_phase("exchange", programs)
    })?;
    for p in &req_out {
        if let Some(label) = p.missing {
            return Err(RoutingError::UnansweredRequest(label));
        }
    }

    // --- Collect: receiver-helpers flood their fetched tokens back,
    // batched per receiver.
    let mut outgoing: Vec<Vec<CollectRec>> = req_out
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut per_receiver: BTreeMap<NodeId, Vec<Token>> = BTreeMap::new();
            for &token in &p.fetched {
                per_receiver.entry(token.label.receiver).or_default().push(token);
            }
            per_receiver
                .into_iter()
                .map(|(receiver, tokens)| CollectRec {
                    cluster: setup.fam_r.cluster_of[i],
                    carrier: (i + 1) as NodeId,
                    receiver,
                    ttl: 2 * setup.fam_r.beta,
                    tokens: Arc::new(tokens),
                })
                .collect()
        })
        .collect();
    let depth = 2 * setup.fam_r.beta;
    let collect = session.scoped("route.collect", |session| {
        let programs = (1..=n)
            .map(|v| CollectProgram {
                cluster_r: setup.fam_r.cluster_of[(v - 1) as usize],
                depth,
                outgoing: core::mem::take(&mut outgoing[(v - 1) as usize]),
                received: Vec::new(),
                seen: alloc::collections::BTreeSet::new(),
            })
            .collect();
        session.run_phase("flood", programs)
    })?;

    // --- Delivery audit against the expected label sets.
    let mut delivered: BTreeMap<NodeId, Vec<Token>> = BTreeMap::new();
    for (i, p) in collect.iter().enumerate() {
        if !p.received.is_empty() {
            let mut tokens = p.received.clone();
            tokens.sort_unstable();
            delivered.insert((i + 1) as NodeId, tokens);
        }
    }
    for (&r, labels) in &inst.expected {
        let got = delivered.get(&r).map(|v| v.as_slice()).unwrap_or(&[]);
        let got_labels: Vec<Label> = got.iter().map(|t| t.label).collect();
        for w in got_labels.windows(2) {
            if w[0] == w[1] {
                return Err(RoutingError::DuplicateToken(w[0]));
            }
        }
        if &got_labels != labels {
            let missing = labels
                .iter()
                .find(|l| !got_labels.contains(l))
                .copied()
                .unwrap_or(labels[0]);
            return Err(RoutingError::MissingToken(missing));
        }
    }

    Ok(RoutingOutcome {
        delivered,
        max_push_load,
        max_label_load,
    })
}

/// One-shot entry point: builds the setup for the instance's sets, then
/// routes. Callers that route repeatedly over the same sets (the clique
/// simulation) call [`prepare_routing`] once and [`token_routing`] per
/// round instead.
pub fn route_instance(
    session: &mut Session<'_>,
    inst: &RoutingInstance,
) -> Result<(RoutingSetup, RoutingOutcome), RoutingError> {
    let n = session.graph().node_count();
    let mut s_flags = vec![false; n as usize];
    for &s in inst.tokens.keys() {
        s_flags[(s - 1) as usize] = true;
    }
    let mut r_flags = vec![false; n as usize];
    for &r in inst.expected.keys() {
        r_flags[(r - 1) as usize] = true;
    }
    let setup = prepare_routing(
        session,
        &s_flags,
        &r_flags,
        inst.k_s,
        inst.k_r,
        inst.p_s,
        inst.p_r,
        inst.index_bits,
    )?;
    let outcome = token_routing(session, inst, &setup)?;
    Ok((setup, outcome))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::SimConfig;
    use crate::gen::{gen_gnp_connected, gen_path};
    use crate::randkit::{sample_members, splitmix64};

    fn mk_token(s: NodeId, r: NodeId, i: u32) -> Token {
        Token {
            label: Label {
                sender: s,
                receiver: r,
                index: i,
            },
            // 32-bit payloads keep tokens within the small-n message bound.
            payload: splitmix64(((s as u64) << 32) | ((r as u64) << 8) | i as u64) & 0xFFFF_FFFF,
        }
    }

    #[test]
    fn single_token_on_path() {
        let g = gen_path(16, 1, 0);
        let mut s = Session::new(&g, SimConfig::for_n(16, 3)).unwrap();
        let mut tokens = BTreeMap::new();
        tokens.insert(1u32, vec![mk_token(1, 16, 0)]);
        let inst = RoutingInstance::new(1.0, 1.0, 1, 1, tokens).unwrap();
        let (_, out) = route_instance(&mut s, &inst).unwrap();
        assert_eq!(out.delivered[&16], vec![mk_token(1, 16, 0)]);
        assert_eq!(s.metrics().global_dropped, 0);
    }

    #[test]
    fn empty_workload_completes_without_token_traffic() {
        let g = gen_gnp_connected(32, 0.15, 1, 4);
        let mut s = Session::new(&g, SimConfig::for_n(32, 4)).unwrap();
        let inst = RoutingInstance::new(1.0, 1.0, 0, 0, BTreeMap::new()).unwrap();
        let (_, out) = route_instance(&mut s, &inst).unwrap();
        assert!(out.delivered.is_empty());
        let m = s.metrics();
        let route_sent: u64 = m
            .rows
            .iter()
            .filter(|r| r.phase.starts_with("route."))
            .map(|r| r.global_sent)
            .sum();
        assert_eq!(route_sent, 0);
    }

    #[test]
    fn self_addressed_tokens_still_route() {
        let g = gen_gnp_connected(64, 0.1, 1, 5);
        let mut s = Session::new(&g, SimConfig::for_n(64, 5)).unwrap();
        let members = sample_members(64, 0.25, 99);
        let mut tokens = BTreeMap::new();
        for &v in &members {
            tokens.insert(v, vec![mk_token(v, v, 0)]);
        }
        let inst = RoutingInstance::new(0.25, 0.25, 1, 1, tokens).unwrap();
        let (_, out) = route_instance(&mut s, &inst).unwrap();
        for &v in &members {
            assert_eq!(out.delivered[&v], vec![mk_token(v, v, 0)]);
        }
    }

    #[test]
    fn balanced_multi_token_instance_delivers_exactly() {
        for seed in 0..5u64 {
            let n = 256u32;
            let g = gen_gnp_connected(n, 0.05, 1, seed);
            let mut s = Session::new(&g, SimConfig::for_n(n, seed)).unwrap();
            let p = 1.0 / 8.0;
            let senders = sample_members(n, p, derive(seed, 10));
            let receivers = sample_members(n, p, derive(seed, 11));
            assert!(!senders.is_empty() && !receivers.is_empty());
            let k = 8u32;
            let mut tokens: BTreeMap<NodeId, Vec<Token>> = BTreeMap::new();
            for (si, &snd) in senders.iter().enumerate() {
                let mut per_pair: BTreeMap<(NodeId, NodeId), u32> = BTreeMap::new();
                let list = (0..k)
                    .map(|j| {
                        let r = receivers[(si + j as usize) % receivers.len()];
                        let idx = per_pair.entry((snd, r)).or_insert(0);
                        let t = mk_token(snd, r, *idx);
                        *idx += 1;
                        t
                    })
                    .collect();
                tokens.insert(snd, list);
            }
            let k_r = (senders.len() as u32 * k).div_ceil(receivers.len() as u32) + k;
            let inst = RoutingInstance::new(p, p, k, k_r, tokens).unwrap();
            let (setup, out) = route_instance(&mut s, &inst).unwrap();
            let total: usize = out.delivered.values().map(|v| v.len()).sum();
            assert_eq!(total, inst.total_tokens());
            assert_eq!(s.metrics().global_dropped, 0);
            let bound = (k as usize).div_ceil(setup.mu_s as usize).max(1);
            assert!(out.max_push_load <= bound);
        }
    }

    #[test]
    fn expected_label_with_no_token_is_reported() {
        let g = gen_path(16, 1, 0);
        let mut s = Session::new(&g, SimConfig::for_n(16, 3)).unwrap();
        let mut tokens = BTreeMap::new();
        tokens.insert(1u32, vec![mk_token(1, 16, 0)]);
        let mut inst = RoutingInstance::new(1.0, 1.0, 2, 2, tokens).unwrap();
        // Receiver additionally expects a label nobody sends.
        inst.expected.get_mut(&16).unwrap().push(Label {
            sender: 1,
            receiver: 16,
            index: 1,
        });
        let err = route_instance(&mut s, &inst).unwrap_err();
        assert!(matches!(err, RoutingError::UnansweredRequest(_)));
    }

    #[test]
    fn mu_formula() {
        assert_eq!(helper_mu(9, 1.0 / 32.0), 3);
        assert_eq!(helper_mu(100, 1.0 / 4.0), 4);
        assert_eq!(helper_mu(0, 0.5), 1);
    }

    #[test]
    fn label_packing_is_injective_at_width() {
        let n = 100u32;
        let ib = 4;
        let mut seen = alloc::collections::BTreeSet::new();
        for s in [1u32, 50, 100] {
            for r in [1u32, 3, 100] {
                for i in [0u32, 7, 15] {
                    let key = pack_label(
                        &Label {
                            sender: s,
                            receiver: r,
                            index: i,
                        },
                        n,
                        ib,
                    );
                    assert!(seen.insert(key));
                    assert!(key < 1u64 << label_input_bits(n, ib));
                }
            }
        }
    }
}
