//! Token dissemination: make k globally distinct items known to every node,
//! using only the global network.
//!
//! The default strategy is a tree pipeline: items are first rebalanced to
//! hash-selected owners, owners feed them up the implicit ID tree, and the
//! root streams them back down with fan-out two. Measured cost is
//! Theta(k / sigma + log n) rounds. The strategy sits behind
//! [`DisseminateStrategy`] so a faster one can be swapped in.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::vec::Vec;

use crate::engine::{BitSized, Ctx, NodeProgram, Session, Status};
use crate::graph::NodeId;
use crate::primitives::aggregate::{run_aggregate, SumU64};
use crate::primitives::PrimError;
use crate::randkit::{derive, splitmix64};

/// An item that can travel the global network on its own: sized, ordered,
/// and carrying a stable fingerprint used to pick its rebalance owner.
pub trait WireItem: Clone + Ord + BitSized {
    fn key(&self) -> u64;
}

impl WireItem for u64 {
    fn key(&self) -> u64 {
        *self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum DisMsg<T> {
    Rebalance(T),
    Up(T),
    Down(T),
}

impl<T: BitSized> BitSized for DisMsg<T> {
    fn bits(&self) -> u64 {
        match self {
            DisMsg::Rebalance(t) | DisMsg::Up(t) | DisMsg::Down(t) => 2 + t.bits(),
        }
    }
}

struct TreePipelineProgram<T> {
    k: u64,
    salt: u64,
    sigma: u32,
    rebalance: VecDeque<T>,
    up: VecDeque<T>,
    down: VecDeque<(NodeId, T)>,
    downs_from_parent: u64,
    store: BTreeSet<T>,
}

impl<T: WireItem> TreePipelineProgram<T> {
    fn owner(&self, item: &T, n: u32) -> NodeId {
        1 + (splitmix64(self.salt ^ item.key()) % n as u64) as u32
    }

    fn schedule_down(&mut self, item: &T, v: u64, n: u64) {
        for c in [2 * v, 2 * v + 1] {
            if c <= n {
                self.down.push_back((c as NodeId, item.clone()));
            }
        }
    }
}

impl<T: WireItem> NodeProgram for TreePipelineProgram<T> {
    type Local = ();
    type Global = DisMsg<T>;

    fn step(&mut self, ctx: &mut Ctx<'_, (), DisMsg<T>>) -> Status {
        let n = ctx.n() as u64;
        let v = ctx.node as u64;
        if ctx.round == 0 {
            // Items this node already owns skip the rebalance hop; the rest
            // wait in the rebalance queue. Stored items reached the store
            // before the pipeline, which is fine: the down-stream delivers
            // everything to everyone regardless.
            let mine: Vec<T> = self.rebalance.drain(..).collect();
            for item in mine {
                if self.owner(&item, ctx.n()) == ctx.node {
                    if self.store.insert(item.clone()) {
                        if v == 1 {
                            self.schedule_down(&item, v, n);
                        } else {
                            self.up.push_back(item);
                        }
                    }
                } else {
                    self.rebalance.push_back(item);
                }
            }
        }
        for (_, msg) in ctx.global_inbox {
            match msg {
                DisMsg::Rebalance(item) | DisMsg::Up(item) => {
                    if self.store.insert(item.clone()) {
                        if v == 1 {
                            self.schedule_down(item, v, n);
                        } else {
                            self.up.push_back(item.clone());
                        }
                    }
                }
                DisMsg::Down(item) => {
                    // Down flows along unique tree paths, so it arrives at
                    // most once; forward even if already stored via another
                    // role, the children still need it.
                    self.downs_from_parent += 1;
                    self.store.insert(item.clone());
                    self.schedule_down(item, v, n);
                }
            }
        }
        // Fixed priority within the send budget: drain downstream first,
        // then upstream, then rebalance.
        let mut budget = self.sigma;
        while budget > 0 {
            if let Some((to, item)) = self.down.pop_front() {
                ctx.send_global(to, DisMsg::Down(item));
            } else if let Some(item) = self.up.pop_front() {
                ctx.send_global((v / 2) as NodeId, DisMsg::Up(item));
            } else if let Some(item) = self.rebalance.pop_front() {
                let to = self.owner(&item, ctx.n());
                ctx.send_global(to, DisMsg::Rebalance(item));
            } else {
                break;
            }
            budget -= 1;
        }
        let drained =
            self.rebalance.is_empty() && self.up.is_empty() && self.down.is_empty();
        let has_children = 2 * v <= n;
        // Inner nodes stay alive until the full down-stream has passed
        // through them; items they stored early still have to be relayed to
        // their subtree.
        let finished = if v != 1 && has_children {
            self.downs_from_parent >= self.k
        } else {
            self.store.len() as u64 >= self.k
        };
        if drained && finished {
            Status::Done
        } else {
            Status::Running
        }
    }
}

/// Dissemination strategies take per-node item lists and must leave every
/// node holding the full union.
pub trait DisseminateStrategy {
    fn run<T: WireItem>(
        &self,
        session: &mut Session<'_>,
        items: Vec<Vec<T>>,
    ) -> Result<Vec<Vec<T>>, PrimError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TreePipeline;

impl DisseminateStrategy for TreePipeline {
    fn run<T: WireItem>(
        &self,
        session: &mut Session<'_>,
        items: Vec<Vec<T>>,
    ) -> Result<Vec<Vec<T>>, PrimError> {
        let n = session.graph().node_count();
        assert_eq!(items.len(), n as usize);
        // Count k first so every node can detect completion. Items must be
        // globally distinct (holders of shared items deduplicate up front).
        let counts = items.iter().map(|t| Some(t.len() as u64)).collect();
        let k = run_aggregate(session, SumU64, counts)?;
        if k == 0 {
            return Ok(items);
        }
        let salt = derive(session.config().seed, 0xD155);
        let sigma = session.config().global_send_cap;
        let programs = items
            .into_iter()
            .map(|list| TreePipelineProgram {
                k,
                salt,
                sigma,
                rebalance: list.into_iter().collect(),
                up: VecDeque::new(),
                down: VecDeque::new(),
                downs_from_parent: 0,
                store: BTreeSet::new(),
            })
            .collect();
        let out = session.run_phase("disseminate", programs)?;
        Ok(out
            .into_iter()
            .map(|p| p.store.into_iter().collect())
            .collect())
    }
}

/// Disseminates with the default tree-pipeline strategy and returns each
/// node's final store (sorted).
pub fn run_disseminate<T: WireItem>(
    session: &mut Session<'_>,
    items: Vec<Vec<T>>,
) -> Result<Vec<Vec<T>>, PrimError> {
    TreePipeline.run(session, items)
}

/// Convenience: disseminate and return the union held by node 1.
pub fn disseminate_union<T: WireItem>(
    session: &mut Session<'_>,
    items: Vec<Vec<T>>,
) -> Result<Vec<T>, PrimError> {
    let mut stores = run_disseminate(session, items)?;
    Ok(core::mem::take(&mut stores[0]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::SimConfig;
    use crate::gen::gen_gnp_connected;
    use crate::randkit::ceil_log2;
    use alloc::vec;
    use alloc::vec::Vec;

    #[test]
    fn single_token_reaches_everyone_quickly() {
        let g = gen_gnp_connected(64, 0.1, 1, 1);
        let mut s = Session::new(&g, SimConfig::for_n(64, 1)).unwrap();
        let mut items: Vec<Vec<u64>> = vec![Vec::new(); 64];
        items[0].push(0xAB);
        let stores = run_disseminate(&mut s, items).unwrap();
        assert!(stores.iter().all(|st| st == &[0xAB]));
        // 2 ceil(log2 n) plus a calibrated constant (C = 20) covering the
        // counting aggregate, the rebalance hop, and both tree passes.
        assert!(s.rounds_elapsed() <= 2 * ceil_log2(64) as u64 + 20);
    }

    #[test]
    fn zero_tokens_costs_only_the_count() {
        let g = gen_gnp_connected(32, 0.2, 1, 2);
        let mut s = Session::new(&g, SimConfig::for_n(32, 2)).unwrap();
        let items: Vec<Vec<u64>> = vec![Vec::new(); 32];
        run_disseminate(&mut s, items).unwrap();
        let m = s.metrics();
        assert_eq!(m.phase_rounds.get("disseminate"), None);
        assert!(m.phase_rounds.contains_key("aggregate"));
    }

    #[test]
    fn full_load_union_exact_across_seeds() {
        for seed in 0..10u64 {
            let n = 256u32;
            let g = gen_gnp_connected(n, 0.05, 1, seed);
            let mut s = Session::new(&g, SimConfig::for_n(n, seed)).unwrap();
            let mut expected = Vec::new();
            let items: Vec<Vec<u64>> = (0..n as u64)
                .map(|i| {
                    let tok = splitmix64(seed ^ i);
                    expected.push(tok);
                    vec![tok]
                })
                .collect();
            expected.sort_unstable();
            expected.dedup();
            let stores = run_disseminate(&mut s, items).unwrap();
            for st in &stores {
                assert_eq!(st, &expected);
            }
            assert_eq!(s.metrics().global_dropped, 0);
        }
    }

    #[test]
    fn concentrated_load_drains() {
        let n = 64u32;
        let g = gen_gnp_connected(n, 0.1, 1, 7);
        let mut s = Session::new(&g, SimConfig::for_n(n, 7)).unwrap();
        let mut items: Vec<Vec<u64>> = vec![Vec::new(); n as usize];
        items[17] = (0..200u64).map(|i| splitmix64(i)).collect();
        let stores = run_disseminate(&mut s, items).unwrap();
        assert!(stores.iter().all(|st| st.len() == 200));
    }
}
