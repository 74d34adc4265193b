//! Global aggregation over the implicit ID binary tree (node `i` has
//! children `2i` and `2i+1`): converge-cast to the root, then broadcast the
//! result back down. Uses only the global network; exact for any
//! associative, commutative reducer with identity.

use alloc::vec::Vec;

use crate::engine::{BitSized, Ctx, EngineError, NodeProgram, Session, Status};
use crate::graph::NodeId;

pub trait Reducer {
    type Value: Clone + Ord + BitSized;
    fn identity(&self) -> Self::Value;
    fn combine(&self, a: &Self::Value, b: &Self::Value) -> Self::Value;
}

#[derive(Debug, Clone, Copy)]
pub struct MaxU64;
impl Reducer for MaxU64 {
    type Value = u64;
    fn identity(&self) -> u64 {
        0
    }
    fn combine(&self, a: &u64, b: &u64) -> u64 {
        *a.max(b)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SumU64;
impl Reducer for SumU64 {
    type Value = u64;
    fn identity(&self) -> u64 {
        0
    }
    fn combine(&self, a: &u64, b: &u64) -> u64 {
        a + b
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MinU64;
impl Reducer for MinU64 {
    type Value = u64;
    fn identity(&self) -> u64 {
        u64::MAX
    }
    fn combine(&self, a: &u64, b: &u64) -> u64 {
        *a.min(b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum AggMsg<V> {
    Up(V),
    Down(V),
}

impl<V: BitSized> BitSized for AggMsg<V> {
    fn bits(&self) -> u64 {
        match self {
            AggMsg::Up(v) | AggMsg::Down(v) => 1 + v.bits(),
        }
    }
}

/// Height of the subtree rooted at `v` in the ID tree over `1..=n`.
fn subtree_height(v: NodeId, n: u32) -> u64 {
    let mut h = 0u64;
    let mut span = v as u64;
    while span * 2 <= n as u64 {
        span *= 2;
        h += 1;
    }
    h
}

struct AggregateProgram<R: Reducer> {
    reducer: R,
    acc: R::Value,
    height: u64,
    result: Option<R::Value>,
}

impl<R: Reducer> NodeProgram for AggregateProgram<R> {
    type Local = ();
    type Global = AggMsg<R::Value>;

    fn step(&mut self, ctx: &mut Ctx<'_, (), AggMsg<R::Value>>) -> Status {
        for (_, msg) in ctx.global_inbox {
            match msg {
                AggMsg::Up(v) => self.acc = self.reducer.combine(&self.acc, v),
                AggMsg::Down(v) => self.result = Some(v.clone()),
            }
        }
        let n = ctx.n() as u64;
        let v = ctx.node as u64;
        // Upward: after the whole subtree has reported (round == height).
        if ctx.round == self.height {
            if v == 1 {
                self.result = Some(self.acc.clone());
            } else {
                ctx.send_global((v / 2) as NodeId, AggMsg::Up(self.acc.clone()));
            }
        }
        // Downward: forward the result the round after it becomes known.
        if let Some(result) = self.result.take() {
            for c in [2 * v, 2 * v + 1] {
                if c <= n {
                    ctx.send_global(c as NodeId, AggMsg::Down(result.clone()));
                }
            }
            self.result = Some(result);
            return Status::Done;
        }
        Status::Running
    }
}

/// Runs the aggregation; every node learns the same exact fold. Nodes with
/// `None` input contribute the identity.
pub fn run_aggregate<R: Reducer + Clone>(
    session: &mut Session<'_>,
    reducer: R,
    inputs: Vec<Option<R::Value>>,
) -> Result<R::Value, EngineError> {
    let n = session.graph().node_count();
    assert_eq!(inputs.len(), n as usize);
    let programs = inputs
        .into_iter()
        .enumerate()
        .map(|(i, input)| AggregateProgram {
            reducer: reducer.clone(),
            acc: input.unwrap_or_else(|| reducer.identity()),
            height: subtree_height((i + 1) as NodeId, n),
            result: None,
        })
        .collect();
    let out = session.run_phase("aggregate", programs)?;
    let result = out[0].result.clone().expect("root always has the result");
    debug_assert!(
        out.iter().all(|p| p.result.as_ref() == Some(&result)),
        "aggregation must agree at every node"
    );
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::SimConfig;
    use crate::gen::{gen_gnp_connected, gen_path};
    use crate::randkit::ceil_log2;
    use alloc::vec;

    #[test]
    fn max_over_three() {
        let g = gen_path(3, 1, 0);
        let mut s = Session::new(&g, SimConfig::for_n(3, 0)).unwrap();
        let inputs = vec![Some(3u64), Some(1), Some(4)];
        assert_eq!(run_aggregate(&mut s, MaxU64, inputs).unwrap(), 4);
    }

    #[test]
    fn sum_of_ones_within_round_bound() {
        let g = gen_gnp_connected(256, 0.05, 1, 1);
        let mut s = Session::new(&g, SimConfig::for_n(256, 1)).unwrap();
        let inputs = vec![Some(1u64); 256];
        assert_eq!(run_aggregate(&mut s, SumU64, inputs).unwrap(), 256);
        assert!(s.rounds_elapsed() <= 2 * ceil_log2(256) as u64 + 2);
    }

    #[test]
    fn min_matches_sequential_fold() {
        let g = gen_gnp_connected(100, 0.1, 1, 2);
        let vals: Vec<u64> = (0..100).map(|i| (i * 37 + 11) % 91).collect();
        let mut s = Session::new(&g, SimConfig::for_n(100, 2)).unwrap();
        let inputs = vals.iter().map(|&v| Some(v)).collect();
        let got = run_aggregate(&mut s, MinU64, inputs).unwrap();
        assert_eq!(got, *vals.iter().min().unwrap());
    }

    #[test]
    fn partial_participation_uses_identity() {
        let g = gen_path(8, 1, 0);
        let mut s = Session::new(&g, SimConfig::for_n(8, 0)).unwrap();
        let mut inputs = vec![None; 8];
        inputs[5] = Some(9u64);
        assert_eq!(run_aggregate(&mut s, MaxU64, inputs).unwrap(), 9);
    }

    #[test]
    fn two_node_tree() {
        let g = gen_path(2, 1, 0);
        let mut s = Session::new(&g, SimConfig::for_n(2, 0)).unwrap();
        let inputs = vec![Some(5u64), Some(7)];
        assert_eq!(run_aggregate(&mut s, SumU64, inputs).unwrap(), 12);
        assert!(s.rounds_elapsed() <= 4);
    }
}
