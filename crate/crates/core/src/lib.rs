//! Simulator for hybrid networks: a round-synchronous execution engine where
//! nodes communicate over an unbounded local graph and a capacity-bounded
//! global network, plus the distributed shortest-path and diameter algorithms
//! built on top of it and the sequential oracles used to verify them.
//!
//! The crate is `no_std` (with `alloc`); file formats, CSV output and the
//! command line front end live in the companion `hybridsim-cli` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod apsp;
pub mod clique;
pub mod diam;
pub mod engine;
pub mod gen;
pub mod graph;
pub mod oracle;
pub mod primitives;
pub mod randkit;
pub mod routing;
pub mod skeleton;
pub mod spsim;

pub use graph::{Graph, GraphError, NodeId, Weight, INF};
