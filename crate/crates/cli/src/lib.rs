//! IO companion for the simulator core: plain-text instance formats, CSV
//! serialization of results and metrics, the benchmark fitting helper, and
//! the pipeline runners behind the `hybridsim` binary.

pub mod csvout;
pub mod fit;
pub mod fmt;
pub mod runner;
pub mod verify;
