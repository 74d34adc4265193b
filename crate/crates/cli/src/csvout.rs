//! CSV serialization. Schemas are fixed and byte-stable so repeated runs
//! diff cleanly.

use std::fmt::Write;

use hybridsim_core::engine::Metrics;
use hybridsim_core::graph::{NodeId, INF};
use hybridsim_core::oracle::DistanceMatrix;

fn dist_str(d: u64) -> String {
    if d == INF {
        "inf".to_string()
    } else {
        d.to_string()
    }
}

/// One row per executed round.
pub fn metrics_csv(m: &Metrics) -> String {
    let mut out = String::from("round,phase,global_sent,global_dropped,max_recv,local_bits\n");
    for row in &m.rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.round, row.phase, row.global_sent, row.global_dropped, row.max_recv, row.local_bits
        )
        .unwrap();
    }
    out
}

/// Distance results: one row per (node, source).
pub fn distances_csv(rows: &[(NodeId, NodeId, u64, u64)]) -> String {
    let mut out = String::from("node,source,estimate,oracle,ratio\n");
    for &(node, source, est, oracle) in rows {
        let ratio = if est == oracle {
            String::from("1")
        } else if oracle == 0 || est == INF {
            String::from("inf")
        } else {
            format!("{:.6}", est as f64 / oracle as f64)
        };
        writeln!(
            out,
            "{},{},{},{},{}",
            node,
            source,
            dist_str(est),
            dist_str(oracle),
            ratio
        )
        .unwrap();
    }
    out
}

/// Diameter results: one row per node.
pub fn diameter_csv(rows: &[(NodeId, u64, u64)]) -> String {
    let mut out = String::from("node,dtilde,oracle\n");
    for &(node, dtilde, oracle) in rows {
        writeln!(out, "{},{},{}", node, dist_str(dtilde), dist_str(oracle)).unwrap();
    }
    out
}

/// Full matrix, one row per source node.
pub fn matrix_csv(m: &DistanceMatrix) -> String {
    let mut out = String::new();
    for u in 1..=m.n() {
        let row: Vec<String> = m.row(u).iter().map(|&d| dist_str(d)).collect();
        writeln!(out, "{}", row.join(",")).unwrap();
    }
    out
}

/// Delivered-token dump for routing runs.
pub fn tokens_csv(rows: &[(NodeId, NodeId, u32, u64)]) -> String {
    let mut out = String::from("receiver,sender,index,payload\n");
    for &(r, s, i, p) in rows {
        writeln!(out, "{r},{s},{i},{p}").unwrap();
    }
    out
}

/// Benchmark rows: one per (point, seed, phase).
pub fn bench_csv(rows: &[(String, u64, String, u64)]) -> String {
    let mut out = String::from("point,seed,phase,rounds\n");
    for (point, seed, phase, rounds) in rows {
        writeln!(out, "{point},{seed},{phase},{rounds}").unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inf_prints_as_inf() {
        let csv = distances_csv(&[(1, 2, INF, 5)]);
        assert!(csv.contains("inf"));
    }

    #[test]
    fn exact_rows_have_unit_ratio() {
        let csv = distances_csv(&[(1, 2, 7, 7)]);
        assert!(csv.lines().nth(1).unwrap().ends_with(",1"));
    }
}
