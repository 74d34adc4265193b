//! Oracle-backed verification of result CSVs: recompute ground truth and
//! check no-underestimation, exactness (plain or radius-limited), and ratio
//! bounds.

use std::collections::BTreeMap;

use hybridsim_core::graph::{Graph, NodeId, INF};
use hybridsim_core::oracle::{bfs_hops, diameter_oracle, dijkstra_sssp};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("missing column {0:?}")]
    MissingColumn(&'static str),
    #[error("line {line}: malformed row")]
    Malformed { line: usize },
    #[error("graph mismatch: {0}")]
    GraphMismatch(String),
}

#[derive(Debug, Default)]
pub struct VerifyReport {
    pub checked: usize,
    pub violations: Vec<String>,
}

impl VerifyReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

fn parse_dist(tok: &str) -> Option<u64> {
    if tok == "inf" {
        Some(INF)
    } else {
        tok.parse().ok()
    }
}

fn columns(header: &str) -> BTreeMap<&str, usize> {
    header
        .trim()
        .split(',')
        .enumerate()
        .map(|(i, name)| (name, i))
        .collect()
}

/// Checks a distance-results CSV. Without a ratio bound, estimates must be
/// exactly the oracle distances; with one, they must stay within
/// `bound * d` and never underestimate. `exact_radius` additionally pins
/// exactness for pairs within that many hops.
pub fn verify_distances(
    csv: &str,
    g: &Graph,
    ratio_bound: Option<f64>,
    exact_radius: Option<u64>,
) -> Result<VerifyReport, VerifyError> {
    let mut lines = csv.lines().enumerate();
    let (_, header) = lines.next().ok_or(VerifyError::Malformed { line: 1 })?;
    let cols = columns(header);
    let node_c = *cols.get("node").ok_or(VerifyError::MissingColumn("node"))?;
    let source_c = *cols
        .get("source")
        .ok_or(VerifyError::MissingColumn("source"))?;
    let est_c = *cols
        .get("estimate")
        .ok_or(VerifyError::MissingColumn("estimate"))?;

    let n = g.node_count();
    let mut oracle_cache: BTreeMap<NodeId, Vec<u64>> = BTreeMap::new();
    let mut hops_cache: BTreeMap<NodeId, Vec<u64>> = BTreeMap::new();
    let mut report = VerifyReport::default();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let get = |c: usize| fields.get(c).copied();
        let bad = VerifyError::Malformed { line: i + 1 };
        let node: NodeId = get(node_c).and_then(|t| t.parse().ok()).ok_or(bad)?;
        let bad = VerifyError::Malformed { line: i + 1 };
        let source: NodeId = get(source_c).and_then(|t| t.parse().ok()).ok_or(bad)?;
        let bad = VerifyError::Malformed { line: i + 1 };
        let est: u64 = get(est_c).and_then(parse_dist).ok_or(bad)?;
        if node < 1 || node > n || source < 1 || source > n {
            return Err(VerifyError::GraphMismatch(format!(
                "row references ({node},{source}) outside 1..={n}"
            )));
        }
        let d = oracle_cache
            .entry(source)
            .or_insert_with(|| dijkstra_sssp(g, source))[(node - 1) as usize];
        report.checked += 1;
        if est < d {
            report
                .violations
                .push(format!("underestimate at ({node},{source}): {est} < {d}"));
            continue;
        }
        match ratio_bound {
            None => {
                if est != d {
                    report
                        .violations
                        .push(format!("mismatch at ({node},{source}): {est} != {d}"));
                }
            }
            Some(bound) => {
                if d > 0 && est != INF && est as f64 > bound * d as f64 + 1e-9 {
                    report.violations.push(format!(
                        "ratio at ({node},{source}): {est} > {bound} * {d}"
                    ));
                } else if est == INF && d != INF {
                    report
                        .violations
                        .push(format!("missing estimate at ({node},{source})"));
                }
                if let Some(radius) = exact_radius {
                    let hops = hops_cache
                        .entry(source)
                        .or_insert_with(|| bfs_hops(g, source))[(node - 1) as usize];
                    if hops <= radius && est != d {
                        report.violations.push(format!(
                            "inexact inside radius at ({node},{source}): {est} != {d}"
                        ));
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Checks a diameter-results CSV: agreement across nodes, no
/// underestimation, and an optional upper bound `factor * D + additive`.
pub fn verify_diameter(
    csv: &str,
    g: &Graph,
    factor: f64,
    additive: u64,
) -> Result<VerifyReport, VerifyError> {
    let mut lines = csv.lines().enumerate();
    let (_, header) = lines.next().ok_or(VerifyError::Malformed { line: 1 })?;
    let cols = columns(header);
    let node_c = *cols.get("node").ok_or(VerifyError::MissingColumn("node"))?;
    let dt_c = *cols
        .get("dtilde")
        .ok_or(VerifyError::MissingColumn("dtilde"))?;
    let d = diameter_oracle(g, false);
    let mut report = VerifyReport::default();
    let mut first: Option<u64> = None;
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let bad = VerifyError::Malformed { line: i + 1 };
        let node: NodeId = fields
            .get(node_c)
            .and_then(|t| t.parse().ok())
            .ok_or(bad)?;
        let bad = VerifyError::Malformed { line: i + 1 };
        let dt: u64 = fields.get(dt_c).copied().and_then(parse_dist).ok_or(bad)?;
        report.checked += 1;
        match first {
            None => first = Some(dt),
            Some(f) if f != dt => report
                .violations
                .push(format!("node {node} disagrees: {dt} != {f}")),
            _ => {}
        }
        if dt < d {
            report
                .violations
                .push(format!("node {node} underestimates: {dt} < {d}"));
        }
        if (dt as f64) > factor * d as f64 + additive as f64 + 1e-9 {
            report.violations.push(format!(
                "node {node} exceeds bound: {dt} > {factor} * {d} + {additive}"
            ));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csvout::distances_csv;
    use hybridsim_core::gen::gen_path;

    #[test]
    fn exact_results_pass() {
        let g = gen_path(4, 1, 0);
        let d = dijkstra_sssp(&g, 1);
        let rows: Vec<(NodeId, NodeId, u64, u64)> = (1..=4u32)
            .map(|v| (v, 1, d[(v - 1) as usize], d[(v - 1) as usize]))
            .collect();
        let report = verify_distances(&distances_csv(&rows), &g, None, None).unwrap();
        assert!(report.pass());
        assert_eq!(report.checked, 4);
    }

    #[test]
    fn decremented_entry_is_flagged() {
        let g = gen_path(4, 1, 0);
        let d = dijkstra_sssp(&g, 1);
        let mut rows: Vec<(NodeId, NodeId, u64, u64)> = (1..=4u32)
            .map(|v| (v, 1, d[(v - 1) as usize], d[(v - 1) as usize]))
            .collect();
        rows[3].2 -= 1; // an underestimate must be caught
        let report = verify_distances(&distances_csv(&rows), &g, None, None).unwrap();
        assert!(!report.pass());
        assert!(report.violations[0].contains("(4,1)"));
    }

    #[test]
    fn ratio_mode_accepts_overestimates_within_bound() {
        let g = gen_path(4, 1, 0);
        let rows = vec![(4u32, 1u32, 4u64, 3u64)];
        let report = verify_distances(&distances_csv(&rows), &g, Some(1.5), None).unwrap();
        assert!(report.pass());
        let report = verify_distances(&distances_csv(&rows), &g, Some(1.2), None).unwrap();
        assert!(!report.pass());
    }

    #[test]
    fn missing_column_is_reported() {
        let g = gen_path(3, 1, 0);
        let err = verify_distances("node,estimate\n1,0\n", &g, None, None).unwrap_err();
        assert!(matches!(err, VerifyError::MissingColumn("source")));
    }

    #[test]
    fn graph_mismatch_detected() {
        let g = gen_path(3, 1, 0);
        let csv = "node,source,estimate,oracle,ratio\n9,1,0,0,1\n";
        let err = verify_distances(csv, &g, None, None).unwrap_err();
        assert!(matches!(err, VerifyError::GraphMismatch(_)));
    }
}
