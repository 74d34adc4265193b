//! Plain-text interchange formats.
//!
//! Graphs: first line `n m`, then `m` lines `u v w` (1-based IDs, integer
//! weight). Instance files carry `#key value` metadata lines before the
//! edge list; the graph parser ignores them, the instance parsers require
//! them.

use std::collections::BTreeMap;

use hybridsim_core::gen::{GammaInstance, KsspInstance};
use hybridsim_core::graph::{Graph, GraphError, NodeId, Weight};
use hybridsim_core::skeleton::Skeleton;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FmtError {
    #[error("line {line}: malformed: {content:?}")]
    MalformedLine { line: usize, content: String },
    #[error("graph invariant violated: {0}")]
    Graph(GraphError),
    #[error("graph is not connected")]
    Disconnected,
    #[error("missing header #{0}")]
    MissingHeader(&'static str),
    #[error("bad header #{key}: {msg}")]
    BadHeader { key: String, msg: String },
}

impl From<GraphError> for FmtError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::Disconnected => FmtError::Disconnected,
            other => FmtError::Graph(other),
        }
    }
}

pub fn write_graph(g: &Graph) -> String {
    let mut out = String::new();
    push_edge_list(&mut out, g);
    out
}

fn push_edge_list(out: &mut String, g: &Graph) {
    use std::fmt::Write;
    let edges = g.edges();
    writeln!(out, "{} {}", g.node_count(), edges.len()).unwrap();
    for (u, v, w) in edges {
        writeln!(out, "{u} {v} {w}").unwrap();
    }
}

/// Splits the text into `#` headers and body lines.
fn split_headers(text: &str) -> (BTreeMap<String, String>, Vec<(usize, &str)>) {
    let mut headers = BTreeMap::new();
    let mut body = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            let mut parts = rest.splitn(2, ' ');
            let key = parts.next().unwrap_or("").to_string();
            let value = parts.next().unwrap_or("").trim().to_string();
            headers.insert(key, value);
        } else {
            body.push((i + 1, trimmed));
        }
    }
    (headers, body)
}

fn parse_edge_body(body: &[(usize, &str)]) -> Result<(u32, Vec<(NodeId, NodeId, Weight)>), FmtError> {
    let (first_no, first) = body.first().ok_or(FmtError::MalformedLine {
        line: 1,
        content: String::from("<empty>"),
    })?;
    let mut it = first.split_whitespace();
    let n: u32 = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or(FmtError::MalformedLine {
            line: *first_no,
            content: first.to_string(),
        })?;
    let m: usize = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or(FmtError::MalformedLine {
            line: *first_no,
            content: first.to_string(),
        })?;
    if it.next().is_some() {
        return Err(FmtError::MalformedLine {
            line: *first_no,
            content: first.to_string(),
        });
    }
    let mut edges = Vec::with_capacity(m);
    for &(line_no, line) in &body[1..] {
        let mut it = line.split_whitespace();
        let bad = || FmtError::MalformedLine {
            line: line_no,
            content: line.to_string(),
        };
        let u: u32 = it.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
        let v: u32 = it.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
        let w: u64 = it.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
        if it.next().is_some() {
            return Err(bad());
        }
        edges.push((u, v, w));
    }
    if edges.len() != m {
        return Err(FmtError::MalformedLine {
            line: *first_no,
            content: format!("header says {m} edges, found {}", edges.len()),
        });
    }
    Ok((n, edges))
}

/// Parses the edge-list format. With `strict` set, disconnected graphs are
/// rejected.
pub fn read_graph(text: &str, strict: bool) -> Result<Graph, FmtError> {
    let (_, body) = split_headers(text);
    let (n, edges) = parse_edge_body(&body)?;
    let g = Graph::from_edges(n, &edges)?;
    if strict && !g.is_connected() {
        return Err(FmtError::Disconnected);
    }
    Ok(g)
}

fn header<'a>(
    headers: &'a BTreeMap<String, String>,
    key: &'static str,
) -> Result<&'a str, FmtError> {
    headers
        .get(key)
        .map(|s| s.as_str())
        .ok_or(FmtError::MissingHeader(key))
}

fn parse_header<T: std::str::FromStr>(
    headers: &BTreeMap<String, String>,
    key: &'static str,
) -> Result<T, FmtError> {
    header(headers, key)?
        .parse()
        .map_err(|_| FmtError::BadHeader {
            key: key.to_string(),
            msg: format!("cannot parse {:?}", headers[key]),
        })
}

fn id_list(headers: &BTreeMap<String, String>, key: &'static str) -> Result<Vec<NodeId>, FmtError> {
    header(headers, key)?
        .split(',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.trim().parse().map_err(|_| FmtError::BadHeader {
                key: key.to_string(),
                msg: format!("bad ID {t:?}"),
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// k-SSP worst-case instance.
// ---------------------------------------------------------------------------

pub fn write_kssp(inst: &KsspInstance) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    writeln!(out, "#type kssp").unwrap();
    writeln!(out, "#pathlen {}", inst.path_len).unwrap();
    writeln!(out, "#l {}", inst.l).unwrap();
    writeln!(out, "#b {}", inst.b).unwrap();
    writeln!(out, "#v1 {}", inst.v1).unwrap();
    writeln!(out, "#v2 {}", inst.v2).unwrap();
    writeln!(out, "#s1 {}", join_ids(&inst.s1)).unwrap();
    writeln!(out, "#s2 {}", join_ids(&inst.s2)).unwrap();
    push_edge_list(&mut out, &inst.graph);
    out
}

fn join_ids(ids: &[NodeId]) -> String {
    ids.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

pub fn read_kssp(text: &str) -> Result<KsspInstance, FmtError> {
    let (headers, body) = split_headers(text);
    if header(&headers, "type")? != "kssp" {
        return Err(FmtError::BadHeader {
            key: "type".into(),
            msg: "expected kssp".into(),
        });
    }
    let (n, edges) = parse_edge_body(&body)?;
    let graph = Graph::from_edges(n, &edges)?;
    Ok(KsspInstance {
        graph,
        b: parse_header(&headers, "b")?,
        v1: parse_header(&headers, "v1")?,
        v2: parse_header(&headers, "v2")?,
        s1: id_list(&headers, "s1")?,
        s2: id_list(&headers, "s2")?,
        l: parse_header(&headers, "l")?,
        path_len: parse_header(&headers, "pathlen")?,
    })
}

// ---------------------------------------------------------------------------
// Set-disjointness diameter instance.
// ---------------------------------------------------------------------------

pub fn write_gamma(inst: &GammaInstance) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    writeln!(out, "#type gamma").unwrap();
    writeln!(out, "#k {}", inst.k).unwrap();
    writeln!(out, "#ell {}", inst.ell).unwrap();
    writeln!(out, "#w {}", inst.w).unwrap();
    writeln!(out, "#a {}", bits_to_string(&inst.a_bits)).unwrap();
    writeln!(out, "#b {}", bits_to_string(&inst.b_bits)).unwrap();
    push_edge_list(&mut out, &inst.graph);
    out
}

fn bits_to_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub fn parse_bits(s: &str, len: usize) -> Result<Vec<bool>, FmtError> {
    let bits: Vec<bool> = match s {
        "zeros" => vec![false; len],
        "ones" => vec![true; len],
        other => other
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(FmtError::BadHeader {
                    key: "bits".into(),
                    msg: format!("bad bit char {c:?}"),
                }),
            })
            .collect::<Result<_, _>>()?,
    };
    if bits.len() != len {
        return Err(FmtError::BadHeader {
            key: "bits".into(),
            msg: format!("expected {len} bits, got {}", bits.len()),
        });
    }
    Ok(bits)
}

pub fn read_gamma(text: &str) -> Result<GammaInstance, FmtError> {
    let (headers, body) = split_headers(text);
    if header(&headers, "type")? != "gamma" {
        return Err(FmtError::BadHeader {
            key: "type".into(),
            msg: "expected gamma".into(),
        });
    }
    let k: u32 = parse_header(&headers, "k")?;
    let ell: u64 = parse_header(&headers, "ell")?;
    let w: u64 = parse_header(&headers, "w")?;
    let kk = (k * k) as usize;
    let a_bits = parse_bits(header(&headers, "a")?, kk)?;
    let b_bits = parse_bits(header(&headers, "b")?, kk)?;
    let (n, edges) = parse_edge_body(&body)?;
    let graph = Graph::from_edges(n, &edges)?;
    // Roles follow the canonical layout, reconstructible from k and ell.
    let rebuilt = hybridsim_core::gen::gen_gamma_diam(k, ell, w, &a_bits, &b_bits).map_err(|e| {
        FmtError::BadHeader {
            key: "type".into(),
            msg: e.to_string(),
        }
    })?;
    if rebuilt.graph != graph {
        return Err(FmtError::BadHeader {
            key: "type".into(),
            msg: "edge list does not match the declared parameters".into(),
        });
    }
    Ok(rebuilt)
}

// ---------------------------------------------------------------------------
// Skeleton serialization.
// ---------------------------------------------------------------------------

pub fn write_skeleton(sk: &Skeleton) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    writeln!(out, "#skeleton").unwrap();
    writeln!(out, "#x {}", sk.x).unwrap();
    writeln!(out, "#xi {}", sk.xi).unwrap();
    writeln!(out, "#h {}", sk.h).unwrap();
    writeln!(out, "#members {}", join_ids(&sk.members)).unwrap();
    let n = sk.member_flags.len();
    writeln!(out, "{} {}", n, sk.edges.len()).unwrap();
    for &(u, v, w) in &sk.edges {
        writeln!(out, "{u} {v} {w}").unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use hybridsim_core::gen::{gen_gamma_diam, gen_gnp_connected, gen_kssp_lowerbound};
    use proptest::prelude::*;

    #[test]
    fn tiny_graph_roundtrip() {
        let text = "2 1\n1 2 1\n";
        let g = read_graph(text, true).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edges(), vec![(1, 2, 1)]);
        assert_eq!(write_graph(&g), text);
    }

    #[test]
    fn self_loop_line_is_rejected() {
        let err = read_graph("2 1\n1 1 5\n", false).unwrap_err();
        assert!(matches!(err, FmtError::Graph(GraphError::SelfLoop { id: 1 })));
    }

    #[test]
    fn duplicate_edge_rejected() {
        let err = read_graph("3 2\n1 2 1\n2 1 4\n", false).unwrap_err();
        assert!(matches!(err, FmtError::Graph(GraphError::DuplicateEdge { .. })));
    }

    #[test]
    fn malformed_line_reports_position() {
        let err = read_graph("2 1\n1 2\n", false).unwrap_err();
        assert!(matches!(err, FmtError::MalformedLine { line: 2, .. }));
    }

    #[test]
    fn strict_mode_rejects_disconnected() {
        let err = read_graph("3 1\n1 2 1\n", true).unwrap_err();
        assert!(matches!(err, FmtError::Disconnected));
        assert!(read_graph("3 1\n1 2 1\n", false).is_ok());
    }

    #[test]
    fn kssp_roundtrip() {
        let inst = gen_kssp_lowerbound(10, 8, 3, 5).unwrap();
        let text = write_kssp(&inst);
        let back = read_kssp(&text).unwrap();
        assert_eq!(back.graph, inst.graph);
        assert_eq!(back.s1, inst.s1);
        assert_eq!(back.s2, inst.s2);
        assert_eq!(back.b, inst.b);
    }

    #[test]
    fn gamma_roundtrip() {
        let a = parse_bits("0110", 4).unwrap();
        let b = parse_bits("ones", 4).unwrap();
        let inst = gen_gamma_diam(2, 2, 5, &a, &b).unwrap();
        let text = write_gamma(&inst);
        let back = read_gamma(&text).unwrap();
        assert_eq!(back.graph, inst.graph);
        assert_eq!(back.a_bits, inst.a_bits);
        assert_eq!(back.roles, inst.roles);
    }

    proptest! {
        #[test]
        fn graph_roundtrip_is_identity(seed in 0u64..500, n in 2u32..40) {
            let g = gen_gnp_connected(n, 0.2, 9, seed);
            let text = write_graph(&g);
            let back = read_graph(&text, true).unwrap();
            prop_assert_eq!(back, g);
        }
    }
}
