//! Pipeline runners: one seeded run of a named algorithm on a graph,
//! producing results and metrics CSV text.

use hybridsim_core::apsp::hybrid_apsp;
use hybridsim_core::clique::CliqueAlgoSpec;
use hybridsim_core::diam::diam_simulation;
use hybridsim_core::engine::{Metrics, OverflowPolicy, Session, SimConfig};
use hybridsim_core::graph::{Graph, NodeId};
use hybridsim_core::oracle::{apsp_oracle, diameter_oracle, dijkstra_sssp};
use hybridsim_core::primitives::disseminate::run_disseminate;
use hybridsim_core::randkit::{derive, sample_members, splitmix64};
use hybridsim_core::routing::{route_instance, Label, RoutingInstance, Token};
use hybridsim_core::spsim::{hybrid_sssp, sp_simulation};
use hybridsim_core::clique::FullExchangeApsp;
use thiserror::Error;

use crate::csvout;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Apsp,
    Sssp,
    Kssp,
    Diameter,
    Route,
    Disseminate,
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "apsp" => Ok(Algorithm::Apsp),
            "sssp" => Ok(Algorithm::Sssp),
            "kssp" => Ok(Algorithm::Kssp),
            "diameter" => Ok(Algorithm::Diameter),
            "route" => Ok(Algorithm::Route),
            "disseminate" => Ok(Algorithm::Disseminate),
            other => Err(format!("unknown algorithm {other:?}")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub xi: f64,
    pub eta: u32,
    pub source: NodeId,
    pub source_count: u32,
    pub route_p: f64,
    pub route_k: u32,
    pub tokens: u32,
    pub sigma: Option<u32>,
    pub rho: Option<u32>,
    pub message_bits: Option<u64>,
    pub drop_random: bool,
    pub max_rounds: Option<u64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            xi: 16.0,
            eta: 1,
            source: 1,
            source_count: 4,
            route_p: 1.0 / 32.0,
            route_k: 32,
            tokens: 64,
            sigma: None,
            rho: None,
            message_bits: None,
            drop_random: false,
            max_rounds: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("engine: {0}")]
    Engine(String),
}

pub fn build_config(n: u32, seed: u64, opts: &RunOptions) -> SimConfig {
    let mut cfg = SimConfig::for_n(n, seed);
    if let Some(sigma) = opts.sigma {
        cfg.global_send_cap = sigma;
        cfg.global_recv_cap = 4 * sigma;
    }
    if let Some(rho) = opts.rho {
        cfg.global_recv_cap = rho;
    }
    if let Some(bits) = opts.message_bits {
        cfg.message_bits = bits;
    }
    if opts.drop_random {
        cfg.overflow_policy = OverflowPolicy::DropRandom;
    }
    if let Some(mr) = opts.max_rounds {
        cfg.max_rounds = mr;
    }
    cfg
}

#[derive(Debug)]
pub struct RunOutput {
    pub results_csv: String,
    pub metrics_csv: String,
    pub summary: String,
    pub metrics: Metrics,
}

/// Executes one seeded run. Results always carry the oracle column so the
/// verify command (and humans) can audit them directly.
pub fn run_algorithm(
    g: &Graph,
    alg: Algorithm,
    seed: u64,
    opts: &RunOptions,
) -> Result<RunOutput, RunError> {
    let n = g.node_count();
    let cfg = build_config(n, seed, opts);
    let mut session = Session::new(g, cfg).map_err(|e| RunError::BadParams(e.to_string()))?;
    let engine_err = |e: &dyn std::fmt::Display| RunError::Engine(e.to_string());

    let (results_csv, summary) = match alg {
        Algorithm::Apsp => {
            let got = hybrid_apsp(&mut session, opts.xi).map_err(|e| engine_err(&e))?;
            let want = apsp_oracle(g);
            let mut rows = Vec::with_capacity((n as usize) * (n as usize));
            let mut exact = true;
            for u in 1..=n {
                for v in 1..=n {
                    let est = got.get(u, v);
                    let ora = want.dist(u, v);
                    exact &= est == ora;
                    rows.push((u, v, est, ora));
                }
            }
            (
                csvout::distances_csv(&rows),
                format!(
                    "apsp n={n} seed={seed} skeleton={} h={} rounds={} exact={exact}",
                    got.skeleton_size, got.h, got.t_b
                ),
            )
        }
        Algorithm::Sssp => {
            if opts.source < 1 || opts.source > n {
                return Err(RunError::BadParams(format!(
                    "source {} out of range 1..={n}",
                    opts.source
                )));
            }
            let store = hybrid_sssp(&mut session, opts.source, opts.xi)
                .map_err(|e| engine_err(&e))?;
            let want = dijkstra_sssp(g, opts.source);
            let mut rows = Vec::with_capacity(n as usize);
            let mut exact = true;
            for v in 1..=n {
                let est = store.estimate(v, 0);
                let ora = want[(v - 1) as usize];
                exact &= est == ora;
                rows.push((v, opts.source, est, ora));
            }
            (
                csvout::distances_csv(&rows),
                format!(
                    "sssp n={n} seed={seed} source={} rounds={} exact={exact}",
                    opts.source, store.t_b
                ),
            )
        }
        Algorithm::Kssp => {
            let k = opts.source_count.min(n).max(1);
            let sources = pick_sources(n, k, seed);
            let store = sp_simulation::<FullExchangeApsp>(
                &mut session,
                CliqueAlgoSpec::exact_apsp(),
                &sources,
                opts.eta,
                opts.xi,
            )
            .map_err(|e| engine_err(&e))?;
            let mut rows = Vec::with_capacity(n as usize * sources.len());
            for (si, &s) in sources.iter().enumerate() {
                let want = dijkstra_sssp(g, s);
                for v in 1..=n {
                    rows.push((v, s, store.estimate(v, si), want[(v - 1) as usize]));
                }
            }
            (
                csvout::distances_csv(&rows),
                format!(
                    "kssp n={n} seed={seed} k={k} eta={} h={} exact_radius={} rounds={}",
                    store.eta,
                    store.h,
                    store.eta as u64 * store.h,
                    store.t_b
                ),
            )
        }
        Algorithm::Diameter => {
            let run = diam_simulation(&mut session, CliqueAlgoSpec::exact_apsp(), opts.eta, opts.xi)
                .map_err(|e| engine_err(&e))?;
            let want = diameter_oracle(g, false);
            let rows: Vec<(NodeId, u64, u64)> = run
                .values
                .iter()
                .enumerate()
                .map(|(i, &v)| ((i + 1) as NodeId, v, want))
                .collect();
            (
                csvout::diameter_csv(&rows),
                format!(
                    "diameter n={n} seed={seed} h={} h_hat={} d_skel={} agree={} rounds={}",
                    run.h,
                    run.h_hat,
                    run.d_skeleton,
                    run.agreed_value().is_some(),
                    run.t_b
                ),
            )
        }
        Algorithm::Route => {
            let inst = build_route_instance(n, opts.route_p, opts.route_k, seed)?;
            let total = inst.total_tokens();
            let (_, out) = route_instance(&mut session, &inst).map_err(|e| engine_err(&e))?;
            let mut rows = Vec::new();
            for (&r, tokens) in &out.delivered {
                for t in tokens {
                    rows.push((r, t.label.sender, t.label.index, t.payload));
                }
            }
            (
                csvout::tokens_csv(&rows),
                format!(
                    "route n={n} seed={seed} tokens={total} delivered={} rounds={}",
                    rows.len(),
                    session.rounds_elapsed()
                ),
            )
        }
        Algorithm::Disseminate => {
            let k = opts.tokens;
            let mut items: Vec<Vec<u64>> = vec![Vec::new(); n as usize];
            for j in 0..k {
                let holder = (j % n) as usize;
                items[holder].push(splitmix64(derive(seed, 0xD15 + j as u64)));
            }
            let stores = run_disseminate(&mut session, items).map_err(|e| engine_err(&e))?;
            let mut out = String::from("node,held\n");
            for (i, st) in stores.iter().enumerate() {
                use std::fmt::Write;
                writeln!(out, "{},{}", i + 1, st.len()).unwrap();
            }
            let all_equal = stores.windows(2).all(|w| w[0] == w[1]);
            (
                out,
                format!(
                    "disseminate n={n} seed={seed} k={k} union_everywhere={all_equal} rounds={}",
                    session.rounds_elapsed()
                ),
            )
        }
    };

    let metrics = session.into_metrics();
    Ok(RunOutput {
        results_csv,
        metrics_csv: csvout::metrics_csv(&metrics),
        summary,
        metrics,
    })
}

/// Deterministic source pick: a seeded shuffle of the ID space.
pub fn pick_sources(n: u32, k: u32, seed: u64) -> Vec<NodeId> {
    let mut ids: Vec<NodeId> = (1..=n).collect();
    // Fisher-Yates driven by the derived stream.
    let mut state = derive(seed, 0x50C);
    for i in (1..ids.len()).rev() {
        state = splitmix64(state);
        let j = (state % (i as u64 + 1)) as usize;
        ids.swap(i, j);
    }
    let mut out: Vec<NodeId> = ids.into_iter().take(k as usize).collect();
    out.sort_unstable();
    out
}

/// Balanced synthetic routing workload: sampled sender/receiver sets, k
/// tokens per sender assigned round-robin so no receiver exceeds its bound.
pub fn build_route_instance(
    n: u32,
    p: f64,
    k: u32,
    seed: u64,
) -> Result<RoutingInstance, RunError> {
    let senders = sample_members(n, p, derive(seed, 0x0A11));
    let receivers = sample_members(n, p, derive(seed, 0x0B22));
    if senders.is_empty() || receivers.is_empty() {
        return Err(RunError::BadParams(format!(
            "sampling with p={p} produced an empty side (seed {seed})"
        )));
    }
    let mut tokens = std::collections::BTreeMap::new();
    for (si, &s) in senders.iter().enumerate() {
        let mut per_pair: std::collections::BTreeMap<NodeId, u32> = Default::default();
        let list: Vec<Token> = (0..k)
            .map(|j| {
                let r = receivers[(si + j as usize) % receivers.len()];
                let idx = per_pair.entry(r).or_insert(0);
                let t = Token {
                    label: Label {
                        sender: s,
                        receiver: r,
                        index: *idx,
                    },
                    payload: splitmix64(derive(seed, ((s as u64) << 20) ^ j as u64))
                        & 0xFFFF_FFFF,
                };
                *idx += 1;
                t
            })
            .collect();
        tokens.insert(s, list);
    }
    let k_r = (senders.len() as u32 * k).div_ceil(receivers.len() as u32) + k;
    RoutingInstance::new(p, p, k, k_r, tokens).map_err(|e| RunError::BadParams(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use hybridsim_core::gen::gen_gnp_connected;

    #[test]
    fn algorithm_names_parse() {
        assert!("apsp".parse::<Algorithm>().is_ok());
        assert!("diameter".parse::<Algorithm>().is_ok());
        assert!("frobnicate".parse::<Algorithm>().is_err());
    }

    #[test]
    fn sssp_run_is_exact_and_deterministic() {
        let g = gen_gnp_connected(64, 0.1, 5, 3);
        let opts = RunOptions::default();
        let a = run_algorithm(&g, Algorithm::Sssp, 7, &opts).unwrap();
        let b = run_algorithm(&g, Algorithm::Sssp, 7, &opts).unwrap();
        assert!(a.summary.contains("exact=true"));
        assert_eq!(a.results_csv, b.results_csv);
        assert_eq!(a.metrics_csv, b.metrics_csv);
    }

    #[test]
    fn source_pick_is_deterministic_and_sorted() {
        let a = pick_sources(100, 5, 42);
        let b = pick_sources(100, 5, 42);
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn route_run_reports_full_delivery() {
        let g = gen_gnp_connected(128, 0.06, 1, 5);
        let opts = RunOptions {
            route_p: 0.125,
            route_k: 4,
            ..Default::default()
        };
        let out = run_algorithm(&g, Algorithm::Route, 5, &opts).unwrap();
        let summary = &out.summary;
        let tokens: u64 = summary
            .split_whitespace()
            .find_map(|t| t.strip_prefix("tokens=").and_then(|v| v.parse().ok()))
            .unwrap();
        let delivered: u64 = summary
            .split_whitespace()
            .find_map(|t| t.strip_prefix("delivered=").and_then(|v| v.parse().ok()))
            .unwrap();
        assert_eq!(tokens, delivered);
    }
}
