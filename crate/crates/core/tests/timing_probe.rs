use std::time::Instant;
use hybridsim_core::engine::{Session, SimConfig};
use hybridsim_core::gen::gen_gnp_connected;
use hybridsim_core::randkit::{derive, sample_members, splitmix64};
use hybridsim_core::routing::{route_instance, Label, RoutingInstance, Token};
use std::collections::BTreeMap;

fn build_inst(n: u32, p: f64, k: u32, seed: u64) -> RoutingInstance {
    let senders = sample_members(n, p, derive(seed, 0x0A11));
    let receivers = sample_members(n, p, derive(seed, 0x0B22));
    let mut tokens = BTreeMap::new();
    for (si, &s) in senders.iter().enumerate() {
        let mut per_pair: BTreeMap<u32, u32> = BTreeMap::new();
        let list: Vec<Token> = (0..k).map(|j| {
            let r = receivers[(si + j as usize) % receivers.len()];
            let idx = per_pair.entry(r).or_insert(0);
            let t = Token { label: Label { sender: s, receiver: r, index: *idx }, payload: splitmix64(j as u64) & 0xFFFF_FFFF };
            *idx += 1;
            t
        }).collect();
        tokens.insert(s, list);
    }
    let k_r = (senders.len() as u32 * k).div_ceil(receivers.len() as u32) + k;
    RoutingInstance::new(p, p, k, k_r, tokens).unwrap()
}

#[test]
fn route_sweep() {
    let n = 4096u32;
    let mut pts = Vec::new();
    for k in [16u32, 64, 256] {
        let mut tot = 0.0;
        for seed in 1..=2u64 {
            let t = Instant::now();
            let g = gen_gnp_connected(n, 6.0 / n as f64, 1, derive(seed, 0xBE7C));
            let inst = build_inst(n, 64.0 / n as f64, k, seed);
            let mut s = Session::new(&g, SimConfig::for_n(n, seed)).unwrap();
            route_instance(&mut s, &inst).unwrap();
            let m = s.into_metrics();
            let route_rounds: u64 = m.phase_rounds.iter().filter(|(t, _)| t.starts_with("route.")).map(|(_, r)| r).sum();
            eprintln!("k={k} seed={seed}: route_rounds={route_rounds} total_rounds={} wall={:?}", m.rounds_elapsed, t.elapsed());
            tot += route_rounds as f64;
        }
        pts.push((k as f64, tot / 2.0));
    }
    let logs: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let nn = logs.len() as f64;
    let sx: f64 = logs.iter().map(|p| p.0).sum();
    let sy: f64 = logs.iter().map(|p| p.1).sum();
    let sxx: f64 = logs.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = logs.iter().map(|p| p.0 * p.1).sum();
    let slope = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
    eprintln!("slope = {slope:.3}");
    assert!(slope > 0.35 && slope < 0.65, "slope {slope}");
}
