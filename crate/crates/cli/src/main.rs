//! Batch front end: generate instances, run algorithms against their
//! oracles, verify result files, and sweep scaling benchmarks.
//!
//! Exit codes: 0 success, 2 validation failure, 3 engine error, 4 bad
//! arguments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hybridsim_cli::{csvout, fit, fmt, runner, verify};
use hybridsim_core::gen;
use hybridsim_core::graph::Graph;
use hybridsim_core::randkit::derive;

const EXIT_VALIDATION: u8 = 2;
const EXIT_ENGINE: u8 = 3;
const EXIT_BAD_ARGS: u8 = 4;

#[derive(Parser)]
#[command(name = "hybridsim", disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate an instance file.
    Gen {
        #[command(subcommand)]
        what: GenCmd,
    },
    /// Run an algorithm over one or more seeds, writing result and metrics
    /// CSVs.
    Run(RunArgs),
    /// Re-derive the oracle truths for a results file and audit it.
    Verify(VerifyArgs),
    /// Sweep a scaling benchmark to CSV.
    Bench(BenchArgs),
}

#[derive(Subcommand)]
enum GenCmd {
    /// Path graph 1-2-...-n.
    Path {
        #[arg(long)]
        n: u32,
        #[arg(long, default_value_t = 1)]
        wmax: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Connected G(n, p) with uniform weights.
    Gnp {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 1)]
        wmax: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Worst-case multi-source instance (long path with two source bundles).
    Kssp {
        #[arg(long)]
        path_len: u64,
        #[arg(long)]
        k: u32,
        /// Attachment offset; defaults to ceil(sqrt(k)).
        #[arg(long)]
        l: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Set-disjointness diameter instance.
    Gamma {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        ell: u64,
        #[arg(long)]
        w: u64,
        /// Bit string of length k*k, or "zeros"/"ones".
        #[arg(long, default_value = "zeros")]
        a: String,
        #[arg(long, default_value = "zeros")]
        b: String,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// One of: apsp, sssp, kssp, diameter, route, disseminate.
    algorithm: String,
    /// Graph or instance file to run on.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Inline generator spec instead of a file: "gnp N P [WMAX]" or
    /// "path N [WMAX]"; the run seed doubles as the generator seed.
    #[arg(long, name = "SPEC")]
    gen: Option<String>,
    /// Seeds: "7", "1..20" (inclusive), or "1,4,9".
    #[arg(long, default_value = "1")]
    seeds: String,
    /// Output directory (default: $HYBRID_OUT or the working directory).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 16.0)]
    xi: f64,
    #[arg(long, default_value_t = 1)]
    eta: u32,
    /// Source node for sssp.
    #[arg(long, default_value_t = 1)]
    source: u32,
    /// Source count for kssp.
    #[arg(long, default_value_t = 4)]
    sources: u32,
    /// Sampling probability for route.
    #[arg(long, default_value_t = 1.0 / 32.0)]
    route_p: f64,
    /// Tokens per sender for route.
    #[arg(long, default_value_t = 32)]
    route_k: u32,
    /// Token count for disseminate.
    #[arg(long, default_value_t = 64)]
    tokens: u32,
    /// Override the per-round global send cap.
    #[arg(long)]
    sigma: Option<u32>,
    /// Override the per-round global receive cap.
    #[arg(long)]
    rho: Option<u32>,
    #[arg(long)]
    message_bits: Option<u64>,
    /// Drop random overflow messages instead of failing.
    #[arg(long)]
    drop_random: bool,
    #[arg(long)]
    max_rounds: Option<u64>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    results: PathBuf,
    #[arg(long)]
    graph: PathBuf,
    /// "distances" (default) or "diameter".
    #[arg(long, default_value = "distances")]
    kind: String,
    /// Accept estimates up to this multiple of the oracle distance; exact
    /// match is required when absent.
    #[arg(long)]
    ratio_bound: Option<f64>,
    /// Require exactness for pairs within this many hops.
    #[arg(long)]
    exact_radius: Option<u64>,
    /// Diameter bound: dtilde <= factor * D + additive.
    #[arg(long, default_value_t = 1.0)]
    factor: f64,
    #[arg(long, default_value_t = 0)]
    additive: u64,
}

#[derive(Args)]
struct BenchArgs {
    /// "route" or "apsp".
    what: String,
    /// Node count (route) or comma list of node counts (apsp).
    #[arg(long, default_value = "4096")]
    n: String,
    /// Comma list of per-sender token counts for route.
    #[arg(long, default_value = "16,64,256")]
    k: String,
    #[arg(long, default_value = "1..3")]
    seeds: String,
    /// Approximate sampled set size for route (|S| = |R|).
    #[arg(long, default_value_t = 64)]
    set_size: u32,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version are successes, everything else is usage error 4.
            use clap::error::ErrorKind;
            let kind = e.kind();
            let _ = e.print();
            return if matches!(kind, ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_BAD_ARGS)
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}

struct CliError {
    code: u8,
    msg: String,
}

fn bad_args(msg: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_BAD_ARGS,
        msg: msg.into(),
    }
}

fn validation(msg: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_VALIDATION,
        msg: msg.into(),
    }
}

fn engine(msg: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_ENGINE,
        msg: msg.into(),
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Gen { what } => cmd_gen(what),
        Cmd::Run(args) => cmd_run(args),
        Cmd::Verify(args) => cmd_verify(args),
        Cmd::Bench(args) => cmd_bench(args),
    }
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("HYBRID_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| bad_args(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    std::fs::write(path, content)
        .map_err(|e| bad_args(format!("cannot write {}: {e}", path.display())))
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| bad_args(format!("cannot read {}: {e}", path.display())))
}

fn emit(path: Option<PathBuf>, default_name: &str, content: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            write_file(&p, content)?;
            println!("wrote {}", p.display());
        }
        None => {
            write_file(Path::new(default_name), content)?;
            println!("wrote {default_name}");
        }
    }
    Ok(())
}

fn cmd_gen(what: GenCmd) -> Result<(), CliError> {
    match what {
        GenCmd::Path { n, wmax, seed, out } => {
            if n < 2 {
                return Err(bad_args("path needs n >= 2"));
            }
            let g = gen::gen_path(n, wmax, seed);
            emit(out, "path.txt", &fmt::write_graph(&g))
        }
        GenCmd::Gnp {
            n,
            p,
            wmax,
            seed,
            out,
        } => {
            if n < 2 || p <= 0.0 || p > 1.0 || wmax < 1 {
                return Err(bad_args("gnp needs n >= 2, 0 < p <= 1, wmax >= 1"));
            }
            let g = gen::gen_gnp_connected(n, p, wmax, seed);
            emit(out, "gnp.txt", &fmt::write_graph(&g))
        }
        GenCmd::Kssp {
            path_len,
            k,
            l,
            seed,
            out,
        } => {
            let l = l.unwrap_or_else(|| (k as f64).sqrt().ceil() as u64);
            let inst = gen::gen_kssp_lowerbound(path_len, k, l, seed)
                .map_err(|e| bad_args(e.to_string()))?;
            emit(out, "kssp.txt", &fmt::write_kssp(&inst))
        }
        GenCmd::Gamma { k, ell, w, a, b, out } => {
            let kk = (k * k) as usize;
            let a = fmt::parse_bits(&a, kk).map_err(|e| bad_args(e.to_string()))?;
            let b = fmt::parse_bits(&b, kk).map_err(|e| bad_args(e.to_string()))?;
            let inst =
                gen::gen_gamma_diam(k, ell, w, &a, &b).map_err(|e| bad_args(e.to_string()))?;
            emit(out, "gamma.txt", &fmt::write_gamma(&inst))
        }
    }
}

/// Expands "7", "1..20" (inclusive) or "1,4,9".
fn parse_seeds(spec: &str) -> Result<Vec<u64>, CliError> {
    let spec = spec.trim();
    if let Some((a, b)) = spec.split_once("..") {
        let a: u64 = a.parse().map_err(|_| bad_args(format!("bad seed range {spec:?}")))?;
        let b: u64 = b.parse().map_err(|_| bad_args(format!("bad seed range {spec:?}")))?;
        if a > b {
            return Err(bad_args(format!("empty seed range {spec:?}")));
        }
        return Ok((a..=b).collect());
    }
    spec.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| bad_args(format!("bad seed {t:?}")))
        })
        .collect()
}

fn parse_u64_list(spec: &str) -> Result<Vec<u64>, CliError> {
    spec.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| bad_args(format!("bad list entry {t:?}")))
        })
        .collect()
}

/// "gnp N P [WMAX]" or "path N [WMAX]".
fn graph_from_spec(spec: &str, seed: u64) -> Result<Graph, CliError> {
    let toks: Vec<&str> = spec.split_whitespace().collect();
    match toks.as_slice() {
        ["gnp", n, p, rest @ ..] => {
            let n: u32 = n.parse().map_err(|_| bad_args("bad n in gen spec"))?;
            let p: f64 = p.parse().map_err(|_| bad_args("bad p in gen spec"))?;
            let wmax: u64 = match rest {
                [] => 1,
                [w] => w.parse().map_err(|_| bad_args("bad wmax in gen spec"))?,
                _ => return Err(bad_args("gen spec: gnp N P [WMAX]")),
            };
            Ok(gen::gen_gnp_connected(n, p, wmax, seed))
        }
        ["path", n, rest @ ..] => {
            let n: u32 = n.parse().map_err(|_| bad_args("bad n in gen spec"))?;
            let wmax: u64 = match rest {
                [] => 1,
                [w] => w.parse().map_err(|_| bad_args("bad wmax in gen spec"))?,
                _ => return Err(bad_args("gen spec: path N [WMAX]")),
            };
            Ok(gen::gen_path(n, wmax, seed))
        }
        _ => Err(bad_args(format!("unknown gen spec {spec:?}"))),
    }
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let alg: runner::Algorithm = args.algorithm.parse().map_err(|e: String| bad_args(e))?;
    let seeds = parse_seeds(&args.seeds)?;
    let dir = out_dir(args.out_dir);
    let opts = runner::RunOptions {
        xi: args.xi,
        eta: args.eta,
        source: args.source,
        source_count: args.sources,
        route_p: args.route_p,
        route_k: args.route_k,
        tokens: args.tokens,
        sigma: args.sigma,
        rho: args.rho,
        message_bits: args.message_bits,
        drop_random: args.drop_random,
        max_rounds: args.max_rounds,
    };

    let fixed_graph: Option<Graph> = match (&args.graph, &args.gen) {
        (Some(path), None) => {
            let text = read_file(path)?;
            Some(fmt::read_graph(&text, true).map_err(|e| validation(e.to_string()))?)
        }
        (None, Some(_)) => None,
        _ => return Err(bad_args("provide exactly one of --graph or --gen")),
    };

    for &seed in &seeds {
        let generated;
        let g = match &fixed_graph {
            Some(g) => g,
            None => {
                generated = graph_from_spec(args.gen.as_deref().unwrap(), seed)?;
                &generated
            }
        };
        let out = runner::run_algorithm(g, alg, seed, &opts).map_err(|e| match e {
            runner::RunError::BadParams(msg) => bad_args(msg),
            runner::RunError::Engine(msg) => engine(msg),
        })?;
        let results = dir.join(format!("{}_seed{}_results.csv", args.algorithm, seed));
        let metrics = dir.join(format!("{}_seed{}_metrics.csv", args.algorithm, seed));
        write_file(&results, &out.results_csv)?;
        write_file(&metrics, &out.metrics_csv)?;
        println!("{}", out.summary);
        println!("wrote {}", results.display());
        println!("wrote {}", metrics.display());
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<(), CliError> {
    let results = read_file(&args.results)?;
    let text = read_file(&args.graph)?;
    let g = fmt::read_graph(&text, true).map_err(|e| validation(e.to_string()))?;
    let report = match args.kind.as_str() {
        "distances" => {
            verify::verify_distances(&results, &g, args.ratio_bound, args.exact_radius)
                .map_err(|e| validation(e.to_string()))?
        }
        "diameter" => verify::verify_diameter(&results, &g, args.factor, args.additive)
            .map_err(|e| validation(e.to_string()))?,
        other => return Err(bad_args(format!("unknown verify kind {other:?}"))),
    };
    if report.pass() {
        println!("ok: {} rows checked", report.checked);
        Ok(())
    } else {
        for v in report.violations.iter().take(20) {
            println!("violation: {v}");
        }
        Err(validation(format!(
            "{} violations in {} rows",
            report.violations.len(),
            report.checked
        )))
    }
}

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    let seeds = parse_seeds(&args.seeds)?;
    let dir = out_dir(args.out_dir);
    match args.what.as_str() {
        "route" => {
            let n: u32 = args
                .n
                .parse()
                .map_err(|_| bad_args("route bench takes a single --n"))?;
            let ks = parse_u64_list(&args.k)?;
            let mut rows: Vec<(String, u64, String, u64)> = Vec::new();
            let mut means: Vec<(f64, f64)> = Vec::new();
            for &k in &ks {
                let mut per_seed = Vec::new();
                for &seed in &seeds {
                    let rounds = bench_route_once(n, args.set_size, k as u32, seed)?;
                    let mut total = 0;
                    for (phase, r) in &rounds {
                        rows.push((format!("k={k}"), seed, phase.clone(), *r));
                        total += r;
                    }
                    rows.push((format!("k={k}"), seed, "route.total".into(), total));
                    per_seed.push(total as f64);
                }
                let mean = per_seed.iter().sum::<f64>() / per_seed.len() as f64;
                means.push((k as f64, mean));
            }
            let slope = fit::loglog_slope(&means);
            rows.push((
                "fit".into(),
                0,
                "exponent_x1000".into(),
                (slope * 1000.0).round() as u64,
            ));
            let path = dir.join("bench_route.csv");
            write_file(&path, &csvout::bench_csv(&rows))?;
            println!("fitted exponent: {slope:.3}");
            println!("wrote {}", path.display());
            Ok(())
        }
        "apsp" => {
            let ns = parse_u64_list(&args.n)?;
            let mut rows: Vec<(String, u64, String, u64)> = Vec::new();
            for &n in &ns {
                for &seed in &seeds {
                    let g = gen::gen_gnp_connected(n as u32, 12.0 / n as f64, 8, seed);
                    let cfg = runner::build_config(n as u32, seed, &runner::RunOptions::default());
                    let mut session = hybridsim_core::engine::Session::new(&g, cfg)
                        .map_err(|e| engine(e.to_string()))?;
                    hybridsim_core::apsp::hybrid_apsp(&mut session, 16.0)
                        .map_err(|e| engine(e.to_string()))?;
                    let metrics = session.into_metrics();
                    for (phase, r) in &metrics.phase_rounds {
                        rows.push((format!("n={n}"), seed, phase.clone(), *r));
                    }
                }
            }
            let path = dir.join("bench_apsp.csv");
            write_file(&path, &csvout::bench_csv(&rows))?;
            println!("wrote {}", path.display());
            Ok(())
        }
        other => Err(bad_args(format!("unknown bench {other:?}"))),
    }
}

/// One routing bench point: fixed sampled set size, swept per-sender load.
/// Returns the per-phase round counts of the routing phases.
fn bench_route_once(
    n: u32,
    set_size: u32,
    k: u32,
    seed: u64,
) -> Result<Vec<(String, u64)>, CliError> {
    let avg_deg = 6.0;
    let g = gen::gen_gnp_connected(n, avg_deg / n as f64, 1, derive(seed, 0xBE7C));
    let p = set_size as f64 / n as f64;
    let inst = runner::build_route_instance(n, p, k, seed)
        .map_err(|e| bad_args(e.to_string()))?;
    let cfg = runner::build_config(n, seed, &runner::RunOptions::default());
    let mut session =
        hybridsim_core::engine::Session::new(&g, cfg).map_err(|e| engine(e.to_string()))?;
    hybridsim_core::routing::route_instance(&mut session, &inst)
        .map_err(|e| engine(e.to_string()))?;
    let metrics = session.into_metrics();
    Ok(metrics
        .phase_rounds
        .iter()
        .filter(|(tag, _)| tag.starts_with("route."))
        .map(|(tag, r)| (tag.clone(), *r))
        .collect())
}
