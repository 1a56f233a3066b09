//! Command-line workbench for the k-server work function algorithm:
//! simulation, potential evaluation, property suites, the circle
//! counterexample replay, the reachable-state census, and tree
//! reconstruction from quasiconcave metrics.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::sync::Arc;
use wfa_cli::{report, suites};
use wfa_core::metric::{is_quasiconcave, tree_from_quasiconcave, MetricSpace};
use wfa_core::potential::{
    evader_potential, lazy_potential_k3, mst_evader_potential, server_potential,
    server_potential_at,
};
use wfa_core::taxi::{
    counterexample_instance, enumerate_reachable, expand_taxi_grid, replay_counterexample,
    run_events, EnumerationOptions,
};
use wfa_core::wfa::{
    extended_cost_ledger, parse_sequence, run_wfa, validate_trajectory, Event, TieBreak,
};
use wfa_core::workfn::{ConfigSpace, WorkFunction};
use wfa_core::{fmt_scaled, Error};

const EXIT_OK: i32 = 0;
const EXIT_USAGE: i32 = 2;
const EXIT_VIOLATION: i32 = 3;
const EXIT_BUDGET: i32 = 4;

#[derive(Parser)]
#[command(
    name = "wfalab",
    about = "Exact workbench for the k-server work function algorithm on small metric spaces",
    version
)]
struct RunConfig {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the algorithm on a request sequence and report the trajectory.
    Simulate(SimulateArgs),
    /// Run a named property suite on randomized reachable work functions.
    Verify(VerifyArgs),
    /// Evaluate a potential on the work function built from a sequence.
    Potential(PotentialArgs),
    /// Replay the circle counterexample and check every recorded value.
    Counterexample(CounterexampleArgs),
    /// Enumerate reachable work functions on the circle and scan for
    /// laziness violations.
    Enumerate(EnumerateArgs),
    /// Reconstruct a weighted tree from a quasiconcave metric.
    ReconstructTree(ReconstructArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Metric space description file
    #[arg(long)]
    space: PathBuf,
    /// Initial configuration, comma-separated point names
    #[arg(long)]
    start: String,
    /// Request sequence file
    #[arg(long)]
    seq: PathBuf,
    /// Expected number of servers (validated against --start)
    #[arg(long)]
    k: Option<usize>,
    /// Tie-break policy: lex, first, or prefer:POINT
    #[arg(long, default_value = "lex")]
    tie: String,
    /// Taxi handling: closed (circle closed form) or expand (grid requests)
    #[arg(long, default_value = "closed")]
    taxi: String,
    #[arg(long, default_value = "text")]
    format: String,
}

#[derive(Args)]
struct VerifyArgs {
    /// One of: duality, quasiconvex, lipschitz, perm_intuition, push3,
    /// equivalence, mst_leaf, theorem_xk_r
    #[arg(long)]
    suite: String,
    /// Number of randomized cases (suite-specific default)
    #[arg(long)]
    cases: Option<u64>,
    #[arg(long, default_value_t = 0xC0FFEE)]
    seed: u64,
    #[arg(long, default_value = "text")]
    format: String,
}

#[derive(Args)]
struct PotentialArgs {
    #[arg(long)]
    space: PathBuf,
    /// Initial configuration, comma-separated point names
    #[arg(long)]
    start: String,
    /// Optional request sequence applied before evaluating
    #[arg(long)]
    seq: Option<PathBuf>,
    /// server, evader, lazy-k3, or mst
    #[arg(long, default_value = "server")]
    formulation: String,
    /// Evaluate the tuple potential at this tuple instead of scanning
    #[arg(long)]
    tuple: Option<String>,
    #[arg(long, default_value = "text")]
    format: String,
}

#[derive(Args)]
struct CounterexampleArgs {
    /// Tie-break policy (the replay requires prefer:6; other policies
    /// produce a divergence report)
    #[arg(long, default_value = "prefer:6")]
    tie: String,
    /// Distance scale for the half-integer grid (must be even)
    #[arg(long, default_value_t = 2)]
    scale: i64,
    #[arg(long, default_value = "text")]
    format: String,
}

#[derive(Args)]
struct EnumerateArgs {
    /// Grid points on the circle (the destinations are every n/8-th point)
    #[arg(long, default_value_t = 16)]
    points: usize,
    /// Stop after expanding this many states (0 = run to closure)
    #[arg(long, default_value_t = 0)]
    max_states: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Restrict taxi starts to the destination points
    #[arg(long)]
    no_midpoint_starts: bool,
    /// Also scan midpoint requests for violations
    #[arg(long)]
    scan_midpoints: bool,
    /// Drop taxi transports: the closure uses plain server requests at the
    /// destinations only
    #[arg(long)]
    server_only: bool,
    /// Check 1-Lipschitzness and quasiconvexity on ~1% of expanded states
    #[arg(long)]
    spot_check: bool,
    /// Seed the frontier with the counterexample trajectory states
    #[arg(long)]
    seed_replay: bool,
    /// Write the fingerprint store and frontier here when stopping
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Resume from a checkpoint
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long)]
    progress: bool,
    #[arg(long, default_value = "text")]
    format: String,
}

#[derive(Args)]
struct ReconstructArgs {
    #[arg(long)]
    space: PathBuf,
    #[arg(long, default_value = "text")]
    format: String,
}

fn main() {
    let config = RunConfig::parse();
    let code = match run(config) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    };
    std::process::exit(code);
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Parse { .. }
        | Error::UnknownPoint(_)
        | Error::InexactScale { .. }
        | Error::SizeMismatch { .. }
        | Error::UnsupportedK { .. }
        | Error::Io(_) => EXIT_USAGE,
        Error::BudgetExceeded { .. } => EXIT_BUDGET,
        Error::InvalidMetric(_) | Error::NeedsAntipodes | Error::NotACircle => EXIT_VIOLATION,
    }
}

fn run(config: RunConfig) -> wfa_core::Result<i32> {
    match config.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Potential(args) => cmd_potential(args),
        Command::Counterexample(args) => cmd_counterexample(args),
        Command::Enumerate(args) => cmd_enumerate(args),
        Command::ReconstructTree(args) => cmd_reconstruct(args),
    }
}

fn load_space(path: &PathBuf) -> wfa_core::Result<Arc<MetricSpace>> {
    let text = std::fs::read_to_string(path)?;
    Ok(Arc::new(MetricSpace::parse(&text)?))
}

fn parse_tie(text: &str, space: &MetricSpace) -> wfa_core::Result<TieBreak> {
    match text {
        "lex" => Ok(TieBreak::Lexicographic),
        "first" => Ok(TieBreak::FirstFound),
        other => match other.strip_prefix("prefer:") {
            Some(point) => Ok(TieBreak::PreferServer(space.point_by_name(point)?)),
            None => Err(Error::Parse {
                line: 0,
                msg: format!("unknown tie policy '{other}' (lex, first, prefer:<point>)"),
            }),
        },
    }
}

fn cmd_simulate(args: SimulateArgs) -> wfa_core::Result<i32> {
    let space = load_space(&args.space)?;
    let c0 = suites::parse_config(&args.start, &space)?;
    if let Some(k) = args.k {
        if k != c0.k() {
            return Err(Error::SizeMismatch {
                expected: k,
                got: c0.k(),
            });
        }
    }
    let cs = ConfigSpace::new(Arc::clone(&space), c0.k());
    let seq_text = std::fs::read_to_string(&args.seq)?;
    let events = parse_sequence(&seq_text, &space)?;
    let tie = parse_tie(&args.tie, &space)?;
    let has_taxi = events.iter().any(|e| matches!(e, Event::Taxi(_)));

    let json = if !has_taxi || args.taxi == "expand" {
        // expand taxi events into grid requests and run the plain algorithm
        let mut requests = Vec::new();
        for e in &events {
            match e {
                Event::Server(r) => requests.push(*r),
                Event::Taxi(t) => requests.extend(expand_taxi_grid(&space, t)?),
            }
        }
        let traj = run_wfa(&cs, &c0, &requests, tie)?;
        validate_trajectory(&traj)?;
        let ledger = extended_cost_ledger(&traj);
        report::simulate_json_from_trajectory(&traj, &ledger)
    } else if args.taxi == "closed" {
        let traj = run_events(&cs, &c0, &events, tie)?;
        report::simulate_json_from_taxi(&traj)
    } else {
        return Err(Error::Parse {
            line: 0,
            msg: format!("unknown taxi mode '{}' (closed, expand)", args.taxi),
        });
    };

    if args.format == "machine" || args.format == "json" {
        println!(
            "{}",
            serde_json::to_string_pretty(&json).expect("serializable")
        );
    } else {
        report::print_simulate_text(&json, &space);
    }
    Ok(EXIT_OK)
}

fn cmd_verify(args: VerifyArgs) -> wfa_core::Result<i32> {
    let cases = args
        .cases
        .unwrap_or_else(|| suites::default_cases(&args.suite));
    let outcome = suites::run_suite(&args.suite, cases, args.seed)?;
    if args.format == "machine" || args.format == "json" {
        println!(
            "{}",
            serde_json::to_string_pretty(&outcome).expect("serializable")
        );
    } else {
        println!(
            "suite={} cases={} failures={} seed={}",
            outcome.suite, outcome.cases, outcome.failures, args.seed
        );
        if let Some(w) = &outcome.witness {
            println!("first witness: {w}");
        }
    }
    Ok(if outcome.failures == 0 {
        EXIT_OK
    } else {
        EXIT_VIOLATION
    })
}

fn cmd_potential(args: PotentialArgs) -> wfa_core::Result<i32> {
    let loaded = load_space(&args.space)?;
    // the server-view formulations need a total antipode map
    let needs_antipodes =
        matches!(args.formulation.as_str(), "server" | "lazy-k3") || args.tuple.is_some();
    let space = if needs_antipodes && !loaded.has_antipodes() {
        let extended = Arc::new(loaded.antipodal_extension()?);
        eprintln!(
            "note: applied the antipodal extension ({} points)",
            extended.len()
        );
        extended
    } else {
        loaded
    };
    let c0 = suites::parse_config(&args.start, &space)?;
    let cs = ConfigSpace::new(Arc::clone(&space), c0.k());
    let mut w = WorkFunction::cone(&cs, &c0)?;
    if let Some(seq_path) = &args.seq {
        let text = std::fs::read_to_string(seq_path)?;
        for event in parse_sequence(&text, &space)? {
            match event {
                Event::Server(r) => w = w.update(r)?,
                Event::Taxi(t) => w = wfa_core::taxi::taxi_update_closed(&w, &t)?,
            }
        }
    }
    let report = if let Some(tuple_text) = &args.tuple {
        // evaluate at the tuple in the order given
        let members: Vec<usize> = tuple_text
            .split(',')
            .map(|name| space.point_by_name(name.trim()))
            .collect::<wfa_core::Result<Vec<_>>>()?;
        server_potential_at(&w, &members)?
    } else {
        match args.formulation.as_str() {
            "server" => server_potential(&w)?,
            "evader" => evader_potential(&w, None)?,
            "lazy-k3" => lazy_potential_k3(&w)?,
            "mst" => mst_evader_potential(&w)?,
            other => {
                return Err(Error::Parse {
                    line: 0,
                    msg: format!("unknown formulation '{other}'"),
                })
            }
        }
    };
    let json = report::potential_json(&report, &space);
    if args.format == "machine" || args.format == "json" {
        println!(
            "{}",
            serde_json::to_string_pretty(&json).expect("serializable")
        );
    } else {
        report::print_potential_text(&json);
    }
    Ok(EXIT_OK)
}

fn cmd_counterexample(args: CounterexampleArgs) -> wfa_core::Result<i32> {
    if args.scale != 2 || args.tie != "prefer:6" {
        // a divergent run: execute under the requested parameters and
        // report where the trajectory departs from the recorded one
        let (cs, c0, events) = counterexample_instance(args.scale)?;
        let space = cs.space_arc();
        let tie = parse_tie(&args.tie, &space)?;
        let traj = run_events(&cs, &c0, &events, tie)?;
        let reference = replay_counterexample()?;
        let mut diverged = false;
        for (t, c) in traj.configs.iter().enumerate() {
            let r = &reference.trajectory.configs[t];
            let (a, b) = (c.display(&space), r.display(&space));
            if a != b {
                println!("step {t}: configuration {{{a}}} diverges from the recorded {{{b}}}");
                diverged = true;
            }
        }
        if diverged {
            println!("divergence: the replay requires the prefer:6 policy at scale 2");
            return Ok(EXIT_VIOLATION);
        }
        println!("no divergence under tie={} scale={}", args.tie, args.scale);
        return Ok(EXIT_OK);
    }
    let report = replay_counterexample()?;
    if args.format == "machine" || args.format == "json" {
        let json = report::counterexample_json(&report);
        println!(
            "{}",
            serde_json::to_string_pretty(&json).expect("serializable")
        );
    } else {
        report::print_counterexample_text(&report);
    }
    Ok(EXIT_OK)
}

fn cmd_enumerate(args: EnumerateArgs) -> wfa_core::Result<i32> {
    if args.points % 8 != 0 {
        return Err(Error::Parse {
            line: 0,
            msg: "the destination lattice needs a grid divisible by 8".into(),
        });
    }
    let scale = if args.points % 16 == 0 { 2 } else { 1 };
    let space = Arc::new(MetricSpace::circle(args.points, 8, scale)?);
    let cs = ConfigSpace::new(Arc::clone(&space), 3);
    let mut opts = EnumerationOptions {
        lattice_step: args.points / 8,
        midpoint_starts: !args.no_midpoint_starts,
        scan_midpoint_requests: args.scan_midpoints,
        server_requests_only: args.server_only,
        spot_check_invariants: args.spot_check,
        max_states: args.max_states,
        workers: args.workers.max(1),
        progress: args.progress,
        checkpoint: args.checkpoint.clone(),
        resume: args.resume.clone(),
        ..Default::default()
    };
    if args.seed_replay {
        let replay = replay_counterexample()?;
        if space.fingerprint() != replay.trajectory.wfs[0].space().fingerprint() {
            return Err(Error::Parse {
                line: 0,
                msg: "--seed-replay needs the 16-point grid".into(),
            });
        }
        opts.extra_seeds = replay.trajectory.wfs.clone();
    }
    let census = enumerate_reachable(&cs, &opts)?;
    let json = report::census_json(&census, &space);
    if args.format == "machine" || args.format == "json" {
        println!(
            "{}",
            serde_json::to_string_pretty(&json).expect("serializable")
        );
    } else {
        println!(
            "census: {} canonical states discovered, {} expanded, complete: {}",
            json.discovered, json.expanded, json.complete
        );
        if json.violation_classes.is_empty() {
            println!("no laziness violations found");
        }
        for v in &json.violation_classes {
            println!(
                "violation: state {} request {} nabla {} potential-change {} gap {}",
                v.fingerprint,
                v.request,
                fmt_scaled(v.nabla, space.scale()),
                fmt_scaled(v.phi_delta, space.scale()),
                fmt_scaled(v.gap, space.scale())
            );
        }
    }
    Ok(if census.complete {
        EXIT_OK
    } else {
        EXIT_BUDGET
    })
}

fn cmd_reconstruct(args: ReconstructArgs) -> wfa_core::Result<i32> {
    let space = load_space(&args.space)?;
    let (ok, witness) = is_quasiconcave(&space);
    if !ok {
        let w = witness.expect("witness on failure");
        let labels: Vec<&str> = w.iter().map(|&p| space.label(p)).collect();
        println!(
            "metric is not quasiconcave; witness quadruple ({})",
            labels.join(", ")
        );
        return Ok(EXIT_VIOLATION);
    }
    let tree = tree_from_quasiconcave(&space)?;
    // round-trip check: the leaf distances must reproduce the metric exactly
    let metric = tree.leaf_metric(space.scale())?;
    for a in space.points() {
        for b in space.points() {
            if metric.d(a, b) != space.d(a, b) {
                return Err(Error::InvalidMetric(format!(
                    "round-trip mismatch between {} and {}",
                    space.label(a),
                    space.label(b)
                )));
            }
        }
    }
    println!(
        "tree with {} nodes ({} metric points), edge weights at scale {}:",
        tree.nodes,
        tree.point_nodes.len(),
        tree.weight_scale
    );
    let name = |node: usize| -> String {
        match tree.point_nodes.iter().position(|&n| n == node) {
            Some(p) => space.label(p).to_string(),
            None => format!("internal{node}"),
        }
    };
    for &(u, v, w) in &tree.edges {
        println!(
            "  {} -- {}  {}",
            name(u),
            name(v),
            fmt_scaled(w, tree.weight_scale)
        );
    }
    println!("leaf distances round-trip exactly");
    Ok(EXIT_OK)
}
