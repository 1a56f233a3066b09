//! Text and machine (JSON) report emitters, plus re-ingestion validators so
//! machine output can be checked for internal consistency after the fact.

use serde::{Deserialize, Serialize};
use wfa_core::fmt_scaled;
use wfa_core::potential::PotentialReport;
use wfa_core::taxi::{Census, ReplayReport, TaxiTrajectory};
use wfa_core::wfa::{Event, Ledger, Trajectory};
use wfa_core::{Dist, MetricSpace};

#[derive(Debug, Serialize, Deserialize)]
pub struct StepJson {
    pub event: String,
    pub config: String,
    pub cost: Dist,
    pub nabla: Dist,
    pub pinned: Dist,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SimulateJson {
    pub space_fingerprint: String,
    pub scale: i64,
    pub k: usize,
    pub start: String,
    pub steps: Vec<StepJson>,
    pub wfa_cost: Dist,
    pub opt: Dist,
    pub total_nabla: Dist,
    pub total_pinned: Dist,
}

/// Internal-consistency validation of a machine simulate report: totals must
/// equal the column sums and extended costs must dominate the pinned ones.
pub fn validate_simulate_json(text: &str) -> Result<SimulateJson, String> {
    let report: SimulateJson = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let cost: Dist = report.steps.iter().map(|s| s.cost).sum();
    if cost != report.wfa_cost {
        return Err(format!(
            "cost total mismatch: {} vs {}",
            cost, report.wfa_cost
        ));
    }
    let nabla: Dist = report.steps.iter().map(|s| s.nabla).sum();
    if nabla != report.total_nabla {
        return Err("extended cost total mismatch".into());
    }
    let pinned: Dist = report.steps.iter().map(|s| s.pinned).sum();
    if pinned != report.total_pinned {
        return Err("pinned total mismatch".into());
    }
    for (i, s) in report.steps.iter().enumerate() {
        if s.pinned > s.nabla {
            return Err(format!("step {i}: pinned exceeds the extended cost"));
        }
        if s.cost < 0 || s.nabla < 0 {
            return Err(format!("step {i}: negative cost"));
        }
    }
    Ok(report)
}

fn event_text(e: &Event, space: &MetricSpace) -> String {
    match e {
        Event::Server(p) => format!("r {}", space.label(*p)),
        Event::Taxi(t) => format!(
            "taxi {} {}{}",
            space.label(t.start),
            space.label(t.dest),
            if t.clockwise { "" } else { " ccw" }
        ),
    }
}

pub fn simulate_json_from_trajectory(traj: &Trajectory, ledger: &Ledger) -> SimulateJson {
    let space = traj.wfs[0].space();
    SimulateJson {
        space_fingerprint: format!("{:016x}", space.fingerprint()),
        scale: space.scale(),
        k: traj.wfs[0].k(),
        start: traj.configs[0].display(space),
        steps: (0..traj.requests.len())
            .map(|t| StepJson {
                event: format!("r {}", space.label(traj.requests[t])),
                config: traj.configs[t + 1].display(space),
                cost: traj.costs[t],
                nabla: traj.nablas[t],
                pinned: traj.pinned[t],
            })
            .collect(),
        wfa_cost: ledger.wfa_cost,
        opt: ledger.opt,
        total_nabla: ledger.total_nabla,
        total_pinned: ledger.total_pinned,
    }
}

pub fn simulate_json_from_taxi(traj: &TaxiTrajectory) -> SimulateJson {
    let space = traj.wfs[0].space();
    SimulateJson {
        space_fingerprint: format!("{:016x}", space.fingerprint()),
        scale: space.scale(),
        k: traj.wfs[0].k(),
        start: traj.configs[0].display(space),
        steps: (0..traj.events.len())
            .map(|t| StepJson {
                event: event_text(&traj.events[t], space),
                config: traj.configs[t + 1].display(space),
                cost: traj.costs[t],
                nabla: traj.nablas[t],
                pinned: traj.pinned[t],
            })
            .collect(),
        wfa_cost: traj.total_cost(),
        opt: traj.final_wf().min_value(),
        total_nabla: traj.nablas.iter().sum(),
        total_pinned: traj.pinned.iter().sum(),
    }
}

pub fn print_simulate_text(json: &SimulateJson, space: &MetricSpace) {
    println!(
        "simulation on {} points, k = {}, scale = {} (values below in original units)",
        space.len(),
        json.k,
        json.scale
    );
    println!("start: {{{}}}", json.start);
    println!(
        "{:>4}  {:<14} {:<12} {:>8} {:>8} {:>8}",
        "t", "event", "config", "cost", "nabla", "pinned"
    );
    for (t, s) in json.steps.iter().enumerate() {
        println!(
            "{:>4}  {:<14} {:<12} {:>8} {:>8} {:>8}",
            t + 1,
            s.event,
            format!("{{{}}}", s.config),
            fmt_scaled(s.cost, json.scale),
            fmt_scaled(s.nabla, json.scale),
            fmt_scaled(s.pinned, json.scale),
        );
    }
    println!(
        "wfa cost = {}, opt = {}, total extended cost = {}, total pinned = {}",
        fmt_scaled(json.wfa_cost, json.scale),
        fmt_scaled(json.opt, json.scale),
        fmt_scaled(json.total_nabla, json.scale),
        fmt_scaled(json.total_pinned, json.scale),
    );
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PotentialJson {
    pub formulation: String,
    pub scale: i64,
    pub value: Dist,
    pub value_display: String,
    pub achiever: Vec<String>,
    pub achiever_count: usize,
    pub terms: Vec<TermJson>,
    pub mst_r_leaf: Option<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TermJson {
    pub config: String,
    pub value: Dist,
    pub base: Dist,
    pub moves: Vec<Dist>,
}

pub fn potential_json(report: &PotentialReport, space: &MetricSpace) -> PotentialJson {
    let name = match report.formulation {
        wfa_core::potential::Formulation::Server => "server",
        wfa_core::potential::Formulation::Evader => "evader",
        wfa_core::potential::Formulation::LazyK3 => "lazy_k3",
        wfa_core::potential::Formulation::Mst => "mst",
    };
    PotentialJson {
        formulation: name.to_string(),
        scale: space.scale(),
        value: report.value,
        value_display: fmt_scaled(report.value, space.scale()),
        achiever: report
            .achiever
            .iter()
            .map(|&p| space.label(p).to_string())
            .collect(),
        achiever_count: report.all_achievers.len().max(1),
        terms: report
            .terms
            .iter()
            .map(|t| TermJson {
                config: t.config.display(space),
                value: t.value,
                base: t.base,
                moves: t.moves.clone(),
            })
            .collect(),
        mst_r_leaf: report.mst_r_leaf,
    }
}

/// Prints the per-term sums in the bracketed style
/// `value = [base + move + move]`.
pub fn print_potential_text(json: &PotentialJson) {
    println!(
        "{} potential = {} (scaled {} at scale {})",
        json.formulation, json.value_display, json.value, json.scale
    );
    if !json.achiever.is_empty() {
        println!(
            "achiever: ({}){}",
            json.achiever.join(","),
            if json.achiever_count > 1 {
                format!(" and {} other achievers", json.achiever_count - 1)
            } else {
                String::new()
            }
        );
    }
    for t in &json.terms {
        let mut bracket = fmt_scaled(t.base, json.scale);
        for m in &t.moves {
            bracket.push_str(&format!(" + {}", fmt_scaled(*m, json.scale)));
        }
        println!(
            "  w({{{}}}) = {} = [{}]",
            t.config,
            fmt_scaled(t.value, json.scale),
            bracket
        );
    }
    if let Some(leaf) = json.mst_r_leaf {
        println!("minimum spanning tree with the last request as a leaf: {leaf}");
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct VerifyJson {
    pub suite: String,
    pub cases: u64,
    pub failures: u64,
    pub witness: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StageJson {
    pub label: String,
    pub support: Vec<(String, Dist)>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CounterexampleJson {
    pub scale: i64,
    pub stages: Vec<StageJson>,
    pub wfa_config: String,
    pub w_t_at_config: Dist,
    pub w_t1_at_config: Dist,
    pub phi_w_t: Dist,
    pub phi_w_t_achiever: Vec<String>,
    pub phi_w_t1: Dist,
    pub phi_572_upper_bound: Dist,
    pub laziness_gap: Dist,
}

pub fn counterexample_json(report: &ReplayReport) -> CounterexampleJson {
    let space = report.trajectory.wfs[0].space();
    CounterexampleJson {
        scale: space.scale(),
        stages: report
            .stages
            .iter()
            .map(|(label, sup)| StageJson {
                label: label.clone(),
                support: sup.iter().map(|(c, v)| (c.display(space), *v)).collect(),
            })
            .collect(),
        wfa_config: report.wfa_config.display(space),
        w_t_at_config: report.w_t_at_config,
        w_t1_at_config: report.w_t1_at_config,
        phi_w_t: report.phi_w_t.value,
        phi_w_t_achiever: report
            .phi_w_t
            .all_achievers
            .first()
            .map(|t| t.iter().map(|&p| space.label(p).to_string()).collect())
            .unwrap_or_default(),
        phi_w_t1: report.phi_w_t1.value,
        phi_572_upper_bound: report.phi_572_upper_bound,
        laziness_gap: report.laziness_gap,
    }
}

pub fn print_counterexample_text(report: &ReplayReport) {
    let space = report.trajectory.wfs[0].space();
    let s = space.scale();
    println!("counterexample replay on the circumference-8 circle, scale {s}");
    for (label, sup) in &report.stages {
        let rendered: Vec<String> = sup
            .iter()
            .map(|(c, v)| format!("{{{}}}={}", c.display(space), fmt_scaled(*v, s)))
            .collect();
        println!("  {label}: {}", rendered.join("  "));
    }
    println!(
        "algorithm configuration after the sixth request: {{{}}}",
        report.wfa_config.display(space)
    );
    println!(
        "w_t(C_t) = {}, w_t+1(C_t) = {} (difference {})",
        fmt_scaled(report.w_t_at_config, s),
        fmt_scaled(report.w_t1_at_config, s),
        fmt_scaled(report.w_t1_at_config - report.w_t_at_config, s)
    );
    let ach: Vec<String> = report
        .phi_w_t
        .all_achievers
        .first()
        .map(|t| t.iter().map(|&p| space.label(p).to_string()).collect())
        .unwrap_or_default();
    println!(
        "Phi(w_t) = {} achieved at ({}) among {} achievers",
        fmt_scaled(report.phi_w_t.value, s),
        ach.join(","),
        report.phi_w_t.all_achievers.len()
    );
    println!(
        "Phi(w_t+1) = {} with tuple (5,7,2) bounded by {}",
        fmt_scaled(report.phi_w_t1.value, s),
        fmt_scaled(report.phi_572_upper_bound, s)
    );
    println!("laziness gap = {}", fmt_scaled(report.laziness_gap, s));
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ViolationJson {
    pub fingerprint: String,
    pub request: String,
    pub nabla: Dist,
    pub phi_delta: Dist,
    pub gap: Dist,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CensusJson {
    pub discovered: u64,
    pub expanded: u64,
    pub complete: bool,
    pub violation_classes: Vec<ViolationJson>,
}

pub fn census_json(census: &Census, space: &MetricSpace) -> CensusJson {
    CensusJson {
        discovered: census.discovered,
        expanded: census.expanded,
        complete: census.complete,
        violation_classes: census
            .violation_classes()
            .iter()
            .map(|v| ViolationJson {
                fingerprint: v.fingerprint.clone(),
                request: space.label(v.request).to_string(),
                nabla: v.nabla,
                phi_delta: v.phi_delta,
                gap: v.gap,
            })
            .collect(),
    }
}
