//! The online work function algorithm, offline optimum, extended-cost
//! accounting, and competitive-ratio search harnesses, together with the
//! request-sequence text format.

use crate::metric::{Configuration, MetricSpace, PointId};
use crate::taxi::TaxiRequest;
use crate::workfn::{check_duality, extended_cost_between, ConfigSpace, WorkFunction};
use crate::{Dist, Error, Result};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::sync::Arc;

/// A request event: a plain server request or a taxi transport.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Server(PointId),
    Taxi(TaxiRequest),
}

/// Parses the sequence file grammar: one event per line, `r <point>` or
/// `taxi <s> <t> [cw|ccw]`, points written as labels or decimals consistent
/// with the space's scale. `#` starts a comment.
pub fn parse_sequence(text: &str, space: &MetricSpace) -> Result<Vec<Event>> {
    let mut events = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut it = body.split_whitespace();
        let head = it.next().unwrap();
        let rest: Vec<&str> = it.collect();
        let point = |name: &str| -> Result<PointId> {
            space.point_by_name(name).map_err(|e| Error::Parse {
                line,
                msg: e.to_string(),
            })
        };
        match head {
            "r" => {
                if rest.len() != 1 {
                    return Err(Error::Parse {
                        line,
                        msg: "expected 'r <point>'".into(),
                    });
                }
                events.push(Event::Server(point(rest[0])?));
            }
            "taxi" => {
                if rest.len() != 2 && rest.len() != 3 {
                    return Err(Error::Parse {
                        line,
                        msg: "expected 'taxi <start> <dest> [cw|ccw]'".into(),
                    });
                }
                let clockwise = match rest.get(2).copied() {
                    None | Some("cw") => true,
                    Some("ccw") => false,
                    Some(other) => {
                        return Err(Error::Parse {
                            line,
                            msg: format!("unknown orientation '{other}'"),
                        })
                    }
                };
                events.push(Event::Taxi(TaxiRequest {
                    start: point(rest[0])?,
                    dest: point(rest[1])?,
                    clockwise,
                }));
            }
            other => {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown event '{other}'"),
                });
            }
        }
    }
    Ok(events)
}

pub fn format_sequence(events: &[Event], space: &MetricSpace) -> String {
    let mut out = String::new();
    for e in events {
        match e {
            Event::Server(p) => out.push_str(&format!("r {}\n", space.label(*p))),
            Event::Taxi(t) => out.push_str(&format!(
                "taxi {} {}{}\n",
                space.label(t.start),
                space.label(t.dest),
                if t.clockwise { "" } else { " ccw" }
            )),
        }
    }
    out
}

/// Deterministic tie-breaking among optimal serving moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TieBreak {
    /// Move the optimal server at the lowest position.
    Lexicographic,
    /// Prefer the server that started at this point whenever moving it is
    /// optimal; otherwise fall back to the lowest position.
    PreferServer(PointId),
    /// First optimal candidate in scan order (ascending positions here, so
    /// it coincides with `Lexicographic`; kept as an explicit policy tag).
    FirstFound,
}

/// A full run of the algorithm: configurations, per-step exact costs, the
/// work functions, and both extended-cost variants.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub requests: Vec<PointId>,
    /// `C_0 .. C_T`
    pub configs: Vec<Configuration>,
    /// `d(C_{t-1}, C_t)` per step
    pub costs: Vec<Dist>,
    /// `w_0 .. w_T`
    pub wfs: Vec<WorkFunction>,
    /// `max over X of w_t(X) - w_{t-1}(X)` per step
    pub nablas: Vec<Dist>,
    /// `w_t(C_{t-1}) - w_{t-1}(C_{t-1})` per step
    pub pinned: Vec<Dist>,
    pub tie: TieBreak,
}

impl Trajectory {
    pub fn wfa_cost(&self) -> Dist {
        self.costs.iter().sum()
    }

    pub fn final_wf(&self) -> &WorkFunction {
        self.wfs.last().expect("nonempty")
    }

    pub fn final_config(&self) -> &Configuration {
        self.configs.last().expect("nonempty")
    }
}

/// Chooses the serving move for request `r` from configuration `c` under
/// work function `w_next` (already updated with `r`). The candidate set
/// ranges over single-server moves, which always contains a global minimizer
/// of `d(C, D) + w(D)` over configurations `D` containing `r`.
fn choose_move(
    cs: &ConfigSpace,
    w_next: &WorkFunction,
    c: &Configuration,
    r: PointId,
    tie: &TieBreak,
    pref_pos: Option<PointId>,
) -> (PointId, Configuration, Dist) {
    let c_idx = cs.rank(c);
    let mut best_score = Dist::MAX;
    let mut candidates: Vec<(PointId, usize)> = Vec::new();
    for x in c.distinct() {
        let target = c.replaced(x, r);
        let t_idx = cs.rank(&target);
        let score = cs.config_dist(c_idx, t_idx) + w_next.value(t_idx);
        if score < best_score {
            best_score = score;
            candidates.clear();
        }
        if score == best_score {
            candidates.push((x, t_idx));
        }
    }
    debug_assert!(!candidates.is_empty());
    let pick = match (tie, pref_pos) {
        (TieBreak::PreferServer(_), Some(p)) => candidates
            .iter()
            .find(|&&(x, _)| x == p)
            .copied()
            .unwrap_or(candidates[0]),
        _ => candidates[0],
    };
    let (x, t_idx) = pick;
    let target = cs.config(t_idx).clone();
    let cost = cs.config_dist(c_idx, t_idx);
    (x, target, cost)
}

/// Runs the algorithm on server requests only (taxi events must be expanded
/// or replayed through the taxi module). Each step serves `r_t` by the
/// configuration minimizing `d(C_{t-1}, D) + w_t(D)` with ties broken by the
/// policy.
pub fn run_wfa(
    cs: &Arc<ConfigSpace>,
    c0: &Configuration,
    requests: &[PointId],
    tie: TieBreak,
) -> Result<Trajectory> {
    if c0.k() != cs.k() {
        return Err(Error::SizeMismatch {
            expected: cs.k(),
            got: c0.k(),
        });
    }
    for &r in requests {
        if r >= cs.space().len() {
            return Err(Error::UnknownPoint(format!("point id {r}")));
        }
    }
    let mut pref_pos = match tie {
        TieBreak::PreferServer(p) => {
            if !c0.contains(p) {
                return Err(Error::UnknownPoint(format!(
                    "preferred server position {} is not in the initial configuration",
                    cs.space().label(p)
                )));
            }
            Some(p)
        }
        _ => None,
    };
    let mut configs = vec![c0.clone()];
    let mut costs = Vec::new();
    let mut wfs = vec![WorkFunction::cone(cs, c0)?];
    let mut nablas = Vec::new();
    let mut pinned = Vec::new();
    for &r in requests {
        let w_prev = wfs.last().unwrap();
        let w_next = w_prev.update(r)?;
        let c_prev = configs.last().unwrap().clone();
        nablas.push(extended_cost_between(w_prev, &w_next));
        pinned.push(w_next.value_of(&c_prev) - w_prev.value_of(&c_prev));
        let (moved, c_next, cost) = choose_move(cs, &w_next, &c_prev, r, &tie, pref_pos);
        if pref_pos == Some(moved) {
            pref_pos = Some(r);
        }
        costs.push(cost);
        configs.push(c_next);
        wfs.push(w_next);
    }
    Ok(Trajectory {
        requests: requests.to_vec(),
        configs,
        costs,
        wfs,
        nablas,
        pinned,
        tie,
    })
}

/// Offline optimum of the instance summarized by the final work function.
pub fn offline_opt(w_final: &WorkFunction) -> Dist {
    w_final.min_value()
}

/// Validates the trajectory invariants independently: every step serves the
/// request, pays the exact matching distance, and attains the minimum of
/// `d(C_{t-1}, D) + w_t(D)` over all configurations `D` containing `r_t`.
/// Also re-checks duality at every step.
pub fn validate_trajectory(traj: &Trajectory) -> Result<()> {
    let cs = traj.wfs[0].config_space();
    for (t, &r) in traj.requests.iter().enumerate() {
        let c_prev = &traj.configs[t];
        let c_next = &traj.configs[t + 1];
        if !c_next.contains(r) {
            return Err(Error::InvalidMetric(format!(
                "step {t} does not serve the request"
            )));
        }
        let w_next = &traj.wfs[t + 1];
        let prev_idx = cs.rank(c_prev);
        let next_idx = cs.rank(c_next);
        if traj.costs[t] != cs.config_dist(prev_idx, next_idx) {
            return Err(Error::InvalidMetric(format!("step {t} cost mismatch")));
        }
        let attained = traj.costs[t] + w_next.value(next_idx);
        let best = cs
            .containing(r)
            .into_iter()
            .map(|d| cs.config_dist(prev_idx, d) + w_next.value(d))
            .min()
            .expect("nonempty");
        if attained != best {
            return Err(Error::InvalidMetric(format!(
                "step {t} does not attain the serving minimum ({attained} vs {best})"
            )));
        }
        if !check_duality(&traj.wfs[t], r)? {
            return Err(Error::InvalidMetric(format!("duality fails at step {t}")));
        }
    }
    Ok(())
}

/// Per-step and cumulative extended costs of a trajectory, with the final
/// offline optimum.
#[derive(Debug, Clone)]
pub struct Ledger {
    pub nablas: Vec<Dist>,
    pub pinned: Vec<Dist>,
    pub total_nabla: Dist,
    pub total_pinned: Dist,
    pub wfa_cost: Dist,
    pub opt: Dist,
}

pub fn extended_cost_ledger(traj: &Trajectory) -> Ledger {
    Ledger {
        nablas: traj.nablas.clone(),
        pinned: traj.pinned.clone(),
        total_nabla: traj.nablas.iter().sum(),
        total_pinned: traj.pinned.iter().sum(),
        wfa_cost: traj.wfa_cost(),
        opt: offline_opt(traj.final_wf()),
    }
}

/// Generator specification for the ratio harness.
#[derive(Debug, Clone)]
pub enum SequenceGen {
    /// All sequences of length 1..=len over the space's points.
    Exhaustive { len: usize },
    /// `count` random sequences of exactly `len` requests.
    Random { count: u64, len: usize, seed: u64 },
}

#[derive(Debug, Clone)]
pub struct RatioReport {
    /// max over generated sequences of `wfa_cost - k * opt`
    pub worst_excess: Dist,
    pub worst_sequence: Vec<PointId>,
    /// sequences with `wfa_cost > k * opt + slack`
    pub violations: Vec<Vec<PointId>>,
    /// additive slack used by the violation test
    pub slack: Dist,
    pub sequences_run: u64,
    pub complete: bool,
}

/// Searches request sequences for competitive-ratio violations
/// `wfa_cost > k * opt + slack` with `slack = k^2 * diameter`. Exhaustive
/// mode shares work-function state across common prefixes. A `max_sequences`
/// budget of 0 means unlimited; on exhaustion the report is flagged partial.
pub fn ratio_report(
    cs: &Arc<ConfigSpace>,
    c0: &Configuration,
    generator: &SequenceGen,
    tie: TieBreak,
    max_sequences: u64,
) -> Result<RatioReport> {
    let k = cs.k() as i64;
    let slack = k * k * cs.space().diameter();
    let mut report = RatioReport {
        worst_excess: Dist::MIN,
        worst_sequence: Vec::new(),
        violations: Vec::new(),
        slack,
        sequences_run: 0,
        complete: true,
    };
    match generator {
        SequenceGen::Exhaustive { len } => {
            let w0 = WorkFunction::cone(cs, c0)?;
            let mut seq = Vec::with_capacity(*len);
            exhaustive_scan(
                cs,
                &w0,
                c0,
                &tie,
                *len,
                &mut seq,
                0,
                max_sequences,
                &mut report,
            )?;
        }
        SequenceGen::Random { count, len, seed } => {
            let mut rng = StdRng::seed_from_u64(*seed);
            let n = cs.space().len();
            for _ in 0..*count {
                if max_sequences > 0 && report.sequences_run >= max_sequences {
                    report.complete = false;
                    break;
                }
                let seq: Vec<PointId> = (0..*len).map(|_| rng.random_range(0..n)).collect();
                let traj = run_wfa(cs, c0, &seq, tie)?;
                report.sequences_run += 1;
                let cost = traj.wfa_cost();
                let opt = offline_opt(traj.final_wf());
                record_sequence(&seq, cost, opt, k, &mut report);
            }
        }
    }
    Ok(report)
}

fn record_sequence(seq: &[PointId], cost: Dist, opt: Dist, k: i64, report: &mut RatioReport) {
    let excess = cost - k * opt;
    if excess > report.worst_excess {
        report.worst_excess = excess;
        report.worst_sequence = seq.to_vec();
    }
    if cost > k * opt + report.slack {
        report.violations.push(seq.to_vec());
    }
}

#[allow(clippy::too_many_arguments)]
fn exhaustive_scan(
    cs: &Arc<ConfigSpace>,
    w: &WorkFunction,
    c: &Configuration,
    tie: &TieBreak,
    remaining: usize,
    seq: &mut Vec<PointId>,
    cost_so_far: Dist,
    max_sequences: u64,
    report: &mut RatioReport,
) -> Result<()> {
    if remaining == 0 {
        return Ok(());
    }
    for r in cs.space().points() {
        if max_sequences > 0 && report.sequences_run >= max_sequences {
            report.complete = false;
            return Ok(());
        }
        let w_next = w.update(r)?;
        let (_, c_next, step_cost) = choose_move(cs, &w_next, c, r, tie, None);
        seq.push(r);
        let cost = cost_so_far + step_cost;
        // every prefix is itself a tested sequence
        report.sequences_run += 1;
        record_sequence(seq, cost, offline_opt(&w_next), cs.k() as i64, report);
        exhaustive_scan(
            cs,
            &w_next,
            &c_next,
            tie,
            remaining - 1,
            seq,
            cost,
            max_sequences,
            report,
        )?;
        seq.pop();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::MetricSpace;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn cfg(v: &[usize]) -> Configuration {
        Configuration::new(v.to_vec())
    }

    #[test]
    fn covered_request_costs_nothing() {
        let cs = ConfigSpace::new(Arc::new(MetricSpace::circle(8, 8, 1).unwrap()), 3);
        let traj = run_wfa(&cs, &cfg(&[1, 6, 7]), &[6], TieBreak::Lexicographic).unwrap();
        assert_eq!(traj.wfa_cost(), 0);
        assert_eq!(traj.final_config(), &cfg(&[1, 6, 7]));
        validate_trajectory(&traj).unwrap();
    }

    #[test]
    fn line_tie_moves_lower_server() {
        // line 0..4, two servers at the ends, request in the middle:
        // both moves cost 2; the lexicographic policy moves the server at 0.
        let cs = ConfigSpace::new(Arc::new(MetricSpace::line(5, 1, 1).unwrap()), 2);
        let traj = run_wfa(&cs, &cfg(&[0, 4]), &[2], TieBreak::Lexicographic).unwrap();
        assert_eq!(traj.wfa_cost(), 2);
        assert_eq!(traj.final_config(), &cfg(&[2, 4]));
        validate_trajectory(&traj).unwrap();
        // preferring the server at 4 flips the choice
        let traj = run_wfa(&cs, &cfg(&[0, 4]), &[2], TieBreak::PreferServer(4)).unwrap();
        assert_eq!(traj.final_config(), &cfg(&[0, 2]));
        validate_trajectory(&traj).unwrap();
    }

    #[test]
    fn preferred_server_is_tracked_across_moves() {
        let cs = ConfigSpace::new(Arc::new(MetricSpace::line(7, 1, 1).unwrap()), 2);
        // the server from 3 serves 2 and then 1 when preferred
        let traj = run_wfa(&cs, &cfg(&[3, 6]), &[2, 1], TieBreak::PreferServer(3)).unwrap();
        assert_eq!(traj.final_config(), &cfg(&[1, 6]));
        assert_eq!(traj.wfa_cost(), 2);
        validate_trajectory(&traj).unwrap();
    }

    #[test]
    fn trajectory_invariants_on_random_runs() {
        let cs = ConfigSpace::new(Arc::new(MetricSpace::circle(8, 8, 1).unwrap()), 2);
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..10 {
            let seq: Vec<usize> = (0..8).map(|_| rng.random_range(0..8)).collect();
            let traj = run_wfa(&cs, &cfg(&[0, 4]), &seq, TieBreak::Lexicographic).unwrap();
            validate_trajectory(&traj).unwrap();
            let ledger = extended_cost_ledger(&traj);
            // cumulative extended cost + k^2 diameter covers cost + opt
            let k = 2i64;
            let slack = k * k * cs.space().diameter();
            assert!(ledger.total_nabla + slack >= ledger.wfa_cost + ledger.opt);
            assert!(ledger.total_pinned <= ledger.total_nabla);
        }
    }

    #[test]
    fn offline_opt_of_cone_is_zero() {
        let cs = ConfigSpace::new(Arc::new(MetricSpace::circle(8, 8, 1).unwrap()), 3);
        let w = WorkFunction::cone(&cs, &cfg(&[1, 6, 7])).unwrap();
        assert_eq!(offline_opt(&w), 0);
        let ww = w.update(4).unwrap();
        assert!(offline_opt(&ww) <= ww.value_of(&cfg(&[1, 6, 7])));
    }

    #[test]
    fn ratio_single_server_small_space() {
        // k = 1 on a 4-point star: cost <= opt + diameter on every sequence
        let cs = ConfigSpace::new(Arc::new(MetricSpace::star(&[1, 2, 2], 1).unwrap()), 1);
        let report = ratio_report(
            &cs,
            &cfg(&[0]),
            &SequenceGen::Exhaustive { len: 4 },
            TieBreak::Lexicographic,
            0,
        )
        .unwrap();
        assert!(report.complete);
        assert!(report.violations.is_empty());
        assert!(report.worst_excess <= cs.space().diameter());
    }

    #[test]
    fn ratio_random_tree_k3() {
        let e = |u: &str, v: &str, w: i64| (u.to_string(), v.to_string(), w);
        let tree = MetricSpace::tree(
            &[
                e("a", "b", 1),
                e("b", "c", 2),
                e("b", "d", 1),
                e("d", "e", 3),
            ],
            1,
        )
        .unwrap();
        let cs = ConfigSpace::new(Arc::new(tree), 3);
        let report = ratio_report(
            &cs,
            &cfg(&[0, 1, 2]),
            &SequenceGen::Random {
                count: 2000,
                len: 8,
                seed: 99,
            },
            TieBreak::Lexicographic,
            0,
        )
        .unwrap();
        assert!(report.complete);
        assert!(report.violations.is_empty());
    }

    #[test]
    fn ratio_budget_flags_partial() {
        let cs = ConfigSpace::new(Arc::new(MetricSpace::line(4, 1, 1).unwrap()), 2);
        let report = ratio_report(
            &cs,
            &cfg(&[0, 3]),
            &SequenceGen::Exhaustive { len: 5 },
            TieBreak::Lexicographic,
            50,
        )
        .unwrap();
        assert!(!report.complete);
        assert_eq!(report.sequences_run, 50);
    }

    #[test]
    fn sequence_parsing() {
        let space = MetricSpace::circle(16, 8, 2).unwrap();
        let events = parse_sequence("taxi 6.5 6\nr 4\n# comment\ntaxi 0 4 ccw\n", &space).unwrap();
        assert_eq!(events.len(), 3);
        match events[0] {
            Event::Taxi(t) => {
                assert_eq!(space.label(t.start), "6.5");
                assert_eq!(space.label(t.dest), "6");
                assert!(t.clockwise);
            }
            _ => panic!("expected taxi"),
        }
        match events[2] {
            Event::Taxi(t) => assert!(!t.clockwise),
            _ => panic!("expected taxi"),
        }
        let err = parse_sequence("r 4\nbogus 1\n", &space).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let err = parse_sequence("r 4.25\n", &space).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));

        let text = format_sequence(&events, &space);
        let back = parse_sequence(&text, &space).unwrap();
        assert_eq!(back, events);
    }
}
