//! k-taxi updates on the circle (closed form and simulated limit), the exact
//! counterexample replay, work-function canonicalization modulo the circle
//! symmetries, and the reachable-state census with its laziness-violation
//! scan.

use crate::metric::{Configuration, MetricSpace, PointId};
use crate::potential::server_potential;
use crate::wfa::{Event, TieBreak};
use crate::workfn::{extended_cost_between, ConfigSpace, WorkFunction};
use crate::{Dist, Error, Result};
use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::sync::Arc;

/// A taxi request `(start, dest)`. The orientation is consulted only when
/// the two points are antipodal and the shortest arc is ambiguous;
/// "clockwise" is the direction of increasing position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaxiRequest {
    pub start: PointId,
    pub dest: PointId,
    pub clockwise: bool,
}

fn circle_positions(space: &MetricSpace) -> Result<(Dist, Vec<Dist>)> {
    let geom = space.circle_geometry().ok_or(Error::NotACircle)?;
    Ok((geom.circumference, geom.positions.clone()))
}

fn arc_dist(circ: Dist, a: Dist, b: Dist) -> Dist {
    let d = (a - b).abs();
    d.min(circ - d)
}

/// Grid points visited when walking the shortest arc from `start` to `dest`,
/// endpoints included. Used to pre-expand taxi events into server requests.
pub fn expand_taxi_grid(space: &MetricSpace, req: &TaxiRequest) -> Result<Vec<PointId>> {
    let (circ, pos) = circle_positions(space)?;
    let n = space.len() as i64;
    let spacing = circ / n;
    let (s, t) = (pos[req.start], pos[req.dest]);
    let forward = (t - s).rem_euclid(circ);
    let dir = if forward < circ - forward || (forward == circ - forward && req.clockwise) {
        1
    } else {
        -1
    };
    let steps = arc_dist(circ, s, t) / spacing;
    let mut out = Vec::with_capacity(steps as usize + 1);
    for i in 0..=steps {
        let p = (s + dir * i * spacing).rem_euclid(circ);
        out.push(space.point_at_position(p).expect("grid point"));
    }
    Ok(out)
}

/// Closed-form taxi update on a circle: request the start, then replace the
/// start by the destination in every support configuration, raising the
/// supporting values by `d(start, dest)`; the full table is reconstructed
/// from the transformed support.
pub fn taxi_update_closed(w: &WorkFunction, req: &TaxiRequest) -> Result<WorkFunction> {
    let space = w.space();
    let (circ, pos) = circle_positions(space)?;
    let cs = w.config_space();
    let after_start = w.update(req.start)?;
    let transport = arc_dist(circ, pos[req.start], pos[req.dest]);
    let mut transformed: Vec<(usize, Dist)> = after_start
        .support_indices()
        .iter()
        .map(|&i| {
            let cfg = cs.config(i as usize).replaced(req.start, req.dest);
            (cs.rank(&cfg), after_start.value(i as usize) + transport)
        })
        .collect();
    transformed.sort_unstable();
    transformed.dedup();
    let values: Vec<Dist> = (0..cs.len())
        .map(|i| {
            transformed
                .iter()
                .map(|&(s, v)| v + cs.config_dist(s, i))
                .min()
                .expect("nonempty support")
        })
        .collect();
    Ok(WorkFunction::from_parts(
        Arc::clone(cs),
        values,
        Some(req.dest),
        w.origin(),
    ))
}

/// A support-represented work function over circle positions at an arbitrary
/// (possibly refined) scale. Serves as the independent route for the dense
/// update and as the engine for the simulated taxi limit: positions are
/// exact scaled integers on a circle of the stored circumference.
#[derive(Debug, Clone)]
pub struct SparseCircleWf {
    pub circumference: Dist,
    pub k: usize,
    /// sorted position-multisets with their values
    pub support: Vec<(Vec<Dist>, Dist)>,
}

impl SparseCircleWf {
    /// Builds from a dense work function, multiplying every position and
    /// value by `factor` (grid refinement).
    pub fn from_work_function(w: &WorkFunction, factor: i64) -> Result<SparseCircleWf> {
        let (circ, pos) = circle_positions(w.space())?;
        let cs = w.config_space();
        let support = w
            .support_indices()
            .iter()
            .map(|&i| {
                let members: Vec<Dist> = cs
                    .config(i as usize)
                    .members()
                    .iter()
                    .map(|&p| pos[p] * factor)
                    .collect();
                (members, w.value(i as usize) * factor)
            })
            .collect();
        Ok(SparseCircleWf {
            circumference: circ * factor,
            k: cs.k(),
            support,
        })
    }

    pub fn cone(circumference: Dist, members: Vec<Dist>) -> SparseCircleWf {
        let mut m = members;
        m.sort_unstable();
        let k = m.len();
        SparseCircleWf {
            circumference,
            k,
            support: vec![(m, 0)],
        }
    }

    fn matching(&self, a: &[Dist], b: &[Dist]) -> Dist {
        let k = a.len();
        let mut perm: Vec<usize> = (0..k).collect();
        let mut best = Dist::MAX;
        fn rec(
            circ: Dist,
            a: &[Dist],
            b: &[Dist],
            perm: &mut Vec<usize>,
            at: usize,
            best: &mut Dist,
        ) {
            if at == perm.len() {
                let cost: Dist = (0..perm.len())
                    .map(|i| arc_dist(circ, a[i], b[perm[i]]))
                    .sum();
                if cost < *best {
                    *best = cost;
                }
                return;
            }
            for i in at..perm.len() {
                perm.swap(at, i);
                rec(circ, a, b, perm, at + 1, best);
                perm.swap(at, i);
            }
        }
        rec(self.circumference, a, b, &mut perm, 0, &mut best);
        best
    }

    /// `min over support of value + matching distance`.
    pub fn eval(&self, config: &[Dist]) -> Dist {
        let mut sorted = config.to_vec();
        sorted.sort_unstable();
        self.support
            .iter()
            .map(|(s, v)| v + self.matching(s, &sorted))
            .min()
            .expect("nonempty support")
    }

    /// Serves a request at position `r`: the new support is the minimal set
    /// among the candidates `S - x + r`, whose values are the old function's
    /// values (they contain the request).
    pub fn update(&self, r: Dist) -> SparseCircleWf {
        let r = r.rem_euclid(self.circumference);
        let mut candidates: Vec<Vec<Dist>> = Vec::new();
        for (s, _) in &self.support {
            for i in 0..s.len() {
                if i > 0 && s[i] == s[i - 1] {
                    continue;
                }
                let mut cand = s.clone();
                cand[i] = r;
                cand.sort_unstable();
                if !candidates.contains(&cand) {
                    candidates.push(cand);
                }
            }
        }
        let valued: Vec<(Vec<Dist>, Dist)> = candidates
            .into_iter()
            .map(|c| (c.clone(), self.eval(&c)))
            .collect();
        let minimal: Vec<(Vec<Dist>, Dist)> = valued
            .iter()
            .filter(|(c, v)| {
                !valued.iter().any(|(c2, v2)| {
                    c2 != c && *v == v2 + self.matching(c, c2) && self.matching(c, c2) > 0
                })
            })
            .cloned()
            .collect();
        SparseCircleWf {
            circumference: self.circumference,
            k: self.k,
            support: minimal,
        }
    }

    /// Closed-form taxi update: request the start, then move start to dest
    /// in every support configuration, adding the transport distance.
    pub fn taxi_update(&self, start: Dist, dest: Dist) -> SparseCircleWf {
        let after = self.update(start);
        let transport = arc_dist(self.circumference, start, dest);
        let support = after
            .support
            .into_iter()
            .map(|(mut s, v)| {
                let i = s
                    .iter()
                    .position(|&p| p == start)
                    .expect("support contains start");
                s[i] = dest.rem_euclid(self.circumference);
                s.sort_unstable();
                (s, v + transport)
            })
            .collect();
        SparseCircleWf {
            circumference: self.circumference,
            k: self.k,
            support,
        }
    }

    /// Dense table over the configurations of `cs`, whose circle positions
    /// are `factor` times coarser than this function's grid.
    pub fn to_dense_values(&self, cs: &ConfigSpace, factor: i64) -> Result<Vec<Dist>> {
        let (circ, pos) = circle_positions(cs.space())?;
        if circ * factor != self.circumference {
            return Err(Error::InvalidMetric("refinement factor mismatch".into()));
        }
        Ok((0..cs.len())
            .map(|i| {
                let members: Vec<Dist> = cs
                    .config(i)
                    .members()
                    .iter()
                    .map(|&p| pos[p] * factor)
                    .collect();
                self.eval(&members)
            })
            .collect())
    }
}

/// Result of simulating a taxi request by `m` equally spaced server requests
/// along the shortest arc: a support-represented work function on the grid
/// refined by `m - 1`. Values are in refined units (original scaled values
/// times `refine_factor`).
#[derive(Debug, Clone)]
pub struct SimulatedTaxiUpdate {
    pub refine_factor: i64,
    pub sparse: SparseCircleWf,
}

impl SimulatedTaxiUpdate {
    /// `max over configurations of closed(X) * factor - simulated(X)`, the
    /// simulation shortfall in refined units. Nonnegative when the simulated
    /// function never exceeds the closed form.
    pub fn deviation_range(&self, closed: &WorkFunction) -> Result<(Dist, Dist)> {
        let cs = closed.config_space();
        let dense = self.sparse.to_dense_values(cs, self.refine_factor)?;
        let mut min_dev = Dist::MAX;
        let mut max_dev = Dist::MIN;
        for i in 0..cs.len() {
            let dev = closed.value(i) * self.refine_factor - dense[i];
            min_dev = min_dev.min(dev);
            max_dev = max_dev.max(dev);
        }
        Ok((min_dev, max_dev))
    }
}

/// Simulates the taxi request by `m >= 2` equally spaced requests from start
/// to dest along the shortest arc (clockwise on ties if requested), on the
/// grid refined by `m - 1`.
pub fn taxi_update_simulated(
    w: &WorkFunction,
    req: &TaxiRequest,
    m: u32,
) -> Result<SimulatedTaxiUpdate> {
    if m < 2 {
        return Err(Error::InvalidMetric(
            "simulation needs at least 2 points".into(),
        ));
    }
    let space = w.space();
    let (circ, pos) = circle_positions(space)?;
    let factor = (m - 1) as i64;
    let mut sparse = SparseCircleWf::from_work_function(w, factor)?;
    let (s, t) = (pos[req.start] * factor, pos[req.dest] * factor);
    let circ_ref = circ * factor;
    let forward = (t - s).rem_euclid(circ_ref);
    let dir = if forward < circ_ref - forward || (forward == circ_ref - forward && req.clockwise) {
        1
    } else {
        -1
    };
    let arc = arc_dist(circ_ref, s, t);
    debug_assert_eq!(arc % factor, 0);
    let step = arc / factor; // refined units per hop
    for i in 0..m as i64 {
        let r = (s + dir * i * step).rem_euclid(circ_ref);
        sparse = sparse.update(r);
    }
    Ok(SimulatedTaxiUpdate {
        refine_factor: factor,
        sparse,
    })
}

/// A mixed server/taxi run under the closed-form updates. A taxi event is
/// served by sending one server to the start and dragging it to the
/// destination; the serving server minimizes
/// `d(x, start) + d(start, dest) + w'(C - x + dest)` with ties broken by the
/// policy.
#[derive(Debug, Clone)]
pub struct TaxiTrajectory {
    pub events: Vec<Event>,
    pub configs: Vec<Configuration>,
    pub costs: Vec<Dist>,
    pub wfs: Vec<WorkFunction>,
    pub nablas: Vec<Dist>,
    pub pinned: Vec<Dist>,
    /// whether the tracked preferred server served each event (always false
    /// entries under other policies)
    pub served_by_preferred: Vec<bool>,
}

impl TaxiTrajectory {
    pub fn total_cost(&self) -> Dist {
        self.costs.iter().sum()
    }

    pub fn final_wf(&self) -> &WorkFunction {
        self.wfs.last().expect("nonempty")
    }

    pub fn final_config(&self) -> &Configuration {
        self.configs.last().expect("nonempty")
    }
}

pub fn run_events(
    cs: &Arc<ConfigSpace>,
    c0: &Configuration,
    events: &[Event],
    tie: TieBreak,
) -> Result<TaxiTrajectory> {
    if c0.k() != cs.k() {
        return Err(Error::SizeMismatch {
            expected: cs.k(),
            got: c0.k(),
        });
    }
    let space = cs.space();
    let mut pref_pos = match tie {
        TieBreak::PreferServer(p) => Some(p),
        _ => None,
    };
    let mut configs = vec![c0.clone()];
    let mut costs = Vec::new();
    let mut wfs = vec![WorkFunction::cone(cs, c0)?];
    let mut nablas = Vec::new();
    let mut pinned = Vec::new();
    let mut served_by_preferred = Vec::new();
    for event in events {
        let w_prev = wfs.last().unwrap();
        let c_prev = configs.last().unwrap().clone();
        let (w_next, serve_at, end_at, approach): (WorkFunction, PointId, PointId, Dist) =
            match event {
                Event::Server(r) => (w_prev.update(*r)?, *r, *r, 0),
                Event::Taxi(t) => {
                    let (circ, pos) = circle_positions(space)?;
                    let w = taxi_update_closed(w_prev, t)?;
                    let transport = arc_dist(circ, pos[t.start], pos[t.dest]);
                    (w, t.start, t.dest, transport)
                }
            };
        nablas.push(extended_cost_between(w_prev, &w_next));
        pinned.push(w_next.value_of(&c_prev) - w_prev.value_of(&c_prev));
        // choose the serving server
        let mut best_score = Dist::MAX;
        let mut candidates: Vec<(PointId, Configuration, Dist)> = Vec::new();
        for x in c_prev.distinct() {
            let target = c_prev.replaced(x, end_at);
            let move_cost = space.d(x, serve_at) + approach;
            let score = move_cost + w_next.value_of(&target);
            if score < best_score {
                best_score = score;
                candidates.clear();
            }
            if score == best_score {
                candidates.push((x, target, move_cost));
            }
        }
        let pick = match pref_pos {
            Some(p) => candidates.iter().find(|&&(x, _, _)| x == p).cloned(),
            None => None,
        }
        .unwrap_or_else(|| candidates[0].clone());
        let (moved, c_next, cost) = pick;
        served_by_preferred.push(pref_pos == Some(moved));
        if pref_pos == Some(moved) {
            pref_pos = Some(end_at);
        }
        costs.push(cost);
        configs.push(c_next);
        wfs.push(w_next);
    }
    Ok(TaxiTrajectory {
        events: events.to_vec(),
        configs,
        costs,
        wfs,
        nablas,
        pinned,
        served_by_preferred,
    })
}

/// The eight work-function stages of the counterexample replay: the initial
/// cone and the function after each of the seven requests. Values are scaled
/// by 2 (the space is the circumference-8 circle at scale 2, so a table
/// value of 18 reads as 9). Each entry lists the support as
/// `(configuration labels, scaled value)`.
///
/// The fixture was produced by the dense engine and is cross-checked against
/// the sparse support engine and the recorded anchor values in the
/// acceptance suite.
pub mod replay_record {
    /// `(stage label, &[(support configuration, scaled value)])`
    pub const STAGES: [(&str, &[(&str, i64)]); 8] = [
        ("initial cone {1,6,7}", &[("1,6,7", 0)]),
        ("after taxi (6.5,6)", &[("1,6,6", 2), ("1,6,7", 2)]),
        (
            "after request 4",
            &[("1,4,6", 6), ("1,4,7", 6), ("4,6,6", 8), ("4,6,7", 8)],
        ),
        (
            "after taxi (2.5,2)",
            &[
                ("1,2,6", 10),
                ("1,2,7", 10),
                ("2,4,6", 10),
                ("2,4,7", 10),
                ("2,6,6", 12),
                ("2,6,7", 12),
            ],
        ),
        (
            "after request 3",
            &[
                ("1,3,6", 12),
                ("1,3,7", 12),
                ("2,3,6", 12),
                ("2,3,7", 12),
                ("3,4,6", 12),
                ("3,4,7", 12),
                ("3,6,6", 14),
                ("3,6,7", 14),
            ],
        ),
        (
            "after request 4",
            &[
                ("1,4,6", 14),
                ("1,4,7", 14),
                ("2,3,4", 16),
                ("3,4,6", 12),
                ("3,4,7", 12),
                ("4,6,6", 16),
                ("4,6,7", 16),
            ],
        ),
        (
            "after taxi (3.5,5)",
            &[
                ("1,5,6", 18),
                ("1,5,7", 18),
                ("2,3,5", 20),
                ("2,4,5", 20),
                ("3,5,6", 16),
                ("3,5,7", 16),
                ("4,5,6", 16),
                ("4,5,7", 16),
            ],
        ),
        (
            "after request 4",
            &[
                ("1,4,6", 20),
                ("1,4,7", 20),
                ("2,3,4", 22),
                ("2,4,5", 20),
                ("3,4,6", 18),
                ("3,4,7", 18),
                ("4,5,6", 16),
                ("4,5,7", 16),
            ],
        ),
    ];
}

/// Everything the counterexample replay reproduces, in scaled units
/// (scale 2).
#[derive(Debug, Clone)]
pub struct ReplayReport {
    pub stages: Vec<(String, Vec<(Configuration, Dist)>)>,
    pub trajectory: TaxiTrajectory,
    pub wfa_config: Configuration,
    pub w_t_at_config: Dist,
    pub w_t1_at_config: Dist,
    pub phi_w_t: crate::potential::PotentialReport,
    pub phi_w_t1: crate::potential::PotentialReport,
    pub phi_572_value: Dist,
    pub phi_572_upper_bound: Dist,
    pub laziness_gap: Dist,
}

/// The counterexample instance: the circumference-8 circle on the
/// half-integer grid (16 points, scale divisible by 2), servers starting at
/// {1, 6, 7}, and the seven mixed requests. A scale that cannot represent
/// the half-integer points is rejected with a hint.
pub fn counterexample_instance(
    scale: i64,
) -> Result<(Arc<ConfigSpace>, Configuration, Vec<Event>)> {
    let space = Arc::new(MetricSpace::circle(16, 8, scale)?);
    let cs = ConfigSpace::new(Arc::clone(&space), 3);
    let p = |name: &str| space.point_by_name(name).expect("grid point");
    let c0 = Configuration::new(vec![p("1"), p("6"), p("7")]);
    let taxi = |s: &str, t: &str| {
        Event::Taxi(TaxiRequest {
            start: p(s),
            dest: p(t),
            clockwise: true,
        })
    };
    let events = vec![
        taxi("6.5", "6"),
        Event::Server(p("4")),
        taxi("2.5", "2"),
        Event::Server(p("3")),
        Event::Server(p("4")),
        taxi("3.5", "5"),
        Event::Server(p("4")),
    ];
    Ok((cs, c0, events))
}

/// Replays the counterexample bit-exactly: the six mixed requests reaching
/// `w_t` and the final request at 4 reaching `w_{t+1}`. Any deviation from
/// the recorded stage supports is a hard error carrying a diff.
pub fn replay_counterexample() -> Result<ReplayReport> {
    let (cs, c0, events) = counterexample_instance(2)?;
    let space = cs.space_arc();
    let p = |name: &str| space.point_by_name(name).expect("grid point");
    let traj = run_events(&cs, &c0, &events, TieBreak::PreferServer(p("6")))?;

    // stage-by-stage support comparison against the recorded fixture
    let mut stages = Vec::new();
    let mut diff = String::new();
    for (idx, (label, expected)) in replay_record::STAGES.iter().enumerate() {
        let w = &traj.wfs[idx];
        let mut got: Vec<(Configuration, Dist)> = w.support().entries;
        got.sort_by(|a, b| a.0.cmp(&b.0));
        let mut want: Vec<(Configuration, Dist)> = expected
            .iter()
            .map(|(cfg, v)| {
                let members = cfg.split(',').map(|s| p(s)).collect();
                (Configuration::new(members), *v)
            })
            .collect();
        want.sort_by(|a, b| a.0.cmp(&b.0));
        if got != want {
            diff.push_str(&format!(
                "stage {idx} ({label}): expected {:?}, computed {:?}\n",
                print_support(&want, &space),
                print_support(&got, &space)
            ));
        }
        stages.push((label.to_string(), got));
    }
    if !diff.is_empty() {
        return Err(Error::InvalidMetric(format!(
            "replay diverges from the record:\n{diff}"
        )));
    }

    let w_t = &traj.wfs[6];
    let w_t1 = &traj.wfs[7];
    let wfa_config = traj.configs[6].clone();
    let w_t_at_config = w_t.value_of(&wfa_config);
    let w_t1_at_config = w_t1.value_of(&wfa_config);
    let phi_w_t = server_potential(w_t)?;
    let phi_w_t1 = server_potential(w_t1)?;
    let tuple_572 = [p("5"), p("7"), p("2")];
    let phi_572 = crate::potential::server_potential_at(w_t1, &tuple_572)?;
    // the recorded upper-bound assembly for the tuple (5, 7, 2):
    // w(574) + d(2,4), w(174) + d(2,4), w(432) + d(3,4), w(654) + d(5,6) + d(4,6)
    let v = |a: &str, b: &str, c: &str| w_t1.value_of(&Configuration::new(vec![p(a), p(b), p(c)]));
    let d = |a: &str, b: &str| space.d(p(a), p(b));
    let bound = (v("5", "7", "4") + d("2", "4"))
        + (v("1", "7", "4") + d("2", "4"))
        + (v("4", "3", "2") + d("3", "4"))
        + (v("6", "5", "4") + d("5", "6") + d("4", "6"));
    let gap = phi_w_t1.value - phi_w_t.value - (w_t1_at_config - w_t_at_config);

    Ok(ReplayReport {
        stages,
        wfa_config,
        w_t_at_config,
        w_t1_at_config,
        phi_w_t,
        phi_w_t1,
        phi_572_value: phi_572.value,
        phi_572_upper_bound: bound,
        laziness_gap: gap,
        trajectory: traj,
    })
}

fn print_support(entries: &[(Configuration, Dist)], space: &MetricSpace) -> Vec<String> {
    entries
        .iter()
        .map(|(c, v)| format!("{{{}}}={}", c.display(space), v))
        .collect()
}

/// Point permutations of the dihedral group of the destination lattice:
/// rotations by multiples of `lattice_step` grid points and reflections
/// through lattice axes. For a circle of n points and step s this has
/// `2 * n / s` elements.
pub fn circle_symmetries(space: &MetricSpace, lattice_step: usize) -> Result<Vec<Vec<PointId>>> {
    let (_, _) = circle_positions(space)?;
    let n = space.len();
    if lattice_step == 0 || n % lattice_step != 0 {
        return Err(Error::InvalidMetric(
            "lattice step must divide the point count".into(),
        ));
    }
    let mut perms = Vec::with_capacity(2 * n / lattice_step);
    for shift in (0..n).step_by(lattice_step) {
        perms.push((0..n).map(|x| (x + shift) % n).collect());
        perms.push((0..n).map(|x| (shift + n - x % n) % n).collect());
    }
    Ok(perms)
}

/// Canonical work-function fingerprint: the value table normalized by
/// subtracting the minimum, minimized lexicographically over the dihedral
/// group of the `lattice_step` sublattice. Two work functions equal up to
/// rotation, reflection, and an additive constant have equal canonical
/// forms.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CanonicalWf {
    pub values: Vec<Dist>,
}

impl CanonicalWf {
    pub fn fingerprint(&self) -> String {
        let mut h1: u64 = 0xcbf29ce484222325;
        let mut h2: u64 = 0x9e3779b97f4a7c15;
        for &v in &self.values {
            h1 = (h1 ^ v as u64).wrapping_mul(0x100000001b3);
            h2 = (h2 ^ (v as u64).rotate_left(17)).wrapping_mul(0xff51afd7ed558ccd);
        }
        format!("{h1:016x}{h2:016x}")
    }
}

/// Config-index permutations induced by the group's point permutations.
fn group_config_perms(cs: &ConfigSpace, perms: &[Vec<PointId>]) -> Vec<Vec<u32>> {
    perms
        .iter()
        .map(|g| {
            (0..cs.len())
                .map(|i| {
                    let mapped: Vec<PointId> =
                        cs.config(i).members().iter().map(|&p| g[p]).collect();
                    Configuration::new(mapped).rank() as u32
                })
                .collect()
        })
        .collect()
}

pub fn canonicalize(w: &WorkFunction, lattice_step: usize) -> Result<CanonicalWf> {
    let perms = circle_symmetries(w.space(), lattice_step)?;
    let cfg_perms = group_config_perms(w.config_space(), &perms);
    let normalized = w.normalized_values();
    Ok(CanonicalWf {
        values: canonical_table(&normalized, &cfg_perms),
    })
}

/// Canonical form of a (work function, request) pair: the canonical table
/// plus the request mapped into the lexicographically minimal
/// (table, request) frame. This is the identity used to deduplicate
/// violation classes in the census.
pub fn canonical_state_request(
    w: &WorkFunction,
    r: PointId,
    lattice_step: usize,
) -> Result<(CanonicalWf, PointId)> {
    let point_perms = circle_symmetries(w.space(), lattice_step)?;
    let cfg_perms = group_config_perms(w.config_space(), &point_perms);
    let normalized = w.normalized_values();
    let state = CanonicalWf {
        values: canonical_table(&normalized, &cfg_perms),
    };
    let mut best: Option<(Vec<Dist>, PointId)> = None;
    for (perm, points) in cfg_perms.iter().zip(&point_perms) {
        let table: Vec<Dist> = (0..normalized.len())
            .map(|i| normalized[perm[i] as usize])
            .collect();
        let req = points.iter().position(|&q| q == r).expect("bijection");
        let cand = (table, req);
        match &best {
            Some(b) if cand >= *b => {}
            _ => best = Some(cand),
        }
    }
    Ok((state, best.expect("nonempty group").1))
}

/// Lexicographically minimal permuted table. `table` must be normalized.
fn canonical_table(table: &[Dist], cfg_perms: &[Vec<u32>]) -> Vec<Dist> {
    let mut best: Option<Vec<Dist>> = None;
    for perm in cfg_perms {
        let candidate: Vec<Dist> = (0..table.len()).map(|i| table[perm[i] as usize]).collect();
        match &best {
            Some(b) if candidate >= *b => {}
            _ => best = Some(candidate),
        }
    }
    best.expect("nonempty group")
}

/// Options for the reachable-state census on a circle.
#[derive(Debug, Clone)]
pub struct EnumerationOptions {
    /// grid points between consecutive destinations (2 for the half-integer
    /// grid with integer destinations)
    pub lattice_step: usize,
    /// allow taxi starts at every grid point (destinations plus midpoints);
    /// otherwise starts are restricted to the destinations
    pub midpoint_starts: bool,
    /// also scan midpoint requests for laziness violations (destinations
    /// are always scanned)
    pub scan_midpoint_requests: bool,
    /// drop the taxi transports: children are plain server requests at the
    /// destinations
    pub server_requests_only: bool,
    /// verify 1-Lipschitzness and quasiconvexity on roughly 1% of the
    /// expanded states (deterministic sample)
    pub spot_check_invariants: bool,
    /// stop after expanding this many states (0 = unlimited)
    pub max_states: u64,
    pub workers: usize,
    /// extra seed work functions beyond the cones over destinations
    pub extra_seeds: Vec<WorkFunction>,
    /// print progress to stderr
    pub progress: bool,
    /// write a checkpoint here on completion or budget exhaustion
    pub checkpoint: Option<std::path::PathBuf>,
    /// resume from a checkpoint written earlier
    pub resume: Option<std::path::PathBuf>,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        EnumerationOptions {
            lattice_step: 2,
            midpoint_starts: true,
            scan_midpoint_requests: false,
            server_requests_only: false,
            spot_check_invariants: false,
            max_states: 0,
            workers: 1,
            extra_seeds: Vec::new(),
            progress: false,
            checkpoint: None,
            resume: None,
        }
    }
}

/// A laziness violation found by the census scan.
#[derive(Debug, Clone)]
pub struct Violation {
    pub state: CanonicalWf,
    pub fingerprint: String,
    /// request in the canonical state's frame
    pub request: PointId,
    pub nabla: Dist,
    pub phi_delta: Dist,
    pub gap: Dist,
}

#[derive(Debug)]
pub struct Census {
    /// canonical classes discovered (including unexpanded frontier states)
    pub discovered: u64,
    /// canonical classes expanded and violation-scanned
    pub expanded: u64,
    pub violations: Vec<Violation>,
    pub complete: bool,
}

impl Census {
    /// Violations deduplicated by canonical (state, request) pair.
    pub fn violation_classes(&self) -> Vec<&Violation> {
        let mut seen: HashSet<(Vec<Dist>, PointId)> = HashSet::new();
        let mut out = Vec::new();
        for v in &self.violations {
            if seen.insert((v.state.values.clone(), v.request)) {
                out.push(v);
            }
        }
        out
    }
}

type SupportKey = Vec<(u32, u32)>;

fn encode_key(key: &SupportKey) -> Vec<u8> {
    let mut out = Vec::with_capacity(key.len() * 8);
    for &(r, v) in key {
        out.extend_from_slice(&r.to_le_bytes());
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn decode_key(bytes: &[u8]) -> SupportKey {
    bytes
        .chunks_exact(8)
        .map(|c| {
            (
                u32::from_le_bytes([c[0], c[1], c[2], c[3]]),
                u32::from_le_bytes([c[4], c[5], c[6], c[7]]),
            )
        })
        .collect()
}

/// Shared immutable context for the census workers.
struct EnumContext {
    cs: Arc<ConfigSpace>,
    dests: Vec<PointId>,
    starts: Vec<PointId>,
    scan_requests: Vec<PointId>,
    /// per point, the transport distance table to destinations
    arc: Vec<Vec<Dist>>,
    /// per request point, per config: (target rank, move distance) per
    /// distinct member
    update_nbr: Vec<Vec<Vec<(u32, Dist)>>>,
    /// per point, indices of configurations containing it
    containing: Vec<Vec<u32>>,
    /// group point permutations and induced config permutations
    point_perms: Vec<Vec<PointId>>,
    cfg_perms: Vec<Vec<u32>>,
    /// rank of the multiset {a, b, c} for every ordered triple
    triple_rank: Vec<u32>,
    antipode: Vec<PointId>,
    server_only: bool,
    spot_check: bool,
}

impl EnumContext {
    fn new(cs: &Arc<ConfigSpace>, opts: &EnumerationOptions) -> Result<EnumContext> {
        if cs.k() != 3 {
            return Err(Error::UnsupportedK {
                k: cs.k(),
                why: "the census is built for k = 3".into(),
            });
        }
        let space = cs.space();
        let (circ, pos) = circle_positions(space)?;
        let n = space.len();
        if n % opts.lattice_step != 0 {
            return Err(Error::InvalidMetric(
                "lattice step must divide the grid".into(),
            ));
        }
        let dests: Vec<PointId> = (0..n).step_by(opts.lattice_step).collect();
        let starts: Vec<PointId> = if opts.midpoint_starts {
            (0..n).collect()
        } else {
            dests.clone()
        };
        let mut scan_requests = dests.clone();
        if opts.scan_midpoint_requests {
            scan_requests = (0..n).collect();
        }
        let arc: Vec<Vec<Dist>> = (0..n)
            .map(|s| (0..n).map(|t| arc_dist(circ, pos[s], pos[t])).collect())
            .collect();
        let update_nbr: Vec<Vec<Vec<(u32, Dist)>>> = (0..n)
            .map(|r| {
                (0..cs.len())
                    .map(|i| {
                        cs.config(i)
                            .distinct()
                            .map(|x| (cs.config(i).replaced(x, r).rank() as u32, space.d(x, r)))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let containing: Vec<Vec<u32>> = (0..n)
            .map(|p| cs.containing(p).into_iter().map(|i| i as u32).collect())
            .collect();
        let point_perms = circle_symmetries(space, opts.lattice_step)?;
        let cfg_perms = group_config_perms(cs, &point_perms);
        let mut triple_rank = vec![0u32; n * n * n];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    triple_rank[(a * n + b) * n + c] =
                        Configuration::new(vec![a, b, c]).rank() as u32;
                }
            }
        }
        let antipode = space.antipode_map().ok_or(Error::NeedsAntipodes)?.to_vec();
        // make sure the shared distance matrix is built before workers start
        let _ = cs.config_dist(0, 0);
        Ok(EnumContext {
            cs: Arc::clone(cs),
            dests,
            starts,
            scan_requests,
            arc,
            update_nbr,
            containing,
            point_perms,
            cfg_perms,
            triple_rank,
            antipode,
            server_only: opts.server_requests_only,
            spot_check: opts.spot_check_invariants,
        })
    }

    fn reconstruct(&self, key: &SupportKey) -> Vec<Dist> {
        let cs = &self.cs;
        (0..cs.len())
            .map(|i| {
                key.iter()
                    .map(|&(s, v)| v as Dist + cs.config_dist(s as usize, i))
                    .min()
                    .expect("nonempty support")
            })
            .collect()
    }

    fn update_values(&self, values: &[Dist], r: PointId) -> Vec<Dist> {
        self.update_nbr[r]
            .iter()
            .map(|nbrs| {
                nbrs.iter()
                    .map(|&(t, d)| values[t as usize] + d)
                    .min()
                    .unwrap()
            })
            .collect()
    }

    /// Support of `updated = values ∧ r` among configurations containing r.
    fn support_after(&self, updated: &[Dist], r: PointId) -> Vec<(u32, Dist)> {
        let holders = &self.containing[r];
        let cs = &self.cs;
        let mut out = Vec::new();
        'outer: for &i in holders {
            let vi = updated[i as usize];
            for &j in holders {
                if j != i {
                    let d = cs.config_dist(i as usize, j as usize);
                    if d > 0 && vi == updated[j as usize] + d {
                        continue 'outer;
                    }
                }
            }
            out.push((i, vi));
        }
        out
    }

    /// Canonical support key: transform by every group element, normalize by
    /// the minimum value, sort, and take the lexicographic minimum.
    fn canonical_key(&self, support: &[(u32, Dist)]) -> SupportKey {
        let min = support.iter().map(|&(_, v)| v).min().expect("nonempty");
        let mut best: Option<SupportKey> = None;
        for perm in &self.cfg_perms {
            let mut cand: SupportKey = support
                .iter()
                .map(|&(r, v)| (perm[r as usize], (v - min) as u32))
                .collect();
            cand.sort_unstable();
            match &best {
                Some(b) if cand >= *b => {}
                _ => best = Some(cand),
            }
        }
        best.expect("nonempty group")
    }

    /// k = 3 potential minimum over the full grid via the term tables.
    fn phi_min(&self, values: &[Dist]) -> Dist {
        let n = self.cs.space().len();
        let tr = |a: usize, b: usize, c: usize| self.triple_rank[(a * n + b) * n + c] as usize;
        let mut best = Dist::MAX;
        for c in 0..n {
            let cbar = self.antipode[c];
            let term3 = values[tr(cbar, cbar, cbar)];
            let mut inner_b = Dist::MAX;
            for b in 0..n {
                let bbar = self.antipode[b];
                let term2 = values[tr(bbar, bbar, c)];
                let mut inner_a = Dist::MAX;
                for a in 0..n {
                    let abar = self.antipode[a];
                    let cand = values[tr(a, b, c)] + values[tr(abar, b, c)];
                    inner_a = inner_a.min(cand);
                }
                inner_b = inner_b.min(term2 + inner_a);
            }
            best = best.min(term3 + inner_b);
        }
        best
    }

    /// Canonical (state, request) pair for violation class deduplication.
    fn canonical_pair(&self, normalized: &[Dist], r: PointId) -> (Vec<Dist>, PointId) {
        let mut best: Option<(Vec<Dist>, PointId)> = None;
        for (perm, points) in self.cfg_perms.iter().zip(&self.point_perms) {
            let table: Vec<Dist> = (0..normalized.len())
                .map(|i| normalized[perm[i] as usize])
                .collect();
            let req = points.iter().position(|&q| q == r).expect("bijection");
            let cand = (table, req);
            match &best {
                Some(b) if cand >= *b => {}
                _ => best = Some(cand),
            }
        }
        best.expect("nonempty group")
    }
}

struct ExpandOutput {
    children: Vec<SupportKey>,
    violations: Vec<Violation>,
}

fn expand_state(ctx: &EnumContext, key: &SupportKey) -> ExpandOutput {
    let values = ctx.reconstruct(key);
    if ctx.spot_check && fnv_of(key) % 128 == 0 {
        let w = WorkFunction::from_table(&ctx.cs, values.clone()).expect("table shape");
        assert!(
            w.is_lipschitz(),
            "census state violates the Lipschitz bound"
        );
        assert!(
            w.is_quasiconvex().expect("k <= 5"),
            "census state violates quasiconvexity"
        );
    }
    let mut children = Vec::with_capacity(ctx.starts.len() * ctx.dests.len());
    let mut phi_here: Option<Dist> = None;
    let mut violations = Vec::new();
    for &s in &ctx.starts {
        let updated = ctx.update_values(&values, s);
        let support = ctx.support_after(&updated, s);
        if ctx.server_only {
            if ctx.dests.contains(&s) {
                children.push(ctx.canonical_key(&support));
            }
        } else {
            for &t in &ctx.dests {
                let transport = ctx.arc[s][t];
                let transformed: Vec<(u32, Dist)> = support
                    .iter()
                    .map(|&(i, v)| {
                        let cfg = ctx.cs.config(i as usize).replaced(s, t);
                        (cfg.rank() as u32, v + transport)
                    })
                    .collect();
                children.push(ctx.canonical_key(&transformed));
            }
        }
        // the pure server request (s, s) doubles as the violation scan
        if ctx.scan_requests.contains(&s) {
            let nabla = values
                .iter()
                .zip(&updated)
                .map(|(a, b)| b - a)
                .max()
                .expect("nonempty");
            if nabla > 0 {
                let phi_w = *phi_here.get_or_insert_with(|| ctx.phi_min(&values));
                let phi_u = ctx.phi_min(&updated);
                let gap = phi_u - phi_w - nabla;
                if gap < 0 {
                    let min = values.iter().min().unwrap();
                    let normalized: Vec<Dist> = values.iter().map(|v| v - min).collect();
                    let (_, canon_req) = ctx.canonical_pair(&normalized, s);
                    let state = CanonicalWf {
                        values: canonical_table(&normalized, &ctx.cfg_perms),
                    };
                    let fingerprint = state.fingerprint();
                    violations.push(Violation {
                        state,
                        fingerprint,
                        request: canon_req,
                        nabla,
                        phi_delta: phi_u - phi_w,
                        gap,
                    });
                }
            }
        }
    }
    ExpandOutput {
        children,
        violations,
    }
}

fn fnv_of(key: &SupportKey) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &(r, v) in key {
        h = (h ^ r as u64).wrapping_mul(0x100000001b3);
        h = (h ^ v as u64).wrapping_mul(0x100000001b3);
    }
    h
}

/// Breadth-first closure of canonical work functions reachable by taxi
/// requests from cones over the destinations (plus any extra seeds), with a
/// laziness-violation scan at every expanded state.
pub fn enumerate_reachable(cs: &Arc<ConfigSpace>, opts: &EnumerationOptions) -> Result<Census> {
    let ctx = EnumContext::new(cs, opts)?;
    let mut visited: HashSet<Vec<u8>> = HashSet::new();
    let mut frontier: Vec<SupportKey> = Vec::new();
    let mut expanded: u64 = 0;
    let mut violations: Vec<Violation> = Vec::new();

    if let Some(path) = &opts.resume {
        let file = std::fs::File::open(path)?;
        let mut reader = std::io::BufReader::new(file);
        let loaded = load_checkpoint(&mut reader, cs)?;
        violations = loaded.violations_raw(&ctx);
        visited = loaded.visited;
        frontier = loaded.frontier;
        expanded = loaded.expanded;
    } else {
        // seeds: every cone over destination configurations, plus extras
        for members in crate::metric::all_configurations(cs.space().len(), cs.k()) {
            if !members.members().iter().all(|p| ctx.dests.contains(p)) {
                continue;
            }
            let w = WorkFunction::cone(cs, &members)?;
            let support: Vec<(u32, Dist)> = w
                .support_indices()
                .iter()
                .map(|&i| (i, w.value(i as usize)))
                .collect();
            let key = ctx.canonical_key(&support);
            if visited.insert(encode_key(&key)) {
                frontier.push(key);
            }
        }
        for w in &opts.extra_seeds {
            let support: Vec<(u32, Dist)> = w
                .support_indices()
                .iter()
                .map(|&i| (i, w.value(i as usize)))
                .collect();
            let key = ctx.canonical_key(&support);
            if visited.insert(encode_key(&key)) {
                frontier.push(key);
            }
        }
    }

    let mut complete = true;
    'outer: while !frontier.is_empty() {
        // take a budget-limited batch of states to expand this generation
        let budget_left = if opts.max_states == 0 {
            usize::MAX
        } else {
            (opts.max_states.saturating_sub(expanded)) as usize
        };
        if budget_left == 0 {
            complete = false;
            break 'outer;
        }
        let take = frontier
            .len()
            .min(budget_left)
            .min(2048.max(opts.workers * 512));
        let batch: Vec<SupportKey> = frontier.drain(..take).collect();
        let outputs: Vec<ExpandOutput> = if opts.workers > 1 {
            let chunk = batch.len().div_ceil(opts.workers);
            std::thread::scope(|scope| {
                let mut handles = Vec::new();
                for part in batch.chunks(chunk.max(1)) {
                    let ctx_ref = &ctx;
                    handles.push(scope.spawn(move || {
                        part.iter()
                            .map(|key| expand_state(ctx_ref, key))
                            .collect::<Vec<_>>()
                    }));
                }
                handles
                    .into_iter()
                    .flat_map(|h| h.join().expect("worker"))
                    .collect()
            })
        } else {
            batch.iter().map(|key| expand_state(&ctx, key)).collect()
        };
        expanded += batch.len() as u64;
        for out in outputs {
            violations.extend(out.violations);
            for child in out.children {
                let bytes = encode_key(&child);
                if visited.insert(bytes) {
                    frontier.push(child);
                }
            }
        }
        if opts.progress {
            eprintln!(
                "census: expanded {expanded}, discovered {}, frontier {}",
                visited.len(),
                frontier.len()
            );
        }
    }

    let census = Census {
        discovered: visited.len() as u64,
        expanded,
        violations,
        complete: complete && frontier.is_empty(),
    };
    if let Some(path) = &opts.checkpoint {
        let file = std::fs::File::create(path)?;
        let mut writer = std::io::BufWriter::new(file);
        save_checkpoint(
            &mut writer,
            cs,
            &visited,
            &frontier,
            expanded,
            &census.violations,
        )?;
    }
    Ok(census)
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"WFAENUM1";

/// Checkpoint payload: the visited fingerprint store, the unexpanded
/// frontier, and the violations found so far.
pub struct Checkpoint {
    pub visited: HashSet<Vec<u8>>,
    pub frontier: Vec<SupportKey>,
    pub expanded: u64,
    violations: Vec<(SupportKey, u32, Dist, Dist, Dist)>,
}

impl Checkpoint {
    fn violations_raw(&self, ctx: &EnumContext) -> Vec<Violation> {
        self.violations
            .iter()
            .map(|(key, req, nabla, phi_delta, gap)| {
                let values = ctx.reconstruct(key);
                let min = values.iter().min().unwrap();
                let normalized: Vec<Dist> = values.iter().map(|v| v - min).collect();
                let state = CanonicalWf { values: normalized };
                let fingerprint = state.fingerprint();
                Violation {
                    state,
                    fingerprint,
                    request: *req as PointId,
                    nabla: *nabla,
                    phi_delta: *phi_delta,
                    gap: *gap,
                }
            })
            .collect()
    }
}

pub fn save_checkpoint(
    out: &mut impl Write,
    cs: &ConfigSpace,
    visited: &HashSet<Vec<u8>>,
    frontier: &[SupportKey],
    expanded: u64,
    violations: &[Violation],
) -> Result<()> {
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&cs.space().fingerprint().to_le_bytes())?;
    out.write_all(&(cs.k() as u32).to_le_bytes())?;
    out.write_all(&expanded.to_le_bytes())?;
    out.write_all(&(visited.len() as u64).to_le_bytes())?;
    let mut sorted: Vec<&Vec<u8>> = visited.iter().collect();
    sorted.sort();
    for key in sorted {
        out.write_all(&(key.len() as u32).to_le_bytes())?;
        out.write_all(key)?;
    }
    out.write_all(&(frontier.len() as u64).to_le_bytes())?;
    for key in frontier {
        let bytes = encode_key(key);
        out.write_all(&(bytes.len() as u32).to_le_bytes())?;
        out.write_all(&bytes)?;
    }
    out.write_all(&(violations.len() as u32).to_le_bytes())?;
    for v in violations {
        // violations are stored by their canonical support; reconstruct from
        // the state table is not needed, the support of the canonical table
        // is recovered on load
        let support = support_of_table(cs, &v.state.values);
        let bytes = encode_key(&support);
        out.write_all(&(bytes.len() as u32).to_le_bytes())?;
        out.write_all(&bytes)?;
        out.write_all(&(v.request as u32).to_le_bytes())?;
        out.write_all(&v.nabla.to_le_bytes())?;
        out.write_all(&v.phi_delta.to_le_bytes())?;
        out.write_all(&v.gap.to_le_bytes())?;
    }
    Ok(())
}

fn support_of_table(cs: &ConfigSpace, values: &[Dist]) -> SupportKey {
    let n = values.len();
    let mut out = Vec::new();
    'outer: for i in 0..n {
        for j in 0..n {
            if j != i {
                let d = cs.config_dist(i, j);
                if d > 0 && values[i] == values[j] + d {
                    continue 'outer;
                }
            }
        }
        out.push((i as u32, values[i] as u32));
    }
    out
}

pub fn load_checkpoint(input: &mut impl BufRead, cs: &ConfigSpace) -> Result<Checkpoint> {
    let bad = |msg: &str| Error::Parse {
        line: 0,
        msg: msg.to_string(),
    };
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(bad("not a census checkpoint"));
    }
    let mut u64buf = [0u8; 8];
    input.read_exact(&mut u64buf)?;
    if u64::from_le_bytes(u64buf) != cs.space().fingerprint() {
        return Err(bad("checkpoint was written for a different space"));
    }
    let mut u32buf = [0u8; 4];
    input.read_exact(&mut u32buf)?;
    if u32::from_le_bytes(u32buf) as usize != cs.k() {
        return Err(bad("checkpoint was written for a different k"));
    }
    input.read_exact(&mut u64buf)?;
    let expanded = u64::from_le_bytes(u64buf);
    input.read_exact(&mut u64buf)?;
    let visited_count = u64::from_le_bytes(u64buf);
    let mut visited = HashSet::with_capacity(visited_count as usize);
    for _ in 0..visited_count {
        input.read_exact(&mut u32buf)?;
        let len = u32::from_le_bytes(u32buf) as usize;
        let mut key = vec![0u8; len];
        input.read_exact(&mut key)?;
        visited.insert(key);
    }
    input.read_exact(&mut u64buf)?;
    let frontier_count = u64::from_le_bytes(u64buf);
    let mut frontier = Vec::with_capacity(frontier_count as usize);
    for _ in 0..frontier_count {
        input.read_exact(&mut u32buf)?;
        let len = u32::from_le_bytes(u32buf) as usize;
        let mut key = vec![0u8; len];
        input.read_exact(&mut key)?;
        frontier.push(decode_key(&key));
    }
    input.read_exact(&mut u32buf)?;
    let viol_count = u32::from_le_bytes(u32buf);
    let mut violations = Vec::with_capacity(viol_count as usize);
    for _ in 0..viol_count {
        input.read_exact(&mut u32buf)?;
        let len = u32::from_le_bytes(u32buf) as usize;
        let mut key = vec![0u8; len];
        input.read_exact(&mut key)?;
        input.read_exact(&mut u32buf)?;
        let req = u32::from_le_bytes(u32buf);
        let mut nums = [0i64; 3];
        for slot in &mut nums {
            input.read_exact(&mut u64buf)?;
            *slot = i64::from_le_bytes(u64buf);
        }
        violations.push((decode_key(&key), req, nums[0], nums[1], nums[2]));
    }
    Ok(Checkpoint {
        visited,
        frontier,
        expanded,
        violations,
    })
}
