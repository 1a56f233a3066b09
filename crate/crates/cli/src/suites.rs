//! The property suites behind `wfalab verify`: randomized reachable work
//! functions on the standard space mix, checked against the exact
//! predicates. All randomness is seeded, so runs are reproducible.

use crate::report::VerifyJson;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::sync::Arc;
use wfa_core::metric::{Configuration, MetricSpace};
use wfa_core::potential::{
    check_push3, evader_potential, evader_potential_at, evader_server_shift, mst_evader_potential,
    server_potential_at, server_potential_min, server_potential_min_with_last,
    verify_perm_intuition,
};
use wfa_core::workfn::{check_duality, random_reachable, reachable_closure, ConfigSpace};
use wfa_core::{Error, Result};

pub const SUITES: &[&str] = &[
    "duality",
    "quasiconvex",
    "lipschitz",
    "perm_intuition",
    "push3",
    "equivalence",
    "mst_leaf",
    "theorem_xk_r",
];

pub fn default_cases(suite: &str) -> u64 {
    match suite {
        "duality" | "quasiconvex" | "lipschitz" => 1000,
        "perm_intuition" => 300,
        "push3" => 200,
        "equivalence" => 200,
        "mst_leaf" => 200,
        "theorem_xk_r" => 500,
        _ => 100,
    }
}

pub fn run_suite(name: &str, cases: u64, seed: u64) -> Result<VerifyJson> {
    let outcome = match name {
        "duality" => pair_suite(cases, seed, PairCheck::Duality),
        "quasiconvex" => pair_suite(cases, seed, PairCheck::Quasiconvex),
        "lipschitz" => pair_suite(cases, seed, PairCheck::Lipschitz),
        "perm_intuition" => perm_intuition_suite(cases, seed),
        "push3" => push3_suite(cases, seed),
        "equivalence" => equivalence_suite(cases, seed),
        "mst_leaf" => mst_leaf_suite(cases, seed),
        "theorem_xk_r" => theorem_suite(cases, seed),
        other => {
            return Err(Error::Parse {
                line: 0,
                msg: format!(
                    "unknown suite '{other}' (expected one of {})",
                    SUITES.join(", ")
                ),
            })
        }
    }?;
    Ok(outcome)
}

struct Outcome {
    cases: u64,
    failures: u64,
    witness: Option<String>,
}

impl Outcome {
    fn new() -> Outcome {
        Outcome {
            cases: 0,
            failures: 0,
            witness: None,
        }
    }

    fn record(&mut self, ok: bool, witness: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
            if self.witness.is_none() {
                self.witness = Some(witness());
            }
        }
    }

    fn into_json(self, suite: &str) -> VerifyJson {
        VerifyJson {
            suite: suite.to_string(),
            cases: self.cases,
            failures: self.failures,
            witness: self.witness,
        }
    }
}

fn tree5() -> MetricSpace {
    let e = |u: &str, v: &str, w: i64| (u.to_string(), v.to_string(), w);
    MetricSpace::tree(
        &[
            e("a", "b", 1),
            e("b", "c", 2),
            e("b", "d", 1),
            e("d", "e", 3),
        ],
        1,
    )
    .expect("valid tree")
}

fn tree6() -> MetricSpace {
    let e = |u: &str, v: &str, w: i64| (u.to_string(), v.to_string(), w);
    MetricSpace::tree(
        &[
            e("a", "b", 2),
            e("b", "c", 1),
            e("b", "d", 3),
            e("d", "e", 1),
            e("d", "f", 2),
        ],
        1,
    )
    .expect("valid tree")
}

/// Random n-point metric with distances in [4, 8]; the triangle inequality
/// holds because every distance is at most twice any other.
fn random_metric(n: usize, rng: &mut StdRng) -> MetricSpace {
    let labels = (0..n).map(|i| format!("p{i}")).collect();
    let mut dist = vec![0i64; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = rng.random_range(4..=8);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    MetricSpace::from_table(wfa_core::SpaceKind::General, labels, dist, 1).expect("valid metric")
}

enum PairCheck {
    Duality,
    Quasiconvex,
    Lipschitz,
}

/// 1000 random reachable (w, r) pairs across the circle, a 5-point tree and
/// a 3-ray multiray, with k in {2, 3}.
fn pair_suite(cases: u64, seed: u64, check: PairCheck) -> Result<VerifyJson> {
    let spaces = [
        Arc::new(MetricSpace::circle(8, 8, 1)?),
        Arc::new(tree5()),
        Arc::new(MetricSpace::multiray(&[2, 2, 2], 1, 1)?),
    ];
    let mut contexts = Vec::new();
    for space in &spaces {
        for k in [2usize, 3] {
            contexts.push(ConfigSpace::new(Arc::clone(space), k));
        }
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let mut outcome = Outcome::new();
    for i in 0..cases {
        let cs = &contexts[(i as usize) % contexts.len()];
        let w = random_reachable(cs, &mut rng, 0..8)?;
        let r = rng.random_range(0..cs.space().len());
        let updated = w.update(r)?;
        let space = cs.space();
        let name = match check {
            PairCheck::Duality => {
                let ok = check_duality(&w, r)?;
                outcome.record(ok, || {
                    format!("duality fails for request {} on {:?}", space.label(r), w)
                });
                continue;
            }
            PairCheck::Quasiconvex => updated.quasiconvex_witness()?.map(|(a, b)| {
                format!(
                    "quasiconvexity fails on ({}, {})",
                    a.display(space),
                    b.display(space)
                )
            }),
            PairCheck::Lipschitz => updated.lipschitz_witness().map(|(a, b)| {
                format!(
                    "Lipschitz bound fails on ({}, {})",
                    a.display(space),
                    b.display(space)
                )
            }),
        };
        outcome.record(name.is_none(), || name.unwrap());
    }
    let label = match check {
        PairCheck::Duality => "duality",
        PairCheck::Quasiconvex => "quasiconvex",
        PairCheck::Lipschitz => "lipschitz",
    };
    Ok(outcome.into_json(label))
}

/// The lazy-run identity on random reachable work functions and random
/// distinct tuples, on the 8-point circle with k in {2, 3}.
fn perm_intuition_suite(cases: u64, seed: u64) -> Result<VerifyJson> {
    let space = Arc::new(MetricSpace::circle(8, 8, 1)?);
    let contexts = [
        ConfigSpace::new(Arc::clone(&space), 2),
        ConfigSpace::new(Arc::clone(&space), 3),
    ];
    let mut rng = StdRng::seed_from_u64(seed);
    let mut outcome = Outcome::new();
    for i in 0..cases {
        let cs = &contexts[(i as usize) % 2];
        let w = random_reachable(cs, &mut rng, 0..6)?;
        let mut points: Vec<usize> = (0..8).collect();
        for j in (1..8).rev() {
            let l = rng.random_range(0..=j);
            points.swap(j, l);
        }
        let tuple = &points[..cs.k()];
        let ok = verify_perm_intuition(&w, tuple)?;
        outcome.record(ok, || format!("identity fails for tuple {tuple:?}"));
    }
    Ok(outcome.into_json("perm_intuition"))
}

fn push3_suite(cases: u64, seed: u64) -> Result<VerifyJson> {
    let space = Arc::new(MetricSpace::circle(8, 8, 1)?);
    let cs = ConfigSpace::new(space, 3);
    let mut rng = StdRng::seed_from_u64(seed);
    let mut outcome = Outcome::new();
    for _ in 0..cases {
        let w = random_reachable(&cs, &mut rng, 1..7)?;
        let ok = check_push3(&w)?;
        outcome.record(ok, || "push-to-last fails".to_string());
    }
    Ok(outcome.into_json("push3"))
}

/// Server and evader formulations agree after the constant shift, on
/// pseudo-metric spaces with antipodes and k copies of every point; the
/// per-permutation identity is also sampled.
fn equivalence_suite(cases: u64, seed: u64) -> Result<VerifyJson> {
    let mut contexts = Vec::new();
    for base_n in [4usize, 6] {
        for k in [2usize, 3] {
            let base = MetricSpace::circle(base_n, base_n as i64, 1)?;
            let pseudo = Arc::new(base.with_copies(k)?);
            contexts.push(ConfigSpace::new(pseudo, k));
        }
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let mut outcome = Outcome::new();
    for i in 0..cases {
        let cs = &contexts[(i as usize) % contexts.len()];
        let w = random_reachable(cs, &mut rng, 0..5)?;
        let shift = evader_server_shift(&w);
        let server = server_potential_min(&w)?;
        let evader = evader_potential(&w, None)?.value;
        let mut ok = server == evader + shift;
        // sample the per-permutation identity
        let n = cs.space().len();
        let k = cs.k();
        let mut perm: Vec<usize> = (0..n).collect();
        for j in (1..n).rev() {
            let l = rng.random_range(0..=j);
            perm.swap(j, l);
        }
        let lhs = server_potential_at(&w, &perm[n - k..])?.value;
        let rhs = evader_potential_at(&w, &perm)?.value + shift;
        ok = ok && lhs == rhs;
        outcome.record(ok, || {
            format!("equivalence fails: server {server}, evader {evader}, shift {shift}")
        });
    }
    Ok(outcome.into_json("equivalence"))
}

/// On random 4-point metrics with k = 2: every reachable work function's
/// spanning-tree potential equals the evader potential, and some minimum
/// spanning tree keeps the last request a leaf.
fn mst_leaf_suite(cases: u64, seed: u64) -> Result<VerifyJson> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut outcome = Outcome::new();
    'outer: loop {
        let space = Arc::new(random_metric(4, &mut rng));
        let cs = ConfigSpace::new(space, 2);
        let all = reachable_closure(&cs, 100_000)?;
        for w in &all {
            if outcome.cases >= cases {
                break 'outer;
            }
            let mst = mst_evader_potential(w)?;
            let evader = evader_potential(w, None)?;
            let mut ok = mst.value == evader.value;
            if w.last_request().is_some() {
                ok = ok && mst.mst_r_leaf == Some(true);
            }
            outcome.record(ok, || {
                format!(
                    "spanning-tree potential {} vs evader {} (r leaf: {:?})",
                    mst.value, evader.value, mst.mst_r_leaf
                )
            });
        }
    }
    Ok(outcome.into_json("mst_leaf"))
}

/// The tuple minimum of the potential is attained with the last request in
/// the final position, across the space families where this is a theorem.
fn theorem_suite(cases: u64, seed: u64) -> Result<VerifyJson> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut outcome = Outcome::new();
    let line = Arc::new(MetricSpace::line(9, 1, 1)?.antipodal_extension()?);
    let star = Arc::new(MetricSpace::star(&[1, 2, 3, 4], 1)?.antipodal_extension()?);
    let ray = Arc::new(MetricSpace::multiray(&[3, 3, 3], 1, 1)?.antipodal_extension()?);
    let tree = Arc::new(tree6().antipodal_extension()?);
    let mut contexts = vec![
        ConfigSpace::new(Arc::clone(&line), 2),
        ConfigSpace::new(Arc::clone(&line), 3),
        ConfigSpace::new(Arc::clone(&star), 2),
        ConfigSpace::new(Arc::clone(&star), 3),
        ConfigSpace::new(Arc::clone(&ray), 2),
        ConfigSpace::new(Arc::clone(&ray), 3),
        ConfigSpace::new(tree, 3),
    ];
    // k = n - 1 and k = n - 2 on 5-point general metrics
    for k in [4usize, 3] {
        let space = Arc::new(random_metric(5, &mut rng).antipodal_extension()?);
        contexts.push(ConfigSpace::new(space, k));
    }
    for i in 0..cases {
        let cs = &contexts[(i as usize) % contexts.len()];
        let w = random_reachable(cs, &mut rng, 1..7)?;
        let r = w.last_request().expect("at least one request");
        let full = server_potential_min(&w)?;
        let pinned = server_potential_min_with_last(&w, r)?;
        let ok = full == pinned;
        outcome.record(ok, || {
            format!(
                "tuple minimum {} not attained ending at the last request (pinned {})",
                full, pinned
            )
        });
    }
    Ok(outcome.into_json("theorem_xk_r"))
}

/// Builds a start configuration from comma-separated point names.
pub fn parse_config(text: &str, space: &MetricSpace) -> Result<Configuration> {
    let members = text
        .split(',')
        .map(|name| space.point_by_name(name.trim()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Configuration::new(members))
}
