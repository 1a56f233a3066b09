//! Acceptance suite: one test per criterion, exact checks throughout.
//! Criterion 11's full census is `#[ignore]`d (it expands ~280k states);
//! run it explicitly with `cargo test -p wfa-cli --release --test acceptance
//! -- --ignored`. The non-ignored smoke variant seeds the frontier with the
//! replay trajectory and asserts the violation is caught.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;
use wfa_cli::suites::run_suite;
use wfa_core::metric::{is_quasiconcave, tree_from_quasiconcave, Configuration, MetricSpace};
use wfa_core::potential::{lazy_potential_k3, server_potential};
use wfa_core::taxi::{
    canonical_state_request, enumerate_reachable, replay_counterexample, replay_record,
    taxi_update_closed, taxi_update_simulated, EnumerationOptions, SparseCircleWf, TaxiRequest,
};
use wfa_core::wfa::{ratio_report, SequenceGen, TieBreak};
use wfa_core::workfn::{random_reachable, reachable_closure, ConfigSpace};
use wfa_core::{Dist, SpaceKind};

fn circle16_cs() -> Arc<ConfigSpace> {
    ConfigSpace::new(Arc::new(MetricSpace::circle(16, 8, 2).unwrap()), 3)
}

#[test]
fn acceptance_01_counterexample_replay() {
    let started = Instant::now();
    let report = replay_counterexample().expect("replay must succeed");
    let space = report.trajectory.wfs[0].space();
    let p = |name: &str| space.point_by_name(name).unwrap();
    // all values are scaled by 2 on this space
    assert_eq!(
        report.wfa_config,
        Configuration::new(vec![p("1"), p("5"), p("7")])
    );
    assert_eq!(report.w_t_at_config, 9 * 2);
    assert_eq!(report.w_t1_at_config, 11 * 2);
    assert_eq!(report.w_t1_at_config - report.w_t_at_config, 2 * 2);
    assert_eq!(report.phi_w_t.value, 44 * 2);
    assert!(report
        .phi_w_t
        .all_achievers
        .iter()
        .any(|t| t == &vec![p("4"), p("5"), p("6")]));
    assert_eq!(report.phi_572_upper_bound, 45 * 2);
    assert!(report.phi_w_t1.value <= 45 * 2);
    assert!(report.laziness_gap <= -2);
    // the binary reproduces the same numbers and exits cleanly
    let out = Command::new(env!("CARGO_BIN_EXE_wfalab"))
        .arg("counterexample")
        .output()
        .expect("binary runs");
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("w_t(C_t) = 9, w_t+1(C_t) = 11 (difference 2)"));
    assert!(text.contains("Phi(w_t) = 44"));
    assert!(text.contains("laziness gap = -1"));
    println!(
        "ACCEPTANCE 1 PASS: counterexample replay reproduces 9/11/2, 44, 45, gap -1 \
         (elapsed {:?})",
        started.elapsed()
    );
}

#[test]
fn acceptance_02_replay_stage_fidelity() {
    let report = replay_counterexample().expect("replay must succeed");
    let space = report.trajectory.wfs[0].space();
    let p = |name: &str| space.point_by_name(name).unwrap();
    assert_eq!(report.stages.len(), 8);
    // supports match the transcribed record stage by stage
    for ((label, computed), (want_label, want)) in report.stages.iter().zip(replay_record::STAGES) {
        assert_eq!(label, want_label);
        let mut expected: Vec<(Configuration, Dist)> = want
            .iter()
            .map(|(cfg, v)| {
                (
                    Configuration::new(cfg.split(',').map(|s| p(s)).collect()),
                    *v,
                )
            })
            .collect();
        expected.sort_by(|a, b| a.0.cmp(&b.0));
        assert_eq!(computed, &expected, "stage '{label}'");
    }
    // cross-check all eight stages with the independent support engine, and
    // certify 1-Lipschitzness and quasiconvexity exhaustively per stage
    let geom = space.circle_geometry().unwrap();
    let c0: Vec<Dist> = [p("1"), p("6"), p("7")]
        .iter()
        .map(|&q| geom.positions[q])
        .collect();
    let mut sparse = SparseCircleWf::cone(geom.circumference, c0);
    let cs = report.trajectory.wfs[0].config_space();
    for (idx, w) in report.trajectory.wfs.iter().enumerate() {
        if idx > 0 {
            sparse = match &report.trajectory.events[idx - 1] {
                wfa_core::wfa::Event::Server(r) => sparse.update(geom.positions[*r]),
                wfa_core::wfa::Event::Taxi(t) => {
                    sparse.taxi_update(geom.positions[t.start], geom.positions[t.dest])
                }
            };
        }
        let dense = sparse.to_dense_values(cs, 1).unwrap();
        assert_eq!(
            dense,
            w.values().to_vec(),
            "engines disagree at stage {idx}"
        );
        assert!(w.is_lipschitz(), "stage {idx} breaks the Lipschitz bound");
        assert!(
            w.is_quasiconvex().unwrap(),
            "stage {idx} breaks quasiconvexity"
        );
    }
    println!(
        "ACCEPTANCE 2 PASS: all 8 stage supports match the record, engines agree, \
         stages certified Lipschitz and quasiconvex"
    );
}

#[test]
fn acceptance_03_taxi_closed_form() {
    let cs = circle16_cs();
    let mut rng = StdRng::seed_from_u64(0xACCE55_03);
    let circ = cs.space().circle_geometry().unwrap().circumference;
    let positions = cs.space().circle_geometry().unwrap().positions.clone();
    for case in 0..200 {
        let w = random_reachable(&cs, &mut rng, 0..3).unwrap();
        let s = rng.random_range(0..16);
        let t = 2 * rng.random_range(0..8);
        let req = TaxiRequest {
            start: s,
            dest: t,
            clockwise: true,
        };
        let closed = taxi_update_closed(&w, &req).unwrap();
        // support of the closed form equals the transformed support
        let after_start = w.update(s).unwrap();
        let arc = {
            let d = (positions[s] - positions[t]).abs();
            d.min(circ - d)
        };
        let mut expected: Vec<(usize, Dist)> = after_start
            .support_indices()
            .iter()
            .map(|&i| {
                let cfg = cs.config(i as usize).replaced(s, t);
                (cs.rank(&cfg), after_start.value(i as usize) + arc)
            })
            .collect();
        expected.sort_unstable();
        expected.dedup();
        let mut got: Vec<(usize, Dist)> = closed
            .support_indices()
            .iter()
            .map(|&i| (i as usize, closed.value(i as usize)))
            .collect();
        got.sort_unstable();
        assert_eq!(got, expected, "support transform mismatch in case {case}");
        // simulation sandwich: 0 <= closed - simulated <= 2 k d(s,t)/(m-1)
        for m in [4u32, 16, 64] {
            let sim = taxi_update_simulated(&w, &req, m).unwrap();
            let (lo, hi) = sim.deviation_range(&closed).unwrap();
            // in refined units the bound is 2 k d(s,t) (scaled)
            assert!(
                lo >= 0,
                "case {case} m={m}: simulation exceeded the closed form"
            );
            assert!(
                hi <= 2 * 3 * arc,
                "case {case} m={m}: deviation above 2k d/(m-1)"
            );
        }
    }
    println!(
        "ACCEPTANCE 3 PASS: 200 triples, support transform exact, deviations within 2kd/(m-1)"
    );
}

#[test]
fn acceptance_04_duality_quasiconvexity_lipschitz() {
    for suite in ["duality", "quasiconvex", "lipschitz"] {
        let outcome = run_suite(suite, 1000, 0xACCE55_04).unwrap();
        assert_eq!(outcome.cases, 1000);
        assert_eq!(outcome.failures, 0, "{suite}: {:?}", outcome.witness);
    }
    println!("ACCEPTANCE 4 PASS: duality/quasiconvex/lipschitz, 1000 pairs each, zero failures");
}

#[test]
fn acceptance_05_potential_equivalence() {
    let outcome = run_suite("equivalence", 200, 0xACCE55_05).unwrap();
    assert_eq!(outcome.cases, 200);
    assert_eq!(outcome.failures, 0, "{:?}", outcome.witness);
    println!("ACCEPTANCE 5 PASS: server and evader potentials agree after the shift, 200 cases");
}

#[test]
fn acceptance_06_theorem_predicates() {
    let outcome = run_suite("theorem_xk_r", 500, 0xACCE55_06).unwrap();
    assert_eq!(outcome.cases, 500);
    assert_eq!(outcome.failures, 0, "{:?}", outcome.witness);
    println!(
        "ACCEPTANCE 6 PASS: the tuple minimum ends at the last request on every theorem family"
    );
}

#[test]
fn acceptance_07_competitive_ratio() {
    // 3-ray multiray, k = 2, all sequences of length <= 6
    let ray = ConfigSpace::new(
        Arc::new(MetricSpace::multiray(&[2, 2, 2], 1, 1).unwrap()),
        2,
    );
    let start = Configuration::new(vec![0, 1]);
    let report = ratio_report(
        &ray,
        &start,
        &SequenceGen::Exhaustive { len: 6 },
        TieBreak::Lexicographic,
        0,
    )
    .unwrap();
    assert!(report.complete);
    assert!(
        report.violations.is_empty(),
        "multiray violation: {:?}",
        report.violations.first()
    );
    let ray_sequences = report.sequences_run;

    // 5-node tree, k = 3, all sequences of length <= 6
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
    let start = Configuration::new(vec![0, 1, 2]);
    let report = ratio_report(
        &cs,
        &start,
        &SequenceGen::Exhaustive { len: 6 },
        TieBreak::Lexicographic,
        0,
    )
    .unwrap();
    assert!(report.complete);
    assert!(
        report.violations.is_empty(),
        "tree violation: {:?}",
        report.violations.first()
    );
    println!(
        "ACCEPTANCE 7 PASS: no sequence exceeds k*opt + k^2*diameter \
         ({} + {} sequences)",
        ray_sequences, report.sequences_run
    );
}

#[test]
fn acceptance_08_lazy_adversary_identity() {
    let outcome = run_suite("perm_intuition", 300, 0xACCE55_08).unwrap();
    assert_eq!(outcome.cases, 300);
    assert_eq!(outcome.failures, 0, "{:?}", outcome.witness);
    // the k = 3 lazy potential equals the tuple potential exactly
    let cs = ConfigSpace::new(Arc::new(MetricSpace::circle(8, 8, 1).unwrap()), 3);
    let mut rng = StdRng::seed_from_u64(0xACCE55_09);
    for _ in 0..100 {
        let w = random_reachable(&cs, &mut rng, 0..6).unwrap();
        let lazy = lazy_potential_k3(&w).unwrap().value;
        let server = server_potential(&w).unwrap().value;
        assert_eq!(lazy, server);
    }
    println!(
        "ACCEPTANCE 8 PASS: lazy identity on 300 tuples; lazy k=3 potential equals the \
         tuple potential on 100 reachable work functions"
    );
}

#[test]
fn acceptance_09_mst_potential() {
    // one seeded random 4-point metric, all reachable work functions
    let mut rng = StdRng::seed_from_u64(0xACCE55_10);
    let n = 4;
    let labels = (0..n).map(|i| format!("p{i}")).collect();
    let mut dist = vec![0i64; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = rng.random_range(4..=8);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let space = Arc::new(MetricSpace::from_table(SpaceKind::General, labels, dist, 1).unwrap());
    let cs = ConfigSpace::new(space, 2);
    let all = reachable_closure(&cs, 1_000_000).unwrap();
    assert!(!all.is_empty());
    let mut leaf_checked = 0u64;
    for w in &all {
        let mst = wfa_core::potential::mst_evader_potential(w).unwrap();
        let evader = wfa_core::potential::evader_potential(w, None).unwrap();
        assert_eq!(mst.value, evader.value);
        if w.last_request().is_some() {
            assert_eq!(mst.mst_r_leaf, Some(true));
            leaf_checked += 1;
        }
    }
    println!(
        "ACCEPTANCE 9 PASS: spanning-tree potential matches the evader potential on all {} \
         reachable work functions ({} leaf checks)",
        all.len(),
        leaf_checked
    );
}

#[test]
fn acceptance_10_tree_reconstruction() {
    let mut rng = StdRng::seed_from_u64(0xACCE55_11);
    for case in 0..100 {
        // random tree with up to 10 leaves; the metric is the leaf distance
        let nodes = rng.random_range(4..=12);
        let mut edges = Vec::new();
        for i in 1..nodes {
            let parent = rng.random_range(0..i);
            edges.push((
                format!("n{parent}"),
                format!("n{i}"),
                rng.random_range(1..=6),
            ));
        }
        let full = MetricSpace::tree(&edges, 1).unwrap();
        // restrict to the leaves
        let mut degree = vec![0usize; nodes];
        for (u, v, _) in &edges {
            degree[full.point_by_name(u).unwrap()] += 1;
            degree[full.point_by_name(v).unwrap()] += 1;
        }
        let leaves: Vec<usize> = (0..nodes).filter(|&i| degree[i] == 1).collect();
        assert!(leaves.len() <= 10);
        let m = leaves.len();
        let mut dist = vec![0i64; m * m];
        for a in 0..m {
            for b in 0..m {
                dist[a * m + b] = full.d(leaves[a], leaves[b]);
            }
        }
        let labels = (0..m).map(|i| format!("l{i}")).collect();
        let leaf_metric = MetricSpace::from_table(SpaceKind::General, labels, dist, 1).unwrap();
        let (ok, _) = is_quasiconcave(&leaf_metric);
        assert!(
            ok,
            "leaf metric of a tree must be quasiconcave (case {case})"
        );
        let tree = tree_from_quasiconcave(&leaf_metric).unwrap();
        let back = tree.leaf_metric(1).unwrap();
        for a in 0..m {
            for b in 0..m {
                assert_eq!(back.d(a, b), leaf_metric.d(a, b), "case {case}");
            }
        }
    }
    // the even-spaced circle quadruple is rejected with that witness
    let circle = MetricSpace::circle(8, 8, 1).unwrap();
    let quad = [0usize, 2, 4, 6];
    let mut dist = vec![0i64; 16];
    for a in 0..4 {
        for b in 0..4 {
            dist[a * 4 + b] = circle.d(quad[a], quad[b]);
        }
    }
    let labels = quad.iter().map(|q| q.to_string()).collect();
    let sub = MetricSpace::from_table(SpaceKind::General, labels, dist, 1).unwrap();
    let (ok, witness) = is_quasiconcave(&sub);
    assert!(!ok);
    assert_eq!(witness, Some([0, 1, 2, 3]));
    assert!(tree_from_quasiconcave(&sub).is_err());
    println!("ACCEPTANCE 10 PASS: 100 tree round-trips exact; circle quadruple rejected");
}

/// Truncated-budget smoke variant of the census: the replay trajectory is
/// seeded into the frontier, so the known violating state is expanded within
/// the budget and the violation must be reported as the replay pair.
#[test]
fn acceptance_11_census_smoke() {
    let replay = replay_counterexample().unwrap();
    let cs = Arc::clone(replay.trajectory.wfs[0].config_space());
    let opts = EnumerationOptions {
        lattice_step: 2,
        midpoint_starts: true,
        max_states: 150,
        extra_seeds: replay.trajectory.wfs.clone(),
        ..Default::default()
    };
    let census = enumerate_reachable(&cs, &opts).unwrap();
    assert!(!census.complete);
    let classes = census.violation_classes();
    assert_eq!(classes.len(), 1, "expected exactly the replay violation");
    let w_t = &replay.trajectory.wfs[6];
    let request_4 = cs.space().point_by_name("4").unwrap();
    let (state, request) = canonical_state_request(w_t, request_4, 2).unwrap();
    assert_eq!(classes[0].state.values, state.values);
    assert_eq!(classes[0].request, request);
    assert_eq!(classes[0].gap, -2);
    // the full server-request-only closure (no taxi transports) has no
    // violations at all
    let pure = EnumerationOptions {
        lattice_step: 2,
        midpoint_starts: false,
        server_requests_only: true,
        ..Default::default()
    };
    let none = enumerate_reachable(&cs, &pure).unwrap();
    assert!(none.complete);
    assert!(none.violations.is_empty());
    println!(
        "ACCEPTANCE 11 (smoke) PASS: replay violation found once seeded; the complete \
         server-request-only closure ({} states) has none",
        none.discovered
    );
}

/// Full census: strictly more than 280,000 canonical states and exactly one
/// laziness-violation class, which is the replay pair. Expanding the whole
/// closure takes a few minutes in release mode (hours in debug), so the test
/// is opt-in.
#[test]
#[ignore]
fn acceptance_11_census_full() {
    let started = Instant::now();
    let cs = circle16_cs();
    let opts = EnumerationOptions {
        lattice_step: 2,
        midpoint_starts: true,
        max_states: 0,
        progress: true,
        ..Default::default()
    };
    let census = enumerate_reachable(&cs, &opts).unwrap();
    assert!(census.complete);
    assert!(
        census.discovered > 280_000,
        "census found only {} canonical states",
        census.discovered
    );
    let classes = census.violation_classes();
    assert_eq!(classes.len(), 1, "expected exactly one violation class");
    let replay = replay_counterexample().unwrap();
    let request_4 = cs.space().point_by_name("4").unwrap();
    let (state, request) =
        canonical_state_request(&replay.trajectory.wfs[6], request_4, 2).unwrap();
    assert_eq!(classes[0].state.values, state.values);
    assert_eq!(classes[0].request, request);
    println!(
        "ACCEPTANCE 11 (full) PASS: {} canonical states (> 280000), one violation class \
         = the replay pair (elapsed {:?})",
        census.discovered,
        started.elapsed()
    );
}
