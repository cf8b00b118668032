use std::collections::{BTreeMap, BTreeSet};

use marvelo::emitter::{emit_model, repeated_edges, simple_path_count, substitute_and_check, track_flow, EdgeExpr, EmitConfig};
use marvelo::exact::{solve_exact, ExactConfig};
use marvelo::harness::{summarize, ExperimentRecord, RecordStatus};
use marvelo::heuristic::{solve_heuristic, HeuristicParams, NeighborLimit};
use marvelo::scenario::{generate_instance, ScenarioConfig};
use marvelo::validator::validate;
use marvelo::{objective, FlowMode, Instance, Solution};
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;

fn instance(n: usize, seed: u64) -> Instance {
    generate_instance(&ScenarioConfig::new(n, seed)).unwrap()
}

fn exact(inst: &Instance, mode: FlowMode) -> Option<Solution> {
    solve_exact(&inst.net, &inst.app, &ExactConfig { mode, ..Default::default() }).into_solution()
}

fn k_strategy() -> impl Strategy<Value = NeighborLimit> {
    prop_oneof![(1usize..4).prop_map(NeighborLimit::Best), Just(NeighborLimit::All)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solvers_emit_valid_solutions_and_gap_is_nonnegative(
        seed in 0u64..10_000, level in 1usize..4, k in k_strategy(), hseed in any::<u64>()
    ) {
        let inst = instance(3, seed);
        let opt = exact(&inst, FlowMode::Relaxed);
        if let Some(s) = &opt {
            prop_assert!(validate(s, &inst.net, &inst.app, FlowMode::Relaxed).ok);
        }
        let p = HeuristicParams { level, k, seed: hseed, ..Default::default() };
        if let Some(h) = solve_heuristic(&inst.net, &inst.app, &p).solution() {
            prop_assert!(validate(h, &inst.net, &inst.app, FlowMode::Relaxed).ok);
            prop_assert!(h.frame_length() <= inst.net.max_slots);
            let o = opt.as_ref().map(objective);
            prop_assert!(o.is_some(), "heuristic solved an instance the exact search calls infeasible");
            prop_assert!(objective(h) >= o.unwrap());
        }
    }

    #[test]
    fn heuristic_is_deterministic(seed in 0u64..10_000, level in 1usize..3, k in k_strategy(), hseed in any::<u64>()) {
        let inst = instance(5, seed);
        let p = HeuristicParams { level, k, seed: hseed, ..Default::default() };
        prop_assert_eq!(solve_heuristic(&inst.net, &inst.app, &p), solve_heuristic(&inst.net, &inst.app, &p));
    }

    #[test]
    fn strict_acceptance_implies_relaxed_and_survives_slot_permutation(seed in 0u64..10_000, shift in 0usize..8) {
        let mut cfg = ScenarioConfig::new(3, seed);
        cfg.max_slots = Some(16);
        let inst = generate_instance(&cfg).unwrap();
        if let Some(s) = exact(&inst, FlowMode::Strict) {
            prop_assert!(validate(&s, &inst.net, &inst.app, FlowMode::Strict).ok);
            prop_assert!(validate(&s, &inst.net, &inst.app, FlowMode::Relaxed).ok);
            let frame = s.frame_length();
            let rotated = s.permute_slots(|t| (t + shift) % frame + 8);
            prop_assert!(validate(&rotated, &inst.net, &inst.app, FlowMode::Strict).ok);
            prop_assert_eq!(objective(&rotated), objective(&s));
        }
    }

    #[test]
    fn more_capacity_never_worsens_the_optimum(seed in 0u64..10_000, extra in 1.0f64..5.0) {
        let inst = instance(3, seed);
        let mut roomy = inst.clone();
        roomy.net.capacities.iter_mut().for_each(|c| *c += extra);
        let base = exact(&inst, FlowMode::Relaxed).map(|s| objective(&s));
        let loose = exact(&roomy, FlowMode::Relaxed).map(|s| objective(&s));
        if let Some(b) = base {
            prop_assert!(loose.is_some_and(|l| l <= b));
        }
    }

    #[test]
    fn model_substitution_matches_strict_validation(seed in 0u64..10_000, drop in 0usize..12, reslot in 0usize..6) {
        let mut cfg = ScenarioConfig::new(3, seed);
        cfg.max_slots = Some(8);
        let inst = generate_instance(&cfg).unwrap();
        let model = emit_model(&inst, &EmitConfig { mode: FlowMode::Strict, ..Default::default() }).unwrap();
        let Some(s) = exact(&inst, FlowMode::Strict) else { return Ok(()) };
        let mut variants = vec![s.clone()];
        let txs: Vec<_> = s.transmissions.iter().copied().collect();
        if !txs.is_empty() {
            let mut dropped = s.clone();
            dropped.transmissions.remove(&txs[drop % txs.len()]);
            variants.push(dropped);
            let mut moved = s.clone();
            let t = txs[drop % txs.len()];
            moved.transmissions.remove(&t);
            moved.transmissions.insert(marvelo::Transmission { slot: reslot, ..t });
            variants.push(moved);
        }
        for v in variants {
            if !repeated_edges(&v).is_empty() {
                continue;
            }
            let ok = validate(&v, &inst.net, &inst.app, FlowMode::Strict).ok;
            prop_assert_eq!(ok, substitute_and_check(&model, &v).is_empty());
        }
    }

    #[test]
    fn path_terms_are_exact_conjunctions(n in 2usize..6, origin in 0usize..6, start in 0usize..6, mask in any::<u64>()) {
        let (origin, start) = (origin % n, start % n);
        prop_assume!(origin != start);
        let terms = track_flow(n, start, start, 0, origin, &BTreeSet::new(), EdgeExpr::constant(BigRational::one()));
        prop_assert_eq!(terms.len() as u128, simple_path_count(n));
        let active = |u: usize, w: usize| mask >> (u * n + w) & 1 == 1;
        for t in &terms {
            let value = t.expr.eval(|u, w| if active(u, w) { BigRational::one() } else { BigRational::zero() });
            let all = t.path.windows(2).all(|e| active(e[0], e[1]));
            prop_assert_eq!(value == BigRational::one(), all);
            prop_assert!(value <= BigRational::one());
        }
    }

    #[test]
    fn summary_is_independent_of_record_order(gaps in proptest::collection::vec(0u32..40, 1..30), rot in 0usize..30) {
        let records: Vec<ExperimentRecord> = gaps
            .iter()
            .enumerate()
            .map(|(i, &g)| ExperimentRecord {
                node_count: 3 + i % 2,
                level: 1,
                k: NeighborLimit::All,
                seed: i as u64,
                heuristic_slots: Some(4 + g as usize),
                exact_slots: Some(4),
                gap: Some(g as f64 / 4.0),
                heuristic_runtime_ms: Some(g as f64 * 0.37),
                exact_runtime_ms: Some(1.0 + i as f64),
                status: RecordStatus::Ok,
                mean_candidates: g as f64 / 3.0,
                detail: None,
            })
            .collect();
        let mut shuffled = records.clone();
        let r = rot % shuffled.len();
        shuffled.rotate_left(r);
        shuffled.reverse();
        prop_assert_eq!(summarize(&records), summarize(&shuffled));
    }
}

#[test]
fn candidate_counts_grow_with_the_degree_limit() {
    let mut means: BTreeMap<NeighborLimit, Vec<f64>> = BTreeMap::new();
    for seed in 0..10 {
        let inst = instance(9, seed);
        for k in [NeighborLimit::Best(3), NeighborLimit::Best(6), NeighborLimit::All] {
            let p = HeuristicParams { k, seed, ..Default::default() };
            let (_, stats) = marvelo::heuristic::solve_heuristic_with_stats(&inst.net, &inst.app, &p);
            means.entry(k).or_default().push(stats.mean_candidates());
        }
    }
    let avg = |k| means[&k].iter().sum::<f64>() / means[&k].len() as f64;
    assert!(avg(NeighborLimit::Best(3)) <= avg(NeighborLimit::Best(6)));
    assert!(avg(NeighborLimit::Best(6)) <= avg(NeighborLimit::All));
}
