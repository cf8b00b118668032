//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use marvelo::emitter::{conjunction_expr, disjunction_expr, emit_model, repeated_edges, substitute_and_check, EmitConfig, Family};
use marvelo::exact::{brute_force, brute_force_with, solve_exact, BruteForceConfig, ExactConfig};
use marvelo::harness::{records_csv, run_experiment, summarize, ExperimentPlan, RecordStatus, SeedSpec};
use marvelo::heuristic::{solve_heuristic, solve_heuristic_with_stats, HeuristicParams, NeighborLimit};
use marvelo::io::solution_to_json;
use marvelo::scenario::{generate_instance, ScenarioConfig};
use marvelo::validator::{check_no_phantom_loops, validate, ConstraintTag};
use marvelo::{
    objective, FlowMode, Instance, InfrastructureNetwork, OverlayApp, Outcome, SignalModel, Solution, Transmission,
};
use rayon::prelude::*;

const CORPUS_SEEDS: u64 = 50;

struct Tally {
    failed: Vec<&'static str>,
}

impl Tally {
    fn report(&mut self, name: &'static str, pass: bool, detail: String, started: Instant) {
        let secs = started.elapsed().as_secs_f64();
        println!("{} {name}: {detail} [{secs:.1}s]", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed.push(name);
        }
    }
}

fn corpus(n: usize, seeds: u64) -> Vec<(u64, Instance)> {
    (0..seeds).map(|s| (s, generate_instance(&ScenarioConfig::new(n, s)).unwrap())).collect()
}

fn relaxed_exact(inst: &Instance) -> Outcome {
    solve_exact(&inst.net, &inst.app, &ExactConfig::default())
}

fn truth_tables() -> (bool, String) {
    let mut failures = 0;
    for n in 1..=6usize {
        let conj = conjunction_expr(&(0..n).collect::<Vec<_>>()).unwrap();
        for bits in 0u32..(1 << n) {
            if conj.satisfied(|&i| bits >> i & 1 == 1) != (bits == (1 << n) - 1) {
                failures += 1;
            }
        }
    }
    let disj = disjunction_expr(&[0usize, 1]).unwrap();
    let counter_case = !disj.satisfied(|&i| i == 1);
    let first_alone = disj.satisfied(|&i| i == 0);
    let pass = failures == 0 && counter_case && first_alone;
    (
        pass,
        format!(
            "conjunction 0 failures expected, got {failures} over n<=6; disjunction x=(0,1) unsatisfied: {counter_case}, x=(1,0) satisfied: {first_alone}"
        ),
    )
}

fn exact_vs_brute_force() -> (bool, String) {
    let mut cases = Vec::new();
    for n in [3usize, 4] {
        for s in 0..12u64 {
            cases.push((n, s));
        }
    }
    let results: Vec<(usize, u64, Option<usize>, Option<usize>)> = cases
        .par_iter()
        .map(|&(n, s)| {
            let inst = generate_instance(&ScenarioConfig::new(n, s)).unwrap();
            let ex = relaxed_exact(&inst).solution().map(objective);
            let bf = brute_force(&inst.net, &inst.app, inst.net.max_slots).solution().map(objective);
            (n, s, ex, bf)
        })
        .collect();
    let solved = results.iter().filter(|r| r.2.is_some()).count();
    let mismatched: Vec<String> =
        results.iter().filter(|r| r.2 != r.3).map(|r| format!("n={} seed={} exact={:?} brute={:?}", r.0, r.1, r.2, r.3)).collect();
    (
        mismatched.is_empty() && results.len() >= 20,
        format!("{} instances ({} feasible), mismatches: {:?}", results.len(), solved, mismatched),
    )
}

/// Single-step corruptions with the tag each must raise.
fn mutations(sol: &Solution, inst: &Instance) -> Vec<(&'static str, Solution, ConstraintTag)> {
    let (net, app) = (&inst.net, &inst.app);
    let mut out = Vec::new();
    let txs: Vec<Transmission> = sol.transmissions.iter().copied().collect();

    // delete a transmission whose receiver depends on it
    for t in &txs {
        let others = txs.iter().filter(|u| u != &t && u.receiver == t.receiver && u.block == t.block).count();
        if others > 0 {
            continue;
        }
        let mut m = sol.clone();
        m.transmissions.remove(t);
        let forwards = txs.iter().any(|u| u.sender == t.receiver && u.block == t.block && u.origin == t.origin);
        let hosts_succ = app.successors(t.block).any(|q| sol.is_hosted_on(q, t.receiver));
        if forwards && !sol.is_hosted_on(t.block, t.receiver) {
            out.push(("delete", m, ConstraintTag::SendLegitimacy));
        } else if hosts_succ && !sol.is_hosted_on(t.block, t.receiver) {
            out.push(("delete", m, ConstraintTag::DepDelivery));
        }
    }

    // move a processing block to another node
    for p in app.blocks().filter(|&p| p != app.source_block && p != app.sink_block) {
        let Some(h) = sol.hosts(p).next() else { continue };
        for v in net.nodes().filter(|&v| v != h) {
            let mut m = sol.clone();
            m.placement.insert(p, BTreeSet::from([v]));
            let load: f64 = app.blocks().filter(|&q| m.is_hosted_on(q, v)).map(|q| app.weights[q]).sum();
            let tag = if load > net.capacities[v] {
                ConstraintTag::Capacity
            } else if txs.iter().any(|t| t.block == p && t.origin == h) {
                ConstraintTag::SendLegitimacy
            } else {
                ConstraintTag::DepDelivery
            };
            out.push(("move", m, tag));
        }
    }

    // retime a transmission into a slot where its receiver is already busy
    for t in &txs {
        for u in txs.iter().filter(|u| u.slot != t.slot && (u.receiver == t.receiver || u.sender == t.receiver)) {
            let moved = Transmission { slot: u.slot, ..*t };
            if sol.transmissions.contains(&moved) {
                continue;
            }
            let mut m = sol.clone();
            m.transmissions.remove(t);
            m.transmissions.insert(moved);
            out.push(("retime", m, ConstraintTag::SlotExclusive));
            break;
        }
    }

    // a two-node loop of traffic that no node on it ever legitimately received
    let flows: BTreeSet<(usize, usize)> = txs.iter().map(|t| (t.block, t.origin)).collect();
    let frame = sol.frame_length();
    for &(p, o) in &flows {
        let fed: BTreeSet<usize> = txs.iter().filter(|t| t.block == p && t.origin == o).map(|t| t.receiver).collect();
        let free: Vec<usize> = net.nodes().filter(|&v| v != o && !fed.contains(&v)).collect();
        if free.len() >= 2 && frame + 2 <= net.max_slots {
            let mut m = sol.clone();
            m.transmissions.insert(Transmission::new(free[0], free[1], p, o, frame));
            m.transmissions.insert(Transmission::new(free[1], free[0], p, o, frame + 1));
            out.push(("loop", m, ConstraintTag::PhantomLoop));
        }
    }
    out
}

fn validator_soundness() -> (bool, String) {
    let mut instances = corpus(3, 15);
    instances.extend(corpus(4, 15));
    let mut solutions = Vec::new();
    for (seed, inst) in &instances {
        if let Some(s) = relaxed_exact(inst).into_solution() {
            solutions.push((inst, s));
        }
        for (level, k) in [(1, NeighborLimit::All), (2, NeighborLimit::Best(2))] {
            let p = HeuristicParams { level, k, seed: *seed, ..Default::default() };
            if let Some(s) = solve_heuristic(&inst.net, &inst.app, &p).into_solution() {
                solutions.push((inst, s));
            }
        }
    }
    let rejected_valid = solutions.iter().filter(|(i, s)| !validate(s, &i.net, &i.app, FlowMode::Relaxed).ok).count();
    let mut per_kind: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    let mut misses = Vec::new();
    for (inst, s) in &solutions {
        for (kind, m, tag) in mutations(s, inst) {
            let rep = validate(&m, &inst.net, &inst.app, FlowMode::Relaxed);
            let e = per_kind.entry(kind).or_default();
            e.0 += 1;
            if !rep.ok && rep.has(tag) {
                e.1 += 1;
            } else if misses.len() < 5 {
                misses.push(format!("{kind}: expected {tag}, got {:?}", rep.tags()));
            }
        }
    }
    let total: usize = per_kind.values().map(|v| v.0).sum();
    let caught: usize = per_kind.values().map(|v| v.1).sum();
    (
        rejected_valid == 0 && total >= 200 && caught == total,
        format!(
            "{} solutions accepted ({} wrongly rejected); {caught}/{total} mutations rejected with the expected tag {:?} {:?}",
            solutions.len() - rejected_valid,
            rejected_valid,
            per_kind,
            misses
        ),
    )
}

fn uniform_net(ids: &[&str], gamma: f64, max_slots: usize, source: usize, sink: usize, caps: Vec<f64>) -> InfrastructureNetwork {
    let n = ids.len();
    InfrastructureNetwork {
        node_ids: ids.iter().map(|s| s.to_string()).collect(),
        capacities: caps,
        gamma: (0..n).map(|i| (0..n).map(|j| if i == j { 0.0 } else { gamma }).collect()).collect(),
        positions: None,
        noise_floor: 1e-4,
        sinr_threshold: 10.0,
        max_slots,
        sources: vec![source],
        sink,
        signal_model: SignalModel::Gamma,
        rate: None,
    }
}

/// Six nodes A..F; block 1 on A feeds block 2 on B and block 3 on D, but D's
/// copy only circulates D -> F -> E -> D and never leaves A.
fn fig2b() -> (Instance, Solution) {
    let net = uniform_net(&["A", "B", "C", "D", "E", "F"], 0.01, 4, 0, 3, vec![2.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
    let app = OverlayApp {
        block_ids: vec!["src".into(), "1".into(), "2".into(), "3".into()],
        weights: vec![0.0, 1.0, 1.0, 0.0],
        links: vec![(0, 1), (1, 2), (1, 3)],
        source_block: 0,
        sink_block: 3,
    };
    let inst = Instance::new(net, app).unwrap();
    let (a, b, d, e, f) = (0, 1, 3, 4, 5);
    let mut sol = Solution::new();
    sol.place(0, a);
    sol.place(1, a);
    sol.place(2, b);
    sol.place(3, d);
    for (i, (s, r)) in [(a, b), (d, f), (f, e), (e, d)].into_iter().enumerate() {
        sol.transmissions.insert(Transmission::new(s, r, 1, a, i));
    }
    (inst, sol)
}

fn phantom_loop() -> (bool, String) {
    let (inst, sol) = fig2b();
    let loops = check_no_phantom_loops(&sol, &inst.net, &inst.app);
    let rep = validate(&sol, &inst.net, &inst.app, FlowMode::Relaxed);
    let model = emit_model(&inst, &EmitConfig { mode: FlowMode::Relaxed, ..Default::default() }).unwrap();
    let violated = substitute_and_check(&model, &sol);
    let loop_label = Family::LoopExclusion.label();
    let loop_hits = violated.iter().filter(|n| n.starts_with(&format!("{loop_label}("))).count();
    let only_loop = rep.tags() == BTreeSet::from([ConstraintTag::PhantomLoop]);
    (
        !loops.is_empty() && only_loop && loop_hits >= 1,
        format!(
            "validator tags {:?}, {} phantom-loop violations, {loop_hits} emitted loop constraints violated",
            rep.tags(),
            loops.len()
        ),
    )
}

/// A reaches only B; B reaches C and D. Block 1 on A feeds 2 on C and the sink on D.
fn fig1() -> Instance {
    let ids = ["A", "B", "C", "D"];
    let mut net = uniform_net(&ids, 0.0005, 6, 0, 3, vec![2.0, 0.0, 1.0, 0.0]);
    for (u, v) in [(0, 1), (1, 2), (1, 3)] {
        net.gamma[u][v] = 0.01;
        net.gamma[v][u] = 0.01;
    }
    let app = OverlayApp {
        block_ids: vec!["src".into(), "1".into(), "2".into(), "sink".into()],
        weights: vec![0.0, 2.0, 1.0, 0.0],
        links: vec![(0, 1), (1, 2), (1, 3)],
        source_block: 0,
        sink_block: 3,
    };
    Instance::new(net, app).unwrap()
}

fn multicast_advantage() -> (bool, String) {
    let inst = fig1();
    let opt = relaxed_exact(&inst).solution().map(objective);
    let cfg = BruteForceConfig { allow_multicast: false, ..BruteForceConfig::new(inst.net.max_slots) };
    let unicast = brute_force_with(&inst.net, &inst.app, &cfg).solution().map(objective);
    let p = HeuristicParams { level: 1, k: NeighborLimit::All, ..Default::default() };
    let h = solve_heuristic(&inst.net, &inst.app, &p);
    let heur = h.solution().map(objective);
    let multicasts = h.solution().is_some_and(|s| {
        let mut per: BTreeMap<(usize, usize, usize, usize), usize> = BTreeMap::new();
        for t in &s.transmissions {
            *per.entry((t.sender, t.block, t.origin, t.slot)).or_default() += 1;
        }
        per.values().any(|&c| c > 1)
    });
    let pass = matches!((opt, unicast), (Some(o), Some(u)) if o < u) && heur == opt && multicasts;
    (pass, format!("optimum {opt:?} < unicast-only {unicast:?}; heuristic level 1, k=all: {heur:?} (multicasts: {multicasts})"))
}

fn degeneration() -> (bool, String) {
    let results: Vec<(u64, Option<usize>, Option<usize>)> = corpus(4, CORPUS_SEEDS)
        .par_iter()
        .map(|(seed, inst)| {
            let ex = relaxed_exact(inst).solution().map(objective);
            let p = HeuristicParams {
                level: inst.app.links.len(),
                k: NeighborLimit::All,
                seed: *seed,
                backtrack_budget: usize::MAX,
                ..Default::default()
            };
            (*seed, ex, solve_heuristic(&inst.net, &inst.app, &p).solution().map(objective))
        })
        .collect();
    let bad: Vec<_> = results.iter().filter(|r| r.1 != r.2).collect();
    (bad.is_empty(), format!("{} 4-node instances, nonzero gaps: {:?}", results.len(), bad))
}

fn gap_nonnegative() -> (bool, String) {
    let mut plan = ExperimentPlan::new(
        vec![3, 4],
        vec![1, 2],
        vec![NeighborLimit::Best(1), NeighborLimit::Best(2), NeighborLimit::Best(3), NeighborLimit::All],
        SeedSpec::Range { start: 0, count: CORPUS_SEEDS },
    );
    plan.exact_cutoff = 4;
    let recs = run_experiment(&plan, None).unwrap();
    let gaps: Vec<f64> = recs.iter().filter_map(|r| r.gap).collect();
    let negative = gaps.iter().filter(|&&g| g < 0.0).count();
    let invalid = recs.iter().filter(|r| r.violates_invariant()).count();
    let mut statuses: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &recs {
        *statuses.entry(r.status.as_str()).or_default() += 1;
    }
    (
        negative == 0 && invalid == 0 && !gaps.is_empty(),
        format!("{} records, {} gaps, {negative} negative, {invalid} invariant violations, statuses {statuses:?}", recs.len(), gaps.len()),
    )
}

fn trends() -> (bool, String) {
    // gap: k=3 vs k=all at level 1 on 4 nodes is identical (k=3 = |V|-1), so use 6 nodes
    let mut gap_plan = ExperimentPlan::new(
        vec![6],
        vec![1],
        vec![NeighborLimit::Best(3), NeighborLimit::All],
        SeedSpec::Range { start: 0, count: 20 },
    );
    gap_plan.exact_cutoff = 6;
    gap_plan.exact_node_limit = Some(50_000_000);
    gap_plan.max_slots = Some(6);
    let gap_recs = run_experiment(&gap_plan, None).unwrap();
    let gap_rows = summarize(&gap_recs);
    let mean_gap = |k: NeighborLimit| gap_rows.iter().find(|r| r.k == k).and_then(|r| r.mean_gap);
    let (g3, gall) = (mean_gap(NeighborLimit::Best(3)), mean_gap(NeighborLimit::All));
    let gap_trend = matches!((g3, gall), (Some(a), Some(b)) if a <= b);

    let plan = ExperimentPlan::new(
        (8..=14).collect(),
        vec![1],
        vec![NeighborLimit::Best(3), NeighborLimit::Best(6), NeighborLimit::All],
        SeedSpec::Range { start: 0, count: CORPUS_SEEDS },
    );
    let recs = run_experiment(&plan, None).unwrap();
    let rows = summarize(&recs);
    let mut strict = true;
    let mut table = Vec::new();
    for n in 8..=14 {
        let cell = |k| rows.iter().find(|r| r.node_count == n && r.k == k).unwrap();
        let (c3, c6, call) = (cell(NeighborLimit::Best(3)), cell(NeighborLimit::Best(6)), cell(NeighborLimit::All));
        strict &= c3.mean_candidates < c6.mean_candidates && c6.mean_candidates < call.mean_candidates;
        table.push(format!(
            "{n}:{:.2}/{:.2}/{:.2}",
            c3.mean_heuristic_slots.unwrap_or(f64::NAN),
            c6.mean_heuristic_slots.unwrap_or(f64::NAN),
            call.mean_heuristic_slots.unwrap_or(f64::NAN)
        ));
    }
    let slots_all: Vec<f64> =
        rows.iter().filter(|r| r.k == NeighborLimit::All).filter_map(|r| r.mean_heuristic_slots).collect();
    let spread = slots_all.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - slots_all.iter().cloned().fold(f64::INFINITY, f64::min);
    (
        strict,
        format!(
            "candidates per expansion k=3 < k=6 < all for 8..14 nodes: {strict}; \
             [soft] 6-node level-1 mean gap k=3 {g3:?} <= k=all {gall:?}: {gap_trend}; \
             [report] mean slots k=3/6/all by nodes {} (k=all spread {spread:.2})",
            table.join(" ")
        ),
    )
}

fn emitter_parity() -> (bool, String) {
    let (mut pairs, mut agree, mut caveat, mut valid) = (0, 0, 0, 0);
    let mut disagreements = Vec::new();
    for n in [3usize, 4] {
        for seed in 0..10u64 {
            let mut cfg = ScenarioConfig::new(n, seed);
            cfg.max_slots = Some(8);
            let inst = generate_instance(&cfg).unwrap();
            let model = emit_model(&inst, &EmitConfig { mode: FlowMode::Strict, ..Default::default() }).unwrap();
            let mut sols = Vec::new();
            let strict = ExactConfig { mode: FlowMode::Strict, ..Default::default() };
            if let Some(s) = solve_exact(&inst.net, &inst.app, &strict).into_solution() {
                sols.push(s.permute_slots(|t| 7 - t));
                for t in s.transmissions.iter().take(2) {
                    let mut m = s.clone();
                    m.transmissions.remove(t);
                    sols.push(m);
                }
                let mut dup = s.clone();
                if let Some(t) = s.transmissions.iter().next() {
                    dup.transmissions.insert(Transmission { slot: 7, ..*t });
                }
                sols.push(dup);
                sols.push(s);
            }
            if let Some(s) = relaxed_exact(&inst).into_solution() {
                sols.push(s);
            }
            let p = HeuristicParams { level: 1, seed, ..Default::default() };
            if let Some(s) = solve_heuristic(&inst.net, &inst.app, &p).into_solution() {
                sols.push(s);
            }
            for s in &sols {
                let ok = validate(s, &inst.net, &inst.app, FlowMode::Strict).ok;
                let empty = substitute_and_check(&model, s).is_empty();
                if !repeated_edges(s).is_empty() {
                    caveat += 1;
                    continue;
                }
                pairs += 1;
                valid += ok as usize;
                if ok == empty {
                    agree += 1;
                } else {
                    disagreements.push(format!("n={n} seed={seed} validator={ok} model={empty}"));
                }
            }
        }
    }
    (
        pairs >= 50 && agree == pairs && valid > 0 && valid < pairs,
        format!(
            "{agree}/{pairs} pairs agree ({valid} strict-valid); {caveat} repeated-edge constructions counted separately {disagreements:?}"
        ),
    )
}

fn determinism() -> (bool, String) {
    let run = || {
        let mut files = Vec::new();
        for (n, seed) in [(4usize, 1u64), (6, 2), (10, 3)] {
            let inst = generate_instance(&ScenarioConfig::new(n, seed)).unwrap();
            let p = HeuristicParams { level: 2, k: NeighborLimit::Best(3), seed, ..Default::default() };
            let (h, _) = solve_heuristic_with_stats(&inst.net, &inst.app, &p);
            files.push(h.solution().map(|s| solution_to_json(s, &inst)));
            if n <= 4 {
                files.push(relaxed_exact(&inst).solution().map(|s| solution_to_json(s, &inst)));
            }
        }
        let plan = ExperimentPlan::new(vec![3, 5], vec![1, 2], vec![NeighborLimit::Best(2), NeighborLimit::All], SeedSpec::List(vec![4, 8, 15]));
        let csv = records_csv(&run_experiment(&plan, Some(3)).unwrap(), false).unwrap();
        (files, csv)
    };
    let (a, b) = (run(), run());
    let solved = a.0.iter().filter(|f| f.is_some()).count();
    let statuses = a.1.lines().skip(1).filter(|l| !l.ends_with(RecordStatus::Ok.as_str())).count();
    (
        a == b && solved > 0,
        format!("{solved} solution files and {} CSV rows ({statuses} not ok) byte-identical across two runs: {}", a.1.lines().count() - 1, a == b),
    )
}

fn main() {
    let mut tally = Tally { failed: Vec::new() };
    let criteria: [(&'static str, fn() -> (bool, String)); 10] = [
        ("linearization truth tables", truth_tables),
        ("exact vs brute force", exact_vs_brute_force),
        ("validator soundness and mutations", validator_soundness),
        ("phantom-loop rejection", phantom_loop),
        ("multicast advantage", multicast_advantage),
        ("brute-force degeneration", degeneration),
        ("gap nonnegativity", gap_nonnegative),
        ("trend reports", trends),
        ("emitter substitution parity", emitter_parity),
        ("determinism", determinism),
    ];
    for (name, f) in criteria {
        let t = Instant::now();
        let (pass, detail) = f();
        tally.report(name, pass, detail, t);
    }
    if !tally.failed.is_empty() {
        eprintln!("failed: {:?}", tally.failed);
        std::process::exit(1);
    }
}
