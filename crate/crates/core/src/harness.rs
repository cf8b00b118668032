//! Seeded experiment sweeps, CSV reports and SVG plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{solve_exact, ExactConfig};
use crate::heuristic::{solve_heuristic_with_stats, HeuristicParams, NeighborLimit};
use crate::model::{objective, FlowMode, Instance, Outcome};
use crate::scenario::{generate_instance, ScenarioConfig, DEFAULT_NOISE_FLOOR, DEFAULT_ROOM_SIDE, DEFAULT_SINR_THRESHOLD};
use crate::validator::validate;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    List(Vec<u64>),
    Range { start: u64, count: u64 },
}

impl SeedSpec {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            SeedSpec::List(v) => v.clone(),
            SeedSpec::Range { start, count } => (*start..start + count).collect(),
        }
    }
}

fn default_cutoff() -> usize {
    4
}
fn default_room() -> f64 {
    DEFAULT_ROOM_SIDE
}
fn default_noise() -> f64 {
    DEFAULT_NOISE_FLOOR
}
fn default_th() -> f64 {
    DEFAULT_SINR_THRESHOLD
}
fn default_weight() -> f64 {
    1.0
}
fn default_budget() -> usize {
    10_000
}
fn default_mode() -> FlowMode {
    FlowMode::Relaxed
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub node_counts: Vec<usize>,
    pub levels: Vec<usize>,
    pub ks: Vec<NeighborLimit>,
    pub seeds: SeedSpec,
    #[serde(default = "default_cutoff")]
    pub exact_cutoff: usize,
    #[serde(default = "default_room")]
    pub room_side: f64,
    #[serde(default = "default_noise")]
    pub noise_floor: f64,
    #[serde(default = "default_th")]
    pub sinr_threshold: f64,
    #[serde(default = "default_weight")]
    pub block_weight: f64,
    #[serde(default)]
    pub max_slots: Option<usize>,
    #[serde(default = "default_budget")]
    pub backtrack_budget: usize,
    #[serde(default)]
    pub exact_node_limit: Option<u64>,
    #[serde(default = "default_mode")]
    pub mode: FlowMode,
}

impl ExperimentPlan {
    pub fn new(node_counts: Vec<usize>, levels: Vec<usize>, ks: Vec<NeighborLimit>, seeds: SeedSpec) -> Self {
        Self {
            node_counts,
            levels,
            ks,
            seeds,
            exact_cutoff: default_cutoff(),
            room_side: default_room(),
            noise_floor: default_noise(),
            sinr_threshold: default_th(),
            block_weight: default_weight(),
            max_slots: None,
            backtrack_budget: default_budget(),
            exact_node_limit: None,
            mode: default_mode(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let plan: Self = serde_json::from_str(text)?;
        plan.check()?;
        Ok(plan)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidPlan(m.into()));
        if self.node_counts.is_empty() || self.levels.is_empty() || self.ks.is_empty() || self.seeds.seeds().is_empty() {
            return bad("node_counts, levels, ks and seeds must be nonempty");
        }
        if self.node_counts.iter().any(|&n| n < 2) {
            return bad("node counts must be at least 2");
        }
        if self.levels.contains(&0) {
            return bad("levels must be at least 1");
        }
        if !(self.room_side > 0.0 && self.noise_floor > 0.0 && self.sinr_threshold > 0.0 && self.block_weight >= 0.0) {
            return bad("radio constants must be positive");
        }
        Ok(())
    }

    fn scenario(&self, n: usize, seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            room_side: self.room_side,
            noise_floor: self.noise_floor,
            sinr_threshold: self.sinr_threshold,
            block_weight: self.block_weight,
            max_slots: self.max_slots,
            ..ScenarioConfig::new(n, seed)
        }
    }

    /// Cells in output order: node count, level, k, seed.
    pub fn cells(&self) -> Vec<(usize, usize, NeighborLimit, u64)> {
        let seeds = self.seeds.seeds();
        let mut out = Vec::new();
        for &n in &self.node_counts {
            for &level in &self.levels {
                for &k in &self.ks {
                    for &s in &seeds {
                        out.push((n, level, k, s));
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Ok,
    Infeasible,
    Budget,
    ExactSkipped,
    /// Both solvers succeeded but the optimum uses no slot.
    GapUndefined,
    /// A solution failed validation or the gap came out negative.
    Invalid,
}

impl RecordStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordStatus::Ok => "ok",
            RecordStatus::Infeasible => "infeasible",
            RecordStatus::Budget => "budget",
            RecordStatus::ExactSkipped => "exact_skipped",
            RecordStatus::GapUndefined => "gap_undefined",
            RecordStatus::Invalid => "invalid",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub node_count: usize,
    pub level: usize,
    pub k: NeighborLimit,
    pub seed: u64,
    pub heuristic_slots: Option<usize>,
    pub exact_slots: Option<usize>,
    pub gap: Option<f64>,
    pub heuristic_runtime_ms: Option<f64>,
    pub exact_runtime_ms: Option<f64>,
    pub status: RecordStatus,
    /// Paths enumerated per link expansion.
    pub mean_candidates: f64,
    pub detail: Option<String>,
}

impl ExperimentRecord {
    pub fn violates_invariant(&self) -> bool {
        let both = self.heuristic_slots.is_some() && self.exact_slots.is_some() && self.exact_slots != Some(0);
        self.status == RecordStatus::Invalid || self.gap.is_some() != both || self.gap.is_some_and(|g| g < 0.0)
    }
}

/// Relative optimality gap; undefined for an empty optimum.
pub fn gap(heur_slots: usize, opt_slots: usize) -> Option<f64> {
    if opt_slots == 0 {
        return None;
    }
    Some((heur_slots as f64 - opt_slots as f64) / opt_slots as f64)
}

struct ExactRun {
    outcome: Outcome,
    ms: f64,
    valid: bool,
}

fn run_exact(plan: &ExperimentPlan, inst: &Instance) -> ExactRun {
    let mut cfg = ExactConfig { mode: plan.mode, ..ExactConfig::default() };
    if let Some(limit) = plan.exact_node_limit {
        cfg.node_limit = limit;
    }
    let t = Instant::now();
    let outcome = solve_exact(&inst.net, &inst.app, &cfg);
    let ms = t.elapsed().as_secs_f64() * 1e3;
    let valid = outcome.solution().is_none_or(|s| validate(s, &inst.net, &inst.app, plan.mode).ok);
    ExactRun { outcome, ms, valid }
}

fn status_of(outcome: &Outcome) -> RecordStatus {
    match outcome {
        Outcome::Solved(_) => RecordStatus::Ok,
        Outcome::Infeasible => RecordStatus::Infeasible,
        Outcome::BudgetExhausted => RecordStatus::Budget,
    }
}

fn run_cell(
    plan: &ExperimentPlan,
    inst: &Instance,
    cell: (usize, usize, NeighborLimit, u64),
    exact: Option<&ExactRun>,
) -> ExperimentRecord {
    let (node_count, level, k, seed) = cell;
    let params = HeuristicParams { level, k, seed, backtrack_budget: plan.backtrack_budget, ..Default::default() };
    let t = Instant::now();
    let (outcome, stats) = solve_heuristic_with_stats(&inst.net, &inst.app, &params);
    let heuristic_ms = t.elapsed().as_secs_f64() * 1e3;

    let mut rec = ExperimentRecord {
        node_count,
        level,
        k,
        seed,
        heuristic_slots: outcome.solution().map(objective),
        exact_slots: exact.and_then(|e| e.outcome.solution().map(objective)),
        gap: None,
        heuristic_runtime_ms: Some(heuristic_ms),
        exact_runtime_ms: exact.map(|e| e.ms),
        status: RecordStatus::Ok,
        mean_candidates: stats.mean_candidates(),
        detail: None,
    };
    if let Some(sol) = outcome.solution() {
        let report = validate(sol, &inst.net, &inst.app, plan.mode);
        if !report.ok {
            rec.status = RecordStatus::Invalid;
            rec.detail = Some(format!("heuristic solution rejected: {:?}", report.tags()));
            return rec;
        }
    }
    if exact.is_some_and(|e| !e.valid) {
        rec.status = RecordStatus::Invalid;
        rec.detail = Some("exact solution rejected by the validator".into());
        return rec;
    }
    rec.status = status_of(&outcome);
    if rec.status == RecordStatus::Ok {
        rec.status = match exact {
            None => RecordStatus::ExactSkipped,
            Some(e) => status_of(&e.outcome),
        };
    }
    if let (Some(h), Some(o)) = (rec.heuristic_slots, rec.exact_slots) {
        rec.gap = gap(h, o);
        if rec.gap.is_none() && rec.status == RecordStatus::Ok {
            rec.status = RecordStatus::GapUndefined;
        }
        if rec.gap.is_some_and(|g| g < 0.0) {
            rec.status = RecordStatus::Invalid;
            rec.detail = Some("heuristic beat the exact optimum".into());
        }
    }
    rec
}

/// Runs every cell of the plan; records come back in plan order whatever the
/// thread count. `jobs = None` uses all cores.
pub fn run_experiment(plan: &ExperimentPlan, jobs: Option<usize>) -> Result<Vec<ExperimentRecord>> {
    plan.check()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder.build().map_err(|e| Error::InvalidPlan(e.to_string()))?;

    let seeds = plan.seeds.seeds();
    let mut pairs: Vec<(usize, u64)> = Vec::new();
    for &n in &plan.node_counts {
        for &s in &seeds {
            if !pairs.contains(&(n, s)) {
                pairs.push((n, s));
            }
        }
    }

    pool.install(|| {
        let instances: Vec<Result<Instance>> = pairs.par_iter().map(|&(n, s)| generate_instance(&plan.scenario(n, s))).collect();
        let mut by_pair = BTreeMap::new();
        for (pair, inst) in pairs.iter().zip(instances) {
            by_pair.insert(*pair, inst?);
        }
        let exact: BTreeMap<(usize, u64), ExactRun> = by_pair
            .par_iter()
            .filter(|((n, _), _)| *n <= plan.exact_cutoff)
            .map(|(pair, inst)| (*pair, run_exact(plan, inst)))
            .collect();
        let cells = plan.cells();
        Ok(cells
            .par_iter()
            .map(|&cell| {
                let pair = (cell.0, cell.3);
                run_cell(plan, &by_pair[&pair], cell, exact.get(&pair))
            })
            .collect())
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub node_count: usize,
    pub level: usize,
    pub k: NeighborLimit,
    pub runs: usize,
    pub solved: usize,
    pub median_heuristic_runtime_ms: Option<f64>,
    pub median_exact_runtime_ms: Option<f64>,
    pub mean_gap: Option<f64>,
    /// Half-width of the normal-approximation 95% interval.
    pub gap_ci95: Option<f64>,
    pub mean_heuristic_slots: Option<f64>,
    pub mean_candidates: f64,
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn median(v: &[f64]) -> Option<f64> {
    let v = sorted(v.to_vec());
    match v.len() {
        0 => None,
        n if n % 2 == 1 => Some(v[n / 2]),
        n => Some((v[n / 2 - 1] + v[n / 2]) / 2.0),
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    Some(sorted(v.to_vec()).iter().sum::<f64>() / v.len() as f64)
}

/// Mean and 95% half-width; zero width below two samples.
pub fn mean_ci95(v: &[f64]) -> Option<(f64, f64)> {
    let m = mean(v)?;
    if v.len() < 2 {
        return Some((m, 0.0));
    }
    let ss: Vec<f64> = v.iter().map(|x| (x - m) * (x - m)).collect();
    let var = sorted(ss).iter().sum::<f64>() / (v.len() - 1) as f64;
    Some((m, 1.96 * (var / v.len() as f64).sqrt()))
}

/// Per-(node count, level, k) aggregates, independent of record order.
pub fn summarize(records: &[ExperimentRecord]) -> Vec<SummaryRow> {
    let mut cells: BTreeMap<(usize, usize, NeighborLimit), Vec<&ExperimentRecord>> = BTreeMap::new();
    for r in records {
        cells.entry((r.node_count, r.level, r.k)).or_default().push(r);
    }
    cells
        .into_iter()
        .map(|((node_count, level, k), rs)| {
            let hr: Vec<f64> = rs.iter().filter_map(|r| r.heuristic_runtime_ms).collect();
            let er: Vec<f64> = rs.iter().filter_map(|r| r.exact_runtime_ms).collect();
            let gaps: Vec<f64> = rs.iter().filter_map(|r| r.gap).collect();
            let slots: Vec<f64> = rs.iter().filter_map(|r| r.heuristic_slots.map(|s| s as f64)).collect();
            let cands: Vec<f64> = rs.iter().map(|r| r.mean_candidates).collect();
            let ci = mean_ci95(&gaps);
            SummaryRow {
                node_count,
                level,
                k,
                runs: rs.len(),
                solved: slots.len(),
                median_heuristic_runtime_ms: median(&hr),
                median_exact_runtime_ms: median(&er),
                mean_gap: ci.map(|c| c.0),
                gap_ci95: ci.map(|c| c.1),
                mean_heuristic_slots: mean(&slots),
                mean_candidates: mean(&cands).unwrap_or(0.0),
            }
        })
        .collect()
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const RECORD_COLUMNS: [&str; 10] = [
    "node_count",
    "level",
    "k",
    "seed",
    "heuristic_slots",
    "exact_slots",
    "gap",
    "heuristic_runtime_ms",
    "exact_runtime_ms",
    "status",
];

pub fn records_csv(records: &[ExperimentRecord], timing: bool) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RECORD_COLUMNS)?;
    for r in records {
        let t = |v: Option<f64>| if timing { v.map(|x| format!("{x:.3}")).unwrap_or_default() } else { String::new() };
        w.write_record([
            r.node_count.to_string(),
            r.level.to_string(),
            r.k.to_string(),
            r.seed.to_string(),
            opt(r.heuristic_slots),
            opt(r.exact_slots),
            opt(r.gap),
            t(r.heuristic_runtime_ms),
            t(r.exact_runtime_ms),
            r.status.as_str().to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn summary_csv(rows: &[SummaryRow], timing: bool) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "node_count",
        "level",
        "k",
        "runs",
        "solved",
        "median_heuristic_runtime_ms",
        "median_exact_runtime_ms",
        "mean_gap",
        "gap_ci95",
        "mean_heuristic_slots",
        "mean_candidates",
    ])?;
    for r in rows {
        let t = |v: Option<f64>| if timing { v.map(|x| format!("{x:.3}")).unwrap_or_default() } else { String::new() };
        let f = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        w.write_record([
            r.node_count.to_string(),
            r.level.to_string(),
            r.k.to_string(),
            r.runs.to_string(),
            r.solved.to_string(),
            t(r.median_heuristic_runtime_ms),
            t(r.median_exact_runtime_ms),
            f(r.mean_gap),
            f(r.gap_ci95),
            f(r.mean_heuristic_slots),
            format!("{:.6}", r.mean_candidates),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// A plotted series: label and `(x, y, optional half error bar)` points.
pub type Series = (String, Vec<(f64, f64, Option<f64>)>);

const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

/// Minimal self-contained SVG line chart.
pub fn svg_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h, ml, mr, mt, mb) = (640.0, 420.0, 70.0, 150.0, 40.0, 50.0);
    let pts = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, f64::NEG_INFINITY);
    for &(x, y, e) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y - e.unwrap_or(0.0));
        y1 = y1.max(y + e.unwrap_or(0.0));
    }
    if !x0.is_finite() {
        (x0, x1, y1) = (0.0, 1.0, 1.0);
    }
    if x1 - x0 < 1e-9 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    if y1 - y0 < 1e-9 {
        y1 = y0 + 1.0;
    }
    y1 += (y1 - y0) * 0.05;
    let pw = w - ml - mr;
    let ph = h - mt - mb;
    let sx = |x: f64| ml + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| mt + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, ml + pw / 2.0, esc(title));
    let _ = writeln!(s, r#"<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for i in 0..=5 {
        let yv = y0 + (y1 - y0) * i as f64 / 5.0;
        let xv = x0 + (x1 - x0) * i as f64 / 5.0;
        let _ = writeln!(s, r##"<line x1="{ml}" x2="{}" y1="{y:.1}" y2="{y:.1}" stroke="#ddd"/>"##, ml + pw, y = sy(yv));
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, ml - 6.0, sy(yv) + 4.0, tick(yv));
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, sx(xv), mt + ph + 18.0, tick(xv));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, ml + pw / 2.0, h - 10.0, esc(x_label));
    let _ = writeln!(
        s,
        r#"<text x="18" y="{y}" text-anchor="middle" transform="rotate(-90 18 {y})">{}</text>"#,
        esc(y_label),
        y = mt + ph / 2.0
    );
    for (i, (label, points)) in series.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let path: Vec<String> = points.iter().map(|&(x, y, _)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
        if points.len() > 1 {
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="2"/>"#, path.join(" "));
        }
        for &(x, y, e) in points {
            if let Some(e) = e {
                let _ = writeln!(
                    s,
                    r#"<line x1="{x:.1}" x2="{x:.1}" y1="{:.1}" y2="{:.1}" stroke="{c}"/>"#,
                    sy(y - e),
                    sy(y + e),
                    x = sx(x)
                );
            }
            let _ = writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{c}"/>"#, sx(x), sy(y));
        }
        let ly = mt + 14.0 + 18.0 * i as f64;
        let _ = writeln!(s, r#"<rect x="{}" y="{}" width="12" height="12" fill="{c}"/>"#, ml + pw + 12.0, ly - 10.0);
        let _ = writeln!(s, r#"<text x="{}" y="{ly}">{}</text>"#, ml + pw + 30.0, esc(label));
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    let r = format!("{v:.3}");
    r.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn by_series(rows: &[SummaryRow], value: impl Fn(&SummaryRow) -> Option<(f64, Option<f64>)>) -> Vec<Series> {
    let mut series: BTreeMap<(usize, NeighborLimit), Vec<(f64, f64, Option<f64>)>> = BTreeMap::new();
    for r in rows {
        if let Some((y, e)) = value(r) {
            series.entry((r.level, r.k)).or_default().push((r.node_count as f64, y, e));
        }
    }
    series.into_iter().map(|((l, k), p)| (format!("level {l}, k={k}"), p)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportFiles {
    pub records: PathBuf,
    pub summary: PathBuf,
    pub plots: Vec<PathBuf>,
}

/// Writes `records.csv`, `summary.csv` and the SVG plots into `out_dir`.
/// Without timing the runtime columns are left empty and no runtime plot is drawn.
pub fn report(records: &[ExperimentRecord], out_dir: &Path, timing: bool) -> Result<ReportFiles> {
    fs::create_dir_all(out_dir)?;
    let rows = summarize(records);
    let files = ReportFiles { records: out_dir.join("records.csv"), summary: out_dir.join("summary.csv"), plots: Vec::new() };
    fs::write(&files.records, records_csv(records, timing)?)?;
    fs::write(&files.summary, summary_csv(&rows, timing)?)?;
    let mut files = files;

    if timing {
        let mut series = by_series(&rows, |r| r.median_heuristic_runtime_ms.map(|v| (v, None)));
        let mut exact: BTreeMap<usize, f64> = BTreeMap::new();
        for r in &rows {
            if let Some(v) = r.median_exact_runtime_ms {
                exact.insert(r.node_count, v);
            }
        }
        if !exact.is_empty() {
            series.push(("exact".into(), exact.into_iter().map(|(n, v)| (n as f64, v, None)).collect()));
        }
        let p = out_dir.join("runtime.svg");
        fs::write(&p, svg_chart("Median runtime", "nodes", "runtime [ms]", &series))?;
        files.plots.push(p);
    }
    let gaps = by_series(&rows, |r| r.mean_gap.map(|g| (g, r.gap_ci95)));
    let p = out_dir.join("gap.svg");
    fs::write(&p, svg_chart("Mean optimality gap with 95% interval", "nodes", "gap", &gaps))?;
    files.plots.push(p);
    let slots = by_series(&rows, |r| r.mean_heuristic_slots.map(|s| (s, None)));
    let p = out_dir.join("slots.svg");
    fs::write(&p, svg_chart("Mean used slots", "nodes", "slots", &slots))?;
    files.plots.push(p);
    Ok(files)
}
