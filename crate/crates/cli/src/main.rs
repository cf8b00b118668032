use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use marvelo::emitter::{emit_model, EmitConfig};
use marvelo::exact::{solve_exact_with_stats, ExactConfig};
use marvelo::harness::{report, run_experiment, ExperimentPlan};
use marvelo::heuristic::{solve_heuristic_with_stats, HeuristicParams, NeighborLimit};
use marvelo::io::{read_instance, read_solution, write_instance, write_solution};
use marvelo::scenario::{generate_instance, ScenarioConfig, DEFAULT_NOISE_FLOOR, DEFAULT_ROOM_SIDE, DEFAULT_SINR_THRESHOLD};
use marvelo::validator::validate;
use marvelo::{objective, FlowMode, SignalModel};
use serde_json::json;

#[derive(Parser)]
#[command(name = "marvelo", version, about = "Embed signal-processing overlays into wireless networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Exact,
    Heuristic,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random room instance with the seven-block overlay.
    Gen {
        #[arg(long)]
        nodes: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_ROOM_SIDE)]
        room: f64,
        #[arg(long, default_value_t = DEFAULT_NOISE_FLOOR)]
        noise: f64,
        #[arg(long = "sinr-th", default_value_t = DEFAULT_SINR_THRESHOLD)]
        sinr_th: f64,
        /// Frame bound (default: four slots per overlay link).
        #[arg(long)]
        max_slots: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        block_weight: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Embed an instance and write the solution file.
    Solve {
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long)]
        instance: PathBuf,
        /// Where to write the solution (default: stdout only reports).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "relaxed")]
        mode: FlowMode,
        /// Largest frame the exact search tries.
        #[arg(long)]
        slot_max: Option<usize>,
        #[arg(long)]
        node_limit: Option<u64>,
        #[arg(long, default_value_t = 1)]
        level: usize,
        #[arg(long, default_value = "all")]
        k: NeighborLimit,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        backtrack_budget: usize,
        #[arg(long)]
        max_path_hops: Option<usize>,
    },
    /// Check a solution against every constraint; exits 1 when it is rejected.
    Validate {
        instance: PathBuf,
        solution: PathBuf,
        #[arg(long, default_value = "relaxed")]
        mode: FlowMode,
    },
    /// Write the constraint model in LP format.
    Emit {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "relaxed")]
        mode: FlowMode,
        #[arg(long = "big-m")]
        big_m: Option<f64>,
        #[arg(long)]
        signal_model: Option<SignalModel>,
        #[arg(long, default_value_t = 2_000_000)]
        max_variables: u128,
    },
    /// Run a seeded sweep and write CSV tables and SVG plots.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
        /// Leave runtime columns empty so reruns are byte-identical.
        #[arg(long)]
        no_timing: bool,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Gen { nodes, seed, room, noise, sinr_th, max_slots, block_weight, out } => {
            let cfg = ScenarioConfig {
                room_side: room,
                noise_floor: noise,
                sinr_threshold: sinr_th,
                max_slots,
                block_weight,
                ..ScenarioConfig::new(nodes, seed)
            };
            let inst = generate_instance(&cfg)?;
            write_instance(&out, &inst).with_context(|| format!("writing {}", out.display()))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Solve {
            method,
            instance,
            out,
            mode,
            slot_max,
            node_limit,
            level,
            k,
            seed,
            backtrack_budget,
            max_path_hops,
        } => {
            let inst = read_instance(&instance).with_context(|| format!("reading {}", instance.display()))?;
            let start = Instant::now();
            let (outcome, stats) = match method {
                Method::Exact => {
                    let mut cfg = ExactConfig { mode, ..ExactConfig::default() };
                    if let Some(m) = slot_max {
                        cfg.slot_budget_max = m;
                    }
                    if let Some(l) = node_limit {
                        cfg.node_limit = l;
                    }
                    let (o, s) = solve_exact_with_stats(&inst.net, &inst.app, &cfg);
                    (o, serde_json::to_value(s)?)
                }
                Method::Heuristic => {
                    if level == 0 {
                        bail!("--level must be at least 1");
                    }
                    let params = HeuristicParams { level, k, seed, backtrack_budget, max_path_hops, ..Default::default() };
                    let (o, s) = solve_heuristic_with_stats(&inst.net, &inst.app, &params);
                    (o, serde_json::to_value(s)?)
                }
            };
            let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
            if let (Some(sol), Some(path)) = (outcome.solution(), &out) {
                write_solution(path, sol, &inst).with_context(|| format!("writing {}", path.display()))?;
            }
            let summary = json!({
                "status": outcome.status(),
                "objective": outcome.solution().map(objective),
                "statistics": stats,
                "runtime_ms": runtime_ms,
            });
            out_line(&serde_json::to_string_pretty(&summary)?);
            Ok(if outcome.solution().is_some() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Validate { instance, solution, mode } => {
            let inst = read_instance(&instance).with_context(|| format!("reading {}", instance.display()))?;
            let sol = read_solution(&solution, &inst).with_context(|| format!("reading {}", solution.display()))?;
            let rep = validate(&sol, &inst.net, &inst.app, mode);
            out_line(&serde_json::to_string_pretty(&rep)?);
            Ok(if rep.ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Emit { instance, out, mode, big_m, signal_model, max_variables } => {
            let inst = read_instance(&instance).with_context(|| format!("reading {}", instance.display()))?;
            let big_m = match big_m {
                Some(m) if !(m.is_finite() && m > 0.0) => bail!("--big-m must be a positive number"),
                Some(m) => Some(num_rational_from(m)),
                None => None,
            };
            let cfg = EmitConfig { mode, big_m, signal_model, max_variables };
            let model = emit_model(&inst, &cfg)?;
            std::fs::write(&out, model.to_lp()).with_context(|| format!("writing {}", out.display()))?;
            eprintln!("{} variables, {} constraints", model.variable_count(), model.constraints.len());
            Ok(ExitCode::SUCCESS)
        }
        Command::Experiment { config, out_dir, jobs, no_timing } => {
            let plan = ExperimentPlan::read(&config).with_context(|| format!("reading {}", config.display()))?;
            let records = run_experiment(&plan, jobs)?;
            let files = report(&records, &out_dir, !no_timing)?;
            let bad: Vec<_> = records.iter().filter(|r| r.violates_invariant()).collect();
            for r in &bad {
                eprintln!(
                    "invariant violated: nodes={} level={} k={} seed={} status={} {}",
                    r.node_count,
                    r.level,
                    r.k,
                    r.seed,
                    r.status.as_str(),
                    r.detail.as_deref().unwrap_or("")
                );
            }
            eprintln!("{} records written to {}", records.len(), files.records.display());
            Ok(if bad.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

/// Prints to stdout, tolerating a closed pipe.
fn out_line(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout(), "{text}");
}

fn num_rational_from(x: f64) -> marvelo::emitter::Coef {
    marvelo::emitter::Coef::from_float(x).expect("finite")
}
