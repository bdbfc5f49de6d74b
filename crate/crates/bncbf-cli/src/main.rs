//! Command-line front end: validate scenarios, run the filtered simulation,
//! summarize logs, and sweep follower counts for scaling tables.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bncbf::scenario::config::Role;
use bncbf::scenario::{summarize, Engine, Overrides, RunLog, ScenarioConfig, Summary};

#[derive(Parser)]
#[command(name = "bncbf", about = "Safety-filtered multi-agent simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct OverrideArgs {
    /// Control period override (s)
    #[arg(long)]
    dt: Option<f64>,
    /// Duration override (s)
    #[arg(long)]
    duration: Option<f64>,
    /// Almost-active leaf threshold override
    #[arg(long)]
    eps1: Option<f64>,
    /// Almost-active hyperplane threshold override
    #[arg(long)]
    eps2: Option<f64>,
    /// Class-K slope override
    #[arg(long)]
    alpha_slope: Option<f64>,
    /// Seed override (affects initial-pose jitter only)
    #[arg(long)]
    seed: Option<u64>,
    /// Run the nominal controller unfiltered
    #[arg(long)]
    filter_bypass: bool,
    /// Enable bounding-sphere pruning of far distance solves
    #[arg(long)]
    broad_phase: bool,
}

impl OverrideArgs {
    fn to_overrides(&self) -> Overrides {
        Overrides {
            dt: self.dt,
            duration: self.duration,
            eps1: self.eps1,
            eps2: self.eps2,
            alpha_slope: self.alpha_slope,
            seed: self.seed,
            filter_bypass: self.filter_bypass,
            broad_phase: if self.broad_phase { Some(true) } else { None },
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check scenario assumptions: templates, pitch domain, corridor
    /// containment, and initial safety.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Run the scenario and write traj.csv, barriers.csv, events.json, and
    /// summary.json to the output directory.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Recompute the summary from a previous run directory.
    Stats {
        #[arg(long)]
        out: PathBuf,
    },
    /// Run follower-count variants of a scenario and print the scaling table.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated follower counts, e.g. 2,5,7,9
        #[arg(long, value_delimiter = ',', default_values_t = vec![2usize, 5, 7, 9])]
        followers: Vec<usize>,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run_command(cli.command) {
        Ok(clean) => {
            if clean {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run_command(command: Command) -> Result<bool, String> {
    match command {
        Command::Validate { scenario } => cmd_validate(&scenario),
        Command::Run {
            scenario,
            out,
            overrides,
        } => cmd_run(&scenario, &out, &overrides.to_overrides()),
        Command::Stats { out } => cmd_stats(&out),
        Command::Sweep {
            scenario,
            out,
            followers,
            overrides,
        } => cmd_sweep(&scenario, &out, &followers, &overrides.to_overrides()),
    }
}

fn cmd_validate(path: &Path) -> Result<bool, String> {
    let config = ScenarioConfig::load(path).map_err(|e| e.to_string())?;
    let engine = match Engine::new(config) {
        Ok(e) => e,
        Err(e) => {
            println!("FAIL load: {e}");
            return Ok(false);
        }
    };
    let report = engine.validate();
    for check in &report.checks {
        let tag = if check.passed { "PASS" } else { "FAIL" };
        println!("{tag} {} ({})", check.name, check.detail);
    }
    println!(
        "validation {}",
        if report.passed() { "PASS" } else { "FAIL" }
    );
    Ok(report.passed())
}

fn write_outputs(out: &Path, log: &RunLog) -> Result<Summary, String> {
    std::fs::create_dir_all(out).map_err(|e| e.to_string())?;
    std::fs::write(out.join("traj.csv"), log.trajectory_csv()).map_err(|e| e.to_string())?;
    std::fs::write(out.join("barriers.csv"), log.barriers_csv()).map_err(|e| e.to_string())?;
    let events = serde_json::to_string_pretty(&log.events).map_err(|e| e.to_string())?;
    std::fs::write(out.join("events.json"), events).map_err(|e| e.to_string())?;
    let summary = summarize(log);
    let summary_json = serde_json::to_string_pretty(&summary).map_err(|e| e.to_string())?;
    std::fs::write(out.join("summary.json"), summary_json).map_err(|e| e.to_string())?;
    Ok(summary)
}

fn cmd_run(path: &Path, out: &Path, overrides: &Overrides) -> Result<bool, String> {
    let mut config = ScenarioConfig::load(path).map_err(|e| e.to_string())?;
    overrides.apply(&mut config);
    let engine = Engine::new(config).map_err(|e| e.to_string())?;
    let log = engine.run().map_err(|e| e.to_string())?;
    let summary = write_outputs(out, &log)?;
    println!(
        "{}: {} steps, min h_g = {:.6}, violations = {}, faults = {}, max goal error = {:.3} m",
        summary.name,
        summary.steps,
        summary.min_h_g,
        summary.violations,
        summary.solver_faults,
        summary.max_goal_error
    );
    println!(
        "timing per step: distance {:.2} ms, filter {:.2} ms, total {:.2} ms",
        summary.distance_ms_mean, summary.filter_ms_mean, summary.total_ms_mean
    );
    Ok(summary.violations == 0 && summary.solver_faults == 0)
}

fn cmd_stats(out: &Path) -> Result<bool, String> {
    let traj = std::fs::read_to_string(out.join("traj.csv")).map_err(|e| e.to_string())?;
    let barriers = std::fs::read_to_string(out.join("barriers.csv")).map_err(|e| e.to_string())?;
    let events = std::fs::read_to_string(out.join("events.json")).map_err(|e| e.to_string())?;
    let (agent_ids, leaf_names, steps, parsed_events) =
        RunLog::from_tables(&traj, &barriers, &events).map_err(|e| e.to_string())?;
    let min_h_g = steps.iter().map(|s| s.h_g).fold(f64::INFINITY, f64::min);
    let mean = |f: &dyn Fn(&bncbf::scenario::StepRecord) -> f64| -> f64 {
        if steps.is_empty() {
            0.0
        } else {
            steps.iter().map(|s| f(s)).sum::<f64>() / steps.len() as f64
        }
    };
    let active_mean = mean(&|s| (s.active_smooth + s.active_nonsmooth) as f64);
    let ca_mean = mean(&|s| s.ca_solves as f64);
    let los_mean = mean(&|s| s.los_solves as f64);
    println!("agents: {}", agent_ids.len());
    println!("leaves: {}", leaf_names.len());
    println!("steps: {}", steps.len());
    println!("min h_g: {min_h_g}");
    println!("mean active-set size: {active_mean:.3}");
    println!("mean collision solves per step: {ca_mean:.3}");
    println!("mean sight-line solves per step: {los_mean:.3}");
    let violations = parsed_events.iter().filter(|e| e.is_violation()).count();
    let faults = parsed_events.iter().filter(|e| e.is_fault()).count();
    println!("violations: {violations}, faults: {faults}");
    if let Ok(summary_text) = std::fs::read_to_string(out.join("summary.json")) {
        if let Ok(summary) = serde_json::from_str::<Summary>(&summary_text) {
            println!(
                "timing per step (ms): distance {:.2} +- {:.2}, filter {:.2} +- {:.2}, total {:.2} +- {:.2}",
                summary.distance_ms_mean,
                summary.distance_ms_std,
                summary.filter_ms_mean,
                summary.filter_ms_std,
                summary.total_ms_mean,
                summary.total_ms_std
            );
        }
    }
    Ok(violations == 0 && faults == 0)
}

/// Reduce a scenario to its first `keep` followers (by declaration order).
fn reduce_followers(config: &ScenarioConfig, keep: usize) -> Result<ScenarioConfig, String> {
    let total = config
        .agents
        .iter()
        .filter(|a| a.role == Role::Follower)
        .count();
    if keep > total {
        return Err(format!("scenario has {total} followers, cannot keep {keep}"));
    }
    let mut reduced = config.clone();
    let mut kept = 0usize;
    reduced.agents.retain(|a| {
        if a.role == Role::Follower {
            kept += 1;
            kept <= keep
        } else {
            true
        }
    });
    reduced.name = format!("{}_f{keep}", config.name);
    Ok(reduced)
}

fn cmd_sweep(
    path: &Path,
    out: &Path,
    followers: &[usize],
    overrides: &Overrides,
) -> Result<bool, String> {
    let mut base = ScenarioConfig::load(path).map_err(|e| e.to_string())?;
    overrides.apply(&mut base);
    std::fs::create_dir_all(out).map_err(|e| e.to_string())?;
    let mut summaries = Vec::new();
    let mut clean = true;
    for &count in followers {
        let config = reduce_followers(&base, count)?;
        let engine = Engine::new(config).map_err(|e| e.to_string())?;
        let log = engine.run().map_err(|e| e.to_string())?;
        let summary = write_outputs(&out.join(format!("followers_{count}")), &log)?;
        clean &= summary.violations == 0 && summary.solver_faults == 0;
        summaries.push((count, summary));
    }
    println!(
        "{:>9} | {:>8} | {:>8} | {:>13} | {:>12} | {:>12} | {:>12}",
        "followers", "ca QPs", "los QPs", "active (m+s)", "distance ms", "filter ms", "total ms"
    );
    for (count, s) in &summaries {
        println!(
            "{:>9} | {:>8.0} | {:>8.0} | {:>6.2} +- {:>4.2} | {:>12.2} | {:>12.2} | {:>12.2}",
            count,
            s.ca_solves_per_step,
            s.los_solves_per_step,
            s.active_set_mean,
            s.active_set_std,
            s.distance_ms_mean,
            s.filter_ms_mean,
            s.total_ms_mean
        );
    }
    let table: Vec<Summary> = summaries.into_iter().map(|(_, s)| s).collect();
    let json = serde_json::to_string_pretty(&table).map_err(|e| e.to_string())?;
    std::fs::write(out.join("sweep.json"), json).map_err(|e| e.to_string())?;
    Ok(clean)
}
