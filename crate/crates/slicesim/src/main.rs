//! `slicesim` command line: campaign runs, one-shot slot solves, KPI sweeps,
//! and the solver-vs-oracle verification harness.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 oracle-check
//! failure.

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use slicesim::config::{load_config, preset, ConfigError, ScenarioConfig, SolveSnapshot};
use slicesim::harness::{run_campaign, run_campaign_with_workers, run_sweep, SweepKnob};
use slicesim::oracle::{brute_force_oracle, fallback_shortfall_oracle, random_problem, Phase};
use slicesim::output;
use slicesim::phy::{effective_se_table, feasibility_mask, power_slope_table, NUM_CQI};
use slicesim::solver::{
    objective, solve_phase1, solve_slot, Allocation, SliceProblem, SlotProblem,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "slicesim",
    version,
    about = "Slot-level network-slicing simulator with an exact two-phase allocator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo campaign and write the KPI bundle.
    Run(RunArgs),
    /// Solve a single slot snapshot and print the allocation.
    Solve(SolveArgs),
    /// Run one campaign per knob value and write the sweep table.
    Sweep(SweepArgs),
    /// Verify the exact solver against the brute-force oracle.
    OracleCheck(OracleArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario JSON (a config or a previous run's manifest.json).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario: "baseline" or "chaser".
    #[arg(long)]
    preset: Option<String>,
    /// Override the operating mode (baseline | ideal_chaser).
    #[arg(long)]
    mode: Option<String>,
    /// Override the number of trials.
    #[arg(long)]
    trials: Option<u32>,
    /// Override the slots per trial.
    #[arg(long)]
    slots: Option<u32>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl ScenarioArgs {
    fn resolve(&self) -> Result<ScenarioConfig, ConfigError> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), None) => load_config(path)?,
            (None, Some(name)) => preset(name)?,
            (None, None) => {
                return Err(ConfigError::Invalid(
                    "either --config or --preset is required".into(),
                ))
            }
            (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
        };
        if let Some(mode) = &self.mode {
            cfg.mode = match mode.as_str() {
                "baseline" => slicesim::solver::Mode::Baseline,
                "ideal_chaser" => slicesim::solver::Mode::IdealChaser,
                other => {
                    return Err(ConfigError::Invalid(format!(
                        "unknown mode '{other}' (expected baseline | ideal_chaser)"
                    )))
                }
            };
        }
        if let Some(trials) = self.trials {
            cfg.sim.trials = trials;
        }
        if let Some(slots) = self.slots {
            cfg.sim.slots_per_trial = slots;
        }
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Output directory for the result bundle.
    #[arg(long, default_value = "slicesim-out")]
    out: PathBuf,
    /// Also write the per-slot trace (slot_trace.csv).
    #[arg(long)]
    trace: bool,
    /// Worker threads for trial parallelism (default: rayon's choice).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct SolveArgs {
    /// Slot snapshot JSON file, or "-" for stdin.
    #[arg(long)]
    snapshot: String,
    /// Print only the JSON form.
    #[arg(long)]
    json_only: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Knob to sweep: beta_scale | lambda_b_scale | lambda_p_scale |
    /// p_cap_scale | b_cap_scale.
    #[arg(long)]
    knob: String,
    /// Comma-separated knob values, e.g. "0.5,1,2".
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
    /// Output directory.
    #[arg(long, default_value = "slicesim-out")]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    /// Number of random slot instances.
    #[arg(long, default_value_t = 100)]
    count: usize,
    /// Seed for instance generation.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Grid points per CQI in the oracle search.
    #[arg(long, default_value_t = 10_000)]
    grid: usize,
    /// Slices per instance.
    #[arg(long, default_value_t = 3)]
    slices: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::OracleCheck(args) => cmd_oracle_check(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let cfg = args.scenario.resolve()?;
    let result = match args.workers {
        Some(w) => run_campaign_with_workers(&cfg, w),
        None => run_campaign(&cfg),
    };
    let names = cfg.slice_names();

    output::write_file(
        &args.out.join("manifest.json"),
        &output::manifest_json(&cfg),
    )?;
    output::write_file(
        &args.out.join("kpi_summary.csv"),
        &output::kpi_summary_csv(&result.report),
    )?;
    output::write_file(
        &args.out.join("kpi_summary.json"),
        &output::kpi_summary_json(&result.report),
    )?;
    if args.trace {
        output::write_file(
            &args.out.join("slot_trace.csv"),
            &output::slot_trace_csv(&result.trials, &names),
        )?;
    }

    let feasibility = result
        .report
        .feasibility_rate
        .map(|s| s.mean)
        .unwrap_or(f64::NAN);
    println!(
        "campaign complete: {} trials x {} slots, feasibility_rate {:.4}",
        cfg.sim.trials, cfg.sim.slots_per_trial, feasibility
    );
    println!("results in {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

/// Builds the slot problem for a snapshot: effective SE, power slopes, and
/// admissibility masks derived from the per-slice gains.
fn snapshot_problem(snap: &SolveSnapshot) -> Result<SlotProblem, ConfigError> {
    let table = match &snap.cqi_table {
        None => slicesim::phy::CqiTable::nr_default(),
        Some(entries) => slicesim::phy::CqiTable::from_entries(entries.clone())
            .map_err(|e| ConfigError::Invalid(e.to_string()))?,
    };
    let link = snap.link.to_link_budget();
    let slices = snap
        .slices
        .iter()
        .map(|s| {
            let h = 10f64.powf(s.h_db / 10.0);
            let se = effective_se_table(&table, &s.fbl);
            let se_bps: [f64; NUM_CQI] = std::array::from_fn(|m| se[m] * link.prb_width_hz);
            let alpha = power_slope_table(h, &table, &link)
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
            let usable = feasibility_mask(&alpha, link.psd_min_w_per_prb, s.b_cap_prb, s.p_cap_w);
            Ok(SliceProblem {
                se_eff_bps_per_prb: se_bps,
                alpha_w_per_prb: alpha,
                usable,
                b_cap_prb: s.b_cap_prb,
                p_cap_w: s.p_cap_w,
                r_min_bps: s.r_min_bps,
                r_ideal_bps: s.r_ideal_bps,
                beta: s.beta,
                psd_min_w_per_prb: link.psd_min_w_per_prb,
            })
        })
        .collect::<Result<Vec<_>, ConfigError>>()?;
    Ok(SlotProblem {
        slices,
        weights: snap.weights,
    })
}

fn print_allocation_table(snap: &SolveSnapshot, alloc: &Allocation) {
    println!("status: {}", alloc.status.as_str());
    println!(
        "{:<10} {:>5} {:>12} {:>12} {:>14} {:>14} {:>14}",
        "slice", "cqi", "bw_prb", "power_w", "rate_bps", "deviation", "slack"
    );
    for (s, a) in snap.slices.iter().zip(&alloc.slices) {
        println!(
            "{:<10} {:>5} {:>12.6} {:>12.6} {:>14.3} {:>14} {:>14}",
            s.name,
            a.cqi.map(|c| c.to_string()).unwrap_or_else(|| "-".into()),
            a.bw_prb,
            a.power_w,
            a.rate_bps,
            a.deviation_bps
                .map(|v| format!("{v:.3}"))
                .unwrap_or_else(|| "-".into()),
            a.slack_bps
                .map(|v| format!("{v:.3}"))
                .unwrap_or_else(|| "-".into()),
        );
    }
}

fn cmd_solve(args: SolveArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let text = if args.snapshot == "-" {
        use std::io::Read;
        let mut buf = String::new();
        std::io::stdin().read_to_string(&mut buf)?;
        buf
    } else {
        std::fs::read_to_string(Path::new(&args.snapshot)).map_err(|e| ConfigError::Io {
            path: args.snapshot.clone(),
            source: e,
        })?
    };
    let snap: SolveSnapshot = serde_json::from_str(&text).map_err(|e| ConfigError::Parse {
        path: args.snapshot.clone(),
        source: e,
    })?;
    snap.validate()?;
    let problem = snapshot_problem(&snap)?;
    let alloc = solve_slot(&problem, snap.mode);
    if !args.json_only {
        print_allocation_table(&snap, &alloc);
    }
    println!("{}", serde_json::to_string_pretty(&alloc)?);
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let cfg = args.scenario.resolve()?;
    let knob: SweepKnob = args.knob.parse().map_err(ConfigError::Invalid)?;
    let results = run_sweep(&cfg, knob, &args.values);
    output::write_file(
        &args.out.join("sweep_table.csv"),
        &output::sweep_table_csv(knob.as_str(), &results),
    )?;
    output::write_file(
        &args.out.join("manifest.json"),
        &output::manifest_json(&cfg),
    )?;
    println!(
        "sweep complete: {} values of {}, results in {}",
        results.len(),
        knob.as_str(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_oracle_check(args: OracleArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    if args.count < 1 {
        return Err(Box::new(ConfigError::Invalid(
            "--count must be >= 1".into(),
        )));
    }
    if args.slices < 1 {
        return Err(Box::new(ConfigError::Invalid(
            "--slices must be >= 1".into(),
        )));
    }
    const TOL: f64 = 1e-9;
    let mut rng = ChaCha12Rng::seed_from_u64(args.seed);
    let mut max_gap: f64 = 0.0;
    let mut feasible = 0usize;
    let mut infeasible = 0usize;
    let mut failures = 0usize;

    for i in 0..args.count {
        let problem = random_problem(&mut rng, args.slices);
        match solve_phase1(&problem) {
            Ok(p1) => {
                feasible += 1;
                let solver1 = objective(&problem, &p1, false);
                let p2 = solve_slot(&problem, slicesim::solver::Mode::IdealChaser);
                let solver2 = objective(&problem, &p2, true);
                for (phase, solver_cost) in [(Phase::One, solver1), (Phase::Two, solver2)] {
                    match brute_force_oracle(&problem, phase, args.grid) {
                        Some((oracle_cost, _)) => {
                            let scale = oracle_cost.abs().max(1.0);
                            let gap = (solver_cost - oracle_cost) / scale;
                            max_gap = max_gap.max(gap.abs());
                            if gap > TOL {
                                failures += 1;
                                eprintln!(
                                    "instance {i} phase {phase:?}: oracle beat the solver \
                                     ({oracle_cost} < {solver_cost})"
                                );
                            }
                        }
                        None => {
                            failures += 1;
                            eprintln!("instance {i} phase {phase:?}: oracle found no optimum");
                        }
                    }
                }
            }
            Err(_) => {
                infeasible += 1;
                if brute_force_oracle(&problem, Phase::One, args.grid).is_some() {
                    failures += 1;
                    eprintln!("instance {i}: solver infeasible but oracle found a point");
                    continue;
                }
                // both infeasible: shortfalls must agree
                let fb = solve_slot(&problem, slicesim::solver::Mode::Baseline);
                let total: f64 = fb.slices.iter().filter_map(|a| a.slack_bps).sum();
                let expected = fallback_shortfall_oracle(&problem);
                let gap = (total - expected).abs() / expected.abs().max(1.0);
                max_gap = max_gap.max(gap);
                if gap > TOL {
                    failures += 1;
                    eprintln!("instance {i}: fallback shortfall mismatch ({total} vs {expected})");
                }
            }
        }
    }

    println!(
        "oracle-check: {} instances ({} feasible, {} infeasible), max relative gap {:.3e}",
        args.count, feasible, infeasible, max_gap
    );
    if failures > 0 {
        eprintln!("oracle-check FAILED on {failures} instance/phase pairs");
        Ok(ExitCode::from(3))
    } else {
        println!("oracle-check PASS");
        Ok(ExitCode::SUCCESS)
    }
}
