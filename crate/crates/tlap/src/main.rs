use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tlap::{load_config, load_scenario, oracle_grid_with, run, HarnessError, OracleConfig, ReportFile, RunConfig, RunSpec, SolverKind};
use tlap_core::PricingMode;

#[derive(Parser)]
#[command(name = "tlap", version, about = "Time and location aware mobile data pricing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario and write a JSON report.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum)]
        solver: SolverKind,
        #[arg(long, default_value = "time-location", value_parser = parse_mode)]
        mode: PricingMode,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON file with optional `spg`, `bcd`, `dycors` and `oracle` blocks.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Check a scenario file and list every violation.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Exhaustive grid search over prices.
    Oracle {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        #[arg(long, default_value = "time-location", value_parser = parse_mode)]
        mode: PricingMode,
        /// Zoom levels around the grid optimum, each with a ten times finer step.
        #[arg(long, default_value_t = 0)]
        refine: usize,
    },
}

fn parse_mode(s: &str) -> Result<PricingMode, String> {
    match s {
        "time-location" => Ok(PricingMode::TimeLocation),
        "time-only" => Ok(PricingMode::TimeOnly),
        "flat" => Ok(PricingMode::Flat),
        _ => Err(format!("unknown mode {s:?}; expected time-location, time-only or flat")),
    }
}

fn print_matrix(label: &str, rows: &[Vec<f64>]) {
    println!("{label} (rows = slots, columns = locations):");
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
        println!("  {}", cells.join("  "));
    }
}

fn print_summary(file: &ReportFile) {
    let r = &file.report;
    let s = &file.summary;
    println!("solver {} ({} pricing)", file.solver.name(), r.mode.name());
    println!("H              {:.9}  (flat {:.9})", s.objective, s.objective_flat);
    println!("total cost     {:.6}  (flat {:.6}, reduction {:.2}%)", s.total_cost, s.total_cost_flat, 100.0 * s.cost_reduction);
    println!("user payoff    {:.6}  (flat {:.6})", s.user_payoff, s.user_payoff_flat);
    println!("variance       {:.6}  (initial {:.6})", s.traffic_variance, s.traffic_variance_initial);
    println!("avg discount   {:.4}", s.average_discount);
    println!("excess demand  {:.6}", s.excess_demand);
    if let Some(t) = r.wall_time_secs {
        println!("wall time      {t:.3}s");
    }
    print_matrix("prices", &r.prices.matrix().to_rows());
}

fn execute(command: Command) -> Result<(), HarnessError> {
    match command {
        Command::Run {
            scenario,
            solver,
            mode,
            seed,
            out,
            config,
        } => {
            let config = match config {
                Some(path) => load_config(&path)?,
                None => RunConfig::default(),
            };
            let spec = RunSpec {
                scenario,
                solver,
                mode,
                config,
                out: out.clone(),
                seed,
            };
            let file = run(&spec)?;
            print_summary(&file);
            if let Some(out) = out {
                println!("report written to {}", out.display());
            }
        }
        Command::Validate { scenario } => {
            let s = load_scenario(&scenario)?;
            println!(
                "{}: valid ({} slots, {} locations, {} user types)",
                scenario.display(),
                s.horizon,
                s.locations,
                s.user_types.len()
            );
        }
        Command::Oracle {
            scenario,
            step,
            mode,
            refine,
        } => {
            let s = load_scenario(&scenario)?;
            let config = OracleConfig {
                step,
                refine,
                ..OracleConfig::default()
            };
            let g = oracle_grid_with(&s, mode, &config)?;
            println!("grid optimum H = {:.9} over {} points", g.objective, g.points);
            print_matrix("prices", &g.prices.matrix().to_rows());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
