use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use flexprice_cli::config::{self, CostField, ModeField, Overrides};
use flexprice_cli::error::CliError;
use flexprice_cli::runner;

/// Price-signal generation through a flexibility function, with a
/// storage-tank controller driven by the generated penalty.
#[derive(Parser)]
#[command(name = "flexprice", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate the flexibility function response to a price profile.
    SimulateFf(CommonArgs),
    /// Generate an optimal price signal for the configured scenario.
    OptimizePrice(CommonArgs),
    /// Run the storage-tank controller against a penalty signal.
    RunMpc(CommonArgs),
    /// Run all four optimizer/cost combinations and report metrics.
    Compare(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override for all seeded components.
    #[arg(long)]
    seed: Option<u64>,
    /// Optimizer override: sequential | simultaneous.
    #[arg(long)]
    mode: Option<String>,
    /// Cost-kind override: absolute | quadratic.
    #[arg(long)]
    cost: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let args = match &cli.cmd {
        Cmd::SimulateFf(a) | Cmd::OptimizePrice(a) | Cmd::RunMpc(a) | Cmd::Compare(a) => a,
    };

    let mut cfg = config::load_config(&args.config)?;
    let overrides = Overrides {
        seed: args.seed,
        mode: args.mode.as_deref().map(ModeField::parse_flag).transpose()?,
        cost: args.cost.as_deref().map(CostField::parse_flag).transpose()?,
    };
    cfg.apply_overrides(&overrides);

    let out = runner::out_dir(args.out.clone(), cfg.output_dir.as_ref());
    let base_dir = args
        .config
        .parent()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."));
    let resolved = config::resolve(cfg, &base_dir)?;

    match cli.cmd {
        Cmd::SimulateFf(_) => {
            let s = runner::cmd_simulate_ff(&resolved, &out)?;
            println!(
                "simulate-ff: {} hours ({}), final state {:.6}, {} state clamps, {} demand floors -> {}",
                s.hours,
                if s.stochastic { "stochastic" } else { "deterministic" },
                s.final_state,
                s.state_clamps,
                s.demand_floors,
                out.display()
            );
        }
        Cmd::OptimizePrice(_) => {
            let s = runner::cmd_optimize_price(&resolved, &out)?;
            println!(
                "optimize-price {}/{}: objective {:.6e}, sse {:.6e}, sum_penalty {:.4}, \
                 {} iterations, {} clamps, {} ms -> {}",
                s.mode.name(),
                s.cost.name(),
                s.objective,
                s.sse,
                s.sum_penalty,
                s.iterations,
                s.clamp_events,
                s.wall_time_ms,
                out.display()
            );
        }
        Cmd::RunMpc(_) => {
            let s = runner::cmd_run_mpc(&resolved, &out)?;
            println!(
                "run-mpc: {} hours, penalty-weighted cost {:.4}, penalty/power rank corr {:.4}, \
                 max kkt {:.2e}, max slack {:.2e}, {} ms -> {}",
                s.sim_hours,
                s.total_penalty_cost,
                s.spearman_penalty_power,
                s.max_kkt_residual,
                s.max_slack,
                s.wall_time_ms,
                out.display()
            );
        }
        Cmd::Compare(_) => {
            let report = runner::cmd_compare(&resolved, &out)?;
            println!("compare -> {}", out.display());
            println!("mode,cost,sse,sum_penalty,iterations,clamp_events,wall_time_ms");
            for row in &report.rows {
                println!(
                    "{},{},{:.6e},{:.4},{},{},{}",
                    row.mode.name(),
                    row.cost.name(),
                    row.sse,
                    row.sum_penalty,
                    row.iterations,
                    row.clamp_events,
                    row.wall_time_ms
                );
            }
        }
    }
    Ok(())
}
