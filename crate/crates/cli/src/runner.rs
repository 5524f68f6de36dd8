//! Command implementations: end-to-end runs from a resolved scenario to
//! CSV artifacts on disk.
//!
//! Reported metrics are always recomputed from the rendered CSV fields,
//! so every report row can be reproduced exactly from the emitted files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use flexprice_core::ff::{rollout, RolloutMode};
use flexprice_core::mpc::{receding_horizon_run, ClosedLoopRun};
use flexprice_core::opt::{
    sequential_optimize, simultaneous_optimize, voltage_of_demand, CostKind, OptMode,
    PriceSolution,
};
use flexprice_core::series::{Series, SeriesLabel};

use crate::config::{resolved_dump, Resolved};
use crate::csvfmt::{column, parse_f64, read_csv, sig9, write_csv};
use crate::error::CliError;
use crate::stats::spearman;

/// One row of the compare report.
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub mode: OptMode,
    pub cost: CostKind,
    pub sse: f64,
    pub sum_penalty: f64,
    pub wall_time_ms: u128,
    pub iterations: u64,
    pub clamp_events: u32,
}

/// Outcome of `compare`: the metrics table and the emitted-file manifest.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub rows: Vec<ReportRow>,
    pub manifest: Vec<String>,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SimSummary {
    pub hours: usize,
    pub stochastic: bool,
    pub final_state: f64,
    pub state_clamps: u32,
    pub demand_floors: u32,
}

#[derive(Debug, Clone)]
pub struct OptimizeSummary {
    pub mode: OptMode,
    pub cost: CostKind,
    pub objective: f64,
    pub sse: f64,
    pub sum_penalty: f64,
    pub iterations: u64,
    pub clamp_events: u32,
    pub wall_time_ms: u128,
}

#[derive(Debug, Clone)]
pub struct MpcSummary {
    pub sim_hours: usize,
    pub total_penalty_cost: f64,
    pub spearman_penalty_power: f64,
    pub max_kkt_residual: f64,
    pub max_slack: f64,
    pub iterations: u64,
    pub wall_time_ms: u128,
}

fn write_resolved(r: &Resolved, out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out)?;
    fs::write(out.join("resolved.toml"), resolved_dump(&r.config)?)?;
    Ok(())
}

fn solve_one(r: &Resolved, mode: OptMode, cost: CostKind) -> Result<PriceSolution<f64>, CliError> {
    let res = match mode {
        OptMode::Sequential => sequential_optimize(
            r.x0,
            &r.baseline,
            &r.demand_ref,
            &r.flex,
            cost,
            &r.opt_cfg,
            r.ancillary.as_ref(),
        ),
        OptMode::Simultaneous => simultaneous_optimize(
            r.x0,
            &r.baseline,
            &r.demand_ref,
            &r.flex,
            cost,
            &r.opt_cfg,
            r.ancillary.as_ref(),
        ),
    };
    res.map_err(|e| CliError::solver(format!("{}/{}: {e}", mode.name(), cost.name())))
}

/// Render the per-hour solution table; the voltage column appears only
/// when the scenario configures the ancillary map.
fn render_run_rows(r: &Resolved, sol: &PriceSolution<f64>) -> (Vec<&'static str>, Vec<Vec<String>>) {
    let mut header = vec!["hour", "price", "baseline", "demand_ref", "demand_pred"];
    if let Some(anc) = &r.ancillary {
        let _ = anc;
        header.push("voltage");
    }
    let rows = (0..sol.prices.len())
        .map(|t| {
            let mut row = vec![
                (sol.prices.start_hour() + t as i64).to_string(),
                sig9(sol.prices.at(t)),
                sig9(r.baseline.at(t)),
                sig9(r.demand_ref.at(t)),
                sig9(sol.demand.at(t)),
            ];
            if let Some(anc) = &r.ancillary {
                row.push(sig9(voltage_of_demand(sol.demand.at(t), anc)));
            }
            row
        })
        .collect();
    (header, rows)
}

/// Metrics recomputed from rendered fields: the report matches what a
/// consumer of the CSV would compute.
fn metrics_from_rows(rows: &[Vec<String>]) -> Result<(f64, f64), CliError> {
    let mut sse = 0.0;
    let mut sum_penalty = 0.0;
    for row in rows {
        let price = parse_f64(&row[1])?;
        let d_ref = parse_f64(&row[3])?;
        let d_pred = parse_f64(&row[4])?;
        sse += (d_pred - d_ref) * (d_pred - d_ref);
        sum_penalty += price;
    }
    Ok((sse, sum_penalty))
}

/// Simulate the flexibility function against the configured (or nominal)
/// price profile; stochastic when the scenario carries state noise.
pub fn cmd_simulate_ff(r: &Resolved, out: &Path) -> Result<SimSummary, CliError> {
    write_resolved(r, out)?;
    let price = match &r.price {
        Some(p) => p.clone(),
        None => Series::new(
            SeriesLabel::Price,
            0,
            vec![r.flex.ref_price; r.baseline.len()],
        )
        .map_err(|e| CliError::config(format!("profiles.price: {e}")))?,
    };
    let stochastic = r.flex.noise_sigma > 0.0;
    let mode = if stochastic {
        RolloutMode::Stochastic {
            seed: r.opt_cfg.seed,
        }
    } else {
        RolloutMode::Deterministic
    };
    let roll = rollout(r.x0, &price, &r.baseline, &r.flex, mode)
        .map_err(|e| CliError::solver(format!("simulate-ff: {e}")))?;

    let rows: Vec<Vec<String>> = (0..price.len())
        .map(|t| {
            vec![
                (price.start_hour() + t as i64).to_string(),
                sig9(price.at(t)),
                sig9(r.baseline.at(t)),
                sig9(roll.demand.at(t)),
                sig9(roll.states[t + 1].x()),
            ]
        })
        .collect();
    write_csv(
        &out.join("sim.csv"),
        &["hour", "price", "baseline", "demand_pred", "state"],
        &rows,
    )?;

    Ok(SimSummary {
        hours: price.len(),
        stochastic,
        final_state: roll.states[price.len()].x(),
        state_clamps: roll.state_clamps,
        demand_floors: roll.demand_floors,
    })
}

/// Solve the configured optimizer/cost combination and emit its run CSV.
pub fn cmd_optimize_price(r: &Resolved, out: &Path) -> Result<OptimizeSummary, CliError> {
    write_resolved(r, out)?;
    let started = Instant::now();
    let sol = solve_one(r, r.mode, r.cost)?;
    let wall_time_ms = started.elapsed().as_millis();
    let (header, rows) = render_run_rows(r, &sol);
    write_csv(&out.join("run.csv"), &header, &rows)?;
    let (sse, sum_penalty) = metrics_from_rows(&rows)?;
    Ok(OptimizeSummary {
        mode: r.mode,
        cost: r.cost,
        objective: sol.objective,
        sse,
        sum_penalty,
        iterations: sol.total_iterations(),
        clamp_events: sol.clamp_events,
        wall_time_ms,
    })
}

/// All four optimizer/cost combinations on identical inputs.
pub fn cmd_compare(r: &Resolved, out: &Path) -> Result<RunReport, CliError> {
    write_resolved(r, out)?;
    let combos = [
        (OptMode::Sequential, CostKind::Absolute),
        (OptMode::Sequential, CostKind::Quadratic),
        (OptMode::Simultaneous, CostKind::Absolute),
        (OptMode::Simultaneous, CostKind::Quadratic),
    ];

    // Independent solves on identical inputs; run them concurrently and
    // assemble single-threaded afterwards.
    let results: Vec<Result<(PriceSolution<f64>, u128), CliError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = combos
            .iter()
            .map(|&(mode, cost)| {
                scope.spawn(move || {
                    let started = Instant::now();
                    let sol = solve_one(r, mode, cost)?;
                    Ok((sol, started.elapsed().as_millis()))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("solver thread panicked"))
            .collect()
    });

    let mut report = RunReport::default();
    report.manifest.push("resolved.toml".to_string());
    for (&(mode, cost), result) in combos.iter().zip(results) {
        let combo_dir = format!("{}_{}", mode.name(), cost.name());
        match result {
            Ok((sol, wall_time_ms)) => {
                let (header, rows) = render_run_rows(r, &sol);
                let rel = format!("{combo_dir}/run.csv");
                write_csv(&out.join(&rel), &header, &rows)?;
                let (sse, sum_penalty) = metrics_from_rows(&rows)?;
                report.manifest.push(rel);
                report.rows.push(ReportRow {
                    mode,
                    cost,
                    sse,
                    sum_penalty,
                    wall_time_ms,
                    iterations: sol.total_iterations(),
                    clamp_events: sol.clamp_events,
                });
            }
            Err(e) => report.failures.push(format!("{combo_dir}: {e}")),
        }
    }

    let report_rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|row| {
            vec![
                row.mode.name().to_string(),
                row.cost.name().to_string(),
                sig9(row.sse),
                sig9(row.sum_penalty),
                row.iterations.to_string(),
                row.clamp_events.to_string(),
            ]
        })
        .collect();
    write_csv(
        &out.join("report.csv"),
        &["mode", "cost", "sse", "sum_penalty", "iterations", "clamp_events"],
        &report_rows,
    )?;
    report.manifest.push("report.csv".to_string());
    report.manifest.sort();
    fs::write(out.join("manifest.txt"), report.manifest.join("\n") + "\n")?;

    if report.failures.is_empty() {
        Ok(report)
    } else {
        Err(CliError::solver(format!(
            "compare: {} combination(s) failed: {}",
            report.failures.len(),
            report.failures.join("; ")
        )))
    }
}

fn mpc_penalty(r: &Resolved, out: &Path) -> Result<Series<f64>, CliError> {
    let rm = r.mpc.as_ref().expect("caller checked");
    let needed = rm.sim_hours + rm.cfg.horizon;
    if let Some(p) = &rm.penalty {
        return Ok(p.clone());
    }
    if let Some(csv_path) = &rm.penalty_csv {
        let (header, rows) = read_csv(csv_path)?;
        let prices = column(&header, &rows, "price").map_err(|_| {
            CliError::config(format!(
                "mpc.penalty_csv: missing price signal in {}",
                csv_path.display()
            ))
        })?;
        if prices.len() < needed {
            return Err(CliError::config(format!(
                "mpc.penalty_csv: {} has {} price samples but the run needs {}",
                csv_path.display(),
                prices.len(),
                needed
            )));
        }
        return Series::new(SeriesLabel::Price, 0, prices[..needed].to_vec())
            .map_err(|e| CliError::config(format!("mpc.penalty_csv: {e}")));
    }
    // No explicit signal: generate one with the configured optimizer.
    if r.baseline.len() < needed {
        return Err(CliError::config(format!(
            "missing price signal: horizon_hours = {} cannot cover sim_hours + horizon = {}; \
             provide mpc.penalty, mpc.penalty_csv, or a longer horizon",
            r.baseline.len(),
            needed
        )));
    }
    let sol = solve_one(r, r.mode, r.cost)?;
    let prices = sol.prices.values()[..needed].to_vec();
    // Persist the generated signal next to the closed-loop outputs.
    let (header, rows) = render_run_rows(r, &sol);
    write_csv(&out.join("penalty_run.csv"), &header, &rows)?;
    Series::new(SeriesLabel::Price, 0, prices)
        .map_err(|e| CliError::solver(format!("penalty signal: {e}")))
}

/// Closed-loop tank control against the penalty signal.
pub fn cmd_run_mpc(r: &Resolved, out: &Path) -> Result<MpcSummary, CliError> {
    let rm = r
        .mpc
        .as_ref()
        .ok_or_else(|| CliError::config("run-mpc needs an [mpc] section"))?;
    write_resolved(r, out)?;
    let started = Instant::now();
    let penalty = mpc_penalty(r, out)?;
    let run = receding_horizon_run(rm.s0, &penalty, &rm.dist, &rm.model, &rm.cfg, rm.sim_hours)
        .map_err(|e| CliError::solver(format!("mpc: {e}")))?;
    let wall_time_ms = started.elapsed().as_millis();

    let rows: Vec<Vec<String>> = (0..rm.sim_hours)
        .map(|h| {
            vec![
                (run.start_hour + h as i64).to_string(),
                sig9(run.t_top[h]),
                sig9(run.t_bot[h]),
                sig9(run.power[h]),
                sig9(run.ambient[h]),
                sig9(run.load[h]),
                sig9(run.penalty[h]),
            ]
        })
        .collect();
    write_csv(
        &out.join("mpc.csv"),
        &["hour", "t_top", "t_bot", "power", "ambient", "load", "penalty"],
        &rows,
    )?;

    let summary = summarize_closed_loop(&run, &rows, rm.model.dt_hours, wall_time_ms)?;
    write_csv(
        &out.join("summary.csv"),
        &["metric", "value"],
        &[
            vec![
                "total_penalty_cost".to_string(),
                sig9(summary.total_penalty_cost),
            ],
            vec![
                "spearman_penalty_power".to_string(),
                sig9(summary.spearman_penalty_power),
            ],
            vec![
                "max_kkt_residual".to_string(),
                sig9(summary.max_kkt_residual),
            ],
            vec!["max_slack".to_string(), sig9(summary.max_slack)],
            vec!["solver_iterations".to_string(), summary.iterations.to_string()],
        ],
    )?;
    Ok(summary)
}

/// Cost and rank correlation recomputed from the rendered rows, matching
/// what the emitted CSV yields.
fn summarize_closed_loop(
    run: &ClosedLoopRun<f64>,
    rows: &[Vec<String>],
    dt_hours: f64,
    wall_time_ms: u128,
) -> Result<MpcSummary, CliError> {
    let mut power = Vec::with_capacity(rows.len());
    let mut penalty = Vec::with_capacity(rows.len());
    for row in rows {
        power.push(parse_f64(&row[3])?);
        penalty.push(parse_f64(&row[6])?);
    }
    let total: f64 = power
        .iter()
        .zip(&penalty)
        .map(|(&p, &pen)| pen * p * dt_hours)
        .sum();
    Ok(MpcSummary {
        sim_hours: rows.len(),
        total_penalty_cost: total,
        spearman_penalty_power: spearman(&penalty, &power),
        max_kkt_residual: run.max_kkt(),
        max_slack: run.max_slack,
        iterations: run.iterations,
        wall_time_ms,
    })
}

/// Pick the effective output directory.
pub fn out_dir(flag: Option<PathBuf>, config_dir: Option<&PathBuf>) -> PathBuf {
    flag.or_else(|| config_dir.cloned())
        .unwrap_or_else(|| PathBuf::from("out"))
}
