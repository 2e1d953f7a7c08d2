//! Files written by the command line.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::agent::Agent;
use crate::config::SimConfig;
use crate::error::Result;
use crate::experiments::ExperimentOutput;
use crate::metrics::{self, format_value};
use crate::sim::SimResult;

pub const RUN_HEADER: [&str; 6] = ["step", "P", "V", "S", "fundamental", "mean_nav"];
pub const EVENTS_HEADER: [&str; 10] = [
    "run",
    "step",
    "agent",
    "side",
    "quantity",
    "target_ratio",
    "realized_ratio",
    "filled",
    "limit_price",
    "nav_change",
];

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// One row per reported step.
pub fn write_run_csv(path: &Path, result: &SimResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(RUN_HEADER)?;
    for k in 0..result.len() {
        w.write_record([
            k.to_string(),
            format_value(result.prices[k]),
            result.volumes[k].to_string(),
            format_value(result.spreads[k]),
            format_value(result.fundamentals[k]),
            format_value(result.mean_nav(k)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub run_index: u64,
    pub master_seed: u64,
    pub steps: usize,
    pub agents: usize,
    pub hft_agents: usize,
    pub shares_outstanding: u64,
    pub final_price: Option<f64>,
    pub mean_abs_log_return: Option<f64>,
    pub excess_kurtosis: Option<f64>,
    pub mean_spread_pct: Option<f64>,
    pub mean_volume_bps: Option<f64>,
    pub crashes: usize,
    pub crash_steps: Vec<usize>,
    pub bankruptcies: usize,
    pub mean_initial_nav: Option<f64>,
    pub mean_terminal_nav: f64,
    pub metaorders: usize,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

pub fn summarize(config: &SimConfig, result: &SimResult) -> RunSummary {
    let returns = metrics::log_returns(&result.prices).unwrap_or_default();
    let abs: Vec<f64> = returns.iter().map(|r| r.abs()).collect();
    RunSummary {
        run_index: result.run_index,
        master_seed: config.master_seed,
        steps: result.len(),
        agents: result.terminal_navs.len(),
        hft_agents: result.hft_agents,
        shares_outstanding: result.shares_outstanding,
        final_price: result.prices.last().copied(),
        mean_abs_log_return: finite(metrics::mean(&abs)),
        excess_kurtosis: finite(metrics::excess_kurtosis(&returns)),
        mean_spread_pct: finite(crate::experiments::mean_spread_percent(result)),
        mean_volume_bps: finite(metrics::mean(&metrics::volume_bps(
            &result.volumes,
            result.shares_outstanding,
        ))),
        crashes: result.crash_steps.len(),
        crash_steps: result.crash_steps.clone(),
        bankruptcies: result.reported_bankruptcies(),
        mean_initial_nav: finite(metrics::mean(&result.initial_navs)),
        mean_terminal_nav: result.mean_terminal_nav(),
        metaorders: result.metaorder_events.len(),
    }
}

pub fn write_summary_json(path: &Path, summary: &RunSummary) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, summary)?;
    std::io::Write::write_all(&mut w, b"\n")?;
    Ok(())
}

/// Preference tables of every agent, long format.
pub fn write_policies_csv(path: &Path, agents: &[Agent]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["agent", "table", "state", "action", "preference"])?;
    for agent in agents {
        for (name, policy) in [("forecast", &agent.forecaster), ("trade", &agent.trader)] {
            for s in 0..policy.num_states() {
                for (a, h) in policy.preferences(s).iter().enumerate() {
                    w.write_record([
                        agent.id.to_string(),
                        name.to_string(),
                        s.to_string(),
                        a.to_string(),
                        format_value(*h),
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `<name>_results.csv`, `<name>_runlengths.csv` and, when there are
/// events, `<name>_events.csv`. Returns the paths written.
pub fn write_experiment(dir: &Path, name: &str, output: &ExperimentOutput) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let results = dir.join(format!("{name}_results.csv"));
    output.table.write_results(create(&results)?)?;
    written.push(results);
    let runlengths = dir.join(format!("{name}_runlengths.csv"));
    output.table.write_run_lengths(create(&runlengths)?)?;
    written.push(runlengths);
    if !output.events.is_empty() {
        let path = dir.join(format!("{name}_events.csv"));
        let taus: Vec<usize> = output.events[0].impacts.iter().map(|(t, _)| *t).collect();
        let mut w = csv::Writer::from_writer(create(&path)?);
        let mut header: Vec<String> = EVENTS_HEADER.iter().map(|s| s.to_string()).collect();
        header.extend(taus.iter().map(|t| format!("impact_{t}")));
        w.write_record(&header)?;
        for r in &output.events {
            let e = &r.event;
            let side = match e.side {
                crate::book::Side::Bid => "buy",
                crate::book::Side::Ask => "sell",
            };
            let mut row = vec![
                r.run.to_string(),
                e.step.to_string(),
                e.agent.to_string(),
                side.to_string(),
                e.quantity.to_string(),
                format_value(e.target_ratio),
                format_value(e.realized_ratio),
                e.filled.to_string(),
                format_value(e.limit_price),
                format_value(e.nav_after - e.nav_before),
            ];
            row.extend(r.impacts.iter().map(|(_, v)| format_value(*v)));
            w.write_record(&row)?;
        }
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}
