//! The three regulatory studies, behind a name-keyed registry.
//!
//! Every experiment expands a base configuration into grid points, simulates
//! `runs` runs per point and reduces each run to rows of a [`MetricTable`].
//! Run `r` of every grid point uses the same seeds, so differences between
//! points come from the override alone.

mod frequency;
mod metaorder;
mod tick;

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::config::{ExperimentSettings, SimConfig};
use crate::error::{Error, Result};
use crate::metrics::{self, MetricTable};
use crate::sim::{run_simulation, SimResult};

pub use frequency::FrequencyExperiment;
pub use metaorder::{bucket_label, impact_rows, ImpactBasis, MetaorderExperiment, RHO_BUCKETS};
pub use tick::TickSizeExperiment;

/// Inputs shared by every experiment.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub base: SimConfig,
    pub settings: ExperimentSettings,
    /// Worker threads; `None` lets the pool decide.
    pub jobs: Option<usize>,
}

/// Per-event record written next to the metaorder table.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub run: u64,
    pub event: crate::sim::MetaorderEvent,
    /// (τ, I^P) for every τ of the ladder; NaN where undefined.
    pub impacts: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub table: MetricTable,
    pub events: Vec<EventRecord>,
}

pub trait Experiment: Send + Sync {
    /// Registry key, also the CLI subcommand and the output file prefix.
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn run(&self, spec: &ExperimentSpec) -> Result<ExperimentOutput>;
}

#[derive(Default)]
pub struct Registry {
    entries: BTreeMap<&'static str, Box<dyn Experiment>>,
}

impl Registry {
    pub fn with_builtins() -> Self {
        let mut r = Self::default();
        r.register(Box::new(TickSizeExperiment));
        r.register(Box::new(MetaorderExperiment));
        r.register(Box::new(FrequencyExperiment));
        r
    }

    /// Adds an experiment, replacing any previous one with the same name.
    pub fn register(&mut self, experiment: Box<dyn Experiment>) {
        self.entries.insert(experiment.name(), experiment);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Experiment> {
        self.entries
            .get(name)
            .map(|e| e.as_ref())
            .ok_or_else(|| Error::UnknownExperiment(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }
}

/// Simulates `runs` runs of every grid point and reduces each run with
/// `reduce`. Output order is (grid point, run) regardless of scheduling.
pub fn run_grid<T, F>(
    points: &[(f64, SimConfig)],
    runs: usize,
    jobs: Option<usize>,
    reduce: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(f64, u64, SimResult) -> Result<T> + Sync,
{
    let tasks: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|p| (0..runs as u64).map(move |r| (p, r)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Domain(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        tasks
            .par_iter()
            .map(|&(p, r)| {
                let (grid, config) = &points[p];
                log::info!("grid point {grid}, run {r}");
                let result = run_simulation(config, r)?;
                reduce(*grid, r, result)
            })
            .collect()
    })
}

/// Mean of 100·S/P over the reported steps.
pub fn mean_spread_percent(result: &SimResult) -> f64 {
    let pct: Vec<f64> = result
        .spreads
        .iter()
        .zip(&result.prices)
        .map(|(s, p)| 100.0 * s / p)
        .collect();
    metrics::mean(&pct)
}

pub fn mean_abs_log_return(result: &SimResult) -> Result<f64> {
    let r = metrics::log_returns(&result.prices)?;
    Ok(r.iter().map(|x| x.abs()).sum::<f64>() / r.len() as f64)
}

pub fn mean_volatility(result: &SimResult, lag: usize) -> f64 {
    metrics::mean(&metrics::rolling_volatility(&result.prices, lag))
}

/// Market statistics shared by the tick and frequency studies.
pub fn market_rows(
    table: &mut MetricTable,
    grid: f64,
    run: u64,
    result: &SimResult,
    volatility_lags: &[usize],
) -> Result<()> {
    let r = Some(run);
    table.push(grid, r, "mean_abs_log_return", mean_abs_log_return(result)?);
    for &lag in volatility_lags {
        table.push(grid, r, &format!("volatility_{lag}"), mean_volatility(result, lag));
    }
    table.push(grid, r, "mean_spread_pct", mean_spread_percent(result));
    let bps = metrics::volume_bps(&result.volumes, result.shares_outstanding);
    table.push(grid, r, "mean_volume_bps", metrics::mean(&bps));
    let volumes: Vec<f64> = result.volumes.iter().map(|&v| v as f64).collect();
    table.push(grid, r, "mean_volume", metrics::mean(&volumes));
    table.push(grid, r, "crashes", result.crash_steps.len() as f64);
    table.push(grid, r, "mean_terminal_nav", result.mean_terminal_nav());
    table.push(grid, r, "bankruptcies", result.reported_bankruptcies() as f64);
    table.add_run_lengths(grid, &metrics::run_lengths(&result.prices));
    Ok(())
}

/// Simulates the grid and reduces every run with [`market_rows`].
pub fn market_study(
    points: &[(f64, SimConfig)],
    runs: usize,
    jobs: Option<usize>,
    volatility_lags: &[usize],
) -> Result<ExperimentOutput> {
    let tables = run_grid(points, runs, jobs, |grid, run, result| {
        let mut t = MetricTable::default();
        market_rows(&mut t, grid, run, &result, volatility_lags)?;
        Ok(t)
    })?;
    let mut table = MetricTable::default();
    for t in tables {
        table.merge(t);
    }
    Ok(ExperimentOutput { table, events: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_lookup() {
        let r = Registry::with_builtins();
        assert_eq!(r.names().collect::<Vec<_>>(), ["frequency", "metaorder", "tick"]);
        assert_eq!(r.get("tick").unwrap().name(), "tick");
        assert!(matches!(r.get("nope"), Err(Error::UnknownExperiment(_))));
    }
}
