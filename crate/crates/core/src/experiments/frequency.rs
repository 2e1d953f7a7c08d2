use super::{market_study, Experiment, ExperimentOutput, ExperimentSpec};
use crate::config::SimConfig;
use crate::error::Result;

/// Volatility lags: one week, one month, six months.
pub const FREQUENCY_VOLATILITY_LAGS: [usize; 3] = [5, 21, 126];

/// Varies the fraction of high-frequency agents.
pub struct FrequencyExperiment;

impl FrequencyExperiment {
    pub fn points(spec: &ExperimentSpec) -> Vec<(f64, SimConfig)> {
        spec.settings
            .frequency_grid
            .iter()
            .map(|&p| (p, SimConfig { hft_fraction: p, ..spec.base.clone() }))
            .collect()
    }
}

impl Experiment for FrequencyExperiment {
    fn name(&self) -> &'static str {
        "frequency"
    }

    fn description(&self) -> &'static str {
        "share of agents trading on horizons under two weeks"
    }

    fn run(&self, spec: &ExperimentSpec) -> Result<ExperimentOutput> {
        market_study(
            &Self::points(spec),
            spec.settings.runs_per_point,
            spec.jobs,
            &FREQUENCY_VOLATILITY_LAGS,
        )
    }
}
