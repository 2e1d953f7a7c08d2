use super::{market_study, Experiment, ExperimentOutput, ExperimentSpec};
use crate::config::SimConfig;
use crate::error::Result;

/// Volatility lags: two weeks, three months, one year.
pub const TICK_VOLATILITY_LAGS: [usize; 3] = [10, 63, 281];

/// Varies the number of decimal digits of transaction prices.
pub struct TickSizeExperiment;

impl TickSizeExperiment {
    pub fn points(spec: &ExperimentSpec) -> Vec<(f64, SimConfig)> {
        spec.settings
            .tick_grid
            .iter()
            .map(|&digits| {
                let config = SimConfig { tick_digits: digits, ..spec.base.clone() };
                (f64::from(digits), config)
            })
            .collect()
    }
}

impl Experiment for TickSizeExperiment {
    fn name(&self) -> &'static str {
        "tick"
    }

    fn description(&self) -> &'static str {
        "price resolution from 0 to 5 decimal digits"
    }

    fn run(&self, spec: &ExperimentSpec) -> Result<ExperimentOutput> {
        market_study(
            &Self::points(spec),
            spec.settings.runs_per_point,
            spec.jobs,
            &TICK_VOLATILITY_LAGS,
        )
    }
}
