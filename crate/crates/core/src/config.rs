//! Run and experiment configuration.
//!
//! Configuration files are TOML with two tables, `[simulation]` (one
//! [`SimConfig`]) and `[experiments]` ([`ExperimentSettings`]). Every key is
//! optional; missing keys take the defaults below, unknown keys are rejected.
//!
//! ```toml
//! [simulation]
//! num_agents = 500
//! horizon_steps = 2875
//! learning_steps = 1000
//! tick_digits = 2
//!
//! [experiments]
//! runs_per_point = 20
//! tick_grid = [0, 1, 2, 3, 4, 5]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported number of decimal digits in a price.
pub const MAX_TICK_DIGITS: u32 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Number of agents I.
    pub num_agents: usize,
    /// Reported steps T, after the learning phase.
    pub horizon_steps: usize,
    pub learning_steps: usize,
    /// Monte-Carlo repetitions S.
    pub num_runs: usize,
    /// Decimal digits allowed in prices (0 means integer prices).
    pub tick_digits: u32,
    /// Fraction p of high-frequency agents.
    pub hft_fraction: f64,
    pub metaorders_enabled: bool,
    pub broker_fee: f64,
    pub annual_risk_free: f64,
    pub annual_dividend: f64,
    pub year_length: usize,
    pub month_length: usize,
    pub week_length: usize,
    pub initial_price: f64,
    pub initial_cash: f64,
    pub initial_shares: u64,
    /// Fraction f of cash (long) or holdings (short) committed per order.
    pub order_fraction: f64,
    pub master_seed: u64,
    /// Per-step log-volatility of the fundamental value.
    pub fundamental_volatility: f64,
    /// Agents' belief bias is drawn from U(-max, +max).
    pub belief_max_bias: f64,
    /// Agents' observation delay is drawn from U{0, max}; defaults to one week.
    pub belief_max_delay: Option<usize>,
    /// Metaorder target ratios are drawn from U(0, max).
    pub metaorder_max_ratio: f64,
    /// Metaorder limit price sits this far through the current price.
    pub metaorder_limit_offset: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            num_agents: 500,
            horizon_steps: 2875,
            learning_steps: 1000,
            num_runs: 20,
            tick_digits: 2,
            hft_fraction: 0.0,
            metaorders_enabled: false,
            broker_fee: 0.001,
            annual_risk_free: 0.01,
            annual_dividend: 0.02,
            year_length: 281,
            month_length: 21,
            week_length: 5,
            initial_price: 100.0,
            initial_cash: 100_000.0,
            initial_shares: 1_000,
            order_fraction: 0.5,
            master_seed: 0,
            fundamental_volatility: 0.01,
            belief_max_bias: 0.05,
            belief_max_delay: None,
            metaorder_max_ratio: 0.15,
            metaorder_limit_offset: 0.05,
        }
    }
}

fn check_ratio(field: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::config(
            format!("simulation.{field}"),
            format!("must lie in [0, 1], got {value}"),
        ));
    }
    Ok(())
}

impl SimConfig {
    /// Small configuration used by the acceptance suite and quick checks.
    pub fn desk() -> Self {
        Self {
            num_agents: 100,
            horizon_steps: 1000,
            learning_steps: 300,
            num_runs: 5,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_agents < 2 {
            return Err(Error::config("simulation.num_agents", "at least two agents are required"));
        }
        if self.tick_digits > MAX_TICK_DIGITS {
            return Err(Error::config(
                "simulation.tick_digits",
                format!("must be in 0..={MAX_TICK_DIGITS}, got {}", self.tick_digits),
            ));
        }
        if !(self.week_length >= 1
            && self.week_length < self.month_length
            && self.month_length < self.year_length)
        {
            return Err(Error::config(
                "simulation.week_length",
                "calendar lengths must satisfy 1 <= week < month < year",
            ));
        }
        check_ratio("hft_fraction", self.hft_fraction)?;
        check_ratio("broker_fee", self.broker_fee)?;
        check_ratio("annual_risk_free", self.annual_risk_free)?;
        check_ratio("annual_dividend", self.annual_dividend)?;
        check_ratio("order_fraction", self.order_fraction)?;
        check_ratio("belief_max_bias", self.belief_max_bias)?;
        check_ratio("metaorder_max_ratio", self.metaorder_max_ratio)?;
        check_ratio("metaorder_limit_offset", self.metaorder_limit_offset)?;
        if self.order_fraction == 0.0 {
            return Err(Error::config("simulation.order_fraction", "must be positive"));
        }
        if !(self.initial_price.is_finite() && self.initial_price > 0.0) {
            return Err(Error::config("simulation.initial_price", "must be positive"));
        }
        if !(self.initial_cash.is_finite() && self.initial_cash >= 0.0) {
            return Err(Error::config("simulation.initial_cash", "must be non-negative"));
        }
        if self.initial_shares == 0 {
            return Err(Error::config(
                "simulation.initial_shares",
                "shares outstanding must be positive",
            ));
        }
        if !(self.fundamental_volatility.is_finite() && self.fundamental_volatility >= 0.0) {
            return Err(Error::config(
                "simulation.fundamental_volatility",
                "must be finite and non-negative",
            ));
        }
        Ok(())
    }

    pub fn total_steps(&self) -> usize {
        self.learning_steps + self.horizon_steps
    }

    /// Total shares outstanding Q_tot.
    pub fn shares_outstanding(&self) -> u64 {
        self.initial_shares * self.num_agents as u64
    }

    /// Smallest price increment.
    pub fn tick(&self) -> f64 {
        10f64.powi(-(self.tick_digits as i32))
    }

    pub fn step_risk_free(&self) -> f64 {
        per_step_rate(self.annual_risk_free, self.year_length)
    }

    pub fn step_dividend(&self) -> f64 {
        per_step_rate(self.annual_dividend, self.year_length)
    }

    pub fn max_belief_delay(&self) -> usize {
        self.belief_max_delay.unwrap_or(self.week_length)
    }

    /// Longest investment horizon any agent can draw.
    pub fn max_horizon(&self) -> usize {
        6 * self.month_length
    }
}

/// Geometric conversion of an annual rate into a per-step rate over a year of
/// `year_length` steps.
pub fn per_step_rate(annual: f64, year_length: usize) -> f64 {
    (1.0 + annual).powf(1.0 / year_length as f64) - 1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSettings {
    pub runs_per_point: usize,
    pub metaorder_runs: usize,
    pub tick_grid: Vec<u32>,
    pub frequency_grid: Vec<f64>,
    /// Volatility intervals at which metaorder impact is measured.
    pub impact_taus: Vec<usize>,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        Self {
            runs_per_point: 20,
            metaorder_runs: 150,
            tick_grid: vec![0, 1, 2, 3, 4, 5],
            frequency_grid: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
            impact_taus: vec![5, 10, 21, 63],
        }
    }
}

impl ExperimentSettings {
    pub fn validate(&self) -> Result<()> {
        if self.runs_per_point == 0 {
            return Err(Error::config("experiments.runs_per_point", "must be positive"));
        }
        if self.metaorder_runs == 0 {
            return Err(Error::config("experiments.metaorder_runs", "must be positive"));
        }
        if let Some(d) = self.tick_grid.iter().find(|&&d| d > MAX_TICK_DIGITS) {
            return Err(Error::config(
                "experiments.tick_grid",
                format!("digits must be in 0..={MAX_TICK_DIGITS}, got {d}"),
            ));
        }
        if let Some(p) = self.frequency_grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::config(
                "experiments.frequency_grid",
                format!("fractions must be in [0, 1], got {p}"),
            ));
        }
        if self.impact_taus.contains(&0) {
            return Err(Error::config("experiments.impact_taus", "intervals must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub simulation: SimConfig,
    pub experiments: ExperimentSettings,
}

impl ConfigFile {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text)?;
        file.validate()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.simulation.validate()?;
        self.experiments.validate()
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        SimConfig::default().validate().unwrap();
        SimConfig::desk().validate().unwrap();
        ExperimentSettings::default().validate().unwrap();
    }

    #[test]
    fn annual_rate_compounds_back() {
        let r = per_step_rate(0.01, 281);
        let mut cash = 100.0;
        for _ in 0..281 {
            cash *= 1.0 + r;
        }
        assert!((cash - 101.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_values_with_field_path() {
        let err = ConfigFile::from_toml_str("[simulation]\nnum_agents = 1\n").unwrap_err();
        assert!(err.to_string().contains("simulation.num_agents"), "{err}");
        let err = ConfigFile::from_toml_str("[simulation]\ntick_digits = 6\n").unwrap_err();
        assert!(err.to_string().contains("tick_digits"));
        let err = ConfigFile::from_toml_str("[simulation]\nhft_fraction = 1.5\n").unwrap_err();
        assert!(err.to_string().contains("hft_fraction"));
        let err = ConfigFile::from_toml_str("[simulation]\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
    }

    #[test]
    fn partial_file_takes_defaults() {
        let cfg = ConfigFile::from_toml_str("[simulation]\nnum_agents = 10\n").unwrap();
        assert_eq!(cfg.simulation.num_agents, 10);
        assert_eq!(cfg.simulation.horizon_steps, 2875);
        assert_eq!(cfg.experiments.impact_taus, vec![5, 10, 21, 63]);
        let again = ConfigFile::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(again, cfg);
    }
}
