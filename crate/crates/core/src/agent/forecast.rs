//! Price forecasting tools, blended with the agent's fundamental belief.

use super::state::{ForecastAction, ForecastTool, Level};

/// Chartist estimate of the price `horizon` steps after the last entry of
/// `window`.
pub fn chartist_estimate(tool: ForecastTool, window: &[f64], horizon: usize) -> f64 {
    assert!(!window.is_empty(), "forecast window must not be empty");
    let n = window.len() as f64;
    let mean = window.iter().sum::<f64>() / n;
    let last = *window.last().unwrap();
    match tool {
        ForecastTool::Mean => mean,
        ForecastTool::Revert => 2.0 * mean - last,
        ForecastTool::Trend => {
            if window.len() < 2 {
                return last;
            }
            // least squares on x = 0..n-1, evaluated at x = n-1+horizon
            let x_mean = (n - 1.0) / 2.0;
            let (mut sxy, mut sxx) = (0.0, 0.0);
            for (i, &y) in window.iter().enumerate() {
                let dx = i as f64 - x_mean;
                sxy += dx * (y - mean);
                sxx += dx * dx;
            }
            let slope = sxy / sxx;
            mean + slope * (n - 1.0 + horizon as f64 - x_mean)
        }
    }
}

/// Number of past prices the chosen lag level looks at, before capping.
pub fn lag_length(lag: Level, horizon: usize) -> usize {
    match lag {
        Level::Low => horizon.div_ceil(2),
        Level::Mid => horizon,
        Level::High => 2 * horizon,
    }
    .max(1)
}

/// Share of the fundamental belief in the blended forecast.
pub fn fundamental_weight(weight: Level, reflexivity: f64) -> f64 {
    reflexivity
        * match weight {
            Level::Low => 0.25,
            Level::Mid => 0.5,
            Level::High => 0.75,
        }
}

/// Forecast of the price `horizon` steps ahead.
///
/// `prices` is the observed history ending at the current step. The lag is
/// capped by `memory` and by the available history. The result is floored at
/// one tick.
pub fn forecast(
    action: ForecastAction,
    prices: &[f64],
    belief: f64,
    horizon: usize,
    memory: usize,
    reflexivity: f64,
    tick: f64,
) -> f64 {
    let lag = lag_length(action.lag, horizon).min(memory.max(1)).min(prices.len());
    let chartist = chartist_estimate(action.tool, &prices[prices.len() - lag..], horizon);
    let k = fundamental_weight(action.fundamental_weight, reflexivity);
    ((1.0 - k) * chartist + k * belief).max(tick)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::state::FORECAST_ACTIONS;

    #[test]
    fn trend_extrapolates_least_squares_line() {
        let v = chartist_estimate(ForecastTool::Trend, &[90.0, 95.0, 100.0], 1);
        assert!((v - 105.0).abs() < 1e-12);
        let v = chartist_estimate(ForecastTool::Trend, &[90.0, 95.0, 100.0], 4);
        assert!((v - 120.0).abs() < 1e-12);
    }

    #[test]
    fn revert_and_mean() {
        assert!((chartist_estimate(ForecastTool::Revert, &[90.0, 95.0, 100.0], 1) - 90.0).abs() < 1e-12);
        assert!((chartist_estimate(ForecastTool::Mean, &[90.0, 95.0, 100.0], 1) - 95.0).abs() < 1e-12);
    }

    #[test]
    fn lag_menu() {
        assert_eq!(lag_length(Level::Low, 7), 4);
        assert_eq!(lag_length(Level::Mid, 7), 7);
        assert_eq!(lag_length(Level::High, 7), 14);
    }

    #[test]
    fn constant_market_forecasts_itself() {
        let prices = vec![100.0; 300];
        for a in 0..FORECAST_ACTIONS {
            let action = ForecastAction::from_index(a);
            for &(horizon, memory, rho) in &[(5, 5, 0.0), (30, 200, 0.4), (126, 50, 1.0)] {
                let f = forecast(action, &prices, 100.0, horizon, memory, rho, 0.01);
                assert!((f - 100.0).abs() < 1e-9, "{action:?} -> {f}");
            }
        }
    }

    #[test]
    fn blending_and_floor() {
        let action = ForecastAction {
            tool: ForecastTool::Mean,
            lag: Level::Mid,
            fundamental_weight: Level::Mid,
        };
        // k = 0.8 * 0.5 = 0.4
        let f = forecast(action, &[100.0, 100.0], 110.0, 2, 10, 0.8, 0.01);
        assert!((f - 104.0).abs() < 1e-12);
        let crash = ForecastAction { tool: ForecastTool::Trend, ..action };
        let f = forecast(crash, &[10.0, 1.0], 0.5, 5, 10, 0.0, 0.01);
        assert_eq!(f, 0.01);
    }
}
