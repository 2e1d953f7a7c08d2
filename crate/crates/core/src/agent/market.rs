//! What an agent can observe about the market at a step.

use std::collections::BTreeMap;

use crate::fundamentals::FundamentalSeries;

/// Rolling σ/P series for every window some agent looks at, extended once per
/// step and shared by the whole population.
#[derive(Debug, Clone, Default)]
pub struct VolatilityCache {
    /// Entry `i` of a window's series belongs to step `i + window - 1`.
    windows: BTreeMap<usize, Vec<f64>>,
}

fn normalised_std(window: &[f64]) -> f64 {
    let n = window.len() as f64;
    let mean = window.iter().sum::<f64>() / n;
    let var = window.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / window[window.len() - 1]
}

impl VolatilityCache {
    pub fn register(&mut self, window: usize) {
        assert!(window >= 1);
        self.windows.entry(window).or_default();
    }

    /// Brings every registered series up to date with `prices`.
    pub fn extend(&mut self, prices: &[f64]) {
        for (&window, series) in self.windows.iter_mut() {
            let mut next_step = series.len() + window - 1;
            while next_step < prices.len() {
                series.push(normalised_std(&prices[next_step + 1 - window..=next_step]));
                next_step += 1;
            }
        }
    }

    /// Values for steps in `(t - memory, t]` where the window is defined.
    pub fn history(&self, window: usize, t: usize, memory: usize) -> &[f64] {
        let series = &self.windows[&window];
        if t + 1 < window {
            return &[];
        }
        let end = (t + 2 - window).min(series.len());
        let start = (t + 1).saturating_sub(memory.max(1)).max(window - 1) + 1 - window;
        &series[start.min(end)..end]
    }
}

/// Read-only market snapshot at the start of step `t`.
#[derive(Debug, Clone, Copy)]
pub struct MarketView<'a> {
    pub t: usize,
    /// Prices P(0..=t).
    pub prices: &'a [f64],
    /// Volumes V(0..=t); V(t) is what traded during step t-1.
    pub volumes: &'a [u64],
    /// Spread S(t).
    pub spread: f64,
    pub fundamental: &'a FundamentalSeries,
    pub volatility: &'a VolatilityCache,
    pub week_length: usize,
}

impl MarketView<'_> {
    pub fn price(&self) -> f64 {
        self.prices[self.t]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cache_matches_direct_computation() {
        let prices: Vec<f64> = (0..40).map(|i| 100.0 + ((i * 7) % 5) as f64).collect();
        let mut cache = VolatilityCache::default();
        cache.register(4);
        cache.extend(&prices[..10]);
        cache.extend(&prices);
        let hist = cache.history(4, 39, 5);
        assert_eq!(hist.len(), 5);
        for (k, v) in hist.iter().enumerate() {
            let t = 35 + k;
            assert!((v - normalised_std(&prices[t - 3..=t])).abs() < 1e-15);
        }
        assert_eq!(cache.history(4, 2, 10), &[] as &[f64]);
        assert_eq!(cache.history(4, 3, 10).len(), 1);
        assert_eq!(cache.history(4, 20, 1000).len(), 18);
    }

    #[test]
    fn constant_prices_have_zero_volatility() {
        let mut cache = VolatilityCache::default();
        cache.register(5);
        cache.extend(&[100.0; 20]);
        assert!(cache.history(5, 19, 100).iter().all(|&v| v == 0.0));
    }
}
