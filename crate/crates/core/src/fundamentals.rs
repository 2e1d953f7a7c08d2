//! Fundamental value of the stock and each agent's private view of it.
//!
//! The fundamental follows a geometric random walk. An agent never observes it
//! directly: its belief is the fundamental seen with a fixed delay and scaled by
//! a fixed multiplicative bias, so belief and fundamental stay cointegrated.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FundamentalSeries {
    values: Vec<f64>,
}

impl FundamentalSeries {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at `t`, clamped to the last generated step.
    pub fn at(&self, t: usize) -> f64 {
        self.values[t.min(self.values.len() - 1)]
    }
}

/// `length` values of a geometric random walk with per-step log-volatility
/// `volatility`, starting at `initial`.
pub fn generate_fundamental<R: Rng + ?Sized>(
    length: usize,
    initial: f64,
    volatility: f64,
    rng: &mut R,
) -> FundamentalSeries {
    let mut values = Vec::with_capacity(length.max(1));
    values.push(initial);
    for _ in 1..length {
        let z: f64 = rng.sample(StandardNormal);
        let prev = *values.last().unwrap();
        values.push(prev * (volatility * z).exp());
    }
    FundamentalSeries { values }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentBelief {
    /// Observation delay in steps.
    pub delay: usize,
    /// Multiplicative bias.
    pub bias: f64,
}

impl AgentBelief {
    /// The agent's estimate of the fundamental at `t`. Uses only values up to `t`.
    pub fn value(&self, series: &FundamentalSeries, t: usize) -> f64 {
        series.at(t.saturating_sub(self.delay)) * (1.0 + self.bias)
    }
}

/// Draws a delay from U{0, max_delay} and a bias from U(-max_bias, max_bias).
pub fn cointegrate<R: Rng + ?Sized>(max_delay: usize, max_bias: f64, rng: &mut R) -> AgentBelief {
    let delay = rng.random_range(0..=max_delay);
    let bias = if max_bias > 0.0 {
        rng.random_range(-max_bias..max_bias)
    } else {
        0.0
    };
    AgentBelief { delay, bias }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{run_key, stream, Stream};

    fn rng() -> crate::rng::SimRng {
        stream(run_key(11, 0), Stream::Fundamental)
    }

    #[test]
    fn zero_volatility_is_constant() {
        let s = generate_fundamental(50, 100.0, 0.0, &mut rng());
        assert!(s.values().iter().all(|&v| v == 100.0));
    }

    #[test]
    fn reproducible_from_seed() {
        let a = generate_fundamental(200, 100.0, 0.01, &mut rng());
        let b = generate_fundamental(200, 100.0, 0.01, &mut rng());
        assert_eq!(a, b);
        assert_eq!(a.values()[0], 100.0);
        assert!(a.values().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn log_increment_std_matches_volatility() {
        let s = generate_fundamental(10_000, 100.0, 0.01, &mut rng());
        let incs: Vec<f64> = s.values().windows(2).map(|w| (w[1] / w[0]).ln()).collect();
        let n = incs.len() as f64;
        let mean = incs.iter().sum::<f64>() / n;
        let sd = (incs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((sd - 0.01).abs() < 0.001, "sd = {sd}");
    }

    #[test]
    fn identity_and_biased_beliefs() {
        let s = generate_fundamental(100, 100.0, 0.02, &mut rng());
        let exact = AgentBelief { delay: 0, bias: 0.0 };
        for t in 0..100 {
            assert_eq!(exact.value(&s, t), s.values()[t]);
        }
        let biased = AgentBelief { delay: 3, bias: 0.05 };
        for t in 3..100 {
            assert!((biased.value(&s, t) / s.values()[t - 3] - 1.05).abs() < 1e-12);
        }
    }

    #[test]
    fn belief_gap_is_bounded() {
        let s = generate_fundamental(2_000, 100.0, 0.01, &mut rng());
        let b = AgentBelief { delay: 5, bias: -0.03 };
        let v = s.values();
        let max_lag_move = (5..v.len())
            .map(|t| (v[t] / v[t - 5]).ln().abs())
            .fold(0.0, f64::max);
        let bound = (1.0f64 - 0.03).ln().abs() + max_lag_move;
        for t in 0..v.len() {
            let gap = (b.value(&s, t) / v[t]).ln().abs();
            assert!(gap <= bound + 1e-12);
        }
    }

    #[test]
    fn gap_mean_converges_without_delay() {
        let s = generate_fundamental(5_000, 100.0, 0.01, &mut rng());
        let b = AgentBelief { delay: 0, bias: 0.04 };
        let mean = (0..s.len()).map(|t| (b.value(&s, t) / s.at(t)).ln()).sum::<f64>() / s.len() as f64;
        assert!((mean - 1.04f64.ln()).abs() < 0.01);
    }

    #[test]
    fn no_look_ahead() {
        let s = generate_fundamental(100, 100.0, 0.02, &mut rng());
        let mut altered = s.clone();
        for v in &mut altered.values[51..] {
            *v *= 3.0;
        }
        let b = AgentBelief { delay: 2, bias: 0.01 };
        for t in 0..=50 {
            assert_eq!(b.value(&s, t), b.value(&altered, t));
        }
    }

    #[test]
    fn draws_stay_in_range() {
        let mut r = rng();
        for _ in 0..500 {
            let b = cointegrate(5, 0.05, &mut r);
            assert!(b.delay <= 5);
            assert!(b.bias.abs() < 0.05);
        }
    }
}
