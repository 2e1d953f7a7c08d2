//! Tabular softmax policy trained by direct policy search.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Preferences are kept inside ±this bound so that every action keeps a
/// strictly positive, representable probability.
pub const PREFERENCE_LIMIT: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    states: usize,
    actions: usize,
    preferences: Vec<f64>,
}

impl Policy {
    /// All-zero preferences, i.e. a uniform policy in every state.
    pub fn uniform(states: usize, actions: usize) -> Self {
        assert!(states > 0 && actions > 0);
        Self {
            states,
            actions,
            preferences: vec![0.0; states * actions],
        }
    }

    pub fn num_states(&self) -> usize {
        self.states
    }

    pub fn num_actions(&self) -> usize {
        self.actions
    }

    pub fn preferences(&self, state: usize) -> &[f64] {
        &self.preferences[state * self.actions..(state + 1) * self.actions]
    }

    pub fn preference(&self, state: usize, action: usize) -> f64 {
        self.preferences[state * self.actions + action]
    }

    /// Softmax of the state's preferences.
    pub fn probabilities(&self, state: usize) -> Vec<f64> {
        let prefs = self.preferences(state);
        let max = prefs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = prefs.iter().map(|h| (h - max).exp()).collect();
        let total: f64 = weights.iter().sum();
        weights.into_iter().map(|w| w / total).collect()
    }

    pub fn probability(&self, state: usize, action: usize) -> f64 {
        self.probabilities(state)[action]
    }

    /// Inverse-CDF sample for a uniform draw `u` in [0, 1).
    pub fn action_for_draw(&self, state: usize, u: f64) -> usize {
        let mut cumulative = 0.0;
        let probs = self.probabilities(state);
        for (a, p) in probs.iter().enumerate() {
            cumulative += p;
            if u < cumulative {
                return a;
            }
        }
        self.actions - 1
    }

    pub fn select_action<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> usize {
        self.action_for_draw(state, rng.random::<f64>())
    }

    /// H(s, a) += α·r. Other entries are untouched.
    pub fn update(&mut self, state: usize, action: usize, reward: f64, learning_rate: f64) {
        let h = &mut self.preferences[state * self.actions + action];
        *h = (*h + learning_rate * reward).clamp(-PREFERENCE_LIMIT, PREFERENCE_LIMIT);
    }

    /// Largest deviation of any row's probabilities from summing to one, and
    /// the smallest probability in the table.
    pub fn simplex_check(&self) -> (f64, f64) {
        let mut worst_sum = 0.0f64;
        let mut min_p = f64::INFINITY;
        for s in 0..self.states {
            let probs = self.probabilities(s);
            worst_sum = worst_sum.max((probs.iter().sum::<f64>() - 1.0).abs());
            min_p = probs.iter().copied().fold(min_p, f64::min);
        }
        (worst_sum, min_p)
    }
}
