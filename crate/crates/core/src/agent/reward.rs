//! Percentile rewards.

/// Which end of an outcome distribution is good.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Better {
    Lower,
    Higher,
}

/// Reward values from the best sextile to the worst.
pub const REWARDS: [i32; 6] = [4, 2, 1, -1, -2, -4];

/// Below this many past outcomes the reward falls back to ±1 around the median.
pub const MIN_HISTORY: usize = 6;

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Maps `value` to {+4, +2, +1, -1, -2, -4} by the sextile of `history` it falls
/// in; values on a boundary take the better bucket.
///
/// With fewer than [`MIN_HISTORY`] past outcomes the reward is +1 if `value`
/// is at least as good as their median and -1 otherwise. With no history at all
/// the median is taken as 0 for [`Better::Higher`] and the reward is +1 for
/// [`Better::Lower`].
pub fn reward_from_percentile(value: f64, history: &[f64], better: Better) -> i32 {
    if history.len() < MIN_HISTORY {
        let mut scratch = history.to_vec();
        let median = super::state::median_in_place(&mut scratch);
        return match (better, median) {
            (Better::Lower, None) => 1,
            (Better::Lower, Some(m)) => if value <= m { 1 } else { -1 },
            (Better::Higher, m) => if value >= m.unwrap_or(0.0) { 1 } else { -1 },
        };
    }
    let mut sorted = history.to_vec();
    sorted.sort_by(f64::total_cmp);
    let cuts: Vec<f64> = (1..6).map(|k| quantile(&sorted, k as f64 / 6.0)).collect();
    let bucket = match better {
        Better::Lower => cuts.iter().position(|&c| value <= c).unwrap_or(5),
        Better::Higher => cuts.iter().rev().position(|&c| value >= c).unwrap_or(5),
    };
    REWARDS[bucket]
}
