//! Discrete states and actions of the two learners.
//!
//! Forecasting: 27 states (long-term volatility, short-term volatility, gap
//! between belief and price; each low/mid/high) and 27 actions (tool, lag,
//! fundamental weight). Trading: 108 states (forecast tool, long-term
//! volatility, cash level, holdings level, previous volume) and 9 actions
//! (direction, gesture).

use serde::{Deserialize, Serialize};

pub const FORECAST_STATES: usize = 27;
pub const FORECAST_ACTIONS: usize = 27;
pub const TRADE_STATES: usize = 108;
pub const TRADE_ACTIONS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    Low,
    Mid,
    High,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Low, Level::Mid, Level::High];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Level {
        Self::ALL[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Binary {
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VolumeLevel {
    Zero,
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ForecastTool {
    Revert,
    Mean,
    Trend,
}

impl ForecastTool {
    pub const ALL: [ForecastTool; 3] = [ForecastTool::Revert, ForecastTool::Mean, ForecastTool::Trend];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Short,
    Hold,
    Long,
}

/// How far from its own valuation the agent is willing to deal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gesture {
    /// Concedes price to get filled.
    Soft,
    Neutral,
    /// Demands a better price.
    Hard,
}

impl Gesture {
    /// Sign applied to `g·S`: +1 soft, 0 neutral, -1 hard.
    pub fn sign(self) -> f64 {
        match self {
            Gesture::Soft => 1.0,
            Gesture::Neutral => 0.0,
            Gesture::Hard => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ForecastState {
    pub long_volatility: Level,
    pub short_volatility: Level,
    pub belief_gap: Level,
}

impl ForecastState {
    pub fn index(&self) -> usize {
        9 * self.long_volatility.index() + 3 * self.short_volatility.index() + self.belief_gap.index()
    }

    pub fn from_index(i: usize) -> Self {
        assert!(i < FORECAST_STATES);
        Self {
            long_volatility: Level::from_index(i / 9),
            short_volatility: Level::from_index(i / 3 % 3),
            belief_gap: Level::from_index(i % 3),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ForecastAction {
    pub tool: ForecastTool,
    pub lag: Level,
    pub fundamental_weight: Level,
}

impl ForecastAction {
    pub fn index(&self) -> usize {
        9 * self.tool as usize + 3 * self.lag.index() + self.fundamental_weight.index()
    }

    pub fn from_index(i: usize) -> Self {
        assert!(i < FORECAST_ACTIONS);
        Self {
            tool: ForecastTool::ALL[i / 9],
            lag: Level::from_index(i / 3 % 3),
            fundamental_weight: Level::from_index(i % 3),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TradeState {
    pub tool: ForecastTool,
    pub long_volatility: Level,
    pub cash: Binary,
    pub holdings: Binary,
    pub volume: VolumeLevel,
}

impl TradeState {
    pub fn index(&self) -> usize {
        36 * self.tool as usize
            + 12 * self.long_volatility.index()
            + 6 * self.cash as usize
            + 3 * self.holdings as usize
            + self.volume as usize
    }

    pub fn from_index(i: usize) -> Self {
        assert!(i < TRADE_STATES);
        let binary = |b| if b == 0 { Binary::Low } else { Binary::High };
        Self {
            tool: ForecastTool::ALL[i / 36],
            long_volatility: Level::from_index(i / 12 % 3),
            cash: binary(i / 6 % 2),
            holdings: binary(i / 3 % 2),
            volume: [VolumeLevel::Zero, VolumeLevel::Low, VolumeLevel::High][i % 3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TradeAction {
    pub direction: Direction,
    pub gesture: Gesture,
}

impl TradeAction {
    pub fn index(&self) -> usize {
        3 * self.direction as usize + self.gesture as usize
    }

    pub fn from_index(i: usize) -> Self {
        assert!(i < TRADE_ACTIONS);
        Self {
            direction: [Direction::Short, Direction::Hold, Direction::Long][i / 3],
            gesture: [Gesture::Soft, Gesture::Neutral, Gesture::Hard][i % 3],
        }
    }
}

/// Buckets the last element of `history` against the empirical terciles of
/// the whole slice: the fraction of entries strictly below it decides
/// low (< 1/3), mid (< 2/3) or high.
pub fn tercile_of_last(history: &[f64]) -> Level {
    let Some((&value, _)) = history.split_last() else {
        return Level::Low;
    };
    let below = history.iter().filter(|&&x| x < value).count();
    let frac = below as f64 / history.len() as f64;
    if frac < 1.0 / 3.0 {
        Level::Low
    } else if frac < 2.0 / 3.0 {
        Level::Mid
    } else {
        Level::High
    }
}

/// Median of `values` (mean of the two central entries for even lengths).
/// Reorders the slice.
pub fn median_in_place(values: &mut [f64]) -> Option<f64> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let (_, &mut upper, _) = values.select_nth_unstable_by(n / 2, f64::total_cmp);
    if n % 2 == 1 {
        return Some(upper);
    }
    let lower = values[..n / 2].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some(0.5 * (lower + upper))
}

/// Low when `value` is at or below the median of `history`, high otherwise.
pub fn median_split(value: f64, history: &[f64]) -> Binary {
    let mut scratch = history.to_vec();
    match median_in_place(&mut scratch) {
        Some(m) if value > m => Binary::High,
        _ => Binary::Low,
    }
}

/// Previous-step volume bucket; low/high split at the median of the nonzero
/// volumes in `recent`.
pub fn volume_level(previous: u64, recent: &[u64]) -> VolumeLevel {
    if previous == 0 {
        return VolumeLevel::Zero;
    }
    let mut nonzero: Vec<f64> = recent.iter().filter(|&&v| v > 0).map(|&v| v as f64).collect();
    match median_in_place(&mut nonzero) {
        Some(m) if previous as f64 > m => VolumeLevel::High,
        _ => VolumeLevel::Low,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encodings_are_bijective() {
        for i in 0..FORECAST_STATES {
            assert_eq!(ForecastState::from_index(i).index(), i);
        }
        for i in 0..FORECAST_ACTIONS {
            assert_eq!(ForecastAction::from_index(i).index(), i);
        }
        for i in 0..TRADE_STATES {
            assert_eq!(TradeState::from_index(i).index(), i);
        }
        for i in 0..TRADE_ACTIONS {
            assert_eq!(TradeAction::from_index(i).index(), i);
        }
    }

    #[test]
    fn trade_state_corners() {
        let low = TradeState {
            tool: ForecastTool::Revert,
            long_volatility: Level::Low,
            cash: Binary::Low,
            holdings: Binary::Low,
            volume: VolumeLevel::Zero,
        };
        assert_eq!(low.index(), 0);
        let high = TradeState {
            tool: ForecastTool::Trend,
            long_volatility: Level::High,
            cash: Binary::High,
            holdings: Binary::High,
            volume: VolumeLevel::High,
        };
        assert_eq!(high.index(), 107);
    }

    #[test]
    fn terciles() {
        let hist: Vec<f64> = (0..30).map(|x| x as f64).collect();
        let mut h = hist.clone();
        h.push(0.0);
        assert_eq!(tercile_of_last(&h), Level::Low);
        let mut h = hist.clone();
        h.push(15.0);
        assert_eq!(tercile_of_last(&h), Level::Mid);
        let mut h = hist;
        h.push(29.0);
        assert_eq!(tercile_of_last(&h), Level::High);
        assert_eq!(tercile_of_last(&[0.0; 10]), Level::Low);
        assert_eq!(tercile_of_last(&[]), Level::Low);
    }

    #[test]
    fn median_ties_go_low() {
        assert_eq!(median_split(2.0, &[1.0, 2.0, 3.0]), Binary::Low);
        assert_eq!(median_split(2.5, &[1.0, 2.0, 3.0, 4.0]), Binary::Low);
        assert_eq!(median_split(2.6, &[1.0, 2.0, 3.0, 4.0]), Binary::High);
        assert_eq!(median_split(5.0, &[]), Binary::Low);
    }

    #[test]
    fn volume_buckets() {
        assert_eq!(volume_level(0, &[5, 6, 7]), VolumeLevel::Zero);
        assert_eq!(volume_level(6, &[0, 0, 5, 6, 7]), VolumeLevel::Low);
        assert_eq!(volume_level(7, &[0, 0, 5, 6, 7]), VolumeLevel::High);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median_in_place(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median_in_place(&mut [4.0, 1.0, 3.0, 2.0]), Some(2.5));
        assert_eq!(median_in_place(&mut []), None);
    }
}
