//! Agent holdings, per-step accounting and drawdown-based bankruptcy.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Portfolio {
    /// Risk-free assets.
    pub cash: f64,
    pub shares: u64,
}

impl Portfolio {
    pub fn new(cash: f64, shares: u64) -> Self {
        Self { cash, shares }
    }

    /// Net asset value marked at `price`.
    pub fn nav(&self, price: f64) -> f64 {
        self.cash + self.shares as f64 * price
    }
}

impl AsMut<Portfolio> for Portfolio {
    fn as_mut(&mut self) -> &mut Portfolio {
        self
    }
}

/// Cash credited by one step of accounting, as actually added to the balance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Accrual {
    pub interest: f64,
    pub dividend: f64,
}

/// Grows cash by one step of risk-free interest and pays the per-step dividend
/// on the holdings marked at `price`. Broker fees are charged at settlement.
pub fn apply_accounting(
    portfolio: &mut Portfolio,
    price: f64,
    step_risk_free: f64,
    step_dividend: f64,
) -> Accrual {
    let start = portfolio.cash;
    let with_interest = start + start * step_risk_free;
    let end = with_interest + step_dividend * portfolio.shares as f64 * price;
    portfolio.cash = end;
    Accrual {
        interest: with_interest - start,
        dividend: end - with_interest,
    }
}

/// Whether the year-to-date peak-to-trough NAV loss at step `t` exceeds
/// `limit`. Years are consecutive windows of `year_length` entries starting at
/// index 0 of `nav_history`.
pub fn check_bankruptcy(nav_history: &[f64], limit: f64, t: usize, year_length: usize) -> bool {
    assert!(!nav_history.is_empty(), "NAV history must not be empty");
    let t = t.min(nav_history.len() - 1);
    let start = t - t % year_length.max(1);
    let mut tracker = DrawdownTracker::default();
    nav_history[start..=t].iter().any(|&nav| tracker.observe(nav) > limit)
}

/// Incremental form of [`check_bankruptcy`] for one calendar window.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DrawdownTracker {
    peak: Option<f64>,
    max_drawdown: f64,
}

impl DrawdownTracker {
    /// Records one NAV observation and returns the window's max drawdown so far.
    pub fn observe(&mut self, nav: f64) -> f64 {
        let peak = self.peak.map_or(nav, |p| p.max(nav));
        self.peak = Some(peak);
        if peak > 0.0 {
            self.max_drawdown = self.max_drawdown.max((peak - nav) / peak);
        }
        self.max_drawdown
    }

    pub fn max_drawdown(&self) -> f64 {
        self.max_drawdown
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }
}
