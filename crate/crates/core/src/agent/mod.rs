//! Learning agents.
//!
//! Each agent owns two softmax policies. The forecaster picks a forecasting
//! tool, a lag and a fundamental weight; the trader, seeing which tool was
//! picked, picks a direction and a price gesture. Both are rewarded `horizon`
//! steps later by the percentile of the outcome among the agent's recent
//! outcomes: forecast error for the forecaster, realised cashflow of the
//! position for the trader.

pub mod forecast;
pub mod market;
pub mod order;
pub mod policy;
pub mod reward;
pub mod state;

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::book::Side;
use crate::config::SimConfig;
use crate::fundamentals::AgentBelief;
use crate::portfolio::{DrawdownTracker, Portfolio};
use crate::rng::SimRng;

pub use market::{MarketView, VolatilityCache};
pub use order::{build_order, liquidation_order, OrderRequest, OrderTerms};
pub use policy::Policy;
pub use reward::{reward_from_percentile, Better};
pub use state::{
    Direction, ForecastAction, ForecastState, ForecastTool, Gesture, Level, TradeAction,
    TradeState, FORECAST_ACTIONS, FORECAST_STATES, TRADE_ACTIONS, TRADE_STATES,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentParams {
    /// α, shared by both learners.
    pub learning_rate: f64,
    /// τ: steps after which positions are closed and decisions rewarded.
    pub horizon: usize,
    /// h: how far back the agent looks when bucketing states and rewards.
    pub memory: usize,
    /// ρ: how fundamentalist the agent can be.
    pub reflexivity: f64,
    /// l: year-to-date drawdown beyond which the agent goes bankrupt.
    pub drawdown_limit: f64,
    /// w: minimum number of steps between two decisions.
    pub trading_window: usize,
    /// g: scales the spread-based price concession.
    pub gesture: f64,
    pub is_hft: bool,
}

impl AgentParams {
    pub fn draw<R: Rng + ?Sized>(config: &SimConfig, is_hft: bool, rng: &mut R) -> Self {
        let week = config.week_length;
        let learning_rate = rng.random_range(0.05..0.20);
        let horizon = if is_hft {
            rng.random_range(week..2 * week)
        } else {
            rng.random_range(week..=6 * config.month_length)
        };
        let memory_cap = config
            .horizon_steps
            .saturating_sub(horizon + 2 * week)
            .max(week);
        let memory = rng.random_range(week..=memory_cap);
        let reflexivity = rng.random_range(0.0..1.0);
        let drawdown_limit = rng.random_range(0.5..0.6);
        let trading_window = rng.random_range(week..=horizon);
        let gesture = rng.random_range(0.2..0.8);
        Self {
            learning_rate,
            horizon,
            memory,
            reflexivity,
            drawdown_limit,
            trading_window,
            gesture,
            is_hft,
        }
    }
}

/// Fills of one side of a position.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Leg {
    quantity: u64,
    value: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct Position {
    side: Side,
    entry: Leg,
    exit: Leg,
    fees: f64,
    /// Dividends received on a long or forgone on a short while open.
    dividends: f64,
}

/// A decision waiting for its outcome.
#[derive(Debug, Clone, PartialEq)]
struct PendingOutcome {
    issued_at: usize,
    matures_at: usize,
    forecast_state: usize,
    forecast_action: usize,
    trade_state: usize,
    trade_action: usize,
    forecast: f64,
    /// `None` for holds and for actions that produced no order.
    position: Option<Position>,
    /// Cashflow credited to a hold.
    hold_value: f64,
}

/// What the agent's order of the current step is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderPurpose {
    Entry,
    Liquidation,
    Metaorder,
}

/// Per-run constants an agent needs to act.
#[derive(Debug, Clone, Copy)]
pub struct AgentContext {
    pub terms: OrderTerms,
    pub step_risk_free: f64,
    pub step_dividend: f64,
    pub tick: f64,
}

impl AgentContext {
    pub fn from_config(config: &SimConfig) -> Self {
        Self {
            terms: OrderTerms {
                fraction: config.order_fraction,
                fee_rate: config.broker_fee,
                tick_digits: config.tick_digits,
            },
            step_risk_free: config.step_risk_free(),
            step_dividend: config.step_dividend(),
            tick: config.tick(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Agent {
    pub id: usize,
    pub params: AgentParams,
    pub belief: AgentBelief,
    pub portfolio: Portfolio,
    pub forecaster: Policy,
    pub trader: Policy,
    pub bankrupt: bool,
    drawdown: DrawdownTracker,
    pending: VecDeque<PendingOutcome>,
    last_decision: Option<usize>,
    /// (resolution step, value) of past outcomes.
    forecast_errors: VecDeque<(usize, f64)>,
    trade_values: VecDeque<(usize, f64)>,
    cash_seen: Vec<f64>,
    shares_seen: Vec<f64>,
    order_purpose: Option<OrderPurpose>,
    rng: SimRng,
}

impl AsMut<Portfolio> for Agent {
    fn as_mut(&mut self) -> &mut Portfolio {
        &mut self.portfolio
    }
}

fn recent(history: &VecDeque<(usize, f64)>) -> Vec<f64> {
    history.iter().map(|&(_, v)| v).collect()
}

fn forget_before(history: &mut VecDeque<(usize, f64)>, t: usize, memory: usize) {
    while history.front().is_some_and(|&(at, _)| at + memory < t) {
        history.pop_front();
    }
}

impl Agent {
    pub fn new(
        id: usize,
        params: AgentParams,
        belief: AgentBelief,
        portfolio: Portfolio,
        rng: SimRng,
    ) -> Self {
        Self {
            id,
            params,
            belief,
            portfolio,
            forecaster: Policy::uniform(FORECAST_STATES, FORECAST_ACTIONS),
            trader: Policy::uniform(TRADE_STATES, TRADE_ACTIONS),
            bankrupt: false,
            drawdown: DrawdownTracker::default(),
            pending: VecDeque::new(),
            last_decision: None,
            forecast_errors: VecDeque::new(),
            trade_values: VecDeque::new(),
            cash_seen: Vec::new(),
            shares_seen: Vec::new(),
            order_purpose: None,
            rng,
        }
    }

    pub fn order_purpose(&self) -> Option<OrderPurpose> {
        self.order_purpose
    }

    pub fn set_order_purpose(&mut self, purpose: Option<OrderPurpose>) {
        self.order_purpose = purpose;
    }

    /// Number of decisions awaiting their outcome.
    pub fn pending_outcomes(&self) -> usize {
        self.pending.len()
    }

    /// The open position that reaches its horizon at `t`: side needed to close
    /// it and quantity to close.
    pub fn maturing_position(&self, t: usize) -> Option<(Side, u64)> {
        let front = self.pending.front()?;
        if front.matures_at != t {
            return None;
        }
        let pos = front.position.as_ref()?;
        (pos.entry.quantity > 0).then(|| (pos.side.opposite(), pos.entry.quantity))
    }

    /// Whether the agent makes a fresh decision at `t`.
    pub fn can_decide(&self, t: usize) -> bool {
        !self.bankrupt
            && t + 1 >= self.params.horizon
            && self
                .last_decision
                .is_none_or(|last| t >= last + self.params.trading_window)
            && self.maturing_position(t).is_none()
    }

    /// Observes the market, runs the forecaster then the trader, and returns
    /// the resulting order, if any. The decision is queued for a reward at
    /// `t + horizon` whether or not an order is sent.
    pub fn decide(&mut self, view: &MarketView<'_>, ctx: &AgentContext) -> Option<OrderRequest> {
        let t = view.t;
        let p = &self.params;

        let long_vol = view.volatility.history(p.horizon, t, p.memory);
        let short_vol = view.volatility.history(view.week_length, t, p.memory);
        let start = (t + 1).saturating_sub(p.memory);
        let gaps: Vec<f64> = (start..=t)
            .map(|u| {
                let pu = view.prices[u];
                (self.belief.value(view.fundamental, u) - pu).abs() / pu
            })
            .collect();
        let long_level = state::tercile_of_last(long_vol);
        let forecast_state = ForecastState {
            long_volatility: long_level,
            short_volatility: state::tercile_of_last(short_vol),
            belief_gap: state::tercile_of_last(&gaps),
        }
        .index();
        let forecast_action = self.forecaster.select_action(forecast_state, &mut self.rng);
        let action_f = ForecastAction::from_index(forecast_action);
        let belief_now = self.belief.value(view.fundamental, t);
        let valuation = forecast::forecast(
            action_f,
            view.prices,
            belief_now,
            p.horizon,
            p.memory,
            p.reflexivity,
            ctx.tick,
        );

        self.cash_seen.push(self.portfolio.cash);
        self.shares_seen.push(self.portfolio.shares as f64);
        let trade_state = TradeState {
            tool: action_f.tool,
            long_volatility: long_level,
            cash: state::median_split(self.portfolio.cash, &self.cash_seen),
            holdings: state::median_split(self.portfolio.shares as f64, &self.shares_seen),
            volume: state::volume_level(view.volumes[t], &view.volumes[start..=t]),
        }
        .index();
        let trade_action = self.trader.select_action(trade_state, &mut self.rng);
        let action_t = TradeAction::from_index(trade_action);
        let order = build_order(
            action_t,
            valuation,
            &self.portfolio,
            view.spread,
            p.gesture,
            &ctx.terms,
        );

        let hold_value = if action_t.direction == Direction::Hold {
            let growth = (1.0 + ctx.step_risk_free).powi(p.horizon as i32) - 1.0;
            ctx.terms.fraction * self.portfolio.cash * growth
        } else {
            0.0
        };
        self.pending.push_back(PendingOutcome {
            issued_at: t,
            matures_at: t + p.horizon,
            forecast_state,
            forecast_action,
            trade_state,
            trade_action,
            forecast: valuation,
            position: order.map(|o| Position {
                side: o.side,
                entry: Leg::default(),
                exit: Leg::default(),
                fees: 0.0,
                dividends: 0.0,
            }),
            hold_value,
        });
        self.last_decision = Some(t);
        self.order_purpose = order.map(|_| OrderPurpose::Entry);
        order
    }

    /// Soft order closing the position that matures at `t`.
    pub fn liquidate(&mut self, view: &MarketView<'_>, ctx: &AgentContext) -> Option<OrderRequest> {
        if self.bankrupt {
            return None;
        }
        let (side, quantity) = self.maturing_position(view.t)?;
        let order = liquidation_order(
            side,
            quantity,
            view.price(),
            &self.portfolio,
            view.spread,
            self.params.gesture,
            &ctx.terms,
        );
        self.order_purpose = order.map(|_| OrderPurpose::Liquidation);
        order
    }

    /// Books a fill of this step's order against the decision it belongs to.
    pub fn record_fill(&mut self, t: usize, quantity: u64, price: f64, fee: f64) {
        let target = match self.order_purpose {
            Some(OrderPurpose::Entry) => self.pending.back_mut().filter(|d| d.issued_at == t),
            Some(OrderPurpose::Liquidation) => self.pending.front_mut().filter(|d| d.matures_at == t),
            _ => None,
        };
        let Some(position) = target.and_then(|d| d.position.as_mut()) else {
            return;
        };
        let leg = match self.order_purpose {
            Some(OrderPurpose::Entry) => &mut position.entry,
            _ => &mut position.exit,
        };
        leg.quantity += quantity;
        leg.value += price * quantity as f64;
        position.fees += fee;
    }

    /// Credits (long) or debits (short) this step's dividend to every open
    /// position, at the post-clearing price.
    pub fn accrue_position_dividends(&mut self, t: usize, step_dividend: f64, price: f64) {
        for d in self.pending.iter_mut().filter(|d| d.issued_at <= t && t < d.matures_at) {
            if let Some(pos) = d.position.as_mut() {
                let sign = if pos.side == Side::Bid { 1.0 } else { -1.0 };
                pos.dividends += sign * step_dividend * pos.entry.quantity as f64 * price;
            }
        }
    }

    /// Rewards and learns from the decision maturing at `t`. `maturity_price`
    /// is P(t), the price the forecast aimed at; `mark_price` is P(t+1), used
    /// to value any part of the position that could not be closed.
    pub fn resolve(&mut self, t: usize, maturity_price: f64, mark_price: f64) {
        let Some(front) = self.pending.front() else {
            return;
        };
        if front.matures_at != t {
            return;
        }
        let d = self.pending.pop_front().unwrap();
        let memory = self.params.memory;
        let alpha = self.params.learning_rate;

        let error = (d.forecast - maturity_price).abs();
        forget_before(&mut self.forecast_errors, t, memory);
        let r_f = reward_from_percentile(error, &recent(&self.forecast_errors), Better::Lower);
        self.forecast_errors.push_back((t, error));
        self.forecaster
            .update(d.forecast_state, d.forecast_action, r_f as f64, alpha);

        let value = match &d.position {
            None => d.hold_value,
            Some(pos) if pos.entry.quantity == 0 => 0.0,
            Some(pos) => {
                let open = (pos.entry.quantity - pos.exit.quantity.min(pos.entry.quantity)) as f64;
                let gross = match pos.side {
                    Side::Bid => pos.exit.value + open * mark_price - pos.entry.value,
                    Side::Ask => pos.entry.value - pos.exit.value - open * mark_price,
                };
                gross - pos.fees + pos.dividends
            }
        };
        forget_before(&mut self.trade_values, t, memory);
        let r_t = reward_from_percentile(value, &recent(&self.trade_values), Better::Higher);
        self.trade_values.push_back((t, value));
        self.trader.update(d.trade_state, d.trade_action, r_t as f64, alpha);
    }

    /// Records the NAV after the step's accounting and flags bankruptcy when
    /// the drawdown of the current year exceeds the agent's limit.
    pub fn observe_nav(&mut self, nav: f64, new_year: bool) -> bool {
        if new_year {
            self.drawdown.reset();
        }
        if self.drawdown.observe(nav) > self.params.drawdown_limit && !self.bankrupt {
            self.bankrupt = true;
            self.pending.clear();
            self.order_purpose = None;
            return true;
        }
        false
    }

    /// Puts the portfolio back to its initial endowment and forgets open
    /// positions, keeping everything the agent has learned.
    pub fn reset_portfolio(&mut self, portfolio: Portfolio) {
        self.portfolio = portfolio;
        self.bankrupt = false;
        self.drawdown.reset();
        self.pending.clear();
        self.last_decision = None;
        self.order_purpose = None;
    }

    pub fn rng(&mut self) -> &mut SimRng {
        &mut self.rng
    }
}
