//! Batch double auction.
//!
//! Orders collected during one step are cleared together: bids sorted from
//! highest to lowest limit, asks from lowest to highest, ties broken by the
//! (randomised) arrival rank. The top bid and top ask trade while they cross,
//! at the tick-quantized mid of their limits; a partially filled order stays at
//! the top of its side. Whatever is left when the book stops crossing expires.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::config::MAX_TICK_DIGITS;
use crate::error::{Error, Result};
use crate::portfolio::Portfolio;

pub type AgentId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Bid,
    Ask,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Bid => Side::Ask,
            Side::Ask => Side::Bid,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Order {
    pub agent_id: AgentId,
    pub side: Side,
    /// Limit price, already on the tick grid.
    pub limit_price: f64,
    pub quantity: u64,
    /// Position after the step's random shuffle; lower ranks win ties.
    pub arrival_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transaction {
    pub buyer_id: AgentId,
    pub seller_id: AgentId,
    pub price: f64,
    pub quantity: u64,
    pub step: usize,
    pub bid_limit: f64,
    pub ask_limit: f64,
}

impl Transaction {
    pub fn value(&self) -> f64 {
        self.price * self.quantity as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketUpdate {
    pub last_price: f64,
    pub volume: u64,
    pub spread: f64,
    pub transactions: Vec<Transaction>,
}

impl MarketUpdate {
    /// Market state before any trade has happened.
    pub fn opening(price: f64) -> Self {
        Self {
            last_price: price,
            volume: 0,
            spread: 0.0,
            transactions: Vec::new(),
        }
    }

    fn carry_forward(prev: &MarketUpdate) -> Self {
        Self {
            last_price: prev.last_price,
            volume: 0,
            spread: prev.spread,
            transactions: Vec::new(),
        }
    }

    /// Price, volume and spread implied by a transaction list, carrying `prev`
    /// forward when the list is empty.
    pub fn from_transactions(transactions: Vec<Transaction>, prev: &MarketUpdate) -> Self {
        let Some(last) = transactions.last() else {
            return Self::carry_forward(prev);
        };
        let n = transactions.len() as f64;
        let mean_bid = transactions.iter().map(|t| t.bid_limit).sum::<f64>() / n;
        let mean_ask = transactions.iter().map(|t| t.ask_limit).sum::<f64>() / n;
        Self {
            last_price: last.price,
            volume: transactions.iter().map(|t| t.quantity).sum(),
            spread: (mean_bid - mean_ask).abs(),
            transactions,
        }
    }
}

fn scale(tick_digits: u32) -> f64 {
    10f64.powi(tick_digits as i32)
}

/// Rounds a positive price to `tick_digits` decimals, halves away from zero.
///
/// Binary representation puts decimal halves like `100.235` a hair below the
/// half, so the scaled value is nudged by a relative 1e-12 before rounding.
pub fn quantize_price(raw: f64, tick_digits: u32) -> Result<f64> {
    if !(raw.is_finite() && raw > 0.0) {
        return Err(Error::Domain(format!("price must be positive and finite, got {raw}")));
    }
    if tick_digits > MAX_TICK_DIGITS {
        return Err(Error::Domain(format!("tick digits must be in 0..={MAX_TICK_DIGITS}")));
    }
    let s = scale(tick_digits);
    let scaled = raw * s;
    Ok((scaled + scaled * 1e-12).round() / s)
}

/// True when `price` has no more than `tick_digits` decimals.
pub fn on_tick(price: f64, tick_digits: u32) -> bool {
    let scaled = price * scale(tick_digits);
    (scaled - scaled.round()).abs() <= 1e-6 * scaled.abs().max(1.0)
}

fn priority(side: Side) -> impl Fn(&Order, &Order) -> Ordering {
    move |a, b| {
        let by_price = match side {
            Side::Bid => b.limit_price.total_cmp(&a.limit_price),
            Side::Ask => a.limit_price.total_cmp(&b.limit_price),
        };
        by_price.then(a.arrival_rank.cmp(&b.arrival_rank))
    }
}

/// Clears one step's orders. `prev` supplies the carry-forward price and
/// spread when nothing trades.
///
/// Orders must come from distinct agents; the simulator guarantees at most one
/// order per agent and step.
pub fn clear_auction(
    orders: &[Order],
    tick_digits: u32,
    prev: &MarketUpdate,
    step: usize,
) -> MarketUpdate {
    let mut bids: Vec<&Order> = orders.iter().filter(|o| o.side == Side::Bid).collect();
    let mut asks: Vec<&Order> = orders.iter().filter(|o| o.side == Side::Ask).collect();
    bids.sort_by(|a, b| priority(Side::Bid)(a, b));
    asks.sort_by(|a, b| priority(Side::Ask)(a, b));

    let mut transactions = Vec::new();
    let (mut bi, mut ai) = (0, 0);
    let mut bid_left = bids.first().map_or(0, |o| o.quantity);
    let mut ask_left = asks.first().map_or(0, |o| o.quantity);
    while bi < bids.len() && ai < asks.len() {
        let (bid, ask) = (bids[bi], asks[ai]);
        if bid.limit_price < ask.limit_price {
            break;
        }
        debug_assert_ne!(bid.agent_id, ask.agent_id, "self-trade in the book");
        let quantity = bid_left.min(ask_left);
        let mid = 0.5 * (bid.limit_price + ask.limit_price);
        let price = quantize_price(mid, tick_digits).expect("mid of positive limits is positive");
        transactions.push(Transaction {
            buyer_id: bid.agent_id,
            seller_id: ask.agent_id,
            price,
            quantity,
            step,
            bid_limit: bid.limit_price,
            ask_limit: ask.limit_price,
        });
        bid_left -= quantity;
        ask_left -= quantity;
        if bid_left == 0 {
            bi += 1;
            bid_left = bids.get(bi).map_or(0, |o| o.quantity);
        }
        if ask_left == 0 {
            ai += 1;
            ask_left = asks.get(ai).map_or(0, |o| o.quantity);
        }
    }
    MarketUpdate::from_transactions(transactions, prev)
}

/// Applies cleared trades to the parties' portfolios, charging `fee_rate` of
/// the traded value to both sides. Returns the total fees charged, measured
/// as the cash that left buyers minus the cash that reached sellers.
pub fn settle<P: AsMut<Portfolio>>(
    transactions: &[Transaction],
    parties: &mut [P],
    fee_rate: f64,
) -> Result<f64> {
    let mut fees = Vec::with_capacity(transactions.len());
    for t in transactions {
        if t.quantity == 0 {
            return Err(Error::Invariant(format!("zero-quantity transaction at step {}", t.step)));
        }
        if t.buyer_id == t.seller_id {
            return Err(Error::Invariant(format!("agent {} traded with itself", t.buyer_id)));
        }
        let value = t.value();
        let fee = fee_rate * value;
        {
            let seller = parties[t.seller_id].as_mut();
            if seller.shares < t.quantity {
                return Err(Error::Invariant(format!(
                    "agent {} sold {} shares holding {}",
                    t.seller_id, t.quantity, seller.shares
                )));
            }
            seller.shares -= t.quantity;
            let before = seller.cash;
            seller.cash += value - fee;
            fees.push(before - seller.cash);
        }
        let buyer = parties[t.buyer_id].as_mut();
        let before = buyer.cash;
        buyer.cash -= value + fee;
        fees.push(before - buyer.cash);
        buyer.shares += t.quantity;
        if buyer.cash < 0.0 {
            return Err(Error::Invariant(format!(
                "agent {} cash went negative ({}) at step {}",
                t.buyer_id, buyer.cash, t.step
            )));
        }
    }
    Ok(crate::metrics::exact_sum(fees))
}
