//! Metaorder injection.
//!
//! Once per reported trading year, at a uniformly drawn step, a random solvent
//! agent is endowed with shares (sell) or cash (buy) and forced to send one
//! very large, near-marketable order. After that step clears, the agent's
//! portfolio is put back exactly as it was before the endowment, so its NAV is
//! unchanged; the shares it bought or sold stay with its counterparties.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::OrderRequest;
use crate::book::{quantize_price, Side};
use crate::config::SimConfig;
use crate::portfolio::Portfolio;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaorderEvent {
    /// Reported step at which the order was cleared.
    pub step: usize,
    pub agent: usize,
    pub side: Side,
    /// Shares ordered.
    pub quantity: u64,
    /// Target ratio ρ* of shares outstanding.
    pub target_ratio: f64,
    /// Filled shares over shares outstanding, ρ(t).
    pub realized_ratio: f64,
    pub filled: u64,
    pub limit_price: f64,
    pub nav_before: f64,
    pub nav_after: f64,
}

/// An injected metaorder waiting for the step's clearing.
#[derive(Debug, Clone)]
pub struct Injection {
    pub agent: usize,
    pub order: OrderRequest,
    pub target_ratio: f64,
    /// Portfolio before the endowment, restored after clearing.
    pub before: Portfolio,
    /// Portfolio right after the endowment.
    pub endowed: Portfolio,
}

/// Picks an agent among `eligible`, a side and a target ratio, and prepares
/// the endowment and the forced order. `None` when no agent is eligible.
pub fn inject_metaorder<R: Rng + ?Sized>(
    config: &SimConfig,
    price: f64,
    eligible: &[usize],
    portfolio_of: impl Fn(usize) -> Portfolio,
    rng: &mut R,
) -> Option<Injection> {
    if eligible.is_empty() {
        return None;
    }
    let agent = eligible[rng.random_range(0..eligible.len())];
    let sell = rng.random_bool(0.5);
    let target_ratio = rng.random_range(0.0..config.metaorder_max_ratio.max(f64::MIN_POSITIVE));
    let quantity = ((config.shares_outstanding() as f64 * target_ratio).round() as u64).max(1);
    let before = portfolio_of(agent);
    let mut endowed = before.clone();
    let digits = config.tick_digits;
    let tick = config.tick();
    let order = if sell {
        let limit = quantize_price((price * (1.0 - config.metaorder_limit_offset)).max(tick), digits)
            .ok()?
            .max(tick);
        endowed.shares += quantity;
        OrderRequest { side: Side::Ask, limit_price: limit, quantity }
    } else {
        let limit = quantize_price(price * (1.0 + config.metaorder_limit_offset), digits).ok()?;
        endowed.cash += quantity as f64 * limit * (1.0 + config.broker_fee);
        OrderRequest { side: Side::Bid, limit_price: limit, quantity }
    };
    Some(Injection { agent, order, target_ratio, before, endowed })
}
