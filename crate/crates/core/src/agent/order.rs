//! Turning a trading decision into a limit order.

use crate::book::{quantize_price, Side};
use crate::portfolio::Portfolio;

use super::state::{Direction, Gesture, TradeAction};

/// Side, limit and size of an order before it is ranked in the book.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderRequest {
    pub side: Side,
    pub limit_price: f64,
    pub quantity: u64,
}

/// Market and cost parameters shared by every order an agent builds.
#[derive(Debug, Clone, Copy)]
pub struct OrderTerms {
    /// Fraction of cash (bids) or holdings (asks) committed.
    pub fraction: f64,
    pub fee_rate: f64,
    pub tick_digits: u32,
}

impl OrderTerms {
    fn tick(&self) -> f64 {
        10f64.powi(-(self.tick_digits as i32))
    }

    /// Quantized limit, never below one tick.
    fn limit(&self, raw: f64) -> f64 {
        let tick = self.tick();
        quantize_price(raw.max(tick), self.tick_digits)
            .expect("limit floored at one tick")
            .max(tick)
    }

    /// Most shares `cash` can pay for at `limit`, fees included.
    fn affordable(&self, cash: f64, limit: f64) -> u64 {
        (cash / (limit * (1.0 + self.fee_rate))).floor().max(0.0) as u64
    }
}

/// Limit order for a trading action around the forecast `valuation`.
///
/// Bids sit at `valuation + c·g·S` and asks at `valuation − c·g·S`, with
/// c = +1 (soft), 0 (neutral), −1 (hard). Bids commit a fraction of cash, asks a
/// fraction of held shares; holds and zero-size orders produce nothing.
pub fn build_order(
    action: TradeAction,
    valuation: f64,
    portfolio: &Portfolio,
    spread: f64,
    gesture: f64,
    terms: &OrderTerms,
) -> Option<OrderRequest> {
    let offset = action.gesture.sign() * gesture * spread;
    let (side, limit_price, quantity) = match action.direction {
        Direction::Hold => return None,
        Direction::Long => {
            let limit = terms.limit(valuation + offset);
            (Side::Bid, limit, terms.affordable(terms.fraction * portfolio.cash, limit))
        }
        Direction::Short => {
            let limit = terms.limit(valuation - offset);
            (Side::Ask, limit, (terms.fraction * portfolio.shares as f64).floor() as u64)
        }
    };
    (quantity > 0).then_some(OrderRequest { side, limit_price, quantity })
}

/// Soft order closing `quantity` shares of a matured position, priced around
/// the current market price and capped by what the agent holds or can afford.
pub fn liquidation_order(
    close_side: Side,
    quantity: u64,
    price: f64,
    portfolio: &Portfolio,
    spread: f64,
    gesture: f64,
    terms: &OrderTerms,
) -> Option<OrderRequest> {
    let offset = Gesture::Soft.sign() * gesture * spread;
    let (limit_price, quantity) = match close_side {
        Side::Ask => (terms.limit(price - offset), quantity.min(portfolio.shares)),
        Side::Bid => {
            let limit = terms.limit(price + offset);
            (limit, quantity.min(terms.affordable(portfolio.cash, limit)))
        }
    };
    (quantity > 0).then_some(OrderRequest { side: close_side, limit_price, quantity })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TERMS: OrderTerms = OrderTerms { fraction: 0.5, fee_rate: 0.001, tick_digits: 2 };

    fn action(direction: Direction, gesture: Gesture) -> TradeAction {
        TradeAction { direction, gesture }
    }

    #[test]
    fn hold_sends_nothing() {
        let p = Portfolio::new(10_000.0, 100);
        assert!(build_order(action(Direction::Hold, Gesture::Soft), 100.0, &p, 2.0, 0.5, &TERMS).is_none());
    }

    #[test]
    fn soft_long_concedes_half_spread() {
        let p = Portfolio::new(10_000.0, 0);
        let o = build_order(action(Direction::Long, Gesture::Soft), 100.0, &p, 2.0, 0.5, &TERMS).unwrap();
        assert_eq!(o, OrderRequest { side: Side::Bid, limit_price: 101.0, quantity: 49 });
    }

    #[test]
    fn gestures_move_the_limit() {
        let p = Portfolio::new(10_000.0, 10);
        let ask = |g| build_order(action(Direction::Short, g), 100.0, &p, 2.0, 0.5, &TERMS).unwrap();
        assert_eq!(ask(Gesture::Soft).limit_price, 99.0);
        assert_eq!(ask(Gesture::Neutral).limit_price, 100.0);
        assert_eq!(ask(Gesture::Hard).limit_price, 101.0);
        assert_eq!(ask(Gesture::Soft).quantity, 5);
    }

    #[test]
    fn no_naked_shorts() {
        let p = Portfolio::new(10_000.0, 0);
        assert!(build_order(action(Direction::Short, Gesture::Soft), 100.0, &p, 2.0, 0.5, &TERMS).is_none());
        let p = Portfolio::new(10_000.0, 1);
        assert!(build_order(action(Direction::Short, Gesture::Soft), 100.0, &p, 2.0, 0.5, &TERMS).is_none());
    }

    #[test]
    fn bids_stay_solvent() {
        let p = Portfolio::new(1_000.0, 0);
        let terms = OrderTerms { fraction: 1.0, ..TERMS };
        let o = build_order(action(Direction::Long, Gesture::Neutral), 100.0, &p, 0.0, 0.5, &terms).unwrap();
        assert!(o.quantity as f64 * o.limit_price * 1.001 <= 1_000.0);
        assert_eq!(o.quantity, 9);
    }

    #[test]
    fn limits_never_fall_below_a_tick() {
        let p = Portfolio::new(0.0, 10);
        let o = build_order(action(Direction::Short, Gesture::Soft), 0.5, &p, 4.0, 0.8, &OrderTerms { tick_digits: 0, ..TERMS }).unwrap();
        assert_eq!(o.limit_price, 1.0);
    }

    #[test]
    fn liquidation_is_capped() {
        let p = Portfolio::new(500.0, 3);
        let sell = liquidation_order(Side::Ask, 10, 100.0, &p, 1.0, 0.5, &TERMS).unwrap();
        assert_eq!((sell.limit_price, sell.quantity), (99.5, 3));
        let buy = liquidation_order(Side::Bid, 10, 100.0, &p, 1.0, 0.5, &TERMS).unwrap();
        assert_eq!((buy.limit_price, buy.quantity), (100.5, 4));
    }
}
