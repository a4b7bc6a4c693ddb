//! Market-quality metrics: equilibrium of the stepped supply and demand
//! curves, RMS price convergence (Smith's alpha), and allocative efficiency.

use thiserror::Error;

use crate::types::Price;

/// Intersection of the stepped demand and supply curves built from customer
/// limit prices. `quantity` is the number of tradable pairs; `price` is the
/// crossing price, absent when no pair can trade.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Equilibrium {
    pub quantity: usize,
    pub price: Option<Price>,
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no trades to measure")]
    EmptyTape,
    #[error("equilibrium price undefined or nonpositive")]
    UndefinedEquilibrium,
    #[error("maximum surplus is zero; efficiency undefined")]
    ZeroMaxSurplus,
}

/// Computes the competitive equilibrium: sort buyer limits descending into a
/// demand curve D and seller limits ascending into a supply curve S, take the
/// largest q with D(q) >= S(q), and price the midpoint of the marginal pair,
/// rounded half up.
pub fn equilibrium_price(buyer_limits: &[Price], seller_limits: &[Price]) -> Equilibrium {
    let mut demand: Vec<i64> = buyer_limits.iter().map(|p| p.pennies()).collect();
    let mut supply: Vec<i64> = seller_limits.iter().map(|p| p.pennies()).collect();
    demand.sort_unstable_by(|a, b| b.cmp(a));
    supply.sort_unstable();

    let quantity = demand
        .iter()
        .zip(&supply)
        .take_while(|(d, s)| d >= s)
        .count();
    let price = quantity
        .checked_sub(1)
        .map(|q| Price((demand[q] + supply[q] + 1) / 2));
    Equilibrium { quantity, price }
}

/// Smith's alpha: RMS deviation of trade prices from the equilibrium price,
/// as a percentage of that price. Zero means every trade printed exactly at
/// equilibrium.
pub fn smiths_alpha(trade_prices: &[Price], p0: Price) -> Result<f64, MetricsError> {
    if p0.pennies() <= 0 {
        return Err(MetricsError::UndefinedEquilibrium);
    }
    if trade_prices.is_empty() {
        return Err(MetricsError::EmptyTape);
    }
    let sse: f64 = trade_prices
        .iter()
        .map(|p| {
            let diff = (p.pennies() - p0.pennies()) as f64;
            diff * diff
        })
        .sum();
    Ok(100.0 * (sse / trade_prices.len() as f64).sqrt() / p0.pennies() as f64)
}

/// Allocative efficiency: surplus realized by the executed trades (buyer
/// limit minus seller limit, per trade) divided by the maximum surplus
/// available at equilibrium. `executed` holds each trade's counterparty
/// limits as `(buyer_limit, seller_limit)`. Extramarginal executions are
/// counted as-is, so values outside [0, 1] are reported, not clipped.
pub fn allocative_efficiency(
    executed: &[(Price, Price)],
    buyer_limits: &[Price],
    seller_limits: &[Price],
) -> Result<f64, MetricsError> {
    let mut demand: Vec<i64> = buyer_limits.iter().map(|p| p.pennies()).collect();
    let mut supply: Vec<i64> = seller_limits.iter().map(|p| p.pennies()).collect();
    demand.sort_unstable_by(|a, b| b.cmp(a));
    supply.sort_unstable();

    let max_surplus: i64 = demand
        .iter()
        .zip(&supply)
        .take_while(|(d, s)| d >= s)
        .map(|(d, s)| d - s)
        .sum();
    if max_surplus == 0 {
        return Err(MetricsError::ZeroMaxSurplus);
    }
    let realized: i64 = executed
        .iter()
        .map(|(b, s)| b.pennies() - s.pennies())
        .sum();
    Ok(realized as f64 / max_surplus as f64)
}
