//! Robot traders: five quoting strategies working customer assignments.
//!
//! Traders follow a sales-desk model: they never trade on their own account,
//! only work unit-quantity customer assignments, and must quote no worse than
//! the assignment's limit price. Profit is the assignment limit's improvement
//! over the execution price, booked per trade into a balance and blotter.
//!
//! Strategies:
//! - `GVWY` gives the limit price away unchanged.
//! - `ZIC` quotes uniformly at random between the band edge and the limit.
//! - `SHVR` improves the current best price on its own side by one penny,
//!   never beyond the limit.
//! - `SNPR` lurks until the closing phase, then shaves increasingly hard.
//! - `ZIP` keeps a profit margin adapted by a Widrow-Hoff rule with momentum,
//!   nudged by every processed quote and trade.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::exchange::{LimitOrder, MarketEvent, PublishedLob, Trade};
use crate::types::{Price, PriceBand, Qty, Side, SimTime, TraderId};

/// Fraction of session time remaining below which the sniper wakes up.
const SNIPER_WAKE_FRACTION: f64 = 0.25;

/// Strategy identifier, as written in population specs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TType {
    Gvwy,
    Shvr,
    Snpr,
    Zic,
    Zip,
}

impl TType {
    pub const ALL: [TType; 5] = [TType::Gvwy, TType::Shvr, TType::Snpr, TType::Zic, TType::Zip];

    pub fn name(self) -> &'static str {
        match self {
            TType::Gvwy => "GVWY",
            TType::Shvr => "SHVR",
            TType::Snpr => "SNPR",
            TType::Zic => "ZIC",
            TType::Zip => "ZIP",
        }
    }
}

impl fmt::Display for TType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("unknown trader type {0:?}")]
pub struct ParseTTypeError(pub String);

impl FromStr for TType {
    type Err = ParseTTypeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "GVWY" => Ok(TType::Gvwy),
            "SHVR" => Ok(TType::Shvr),
            "SNPR" => Ok(TType::Snpr),
            "ZIC" => Ok(TType::Zic),
            "ZIP" => Ok(TType::Zip),
            _ => Err(ParseTTypeError(s.to_string())),
        }
    }
}

/// A customer order: buy or sell one unit at no worse than `limit`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Assignment {
    /// Unique within a session; links blotter entries to their assignment.
    pub id: u64,
    pub side: Side,
    pub limit: Price,
    pub qty: Qty,
    pub issue_time: SimTime,
}

/// Which side of an execution the trader's order was on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TradeRole {
    Standing,
    Crossing,
}

/// One completed execution from the trader's own perspective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlotterEntry {
    pub time: SimTime,
    pub price: Price,
    pub qty: Qty,
    pub role: TradeRole,
    pub assignment_id: u64,
    pub profit: i64,
}

/// Adaptive state for the margin-learning strategy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZipState {
    /// Current profit margin: quote = limit * (1 + margin). Nonnegative for
    /// sellers, nonpositive for buyers.
    pub margin: f64,
    /// Learning rate of the Widrow-Hoff update.
    pub beta: f64,
    /// Momentum coefficient blending the previous change into the next.
    pub momentum: f64,
    /// Last applied quote-price change, the momentum memory.
    pub prev_change: f64,
    /// Most recent observed event: quote price, quote side, whether it traded.
    pub last_event: Option<(Price, Side, bool)>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Strategy {
    Gvwy,
    Shvr,
    Snpr,
    Zic,
    Zip(ZipState),
}

#[derive(Debug, Error, PartialEq)]
pub enum TraderError {
    #[error("assignment limit {limit} outside system band [{min}, {max}]")]
    LimitOutOfBand {
        limit: Price,
        min: Price,
        max: Price,
    },
    #[error("only unit quantities are accepted, got {0}")]
    UnsupportedQuantity(Qty),
    #[error("trader {tid} is not a counterparty of the trade at {time}")]
    NotCounterparty { tid: TraderId, time: SimTime },
    #[error("trader {0} holds no assignment to book against")]
    NoAssignment(TraderId),
}

/// One robot trader: identity, strategy, current assignment, and accounts.
#[derive(Clone, Debug)]
pub struct Trader {
    tid: TraderId,
    ttype: TType,
    /// The side this trader works (buyers bid, sellers ask).
    role: Side,
    band: PriceBand,
    balance: i64,
    blotter: Vec<BlotterEntry>,
    assignment: Option<Assignment>,
    /// Whether an order for the current assignment may still rest on the book.
    live_order: bool,
    n_quotes: u64,
    strategy: Strategy,
}

impl Trader {
    /// Creates a trader. The margin learner draws its initial margin,
    /// learning rate, and momentum here (three uniform draws, in that order);
    /// other strategies consume no randomness.
    pub fn new(tid: TraderId, ttype: TType, role: Side, band: PriceBand, rng: &mut impl Rng) -> Self {
        let strategy = match ttype {
            TType::Gvwy => Strategy::Gvwy,
            TType::Shvr => Strategy::Shvr,
            TType::Snpr => Strategy::Snpr,
            TType::Zic => Strategy::Zic,
            TType::Zip => {
                let magnitude = rng.random_range(0.05..0.35);
                let margin = match role {
                    Side::Bid => -magnitude,
                    Side::Ask => magnitude,
                };
                Strategy::Zip(ZipState {
                    margin,
                    beta: rng.random_range(0.1..0.5),
                    momentum: rng.random_range(0.0..0.1),
                    prev_change: 0.0,
                    last_event: None,
                })
            }
        };
        Trader {
            tid,
            ttype,
            role,
            band,
            balance: 0,
            blotter: Vec::new(),
            assignment: None,
            live_order: false,
            n_quotes: 0,
            strategy,
        }
    }

    pub fn tid(&self) -> TraderId {
        self.tid
    }

    pub fn ttype(&self) -> TType {
        self.ttype
    }

    pub fn role(&self) -> Side {
        self.role
    }

    pub fn balance(&self) -> i64 {
        self.balance
    }

    pub fn blotter(&self) -> &[BlotterEntry] {
        &self.blotter
    }

    pub fn assignment(&self) -> Option<&Assignment> {
        self.assignment.as_ref()
    }

    pub fn n_quotes(&self) -> u64 {
        self.n_quotes
    }

    /// Current margin state, when this trader is the margin learner.
    pub fn zip_state(&self) -> Option<&ZipState> {
        match &self.strategy {
            Strategy::Zip(state) => Some(state),
            _ => None,
        }
    }

    /// Replaces the current assignment with a fresh one. Returns `true` when
    /// an exchange order for the previous assignment may still be resting, in
    /// which case the caller must cancel it at the venue.
    pub fn assign_order(&mut self, assignment: Assignment) -> Result<bool, TraderError> {
        if !self.band.contains(assignment.limit) {
            return Err(TraderError::LimitOutOfBand {
                limit: assignment.limit,
                min: self.band.min,
                max: self.band.max,
            });
        }
        if assignment.qty != 1 {
            return Err(TraderError::UnsupportedQuantity(assignment.qty));
        }
        let cancel_needed = self.live_order;
        self.live_order = false;
        self.assignment = Some(assignment);
        Ok(cancel_needed)
    }

    /// Session feedback: the trader's latest quote rested on the book.
    pub fn note_order_rested(&mut self) {
        self.live_order = true;
    }

    /// Produces this trader's quote for the current assignment, or nothing
    /// when it has no assignment (or is lurking). Quotes always respect the
    /// assignment limit and the system band.
    pub fn getorder(
        &mut self,
        time: SimTime,
        time_left: f64,
        lob: &PublishedLob,
        rng: &mut impl Rng,
    ) -> Option<LimitOrder> {
        let assignment = self.assignment?;
        let limit = assignment.limit;
        let price = match &self.strategy {
            Strategy::Gvwy => limit,
            Strategy::Shvr => shave_quote(assignment.side, limit, lob, 1),
            Strategy::Snpr => {
                if time_left > SNIPER_WAKE_FRACTION {
                    return None;
                }
                let urgency = (SNIPER_WAKE_FRACTION - time_left) / SNIPER_WAKE_FRACTION;
                let shave = 1 + (3.0 * urgency).floor() as i64;
                shave_quote(assignment.side, limit, lob, shave)
            }
            Strategy::Zic => match assignment.side {
                Side::Bid => Price(rng.random_range(lob.bids.worst.pennies()..=limit.pennies())),
                Side::Ask => Price(rng.random_range(limit.pennies()..=lob.asks.worst.pennies())),
            },
            Strategy::Zip(state) => {
                let raw = limit.pennies() as f64 * (1.0 + state.margin);
                Price(self.band.clamp(round_half_up(raw)))
            }
        };
        self.n_quotes += 1;
        Some(LimitOrder {
            tid: self.tid,
            side: assignment.side,
            price,
            qty: assignment.qty,
            time,
        })
    }

    /// Observes a processed quote and the trade it caused, if any. Only the
    /// margin learner reacts: it moves its margin toward a noisy target price
    /// whenever the event shows its current shout is uncompetitive or leaves
    /// profit unclaimed. Draws two uniforms per firing update.
    pub fn respond(
        &mut self,
        _time: SimTime,
        _lob: &PublishedLob,
        event: &MarketEvent,
        rng: &mut impl Rng,
    ) {
        let Strategy::Zip(state) = &mut self.strategy else {
            return;
        };
        state.last_event = Some((event.quote_price, event.quote_side, event.trade.is_some()));
        let Some(assignment) = self.assignment else {
            return;
        };

        let limit = assignment.limit.pennies() as f64;
        let shout = limit * (1.0 + state.margin);
        let q = event.quote_price.pennies() as f64;
        let traded = event.trade.is_some();

        // Targets above q chase the market upward, targets below chase down.
        let up = |rng: &mut dyn rand::RngCore| {
            rng.random_range(1.0..1.05) * q + rng.random_range(0.0..5.0)
        };
        let down = |rng: &mut dyn rand::RngCore| {
            rng.random_range(0.95..1.0) * q + rng.random_range(-5.0..0.0)
        };

        let target = match assignment.side {
            Side::Ask => {
                if traded && shout <= q {
                    // A trade at or above our shout: widen the margin.
                    Some(up(rng))
                } else if shout >= q && (traded || event.quote_side == Side::Ask) {
                    // Undercut by a rival ask, or priced out of a trade:
                    // cut toward the event price.
                    Some(down(rng))
                } else {
                    None
                }
            }
            Side::Bid => {
                if traded && shout >= q {
                    Some(down(rng))
                } else if shout <= q && (traded || event.quote_side == Side::Bid) {
                    // Outbid by a rival bid, or priced out of a trade:
                    // raise toward the event price.
                    Some(up(rng))
                } else {
                    None
                }
            }
        };
        let Some(target) = target else {
            return;
        };

        let delta = state.beta * (target - shout);
        let change = state.momentum * state.prev_change + (1.0 - state.momentum) * delta;
        state.prev_change = change;
        let margin = (shout + change) / limit - 1.0;
        state.margin = match assignment.side {
            Side::Ask => margin.max(0.0),
            Side::Bid => margin.min(0.0),
        };
    }

    /// Books one side of an execution: computes profit against the current
    /// assignment's limit, updates the balance and blotter, and retires the
    /// assignment. Returns the profit in pennies.
    pub fn bookkeep(&mut self, trade: &Trade, time: SimTime) -> Result<i64, TraderError> {
        let role = if trade.party_standing == self.tid {
            TradeRole::Standing
        } else if trade.party_crossing == self.tid {
            TradeRole::Crossing
        } else {
            return Err(TraderError::NotCounterparty {
                tid: self.tid,
                time: trade.time,
            });
        };
        let assignment = self
            .assignment
            .take()
            .ok_or(TraderError::NoAssignment(self.tid))?;
        let profit = match assignment.side {
            Side::Bid => assignment.limit.pennies() - trade.price.pennies(),
            Side::Ask => trade.price.pennies() - assignment.limit.pennies(),
        };
        debug_assert!(profit >= 0, "limit-respecting quotes cannot book a loss");
        self.balance += profit;
        self.blotter.push(BlotterEntry {
            time,
            price: trade.price,
            qty: trade.qty,
            role,
            assignment_id: assignment.id,
            profit,
        });
        self.live_order = false;
        Ok(profit)
    }

    /// Writes this trader's blotter as CSV rows
    /// `<tid>,<time>,<price>,<assignment_id>,<profit>`.
    pub fn write_blotter_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        for entry in &self.blotter {
            writeln!(
                w,
                "{},{:.6},{},{},{}",
                self.tid, entry.time, entry.price, entry.assignment_id, entry.profit
            )?;
        }
        Ok(())
    }
}

/// The one-penny-improver rule shared by `SHVR` and the woken sniper: improve
/// the best price on the trader's own side by `shave` pennies, capped at the
/// limit; with no own-side best, quote the published stub (worst) price.
fn shave_quote(side: Side, limit: Price, lob: &PublishedLob, shave: i64) -> Price {
    match side {
        Side::Bid => match lob.bids.best {
            Some(best) => Price((best.pennies() + shave).min(limit.pennies())),
            None => lob.bids.worst,
        },
        Side::Ask => match lob.asks.best {
            Some(best) => Price((best.pennies() - shave).max(limit.pennies())),
            None => lob.asks.worst,
        },
    }
}

/// Rounds to the nearest penny, half up. Quote construction only sees
/// nonnegative values.
fn round_half_up(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}
