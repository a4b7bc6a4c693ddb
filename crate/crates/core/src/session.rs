//! Session runner: builds a trader population, drives the market loop
//! against the simulated clock, and collects per-type statistics.
//!
//! Each loop step distributes any customer orders that have come due, polls
//! one uniformly chosen trader for a quote, processes that quote at the
//! exchange, books any resulting trade with both counterparties, and then
//! shows the processed quote to every trader so adaptive strategies can
//! react. A single seeded generator drives population setup, order flow,
//! trader choice, and every strategy draw, so a session is a pure function
//! of its config.

use std::collections::HashMap;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::exchange::{Exchange, MarketEvent, TapeEntry};
use crate::orderflow::{OrderFlow, OrderFlowError, OrderSchedule};
use crate::traders::{TType, Trader, TraderError};
use crate::types::{Price, PriceBand, Side, SimTime, TraderId};

/// How many traders of each type to field on each side of the market.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PopulationSpec {
    pub buyers: Vec<(TType, usize)>,
    pub sellers: Vec<(TType, usize)>,
}

impl PopulationSpec {
    /// A market where the seller lineup mirrors the buyer lineup.
    pub fn symmetric(groups: Vec<(TType, usize)>) -> Self {
        PopulationSpec {
            buyers: groups.clone(),
            sellers: groups,
        }
    }

    pub fn n_buyers(&self) -> usize {
        self.buyers.iter().map(|(_, n)| n).sum()
    }

    pub fn n_sellers(&self) -> usize {
        self.sellers.iter().map(|(_, n)| n).sum()
    }
}

/// Everything one market run needs: identity, clock window, population,
/// order generation, price band, and the seed that makes it reproducible.
#[derive(Clone, Debug)]
pub struct SessionConfig {
    pub session_id: String,
    pub start: SimTime,
    pub end: SimTime,
    pub population: PopulationSpec,
    pub schedule: OrderSchedule,
    pub band: PriceBand,
    pub seed: u64,
    /// Loop step in seconds; defaults to 1 / (total trader count), polling
    /// each trader once per simulated second on average.
    pub timestep: Option<f64>,
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), SessionError> {
        if !self.start.is_finite() || !self.end.is_finite() || self.start >= self.end {
            return Err(SessionError::InvalidTimeWindow {
                start: self.start,
                end: self.end,
            });
        }
        if let Some(step) = self.timestep {
            if !step.is_finite() || step <= 0.0 {
                return Err(SessionError::NonPositiveTimestep(step));
            }
        }
        if self.population.n_buyers() == 0 {
            return Err(SessionError::EmptyPopulationSide(Side::Bid));
        }
        if self.population.n_sellers() == 0 {
            return Err(SessionError::EmptyPopulationSide(Side::Ask));
        }
        if !self.schedule.covers(self.start, self.end) {
            return Err(SessionError::ScheduleCoverage {
                start: self.start,
                end: self.end,
            });
        }
        Ok(())
    }

    fn effective_timestep(&self, n_traders: usize) -> f64 {
        self.timestep.unwrap_or(1.0 / n_traders as f64)
    }
}

/// One execution enriched with both counterparties and their customer limit
/// prices, captured at trade time for later surplus accounting.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TradeRecord {
    pub time: SimTime,
    pub price: Price,
    pub buyer: TraderId,
    pub seller: TraderId,
    pub buyer_limit: Price,
    pub seller_limit: Price,
}

/// Aggregate balances for one trader type across both sides of the market.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TypeTotals {
    pub ttype: TType,
    pub total_balance: i64,
    pub trader_count: usize,
}

impl TypeTotals {
    pub fn mean_balance(&self) -> f64 {
        self.total_balance as f64 / self.trader_count as f64
    }
}

/// End-of-session summary: per-type profit totals, the final top of book,
/// and the trade count.
#[derive(Clone, Debug, PartialEq)]
pub struct SessionStats {
    pub session_id: String,
    pub end_time: SimTime,
    /// One entry per trader type present, sorted by type name.
    pub per_type: Vec<TypeTotals>,
    pub best_bid: Option<Price>,
    pub best_ask: Option<Price>,
    pub n_trades: usize,
}

impl SessionStats {
    /// Writes the one-line CSV summary:
    /// `<session_id>,<end_time>,{<ttype>,<total>,<count>,<mean>}...,<best_bid>,<best_ask>`
    /// with time to six decimals, means to two, and empty fields for an
    /// absent best bid or ask.
    pub fn write_balances_row<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "{},{:.6}", self.session_id, self.end_time)?;
        for totals in &self.per_type {
            write!(
                w,
                ",{},{},{},{:.2}",
                totals.ttype,
                totals.total_balance,
                totals.trader_count,
                totals.mean_balance()
            )?;
        }
        let fmt = |p: Option<Price>| p.map(|p| p.to_string()).unwrap_or_default();
        writeln!(w, ",{},{}", fmt(self.best_bid), fmt(self.best_ask))
    }
}

/// Full result of one session: the summary, the per-trade surplus records,
/// the public tape, and the traders with their final balances and blotters.
#[derive(Clone, Debug)]
pub struct SessionOutcome {
    pub stats: SessionStats,
    pub trades: Vec<TradeRecord>,
    pub tape: Vec<TapeEntry>,
    pub traders: Vec<Trader>,
}

impl SessionOutcome {
    pub fn write_tape_csv<W: Write>(&self, w: W) -> io::Result<()> {
        crate::exchange::write_tape_csv(&self.tape, w)
    }

    /// Writes every trader's blotter, buyers before sellers in id order.
    pub fn write_blotters_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        for trader in &self.traders {
            trader.write_blotter_csv(&mut w)?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SessionError {
    #[error("session window invalid: start {start}, end {end}")]
    InvalidTimeWindow { start: SimTime, end: SimTime },
    #[error("timestep must be positive, got {0}")]
    NonPositiveTimestep(f64),
    #[error("population has no traders on the {0} side")]
    EmptyPopulationSide(Side),
    #[error("schedule segments do not cover the session window [{start}, {end})")]
    ScheduleCoverage { start: SimTime, end: SimTime },
    #[error(transparent)]
    Flow(#[from] OrderFlowError),
    #[error(transparent)]
    Exchange(#[from] crate::exchange::ExchangeError),
    #[error(transparent)]
    Trader(#[from] TraderError),
}

/// Builds the trader population: buyers first with ids B00, B01, ... then
/// sellers with ids S00, S01, ..., numbering across groups. Strategy state
/// that needs randomness draws from `rng` in id order.
pub fn populate_market(
    spec: &PopulationSpec,
    band: PriceBand,
    rng: &mut impl Rng,
) -> Result<Vec<Trader>, SessionError> {
    if spec.n_buyers() == 0 {
        return Err(SessionError::EmptyPopulationSide(Side::Bid));
    }
    if spec.n_sellers() == 0 {
        return Err(SessionError::EmptyPopulationSide(Side::Ask));
    }
    let mut traders = Vec::with_capacity(spec.n_buyers() + spec.n_sellers());
    for (side, prefix, groups) in [
        (Side::Bid, 'B', &spec.buyers),
        (Side::Ask, 'S', &spec.sellers),
    ] {
        let mut index = 0;
        for &(ttype, count) in groups {
            for _ in 0..count {
                let tid = TraderId::from_index(prefix, index);
                traders.push(Trader::new(tid, ttype, side, band, rng));
                index += 1;
            }
        }
    }
    Ok(traders)
}

/// Runs one market session to completion. Deterministic: the same config
/// (seed included) always produces the same outcome.
pub fn market_session(config: &SessionConfig) -> Result<SessionOutcome, SessionError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut traders = populate_market(&config.population, config.band, &mut rng)?;
    let n_traders = traders.len();
    let by_id: HashMap<TraderId, usize> = traders
        .iter()
        .enumerate()
        .map(|(i, t)| (t.tid(), i))
        .collect();
    let n_buyers = config.population.n_buyers();

    let mut exchange = Exchange::new(config.band);
    for trader in &traders {
        exchange.register_trader(trader.tid());
    }
    let mut flow = OrderFlow::new(
        config.schedule.clone(),
        config.band,
        config.start,
        n_buyers,
        config.population.n_sellers(),
    )?;

    let duration = config.end - config.start;
    let timestep = config.effective_timestep(n_traders);
    let mut trades = Vec::new();
    let mut time = config.start;

    while time < config.end {
        let time_left = (config.end - time) / duration;

        for issue in flow.customer_orders(time, &mut rng)? {
            let index = match issue.side {
                Side::Bid => issue.trader_index,
                Side::Ask => n_buyers + issue.trader_index,
            };
            let stale_order = traders[index].assign_order(issue.assignment)?;
            if stale_order {
                exchange.cancel_order(traders[index].tid())?;
            }
        }

        let picked = rng.random_range(0..n_traders);
        let lob = exchange.publish_lob(time);
        if let Some(order) = traders[picked].getorder(time, time_left, &lob, &mut rng) {
            let trade = exchange.submit_order(time, order)?;
            match trade {
                None => traders[picked].note_order_rested(),
                Some(trade) => {
                    let limit_of = |tid: TraderId| -> Price {
                        traders[by_id[&tid]]
                            .assignment()
                            .expect("counterparties hold assignments at trade time")
                            .limit
                    };
                    let record = TradeRecord {
                        time,
                        price: trade.price,
                        buyer: trade.buyer(),
                        seller: trade.seller(),
                        buyer_limit: limit_of(trade.buyer()),
                        seller_limit: limit_of(trade.seller()),
                    };
                    traders[by_id[&trade.party_standing]].bookkeep(&trade, time)?;
                    traders[by_id[&trade.party_crossing]].bookkeep(&trade, time)?;
                    trades.push(record);
                }
            }
            let lob = exchange.publish_lob(time);
            let event = MarketEvent {
                time,
                quote_side: order.side,
                quote_price: order.price,
                trade,
            };
            for trader in &mut traders {
                trader.respond(time, &lob, &event, &mut rng);
            }
        }

        time += timestep;
    }

    let closing = exchange.publish_lob(config.end);
    let stats = SessionStats {
        session_id: config.session_id.clone(),
        end_time: config.end,
        per_type: aggregate_by_type(&traders),
        best_bid: closing.bids.best,
        best_ask: closing.asks.best,
        n_trades: exchange.tape().len(),
    };
    Ok(SessionOutcome {
        stats,
        trades,
        tape: exchange.tape().to_vec(),
        traders,
    })
}

fn aggregate_by_type(traders: &[Trader]) -> Vec<TypeTotals> {
    let mut totals: Vec<TypeTotals> = Vec::new();
    for ttype in TType::ALL {
        let group: Vec<&Trader> = traders.iter().filter(|t| t.ttype() == ttype).collect();
        if group.is_empty() {
            continue;
        }
        totals.push(TypeTotals {
            ttype,
            total_balance: group.iter().map(|t| t.balance()).sum(),
            trader_count: group.len(),
        });
    }
    totals
}
