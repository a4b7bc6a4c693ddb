//! Matching core: a price-time-priority limit order book for one security,
//! with unit-quantity orders, replace-then-match submission, a trade tape,
//! and anonymized depth publication.
//!
//! Submission semantics: each trader may keep at most one resting order, so
//! an incoming order first deletes that trader's previous order (forfeiting
//! its queue position), then either executes against the best opposite order
//! or rests. An execution always prices at the standing (resting) order's
//! price, and the crossing order never rests.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::types::{Price, PriceBand, Qty, Side, SimTime, TraderId};

/// A unit-quantity limit order stamped with its submission time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LimitOrder {
    pub tid: TraderId,
    pub side: Side,
    pub price: Price,
    pub qty: Qty,
    pub time: SimTime,
}

/// One execution. The standing party's resting order set the price; the
/// crossing party's incoming order filled immediately and never rested.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Trade {
    pub time: SimTime,
    pub price: Price,
    pub qty: Qty,
    pub party_standing: TraderId,
    pub party_crossing: TraderId,
    pub crossing_side: Side,
}

impl Trade {
    /// The buying counterparty.
    pub fn buyer(&self) -> TraderId {
        match self.crossing_side {
            Side::Bid => self.party_crossing,
            Side::Ask => self.party_standing,
        }
    }

    /// The selling counterparty.
    pub fn seller(&self) -> TraderId {
        match self.crossing_side {
            Side::Bid => self.party_standing,
            Side::Ask => self.party_crossing,
        }
    }
}

/// Kind of a tape record. Only executions are taped; cancellations are not.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TapeKind {
    Trade,
}

/// Public record of one execution, counterparties withheld.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TapeEntry {
    pub kind: TapeKind,
    pub time: SimTime,
    pub price: Price,
    pub qty: Qty,
}

/// Anonymized depth for one side of the book.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PublishedSide {
    /// Price of the most competitive resting order, if any.
    pub best: Option<Price>,
    /// Least competitive price the system admits on this side: the band
    /// minimum for bids, the band maximum for asks. Also the stub price for
    /// traders quoting into an empty side.
    pub worst: Price,
    /// Number of resting orders across all levels.
    pub n_orders: usize,
    /// (price, resting quantity) pairs, best first: bids descend, asks
    /// ascend. Levels with zero quantity never appear.
    pub ladder: Vec<(Price, u64)>,
}

/// Time and price of the most recent execution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LastTrade {
    pub time: SimTime,
    pub price: Price,
}

/// The anonymized market-data snapshot traders are shown. Carries no trader
/// identities anywhere.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PublishedLob {
    pub time: SimTime,
    pub bids: PublishedSide,
    pub asks: PublishedSide,
    pub last_trade: Option<LastTrade>,
}

/// What the venue announces after processing one order: the quote itself and
/// the execution it caused, if any.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarketEvent {
    pub time: SimTime,
    pub quote_side: Side,
    pub quote_price: Price,
    pub trade: Option<Trade>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ExchangeError {
    #[error("unknown trader id {0}")]
    UnknownTrader(TraderId),
    #[error("price {price} outside system band [{min}, {max}]")]
    PriceOutOfBand {
        price: Price,
        min: Price,
        max: Price,
    },
    #[error("only unit quantities are accepted, got {0}")]
    UnsupportedQuantity(Qty),
}

/// One side of the book: price levels in a sorted map, FIFO queues per level.
#[derive(Debug)]
struct BookSide {
    side: Side,
    levels: BTreeMap<i64, VecDeque<LimitOrder>>,
    n_orders: usize,
}

impl BookSide {
    fn new(side: Side) -> Self {
        BookSide {
            side,
            levels: BTreeMap::new(),
            n_orders: 0,
        }
    }

    fn best(&self) -> Option<Price> {
        let key = match self.side {
            Side::Bid => self.levels.keys().next_back(),
            Side::Ask => self.levels.keys().next(),
        };
        key.copied().map(Price)
    }

    fn insert(&mut self, order: LimitOrder) {
        self.levels
            .entry(order.price.pennies())
            .or_default()
            .push_back(order);
        self.n_orders += 1;
    }

    fn remove(&mut self, tid: TraderId, price: Price) -> Option<LimitOrder> {
        let key = price.pennies();
        let queue = self.levels.get_mut(&key)?;
        let pos = queue.iter().position(|o| o.tid == tid)?;
        let order = queue.remove(pos);
        if queue.is_empty() {
            self.levels.remove(&key);
        }
        self.n_orders -= 1;
        order
    }

    /// Removes and returns the oldest order at the best price.
    fn pop_best(&mut self) -> Option<LimitOrder> {
        let key = self.best()?.pennies();
        let queue = self.levels.get_mut(&key)?;
        let order = queue.pop_front();
        if queue.is_empty() {
            self.levels.remove(&key);
        }
        if order.is_some() {
            self.n_orders -= 1;
        }
        order
    }

    fn ladder(&self) -> Vec<(Price, u64)> {
        let levels = self
            .levels
            .iter()
            .map(|(price, queue)| (Price(*price), queue.iter().map(|o| u64::from(o.qty)).sum()));
        match self.side {
            Side::Bid => levels.rev().collect(),
            Side::Ask => levels.collect(),
        }
    }

    fn publish(&self, worst: Price) -> PublishedSide {
        PublishedSide {
            best: self.best(),
            worst,
            n_orders: self.n_orders,
            ladder: self.ladder(),
        }
    }
}

/// The venue: registered traders, the two book sides, and the tape.
#[derive(Debug)]
pub struct Exchange {
    band: PriceBand,
    known: HashSet<TraderId>,
    bids: BookSide,
    asks: BookSide,
    /// Locates each trader's single resting order, if any.
    resting: HashMap<TraderId, (Side, Price)>,
    tape: Vec<TapeEntry>,
}

impl Exchange {
    pub fn new(band: PriceBand) -> Self {
        Exchange {
            band,
            known: HashSet::new(),
            bids: BookSide::new(Side::Bid),
            asks: BookSide::new(Side::Ask),
            resting: HashMap::new(),
            tape: Vec::new(),
        }
    }

    pub fn band(&self) -> PriceBand {
        self.band
    }

    /// Admits `tid` as an order source. Orders and cancels from unregistered
    /// ids are rejected.
    pub fn register_trader(&mut self, tid: TraderId) {
        self.known.insert(tid);
    }

    pub fn is_registered(&self, tid: TraderId) -> bool {
        self.known.contains(&tid)
    }

    /// Processes one order: validates it, removes the trader's previous
    /// resting order, then matches against the best opposite order or rests.
    /// Returns the trade if one executed. On error the book is untouched.
    pub fn submit_order(
        &mut self,
        time: SimTime,
        order: LimitOrder,
    ) -> Result<Option<Trade>, ExchangeError> {
        if !self.known.contains(&order.tid) {
            return Err(ExchangeError::UnknownTrader(order.tid));
        }
        if order.qty != 1 {
            return Err(ExchangeError::UnsupportedQuantity(order.qty));
        }
        if !self.band.contains(order.price) {
            return Err(ExchangeError::PriceOutOfBand {
                price: order.price,
                min: self.band.min,
                max: self.band.max,
            });
        }

        self.remove_resting(order.tid);
        let accepted = LimitOrder { time, ..order };

        let crosses = match accepted.side {
            Side::Bid => self.asks.best().is_some_and(|ask| accepted.price >= ask),
            Side::Ask => self.bids.best().is_some_and(|bid| accepted.price <= bid),
        };

        let result = if crosses {
            let standing = self
                .side_mut(accepted.side.opposite())
                .pop_best()
                .expect("crossed side has a best order");
            self.resting.remove(&standing.tid);
            let trade = Trade {
                time,
                price: standing.price,
                qty: accepted.qty,
                party_standing: standing.tid,
                party_crossing: accepted.tid,
                crossing_side: accepted.side,
            };
            self.tape.push(TapeEntry {
                kind: TapeKind::Trade,
                time,
                price: trade.price,
                qty: trade.qty,
            });
            Some(trade)
        } else {
            self.resting
                .insert(accepted.tid, (accepted.side, accepted.price));
            self.side_mut(accepted.side).insert(accepted);
            None
        };

        debug_assert!(
            match (self.bids.best(), self.asks.best()) {
                (Some(bid), Some(ask)) => bid < ask,
                _ => true,
            },
            "book must not rest crossed"
        );
        Ok(result)
    }

    /// Removes `tid`'s resting order, if any. Returns whether one existed.
    pub fn cancel_order(&mut self, tid: TraderId) -> Result<bool, ExchangeError> {
        if !self.known.contains(&tid) {
            return Err(ExchangeError::UnknownTrader(tid));
        }
        Ok(self.remove_resting(tid))
    }

    fn remove_resting(&mut self, tid: TraderId) -> bool {
        match self.resting.remove(&tid) {
            Some((side, price)) => {
                let removed = self.side_mut(side).remove(tid, price);
                debug_assert!(removed.is_some(), "resting index out of sync with book");
                true
            }
            None => false,
        }
    }

    fn side_mut(&mut self, side: Side) -> &mut BookSide {
        match side {
            Side::Bid => &mut self.bids,
            Side::Ask => &mut self.asks,
        }
    }

    /// Builds the anonymized snapshot for `time`.
    pub fn publish_lob(&self, time: SimTime) -> PublishedLob {
        PublishedLob {
            time,
            bids: self.bids.publish(self.band.min),
            asks: self.asks.publish(self.band.max),
            last_trade: self.tape.last().map(|e| LastTrade {
                time: e.time,
                price: e.price,
            }),
        }
    }

    /// All executions so far, oldest first.
    pub fn tape(&self) -> &[TapeEntry] {
        &self.tape
    }

    /// Writes the tape as CSV rows `TRD,<time>,<price>`, time to six decimal
    /// places and price in pennies.
    pub fn write_tape_csv<W: Write>(&self, w: W) -> io::Result<()> {
        write_tape_csv(&self.tape, w)
    }
}

/// Writes tape entries as CSV rows `TRD,<time>,<price>`, time to six decimal
/// places and price in pennies.
pub fn write_tape_csv<W: Write>(tape: &[TapeEntry], mut w: W) -> io::Result<()> {
    for entry in tape {
        match entry.kind {
            TapeKind::Trade => writeln!(w, "TRD,{:.6},{}", entry.time, entry.price)?,
        }
    }
    Ok(())
}
