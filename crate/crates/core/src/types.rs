//! Shared primitive types: prices in integer pennies, the system price band,
//! book sides, and compact trader identifiers.

use std::fmt;

use arrayvec::ArrayString;
use serde::Serialize;

/// Simulated time in seconds from session start.
pub type SimTime = f64;

/// Order and assignment quantity. The venue only accepts unit quantities.
pub type Qty = u32;

/// A price in integer pennies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Price(pub i64);

impl Price {
    pub fn pennies(self) -> i64 {
        self.0
    }
}

impl From<i64> for Price {
    fn from(pennies: i64) -> Self {
        Price(pennies)
    }
}

impl fmt::Display for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Inclusive band of admissible prices. Every accepted quote lies inside it,
/// and the published "worst" prices on each side are its two ends.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PriceBand {
    pub min: Price,
    pub max: Price,
}

impl PriceBand {
    pub const DEFAULT_MIN: i64 = 1;
    pub const DEFAULT_MAX: i64 = 1000;

    /// Builds a band, rejecting empty or non-positive ranges.
    pub fn new(min: i64, max: i64) -> Option<Self> {
        if min >= 1 && min <= max {
            Some(PriceBand {
                min: Price(min),
                max: Price(max),
            })
        } else {
            None
        }
    }

    pub fn contains(self, price: Price) -> bool {
        self.min <= price && price <= self.max
    }

    pub fn clamp(self, pennies: i64) -> i64 {
        pennies.clamp(self.min.0, self.max.0)
    }
}

impl Default for PriceBand {
    fn default() -> Self {
        PriceBand {
            min: Price(Self::DEFAULT_MIN),
            max: Price(Self::DEFAULT_MAX),
        }
    }
}

/// Side of the book an order rests on. Buy assignments quote bids, sell
/// assignments quote asks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
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

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Bid => "bid",
            Side::Ask => "ask",
        })
    }
}

/// Short ticker-style trader identifier such as `B07` or `S15`.
///
/// Stored inline (up to 8 bytes) so ids stay `Copy` and hash cheaply in the
/// matching core's per-trader index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TraderId(ArrayString<8>);

impl TraderId {
    /// Builds an id from arbitrary text. Returns `None` when it does not fit
    /// the 8-byte inline buffer.
    pub fn new(id: &str) -> Option<Self> {
        ArrayString::from(id).ok().map(TraderId)
    }

    /// Builds the canonical generated id: prefix plus a zero-padded index,
    /// e.g. `('B', 3)` gives `B03` and `('S', 12)` gives `S12`.
    pub fn from_index(prefix: char, index: usize) -> Self {
        use std::fmt::Write;
        let mut s = ArrayString::new();
        write!(s, "{prefix}{index:02}").expect("generated trader id fits 8 bytes");
        TraderId(s)
    }

    pub fn as_str(&self) -> &str {
        self.0.as_str()
    }
}

impl fmt::Display for TraderId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.0.as_str())
    }
}
