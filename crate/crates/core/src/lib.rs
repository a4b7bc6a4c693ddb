//! Discrete-event simulator for a single-security limit-order-book market
//! populated by robot traders.
//!
//! The crate is organised around one session loop: an [`exchange::Exchange`]
//! matches limit orders under price-time priority, [`traders::Trader`]s turn
//! customer assignments into quotes, [`orderflow::OrderFlow`] drips those
//! assignments in from configurable supply and demand schedules, and
//! [`session::market_session`] wires the three together under a seeded RNG.
//! [`metrics`] scores the resulting transaction streams and
//! [`config`] parses the text formats used by the command line.
//!
//! ```
//! use lobsim::config::SessionTable;
//! use lobsim::session::market_session;
//!
//! let table = SessionTable {
//!     end: Some(30.0),
//!     buyers: Some("GVWY:2".to_string()),
//!     sellers: Some("GVWY:2".to_string()),
//!     ..SessionTable::default()
//! };
//! let outcome = market_session(&table.resolve()?)?;
//! assert_eq!(outcome.traders.len(), 4);
//! assert_eq!(outcome.tape.len(), outcome.stats.n_trades);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod config;
pub mod exchange;
pub mod metrics;
pub mod orderflow;
pub mod session;
pub mod traders;
pub mod types;

pub use types::{Price, PriceBand, Qty, Side, SimTime, TraderId};
