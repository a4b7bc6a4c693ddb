//! Customer order generation: limit prices drawn from time-varying supply
//! and demand schedules, arrival times from periodic or drip-feed processes.
//!
//! Each side of the market (buyers driven by the demand schedule, sellers by
//! the supply schedule) is described by a list of non-overlapping time
//! segments, each holding a price range and an optional offset function that
//! shifts the whole range as time passes. At session open every trader gets
//! an assignment so the market is never empty; afterwards the time mode
//! decides whether whole populations are refreshed at interval boundaries or
//! single assignments drip in one trader at a time.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

use crate::traders::Assignment;
use crate::types::{Price, PriceBand, Side, SimTime};

/// When traders receive fresh customer assignments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeMode {
    /// Every trader is refreshed simultaneously at each interval boundary.
    Periodic,
    /// One assignment arrives every `interval / n` seconds, round-robin.
    DripFixed,
    /// Drip arrivals with each gap perturbed within half a slot.
    DripJittered,
    /// Drip arrivals with exponential inter-arrival times (mean one slot).
    DripPoisson,
}

/// How a slice of arrivals is drawn, used by the drip modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum DripKind {
    Fixed,
    Jittered,
    Poisson,
}

impl TimeMode {
    fn drip_kind(self) -> Option<DripKind> {
        match self {
            TimeMode::Periodic => None,
            TimeMode::DripFixed => Some(DripKind::Fixed),
            TimeMode::DripJittered => Some(DripKind::Jittered),
            TimeMode::DripPoisson => Some(DripKind::Poisson),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TimeMode::Periodic => "periodic",
            TimeMode::DripFixed => "drip-fixed",
            TimeMode::DripJittered => "drip-jittered",
            TimeMode::DripPoisson => "drip-poisson",
        }
    }
}

impl fmt::Display for TimeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("unknown time mode {0:?}")]
pub struct ParseTimeModeError(pub String);

impl FromStr for TimeMode {
    type Err = ParseTimeModeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "periodic" => Ok(TimeMode::Periodic),
            "drip-fixed" => Ok(TimeMode::DripFixed),
            "drip-jittered" => Ok(TimeMode::DripJittered),
            "drip-poisson" => Ok(TimeMode::DripPoisson),
            _ => Err(ParseTimeModeError(s.to_string())),
        }
    }
}

/// How limit prices are laid out across a side's traders.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepMode {
    /// Evenly spaced from the range's low to high end, inclusive.
    Fixed,
    /// Evenly spaced, then each price perturbed within half a step.
    Jittered,
    /// Independently uniform across the range.
    Random,
}

impl StepMode {
    pub fn name(self) -> &'static str {
        match self {
            StepMode::Fixed => "fixed",
            StepMode::Jittered => "jittered",
            StepMode::Random => "random",
        }
    }
}

impl fmt::Display for StepMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("unknown step mode {0:?}")]
pub struct ParseStepModeError(pub String);

impl FromStr for StepMode {
    type Err = ParseStepModeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fixed" => Ok(StepMode::Fixed),
            "jittered" => Ok(StepMode::Jittered),
            "random" => Ok(StepMode::Random),
            _ => Err(ParseStepModeError(s.to_string())),
        }
    }
}

/// Time-to-penny-offset function shifting a segment's price range.
#[derive(Clone, Debug, PartialEq, Default)]
pub enum OffsetFn {
    /// No shift.
    #[default]
    None,
    /// `slope` pennies per second, rounded to the nearest penny.
    Linear { slope: f64 },
    /// `amplitude * sin(2*pi*t / period)`, rounded to the nearest penny.
    Sinusoid { amplitude: f64, period: f64 },
    /// A random walk stepping uniformly from {-1, 0, +1} pennies once per
    /// whole second, replayed from a fixed seed so it is reproducible.
    RandomWalk { seed: u64 },
    /// Piecewise-constant offsets: `(from_second, pennies)` points applied in
    /// order, zero before the first point.
    Table { points: Vec<(f64, i64)> },
}

impl OffsetFn {
    fn validate(&self) -> Result<(), OrderFlowError> {
        match self {
            OffsetFn::None | OffsetFn::RandomWalk { .. } => Ok(()),
            OffsetFn::Linear { slope } => {
                if slope.is_finite() {
                    Ok(())
                } else {
                    Err(OrderFlowError::NonFiniteOffsetParameter)
                }
            }
            OffsetFn::Sinusoid { amplitude, period } => {
                if !amplitude.is_finite() || !period.is_finite() {
                    Err(OrderFlowError::NonFiniteOffsetParameter)
                } else if *period <= 0.0 {
                    Err(OrderFlowError::NonPositivePeriod(*period))
                } else {
                    Ok(())
                }
            }
            OffsetFn::Table { points } => {
                if points.iter().any(|(t, _)| !t.is_finite()) {
                    return Err(OrderFlowError::NonFiniteOffsetParameter);
                }
                if points.windows(2).any(|w| w[0].0 >= w[1].0) {
                    return Err(OrderFlowError::UnorderedOffsetTable);
                }
                Ok(())
            }
        }
    }

    /// Offset in pennies at `t_rel` seconds into the segment.
    fn eval(&self, t_rel: f64) -> i64 {
        match self {
            OffsetFn::None => 0,
            OffsetFn::Linear { slope } => (slope * t_rel).round() as i64,
            OffsetFn::Sinusoid { amplitude, period } => {
                (amplitude * (2.0 * std::f64::consts::PI * t_rel / period).sin()).round() as i64
            }
            OffsetFn::RandomWalk { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let steps = t_rel.floor() as u64;
                (0..steps).map(|_| rng.random_range(-1..=1i64)).sum()
            }
            OffsetFn::Table { points } => points
                .iter()
                .take_while(|(from, _)| *from <= t_rel)
                .last()
                .map_or(0, |(_, pennies)| *pennies),
        }
    }
}

/// One stretch of a side's schedule: a price range valid on `[t_start,
/// t_end)`, shifted over time by the offset function.
#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleSegment {
    t_start: SimTime,
    t_end: SimTime,
    price_lo: Price,
    price_hi: Price,
    offset_fn: OffsetFn,
}

impl ScheduleSegment {
    pub fn new(
        t_start: SimTime,
        t_end: SimTime,
        price_lo: Price,
        price_hi: Price,
        offset_fn: OffsetFn,
    ) -> Result<Self, OrderFlowError> {
        if !t_start.is_finite() || !t_end.is_finite() || t_start >= t_end {
            return Err(OrderFlowError::InvalidTimeBounds { t_start, t_end });
        }
        if price_lo > price_hi {
            return Err(OrderFlowError::InvalidPriceBounds {
                lo: price_lo,
                hi: price_hi,
            });
        }
        offset_fn.validate()?;
        Ok(ScheduleSegment {
            t_start,
            t_end,
            price_lo,
            price_hi,
            offset_fn,
        })
    }

    pub fn t_start(&self) -> SimTime {
        self.t_start
    }

    pub fn t_end(&self) -> SimTime {
        self.t_end
    }

    pub fn price_lo(&self) -> Price {
        self.price_lo
    }

    pub fn price_hi(&self) -> Price {
        self.price_hi
    }

    pub fn offset_fn(&self) -> &OffsetFn {
        &self.offset_fn
    }

    pub fn contains(&self, time: SimTime) -> bool {
        self.t_start <= time && time < self.t_end
    }

    /// Offset in pennies at `time`, measured from the segment's own start.
    pub fn offset_at(&self, time: SimTime) -> Result<i64, OrderFlowError> {
        if !self.contains(time) {
            return Err(OrderFlowError::TimeOutsideSegment {
                time,
                t_start: self.t_start,
                t_end: self.t_end,
            });
        }
        Ok(self.offset_fn.eval(time - self.t_start))
    }

    /// The segment's price range at `time`: both ends shifted by the offset,
    /// then clamped into the system band. Errors when the shifted range falls
    /// entirely outside the band.
    pub fn price_range_at(
        &self,
        time: SimTime,
        band: PriceBand,
    ) -> Result<(Price, Price), OrderFlowError> {
        let offset = self.offset_at(time)?;
        let lo = self.price_lo.pennies() + offset;
        let hi = self.price_hi.pennies() + offset;
        if hi < band.min.pennies() || lo > band.max.pennies() {
            return Err(OrderFlowError::EmptyPriceRange {
                lo,
                hi,
                min: band.min,
                max: band.max,
            });
        }
        Ok((Price(band.clamp(lo)), Price(band.clamp(hi))))
    }
}

/// Full description of how both sides' customer orders are generated.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderSchedule {
    demand: Vec<ScheduleSegment>,
    supply: Vec<ScheduleSegment>,
    interval: f64,
    timemode: TimeMode,
    stepmode: StepMode,
}

impl OrderSchedule {
    pub fn new(
        demand: Vec<ScheduleSegment>,
        supply: Vec<ScheduleSegment>,
        interval: f64,
        timemode: TimeMode,
        stepmode: StepMode,
    ) -> Result<Self, OrderFlowError> {
        if !interval.is_finite() || interval <= 0.0 {
            return Err(OrderFlowError::NonPositiveInterval(interval));
        }
        for segments in [&demand, &supply] {
            for pair in segments.windows(2) {
                if pair[1].t_start < pair[0].t_end {
                    return Err(OrderFlowError::OverlappingSegments {
                        at: pair[1].t_start,
                    });
                }
            }
        }
        Ok(OrderSchedule {
            demand,
            supply,
            interval,
            timemode,
            stepmode,
        })
    }

    pub fn demand(&self) -> &[ScheduleSegment] {
        &self.demand
    }

    pub fn supply(&self) -> &[ScheduleSegment] {
        &self.supply
    }

    pub fn interval(&self) -> f64 {
        self.interval
    }

    pub fn timemode(&self) -> TimeMode {
        self.timemode
    }

    pub fn stepmode(&self) -> StepMode {
        self.stepmode
    }

    pub fn segments(&self, side: Side) -> &[ScheduleSegment] {
        match side {
            Side::Bid => &self.demand,
            Side::Ask => &self.supply,
        }
    }

    /// The unique segment containing `time` on `side`.
    pub fn segment_for(
        &self,
        side: Side,
        time: SimTime,
    ) -> Result<&ScheduleSegment, OrderFlowError> {
        self.segments(side)
            .iter()
            .find(|seg| seg.contains(time))
            .ok_or(OrderFlowError::NoSegment { side, time })
    }

    /// Whether both sides' segments tile the whole window `[start, end)`.
    pub fn covers(&self, start: SimTime, end: SimTime) -> bool {
        [&self.demand, &self.supply]
            .iter()
            .all(|segments| side_covers(segments, start, end))
    }
}

fn side_covers(segments: &[ScheduleSegment], start: SimTime, end: SimTime) -> bool {
    let mut t = start;
    for seg in segments {
        if t >= end {
            return true;
        }
        if seg.t_start <= t && t < seg.t_end {
            t = seg.t_end;
        }
    }
    t >= end
}

/// Lays `n` limit prices across `[lo, hi]` according to the step mode. A
/// single fixed-mode trader gets the midpoint, rounded half up.
pub fn limit_prices_for_side(
    lo: Price,
    hi: Price,
    n: usize,
    stepmode: StepMode,
    rng: &mut impl Rng,
) -> Vec<Price> {
    assert!(n >= 1, "a side must have at least one trader");
    assert!(lo <= hi, "price range must be non-empty");
    let lo = lo.pennies();
    let hi = hi.pennies();
    let span = hi - lo;
    let fixed = |i: usize| -> i64 {
        if n == 1 {
            (lo + hi + 1) / 2
        } else {
            lo + (2 * i as i64 * span + (n as i64 - 1)) / (2 * (n as i64 - 1))
        }
    };
    match stepmode {
        StepMode::Fixed => (0..n).map(|i| Price(fixed(i))).collect(),
        StepMode::Jittered => {
            let step = if n == 1 {
                span as f64
            } else {
                span as f64 / (n - 1) as f64
            };
            (0..n)
                .map(|i| {
                    let jitter = if step > 0.0 {
                        rng.random_range(-step / 2.0..step / 2.0)
                    } else {
                        0.0
                    };
                    Price((fixed(i) as f64 + jitter).round().clamp(lo as f64, hi as f64) as i64)
                })
                .collect()
        }
        StepMode::Random => (0..n).map(|_| Price(rng.random_range(lo..=hi))).collect(),
    }
}

/// One customer order routed to a trader: which side, which trader slot on
/// that side, and the assignment itself.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Issue {
    pub side: Side,
    pub trader_index: usize,
    pub assignment: Assignment,
}

#[derive(Clone, Copy, Debug)]
struct DripClock {
    next_time: SimTime,
    round_robin: usize,
}

/// Stateful generator feeding one session's traders with customer orders.
#[derive(Clone, Debug)]
pub struct OrderFlow {
    schedule: OrderSchedule,
    band: PriceBand,
    start: SimTime,
    n_buyers: usize,
    n_sellers: usize,
    next_assignment_id: u64,
    started: bool,
    next_replenish: SimTime,
    drip_bids: DripClock,
    drip_asks: DripClock,
}

impl OrderFlow {
    pub fn new(
        schedule: OrderSchedule,
        band: PriceBand,
        start: SimTime,
        n_buyers: usize,
        n_sellers: usize,
    ) -> Result<Self, OrderFlowError> {
        if n_buyers == 0 {
            return Err(OrderFlowError::EmptySide(Side::Bid));
        }
        if n_sellers == 0 {
            return Err(OrderFlowError::EmptySide(Side::Ask));
        }
        let idle = DripClock {
            next_time: start,
            round_robin: 0,
        };
        Ok(OrderFlow {
            schedule,
            band,
            start,
            n_buyers,
            n_sellers,
            next_assignment_id: 1,
            started: false,
            next_replenish: start,
            drip_bids: idle,
            drip_asks: idle,
        })
    }

    pub fn schedule(&self) -> &OrderSchedule {
        &self.schedule
    }

    /// Emits the customer orders due by `time`, buyers before sellers and in
    /// arrival order within a side. The first call issues a full allocation
    /// to every trader regardless of time mode; afterwards the time mode's
    /// own clock drives issuance. Call with nondecreasing times.
    pub fn customer_orders(
        &mut self,
        time: SimTime,
        rng: &mut impl Rng,
    ) -> Result<Vec<Issue>, OrderFlowError> {
        let mut issues = Vec::new();
        if !self.started {
            self.started = true;
            self.next_replenish = self.start + self.schedule.interval();
            for side in [Side::Bid, Side::Ask] {
                self.allocate_side(side, time, rng, &mut issues)?;
                if self.schedule.timemode().drip_kind().is_some() {
                    let gap = self.draw_gap(side, rng);
                    self.clock_mut(side).next_time = self.start + gap;
                }
            }
            return Ok(issues);
        }

        match self.schedule.timemode().drip_kind() {
            None => {
                if time >= self.next_replenish {
                    for side in [Side::Bid, Side::Ask] {
                        self.allocate_side(side, time, rng, &mut issues)?;
                    }
                    while self.next_replenish <= time {
                        self.next_replenish += self.schedule.interval();
                    }
                }
            }
            Some(_) => {
                for side in [Side::Bid, Side::Ask] {
                    while self.clock(side).next_time <= time {
                        self.drip_one(side, time, rng, &mut issues)?;
                    }
                }
            }
        }
        Ok(issues)
    }

    /// Issues a fresh assignment to every trader on `side`.
    fn allocate_side(
        &mut self,
        side: Side,
        time: SimTime,
        rng: &mut impl Rng,
        issues: &mut Vec<Issue>,
    ) -> Result<(), OrderFlowError> {
        let prices = self.side_prices(side, time, rng)?;
        for (trader_index, limit) in prices.into_iter().enumerate() {
            issues.push(self.issue(side, trader_index, limit, time));
        }
        Ok(())
    }

    /// Issues one assignment to the next trader in `side`'s rotation and
    /// advances the side's arrival clock.
    fn drip_one(
        &mut self,
        side: Side,
        time: SimTime,
        rng: &mut impl Rng,
        issues: &mut Vec<Issue>,
    ) -> Result<(), OrderFlowError> {
        let prices = self.side_prices(side, time, rng)?;
        let trader_index = self.clock(side).round_robin % prices.len();
        issues.push(self.issue(side, trader_index, prices[trader_index], time));
        let gap = self.draw_gap(side, rng);
        let clock = self.clock_mut(side);
        clock.round_robin += 1;
        clock.next_time += gap;
        Ok(())
    }

    /// Draws the full price layout for `side` at `time`. Prices keep a stable
    /// trader-index correspondence, so drip issuance draws the whole layout
    /// and picks one slot from it.
    fn side_prices(
        &self,
        side: Side,
        time: SimTime,
        rng: &mut impl Rng,
    ) -> Result<Vec<Price>, OrderFlowError> {
        let segment = self.schedule.segment_for(side, time)?;
        let (lo, hi) = segment.price_range_at(time, self.band)?;
        Ok(limit_prices_for_side(
            lo,
            hi,
            self.side_count(side),
            self.schedule.stepmode(),
            rng,
        ))
    }

    fn issue(&mut self, side: Side, trader_index: usize, limit: Price, time: SimTime) -> Issue {
        let id = self.next_assignment_id;
        self.next_assignment_id += 1;
        Issue {
            side,
            trader_index,
            assignment: Assignment {
                id,
                side,
                limit,
                qty: 1,
                issue_time: time,
            },
        }
    }

    fn draw_gap(&self, side: Side, rng: &mut impl Rng) -> f64 {
        let slot = self.schedule.interval() / self.side_count(side) as f64;
        match self
            .schedule
            .timemode()
            .drip_kind()
            .expect("gap draws only happen in drip modes")
        {
            DripKind::Fixed => slot,
            DripKind::Jittered => slot + rng.random_range(-slot / 2.0..slot / 2.0),
            DripKind::Poisson => Exp::new(1.0 / slot)
                .expect("drip slot is positive")
                .sample(rng),
        }
    }

    fn side_count(&self, side: Side) -> usize {
        match side {
            Side::Bid => self.n_buyers,
            Side::Ask => self.n_sellers,
        }
    }

    fn clock(&self, side: Side) -> &DripClock {
        match side {
            Side::Bid => &self.drip_bids,
            Side::Ask => &self.drip_asks,
        }
    }

    fn clock_mut(&mut self, side: Side) -> &mut DripClock {
        match side {
            Side::Bid => &mut self.drip_bids,
            Side::Ask => &mut self.drip_asks,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum OrderFlowError {
    #[error("segment time bounds invalid: start {t_start}, end {t_end}")]
    InvalidTimeBounds { t_start: SimTime, t_end: SimTime },
    #[error("segment price bounds invalid: lo {lo}, hi {hi}")]
    InvalidPriceBounds { lo: Price, hi: Price },
    #[error("offset parameters must be finite")]
    NonFiniteOffsetParameter,
    #[error("sinusoid period must be positive, got {0}")]
    NonPositivePeriod(f64),
    #[error("offset table times must be strictly ascending")]
    UnorderedOffsetTable,
    #[error("segments overlap at {at}")]
    OverlappingSegments { at: SimTime },
    #[error("replenishment interval must be positive, got {0}")]
    NonPositiveInterval(f64),
    #[error("time {time} outside segment [{t_start}, {t_end})")]
    TimeOutsideSegment {
        time: SimTime,
        t_start: SimTime,
        t_end: SimTime,
    },
    #[error("no {side} schedule segment covers time {time}")]
    NoSegment { side: Side, time: SimTime },
    #[error("offset range [{lo}, {hi}] lies outside the band [{min}, {max}]")]
    EmptyPriceRange {
        lo: i64,
        hi: i64,
        min: Price,
        max: Price,
    },
    #[error("{0} side of the market has no traders")]
    EmptySide(Side),
}
