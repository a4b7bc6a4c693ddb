//! Configuration parsing: compact text grammars for trader lineups and
//! schedule segments, plus the TOML file format that mirrors the CLI flags.
//!
//! Grammars:
//! - trader spec: `TYPE:COUNT[,TYPE:COUNT...]`, e.g. `GVWY:4,ZIC:12`
//! - segment list: segments joined by `;`, each `T0..T1,LO..HI[,OFFSET]`
//! - offset spec: `none` | `linear:SLOPE` | `sin:AMPLITUDE:PERIOD` |
//!   `walk:SEED` | `table:T=V[:T=V...]`
//!
//! Every parser returns an error on malformed input; none of them panic, so
//! they can sit directly behind the CLI and fuzz harnesses.

use serde::Deserialize;
use thiserror::Error;

use crate::orderflow::{
    OffsetFn, OrderFlowError, OrderSchedule, ParseStepModeError, ParseTimeModeError,
    ScheduleSegment, StepMode, TimeMode,
};
use crate::session::{PopulationSpec, SessionConfig};
use crate::traders::{ParseTTypeError, TType};
use crate::types::{Price, PriceBand};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("trader spec is empty")]
    EmptyTraderSpec,
    #[error("trader group {0:?} is not TYPE:COUNT")]
    BadTraderGroup(String),
    #[error(transparent)]
    UnknownTraderType(#[from] ParseTTypeError),
    #[error("trader group {0:?} has a zero count")]
    ZeroTraderCount(String),
    #[error("segment list is empty")]
    EmptySegmentList,
    #[error("segment {0:?} is not T0..T1,LO..HI[,OFFSET]")]
    BadSegment(String),
    #[error("{0:?} is not a number range like A..B")]
    BadRange(String),
    #[error("cannot parse number {0:?}")]
    BadNumber(String),
    #[error("offset spec {0:?} is not none | linear:S | sin:A:P | walk:SEED | table:T=V[:T=V...]")]
    BadOffset(String),
    #[error("sweep type list is empty")]
    EmptyTypeList,
    #[error("sweep type {0} appears more than once")]
    DuplicateSweepType(TType),
    #[error("price band [{min}, {max}] is invalid; need 1 <= min <= max")]
    InvalidBand { min: i64, max: i64 },
    #[error(transparent)]
    UnknownTimeMode(#[from] ParseTimeModeError),
    #[error(transparent)]
    UnknownStepMode(#[from] ParseStepModeError),
    #[error(transparent)]
    Flow(#[from] OrderFlowError),
    #[error("config file: {0}")]
    Toml(#[from] toml::de::Error),
}

/// Parses a trader lineup like `GVWY:4,ZIC:12`. Type names are
/// case-insensitive; counts must be positive.
pub fn parse_trader_spec(spec: &str) -> Result<Vec<(TType, usize)>, ConfigError> {
    if spec.trim().is_empty() {
        return Err(ConfigError::EmptyTraderSpec);
    }
    spec.split(',')
        .map(|group| {
            let group = group.trim();
            let (name, count) = group
                .split_once(':')
                .ok_or_else(|| ConfigError::BadTraderGroup(group.to_string()))?;
            let ttype: TType = name.trim().parse()?;
            let count: usize = count
                .trim()
                .parse()
                .map_err(|_| ConfigError::BadNumber(count.to_string()))?;
            if count == 0 {
                return Err(ConfigError::ZeroTraderCount(group.to_string()));
            }
            Ok((ttype, count))
        })
        .collect()
}

/// Parses a sweep type list like `GVWY,SHVR,ZIC,ZIP`: distinct type names,
/// order preserved.
pub fn parse_type_list(spec: &str) -> Result<Vec<TType>, ConfigError> {
    if spec.trim().is_empty() {
        return Err(ConfigError::EmptyTypeList);
    }
    let mut types = Vec::new();
    for name in spec.split(',') {
        let ttype: TType = name.trim().parse()?;
        if types.contains(&ttype) {
            return Err(ConfigError::DuplicateSweepType(ttype));
        }
        types.push(ttype);
    }
    Ok(types)
}

/// Parses a schedule side like
/// `0..60,50..150,linear:0.5;60..120,200..300`.
pub fn parse_segment_list(spec: &str) -> Result<Vec<ScheduleSegment>, ConfigError> {
    if spec.trim().is_empty() {
        return Err(ConfigError::EmptySegmentList);
    }
    spec.split(';').map(parse_segment).collect()
}

fn parse_segment(spec: &str) -> Result<ScheduleSegment, ConfigError> {
    let spec = spec.trim();
    let mut parts = spec.splitn(3, ',');
    let times = parts
        .next()
        .ok_or_else(|| ConfigError::BadSegment(spec.to_string()))?;
    let prices = parts
        .next()
        .ok_or_else(|| ConfigError::BadSegment(spec.to_string()))?;
    let offset = match parts.next() {
        Some(text) => parse_offset_spec(text)?,
        None => OffsetFn::None,
    };
    let (t_start, t_end) = parse_range(times, parse_f64)?;
    let (lo, hi) = parse_range(prices, parse_i64)?;
    Ok(ScheduleSegment::new(
        t_start,
        t_end,
        Price(lo),
        Price(hi),
        offset,
    )?)
}

/// Parses one offset descriptor, e.g. `sin:20:60` or `table:0=0:60=150`.
pub fn parse_offset_spec(spec: &str) -> Result<OffsetFn, ConfigError> {
    let spec = spec.trim();
    let bad = || ConfigError::BadOffset(spec.to_string());
    let mut parts = spec.split(':');
    let kind = parts.next().ok_or_else(bad)?.trim();
    let params: Vec<&str> = parts.collect();
    match (kind, params.as_slice()) {
        ("none", []) => Ok(OffsetFn::None),
        ("linear", [slope]) => Ok(OffsetFn::Linear {
            slope: parse_f64(slope)?,
        }),
        ("sin", [amplitude, period]) => Ok(OffsetFn::Sinusoid {
            amplitude: parse_f64(amplitude)?,
            period: parse_f64(period)?,
        }),
        ("walk", [seed]) => Ok(OffsetFn::RandomWalk {
            seed: seed
                .trim()
                .parse()
                .map_err(|_| ConfigError::BadNumber(seed.to_string()))?,
        }),
        ("table", points) if !points.is_empty() => {
            let points = points
                .iter()
                .map(|point| {
                    let (t, v) = point.split_once('=').ok_or_else(bad)?;
                    Ok((parse_f64(t)?, parse_i64(v)?))
                })
                .collect::<Result<Vec<_>, ConfigError>>()?;
            Ok(OffsetFn::Table { points })
        }
        _ => Err(bad()),
    }
}

fn parse_range<T>(
    spec: &str,
    parse: impl Fn(&str) -> Result<T, ConfigError>,
) -> Result<(T, T), ConfigError> {
    let (a, b) = spec
        .split_once("..")
        .ok_or_else(|| ConfigError::BadRange(spec.to_string()))?;
    Ok((parse(a)?, parse(b)?))
}

fn parse_f64(text: &str) -> Result<f64, ConfigError> {
    text.trim()
        .parse()
        .map_err(|_| ConfigError::BadNumber(text.to_string()))
}

fn parse_i64(text: &str) -> Result<i64, ConfigError> {
    text.trim()
        .parse()
        .map_err(|_| ConfigError::BadNumber(text.to_string()))
}

/// Top-level config file: a `[session]` table mirroring the session flags
/// and a `[sweep]` table mirroring the sweep flags.
#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub session: Option<SessionTable>,
    pub sweep: Option<SweepTable>,
}

/// Parses the TOML text of a config file.
pub fn parse_file_config(text: &str) -> Result<FileConfig, ConfigError> {
    Ok(toml::from_str(text)?)
}

/// The `[session]` table. Every field is optional; `resolve` fills defaults.
#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SessionTable {
    pub session_id: Option<String>,
    pub start: Option<f64>,
    pub end: Option<f64>,
    pub seed: Option<u64>,
    pub timestep: Option<f64>,
    pub interval: Option<f64>,
    pub timemode: Option<String>,
    pub stepmode: Option<String>,
    pub buyers: Option<String>,
    pub sellers: Option<String>,
    pub demand: Option<String>,
    pub supply: Option<String>,
    pub price_min: Option<i64>,
    pub price_max: Option<i64>,
}

impl SessionTable {
    /// Field-wise merge where `other`'s set fields win, used to let CLI
    /// flags override file values.
    pub fn overridden_by(self, other: SessionTable) -> SessionTable {
        SessionTable {
            session_id: other.session_id.or(self.session_id),
            start: other.start.or(self.start),
            end: other.end.or(self.end),
            seed: other.seed.or(self.seed),
            timestep: other.timestep.or(self.timestep),
            interval: other.interval.or(self.interval),
            timemode: other.timemode.or(self.timemode),
            stepmode: other.stepmode.or(self.stepmode),
            buyers: other.buyers.or(self.buyers),
            sellers: other.sellers.or(self.sellers),
            demand: other.demand.or(self.demand),
            supply: other.supply.or(self.supply),
            price_min: other.price_min.or(self.price_min),
            price_max: other.price_max.or(self.price_max),
        }
    }

    /// Builds a full session config, filling unset fields with defaults:
    /// a 300-second window, seed 1, 16 ZIC traders per side, a flat
    /// 50..150 schedule spanning the window, periodic replenishment every
    /// 30 seconds with fixed price steps, and the 1..1000 price band.
    pub fn resolve(&self) -> Result<SessionConfig, ConfigError> {
        let start = self.start.unwrap_or(0.0);
        let end = self.end.unwrap_or(300.0);
        let min = self.price_min.unwrap_or(PriceBand::DEFAULT_MIN);
        let max = self.price_max.unwrap_or(PriceBand::DEFAULT_MAX);
        let band = PriceBand::new(min, max).ok_or(ConfigError::InvalidBand { min, max })?;
        let timemode: TimeMode = self.timemode.as_deref().unwrap_or("periodic").parse()?;
        let stepmode: StepMode = self.stepmode.as_deref().unwrap_or("fixed").parse()?;

        let side_segments = |spec: &Option<String>| -> Result<Vec<ScheduleSegment>, ConfigError> {
            match spec {
                Some(text) => parse_segment_list(text),
                None => Ok(vec![ScheduleSegment::new(
                    start,
                    end,
                    Price(50),
                    Price(150),
                    OffsetFn::None,
                )?]),
            }
        };
        let schedule = OrderSchedule::new(
            side_segments(&self.demand)?,
            side_segments(&self.supply)?,
            self.interval.unwrap_or(30.0),
            timemode,
            stepmode,
        )?;

        let side_spec = |spec: &Option<String>| match spec {
            Some(text) => parse_trader_spec(text),
            None => Ok(vec![(TType::Zic, 16)]),
        };
        let population = PopulationSpec {
            buyers: side_spec(&self.buyers)?,
            sellers: side_spec(&self.sellers)?,
        };

        Ok(SessionConfig {
            session_id: self
                .session_id
                .clone()
                .unwrap_or_else(|| "session0000001".to_string()),
            start,
            end,
            population,
            schedule,
            band,
            seed: self.seed.unwrap_or(1),
            timestep: self.timestep,
        })
    }
}

/// The `[sweep]` table. Semantics and defaults live in the sweep runner;
/// this is only the file schema.
#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepTable {
    pub types: Option<String>,
    pub n_per_side: Option<usize>,
    pub min_n: Option<usize>,
    pub trials: Option<u64>,
    pub base_seed: Option<u64>,
    pub parallelism: Option<usize>,
    pub dump_tapes: Option<bool>,
}

impl SweepTable {
    /// Field-wise merge where `other`'s set fields win.
    pub fn overridden_by(self, other: SweepTable) -> SweepTable {
        SweepTable {
            types: other.types.or(self.types),
            n_per_side: other.n_per_side.or(self.n_per_side),
            min_n: other.min_n.or(self.min_n),
            trials: other.trials.or(self.trials),
            base_seed: other.base_seed.or(self.base_seed),
            parallelism: other.parallelism.or(self.parallelism),
            dump_tapes: other.dump_tapes.or(self.dump_tapes),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trader_specs_parse_case_insensitively() {
        assert_eq!(
            parse_trader_spec("GVWY:4,zic:12").unwrap(),
            vec![(TType::Gvwy, 4), (TType::Zic, 12)]
        );
        assert_eq!(
            parse_trader_spec(" ZIP:1 , SHVR:2 ").unwrap(),
            vec![(TType::Zip, 1), (TType::Shvr, 2)]
        );
    }

    #[test]
    fn trader_specs_reject_malformed_groups() {
        assert!(matches!(
            parse_trader_spec(""),
            Err(ConfigError::EmptyTraderSpec)
        ));
        assert!(matches!(
            parse_trader_spec("ZIC"),
            Err(ConfigError::BadTraderGroup(_))
        ));
        assert!(matches!(
            parse_trader_spec("HAL:3"),
            Err(ConfigError::UnknownTraderType(_))
        ));
        assert!(matches!(
            parse_trader_spec("ZIC:0"),
            Err(ConfigError::ZeroTraderCount(_))
        ));
        assert!(matches!(
            parse_trader_spec("ZIC:four"),
            Err(ConfigError::BadNumber(_))
        ));
        assert!(matches!(
            parse_trader_spec("ZIC:4,,ZIP:1"),
            Err(ConfigError::BadTraderGroup(_))
        ));
        assert!(matches!(
            parse_trader_spec("ZIC:-1"),
            Err(ConfigError::BadNumber(_))
        ));
    }

    #[test]
    fn type_lists_preserve_order_and_reject_duplicates() {
        assert_eq!(
            parse_type_list("ZIP,GVWY,shvr").unwrap(),
            vec![TType::Zip, TType::Gvwy, TType::Shvr]
        );
        assert!(matches!(
            parse_type_list("ZIP,GVWY,zip"),
            Err(ConfigError::DuplicateSweepType(TType::Zip))
        ));
        assert!(matches!(
            parse_type_list(""),
            Err(ConfigError::EmptyTypeList)
        ));
        assert!(matches!(
            parse_type_list("ZIP,"),
            Err(ConfigError::UnknownTraderType(_))
        ));
    }

    #[test]
    fn segment_lists_parse_every_offset_kind() {
        let segments =
            parse_segment_list("0..60,50..150,linear:0.5;60..120,200..300,none;120..180,50..150")
                .unwrap();
        assert_eq!(segments.len(), 3);
        assert_eq!(segments[0].t_start(), 0.0);
        assert_eq!(segments[0].t_end(), 60.0);
        assert_eq!(segments[0].price_lo(), Price(50));
        assert_eq!(segments[0].price_hi(), Price(150));
        assert_eq!(segments[0].offset_fn(), &OffsetFn::Linear { slope: 0.5 });
        assert_eq!(segments[1].offset_fn(), &OffsetFn::None);
        assert_eq!(segments[2].price_lo(), Price(50));

        let sin = parse_segment_list("0..10,5..6,sin:20:60").unwrap();
        assert_eq!(
            sin[0].offset_fn(),
            &OffsetFn::Sinusoid {
                amplitude: 20.0,
                period: 60.0
            }
        );
        let walk = parse_segment_list("0..10,5..6,walk:42").unwrap();
        assert_eq!(walk[0].offset_fn(), &OffsetFn::RandomWalk { seed: 42 });
        let table = parse_segment_list("0..10,5..6,table:2=3:8=-2").unwrap();
        assert_eq!(
            table[0].offset_fn(),
            &OffsetFn::Table {
                points: vec![(2.0, 3), (8.0, -2)]
            }
        );
    }

    #[test]
    fn segment_lists_reject_malformed_input() {
        assert!(matches!(
            parse_segment_list(""),
            Err(ConfigError::EmptySegmentList)
        ));
        assert!(matches!(
            parse_segment_list("10..5,50..150"),
            Err(ConfigError::Flow(OrderFlowError::InvalidTimeBounds { .. }))
        ));
        assert!(matches!(
            parse_segment_list("0..10,150..50"),
            Err(ConfigError::Flow(OrderFlowError::InvalidPriceBounds { .. }))
        ));
        assert!(matches!(
            parse_segment_list("0..nan,50..150"),
            Err(ConfigError::Flow(OrderFlowError::InvalidTimeBounds { .. }))
        ));
        assert!(matches!(
            parse_segment_list("0..10"),
            Err(ConfigError::BadSegment(_))
        ));
        assert!(matches!(
            parse_segment_list("0..10,50-150"),
            Err(ConfigError::BadRange(_))
        ));
        assert!(matches!(
            parse_segment_list("0..10,50..150,banana:1"),
            Err(ConfigError::BadOffset(_))
        ));
        assert!(matches!(
            parse_segment_list("0..10,50..150,linear"),
            Err(ConfigError::BadOffset(_))
        ));
        assert!(matches!(
            parse_segment_list("0..10,50..150,sin:20"),
            Err(ConfigError::BadOffset(_))
        ));
        assert!(matches!(
            parse_segment_list("0..10,50..150,table:5=3:5=9"),
            Err(ConfigError::Flow(OrderFlowError::UnorderedOffsetTable))
        ));
        assert!(matches!(
            parse_segment_list("0..10,50..150;;20..30,50..60"),
            Err(ConfigError::BadSegment(_))
        ));
        assert!(matches!(
            parse_segment_list("0..10,50..150,walk:-3"),
            Err(ConfigError::BadNumber(_))
        ));
    }

    #[test]
    fn empty_file_resolves_to_a_valid_default_session() {
        let file = parse_file_config("").unwrap();
        assert_eq!(file, FileConfig::default());
        let config = SessionTable::default().resolve().unwrap();
        assert_eq!(config.session_id, "session0000001");
        assert_eq!(config.start, 0.0);
        assert_eq!(config.end, 300.0);
        assert_eq!(config.seed, 1);
        assert_eq!(config.timestep, None);
        assert_eq!(config.band, PriceBand::default());
        assert_eq!(config.population.buyers, vec![(TType::Zic, 16)]);
        assert_eq!(config.population.sellers, vec![(TType::Zic, 16)]);
        assert_eq!(config.schedule.timemode(), TimeMode::Periodic);
        assert_eq!(config.schedule.stepmode(), StepMode::Fixed);
        assert_eq!(config.schedule.interval(), 30.0);
        config.validate().unwrap();
    }

    #[test]
    fn session_table_fields_reach_the_resolved_config() {
        let text = r#"
            [session]
            session_id = "shock-test"
            start = 0.0
            end = 180.0
            seed = 99
            timestep = 0.125
            interval = 15.0
            timemode = "drip-poisson"
            stepmode = "jittered"
            buyers = "GVWY:2,ZIP:2"
            sellers = "ZIC:4"
            demand = "0..90,50..150;90..180,200..300"
            supply = "0..180,40..160"
            price_min = 1
            price_max = 500
        "#;
        let file = parse_file_config(text).unwrap();
        let config = file.session.unwrap().resolve().unwrap();
        assert_eq!(config.session_id, "shock-test");
        assert_eq!(config.end, 180.0);
        assert_eq!(config.seed, 99);
        assert_eq!(config.timestep, Some(0.125));
        assert_eq!(config.schedule.interval(), 15.0);
        assert_eq!(config.schedule.timemode(), TimeMode::DripPoisson);
        assert_eq!(config.schedule.stepmode(), StepMode::Jittered);
        assert_eq!(
            config.population.buyers,
            vec![(TType::Gvwy, 2), (TType::Zip, 2)]
        );
        assert_eq!(config.population.sellers, vec![(TType::Zic, 4)]);
        assert_eq!(config.schedule.demand().len(), 2);
        assert_eq!(config.schedule.supply().len(), 1);
        assert_eq!(config.band, PriceBand::new(1, 500).unwrap());
        config.validate().unwrap();
    }

    #[test]
    fn overrides_beat_file_values_field_by_field() {
        let base = SessionTable {
            seed: Some(5),
            end: Some(100.0),
            ..SessionTable::default()
        };
        let overrides = SessionTable {
            seed: Some(9),
            ..SessionTable::default()
        };
        let merged = base.overridden_by(overrides);
        assert_eq!(merged.seed, Some(9));
        assert_eq!(merged.end, Some(100.0));

        let sweep = SweepTable {
            trials: Some(50),
            n_per_side: Some(16),
            ..SweepTable::default()
        };
        let merged = sweep.overridden_by(SweepTable {
            trials: Some(2),
            ..SweepTable::default()
        });
        assert_eq!(merged.trials, Some(2));
        assert_eq!(merged.n_per_side, Some(16));
    }

    #[test]
    fn file_rejects_unknown_fields_and_wrong_types() {
        assert!(matches!(
            parse_file_config("[session]\nfoo = 1"),
            Err(ConfigError::Toml(_))
        ));
        assert!(matches!(
            parse_file_config("[sweep]\ntrials = -1"),
            Err(ConfigError::Toml(_))
        ));
        assert!(matches!(
            parse_file_config("[session]\nseed = \"abc\""),
            Err(ConfigError::Toml(_))
        ));
        assert!(parse_file_config("[sweep]\ntrials = 10").is_ok());
    }

    #[test]
    fn resolve_rejects_bad_bands_and_modes() {
        let zero_min = SessionTable {
            price_min: Some(0),
            ..SessionTable::default()
        };
        assert!(matches!(
            zero_min.resolve(),
            Err(ConfigError::InvalidBand { min: 0, max: 1000 })
        ));
        let inverted = SessionTable {
            price_min: Some(10),
            price_max: Some(5),
            ..SessionTable::default()
        };
        assert!(matches!(inverted.resolve(), Err(ConfigError::InvalidBand { .. })));
        let bad_mode = SessionTable {
            timemode: Some("hourly".to_string()),
            ..SessionTable::default()
        };
        assert!(matches!(
            bad_mode.resolve(),
            Err(ConfigError::UnknownTimeMode(_))
        ));
        let bad_step = SessionTable {
            stepmode: Some("Fixed".to_string()),
            ..SessionTable::default()
        };
        assert!(matches!(
            bad_step.resolve(),
            Err(ConfigError::UnknownStepMode(_))
        ));
    }

    #[test]
    fn default_schedule_tracks_a_custom_window() {
        let table = SessionTable {
            start: Some(10.0),
            end: Some(70.0),
            ..SessionTable::default()
        };
        let config = table.resolve().unwrap();
        assert!(config.schedule.covers(10.0, 70.0));
        config.validate().unwrap();
    }
}
