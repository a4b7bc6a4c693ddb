//! Batch experiment harness: enumerates trader-ratio compositions, runs each
//! (composition, trial) pair as an independent seeded session, and writes
//! result CSVs in trial-number order no matter how many workers ran them.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use lobsim::exchange::{TapeEntry, TapeKind};
use lobsim::session::{
    market_session, PopulationSpec, SessionConfig, SessionError, SessionStats,
};
use lobsim::traders::TType;
use lobsim::{PriceBand, SimTime};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("sweep needs at least one trader type")]
    EmptyTraderTypes,
    #[error("minimum count per type must be at least 1")]
    ZeroMinN,
    #[error("cannot field {k} types with at least {min_n} each from {n_per_side} per side")]
    Infeasible {
        k: usize,
        n_per_side: usize,
        min_n: usize,
    },
    #[error("worker count must be at least 1")]
    ZeroParallelism,
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("{trial_id}: {source}")]
    Session {
        trial_id: String,
        source: SessionError,
    },
    #[error("{trial_id}: session panicked: {message}")]
    TrialPanicked { trial_id: String, message: String },
}

/// Session parameters shared by every trial of a sweep: everything in a
/// session config except identity, population, and seed.
#[derive(Clone, Debug)]
pub struct SessionTemplate {
    pub start: SimTime,
    pub end: SimTime,
    pub schedule: lobsim::orderflow::OrderSchedule,
    pub band: PriceBand,
    pub timestep: Option<f64>,
}

impl SessionTemplate {
    /// Extracts the shared parameters from a resolved session config.
    pub fn from_config(config: &SessionConfig) -> Self {
        SessionTemplate {
            start: config.start,
            end: config.end,
            schedule: config.schedule.clone(),
            band: config.band,
            timestep: config.timestep,
        }
    }
}

/// A full ratio-sweep request: which types to vary, how many traders per
/// side, the per-composition trial count, and the shared session template.
#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub trader_types: Vec<TType>,
    pub n_per_side: usize,
    pub min_n: usize,
    pub trials_per_ratio: u64,
    pub base_seed: u64,
    pub template: SessionTemplate,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), SweepError> {
        if self.trader_types.is_empty() {
            return Err(SweepError::EmptyTraderTypes);
        }
        if self.min_n == 0 {
            return Err(SweepError::ZeroMinN);
        }
        let k = self.trader_types.len();
        if self.min_n * k > self.n_per_side {
            return Err(SweepError::Infeasible {
                k,
                n_per_side: self.n_per_side,
                min_n: self.min_n,
            });
        }
        Ok(())
    }

    /// Output file name, numbered by the per-type count of the balanced
    /// composition: `balances_004.csv` for 16 per side across 4 types.
    pub fn balances_file_name(&self) -> String {
        format!("balances_{:03}.csv", self.n_per_side / self.trader_types.len())
    }
}

/// Dense 1-based trial labels: `trial0000001`, `trial0000002`, ...
pub fn trial_label(trial_number: u64) -> String {
    format!("trial{trial_number:07}")
}

/// All per-side compositions `(c1, ..., ck)` with each count at least
/// `min_n` and summing to `n_per_side`, in ascending lexicographic order.
/// Sellers mirror buyers.
pub fn enumerate_ratio_sweep(spec: &SweepSpec) -> Result<Vec<PopulationSpec>, SweepError> {
    spec.validate()?;
    let k = spec.trader_types.len();
    let mut out = Vec::new();
    let mut counts = Vec::with_capacity(k);
    fill_compositions(&mut out, &mut counts, spec.n_per_side, spec.min_n, k, spec);
    Ok(out)
}

fn fill_compositions(
    out: &mut Vec<PopulationSpec>,
    counts: &mut Vec<usize>,
    remaining: usize,
    min_n: usize,
    k_left: usize,
    spec: &SweepSpec,
) {
    if k_left == 1 {
        counts.push(remaining);
        let groups = spec
            .trader_types
            .iter()
            .copied()
            .zip(counts.iter().copied())
            .collect();
        out.push(PopulationSpec::symmetric(groups));
        counts.pop();
        return;
    }
    for c in min_n..=remaining - min_n * (k_left - 1) {
        counts.push(c);
        fill_compositions(out, counts, remaining - c, min_n, k_left - 1, spec);
        counts.pop();
    }
}

/// One finished trial: its dense label and the session's summary stats.
#[derive(Clone, Debug)]
pub struct TrialResult {
    pub trial_id: String,
    pub stats: SessionStats,
}

/// What a completed sweep produced.
#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub n_compositions: usize,
    pub n_sessions: u64,
    pub balances_path: PathBuf,
}

/// Runs every (composition, trial) pair on a pool of `parallelism` workers.
/// Trial `n` always uses seed `base_seed + n`, so results are independent of
/// scheduling; rows land in the balances file in trial order. With
/// `dump_tapes`, each trial also writes `tape_<trial_id>.csv` and
/// `prices_<trial_id>.csv`.
pub fn run_sweep(
    spec: &SweepSpec,
    parallelism: usize,
    out_dir: &Path,
    dump_tapes: bool,
) -> Result<SweepOutcome, SweepError> {
    if parallelism == 0 {
        return Err(SweepError::ZeroParallelism);
    }
    let compositions = enumerate_ratio_sweep(spec)?;
    let n_sessions = compositions.len() as u64 * spec.trials_per_ratio;
    let balances_path = out_dir.join(spec.balances_file_name());

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()?;
    let results: Vec<Result<TrialResult, SweepError>> = pool.install(|| {
        (1..=n_sessions)
            .into_par_iter()
            .map(|trial_number| run_trial(spec, &compositions, trial_number, out_dir, dump_tapes))
            .collect()
    });

    let mut out = BufWriter::new(File::create(&balances_path)?);
    for result in results {
        result?.stats.write_balances_row(&mut out)?;
    }
    out.flush()?;
    Ok(SweepOutcome {
        n_compositions: compositions.len(),
        n_sessions,
        balances_path,
    })
}

fn run_trial(
    spec: &SweepSpec,
    compositions: &[PopulationSpec],
    trial_number: u64,
    out_dir: &Path,
    dump_tapes: bool,
) -> Result<TrialResult, SweepError> {
    let trial_id = trial_label(trial_number);
    let composition = &compositions[((trial_number - 1) / spec.trials_per_ratio) as usize];
    let config = SessionConfig {
        session_id: trial_id.clone(),
        start: spec.template.start,
        end: spec.template.end,
        population: composition.clone(),
        schedule: spec.template.schedule.clone(),
        band: spec.template.band,
        seed: spec.base_seed + trial_number,
        timestep: spec.template.timestep,
    };

    let outcome = catch_unwind(AssertUnwindSafe(|| market_session(&config)))
        .map_err(|payload| SweepError::TrialPanicked {
            trial_id: trial_id.clone(),
            message: panic_message(payload),
        })?
        .map_err(|source| SweepError::Session {
            trial_id: trial_id.clone(),
            source,
        })?;

    if dump_tapes {
        let mut tape = BufWriter::new(File::create(
            out_dir.join(format!("tape_{trial_id}.csv")),
        )?);
        outcome.write_tape_csv(&mut tape)?;
        tape.flush()?;
        let mut prices = BufWriter::new(File::create(
            out_dir.join(format!("prices_{trial_id}.csv")),
        )?);
        emit_price_series(&outcome.tape, &mut prices)?;
        prices.flush()?;
    }

    Ok(TrialResult {
        trial_id,
        stats: outcome.stats,
    })
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(text) = payload.downcast_ref::<&str>() {
        (*text).to_string()
    } else if let Some(text) = payload.downcast_ref::<String>() {
        text.clone()
    } else {
        "opaque payload".to_string()
    }
}

/// Writes one `<time>,<price>` row per execution, in tape (chronological)
/// order, ready for scatter-plotting transaction prices against time.
pub fn emit_price_series<W: Write>(tape: &[TapeEntry], mut w: W) -> io::Result<()> {
    for entry in tape {
        match entry.kind {
            TapeKind::Trade => writeln!(w, "{:.6},{}", entry.time, entry.price)?,
        }
    }
    Ok(())
}
