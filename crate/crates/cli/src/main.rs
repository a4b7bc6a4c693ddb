use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use lobsim::config::{parse_file_config, parse_type_list, FileConfig, SessionTable, SweepTable};
use lobsim::session::{market_session, SessionConfig};
use lobsim_cli::{emit_price_series, run_sweep, SessionTemplate, SweepSpec};

#[derive(Parser)]
#[command(
    name = "lobsim",
    version,
    about = "Limit-order-book market simulator with robot traders"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one market session and write its CSV outputs
    Session(SessionArgs),
    /// Enumerate trader-ratio compositions and run seeded trials for each
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SharedFlags {
    /// TOML config file; command-line flags override its values
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory for CSV files
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Label used in output rows and file names
    #[arg(long)]
    session_id: Option<String>,
    /// Session open time in seconds
    #[arg(long)]
    start: Option<f64>,
    /// Session close time in seconds
    #[arg(long)]
    end: Option<f64>,
    /// RNG seed (sweeps derive per-trial seeds from --base-seed instead)
    #[arg(long)]
    seed: Option<u64>,
    /// Loop step in seconds; by default each trader is polled once per
    /// simulated second on average
    #[arg(long)]
    timestep: Option<f64>,
    /// Seconds between customer-order replenishments
    #[arg(long)]
    interval: Option<f64>,
    /// periodic | drip-fixed | drip-jittered | drip-poisson
    #[arg(long)]
    timemode: Option<String>,
    /// fixed | jittered | random
    #[arg(long)]
    stepmode: Option<String>,
    /// Buyer lineup, e.g. GVWY:4,ZIC:12 (ignored by sweep)
    #[arg(long)]
    buyers: Option<String>,
    /// Seller lineup, e.g. ZIC:16 (ignored by sweep)
    #[arg(long)]
    sellers: Option<String>,
    /// Demand segments: "T0..T1,LO..HI[,OFFSET][;...]",
    /// offsets none | linear:S | sin:A:P | walk:SEED | table:T=V[:T=V...]
    #[arg(long)]
    demand: Option<String>,
    /// Supply segments, same grammar as --demand
    #[arg(long)]
    supply: Option<String>,
    /// Lowest quotable price in pennies
    #[arg(long)]
    price_min: Option<i64>,
    /// Highest quotable price in pennies
    #[arg(long)]
    price_max: Option<i64>,
}

impl SharedFlags {
    fn table(&self) -> SessionTable {
        SessionTable {
            session_id: self.session_id.clone(),
            start: self.start,
            end: self.end,
            seed: self.seed,
            timestep: self.timestep,
            interval: self.interval,
            timemode: self.timemode.clone(),
            stepmode: self.stepmode.clone(),
            buyers: self.buyers.clone(),
            sellers: self.sellers.clone(),
            demand: self.demand.clone(),
            supply: self.supply.clone(),
            price_min: self.price_min,
            price_max: self.price_max,
        }
    }

    fn load_file(&self) -> Result<FileConfig> {
        match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                Ok(parse_file_config(&text)?)
            }
            None => Ok(FileConfig::default()),
        }
    }

    fn resolve(&self) -> Result<(SessionConfig, FileConfig)> {
        let file = self.load_file()?;
        let table = file
            .session
            .clone()
            .unwrap_or_default()
            .overridden_by(self.table());
        Ok((table.resolve()?, file))
    }
}

#[derive(Args)]
struct SessionArgs {
    #[command(flatten)]
    shared: SharedFlags,
    /// Also write tape_<session_id>.csv
    #[arg(long)]
    dump_tape: bool,
    /// Also write blotters_<session_id>.csv
    #[arg(long)]
    dump_blotters: bool,
    /// Also write prices_<session_id>.csv
    #[arg(long)]
    dump_prices: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    shared: SharedFlags,
    /// Comma-separated types whose ratio is swept, e.g. GVWY,SHVR,ZIC,ZIP
    #[arg(long)]
    types: Option<String>,
    /// Traders per market side; sellers mirror buyers
    #[arg(long)]
    n_per_side: Option<usize>,
    /// Minimum count of each type in a composition
    #[arg(long)]
    min_n: Option<usize>,
    /// Sessions per composition
    #[arg(long)]
    trials: Option<u64>,
    /// Trial n runs with seed base_seed + n
    #[arg(long)]
    base_seed: Option<u64>,
    /// Worker threads; results are identical at any setting
    #[arg(long)]
    parallelism: Option<usize>,
    /// Also write tape_<trial_id>.csv and prices_<trial_id>.csv per trial
    #[arg(long)]
    dump_tapes: bool,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Session(args) => session_command(args),
        Command::Sweep(args) => sweep_command(args),
    }
}

fn session_command(args: SessionArgs) -> Result<()> {
    let (config, _) = args.shared.resolve()?;
    let outcome = market_session(&config)?;
    fs::create_dir_all(&args.shared.out)
        .with_context(|| format!("creating {}", args.shared.out.display()))?;
    let id = &config.session_id;

    let balances_path = args.shared.out.join(format!("balances_{id}.csv"));
    let mut balances = BufWriter::new(File::create(&balances_path)?);
    outcome.stats.write_balances_row(&mut balances)?;
    balances.flush()?;

    if args.dump_tape {
        let mut tape = BufWriter::new(File::create(
            args.shared.out.join(format!("tape_{id}.csv")),
        )?);
        outcome.write_tape_csv(&mut tape)?;
        tape.flush()?;
    }
    if args.dump_blotters {
        let mut blotters = BufWriter::new(File::create(
            args.shared.out.join(format!("blotters_{id}.csv")),
        )?);
        outcome.write_blotters_csv(&mut blotters)?;
        blotters.flush()?;
    }
    if args.dump_prices {
        let mut prices = BufWriter::new(File::create(
            args.shared.out.join(format!("prices_{id}.csv")),
        )?);
        emit_price_series(&outcome.tape, &mut prices)?;
        prices.flush()?;
    }

    println!(
        "{id}: {} trades in [{}, {}) -> {}",
        outcome.stats.n_trades,
        config.start,
        config.end,
        balances_path.display()
    );
    Ok(())
}

fn sweep_command(args: SweepArgs) -> Result<()> {
    let file = args.shared.load_file()?;
    let session = file
        .session
        .clone()
        .unwrap_or_default()
        .overridden_by(args.shared.table())
        .resolve()?;
    let sweep = file
        .sweep
        .clone()
        .unwrap_or_default()
        .overridden_by(SweepTable {
            types: args.types.clone(),
            n_per_side: args.n_per_side,
            min_n: args.min_n,
            trials: args.trials,
            base_seed: args.base_seed,
            parallelism: args.parallelism,
            dump_tapes: args.dump_tapes.then_some(true),
        });

    let spec = SweepSpec {
        trader_types: parse_type_list(sweep.types.as_deref().unwrap_or("GVWY,SHVR,ZIC,ZIP"))?,
        n_per_side: sweep.n_per_side.unwrap_or(16),
        min_n: sweep.min_n.unwrap_or(1),
        trials_per_ratio: sweep.trials.unwrap_or(50),
        base_seed: sweep.base_seed.unwrap_or(1),
        template: SessionTemplate::from_config(&session),
    };
    fs::create_dir_all(&args.shared.out)
        .with_context(|| format!("creating {}", args.shared.out.display()))?;
    let outcome = run_sweep(
        &spec,
        sweep.parallelism.unwrap_or(1),
        &args.shared.out,
        sweep.dump_tapes.unwrap_or(false),
    )?;
    println!(
        "{} compositions x {} trials = {} sessions -> {}",
        outcome.n_compositions,
        spec.trials_per_ratio,
        outcome.n_sessions,
        outcome.balances_path.display()
    );
    Ok(())
}
