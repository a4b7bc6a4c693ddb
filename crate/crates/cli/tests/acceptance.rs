//! End-to-end acceptance suite: one test per numbered criterion, each
//! printing a single `acceptance NN <name>: PASS` line on success. Every
//! tolerance is written directly into its assertion.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lobsim::exchange::{Exchange, LimitOrder, PublishedLob, TapeKind, Trade};
use lobsim::metrics::{allocative_efficiency, equilibrium_price, smiths_alpha, MetricsError};
use lobsim::orderflow::{
    limit_prices_for_side, OffsetFn, OrderSchedule, ScheduleSegment, StepMode, TimeMode,
};
use lobsim::session::{market_session, PopulationSpec, SessionConfig};
use lobsim::traders::TType;
use lobsim::{Price, PriceBand, Side, TraderId};
use lobsim_cli::{enumerate_ratio_sweep, run_sweep, SessionTemplate, SweepSpec};

fn tid(name: &str) -> TraderId {
    TraderId::new(name).unwrap()
}

fn order(name: &str, side: Side, price: i64, time: f64) -> LimitOrder {
    LimitOrder {
        tid: tid(name),
        side,
        price: Price(price),
        qty: 1,
        time,
    }
}

type Ladder = Vec<(i64, u64)>;

fn ladders(lob: &PublishedLob) -> (Ladder, Ladder) {
    let flat = |side: &[(Price, u64)]| side.iter().map(|&(p, q)| (p.pennies(), q)).collect();
    (flat(&lob.bids.ladder), flat(&lob.asks.ladder))
}

fn symmetric_schedule(
    windows: &[(f64, f64, i64, i64)],
    interval: f64,
    timemode: TimeMode,
    stepmode: StepMode,
) -> OrderSchedule {
    let segments: Vec<ScheduleSegment> = windows
        .iter()
        .map(|&(t0, t1, lo, hi)| {
            ScheduleSegment::new(t0, t1, Price(lo), Price(hi), OffsetFn::None).unwrap()
        })
        .collect();
    OrderSchedule::new(segments.clone(), segments, interval, timemode, stepmode).unwrap()
}

fn session_config(
    id: &str,
    end: f64,
    population: PopulationSpec,
    schedule: OrderSchedule,
    seed: u64,
) -> SessionConfig {
    SessionConfig {
        session_id: id.to_string(),
        start: 0.0,
        end,
        population,
        schedule,
        band: PriceBand::default(),
        seed,
        timestep: None,
    }
}

/// Seven submissions: six build the book, the seventh crosses it.
fn replay_reference_sequence(ex: &mut Exchange) -> Option<Trade> {
    for name in ["T01", "T02", "T03", "T08", "T11"] {
        ex.register_trader(tid(name));
    }
    assert_eq!(ex.submit_order(2.0, order("T11", Side::Bid, 22, 2.0)), Ok(None));
    assert_eq!(ex.submit_order(6.0, order("T02", Side::Bid, 27, 6.0)), Ok(None));
    assert_eq!(ex.submit_order(7.0, order("T08", Side::Ask, 77, 7.0)), Ok(None));
    assert_eq!(ex.submit_order(10.0, order("T01", Side::Bid, 27, 10.0)), Ok(None));
    assert_eq!(ex.submit_order(18.0, order("T03", Side::Ask, 62, 18.0)), Ok(None));
    assert_eq!(ex.submit_order(21.0, order("T11", Side::Bid, 30, 21.0)), Ok(None));
    ex.submit_order(25.0, order("T02", Side::Bid, 67, 25.0))
        .unwrap()
}

#[test]
fn acceptance_01_order_replay() {
    // Correctness pass: every intermediate book state is pinned.
    let mut ex = Exchange::new(PriceBand::default());
    for name in ["T01", "T02", "T03", "T08", "T11"] {
        ex.register_trader(tid(name));
    }

    ex.submit_order(2.0, order("T11", Side::Bid, 22, 2.0)).unwrap();
    assert_eq!(ladders(&ex.publish_lob(2.0)), (vec![(22, 1)], vec![]));

    ex.submit_order(6.0, order("T02", Side::Bid, 27, 6.0)).unwrap();
    assert_eq!(ladders(&ex.publish_lob(6.0)), (vec![(27, 1), (22, 1)], vec![]));

    ex.submit_order(7.0, order("T08", Side::Ask, 77, 7.0)).unwrap();
    assert_eq!(
        ladders(&ex.publish_lob(7.0)),
        (vec![(27, 1), (22, 1)], vec![(77, 1)])
    );

    ex.submit_order(10.0, order("T01", Side::Bid, 27, 10.0)).unwrap();
    assert_eq!(
        ladders(&ex.publish_lob(10.0)),
        (vec![(27, 2), (22, 1)], vec![(77, 1)])
    );

    ex.submit_order(18.0, order("T03", Side::Ask, 62, 18.0)).unwrap();
    assert_eq!(
        ladders(&ex.publish_lob(18.0)),
        (vec![(27, 2), (22, 1)], vec![(62, 1), (77, 1)])
    );

    // Re-quote by T11 replaces its own bid at 22.
    ex.submit_order(21.0, order("T11", Side::Bid, 30, 21.0)).unwrap();
    assert_eq!(
        ladders(&ex.publish_lob(21.0)),
        (vec![(30, 1), (27, 2)], vec![(62, 1), (77, 1)])
    );
    assert!(ex.tape().is_empty());

    // T02's bid at 67 lifts the 62 ask: one trade at the standing price.
    let trade = ex
        .submit_order(25.0, order("T02", Side::Bid, 67, 25.0))
        .unwrap()
        .expect("crossing bid must trade");
    assert_eq!(trade.price, Price(62));
    assert_eq!(trade.buyer(), tid("T02"));
    assert_eq!(trade.seller(), tid("T03"));
    assert_eq!(
        ladders(&ex.publish_lob(25.0)),
        (vec![(30, 1), (27, 1)], vec![(77, 1)])
    );
    assert_eq!(ex.tape().len(), 1);
    let entry = ex.tape()[0];
    assert_eq!((entry.kind, entry.time, entry.price), (TapeKind::Trade, 25.0, Price(62)));

    // Timed pass on a warm code path: the whole sequence in under 1 ms.
    let mut timed = Exchange::new(PriceBand::default());
    let started = Instant::now();
    let trade = replay_reference_sequence(&mut timed);
    let elapsed = started.elapsed();
    assert_eq!(trade.map(|t| t.price), Some(Price(62)));
    assert!(elapsed < Duration::from_millis(1), "replay took {elapsed:?}");

    println!("acceptance 01 order-replay: PASS ({elapsed:?})");
}

#[test]
fn acceptance_02_depth_publication() {
    let mut ex = Exchange::new(PriceBand::default());
    let mut submit = |prefix: char, base: usize, side, price: i64, count: usize| {
        for i in 0..count {
            let id = TraderId::from_index(prefix, base + i);
            ex.register_trader(id);
            let o = LimitOrder {
                tid: id,
                side,
                price: Price(price),
                qty: 1,
                time: 1.0,
            };
            assert_eq!(ex.submit_order(1.0, o), Ok(None));
        }
    };
    submit('B', 0, Side::Bid, 152, 10);
    submit('B', 10, Side::Bid, 150, 60);
    submit('S', 0, Side::Ask, 155, 20);
    submit('S', 20, Side::Ask, 162, 50);

    let lob = ex.publish_lob(10.0);
    assert_eq!(lob.bids.best, Some(Price(152)));
    assert_eq!(lob.asks.best, Some(Price(155)));
    let spread = lob.asks.best.unwrap().pennies() - lob.bids.best.unwrap().pennies();
    assert_eq!(spread, 3);
    assert_eq!(lob.bids.ladder, vec![(Price(152), 10), (Price(150), 60)]);
    assert_eq!(lob.asks.ladder, vec![(Price(155), 20), (Price(162), 50)]);

    println!("acceptance 02 depth-publication: PASS");
}

#[test]
fn acceptance_03_sweep_arithmetic() {
    let template = SessionTemplate {
        start: 0.0,
        end: 10.0,
        schedule: symmetric_schedule(&[(0.0, 10.0, 50, 150)], 30.0, TimeMode::Periodic, StepMode::Fixed),
        band: PriceBand::default(),
        timestep: None,
    };
    let spec = SweepSpec {
        trader_types: vec![TType::Gvwy, TType::Shvr, TType::Zic, TType::Zip],
        n_per_side: 16,
        min_n: 1,
        trials_per_ratio: 50,
        base_seed: 1,
        template,
    };
    let compositions = enumerate_ratio_sweep(&spec).unwrap();
    assert_eq!(compositions.len(), 455);
    // Stars and bars: distributing 16 across 4 types with at least 1 each
    // leaves 12 free units over 4 bins, C(15, 3) ways.
    assert_eq!((15 * 14 * 13) / 6, 455);
    let sessions = compositions.len() as u64 * spec.trials_per_ratio;
    assert_eq!(sessions, 22_750);

    println!("acceptance 03 sweep-arithmetic: PASS");
}

#[test]
fn acceptance_04_shock_tracking() {
    // Three schedule epochs with midpoint prices 100 / 250 / 100. For each
    // epoch, the mean trade price over its final 30 seconds must sit within
    // 10% of the epoch midpoint in at least 45 of 50 seeded runs.
    let windows = [(30.0, 60.0, 100.0), (90.0, 120.0, 250.0), (150.0, 180.0, 100.0)];
    for ttype in [TType::Gvwy, TType::Zip] {
        let mut epoch_hits = [0u32; 3];
        for seed in 1..=50u64 {
            let schedule = symmetric_schedule(
                &[
                    (0.0, 60.0, 50, 150),
                    (60.0, 120.0, 200, 300),
                    (120.0, 180.0, 50, 150),
                ],
                30.0,
                TimeMode::Periodic,
                StepMode::Fixed,
            );
            let config = session_config(
                "shock",
                180.0,
                PopulationSpec::symmetric(vec![(ttype, 40)]),
                schedule,
                seed,
            );
            let outcome = market_session(&config).unwrap();
            for (epoch, &(t0, t1, p0)) in windows.iter().enumerate() {
                let prices: Vec<f64> = outcome
                    .tape
                    .iter()
                    .filter(|e| e.time >= t0 && e.time < t1)
                    .map(|e| e.price.pennies() as f64)
                    .collect();
                if prices.is_empty() {
                    continue;
                }
                let mean = prices.iter().sum::<f64>() / prices.len() as f64;
                if (mean - p0).abs() <= 0.10 * p0 {
                    epoch_hits[epoch] += 1;
                }
            }
        }
        for (epoch, hits) in epoch_hits.iter().enumerate() {
            assert!(
                *hits >= 45,
                "{ttype}: epoch {epoch} tracked in only {hits}/50 runs"
            );
        }
    }
    println!("acceptance 04 shock-tracking: PASS");
}

#[test]
fn acceptance_05_zero_intelligence_efficiency() {
    // 16 random-quoting buyers and sellers on a flat symmetric 50..150
    // range, 300-second sessions, allocations every 60 seconds, quotes
    // bounded to 1..200 so random asks stay commensurate with the limit
    // range. Efficiency divides realized surplus by the optimum over all
    // five allocation rounds; the mean over 50 seeds must reach 0.90.
    let mut throwaway = ChaCha8Rng::seed_from_u64(0);
    let round_demand =
        limit_prices_for_side(Price(50), Price(150), 16, StepMode::Fixed, &mut throwaway);
    let rounds = 5;
    let demand: Vec<Price> = round_demand
        .iter()
        .copied()
        .cycle()
        .take(round_demand.len() * rounds)
        .collect();
    let supply = demand.clone();

    let mut total = 0.0;
    for seed in 1..=50u64 {
        let schedule = symmetric_schedule(
            &[(0.0, 300.0, 50, 150)],
            60.0,
            TimeMode::Periodic,
            StepMode::Fixed,
        );
        let mut config = session_config(
            "zic-efficiency",
            300.0,
            PopulationSpec::symmetric(vec![(TType::Zic, 16)]),
            schedule,
            seed,
        );
        config.band = PriceBand::new(1, 200).unwrap();
        let outcome = market_session(&config).unwrap();
        let pairs: Vec<(Price, Price)> = outcome
            .trades
            .iter()
            .map(|t| (t.buyer_limit, t.seller_limit))
            .collect();
        total += allocative_efficiency(&pairs, &demand, &supply).unwrap();
    }
    let mean = total / 50.0;
    assert!(mean >= 0.90, "mean efficiency {mean:.4} below 0.90");

    println!("acceptance 05 zero-intelligence-efficiency: PASS (mean {mean:.4})");
}

#[test]
fn acceptance_06_adaptive_beats_random_on_convergence() {
    // Identical flat schedules and seeds-by-index; price dispersion around
    // the midpoint 100 must be strictly smaller for the adaptive lineup.
    let mean_alpha = |ttype: TType| -> f64 {
        let total: f64 = (1..=50u64)
            .map(|seed| {
                let schedule = symmetric_schedule(
                    &[(0.0, 300.0, 50, 150)],
                    30.0,
                    TimeMode::Periodic,
                    StepMode::Fixed,
                );
                let config = session_config(
                    "alpha",
                    300.0,
                    PopulationSpec::symmetric(vec![(ttype, 16)]),
                    schedule,
                    seed,
                );
                let outcome = market_session(&config).unwrap();
                let prices: Vec<Price> = outcome.tape.iter().map(|e| e.price).collect();
                smiths_alpha(&prices, Price(100)).unwrap()
            })
            .sum();
        total / 50.0
    };
    let zip = mean_alpha(TType::Zip);
    let zic = mean_alpha(TType::Zic);
    assert!(
        zip < zic,
        "adaptive alpha {zip:.4} not below random alpha {zic:.4}"
    );

    println!("acceptance 06 adaptive-beats-random: PASS (alpha {zip:.4} < {zic:.4})");
}

#[test]
fn acceptance_07_accounting_identity() {
    // 1,000 randomized short sessions over every trader type, replenishment
    // mode, and step mode: the sum of balances equals the summed limit-price
    // gaps of the executed trades, and every trade prices inside its
    // counterparties' limits. Both checks are exact.
    let mut master = ChaCha8Rng::seed_from_u64(0xACC0);
    let timemodes = [
        TimeMode::Periodic,
        TimeMode::DripFixed,
        TimeMode::DripJittered,
        TimeMode::DripPoisson,
    ];
    let stepmodes = [StepMode::Fixed, StepMode::Jittered, StepMode::Random];
    let types = [TType::Gvwy, TType::Shvr, TType::Snpr, TType::Zic, TType::Zip];

    for index in 0..1000u32 {
        let duration = master.random_range(15.0..40.0);
        let interval = master.random_range(5.0..15.0);
        let timemode = timemodes[master.random_range(0..timemodes.len())];
        let stepmode = stepmodes[master.random_range(0..stepmodes.len())];
        let side = |rng: &mut ChaCha8Rng| -> Vec<(TType, usize)> {
            (0..rng.random_range(1..=2))
                .map(|_| {
                    (
                        types[rng.random_range(0..types.len())],
                        rng.random_range(1..=3),
                    )
                })
                .collect()
        };
        let population = PopulationSpec {
            buyers: side(&mut master),
            sellers: side(&mut master),
        };
        let range = |rng: &mut ChaCha8Rng| -> (i64, i64) {
            let lo = rng.random_range(50..=120);
            (lo, lo + rng.random_range(0..=150))
        };
        let offset = |rng: &mut ChaCha8Rng| -> OffsetFn {
            match rng.random_range(0..4) {
                0 => OffsetFn::None,
                1 => OffsetFn::Linear {
                    slope: rng.random_range(-1.0..1.0),
                },
                2 => OffsetFn::Sinusoid {
                    amplitude: rng.random_range(0.0..30.0),
                    period: rng.random_range(10.0..60.0),
                },
                _ => OffsetFn::RandomWalk {
                    seed: rng.random(),
                },
            }
        };
        let segments = |rng: &mut ChaCha8Rng| -> Vec<ScheduleSegment> {
            let (lo, hi) = range(rng);
            vec![ScheduleSegment::new(0.0, duration, Price(lo), Price(hi), offset(rng)).unwrap()]
        };
        let schedule = OrderSchedule::new(
            segments(&mut master),
            segments(&mut master),
            interval,
            timemode,
            stepmode,
        )
        .unwrap();
        let config = session_config(
            &format!("rand{index:04}"),
            duration,
            population,
            schedule,
            master.random(),
        );

        let outcome = market_session(&config).unwrap();
        let balances: i64 = outcome.traders.iter().map(|t| t.balance()).sum();
        let surplus: i64 = outcome
            .trades
            .iter()
            .map(|t| t.buyer_limit.pennies() - t.seller_limit.pennies())
            .sum();
        assert_eq!(balances, surplus, "session {index}: balances vs surplus");
        for trade in &outcome.trades {
            assert!(
                trade.seller_limit <= trade.price && trade.price <= trade.buyer_limit,
                "session {index}: price {} outside [{}, {}]",
                trade.price,
                trade.seller_limit,
                trade.buyer_limit
            );
        }
    }

    println!("acceptance 07 accounting-identity: PASS (1000 sessions)");
}

#[test]
fn acceptance_08_determinism_across_parallelism() {
    // A 9-session sweep with per-trial dumps must produce byte-identical
    // files at parallelism 1 and 4, and the binary must reproduce a session
    // byte for byte when rerun with the same seed.
    let template = SessionTemplate {
        start: 0.0,
        end: 60.0,
        schedule: symmetric_schedule(
            &[(0.0, 60.0, 50, 150)],
            30.0,
            TimeMode::DripJittered,
            StepMode::Jittered,
        ),
        band: PriceBand::default(),
        timestep: None,
    };
    let spec = SweepSpec {
        trader_types: vec![TType::Zic, TType::Zip],
        n_per_side: 4,
        min_n: 1,
        trials_per_ratio: 3,
        base_seed: 42,
        template,
    };
    let serial = tempfile::tempdir().unwrap();
    let parallel = tempfile::tempdir().unwrap();
    let a = run_sweep(&spec, 1, serial.path(), true).unwrap();
    let b = run_sweep(&spec, 4, parallel.path(), true).unwrap();
    assert_eq!(a.n_sessions, 9);
    assert_eq!(b.n_sessions, 9);
    let mut names: Vec<String> = std::fs::read_dir(serial.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 1 + 2 * 9);
    for name in &names {
        let lhs = std::fs::read(serial.path().join(name)).unwrap();
        let rhs = std::fs::read(parallel.path().join(name)).unwrap();
        assert_eq!(lhs, rhs, "{name} differs across parallelism");
        assert!(!lhs.is_empty() || name.starts_with("tape") || name.starts_with("prices"));
    }

    let rerun = |dir: &std::path::Path| {
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_lobsim"))
            .args([
                "session",
                "--seed",
                "7",
                "--end",
                "60",
                "--timemode",
                "drip-poisson",
                "--stepmode",
                "random",
                "--dump-tape",
                "--dump-blotters",
                "--dump-prices",
                "--out",
            ])
            .arg(dir)
            .status()
            .unwrap();
        assert!(status.success());
    };
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    rerun(first.path());
    rerun(second.path());
    for name in [
        "balances_session0000001.csv",
        "tape_session0000001.csv",
        "blotters_session0000001.csv",
        "prices_session0000001.csv",
    ] {
        let lhs = std::fs::read(first.path().join(name)).unwrap();
        let rhs = std::fs::read(second.path().join(name)).unwrap();
        assert_eq!(lhs, rhs, "{name} differs across reruns");
    }

    println!("acceptance 08 determinism: PASS");
}

#[test]
fn acceptance_09_metrics_match_brute_force() {
    // 100 random instances with at most 10 limits per side. Equilibrium is
    // checked against a full price scan, efficiency against a maximum
    // prefix-sum oracle (exact equality), and the dispersion statistic
    // against an integer sum-of-squares oracle (relative error under 1e-9).
    fn scan_equilibrium(demand: &[i64], supply: &[i64]) -> (usize, Option<i64>) {
        let quantity = (1..=260)
            .map(|p| {
                let d = demand.iter().filter(|&&x| x >= p).count();
                let s = supply.iter().filter(|&&x| x <= p).count();
                d.min(s)
            })
            .max()
            .unwrap();
        if quantity == 0 {
            return (0, None);
        }
        let mut d_sorted = demand.to_vec();
        d_sorted.sort_unstable_by(|a, b| b.cmp(a));
        let mut s_sorted = supply.to_vec();
        s_sorted.sort_unstable();
        let pair_mid = (d_sorted[quantity - 1] + s_sorted[quantity - 1]) as f64 / 2.0;
        (quantity, Some((pair_mid + 0.5).floor() as i64))
    }

    fn max_prefix_surplus(demand: &[i64], supply: &[i64]) -> i64 {
        let mut d_sorted = demand.to_vec();
        d_sorted.sort_unstable_by(|a, b| b.cmp(a));
        let mut s_sorted = supply.to_vec();
        s_sorted.sort_unstable();
        let mut best = 0;
        let mut run = 0;
        for (d, s) in d_sorted.iter().zip(&s_sorted) {
            run += d - s;
            best = best.max(run);
        }
        best
    }

    fn draw_limits(rng: &mut ChaCha8Rng, n: usize) -> Vec<i64> {
        (0..n).map(|_| rng.random_range(1..=200)).collect()
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x09AC);
    for case in 0..100u32 {
        let n_demand = rng.random_range(1..=10);
        let demand = draw_limits(&mut rng, n_demand);
        let n_supply = rng.random_range(1..=10);
        let supply = draw_limits(&mut rng, n_supply);
        let demand_prices: Vec<Price> = demand.iter().copied().map(Price).collect();
        let supply_prices: Vec<Price> = supply.iter().copied().map(Price).collect();

        let (scan_q, scan_p) = scan_equilibrium(&demand, &supply);
        let eq = equilibrium_price(&demand_prices, &supply_prices);
        assert_eq!(eq.quantity, scan_q, "case {case}: quantity");
        assert_eq!(eq.price.map(|p| p.pennies()), scan_p, "case {case}: price");

        let max_surplus = max_prefix_surplus(&demand, &supply);
        let mut d_sorted = demand.clone();
        d_sorted.sort_unstable_by(|a, b| b.cmp(a));
        let mut s_sorted = supply.clone();
        s_sorted.sort_unstable();
        let executed: Vec<(Price, Price)> = (0..rng.random_range(0..=scan_q))
            .map(|q| (Price(d_sorted[q]), Price(s_sorted[q])))
            .collect();
        let efficiency = allocative_efficiency(&executed, &demand_prices, &supply_prices);
        if max_surplus == 0 {
            assert!(
                matches!(efficiency, Err(MetricsError::ZeroMaxSurplus)),
                "case {case}: expected zero-surplus error"
            );
        } else {
            let realized: i64 = executed.iter().map(|(b, s)| b.pennies() - s.pennies()).sum();
            let expected = realized as f64 / max_surplus as f64;
            assert_eq!(efficiency.unwrap(), expected, "case {case}: efficiency");
        }

        let tape: Vec<i64> = (0..rng.random_range(1..=30))
            .map(|_| rng.random_range(1..=200))
            .collect();
        let tape_prices: Vec<Price> = tape.iter().copied().map(Price).collect();
        let p0 = rng.random_range(50..=150);
        let sse: i128 = tape.iter().map(|&p| ((p - p0) as i128).pow(2)).sum();
        let expected = 100.0 * (sse as f64 / tape.len() as f64).sqrt() / p0 as f64;
        let alpha = smiths_alpha(&tape_prices, Price(p0)).unwrap();
        let err = (alpha - expected).abs() / expected.max(f64::MIN_POSITIVE);
        assert!(err <= 1e-9, "case {case}: alpha {alpha} vs oracle {expected}");
    }

    println!("acceptance 09 metric-oracles: PASS (100 cases)");
}
