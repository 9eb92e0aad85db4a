//! Acceptance checks, one line per criterion. Exits nonzero if any fails.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tierlab::allocator::{pages_for_access_fraction, resolve, GroupingStrategy, ResolvedTrace};
use tierlab::config::RunConfig;
use tierlab::experiment::{run_batch, run_one, Execution, Job};
use tierlab::histogram::{HotnessHistogram, NUM_BINS};
use tierlab::hotness::{
    adapt_thresholds, record_access_sawtooth, record_access_smooth, smooth_value, CoolingConfig, CounterState,
    ThresholdConfig, Thresholds, WarmDisableBasis,
};
use tierlab::metrics::RunReport;
use tierlab::page::{LogicalTime, PageId, TierKind, TieredMemory};
use tierlab::policies::{scaled, PolicyConfig, PolicyKind};
use tierlab::sim::SimConfig;
use tierlab::workload::{generate, WorkloadSpec};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn batch(jobs: &[Job<'_>]) -> Result<Vec<RunReport>, String> {
    run_batch(jobs, Execution::default())
        .into_iter()
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())
}

fn resolved(spec: &WorkloadSpec, strategy: GroupingStrategy) -> ResolvedTrace {
    resolve(&generate(spec).expect("valid spec"), strategy, 1 << 30).expect("trace resolves")
}

/// Smooth and sawtooth counters agree at every cooling boundary. The oracle
/// replays the halving counter by hand.
fn counter_boundary_equality() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut boundaries = 0u64;
    for _ in 0..1000 {
        let cp = rng.random_range(1..=300u64);
        let periods = rng.random_range(1..=12u64);
        let density: f64 = rng.random();
        let saw_cfg = CoolingConfig::sawtooth(cp);
        let smooth_cfg = CoolingConfig::smooth(cp);
        let mut saw = CounterState::default();
        let mut smooth = CounterState::default();
        let mut oracle = 0.0f64;
        for t in 0..periods * cp {
            if t > 0 && t % cp == 0 {
                oracle *= 0.5;
                // just before the boundary, at the end of the previous period
                let prev = saw_cfg.epoch_at(LogicalTime(t - 1));
                let left = smooth.smooth_value(LogicalTime(t), prev, &smooth_cfg);
                let at = smooth_value(&smooth, LogicalTime(t), &smooth_cfg);
                let s = saw.sawtooth_value(saw_cfg.epoch_at(LogicalTime(t)), &saw_cfg);
                for v in [left, at, s] {
                    worst = worst.max(rel_err(v, oracle));
                }
                boundaries += 1;
            }
            if rng.random_bool(density) {
                oracle += 1.0;
                record_access_sawtooth(&mut saw, LogicalTime(t), &saw_cfg);
                record_access_smooth(&mut smooth, LogicalTime(t), &smooth_cfg);
            }
        }
    }
    ensure(worst <= 1e-9, format!("worst relative error {worst:e}"))?;
    Ok(format!("{boundaries} boundaries, worst relative error {worst:.1e}"))
}

/// Under one access per sample the sawtooth halves at each boundary while the
/// smooth counter never moves by more than one access quantum per step.
fn discontinuity_contrast() -> Check {
    let cp = 1000u64;
    let saw_cfg = CoolingConfig::sawtooth(cp);
    let smooth_cfg = CoolingConfig::smooth(cp);
    let mut saw = CounterState::default();
    let mut smooth = CounterState::default();
    let (mut prev_saw, mut prev_smooth) = (0.0, 0.0);
    let mut max_smooth_step = 0.0f64;
    let mut drops = Vec::new();
    for t in 0..10 * cp {
        if t > 0 && t % cp == 0 {
            let after = saw.sawtooth_value(saw_cfg.epoch_at(LogicalTime(t)), &saw_cfg);
            drops.push(after / prev_saw);
        }
        let s = record_access_sawtooth(&mut saw, LogicalTime(t), &saw_cfg);
        let m = record_access_smooth(&mut smooth, LogicalTime(t), &smooth_cfg);
        if t > 0 {
            max_smooth_step = max_smooth_step.max((m - prev_smooth).abs());
        }
        prev_saw = s;
        prev_smooth = m;
    }
    ensure(drops.len() == 9, "expected nine boundaries")?;
    ensure(
        drops.iter().all(|&r| r == 0.5),
        format!("sawtooth boundary ratios {drops:?}"),
    )?;
    ensure(
        max_smooth_step <= 0.5,
        format!("smooth counter moved {max_smooth_step} in one step"),
    )?;
    Ok(format!(
        "sawtooth ratio 0.5 at {} boundaries; smooth max step {max_smooth_step:.4}",
        drops.len()
    ))
}

/// Exhaustive-scan reference for threshold selection.
fn threshold_oracle(bins: &[u64; NUM_BINS], fast: &[u64; NUM_BINS], cap: u64, cfg: &ThresholdConfig) -> Thresholds {
    let suffix = |b: usize, h: &[u64; NUM_BINS]| h[b..].iter().sum::<u64>();
    let top = (NUM_BINS - 1) as u8;
    let t_hot = if cap == 0 {
        top
    } else {
        (0..NUM_BINS).find(|&b| suffix(b, bins) <= cap).map_or(top, |b| b as u8)
    };
    let hot = match cfg.warm_disable_basis {
        WarmDisableBasis::HotSet => suffix(t_hot as usize, bins),
        WarmDisableBasis::FastResident => suffix(t_hot as usize, fast),
    };
    let warm_allowed = cap > 0 && t_hot >= 2 && (hot as f64) < cfg.warm_disable_fraction * cap as f64;
    Thresholds {
        t_hot,
        t_warm: warm_allowed.then(|| t_hot - 1),
    }
}

fn thresholds_match_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut with_warm = 0;
    for i in 0..10_000 {
        let mut bins = [0u64; NUM_BINS];
        let mut fast = [0u64; NUM_BINS];
        let spread = rng.random_range(1..=200u64);
        for b in 0..NUM_BINS {
            if rng.random_bool(0.7) {
                bins[b] = rng.random_range(0..=spread);
                fast[b] = rng.random_range(0..=bins[b]);
            }
        }
        let total: u64 = bins.iter().sum();
        let cap = match i % 4 {
            0 => 0,
            1 => rng.random_range(0..=total + 1),
            2 => total,
            _ => rng.random_range(0..=spread * 2),
        };
        let mut cfg = ThresholdConfig::every(1);
        cfg.warm_disable_fraction = rng.random_range(0.0..=1.0);
        if rng.random_bool(0.5) {
            cfg.warm_disable_basis = WarmDisableBasis::FastResident;
        }
        let got = adapt_thresholds(&HotnessHistogram::from_bins(bins), &fast, cap, &cfg);
        let want = threshold_oracle(&bins, &fast, cap, &cfg);
        ensure(
            got == want,
            format!("case {i}: {bins:?} cap {cap}: got {got:?}, oracle {want:?}"),
        )?;
        with_warm += usize::from(got.t_warm.is_some());
    }
    Ok(format!("10000 histograms match ({with_warm} with a warm bin)"))
}

/// Bin by repeated doubling, independent of the library's log2 path.
fn oracle_bin(v: f64) -> usize {
    let mut b = 0;
    let mut p = 2.0;
    while b < NUM_BINS - 1 && v >= p {
        b += 1;
        p *= 2.0;
    }
    b
}

fn histogram_conservation() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cp = 500u64;
    let cfg = CoolingConfig::smooth(cp);
    let saw = CoolingConfig::sawtooth(cp);
    let mut mem = TieredMemory::new(64, 1 << 20);
    let mut live: Vec<PageId> = Vec::new();
    let mut t = 0u64;
    let (mut accesses, mut migrations, mut coolings, mut releases) = (0u64, 0u64, 0u64, 0u64);
    for _ in 0..1_000_000 {
        let op = rng.random_range(0..100);
        if live.len() < 16 || op < 3 {
            let id = PageId(mem.pages().len() as u32);
            mem.register(id, CounterState::new(cfg.epoch_at(LogicalTime(t))), LogicalTime(t))
                .map_err(|e| e.to_string())?;
            live.push(id);
        } else if op < 5 && live.len() > 16 {
            let id = live.swap_remove(rng.random_range(0..live.len()));
            mem.release(id).map_err(|e| e.to_string())?;
            releases += 1;
        } else if op < 80 {
            let id = live[rng.random_range(0..live.len())];
            let c = &mut mem.page_mut(id).counter;
            let v = if id.0.is_multiple_of(2) {
                record_access_smooth(c, LogicalTime(t), &cfg)
            } else {
                record_access_sawtooth(c, LogicalTime(t), &saw)
            };
            mem.set_value(id, v).map_err(|e| e.to_string())?;
            t += 1;
            accesses += 1;
        } else if op < 97 {
            let id = live[rng.random_range(0..live.len())];
            let to = mem.page(id).tier.other();
            if mem.tier(to).has_room() {
                mem.migrate(id, to).map_err(|e| e.to_string())?;
                migrations += 1;
            }
        } else {
            // cool: jump to the next boundary and decay a random subset
            t = (t / cp + 1) * cp;
            let e = cfg.epoch_at(LogicalTime(t));
            for &id in &live {
                if rng.random_bool(0.5) {
                    let p = mem.page_mut(id);
                    let v = if id.0.is_multiple_of(2) {
                        p.counter.fold_to(e, &cfg);
                        p.counter.effective(LogicalTime(t), e, &cfg)
                    } else {
                        p.counter.fold_to(e, &saw);
                        p.counter.effective(LogicalTime(t), e, &saw)
                    };
                    mem.set_value(id, v).map_err(|e| e.to_string())?;
                }
            }
            coolings += 1;
        }
    }
    let mut all = [0u64; NUM_BINS];
    let mut fast = [0u64; NUM_BINS];
    for &id in &live {
        let p = mem.page(id);
        let b = oracle_bin(p.value);
        all[b] += 1;
        if p.tier == TierKind::Fast {
            fast[b] += 1;
        }
    }
    ensure(
        mem.histogram().bins() == &all,
        format!("histogram {:?} vs recount {all:?}", mem.histogram().bins()),
    )?;
    ensure(
        mem.fast_bins() == &fast,
        format!("fast bins {:?} vs recount {fast:?}", mem.fast_bins()),
    )?;
    ensure(
        mem.histogram().total() == live.len() as u64,
        "histogram total differs from live pages",
    )?;
    Ok(format!(
        "1e6 ops ({accesses} accesses, {migrations} migrations, {coolings} coolings, {releases} releases); {} pages recounted",
        live.len()
    ))
}

fn phase_change_responsiveness() -> Check {
    let scale = 0.0075;
    let cp = scaled(120_000, scale);
    let total = 2000 * cp;
    let sw = total / 2;
    let kinds = [PolicyKind::Smooth, PolicyKind::SawtoothQC, PolicyKind::SawtoothDefault];
    let traces: Vec<(WorkloadSpec, ResolvedTrace)> = (1..=4u64)
        .map(|seed| {
            let spec = WorkloadSpec::phase_change(500, total).with_seed(seed);
            let r = resolved(&spec, GroupingStrategy::TimeBased);
            (spec, r)
        })
        .collect();
    let mut jobs = Vec::new();
    for (spec, r) in &traces {
        for k in kinds {
            let mut config = SimConfig::new(k, GroupingStrategy::TimeBased, spec.hot_region_objects(), scale);
            config.timeline_buckets = total / (cp / 8);
            jobs.push(Job { resolved: r, config });
        }
    }
    let reports = batch(&jobs)?;
    let mut lines = Vec::new();
    for (i, runs) in reports.chunks(3).enumerate() {
        let seed = i + 1;
        let (smooth, qc, default) = (&runs[0], &runs[1], &runs[2]);
        let pre = |r: &RunReport| r.hit_rate_between(sw - 10 * cp, sw);
        let after2 = |r: &RunReport| r.hit_rate_between(sw + 2 * cp, sw + 3 * cp) / pre(r);
        let first = |r: &RunReport| {
            let p = pre(r);
            r.timeline
                .iter()
                .find(|b| b.start_access >= sw && b.hit_rate() >= 0.9 * p)
                .map_or(f64::INFINITY, |b| (b.start_access + b.accesses - sw) as f64 / cp as f64)
        };
        ensure(
            after2(smooth) >= 0.9,
            format!(
                "seed {seed}: smooth holds {:.3} of its pre-switch hit rate two intervals after the switch",
                after2(smooth)
            ),
        )?;
        ensure(
            first(default) > first(smooth) && after2(default) < 0.9,
            format!(
                "seed {seed}: default interval recovers at {:.2} cp (after2 {:.3}) vs smooth {:.2} cp",
                first(default),
                after2(default),
                first(smooth)
            ),
        )?;
        ensure(
            smooth.migrations < qc.migrations && smooth.migrations as f64 <= 0.5 * qc.migrations as f64,
            format!(
                "seed {seed}: smooth {} vs short-interval sawtooth {} migrations",
                smooth.migrations, qc.migrations
            ),
        )?;
        ensure(
            smooth.hit_rate >= qc.hit_rate - 0.02,
            format!("seed {seed}: smooth hit {:.4} vs {:.4}", smooth.hit_rate, qc.hit_rate),
        )?;
        lines.push(format!(
            "seed {seed}: recovery {:.2}/{:.2} cp, migrations {}/{}",
            first(smooth),
            first(default),
            smooth.migrations,
            qc.migrations
        ));
    }
    Ok(lines.join("; "))
}

fn skew_spec() -> WorkloadSpec {
    let mut spec = WorkloadSpec::small_object_skew(100_000, 1_000_000).with_seed(5);
    spec.shared_wrapper_frames = 3;
    spec
}

fn allocation_cdf_ordering() -> Check {
    let trace = generate(&skew_spec()).map_err(|e| e.to_string())?;
    let p50 = |s| {
        let r = resolve(&trace, s, 1 << 30).expect("trace resolves");
        pages_for_access_fraction(&r, 0.5)
    };
    let oracle = p50(GroupingStrategy::OraclePopularity);
    let context = p50(GroupingStrategy::context_default());
    let size = p50(GroupingStrategy::SizeBased);
    let time = p50(GroupingStrategy::TimeBased);
    let msg = format!("pages for half the accesses: oracle {oracle}, context {context}, size {size}, time {time}");
    ensure(oracle <= context && context < size && size < time, msg.clone())?;
    ensure(context as f64 <= 2.0 / 3.0 * size as f64, msg.clone())?;
    Ok(msg)
}

fn backtrace_depth_sensitivity() -> Check {
    let spec = skew_spec();
    let trace = generate(&spec).map_err(|e| e.to_string())?;
    let hot = &spec.contexts[0];
    let fast = ((hot.object_share * spec.num_objects as f64).round() as u64 * hot.size).div_ceil(spec.page_size);
    let placements: Vec<(GroupingStrategy, ResolvedTrace)> = (1..=14usize)
        .map(|depth| {
            let s = GroupingStrategy::ContextBased { depth, regions: 32 };
            (s, resolve(&trace, s, 1 << 30).expect("trace resolves"))
        })
        .collect();
    let jobs: Vec<Job<'_>> = placements
        .iter()
        .map(|(s, r)| Job {
            resolved: r,
            config: SimConfig::new(PolicyKind::Smooth, *s, fast, 0.025),
        })
        .collect();
    let rt: Vec<f64> = batch(&jobs)?.iter().map(|r| r.estimated_runtime_ns).collect();
    let shallow_best = rt[..3].iter().copied().fold(f64::INFINITY, f64::min);
    let deep_worst = rt[3..].iter().copied().fold(0.0, f64::max);
    let deep_best = rt[3..].iter().copied().fold(f64::INFINITY, f64::min);
    let spread = deep_worst / deep_best - 1.0;
    let summary = format!(
        "fast {fast} pages; runtime depth 1-3 >= {:.3e} ns, depth 4-14 in [{deep_best:.3e}, {deep_worst:.3e}] (spread {:.2}%)",
        shallow_best,
        spread * 100.0
    );
    ensure(shallow_best > deep_worst, summary.clone())?;
    ensure(spread < 0.05, summary.clone())?;
    Ok(summary)
}

fn over_provisioned_stability() -> Check {
    let specs = [
        WorkloadSpec::stable_zipf(2000, 300_000, 0.99).with_seed(8),
        WorkloadSpec::phase_change(1000, 300_000).with_seed(8),
        WorkloadSpec::checkered(1000, 300_000, 4, 50_000).with_seed(8),
    ];
    let traces: Vec<ResolvedTrace> = specs.iter().map(|s| resolved(s, GroupingStrategy::TimeBased)).collect();
    let mut jobs = Vec::new();
    for r in &traces {
        for k in PolicyKind::ALL {
            jobs.push(Job {
                resolved: r,
                config: SimConfig::new(k, GroupingStrategy::TimeBased, r.pages_opened, 0.01),
            });
        }
    }
    let reports = batch(&jobs)?;
    let mut worst = 1.0f64;
    for rep in &reports {
        worst = worst.min(rep.hit_rate);
        ensure(
            rep.hit_rate >= 0.99 && rep.migrations_after_warmup == 0,
            format!(
                "{}: hit {:.4}, {} migrations after warmup",
                rep.policy, rep.hit_rate, rep.migrations_after_warmup
            ),
        )?;
    }
    Ok(format!(
        "{} runs, lowest hit rate {worst:.4}, no migrations after warmup",
        reports.len()
    ))
}

fn cooling_interval_sensitivity() -> Check {
    let scale = 0.015;
    let r = resolved(
        &WorkloadSpec::phase_change(500, 3_600_000).with_seed(3),
        GroupingStrategy::TimeBased,
    );
    let fast = WorkloadSpec::phase_change(500, 3_600_000).hot_region_objects();
    let intervals = [100_000u64, 200_000, 500_000, 1_000_000, 2_000_000];
    let kinds = [PolicyKind::Smooth, PolicyKind::SawtoothDefault];
    let mut jobs = Vec::new();
    for k in kinds {
        for cp in intervals {
            let mut config = SimConfig::new(k, GroupingStrategy::TimeBased, fast, scale);
            let PolicyConfig::Histogram { cooling, .. } = &mut config.policy else {
                unreachable!("histogram policies")
            };
            cooling.interval_samples = scaled(cp, scale);
            jobs.push(Job { resolved: &r, config });
        }
    }
    let reports = batch(&jobs)?;
    let ratio = |rs: &[RunReport]| {
        let m: Vec<u64> = rs.iter().map(|r| r.migrations).collect();
        (
            *m.iter().max().unwrap() as f64 / (*m.iter().min().unwrap()).max(1) as f64,
            m,
        )
    };
    let (smooth, sm) = ratio(&reports[..5]);
    let (saw, sw) = ratio(&reports[5..]);
    let msg = format!("max/min migrations: smooth {smooth:.2} {sm:?}, sawtooth {saw:.2} {sw:?}");
    ensure(smooth < saw, msg.clone())?;
    Ok(msg)
}

fn determinism() -> Check {
    let mut n = 0;
    for (policy, strategy) in [
        ("smooth", "context"),
        ("sawtooth-qc", "size"),
        ("two-interval", "time"),
        ("numa-hint-twice", "oracle"),
    ] {
        let text = format!(
            "[run]\nseed = 11\nscale = 0.01\n\
             [workload]\narchetype = small_object_skew\nnum_objects = 20000\ntotal_accesses = 200000\n\
             [allocator]\nstrategy = {strategy}\n\
             [policy]\nkind = {policy}\n\
             [sampling]\nrate = 3\njitter = 0.5\n"
        );
        let cfg = RunConfig::parse(&text, Path::new(".")).map_err(|e| e.to_string())?;
        let json = || -> Result<String, String> {
            let trace = cfg.load_trace().map_err(|e| e.to_string())?;
            Ok(run_one(&cfg, &trace).map_err(|e| e.to_string())?.1.to_json())
        };
        let (a, b) = (json()?, json()?);
        ensure(a == b, format!("{policy}/{strategy}: reports differ"))?;
        n += 1;
    }
    Ok(format!("{n} configurations produce byte-identical reports"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("counter boundary equality", counter_boundary_equality),
        ("sawtooth discontinuity, smooth continuity", discontinuity_contrast),
        ("threshold oracle", thresholds_match_oracle),
        ("histogram conservation", histogram_conservation),
        ("phase-change responsiveness", phase_change_responsiveness),
        ("allocation CDF ordering", allocation_cdf_ordering),
        ("backtrace-depth sensitivity", backtrace_depth_sensitivity),
        ("over-provisioned stability", over_provisioned_stability),
        ("cooling-interval sensitivity", cooling_interval_sensitivity),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.1}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.1}s): {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
