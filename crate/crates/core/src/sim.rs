//! The simulation loop: replays a resolved trace against two tiers, a
//! policy and the migration engine.

use serde::{Deserialize, Serialize};

use crate::allocator::{GroupingStrategy, ResolvedTrace, Step};
use crate::error::SimError;
use crate::metrics::{estimated_runtime, CostModel, RunReport, TimelineBucket};
use crate::migration::{MigrationConfig, MigrationQueues};
use crate::page::{LogicalTime, TierKind, TieredMemory};
use crate::policies::{PolicyConfig, PolicyKind};
use crate::workload::SamplingModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub strategy: GroupingStrategy,
    pub policy: PolicyConfig,
    pub fast_pages: u64,
    pub capacity_pages: u64,
    pub migration: MigrationConfig,
    pub sampling: SamplingModel,
    pub cost: CostModel,
    pub timeline_buckets: u64,
    /// Leading fraction of accesses excluded from `migrations_after_warmup`.
    pub warmup_fraction: f64,
    /// Full invariant recount every this many ticks (0: only at the end).
    pub invariant_check_ticks: u64,
}

impl SimConfig {
    /// Defaults for `policy` with intervals scaled by `scale`.
    pub fn new(policy: PolicyKind, strategy: GroupingStrategy, fast_pages: u64, scale: f64) -> Self {
        Self {
            strategy,
            policy: policy.default_config(scale, crate::workload::DEFAULT_PAGE_SIZE),
            fast_pages,
            capacity_pages: 1 << 32,
            migration: MigrationConfig::scaled(scale),
            sampling: SamplingModel::every_access(),
            cost: CostModel::default(),
            timeline_buckets: 100,
            warmup_fraction: 0.1,
            invariant_check_ticks: 64,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        self.policy.validate()?;
        self.migration.validate()?;
        self.sampling.validate()?;
        self.cost.validate()?;
        if self.timeline_buckets == 0 {
            return Err("timeline needs at least one bucket".into());
        }
        if !(0.0..=1.0).contains(&self.warmup_fraction) {
            return Err("warmup_fraction must be in [0, 1]".into());
        }
        Ok(())
    }
}

/// Runs one configuration over a resolved trace.
pub fn simulate(resolved: &ResolvedTrace, cfg: &SimConfig) -> Result<RunReport, SimError> {
    cfg.validate().map_err(SimError::Invariant)?;
    let mut policy = cfg.policy.build();
    let mut mem = TieredMemory::new(cfg.fast_pages, cfg.capacity_pages);
    let mut queues = MigrationQueues::new();
    let mut report = RunReport::new(policy.name(), cfg.strategy.name(), cfg.cost);
    report.fast_capacity_pages = cfg.fast_pages;
    report.pages_opened = resolved.pages_opened;
    report.peak_occupied_pages = resolved.peak_occupied_pages;
    report.packing_efficiency = resolved.packing_efficiency;
    report.config = serde_json::to_value(cfg).expect("config serializes");

    let total = resolved.access_count;
    let bucket_len = total.div_ceil(cfg.timeline_buckets).max(1);
    let mut timeline: Vec<TimelineBucket> = Vec::new();
    let warmup = (cfg.warmup_fraction * total as f64).ceil() as u64;
    report.warmup_accesses = warmup;

    let tick = cfg.migration.tick_interval_accesses;
    let mut wss_stamp: Vec<u64> = vec![u64::MAX; resolved.pages_opened as usize];
    let mut wss_current = 0u64;
    let mut wss_full_ticks = 0u64;
    let mut wss_sum = 0u64;

    let mut t = 0u64;
    let mut a = 0u64;
    let mut ticks = 0u64;
    let mut intents = Vec::new();
    for step in &resolved.steps {
        match *step {
            Step::Open(p) => {
                mem.register(p, policy.init_counter(LogicalTime(t)), LogicalTime(t))?;
            }
            Step::Release(p) => mem.release(p)?,
            Step::Access { page, seq } => {
                if a == 0 {
                    report.initial_fast_resident = mem.tier(TierKind::Fast).resident_pages;
                }
                let b = (a / bucket_len) as usize;
                if b >= timeline.len() {
                    timeline.push(TimelineBucket {
                        start_access: a,
                        ..TimelineBucket::default()
                    });
                }
                let tier = mem
                    .get(page)
                    .ok_or_else(|| SimError::Invariant(format!("access to unregistered {page}")))?
                    .tier;
                report.record_access(tier);
                let bucket = timeline.last_mut().expect("bucket exists");
                bucket.accesses += 1;
                if tier == TierKind::Fast {
                    bucket.fast_hits += 1;
                }

                let tick_index = a / tick;
                if wss_stamp[page.index()] != tick_index {
                    wss_stamp[page.index()] = tick_index;
                    wss_current += 1;
                }

                if cfg.sampling.observes(seq) {
                    intents.clear();
                    policy.on_sample(&mut mem, page, LogicalTime(t), &mut intents)?;
                    for &i in &intents {
                        queues.enqueue(&mut mem, i);
                    }
                    t += 1;
                    report.sampled_accesses += 1;
                }

                a += 1;
                if a.is_multiple_of(tick) {
                    wss_sum += wss_current;
                    wss_full_ticks += 1;
                    wss_current = 0;

                    let d = queues.migrate_tick(
                        &mut mem,
                        policy.as_mut(),
                        LogicalTime(t),
                        cfg.migration.max_migrations_per_tick,
                    )?;
                    let bucket = timeline.last_mut().expect("bucket exists");
                    bucket.promotions += d.promotions;
                    bucket.demotions += d.demotions;
                    if a > warmup {
                        report.migrations_after_warmup += d.migrations();
                    }
                    ticks += 1;
                    if cfg.invariant_check_ticks > 0 && ticks.is_multiple_of(cfg.invariant_check_ticks) {
                        mem.check_invariants()?;
                    }
                }
            }
        }
    }
    mem.check_invariants()?;
    report.final_fast_resident = mem.tier(TierKind::Fast).resident_pages;

    let ms = queues.stats();
    report.promotions = ms.promotions;
    report.demotions = ms.demotions;
    report.migrations = ms.migrations();
    report.revalidation_drops = ms.revalidation_drops;
    report.blocked_promotions = ms.blocked_promotions;
    report.thrash_page_count = queues.thrash_page_count();
    report.policy_stats = policy.stats();
    report.wss_pages = if wss_full_ticks > 0 {
        wss_sum as f64 / wss_full_ticks as f64
    } else {
        wss_current as f64
    };
    report.wss_bytes = report.wss_pages * resolved.page_size as f64;
    report.estimated_runtime_ns = estimated_runtime(&report, &cfg.cost);
    report.timeline = timeline;
    Ok(report)
}

/// Average distinct pages touched per window of `window` accesses (full
/// windows only, unless the trace is shorter than one window).
pub fn measured_wss_pages(resolved: &ResolvedTrace, window: u64) -> f64 {
    assert!(window >= 1);
    let mut stamp = vec![u64::MAX; resolved.pages_opened as usize];
    let (mut cur, mut sum, mut full) = (0u64, 0u64, 0u64);
    for (a, page) in resolved.access_pages().enumerate() {
        let w = a as u64 / window;
        if stamp[page.index()] != w {
            stamp[page.index()] = w;
            cur += 1;
        }
        if (a as u64 + 1).is_multiple_of(window) {
            sum += cur;
            full += 1;
            cur = 0;
        }
    }
    if full > 0 {
        sum as f64 / full as f64
    } else {
        cur as f64
    }
}

/// Expected distinct pages touched by `window` independent accesses when
/// page `i` is hit with probability `p[i]`.
pub fn expected_distinct_pages(page_probabilities: &[f64], window: u64) -> f64 {
    page_probabilities
        .iter()
        .map(|&p| 1.0 - (1.0 - p).powf(window as f64))
        .sum()
}
