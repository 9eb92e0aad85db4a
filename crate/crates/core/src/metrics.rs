//! Run accounting, the latency cost model and figure data.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::allocator::ResolvedTrace;
use crate::page::TierKind;
use crate::policies::PolicyStats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub fast_latency_ns: f64,
    pub capacity_latency_ns: f64,
    pub migration_cost_ns: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            fast_latency_ns: 100.0,
            capacity_latency_ns: 300.0,
            migration_cost_ns: 50_000.0,
        }
    }
}

impl CostModel {
    /// Slower capacity tier of a CXL-attached device.
    pub fn cxl() -> Self {
        Self {
            capacity_latency_ns: 400.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.fast_latency_ns > 0.0) {
            return Err("fast latency must be positive".into());
        }
        if !(self.capacity_latency_ns >= self.fast_latency_ns) {
            return Err("capacity latency must be at least the fast latency".into());
        }
        if !(self.migration_cost_ns >= 0.0) {
            return Err("migration cost must be non-negative".into());
        }
        Ok(())
    }

    /// Time for `hits` fast accesses, `misses` slow ones and `migrations`
    /// page moves.
    pub fn time_ns(&self, hits: u64, misses: u64, migrations: u64) -> f64 {
        hits as f64 * self.fast_latency_ns
            + misses as f64 * self.capacity_latency_ns
            + migrations as f64 * self.migration_cost_ns
    }
}

/// Counts for one slice of the run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TimelineBucket {
    pub start_access: u64,
    pub accesses: u64,
    pub fast_hits: u64,
    pub promotions: u64,
    pub demotions: u64,
}

impl TimelineBucket {
    pub fn hit_rate(&self) -> f64 {
        ratio(self.fast_hits, self.accesses)
    }

    pub fn estimated_time_ns(&self, cm: &CostModel) -> f64 {
        cm.time_ns(
            self.fast_hits,
            self.accesses - self.fast_hits,
            self.promotions + self.demotions,
        )
    }

    /// Accesses per second under the cost model.
    pub fn estimated_throughput(&self, cm: &CostModel) -> f64 {
        let t = self.estimated_time_ns(cm);
        if t > 0.0 {
            self.accesses as f64 / t * 1e9
        } else {
            0.0
        }
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Totals of a run as written to `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub policy: String,
    pub strategy: String,
    pub total_accesses: u64,
    pub sampled_accesses: u64,
    pub fast_hits: u64,
    pub hit_rate: f64,
    pub promotions: u64,
    pub demotions: u64,
    pub migrations: u64,
    pub revalidation_drops: u64,
    pub blocked_promotions: u64,
    pub thrash_page_count: u64,
    pub warmup_accesses: u64,
    pub migrations_after_warmup: u64,
    pub pages_opened: u64,
    pub peak_occupied_pages: u64,
    pub fast_capacity_pages: u64,
    /// Fast-tier residents when the first access happened.
    pub initial_fast_resident: u64,
    pub final_fast_resident: u64,
    pub packing_efficiency: f64,
    pub wss_pages: f64,
    pub wss_bytes: f64,
    pub estimated_runtime_ns: f64,
    pub policy_stats: PolicyStats,
    pub cost_model: CostModel,
    /// Echo of the full configuration.
    pub config: serde_json::Value,
    #[serde(skip)]
    pub timeline: Vec<TimelineBucket>,
}

impl RunReport {
    /// Empty report for a run that has not started.
    pub fn new(policy: &str, strategy: &str, cost_model: CostModel) -> Self {
        Self {
            policy: policy.to_string(),
            strategy: strategy.to_string(),
            total_accesses: 0,
            sampled_accesses: 0,
            fast_hits: 0,
            hit_rate: 0.0,
            promotions: 0,
            demotions: 0,
            migrations: 0,
            revalidation_drops: 0,
            blocked_promotions: 0,
            thrash_page_count: 0,
            warmup_accesses: 0,
            migrations_after_warmup: 0,
            pages_opened: 0,
            peak_occupied_pages: 0,
            fast_capacity_pages: 0,
            initial_fast_resident: 0,
            final_fast_resident: 0,
            packing_efficiency: 1.0,
            wss_pages: 0.0,
            wss_bytes: 0.0,
            estimated_runtime_ns: 0.0,
            policy_stats: PolicyStats::default(),
            cost_model,
            config: serde_json::Value::Null,
            timeline: Vec::new(),
        }
    }

    /// Counts one access served from `tier`.
    pub fn record_access(&mut self, tier: TierKind) {
        self.total_accesses += 1;
        if tier == TierKind::Fast {
            self.fast_hits += 1;
        }
        self.hit_rate = ratio(self.fast_hits, self.total_accesses);
    }

    pub fn misses(&self) -> u64 {
        self.total_accesses - self.fast_hits
    }

    /// Hit rate over the accesses in `[from, to)`, from timeline buckets
    /// whose start lies in that range.
    pub fn hit_rate_between(&self, from: u64, to: u64) -> f64 {
        let (h, a) = self
            .timeline
            .iter()
            .filter(|b| b.start_access >= from && b.start_access < to)
            .fold((0, 0), |(h, a), b| (h + b.fast_hits, a + b.accesses));
        ratio(h, a)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn timeline_csv(&self) -> String {
        let mut s = String::from(
            "bucket,start_access,accesses,fast_hits,hit_rate,promotions,demotions,estimated_time_ns,estimated_throughput\n",
        );
        for (i, b) in self.timeline.iter().enumerate() {
            writeln!(
                s,
                "{},{},{},{},{:.6},{},{},{:.1},{:.1}",
                i,
                b.start_access,
                b.accesses,
                b.fast_hits,
                b.hit_rate(),
                b.promotions,
                b.demotions,
                b.estimated_time_ns(&self.cost_model),
                b.estimated_throughput(&self.cost_model),
            )
            .expect("writing to a string");
        }
        s
    }
}

/// `hits * fast + misses * capacity + migrations * migration_cost`.
pub fn estimated_runtime(report: &RunReport, cm: &CostModel) -> f64 {
    cm.time_ns(report.fast_hits, report.misses(), report.promotions + report.demotions)
}

/// Access counts per (address bucket, time bucket). Addresses are page ids
/// in allocation order; rows are address buckets.
pub fn heatmap(resolved: &ResolvedTrace, address_buckets: usize, time_buckets: usize) -> Result<Vec<Vec<u64>>, String> {
    if address_buckets == 0 || time_buckets == 0 {
        return Err("heatmap needs at least one address and one time bucket".into());
    }
    let mut m = vec![vec![0u64; time_buckets]; address_buckets];
    let pages = resolved.pages_opened.max(1) as u128;
    let total = resolved.access_count.max(1) as u128;
    for (a, page) in resolved.access_pages().enumerate() {
        let row = (page.index() as u128 * address_buckets as u128 / pages) as usize;
        let col = (a as u128 * time_buckets as u128 / total) as usize;
        m[row.min(address_buckets - 1)][col.min(time_buckets - 1)] += 1;
    }
    Ok(m)
}

pub fn heatmap_csv(m: &[Vec<u64>]) -> String {
    let cols = m.first().map_or(0, Vec::len);
    let mut s = String::from("address_bucket");
    for c in 0..cols {
        write!(s, ",t{c}").expect("writing to a string");
    }
    s.push('\n');
    for (r, row) in m.iter().enumerate() {
        write!(s, "{r}").expect("writing to a string");
        for v in row {
            write!(s, ",{v}").expect("writing to a string");
        }
        s.push('\n');
    }
    s
}

/// Cumulative access fraction over pages sorted by descending access count
/// (pages never accessed are left out).
pub fn access_cdf(resolved: &ResolvedTrace) -> Vec<f64> {
    let mut counts: Vec<u64> = resolved.page_accesses.iter().copied().filter(|&c| c > 0).collect();
    counts.sort_unstable_by(|a, b| b.cmp(a));
    let total: u64 = counts.iter().sum();
    let mut acc = 0u64;
    let mut cdf: Vec<f64> = counts
        .iter()
        .map(|&c| {
            acc += c;
            acc as f64 / total as f64
        })
        .collect();
    if let Some(last) = cdf.last_mut() {
        *last = 1.0;
    }
    cdf
}

pub fn cdf_csv(resolved: &ResolvedTrace) -> String {
    let cdf = access_cdf(resolved);
    let opened = resolved.pages_opened.max(1) as f64;
    let mut s = String::from("rank,page_fraction,cumulative_access_fraction\n");
    for (i, f) in cdf.iter().enumerate() {
        writeln!(s, "{},{:.6},{:.6}", i + 1, (i + 1) as f64 / opened, f).expect("writing to a string");
    }
    s
}
