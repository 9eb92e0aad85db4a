use serde::{Deserialize, Serialize};

use super::{Intent, Policy, PolicyKind, PolicyStats};
use crate::error::SimError;
use crate::hotness::{CounterState, Thresholds};
use crate::page::{LogicalTime, PageId, QueueKind, TierKind, TieredMemory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NumaDemotion {
    /// Demote least-recently-accessed fast pages once occupancy passes
    /// `high`, down to `low` (fractions of fast capacity).
    LruWatermark {
        high: f64,
        low: f64,
    },
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumaHintConfig {
    pub kind: PolicyKind,
    pub scan_window_pages: u64,
    pub scan_interval_samples: u64,
    pub hot_fault_threshold: u32,
    pub demotion: NumaDemotion,
}

impl NumaHintConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !matches!(self.hot_fault_threshold, 1 | 2) {
            return Err("hot_fault_threshold must be 1 or 2".into());
        }
        if self.scan_window_pages == 0 || self.scan_interval_samples == 0 {
            return Err("scan window and interval must be positive".into());
        }
        if let NumaDemotion::LruWatermark { high, low } = self.demotion {
            if !(0.0 < low && low <= high && high <= 1.0) {
                return Err("watermarks must satisfy 0 < low <= high <= 1".into());
            }
        }
        Ok(())
    }
}

/// Static-threshold promotion from hinting faults.
///
/// A periodic scan walks a window of capacity-tier pages; any page that
/// faulted at least `hot_fault_threshold` times since the scan last visited
/// it is queued for promotion. Demotion, if enabled, picks the
/// least-recently-accessed fast pages when the fast tier runs past its high
/// watermark while the capacity tier is in use.
#[derive(Debug, Clone)]
pub struct NumaHintPolicy {
    cfg: NumaHintConfig,
    faults: Vec<u32>,
    cursor: usize,
    next_scan: u64,
    stats: PolicyStats,
}

impl NumaHintPolicy {
    pub fn new(cfg: NumaHintConfig) -> Self {
        Self {
            next_scan: cfg.scan_interval_samples,
            cfg,
            faults: Vec::new(),
            cursor: 0,
            stats: PolicyStats::default(),
        }
    }

    /// One scan step: visits up to `scan_window_pages` capacity-tier pages
    /// from the cursor onwards and applies the demotion rule.
    pub fn scan_tick(&mut self, mem: &TieredMemory, out: &mut Vec<Intent>) {
        self.stats.adaptations += 1;
        let n = mem.pages().len();
        if self.faults.len() < n {
            self.faults.resize(n, 0);
        }
        let mut visited = 0u64;
        let mut steps = 0;
        while visited < self.cfg.scan_window_pages && steps < n {
            let i = self.cursor % n;
            self.cursor = (i + 1) % n;
            steps += 1;
            let p = &mem.pages()[i];
            if !p.live || p.tier != TierKind::Capacity {
                continue;
            }
            visited += 1;
            if self.faults[i] >= self.cfg.hot_fault_threshold {
                out.push(Intent::Promote(p.id));
            }
            self.faults[i] = 0;
        }

        if let NumaDemotion::LruWatermark { high, low } = self.cfg.demotion {
            let fast = mem.tier(TierKind::Fast);
            let cap = fast.capacity_pages as f64;
            let in_use = mem.tier(TierKind::Capacity).resident_pages > 0;
            if in_use && fast.resident_pages as f64 > high * cap {
                let excess = fast.resident_pages - (low * cap).floor() as u64;
                let mut lru: Vec<(LogicalTime, PageId)> = mem
                    .live_pages()
                    .filter(|p| p.tier == TierKind::Fast && p.queued.is_none())
                    .map(|p| (p.last_access, p.id))
                    .collect();
                let k = (excess as usize).min(lru.len());
                if k > 0 && k < lru.len() {
                    lru.select_nth_unstable(k - 1);
                }
                lru.truncate(k);
                lru.sort_unstable();
                out.extend(lru.into_iter().map(|(_, id)| Intent::Demote(id)));
            }
        }
    }
}

impl Policy for NumaHintPolicy {
    fn name(&self) -> &str {
        self.cfg.kind.name()
    }

    fn init_counter(&self, _t: LogicalTime) -> CounterState {
        CounterState::default()
    }

    fn on_sample(
        &mut self,
        mem: &mut TieredMemory,
        page: PageId,
        t: LogicalTime,
        out: &mut Vec<Intent>,
    ) -> Result<(), SimError> {
        if t.0 >= self.next_scan {
            self.scan_tick(mem, out);
            let n = self.cfg.scan_interval_samples;
            self.next_scan = (t.0 / n + 1) * n;
        }
        let p = mem.page_mut(page);
        p.last_access = t;
        if p.tier == TierKind::Capacity {
            let i = page.index();
            if i >= self.faults.len() {
                self.faults.resize(i + 1, 0);
            }
            self.faults[i] = self.faults[i].saturating_add(1);
        }
        Ok(())
    }

    fn revalidate(
        &mut self,
        mem: &mut TieredMemory,
        page: PageId,
        kind: QueueKind,
        _t: LogicalTime,
    ) -> Result<bool, SimError> {
        let tier = mem.page(page).tier;
        Ok(match kind {
            QueueKind::Promotion => tier == TierKind::Capacity,
            QueueKind::Demotion => tier == TierKind::Fast && self.cfg.demotion != NumaDemotion::None,
        })
    }

    fn thresholds(&self) -> Option<Thresholds> {
        None
    }

    fn stats(&self) -> PolicyStats {
        self.stats
    }
}
