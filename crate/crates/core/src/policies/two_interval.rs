use serde::{Deserialize, Serialize};

use super::histogram::{intent_for, HistogramPolicy};
use super::{Intent, Policy, PolicyStats};
use crate::error::SimError;
use crate::hotness::{Class, CoolingConfig, CounterState, ThresholdConfig, Thresholds};
use crate::page::{LogicalTime, PageId, QueueKind, TierKind, TieredMemory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoIntervalConfig {
    pub momentum_interval_samples: u64,
    pub frequency_interval_samples: u64,
    pub momentum_hot_threshold: u32,
    /// How often the frequency histogram's thresholds are recomputed.
    pub adapt_interval_samples: u64,
}

impl TwoIntervalConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.momentum_interval_samples == 0 || self.adapt_interval_samples == 0 {
            return Err("intervals must be positive".into());
        }
        if self.momentum_interval_samples >= self.frequency_interval_samples {
            return Err("momentum interval must be shorter than the frequency interval".into());
        }
        if self.momentum_hot_threshold == 0 {
            return Err("momentum threshold must be positive".into());
        }
        Ok(())
    }
}

/// A short momentum window that can promote on its own, next to a
/// long-interval sawtooth histogram that governs demotion.
///
/// A page is momentum-hot when it gathered `momentum_hot_threshold` samples
/// in the current or the previous momentum window. Momentum-hot pages are
/// never demoted.
#[derive(Debug, Clone)]
pub struct TwoIntervalPolicy {
    cfg: TwoIntervalConfig,
    frequency: HistogramPolicy,
    /// Per page: (momentum window index, samples in that window, samples in
    /// the window before).
    momentum: Vec<(u64, u32, u32)>,
}

impl TwoIntervalPolicy {
    pub fn new(cfg: TwoIntervalConfig) -> Self {
        let frequency = HistogramPolicy::new(
            super::PolicyKind::TwoInterval.name(),
            CoolingConfig::sawtooth(cfg.frequency_interval_samples),
            ThresholdConfig::every(cfg.adapt_interval_samples),
        );
        Self {
            cfg,
            frequency,
            momentum: Vec::new(),
        }
    }

    fn window(&self, t: LogicalTime) -> u64 {
        t.0 / self.cfg.momentum_interval_samples
    }

    fn bump(&mut self, page: PageId, t: LogicalTime) {
        let w = self.window(t);
        let i = page.index();
        if i >= self.momentum.len() {
            self.momentum.resize(i + 1, (0, 0, 0));
        }
        let m = &mut self.momentum[i];
        if m.0 != w {
            m.2 = if m.0 + 1 == w { m.1 } else { 0 };
            m.0 = w;
            m.1 = 0;
        }
        m.1 = m.1.saturating_add(1);
    }

    pub fn momentum_hot(&self, page: PageId, t: LogicalTime) -> bool {
        let Some(&(w, cur, prev)) = self.momentum.get(page.index()) else {
            return false;
        };
        let now = self.window(t);
        let th = self.cfg.momentum_hot_threshold;
        (w == now && (cur >= th || prev >= th)) || (w + 1 == now && cur >= th)
    }
}

impl Policy for TwoIntervalPolicy {
    fn name(&self) -> &str {
        self.frequency.name()
    }

    fn init_counter(&self, t: LogicalTime) -> CounterState {
        self.frequency.init_counter(t)
    }

    fn on_sample(
        &mut self,
        mem: &mut TieredMemory,
        page: PageId,
        t: LogicalTime,
        out: &mut Vec<Intent>,
    ) -> Result<(), SimError> {
        let start = out.len();
        self.frequency.advance(mem, t, out)?;
        self.bump(page, t);
        let class = self.frequency.record(mem, page, t)?;
        let tier = mem.page(page).tier;
        if self.momentum_hot(page, t) && tier == TierKind::Capacity {
            out.push(Intent::Promote(page));
        } else {
            out.extend(intent_for(class, tier, page));
        }
        let mut i = start;
        while i < out.len() {
            if let Intent::Demote(p) = out[i] {
                if self.momentum_hot(p, t) {
                    out.swap_remove(i);
                    continue;
                }
            }
            i += 1;
        }
        Ok(())
    }

    fn revalidate(
        &mut self,
        mem: &mut TieredMemory,
        page: PageId,
        kind: QueueKind,
        t: LogicalTime,
    ) -> Result<bool, SimError> {
        let class = self.frequency.refresh(mem, page, t)?;
        let tier = mem.page(page).tier;
        let momentum = self.momentum_hot(page, t);
        Ok(match kind {
            QueueKind::Promotion => tier == TierKind::Capacity && (momentum || class == Class::Hot),
            QueueKind::Demotion => tier == TierKind::Fast && !momentum && class == Class::Cold,
        })
    }

    fn thresholds(&self) -> Option<Thresholds> {
        self.frequency.thresholds()
    }

    fn stats(&self) -> PolicyStats {
        self.frequency.stats()
    }
}
