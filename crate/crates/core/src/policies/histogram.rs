use super::{Intent, Policy, PolicyStats};
use crate::error::SimError;
use crate::hotness::{
    adapt_thresholds, classify, Class, CoolingConfig, CoolingTrigger, CounterState, Epoch, ThresholdConfig, Thresholds,
};
use crate::page::{LogicalTime, PageId, QueueKind, TierKind, TieredMemory};

/// Histogram-driven classification with sawtooth or smooth counters.
///
/// At every cooling boundary the counters of queued pages are decayed
/// immediately; everything else decays lazily, when the page is next
/// sampled or scanned. Thresholds therefore follow a histogram that may lag
/// a cooling until pages are touched again.
#[derive(Debug, Clone)]
pub struct HistogramPolicy {
    name: String,
    cooling: CoolingConfig,
    threshold_cfg: ThresholdConfig,
    thresholds: Thresholds,
    epoch: Epoch,
    next_adapt: u64,
    hot: Vec<bool>,
    stats: PolicyStats,
}

impl HistogramPolicy {
    pub fn new(name: &str, cooling: CoolingConfig, threshold_cfg: ThresholdConfig) -> Self {
        Self {
            name: name.to_string(),
            cooling,
            threshold_cfg,
            thresholds: Thresholds { t_hot: 0, t_warm: None },
            epoch: Epoch::default(),
            next_adapt: 0,
            hot: Vec::new(),
            stats: PolicyStats::default(),
        }
    }

    pub fn cooling(&self) -> &CoolingConfig {
        &self.cooling
    }

    pub fn epoch(&self) -> Epoch {
        self.epoch
    }

    /// Classification of `page` under the current thresholds.
    pub fn class_of(&self, mem: &TieredMemory, page: PageId) -> Class {
        classify(mem.page(page).bin, self.thresholds.t_hot, self.thresholds.t_warm)
    }

    fn note_class(&mut self, page: PageId, class: Class, t: LogicalTime) {
        let i = page.index();
        if i >= self.hot.len() {
            self.hot.resize(i + 1, false);
        }
        let is_hot = class == Class::Hot;
        if self.hot[i] != is_hot {
            self.hot[i] = is_hot;
            self.stats.hot_transitions += 1;
            self.stats.last_hot_transition = Some(t);
        }
    }

    /// Recomputes the effective value of `page` at `t` and rebins it.
    pub fn refresh(&mut self, mem: &mut TieredMemory, page: PageId, t: LogicalTime) -> Result<Class, SimError> {
        let v = mem.page(page).counter.effective(t, self.epoch, &self.cooling);
        mem.set_value(page, v)?;
        let class = self.class_of(mem, page);
        self.note_class(page, class, t);
        Ok(class)
    }

    /// Runs any cooling and adaptation due at sample time `t`.
    pub fn advance(&mut self, mem: &mut TieredMemory, t: LogicalTime, out: &mut Vec<Intent>) -> Result<(), SimError> {
        if self.cooling.trigger == CoolingTrigger::EverySamples {
            let e = self.cooling.epoch_at(t);
            if e.index > self.epoch.index {
                self.cool(mem, e, t)?;
            }
        }
        if t.0 >= self.next_adapt {
            self.adapt(mem, t, out)?;
            let n = self.threshold_cfg.adapt_interval_samples;
            self.next_adapt = (t.0 / n + 1) * n;
        }
        Ok(())
    }

    /// Enters cooling epoch `e`: queued pages are decayed right away.
    pub fn cool(&mut self, mem: &mut TieredMemory, e: Epoch, t: LogicalTime) -> Result<(), SimError> {
        self.epoch = e;
        self.stats.coolings += 1;
        let queued: Vec<PageId> = mem.live_pages().filter(|p| p.queued.is_some()).map(|p| p.id).collect();
        for id in queued {
            mem.page_mut(id).counter.fold_to(e, &self.cooling);
            self.refresh(mem, id, t)?;
        }
        Ok(())
    }

    /// Recomputes thresholds from the histogram as it stands, then scans the
    /// fast tier: every fast page is refreshed and, when hot pages are
    /// waiting outside, cold ones are queued for demotion. Capacity pages
    /// keep their last observed bin until they are touched.
    pub fn adapt(&mut self, mem: &mut TieredMemory, t: LogicalTime, out: &mut Vec<Intent>) -> Result<(), SimError> {
        self.stats.adaptations += 1;
        let fast = mem.tier(TierKind::Fast).capacity_pages;
        self.thresholds = adapt_thresholds(mem.histogram(), mem.fast_bins(), fast, &self.threshold_cfg);
        mem.histogram_mut()
            .set_thresholds(self.thresholds.t_hot, self.thresholds.t_warm);

        let resident: Vec<PageId> = mem
            .live_pages()
            .filter(|p| p.tier == TierKind::Fast)
            .map(|p| p.id)
            .collect();
        for &id in &resident {
            self.refresh(mem, id, t)?;
        }
        if self.demand(mem) {
            for &id in &resident {
                let p = mem.page(id);
                if p.queued.is_none() && self.class_of(mem, id) == Class::Cold {
                    out.push(Intent::Demote(id));
                }
            }
        }
        Ok(())
    }

    /// Whether some hot page lives outside the fast tier.
    pub fn demand(&self, mem: &TieredMemory) -> bool {
        let t_hot = self.thresholds.t_hot;
        let hot_fast: u64 = mem.fast_bins()[t_hot as usize..].iter().sum();
        mem.histogram().pages_at_or_above(t_hot) > hot_fast
    }

    /// Records the sampled access itself and returns the page's new class.
    pub fn record(&mut self, mem: &mut TieredMemory, page: PageId, t: LogicalTime) -> Result<Class, SimError> {
        let cfg = &self.cooling;
        let p = mem.page_mut(page);
        let v = p.counter.record(t, self.epoch, cfg);
        p.last_access = t;
        mem.set_value(page, v)?;
        if let CoolingTrigger::MaxCounter(limit) = cfg.trigger {
            if v >= limit as f64 {
                let next = Epoch {
                    index: self.epoch.index + 1,
                    start: t,
                };
                self.cool(mem, next, t)?;
            }
        }
        let class = self.class_of(mem, page);
        self.note_class(page, class, t);
        Ok(class)
    }
}

/// Intent implied by a page's class and residence.
pub(super) fn intent_for(class: Class, tier: TierKind, page: PageId) -> Option<Intent> {
    match (class, tier) {
        (Class::Hot, TierKind::Capacity) => Some(Intent::Promote(page)),
        (Class::Cold, TierKind::Fast) => Some(Intent::Demote(page)),
        _ => None,
    }
}

impl Policy for HistogramPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn init_counter(&self, t: LogicalTime) -> CounterState {
        let epoch = match self.cooling.trigger {
            CoolingTrigger::EverySamples => self.cooling.epoch_at(t),
            CoolingTrigger::MaxCounter(_) => self.epoch,
        };
        CounterState::new(epoch)
    }

    fn on_sample(
        &mut self,
        mem: &mut TieredMemory,
        page: PageId,
        t: LogicalTime,
        out: &mut Vec<Intent>,
    ) -> Result<(), SimError> {
        self.advance(mem, t, out)?;
        let class = self.record(mem, page, t)?;
        out.extend(intent_for(class, mem.page(page).tier, page));
        Ok(())
    }

    fn revalidate(
        &mut self,
        mem: &mut TieredMemory,
        page: PageId,
        kind: QueueKind,
        t: LogicalTime,
    ) -> Result<bool, SimError> {
        let class = self.refresh(mem, page, t)?;
        let tier = mem.page(page).tier;
        Ok(match kind {
            QueueKind::Promotion => class == Class::Hot && tier == TierKind::Capacity,
            QueueKind::Demotion => class == Class::Cold && tier == TierKind::Fast,
        })
    }

    fn thresholds(&self) -> Option<Thresholds> {
        Some(self.thresholds)
    }

    fn stats(&self) -> PolicyStats {
        self.stats
    }
}
