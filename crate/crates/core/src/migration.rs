//! Promotion/demotion queues and the periodic migration tick.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::page::{LogicalTime, PageId, QueueKind, TierKind, TieredMemory};
use crate::policies::{Intent, Policy};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MigrationConfig {
    /// Accesses between migration ticks.
    pub tick_interval_accesses: u64,
    /// Moves per tick; `None` drains the queues.
    pub max_migrations_per_tick: Option<u64>,
}

impl MigrationConfig {
    pub const DEFAULT_TICK_ACCESSES: u64 = 5_000;

    pub fn scaled(scale: f64) -> Self {
        Self {
            tick_interval_accesses: crate::policies::scaled(Self::DEFAULT_TICK_ACCESSES, scale),
            max_migrations_per_tick: None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.tick_interval_accesses == 0 {
            return Err("tick interval must be at least one access".into());
        }
        if self.max_migrations_per_tick == Some(0) {
            return Err("max migrations per tick must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MigrationStats {
    pub promotions: u64,
    pub demotions: u64,
    /// Queued moves abandoned because the page no longer qualified.
    pub revalidation_drops: u64,
    /// Promotions left queued because the fast tier was full and no
    /// demotion candidate could make room.
    pub blocked_promotions: u64,
}

impl MigrationStats {
    pub fn migrations(&self) -> u64 {
        self.promotions + self.demotions
    }
}

/// System-wide promotion and demotion queues.
///
/// Membership is mirrored in `Page::queued`, so a page is queued at most
/// once. Entries for pages that were released are skipped when reached.
#[derive(Debug, Clone, Default)]
pub struct MigrationQueues {
    promotion: VecDeque<PageId>,
    demotion: VecDeque<PageId>,
    /// Per page: last move direction and number of direction changes.
    history: Vec<(Option<TierKind>, u32)>,
    stats: MigrationStats,
}

impl MigrationQueues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stats(&self) -> MigrationStats {
        self.stats
    }

    pub fn promotion_len(&self) -> usize {
        self.promotion.len()
    }

    pub fn demotion_len(&self) -> usize {
        self.demotion.len()
    }

    /// Pages whose migration direction reversed at least twice.
    pub fn thrash_page_count(&self) -> u64 {
        self.history.iter().filter(|h| h.1 >= 2).count() as u64
    }

    /// Queues an intent unless the page is already queued or the intent no
    /// longer matches its residence.
    pub fn enqueue(&mut self, mem: &mut TieredMemory, intent: Intent) {
        let id = intent.page();
        let Some(page) = mem.get(id) else { return };
        if page.queued.is_some() {
            return;
        }
        let (kind, want) = match intent {
            Intent::Promote(_) => (QueueKind::Promotion, TierKind::Capacity),
            Intent::Demote(_) => (QueueKind::Demotion, TierKind::Fast),
        };
        if page.tier != want {
            return;
        }
        mem.page_mut(id).queued = Some(kind);
        match kind {
            QueueKind::Promotion => self.promotion.push_back(id),
            QueueKind::Demotion => self.demotion.push_back(id),
        }
    }

    fn still_queued(mem: &TieredMemory, id: PageId, kind: QueueKind) -> bool {
        mem.get(id).is_some_and(|p| p.queued == Some(kind))
    }

    fn record_move(&mut self, id: PageId, to: TierKind) {
        let i = id.index();
        if i >= self.history.len() {
            self.history.resize(i + 1, (None, 0));
        }
        let h = &mut self.history[i];
        if h.0.is_some_and(|prev| prev != to) {
            h.1 += 1;
        }
        h.0 = Some(to);
        match to {
            TierKind::Fast => self.stats.promotions += 1,
            TierKind::Capacity => self.stats.demotions += 1,
        }
    }

    /// Coldest still-valid demotion candidate: lowest counter value, then
    /// oldest access, then lowest id. Invalid entries met on the way are
    /// dropped.
    fn take_victim(
        &mut self,
        mem: &mut TieredMemory,
        policy: &mut dyn Policy,
        t: LogicalTime,
    ) -> Result<Option<PageId>, SimError> {
        let mut best: Option<(usize, f64, LogicalTime, PageId)> = None;
        let mut i = 0;
        while i < self.demotion.len() {
            let id = self.demotion[i];
            if !Self::still_queued(mem, id, QueueKind::Demotion) {
                self.demotion.remove(i);
                continue;
            }
            if !policy.revalidate(mem, id, QueueKind::Demotion, t)? {
                mem.page_mut(id).queued = None;
                self.stats.revalidation_drops += 1;
                self.demotion.remove(i);
                continue;
            }
            let p = mem.page(id);
            let key = (p.value, p.last_access, id);
            let better = match best {
                None => true,
                Some((_, v, la, bid)) => key.0 < v || (key.0 == v && (key.1 < la || (key.1 == la && key.2 < bid))),
            };
            if better {
                best = Some((i, key.0, key.1, key.2));
            }
            i += 1;
        }
        let Some((i, .., id)) = best else {
            return Ok(None);
        };
        self.demotion.remove(i);
        mem.page_mut(id).queued = None;
        Ok(Some(id))
    }

    /// One migration tick: promotions first (making room by demoting the
    /// coldest demotion candidate when the fast tier is full), then the
    /// remaining demotions.
    pub fn migrate_tick(
        &mut self,
        mem: &mut TieredMemory,
        policy: &mut dyn Policy,
        t: LogicalTime,
        max_moves: Option<u64>,
    ) -> Result<MigrationStats, SimError> {
        let before = self.stats;
        let mut budget = max_moves.unwrap_or(u64::MAX);

        while budget > 0 {
            let Some(id) = self.promotion.pop_front() else { break };
            if !Self::still_queued(mem, id, QueueKind::Promotion) {
                continue;
            }
            if !policy.revalidate(mem, id, QueueKind::Promotion, t)? {
                mem.page_mut(id).queued = None;
                self.stats.revalidation_drops += 1;
                continue;
            }
            if !mem.tier(TierKind::Fast).has_room() {
                let victim = if budget >= 2 {
                    self.take_victim(mem, policy, t)?
                } else {
                    None
                };
                let Some(victim) = victim else {
                    self.promotion.push_front(id);
                    self.stats.blocked_promotions += 1;
                    break;
                };
                if !mem.tier(TierKind::Capacity).has_room() {
                    // nowhere to put the victim; keep both queued
                    mem.page_mut(victim).queued = Some(QueueKind::Demotion);
                    self.demotion.push_front(victim);
                    self.promotion.push_front(id);
                    self.stats.blocked_promotions += 1;
                    break;
                }
                mem.migrate(victim, TierKind::Capacity)?;
                self.record_move(victim, TierKind::Capacity);
                budget -= 1;
            }
            mem.page_mut(id).queued = None;
            mem.migrate(id, TierKind::Fast)?;
            self.record_move(id, TierKind::Fast);
            budget -= 1;
        }

        while budget > 0 {
            let Some(id) = self.demotion.pop_front() else { break };
            if !Self::still_queued(mem, id, QueueKind::Demotion) {
                continue;
            }
            if !policy.revalidate(mem, id, QueueKind::Demotion, t)? {
                mem.page_mut(id).queued = None;
                self.stats.revalidation_drops += 1;
                continue;
            }
            if !mem.tier(TierKind::Capacity).has_room() {
                self.demotion.push_front(id);
                break;
            }
            mem.page_mut(id).queued = None;
            mem.migrate(id, TierKind::Capacity)?;
            self.record_move(id, TierKind::Capacity);
            budget -= 1;
        }

        let after = self.stats;
        Ok(MigrationStats {
            promotions: after.promotions - before.promotions,
            demotions: after.demotions - before.demotions,
            revalidation_drops: after.revalidation_drops - before.revalidation_drops,
            blocked_promotions: after.blocked_promotions - before.blocked_promotions,
        })
    }
}
