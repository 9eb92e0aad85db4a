//! Pages, tiers, logical time and the page table that ties them to the
//! hotness histogram.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{HistogramError, SimError};
use crate::histogram::{bin_index, HotnessHistogram, NUM_BINS};
use crate::hotness::CounterState;

/// Observed samples since the start of the simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct LogicalTime(pub u64);

impl fmt::Display for LogicalTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct PageId(pub u32);

impl PageId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for PageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "page#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TierKind {
    Fast,
    Capacity,
}

impl TierKind {
    pub fn other(self) -> Self {
        match self {
            TierKind::Fast => TierKind::Capacity,
            TierKind::Capacity => TierKind::Fast,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tier {
    pub kind: TierKind,
    pub capacity_pages: u64,
    pub resident_pages: u64,
}

impl Tier {
    pub fn new(kind: TierKind, capacity_pages: u64) -> Self {
        Self {
            kind,
            capacity_pages,
            resident_pages: 0,
        }
    }

    pub fn has_room(&self) -> bool {
        self.resident_pages < self.capacity_pages
    }

    pub fn free_pages(&self) -> u64 {
        self.capacity_pages - self.resident_pages
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueueKind {
    Promotion,
    Demotion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Page {
    pub id: PageId,
    pub tier: TierKind,
    pub counter: CounterState,
    /// Effective counter value as of the last update.
    pub value: f64,
    pub bin: u8,
    pub queued: Option<QueueKind>,
    pub last_access: LogicalTime,
    pub live: bool,
}

/// The page table, both tiers and the system-wide histogram.
///
/// Every live page is counted exactly once in the histogram under its
/// current `bin`; fast-resident pages are additionally tracked per bin.
#[derive(Debug, Clone)]
pub struct TieredMemory {
    pages: Vec<Page>,
    fast: Tier,
    capacity: Tier,
    histogram: HotnessHistogram,
    fast_bins: [u64; NUM_BINS],
}

impl TieredMemory {
    pub fn new(fast_capacity: u64, capacity_capacity: u64) -> Self {
        Self {
            pages: Vec::new(),
            fast: Tier::new(TierKind::Fast, fast_capacity),
            capacity: Tier::new(TierKind::Capacity, capacity_capacity),
            histogram: HotnessHistogram::new(),
            fast_bins: [0; NUM_BINS],
        }
    }

    pub fn tier(&self, kind: TierKind) -> &Tier {
        match kind {
            TierKind::Fast => &self.fast,
            TierKind::Capacity => &self.capacity,
        }
    }

    fn tier_mut(&mut self, kind: TierKind) -> &mut Tier {
        match kind {
            TierKind::Fast => &mut self.fast,
            TierKind::Capacity => &mut self.capacity,
        }
    }

    pub fn histogram(&self) -> &HotnessHistogram {
        &self.histogram
    }

    pub fn histogram_mut(&mut self) -> &mut HotnessHistogram {
        &mut self.histogram
    }

    pub fn fast_bins(&self) -> &[u64; NUM_BINS] {
        &self.fast_bins
    }

    pub fn page(&self, id: PageId) -> &Page {
        &self.pages[id.index()]
    }

    pub fn page_mut(&mut self, id: PageId) -> &mut Page {
        &mut self.pages[id.index()]
    }

    pub fn get(&self, id: PageId) -> Option<&Page> {
        self.pages.get(id.index()).filter(|p| p.live)
    }

    /// All pages ever registered, live or released.
    pub fn pages(&self) -> &[Page] {
        &self.pages
    }

    pub fn live_pages(&self) -> impl Iterator<Item = &Page> {
        self.pages.iter().filter(|p| p.live)
    }

    pub fn live_count(&self) -> u64 {
        self.fast.resident_pages + self.capacity.resident_pages
    }

    /// Registers a fresh page; it goes to the fast tier while there is room.
    pub fn register(&mut self, id: PageId, counter: CounterState, now: LogicalTime) -> Result<TierKind, SimError> {
        let tier = if self.fast.has_room() {
            TierKind::Fast
        } else if self.capacity.has_room() {
            TierKind::Capacity
        } else {
            return Err(SimError::Invariant(format!("no room for {id}: both tiers are full")));
        };
        if id.index() != self.pages.len() {
            if id.index() < self.pages.len() {
                return Err(SimError::Invariant(format!("{id} registered twice")));
            }
            return Err(SimError::Invariant(format!(
                "page ids must be dense: got {id}, expected page#{}",
                self.pages.len()
            )));
        }
        self.pages.push(Page {
            id,
            tier,
            counter,
            value: 0.0,
            bin: 0,
            queued: None,
            last_access: now,
            live: true,
        });
        self.histogram.insert(0);
        if tier == TierKind::Fast {
            self.fast_bins[0] += 1;
        }
        self.tier_mut(tier).resident_pages += 1;
        Ok(tier)
    }

    /// Drops a page whose objects were all freed.
    pub fn release(&mut self, id: PageId) -> Result<(), SimError> {
        let page = self
            .pages
            .get_mut(id.index())
            .filter(|p| p.live)
            .ok_or_else(|| SimError::Invariant(format!("release of unknown {id}")))?;
        page.live = false;
        page.queued = None;
        let (bin, tier) = (page.bin, page.tier);
        self.histogram.remove(bin)?;
        if tier == TierKind::Fast {
            self.fast_bins[bin as usize] -= 1;
        }
        self.tier_mut(tier).resident_pages -= 1;
        Ok(())
    }

    /// Stores a new effective value, moving the page between bins if needed.
    pub fn set_value(&mut self, id: PageId, value: f64) -> Result<(), HistogramError> {
        let page = &mut self.pages[id.index()];
        page.value = value;
        let new_bin = bin_index(value);
        let old_bin = page.bin;
        if new_bin != old_bin {
            page.bin = new_bin;
            let tier = page.tier;
            self.histogram.move_page(old_bin, new_bin)?;
            if tier == TierKind::Fast {
                self.fast_bins[old_bin as usize] -= 1;
                self.fast_bins[new_bin as usize] += 1;
            }
        }
        Ok(())
    }

    /// Moves a page to the other tier. Fails if the destination is full.
    pub fn migrate(&mut self, id: PageId, to: TierKind) -> Result<(), SimError> {
        let page = &self.pages[id.index()];
        if !page.live || page.tier == to {
            return Err(SimError::Invariant(format!("bad migration of {id} to {to:?}")));
        }
        if !self.tier(to).has_room() {
            return Err(SimError::Invariant(format!("{to:?} tier full while migrating {id}")));
        }
        let bin = page.bin as usize;
        let from = page.tier;
        self.pages[id.index()].tier = to;
        self.tier_mut(from).resident_pages -= 1;
        self.tier_mut(to).resident_pages += 1;
        match to {
            TierKind::Fast => self.fast_bins[bin] += 1,
            TierKind::Capacity => self.fast_bins[bin] -= 1,
        }
        Ok(())
    }

    /// Recounts bins and residency from scratch and compares with the
    /// incrementally maintained state.
    pub fn check_invariants(&self) -> Result<(), SimError> {
        let mut all = [0u64; NUM_BINS];
        let mut fast = [0u64; NUM_BINS];
        let mut fast_pages = 0;
        let mut cap_pages = 0;
        for p in self.live_pages() {
            all[p.bin as usize] += 1;
            if p.bin != bin_index(p.value) {
                return Err(SimError::Invariant(format!(
                    "{} has bin {} but value {}",
                    p.id, p.bin, p.value
                )));
            }
            match p.tier {
                TierKind::Fast => {
                    fast[p.bin as usize] += 1;
                    fast_pages += 1;
                }
                TierKind::Capacity => cap_pages += 1,
            }
            match (p.queued, p.tier) {
                (Some(QueueKind::Promotion), TierKind::Fast) | (Some(QueueKind::Demotion), TierKind::Capacity) => {
                    return Err(SimError::Invariant(format!(
                        "{} queued {:?} while in {:?}",
                        p.id, p.queued, p.tier
                    )))
                }
                _ => {}
            }
        }
        if &all != self.histogram.bins() {
            return Err(SimError::Invariant(format!(
                "histogram {:?} disagrees with recount {:?}",
                self.histogram.bins(),
                all
            )));
        }
        if fast != self.fast_bins {
            return Err(SimError::Invariant("fast-tier bin counts disagree with recount".into()));
        }
        if fast_pages != self.fast.resident_pages || cap_pages != self.capacity.resident_pages {
            return Err(SimError::Invariant("tier residency disagrees with recount".into()));
        }
        for t in [&self.fast, &self.capacity] {
            if t.resident_pages > t.capacity_pages {
                return Err(SimError::Invariant(format!("{:?} tier over capacity", t.kind)));
            }
        }
        Ok(())
    }
}
