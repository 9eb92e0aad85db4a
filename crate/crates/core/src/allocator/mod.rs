//! Object-to-page placement.
//!
//! Four grouping strategies decide which objects share a page:
//!
//! * [`GroupingStrategy::TimeBased`]: bump pointer in allocation order.
//! * [`GroupingStrategy::SizeBased`]: one segregated free list per size class.
//! * [`GroupingStrategy::ContextBased`]: one free list per
//!   (allocation region, size class), the region picked by hashing the
//!   allocation backtrace.
//! * [`GroupingStrategy::OraclePopularity`]: objects packed in descending
//!   order of their total access count (needs the whole trace up front).
//!
//! Objects never straddle pages; anything larger than the largest size class
//! gets its own run of contiguous pages.

mod context;
mod resolve;
mod size_class;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use self::context::{context_region, stack_hash, AllocationContext};
pub use self::resolve::{oracle_ranking, pages_for_access_fraction, resolve, RankedObject, ResolvedTrace, Step};
pub use self::size_class::SizeClassTable;
use crate::error::AllocError;
use crate::page::PageId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct ObjectId(pub u64);

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "obj#{}", self.0)
    }
}

pub const DEFAULT_DEPTH: usize = 10;
pub const DEFAULT_REGIONS: u32 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GroupingStrategy {
    TimeBased,
    SizeBased,
    ContextBased { depth: usize, regions: u32 },
    OraclePopularity,
}

impl GroupingStrategy {
    pub fn context_default() -> Self {
        GroupingStrategy::ContextBased {
            depth: DEFAULT_DEPTH,
            regions: DEFAULT_REGIONS,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GroupingStrategy::TimeBased => "time",
            GroupingStrategy::SizeBased => "size",
            GroupingStrategy::ContextBased { .. } => "context",
            GroupingStrategy::OraclePopularity => "oracle",
        }
    }
}

/// Where an object lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub page: PageId,
    pub offset: u64,
    pub size: u64,
    /// Pages spanned; above 1 only for dedicated large-object runs, which
    /// occupy `page .. page + span` contiguously.
    pub span: u32,
}

/// Page lifecycle notifications for the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PageEvent {
    Opened(PageId),
    Released(PageId),
}

type PoolKey = (u32, u16);

#[derive(Debug, Default, Clone)]
struct Pool {
    /// LIFO stack of free (page, offset) slots.
    free: Vec<(PageId, u64)>,
    /// One empty page is kept per pool so immediate reuse hits the same slot.
    empty_cached: Option<PageId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PageOwner {
    Bump,
    Pool(PoolKey),
    Dedicated,
    Oracle,
    Released,
}

#[derive(Debug, Clone)]
struct PageMeta {
    owner: PageOwner,
    live_objects: u32,
    live_bytes: u64,
}

#[derive(Debug, Clone)]
struct OracleLayout {
    /// object -> (virtual page, offset, span)
    slots: HashMap<ObjectId, (u64, u64, u32)>,
    /// virtual page -> real page, assigned on first use
    vpages: HashMap<u64, PageId>,
}

#[derive(Debug, Clone)]
pub struct PlacementMap {
    strategy: GroupingStrategy,
    page_size: u64,
    max_pages: u64,
    classes: SizeClassTable,
    objects: Vec<Option<Placement>>,
    pages: Vec<PageMeta>,
    pools: HashMap<PoolKey, Pool>,
    bump: Option<(PageId, u64)>,
    oracle: Option<OracleLayout>,
    live_objects: u64,
}

impl PlacementMap {
    /// Placement map for the time, size or context strategies.
    /// `max_pages` bounds the simulated arena.
    pub fn new(strategy: GroupingStrategy, page_size: u64, max_pages: u64) -> Self {
        assert!(page_size >= 8, "page size too small");
        if let GroupingStrategy::ContextBased { depth, regions } = strategy {
            assert!(
                depth >= 1 && regions >= 1,
                "context grouping needs depth >= 1 and regions >= 1"
            );
        }
        Self {
            strategy,
            page_size,
            max_pages,
            classes: SizeClassTable::geometric(page_size),
            objects: Vec::new(),
            pages: Vec::new(),
            pools: HashMap::new(),
            bump: None,
            oracle: None,
            live_objects: 0,
        }
    }

    /// Popularity layout: `ranked` lists every object with its size, most
    /// popular first, and objects are packed into consecutive pages in that
    /// order.
    pub fn oracle(page_size: u64, max_pages: u64, ranked: &[(ObjectId, u64)]) -> Self {
        let mut map = Self::new(GroupingStrategy::OraclePopularity, page_size, max_pages);
        let mut slots = HashMap::with_capacity(ranked.len());
        let mut vpage = 0u64;
        let mut offset = 0u64;
        for &(id, size) in ranked {
            let size = size.max(1);
            if size > page_size {
                if offset > 0 {
                    vpage += 1;
                    offset = 0;
                }
                let span = size.div_ceil(page_size);
                slots.insert(id, (vpage, 0, span as u32));
                vpage += span;
                continue;
            }
            let aligned = align8(size);
            if offset + aligned > page_size {
                vpage += 1;
                offset = 0;
            }
            slots.insert(id, (vpage, offset, 1));
            offset += aligned;
        }
        map.oracle = Some(OracleLayout {
            slots,
            vpages: HashMap::new(),
        });
        map
    }

    pub fn strategy(&self) -> GroupingStrategy {
        self.strategy
    }

    pub fn page_size(&self) -> u64 {
        self.page_size
    }

    pub fn size_classes(&self) -> &SizeClassTable {
        &self.classes
    }

    /// Pages ever opened (page ids are dense in `0..pages_opened()`).
    pub fn pages_opened(&self) -> u64 {
        self.pages.len() as u64
    }

    /// Pages currently holding at least one live object.
    pub fn occupied_pages(&self) -> u64 {
        self.pages.iter().filter(|p| p.live_objects > 0).count() as u64
    }

    pub fn live_objects(&self) -> u64 {
        self.live_objects
    }

    /// Live bytes over the bytes of occupied pages (1.0 = no waste).
    pub fn packing_efficiency(&self) -> f64 {
        let occupied = self.occupied_pages();
        if occupied == 0 {
            return 1.0;
        }
        let live: u64 = self.pages.iter().map(|p| p.live_bytes).sum();
        live as f64 / (occupied * self.page_size) as f64
    }

    pub fn placement(&self, id: ObjectId) -> Option<&Placement> {
        self.objects.get(id.0 as usize).and_then(Option::as_ref)
    }

    /// Iterates over live objects and their placements.
    pub fn live(&self) -> impl Iterator<Item = (ObjectId, &Placement)> {
        self.objects
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.as_ref().map(|p| (ObjectId(i as u64), p)))
    }

    /// Page holding byte `offset` of object `id`.
    pub fn resolve(&self, id: ObjectId, offset: u64) -> Result<PageId, AllocError> {
        let p = self.placement(id).ok_or(AllocError::NotLive(id))?;
        if offset >= p.size {
            return Err(AllocError::OffsetOutOfRange {
                id,
                offset,
                size: p.size,
            });
        }
        if p.span <= 1 {
            Ok(p.page)
        } else {
            Ok(PageId(p.page.0 + (offset / self.page_size) as u32))
        }
    }

    fn open_page(&mut self, owner: PageOwner, events: &mut Vec<PageEvent>) -> Result<PageId, AllocError> {
        if self.pages.len() as u64 >= self.max_pages || self.pages.len() >= u32::MAX as usize {
            return Err(AllocError::ArenaExhausted { limit: self.max_pages });
        }
        let id = PageId(self.pages.len() as u32);
        self.pages.push(PageMeta {
            owner,
            live_objects: 0,
            live_bytes: 0,
        });
        events.push(PageEvent::Opened(id));
        Ok(id)
    }

    fn release_page(&mut self, page: PageId, events: &mut Vec<PageEvent>) {
        self.pages[page.index()].owner = PageOwner::Released;
        events.push(PageEvent::Released(page));
    }

    fn pool_key(&self, size: u64, ctx: &AllocationContext) -> Option<PoolKey> {
        let class = self.classes.class_for(size)? as u16;
        let region = match self.strategy {
            GroupingStrategy::ContextBased { depth, regions } if !ctx.is_empty() => context_region(ctx, depth, regions),
            _ => 0,
        };
        Some((region, class))
    }

    /// Places a new object.
    pub fn alloc(
        &mut self,
        id: ObjectId,
        size: u64,
        ctx: &AllocationContext,
        events: &mut Vec<PageEvent>,
    ) -> Result<Placement, AllocError> {
        if size == 0 {
            return Err(AllocError::ZeroSize(id));
        }
        if self.placement(id).is_some() {
            return Err(AllocError::AlreadyLive(id));
        }
        let placement = match self.strategy {
            GroupingStrategy::OraclePopularity => self.alloc_oracle(id, size, events)?,
            _ if size > self.classes.max() => self.alloc_dedicated(size, events)?,
            GroupingStrategy::TimeBased => self.alloc_bump(size, events)?,
            GroupingStrategy::SizeBased | GroupingStrategy::ContextBased { .. } => {
                let key = self.pool_key(size, ctx).expect("size within class table");
                self.alloc_pooled(key, size, events)?
            }
        };
        let idx = id.0 as usize;
        if idx >= self.objects.len() {
            self.objects.resize(idx + 1, None);
        }
        self.objects[idx] = Some(placement);
        for i in 0..placement.span {
            let meta = &mut self.pages[placement.page.index() + i as usize];
            meta.live_objects += 1;
        }
        self.pages[placement.page.index()].live_bytes += size;
        self.live_objects += 1;
        Ok(placement)
    }

    fn alloc_dedicated(&mut self, size: u64, events: &mut Vec<PageEvent>) -> Result<Placement, AllocError> {
        let span = size.div_ceil(self.page_size);
        if self.pages.len() as u64 + span > self.max_pages {
            return Err(AllocError::ArenaExhausted { limit: self.max_pages });
        }
        let first = self.open_page(PageOwner::Dedicated, events)?;
        for _ in 1..span {
            self.open_page(PageOwner::Dedicated, events)?;
        }
        Ok(Placement {
            page: first,
            offset: 0,
            size,
            span: span as u32,
        })
    }

    fn alloc_bump(&mut self, size: u64, events: &mut Vec<PageEvent>) -> Result<Placement, AllocError> {
        let aligned = align8(size);
        let (page, offset) = match self.bump {
            Some((page, used)) if used + aligned <= self.page_size => (page, used),
            prev => {
                // the old cursor page may already be empty
                if let Some((old, _)) = prev {
                    if self.pages[old.index()].live_objects == 0 {
                        self.release_page(old, events);
                    }
                }
                (self.open_page(PageOwner::Bump, events)?, 0)
            }
        };
        self.bump = Some((page, offset + aligned));
        Ok(Placement {
            page,
            offset,
            size,
            span: 1,
        })
    }

    fn alloc_pooled(&mut self, key: PoolKey, size: u64, events: &mut Vec<PageEvent>) -> Result<Placement, AllocError> {
        let needs_page = self.pools.get(&key).is_none_or(|p| p.free.is_empty());
        if needs_page {
            let class_size = self.classes.class_size(key.1 as usize);
            let page = self.open_page(PageOwner::Pool(key), events)?;
            let per_page = self.page_size / class_size;
            let pool = self.pools.entry(key).or_default();
            // reversed so the lowest offset is handed out first
            pool.free.extend((0..per_page).rev().map(|i| (page, i * class_size)));
        }
        let pool = self.pools.get_mut(&key).expect("pool exists");
        let (page, offset) = pool.free.pop().expect("pool has a free slot");
        if pool.empty_cached == Some(page) {
            pool.empty_cached = None;
        }
        Ok(Placement {
            page,
            offset,
            size,
            span: 1,
        })
    }

    fn alloc_oracle(&mut self, id: ObjectId, size: u64, events: &mut Vec<PageEvent>) -> Result<Placement, AllocError> {
        let (vpage, offset, span) = *self
            .oracle
            .as_ref()
            .and_then(|o| o.slots.get(&id))
            .ok_or(AllocError::NotRanked(id))?;
        let mut first = None;
        for v in vpage..vpage + span as u64 {
            let existing = self.oracle.as_ref().and_then(|o| o.vpages.get(&v)).copied();
            let page = match existing {
                Some(p) => p,
                None => {
                    let p = self.open_page(PageOwner::Oracle, events)?;
                    self.oracle.as_mut().expect("oracle layout").vpages.insert(v, p);
                    p
                }
            };
            first.get_or_insert(page);
        }
        Ok(Placement {
            page: first.expect("span >= 1"),
            offset,
            size,
            span,
        })
    }

    /// Frees an object, returning its slot to the owning free list.
    pub fn free(&mut self, id: ObjectId, events: &mut Vec<PageEvent>) -> Result<Placement, AllocError> {
        let placement = self
            .objects
            .get_mut(id.0 as usize)
            .and_then(Option::take)
            .ok_or(AllocError::NotLive(id))?;
        self.live_objects -= 1;
        self.pages[placement.page.index()].live_bytes -= placement.size;
        for i in 0..placement.span {
            self.pages[placement.page.index() + i as usize].live_objects -= 1;
        }
        let page = placement.page;
        let owner = self.pages[page.index()].owner;
        let now_empty = self.pages[page.index()].live_objects == 0;
        match owner {
            PageOwner::Dedicated => {
                for i in 0..placement.span {
                    self.release_page(PageId(page.0 + i), events);
                }
            }
            PageOwner::Bump => {
                if now_empty && self.bump.map(|(p, _)| p) != Some(page) {
                    self.release_page(page, events);
                }
            }
            PageOwner::Pool(key) => {
                let pool = self.pools.get_mut(&key).expect("owning pool");
                pool.free.push((page, placement.offset));
                if now_empty {
                    match pool.empty_cached {
                        None => pool.empty_cached = Some(page),
                        Some(_) => {
                            pool.free.retain(|&(p, _)| p != page);
                            self.release_page(page, events);
                        }
                    }
                }
            }
            // the popularity layout never reuses slots
            PageOwner::Oracle => {
                if now_empty {
                    self.release_page(page, events);
                }
            }
            PageOwner::Released => unreachable!("object on a released page"),
        }
        Ok(placement)
    }
}

fn align8(size: u64) -> u64 {
    size.div_ceil(8) * 8
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(frames: &[u64]) -> AllocationContext {
        AllocationContext::new(frames.to_vec())
    }

    fn map(strategy: GroupingStrategy) -> PlacementMap {
        PlacementMap::new(strategy, 4096, 1 << 20)
    }

    #[test]
    fn context_same_site_shares_page() {
        let mut m = map(GroupingStrategy::context_default());
        let mut ev = Vec::new();
        let a = m.alloc(ObjectId(0), 64, &ctx(&[1, 2, 3]), &mut ev).unwrap();
        let b = m.alloc(ObjectId(1), 64, &ctx(&[1, 2, 3]), &mut ev).unwrap();
        assert_eq!(a.page, b.page);
        assert_ne!(a.offset, b.offset);
    }

    #[test]
    fn size_classes_split_pages() {
        let mut m = map(GroupingStrategy::SizeBased);
        let mut ev = Vec::new();
        let a = m.alloc(ObjectId(0), 64, &ctx(&[1]), &mut ev).unwrap();
        let b = m.alloc(ObjectId(1), 4000, &ctx(&[1]), &mut ev).unwrap();
        assert_ne!(a.page, b.page);
    }

    #[test]
    fn time_based_interleaves_popularity_classes() {
        let mut m = map(GroupingStrategy::TimeBased);
        let mut ev = Vec::new();
        let mut hot_pages = std::collections::HashSet::new();
        let mut cold_pages = std::collections::HashSet::new();
        for i in 0..256u64 {
            let (frames, set) = if i % 2 == 0 {
                (&[10u64][..], &mut hot_pages)
            } else {
                (&[20u64][..], &mut cold_pages)
            };
            let p = m.alloc(ObjectId(i), 64, &ctx(frames), &mut ev).unwrap();
            set.insert(p.page);
        }
        // every page holds both hot and cold objects
        assert_eq!(hot_pages, cold_pages);
        assert_eq!(hot_pages.len(), 4);
    }

    #[test]
    fn lifo_reuse_of_freed_slot() {
        let mut m = map(GroupingStrategy::context_default());
        let mut ev = Vec::new();
        let c = ctx(&[5, 6]);
        let first = m.alloc(ObjectId(0), 48, &c, &mut ev).unwrap();
        m.free(ObjectId(0), &mut ev).unwrap();
        let again = m.alloc(ObjectId(1), 48, &c, &mut ev).unwrap();
        assert_eq!((first.page, first.offset), (again.page, again.offset));
        assert!(!ev.iter().any(|e| matches!(e, PageEvent::Released(_))));
    }

    #[test]
    fn unknown_free_leaves_state_alone() {
        let mut m = map(GroupingStrategy::SizeBased);
        let mut ev = Vec::new();
        m.alloc(ObjectId(0), 32, &ctx(&[1]), &mut ev).unwrap();
        assert_eq!(m.free(ObjectId(9), &mut ev), Err(AllocError::NotLive(ObjectId(9))));
        m.free(ObjectId(0), &mut ev).unwrap();
        assert_eq!(m.free(ObjectId(0), &mut ev), Err(AllocError::NotLive(ObjectId(0))));
        assert_eq!(m.live_objects(), 0);
    }

    #[test]
    fn emptied_page_leaves_occupancy() {
        let mut m = map(GroupingStrategy::SizeBased);
        let mut ev = Vec::new();
        let per_page = 4096 / 64;
        for i in 0..per_page {
            m.alloc(ObjectId(i), 64, &ctx(&[1]), &mut ev).unwrap();
        }
        assert_eq!(m.occupied_pages(), 1);
        assert_eq!(m.packing_efficiency(), 1.0);
        for i in 0..per_page {
            m.free(ObjectId(i), &mut ev).unwrap();
        }
        assert_eq!(m.occupied_pages(), 0);
    }

    #[test]
    fn second_empty_page_is_released() {
        let mut m = map(GroupingStrategy::SizeBased);
        let mut ev = Vec::new();
        let per_page = 4096 / 64;
        for i in 0..2 * per_page {
            m.alloc(ObjectId(i), 64, &ctx(&[1]), &mut ev).unwrap();
        }
        for i in 0..2 * per_page {
            m.free(ObjectId(i), &mut ev).unwrap();
        }
        let released: Vec<_> = ev
            .iter()
            .filter_map(|e| match e {
                PageEvent::Released(p) => Some(*p),
                _ => None,
            })
            .collect();
        assert_eq!(released.len(), 1);
    }

    #[test]
    fn large_objects_get_contiguous_pages() {
        let mut m = map(GroupingStrategy::TimeBased);
        let mut ev = Vec::new();
        m.alloc(ObjectId(0), 16, &ctx(&[1]), &mut ev).unwrap();
        let big = m.alloc(ObjectId(1), 3 * 4096 + 5, &ctx(&[1]), &mut ev).unwrap();
        assert_eq!(big.span, 4);
        assert_eq!(m.resolve(ObjectId(1), 0).unwrap(), big.page);
        assert_eq!(m.resolve(ObjectId(1), 2 * 4096 + 1).unwrap(), PageId(big.page.0 + 2));
        assert!(m.resolve(ObjectId(1), 3 * 4096 + 5).is_err());
        m.free(ObjectId(1), &mut ev).unwrap();
        assert_eq!(ev.iter().filter(|e| matches!(e, PageEvent::Released(_))).count(), 4);
    }

    #[test]
    fn errors() {
        let mut m = PlacementMap::new(GroupingStrategy::SizeBased, 4096, 1);
        let mut ev = Vec::new();
        assert_eq!(
            m.alloc(ObjectId(0), 0, &ctx(&[1]), &mut ev),
            Err(AllocError::ZeroSize(ObjectId(0)))
        );
        m.alloc(ObjectId(0), 4096, &ctx(&[1]), &mut ev).unwrap();
        assert_eq!(
            m.alloc(ObjectId(0), 8, &ctx(&[1]), &mut ev),
            Err(AllocError::AlreadyLive(ObjectId(0)))
        );
        assert_eq!(
            m.alloc(ObjectId(1), 4096, &ctx(&[1]), &mut ev),
            Err(AllocError::ArenaExhausted { limit: 1 })
        );
    }

    #[test]
    fn oracle_packs_by_rank() {
        let ranked: Vec<_> = [3u64, 1, 2, 0].iter().map(|&i| (ObjectId(i), 2048)).collect();
        let mut m = PlacementMap::oracle(4096, 100, &ranked);
        let mut ev = Vec::new();
        // allocation order differs from rank order
        let mut at = HashMap::new();
        for i in 0..4 {
            at.insert(i, m.alloc(ObjectId(i), 2048, &ctx(&[1]), &mut ev).unwrap());
        }
        assert_eq!(at[&3].page, at[&1].page);
        assert_eq!(at[&2].page, at[&0].page);
        assert_ne!(at[&3].page, at[&2].page);
        assert_eq!(
            m.alloc(ObjectId(99), 8, &ctx(&[1]), &mut ev),
            Err(AllocError::NotRanked(ObjectId(99)))
        );
    }
}
