//! Synthetic traces, the sampling model and trace files.

mod gen;
mod sampling;
mod trace_io;
mod zipf;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

pub use self::gen::{generate, object_probabilities, Region};
pub use self::sampling::SamplingModel;
pub use self::trace_io::{
    read_trace, read_trace_binary, read_trace_text, write_trace, write_trace_binary, write_trace_text, TraceFormat,
};
pub use self::zipf::ZipfTable;
use crate::allocator::{AllocationContext, ObjectId};
use crate::error::WorkloadError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContextId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Alloc {
        id: ObjectId,
        size: u64,
        context: ContextId,
    },
    Free {
        id: ObjectId,
    },
    Access {
        id: ObjectId,
        offset: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEvent {
    pub seq: u64,
    pub kind: EventKind,
}

/// An immutable sequence of allocation, free and access events.
///
/// Allocation contexts are interned; events refer to them by [`ContextId`]
/// in order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    page_size: u64,
    contexts: Vec<AllocationContext>,
    events: Vec<TraceEvent>,
}

impl Trace {
    pub fn page_size(&self) -> u64 {
        self.page_size
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn contexts(&self) -> &[AllocationContext] {
        &self.contexts
    }

    pub fn context(&self, id: ContextId) -> &AllocationContext {
        &self.contexts[id.0 as usize]
    }

    pub fn access_count(&self) -> u64 {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Access { .. }))
            .count() as u64
    }

    /// The trace cut after the first `accesses` access events (allocations
    /// and frees up to that point are kept).
    pub fn truncated_to_accesses(&self, accesses: u64) -> Trace {
        let mut b = TraceBuilder::new(self.page_size);
        let mut seen = 0;
        for e in &self.events {
            if let EventKind::Access { .. } = e.kind {
                if seen == accesses {
                    break;
                }
                seen += 1;
            }
            b.push_kind(e.kind, self);
        }
        b.finish()
    }

    /// Replays the trace checking that every free and access names a live
    /// object. Returns the sequence number of the first offending event.
    pub fn validate(&self) -> Result<(), (u64, String)> {
        let mut live: HashMap<ObjectId, u64> = HashMap::new();
        let mut ever: HashSet<ObjectId> = HashSet::new();
        for e in &self.events {
            match e.kind {
                EventKind::Alloc { id, size, .. } => {
                    if size == 0 {
                        return Err((e.seq, format!("{id} allocated with size 0")));
                    }
                    if !ever.insert(id) {
                        return Err((e.seq, format!("{id} allocated twice")));
                    }
                    live.insert(id, size);
                }
                EventKind::Free { id } => {
                    if live.remove(&id).is_none() {
                        return Err((e.seq, format!("free of dead object {id}")));
                    }
                }
                EventKind::Access { id, offset } => match live.get(&id) {
                    None => return Err((e.seq, format!("access to dead object {id}"))),
                    Some(&size) if offset >= size => {
                        return Err((e.seq, format!("offset {offset} beyond {id} ({size} bytes)")))
                    }
                    Some(_) => {}
                },
            }
        }
        Ok(())
    }
}

/// Incremental trace construction with context interning.
#[derive(Debug)]
pub struct TraceBuilder {
    page_size: u64,
    contexts: Vec<AllocationContext>,
    lookup: HashMap<AllocationContext, ContextId>,
    events: Vec<TraceEvent>,
}

impl TraceBuilder {
    pub fn new(page_size: u64) -> Self {
        Self {
            page_size,
            contexts: Vec::new(),
            lookup: HashMap::new(),
            events: Vec::new(),
        }
    }

    pub fn with_capacity(page_size: u64, events: usize) -> Self {
        let mut b = Self::new(page_size);
        b.events.reserve(events);
        b
    }

    fn intern(&mut self, ctx: &AllocationContext) -> ContextId {
        if let Some(&id) = self.lookup.get(ctx) {
            return id;
        }
        let id = ContextId(self.contexts.len() as u32);
        self.contexts.push(ctx.clone());
        self.lookup.insert(ctx.clone(), id);
        id
    }

    fn push(&mut self, kind: EventKind) {
        let seq = self.events.len() as u64;
        self.events.push(TraceEvent { seq, kind });
    }

    pub fn alloc(&mut self, id: ObjectId, size: u64, ctx: &AllocationContext) {
        let context = self.intern(ctx);
        self.push(EventKind::Alloc { id, size, context });
    }

    pub fn free(&mut self, id: ObjectId) {
        self.push(EventKind::Free { id });
    }

    pub fn access(&mut self, id: ObjectId, offset: u64) {
        self.push(EventKind::Access { id, offset });
    }

    fn push_kind(&mut self, kind: EventKind, source: &Trace) {
        match kind {
            EventKind::Alloc { id, size, context } => self.alloc(id, size, source.context(context)),
            other => self.push(other),
        }
    }

    pub fn finish(self) -> Trace {
        Trace {
            page_size: self.page_size,
            contexts: self.contexts,
            events: self.events,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Archetype {
    StableZipf,
    PhaseChange,
    Checkered,
    SmallObjectSkew,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeDistribution {
    Fixed(u64),
    Uniform { min: u64, max: u64 },
}

impl SizeDistribution {
    pub fn max(&self) -> u64 {
        match *self {
            SizeDistribution::Fixed(s) => s,
            SizeDistribution::Uniform { max, .. } => max,
        }
    }

    pub fn min(&self) -> u64 {
        match *self {
            SizeDistribution::Fixed(s) => s,
            SizeDistribution::Uniform { min, .. } => min,
        }
    }
}

/// How accesses spread over objects (or over a context's objects).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Popularity {
    /// Zipf over object index: object 0 is the most popular.
    Zipf { skew: f64 },
    /// `share` of accesses go uniformly to a hot region holding `fraction`
    /// of the objects; the rest go uniformly to the other objects.
    Hotset { fraction: f64, share: f64 },
}

/// One allocation site of the small-object workload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSpec {
    /// Fraction of objects allocated from this site.
    pub object_share: f64,
    pub size: u64,
    /// Fraction of all accesses that go to this site's objects.
    pub access_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub archetype: Archetype,
    pub num_objects: u64,
    pub object_size: SizeDistribution,
    pub total_accesses: u64,
    pub popularity: Popularity,
    /// Phase change: fraction of the accesses issued before the hot set moves.
    pub switch_fraction: f64,
    /// Checkered: number of disjoint hot regions.
    pub regions: u32,
    /// Checkered: accesses per phase.
    pub phase_accesses: u64,
    /// Small-object workload: allocation sites.
    pub contexts: Vec<ContextSpec>,
    /// Small-object workload: wrapper frames shared by every site.
    pub shared_wrapper_frames: u32,
    /// Small-object workload: Zipf skew among a site's objects.
    pub intra_context_skew: f64,
    pub page_size: u64,
    pub arena_pages: u64,
    pub seed: u64,
}

pub const DEFAULT_PAGE_SIZE: u64 = 4096;

impl WorkloadSpec {
    fn base(archetype: Archetype, popularity: Popularity) -> Self {
        Self {
            archetype,
            num_objects: 1000,
            object_size: SizeDistribution::Fixed(DEFAULT_PAGE_SIZE),
            total_accesses: 100_000,
            popularity,
            switch_fraction: 0.5,
            regions: 2,
            phase_accesses: 50_000,
            contexts: Vec::new(),
            shared_wrapper_frames: 0,
            intra_context_skew: 0.0,
            page_size: DEFAULT_PAGE_SIZE,
            arena_pages: 1 << 24,
            seed: 0,
        }
    }

    pub fn stable_zipf(num_objects: u64, total_accesses: u64, skew: f64) -> Self {
        Self {
            num_objects,
            total_accesses,
            ..Self::base(Archetype::StableZipf, Popularity::Zipf { skew })
        }
    }

    /// Stable hot set (the degenerate single-region checkered workload).
    pub fn stable_hotset(num_objects: u64, total_accesses: u64, fraction: f64, share: f64) -> Self {
        Self {
            num_objects,
            total_accesses,
            ..Self::base(Archetype::StableZipf, Popularity::Hotset { fraction, share })
        }
    }

    /// 90% of accesses on 20% of the objects, hot set moving at the midpoint.
    pub fn phase_change(num_objects: u64, total_accesses: u64) -> Self {
        Self {
            num_objects,
            total_accesses,
            ..Self::base(
                Archetype::PhaseChange,
                Popularity::Hotset {
                    fraction: 0.2,
                    share: 0.9,
                },
            )
        }
    }

    pub fn checkered(num_objects: u64, total_accesses: u64, regions: u32, phase_accesses: u64) -> Self {
        Self {
            num_objects,
            total_accesses,
            regions,
            phase_accesses,
            ..Self::base(
                Archetype::Checkered,
                Popularity::Hotset {
                    fraction: 0.2,
                    share: 0.9,
                },
            )
        }
    }

    /// B-tree-like workload: many small objects from four interleaved
    /// sites. Hot and cold sites share size classes so that size-based
    /// grouping alone cannot separate them.
    pub fn small_object_skew(num_objects: u64, total_accesses: u64) -> Self {
        Self {
            num_objects,
            total_accesses,
            object_size: SizeDistribution::Fixed(64),
            contexts: vec![
                // inner nodes
                ContextSpec {
                    object_share: 0.10,
                    size: 64,
                    access_share: 0.60,
                },
                // leaves
                ContextSpec {
                    object_share: 0.45,
                    size: 64,
                    access_share: 0.10,
                },
                // values
                ContextSpec {
                    object_share: 0.35,
                    size: 256,
                    access_share: 0.10,
                },
                // key blocks
                ContextSpec {
                    object_share: 0.10,
                    size: 256,
                    access_share: 0.20,
                },
            ],
            ..Self::base(Archetype::SmallObjectSkew, Popularity::Zipf { skew: 0.0 })
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Objects in each hot region.
    pub fn hot_region_objects(&self) -> u64 {
        match self.popularity {
            Popularity::Hotset { fraction, .. } => {
                ((fraction * self.num_objects as f64).round() as u64).clamp(1, self.num_objects)
            }
            Popularity::Zipf { .. } => 0,
        }
    }

    /// Number of hot regions the schedule cycles through.
    pub fn region_count(&self) -> u32 {
        match self.archetype {
            Archetype::StableZipf | Archetype::SmallObjectSkew => 1,
            Archetype::PhaseChange => 2,
            Archetype::Checkered => self.regions,
        }
    }

    /// Pages needed if every object were live at once.
    pub fn pages_needed(&self) -> u64 {
        let per_object = |size: u64| {
            if size >= self.page_size {
                size.div_ceil(self.page_size) * self.page_size
            } else {
                size
            }
        };
        let bytes: u128 = if self.archetype == Archetype::SmallObjectSkew {
            let max_size = self.contexts.iter().map(|c| c.size).max().unwrap_or(0);
            per_object(max_size) as u128 * self.num_objects as u128
        } else {
            per_object(self.object_size.max()) as u128 * self.num_objects as u128
        };
        bytes.div_ceil(self.page_size as u128).min(u64::MAX as u128) as u64
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        let bad = |m: &str| Err(WorkloadError::Invalid(m.to_string()));
        if self.num_objects == 0 {
            return bad("num_objects must be positive");
        }
        if self.total_accesses == 0 {
            return bad("total_accesses must be positive");
        }
        if self.page_size < 64 || !self.page_size.is_power_of_two() {
            return bad("page_size must be a power of two of at least 64 bytes");
        }
        if self.object_size.min() == 0 || self.object_size.min() > self.object_size.max() {
            return bad("object sizes must be positive with min <= max");
        }
        match self.popularity {
            Popularity::Zipf { skew } if !(skew >= 0.0) => return bad("zipf skew must be >= 0"),
            Popularity::Hotset { fraction, share }
                if !(fraction > 0.0 && fraction <= 1.0 && (0.0..=1.0).contains(&share)) =>
            {
                return bad("hot set fraction must be in (0, 1] and share in [0, 1]")
            }
            _ => {}
        }
        match self.archetype {
            Archetype::StableZipf => {}
            Archetype::PhaseChange | Archetype::Checkered => {
                let Popularity::Hotset { .. } = self.popularity else {
                    return bad("phase-change and checkered workloads need a hot-set popularity");
                };
                let k = self.region_count() as u64;
                if k == 0 {
                    return bad("checkered workload needs at least one region");
                }
                if self.archetype == Archetype::PhaseChange
                    && !(self.switch_fraction > 0.0 && self.switch_fraction < 1.0)
                {
                    return bad("switch_fraction must be in (0, 1)");
                }
                if self.archetype == Archetype::Checkered && self.phase_accesses == 0 {
                    return bad("phase_accesses must be positive");
                }
                if k * self.hot_region_objects() > self.num_objects {
                    return bad("hot regions overlap: regions x hot fraction exceeds the object count");
                }
            }
            Archetype::SmallObjectSkew => {
                if self.contexts.len() < 2 {
                    return bad("small-object workload needs at least two allocation contexts");
                }
                if self
                    .contexts
                    .iter()
                    .any(|c| c.size == 0 || c.object_share < 0.0 || c.access_share < 0.0)
                {
                    return bad("context sizes must be positive and shares non-negative");
                }
                let objs: f64 = self.contexts.iter().map(|c| c.object_share).sum();
                let acc: f64 = self.contexts.iter().map(|c| c.access_share).sum();
                if objs <= 0.0 || acc <= 0.0 {
                    return bad("context shares must not all be zero");
                }
                if !(self.intra_context_skew >= 0.0) {
                    return bad("intra_context_skew must be >= 0");
                }
            }
        }
        let needed = self.pages_needed();
        if needed > self.arena_pages {
            return Err(WorkloadError::Infeasible {
                needed,
                arena: self.arena_pages,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_catches_dead_objects() {
        let mut b = TraceBuilder::new(4096);
        let c = AllocationContext::new(vec![1]);
        b.alloc(ObjectId(0), 64, &c);
        b.access(ObjectId(0), 8);
        b.free(ObjectId(0));
        b.access(ObjectId(0), 8);
        let t = b.finish();
        let err = t.validate().unwrap_err();
        assert_eq!(err.0, 3);
    }

    #[test]
    fn contexts_interned_in_first_use_order() {
        let mut b = TraceBuilder::new(4096);
        let a = AllocationContext::new(vec![1, 2]);
        let c = AllocationContext::new(vec![3]);
        b.alloc(ObjectId(0), 8, &c);
        b.alloc(ObjectId(1), 8, &a);
        b.alloc(ObjectId(2), 8, &c);
        let t = b.finish();
        assert_eq!(t.contexts(), &[c, a]);
    }

    #[test]
    fn spec_validation() {
        assert!(WorkloadSpec::phase_change(100, 1000).validate().is_ok());
        let mut s = WorkloadSpec::checkered(100, 1000, 6, 100);
        assert!(matches!(s.validate(), Err(WorkloadError::Invalid(_))));
        s.regions = 5;
        assert!(s.validate().is_ok());

        let mut big = WorkloadSpec::stable_zipf(1000, 10, 1.0);
        big.arena_pages = 999;
        assert_eq!(
            big.validate(),
            Err(WorkloadError::Infeasible {
                needed: 1000,
                arena: 999
            })
        );

        let mut one = WorkloadSpec::small_object_skew(100, 100);
        one.contexts.truncate(1);
        assert!(one.validate().is_err());
    }
}
