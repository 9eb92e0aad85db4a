use std::cmp::Reverse;

use super::{GroupingStrategy, ObjectId, PageEvent, PlacementMap};
use crate::error::SimError;
use crate::page::PageId;
use crate::workload::{EventKind, Trace};

/// One object with its total access count, as ranked for the popularity
/// layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankedObject {
    pub id: ObjectId,
    pub size: u64,
    pub accesses: u64,
}

/// Every allocated object by descending access count, ties by id.
pub fn oracle_ranking(trace: &Trace) -> Vec<RankedObject> {
    let mut objs: Vec<RankedObject> = Vec::new();
    let mut slot: Vec<Option<usize>> = Vec::new();
    for e in trace.events() {
        match e.kind {
            EventKind::Alloc { id, size, .. } => {
                let i = id.0 as usize;
                if i >= slot.len() {
                    slot.resize(i + 1, None);
                }
                slot[i] = Some(objs.len());
                objs.push(RankedObject { id, size, accesses: 0 });
            }
            EventKind::Access { id, .. } => {
                if let Some(Some(k)) = slot.get(id.0 as usize) {
                    objs[*k].accesses += 1;
                }
            }
            EventKind::Free { .. } => {}
        }
    }
    objs.sort_by_key(|o| (Reverse(o.accesses), o.id));
    objs
}

/// A trace replayed through an allocation strategy: what happens to pages,
/// in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Open(PageId),
    Release(PageId),
    /// An access to `page` by trace event `seq`.
    Access {
        page: PageId,
        seq: u64,
    },
}

#[derive(Debug, Clone)]
pub struct ResolvedTrace {
    pub strategy: GroupingStrategy,
    pub page_size: u64,
    pub steps: Vec<Step>,
    pub pages_opened: u64,
    pub access_count: u64,
    /// Accesses per page id.
    pub page_accesses: Vec<u64>,
    /// Most pages holding live objects at once.
    pub peak_occupied_pages: u64,
    /// Live bytes over occupied page bytes at the end of the trace.
    pub packing_efficiency: f64,
}

impl ResolvedTrace {
    /// Pages touched by each access, in order.
    pub fn access_pages(&self) -> impl Iterator<Item = PageId> + '_ {
        self.steps.iter().filter_map(|s| match *s {
            Step::Access { page, .. } => Some(page),
            _ => None,
        })
    }
}

/// Replays `trace` through a placement map for `strategy`. The popularity
/// layout ranks the trace first (two passes).
pub fn resolve(trace: &Trace, strategy: GroupingStrategy, max_pages: u64) -> Result<ResolvedTrace, SimError> {
    let page_size = trace.page_size();
    let mut pm = match strategy {
        GroupingStrategy::OraclePopularity => {
            let ranked: Vec<(ObjectId, u64)> = oracle_ranking(trace).iter().map(|o| (o.id, o.size)).collect();
            PlacementMap::oracle(page_size, max_pages, &ranked)
        }
        s => PlacementMap::new(s, page_size, max_pages),
    };
    let mut steps = Vec::with_capacity(trace.len());
    let mut events = Vec::new();
    let mut page_accesses: Vec<u64> = Vec::new();
    let mut access_count = 0;
    let mut occupied = 0u64;
    let mut peak = 0u64;
    let mut live_on_page: Vec<u32> = Vec::new();
    for e in trace.events() {
        let err = |source| SimError::Trace { seq: e.seq, source };
        match e.kind {
            EventKind::Alloc { id, size, context } => {
                let pl = pm.alloc(id, size, trace.context(context), &mut events).map_err(err)?;
                push_events(&mut steps, &mut events);
                for i in 0..pl.span {
                    let p = (pl.page.0 + i) as usize;
                    if p >= live_on_page.len() {
                        live_on_page.resize(p + 1, 0);
                    }
                    if live_on_page[p] == 0 {
                        occupied += 1;
                    }
                    live_on_page[p] += 1;
                }
                peak = peak.max(occupied);
            }
            EventKind::Free { id } => {
                let pl = pm.free(id, &mut events).map_err(err)?;
                for i in 0..pl.span {
                    let p = (pl.page.0 + i) as usize;
                    live_on_page[p] -= 1;
                    if live_on_page[p] == 0 {
                        occupied -= 1;
                    }
                }
                push_events(&mut steps, &mut events);
            }
            EventKind::Access { id, offset } => {
                let page = pm.resolve(id, offset).map_err(err)?;
                if page.index() >= page_accesses.len() {
                    page_accesses.resize(page.index() + 1, 0);
                }
                page_accesses[page.index()] += 1;
                access_count += 1;
                steps.push(Step::Access { page, seq: e.seq });
            }
        }
    }
    page_accesses.resize(pm.pages_opened() as usize, 0);
    Ok(ResolvedTrace {
        strategy,
        page_size,
        steps,
        pages_opened: pm.pages_opened(),
        access_count,
        page_accesses,
        peak_occupied_pages: peak,
        packing_efficiency: pm.packing_efficiency(),
    })
}

fn push_events(steps: &mut Vec<Step>, events: &mut Vec<PageEvent>) {
    steps.extend(events.drain(..).map(|ev| match ev {
        PageEvent::Opened(p) => Step::Open(p),
        PageEvent::Released(p) => Step::Release(p),
    }));
}

/// Fewest pages, hottest first, that together receive at least `fraction`
/// of all accesses.
pub fn pages_for_access_fraction(resolved: &ResolvedTrace, fraction: f64) -> u64 {
    assert!(fraction > 0.0 && fraction <= 1.0, "fraction must be in (0, 1]");
    let mut counts: Vec<u64> = resolved.page_accesses.iter().copied().filter(|&c| c > 0).collect();
    counts.sort_unstable_by(|a, b| b.cmp(a));
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0;
    }
    let mut acc = 0u64;
    for (i, c) in counts.iter().enumerate() {
        acc += c;
        // the tolerance keeps exact fractions such as 1/2 of an even total
        // from missing by a rounding step
        if acc == total || acc as f64 / total as f64 >= fraction - 1e-12 {
            return i as u64 + 1;
        }
    }
    counts.len() as u64
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;
    use crate::allocator::AllocationContext;
    use crate::workload::TraceBuilder;

    fn trace(accesses: &[(u64, u64)]) -> Trace {
        let mut b = TraceBuilder::new(4096);
        let ctx = AllocationContext::new(vec![1]);
        let n = accesses.iter().map(|a| a.0).max().unwrap_or(0) + 1;
        for i in 0..n {
            b.alloc(ObjectId(i), 4096, &ctx);
        }
        for &(id, k) in accesses {
            for _ in 0..k {
                b.access(ObjectId(id), 0);
            }
        }
        b.finish()
    }

    #[test]
    fn ranking_orders_by_count_then_id() {
        let t = trace(&[(0, 10), (1, 100), (2, 10), (3, 10)]);
        let r: Vec<u64> = oracle_ranking(&t).iter().map(|o| o.id.0).collect();
        assert_eq!(r, [1, 0, 2, 3]);
        let flat = trace(&[(2, 5), (0, 5), (1, 5)]);
        let r: Vec<u64> = oracle_ranking(&flat).iter().map(|o| o.id.0).collect();
        assert_eq!(r, [0, 1, 2]);
    }

    #[test]
    fn fraction_examples() {
        let one = resolve(&trace(&[(0, 50)]), GroupingStrategy::TimeBased, 100).unwrap();
        assert_eq!(pages_for_access_fraction(&one, 0.5), 1);
        for n in [4u64, 5, 9] {
            let acc: Vec<_> = (0..n).map(|i| (i, 7)).collect();
            let r = resolve(&trace(&acc), GroupingStrategy::TimeBased, 100).unwrap();
            assert_eq!(pages_for_access_fraction(&r, 0.5), n.div_ceil(2));
            assert_eq!(pages_for_access_fraction(&r, 1.0), n);
        }
    }

    #[test]
    fn ranking_matches_brute_force() {
        let spec = crate::workload::WorkloadSpec::stable_zipf(300, 20_000, 0.8).with_seed(3);
        let t = crate::workload::generate(&spec).unwrap();
        let mut counts: HashMap<u64, u64> = HashMap::new();
        for e in t.events() {
            if let EventKind::Access { id, .. } = e.kind {
                *counts.entry(id.0).or_default() += 1;
            }
        }
        let mut brute: Vec<(u64, u64)> = (0..300).map(|i| (i, counts.get(&i).copied().unwrap_or(0))).collect();
        brute.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let ours: Vec<(u64, u64)> = oracle_ranking(&t).iter().map(|o| (o.id.0, o.accesses)).collect();
        assert_eq!(ours, brute);
    }

    #[test]
    fn resolution_reports_dead_objects() {
        let mut b = TraceBuilder::new(4096);
        b.alloc(ObjectId(0), 64, &AllocationContext::new(vec![1]));
        b.free(ObjectId(0));
        b.access(ObjectId(0), 0);
        let err = resolve(&b.finish(), GroupingStrategy::SizeBased, 10).unwrap_err();
        assert!(matches!(err, SimError::Trace { seq: 2, .. }));
    }
}
