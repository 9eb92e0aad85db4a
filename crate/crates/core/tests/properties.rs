use std::collections::HashMap;

use proptest::prelude::*;

use tierlab::allocator::{
    context_region, resolve, AllocationContext, GroupingStrategy, ObjectId, PageEvent, Placement, PlacementMap,
};
use tierlab::config::Ini;
use tierlab::page::PageId;
use tierlab::policies::PolicyKind;
use tierlab::sim::{simulate, SimConfig};
use tierlab::workload::{
    generate, read_trace_binary, read_trace_text, write_trace_binary, write_trace_text, WorkloadSpec,
};

const PAGE: u64 = 4096;

fn strategy() -> impl Strategy<Value = GroupingStrategy> {
    prop_oneof![
        Just(GroupingStrategy::TimeBased),
        Just(GroupingStrategy::SizeBased),
        (1usize..6, 1u32..8).prop_map(|(depth, regions)| GroupingStrategy::ContextBased { depth, regions }),
    ]
}

#[derive(Debug, Clone)]
enum Op {
    Alloc { size: u64, site: u64 },
    Free(usize),
}

fn ops() -> impl Strategy<Value = Vec<Op>> {
    let op = prop_oneof![
        3 => (prop_oneof![1u64..=512, 1u64..=3 * PAGE], 0u64..4).prop_map(|(size, site)| Op::Alloc { size, site }),
        1 => any::<usize>().prop_map(Op::Free),
    ];
    prop::collection::vec(op, 1..300)
}

fn context(site: u64) -> AllocationContext {
    AllocationContext::new(vec![site * 7 + 1, 99, 98, 97])
}

/// Byte extents `(page, start, end)` of a placement.
fn extents(p: &Placement) -> Vec<(PageId, u64, u64)> {
    if p.span <= 1 {
        vec![(p.page, p.offset, p.offset + p.size)]
    } else {
        (0..p.span)
            .map(|i| {
                let start = i as u64 * PAGE;
                let end = p.size.min(start + PAGE) - start;
                (PageId(p.page.0 + i), 0, end)
            })
            .collect()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn live_objects_never_overlap(s in strategy(), ops in ops()) {
        let mut map = PlacementMap::new(s, PAGE, 1 << 20);
        let mut live: Vec<ObjectId> = Vec::new();
        let mut next = 0u64;
        let mut events = Vec::new();
        for op in ops {
            match op {
                Op::Alloc { size, site } => {
                    let id = ObjectId(next);
                    next += 1;
                    map.alloc(id, size, &context(site), &mut events).unwrap();
                    live.push(id);
                }
                Op::Free(k) if !live.is_empty() => {
                    let id = live.swap_remove(k % live.len());
                    map.free(id, &mut events).unwrap();
                }
                Op::Free(_) => {}
            }
            let mut by_page: HashMap<PageId, Vec<(u64, u64)>> = HashMap::new();
            for &id in &live {
                let p = map.placement(id).unwrap();
                prop_assert!(p.offset + p.size <= PAGE * p.span.max(1) as u64);
                for (page, a, b) in extents(p) {
                    by_page.entry(page).or_default().push((a, b));
                }
            }
            for (page, mut spans) in by_page {
                spans.sort_unstable();
                for w in spans.windows(2) {
                    prop_assert!(w[0].1 <= w[1].0, "{page}: {:?} overlaps {:?}", w[0], w[1]);
                }
            }
        }
        prop_assert_eq!(map.live_objects(), live.len() as u64);
    }

    #[test]
    fn context_groups_use_the_fewest_pages(
        counts in prop::collection::vec(0u64..200, 1..5),
        sizes in prop::collection::vec(prop::sample::select(vec![16u64, 64, 100, 256, 1000]), 5),
    ) {
        let s = GroupingStrategy::ContextBased { depth: 4, regions: 64 };
        let mut map = PlacementMap::new(s, PAGE, 1 << 20);
        let classes = map.size_classes().clone();
        let mut events = Vec::new();
        let mut next = 0;
        let mut groups: HashMap<(u32, usize), Vec<ObjectId>> = HashMap::new();
        // interleave sites so that grouping, not allocation order, is tested
        let most = counts.iter().copied().max().unwrap_or(0);
        for i in 0..most {
            for (site, &n) in counts.iter().enumerate() {
                if i < n {
                    let size = sizes[site];
                    let id = ObjectId(next);
                    next += 1;
                    map.alloc(id, size, &context(site as u64), &mut events).unwrap();
                    let key = (context_region(&context(site as u64), 4, 64), classes.class_for(size).unwrap());
                    groups.entry(key).or_default().push(id);
                }
            }
        }
        for (&(region, class), ids) in &groups {
            let slot = classes.class_size(class);
            let per_page = PAGE / slot;
            let mut pages: Vec<PageId> = ids.iter().map(|&id| map.placement(id).unwrap().page).collect();
            pages.sort_unstable();
            pages.dedup();
            prop_assert_eq!(pages.len() as u64, (ids.len() as u64).div_ceil(per_page), "region {} class {}", region, class);
        }
    }

    #[test]
    fn page_events_balance(s in strategy(), ops in ops()) {
        let mut map = PlacementMap::new(s, PAGE, 1 << 20);
        let mut live = Vec::new();
        let mut events = Vec::new();
        let mut next = 0;
        for op in ops {
            match op {
                Op::Alloc { size, site } => {
                    map.alloc(ObjectId(next), size, &context(site), &mut events).unwrap();
                    live.push(ObjectId(next));
                    next += 1;
                }
                Op::Free(k) if !live.is_empty() => {
                    let id = live.swap_remove(k % live.len());
                    map.free(id, &mut events).unwrap();
                }
                Op::Free(_) => {}
            }
        }
        let opened = events.iter().filter(|e| matches!(e, PageEvent::Opened(_))).count() as u64;
        let released = events.iter().filter(|e| matches!(e, PageEvent::Released(_))).count() as u64;
        prop_assert_eq!(opened, map.pages_opened());
        prop_assert!(released <= opened);
        prop_assert!(map.occupied_pages() <= opened - released);
    }
}

fn workload() -> impl Strategy<Value = WorkloadSpec> {
    (1u64..4, 50u64..400, 2_000u64..20_000, any::<u64>()).prop_map(|(kind, n, total, seed)| {
        match kind {
            1 => WorkloadSpec::stable_zipf(n, total, 0.9),
            2 => WorkloadSpec::phase_change(n, total),
            _ => WorkloadSpec::checkered(n, total, 3, total / 6 + 1),
        }
        .with_seed(seed)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn simulation_conserves_accesses_and_occupancy(
        spec in workload(),
        k in prop::sample::select(PolicyKind::ALL.to_vec()),
        s in strategy(),
        fast_fraction in 0.0f64..1.2,
    ) {
        let trace = generate(&spec).unwrap();
        let r = resolve(&trace, s, 1 << 30).unwrap();
        let fast = (fast_fraction * r.pages_opened as f64) as u64;
        let mut cfg = SimConfig::new(k, s, fast, 0.005);
        cfg.invariant_check_ticks = 1;
        cfg.timeline_buckets = 13;
        let rep = simulate(&r, &cfg).unwrap();
        prop_assert_eq!(rep.total_accesses, spec.total_accesses);
        prop_assert_eq!(rep.timeline.iter().map(|b| b.accesses).sum::<u64>(), rep.total_accesses);
        prop_assert_eq!(rep.timeline.iter().map(|b| b.fast_hits).sum::<u64>(), rep.fast_hits);
        prop_assert_eq!(rep.timeline.iter().map(|b| b.promotions).sum::<u64>(), rep.promotions);
        prop_assert_eq!(rep.timeline.iter().map(|b| b.demotions).sum::<u64>(), rep.demotions);
        prop_assert!(rep.final_fast_resident <= fast);
        // these archetypes allocate everything before the first access
        prop_assert_eq!(
            rep.promotions as i64 - rep.demotions as i64,
            rep.final_fast_resident as i64 - rep.initial_fast_resident as i64
        );
        prop_assert_eq!(simulate(&r, &cfg).unwrap().to_json(), rep.to_json());
    }

    #[test]
    fn traces_round_trip(spec in workload()) {
        let trace = generate(&spec).unwrap();
        let mut text = Vec::new();
        write_trace_text(&trace, &mut text).unwrap();
        prop_assert_eq!(&read_trace_text(&text[..]).unwrap(), &trace);
        let mut bin = Vec::new();
        write_trace_binary(&trace, &mut bin).unwrap();
        prop_assert_eq!(&read_trace_binary(&mut &bin[..]).unwrap(), &trace);
    }

    #[test]
    fn config_parser_never_panics(text in "[\\[\\]a-z=#;. \n0-9_:-]{0,200}") {
        let _ = Ini::parse(&text);
        let _ = tierlab::config::RunConfig::parse(&text, std::path::Path::new("."));
    }
}
