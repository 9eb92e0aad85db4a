use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Archetype, Popularity, SizeDistribution, Trace, TraceBuilder, WorkloadSpec, ZipfTable};
use crate::allocator::{AllocationContext, ObjectId};
use crate::error::WorkloadError;
use crate::seed;

/// A contiguous run of object ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub start: u64,
    pub len: u64,
}

impl Region {
    pub fn contains(&self, id: u64) -> bool {
        id >= self.start && id < self.start + self.len
    }

    pub fn end(&self) -> u64 {
        self.start + self.len
    }
}

impl WorkloadSpec {
    /// Hot region `k`: regions are carved from the end of the object range,
    /// region 0 being the last `h` objects, so the first hot set is
    /// allocated last and does not start out in the fast tier.
    pub fn hot_region(&self, k: u32) -> Region {
        let h = self.hot_region_objects();
        Region {
            start: self.num_objects - (k as u64 + 1) * h,
            len: h,
        }
    }

    /// Index of the hot region active for the `a`-th access.
    pub fn active_region(&self, a: u64) -> u32 {
        match self.archetype {
            Archetype::StableZipf | Archetype::SmallObjectSkew => 0,
            Archetype::PhaseChange => u32::from(a >= self.switch_access()),
            Archetype::Checkered => ((a / self.phase_accesses) % self.regions as u64) as u32,
        }
    }

    /// Access index at which a phase-change workload switches hot sets.
    pub fn switch_access(&self) -> u64 {
        (self.switch_fraction * self.total_accesses as f64).floor() as u64
    }

    /// Object count per allocation site of the small-object workload.
    pub fn context_object_counts(&self) -> Vec<u64> {
        let total: f64 = self.contexts.iter().map(|c| c.object_share).sum();
        let mut counts: Vec<u64> = self
            .contexts
            .iter()
            .map(|c| (c.object_share / total * self.num_objects as f64).floor() as u64)
            .collect();
        let assigned: u64 = counts.iter().sum();
        // leftovers go to the largest share
        let largest = (0..counts.len())
            .max_by(|&a, &b| {
                self.contexts[a]
                    .object_share
                    .total_cmp(&self.contexts[b].object_share)
                    .then(b.cmp(&a))
            })
            .unwrap_or(0);
        if let Some(c) = counts.get_mut(largest) {
            *c += self.num_objects - assigned;
        }
        counts
    }

    /// Synthetic backtrace of allocation site `c`: the shared wrapper frames
    /// (innermost), then the site frame, then two frames common to every
    /// site.
    pub fn context_frames(&self, c: usize) -> AllocationContext {
        let mut frames: Vec<u64> = (0..self.shared_wrapper_frames as u64)
            .map(|i| 0x40_1000 + 0x40 * i)
            .collect();
        frames.push(0x52_0000 + 0x1_3579 * (c as u64 + 1));
        frames.extend([0x60_0100, 0x60_0200]);
        AllocationContext::new(frames)
    }
}

/// Generates the trace described by `spec`. The result is a pure function
/// of the spec (its `seed` included).
pub fn generate(spec: &WorkloadSpec) -> Result<Trace, WorkloadError> {
    spec.validate()?;
    let mut rng = seed::rng(spec.seed);
    let events = spec.num_objects + spec.total_accesses;
    let mut b = TraceBuilder::with_capacity(spec.page_size, events.min(1 << 28) as usize);
    match spec.archetype {
        Archetype::SmallObjectSkew => gen_small_object_skew(spec, &mut rng, &mut b),
        _ => gen_regions(spec, &mut rng, &mut b),
    }
    Ok(b.finish())
}

fn object_size(dist: SizeDistribution, rng: &mut ChaCha8Rng) -> u64 {
    match dist {
        SizeDistribution::Fixed(s) => s,
        SizeDistribution::Uniform { min, max } => rng.random_range(min..=max),
    }
}

fn access_offset(size: u64, rng: &mut ChaCha8Rng) -> u64 {
    rng.random_range(0..size)
}

/// Stable, phase-change and checkered workloads: allocate every object up
/// front, then draw accesses from the popularity model of the active region.
fn gen_regions(spec: &WorkloadSpec, rng: &mut ChaCha8Rng, b: &mut TraceBuilder) {
    let ctx = AllocationContext::new(vec![0x40_1000, 0x50_0000]);
    let sizes: Vec<u64> = (0..spec.num_objects)
        .map(|i| {
            let s = object_size(spec.object_size, rng);
            b.alloc(ObjectId(i), s, &ctx);
            s
        })
        .collect();
    let n = spec.num_objects;
    match spec.popularity {
        Popularity::Zipf { skew } => {
            let table = ZipfTable::new(n as usize, skew);
            for _ in 0..spec.total_accesses {
                let id = table.sample(rng.random()) as u64;
                b.access(ObjectId(id), access_offset(sizes[id as usize], rng));
            }
        }
        Popularity::Hotset { share, .. } => {
            for a in 0..spec.total_accesses {
                let region = spec.hot_region(spec.active_region(a));
                let id = if region.len == n || rng.random::<f64>() < share {
                    region.start + rng.random_range(0..region.len)
                } else {
                    // uniform over the objects outside the hot region
                    let k = rng.random_range(0..n - region.len);
                    if k < region.start {
                        k
                    } else {
                        k + region.len
                    }
                };
                b.access(ObjectId(id), access_offset(sizes[id as usize], rng));
            }
        }
    }
}

fn gen_small_object_skew(spec: &WorkloadSpec, rng: &mut ChaCha8Rng, b: &mut TraceBuilder) {
    let counts = spec.context_object_counts();
    let mut labels: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(c, &k)| std::iter::repeat_n(c, k as usize))
        .collect();
    labels.shuffle(rng);

    let frames: Vec<AllocationContext> = (0..spec.contexts.len()).map(|c| spec.context_frames(c)).collect();
    let mut members: Vec<Vec<u64>> = vec![Vec::new(); spec.contexts.len()];
    for (i, &c) in labels.iter().enumerate() {
        b.alloc(ObjectId(i as u64), spec.contexts[c].size, &frames[c]);
        members[c].push(i as u64);
    }

    let weights: Vec<f64> = spec
        .contexts
        .iter()
        .zip(&members)
        .map(|(c, m)| if m.is_empty() { 0.0 } else { c.access_share })
        .collect();
    let site_cdf = cumulative(&weights);
    let tables: Vec<Option<ZipfTable>> = members
        .iter()
        .map(|m| (!m.is_empty()).then(|| ZipfTable::new(m.len(), spec.intra_context_skew)))
        .collect();
    for _ in 0..spec.total_accesses {
        let u: f64 = rng.random();
        let c = site_cdf.partition_point(|&x| x <= u).min(site_cdf.len() - 1);
        let table = tables[c].as_ref().expect("sites with zero weight are never drawn");
        let id = members[c][table.sample(rng.random())];
        b.access(ObjectId(id), access_offset(spec.contexts[c].size, rng));
    }
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = weights
        .iter()
        .map(|w| {
            acc += w / total;
            acc
        })
        .collect();
    // the last site with any weight absorbs rounding
    if let Some(last) = weights.iter().rposition(|&w| w > 0.0) {
        for c in &mut cdf[last..] {
            *c = 1.0;
        }
    }
    cdf
}

/// Per-object access probabilities while hot region `region` is active
/// (ignored by single-region workloads). For the small-object workload the
/// ids follow `labels`, so this needs the generated trace's allocation
/// order; pass it as `site_of`.
pub fn object_probabilities(spec: &WorkloadSpec, region: u32, site_of: Option<&[usize]>) -> Vec<f64> {
    let n = spec.num_objects as usize;
    let mut p = vec![0.0; n];
    if spec.archetype == Archetype::SmallObjectSkew {
        let Some(site_of) = site_of else {
            return p;
        };
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); spec.contexts.len()];
        for (i, &c) in site_of.iter().enumerate() {
            members[c].push(i);
        }
        let total: f64 = spec
            .contexts
            .iter()
            .zip(&members)
            .filter(|(_, m)| !m.is_empty())
            .map(|(c, _)| c.access_share)
            .sum();
        for (c, m) in members.iter().enumerate() {
            if m.is_empty() {
                continue;
            }
            let z = ZipfTable::new(m.len(), spec.intra_context_skew);
            for (rank, &i) in m.iter().enumerate() {
                p[i] = spec.contexts[c].access_share / total * z.probability(rank);
            }
        }
        return p;
    }
    match spec.popularity {
        Popularity::Zipf { skew } => {
            let z = ZipfTable::new(n, skew);
            for (i, v) in p.iter_mut().enumerate() {
                *v = z.probability(i);
            }
        }
        Popularity::Hotset { share, .. } => {
            let r = spec.hot_region(region);
            let (hot, cold) = if r.len as usize == n {
                (1.0 / n as f64, 0.0)
            } else {
                (share / r.len as f64, (1.0 - share) / (n as u64 - r.len) as f64)
            };
            for (i, v) in p.iter_mut().enumerate() {
                *v = if r.contains(i as u64) { hot } else { cold };
            }
        }
    }
    p
}
