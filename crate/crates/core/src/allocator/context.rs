use std::fmt;

use serde::{Deserialize, Serialize};

/// Synthetic call stack at an allocation site, innermost frame first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct AllocationContext {
    pub frames: Vec<u64>,
}

impl AllocationContext {
    pub fn new(frames: Vec<u64>) -> Self {
        Self { frames }
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

impl fmt::Display for AllocationContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, fr) in self.frames.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{fr:x}")?;
        }
        Ok(())
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Hash of the innermost `depth` frames. FNV-1a over the little-endian
/// frame bytes followed by a 64-bit finalizer. Fixed for reproducibility.
pub fn stack_hash(frames: &[u64], depth: usize) -> u64 {
    let mut h = FNV_OFFSET;
    for fr in frames.iter().take(depth) {
        for byte in fr.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    crate::seed::mix64(h)
}

/// Allocation region for a context: hash of the first `min(depth, len)`
/// frames reduced modulo `regions`.
pub fn context_region(ctx: &AllocationContext, depth: usize, regions: u32) -> u32 {
    assert!(depth >= 1, "backtrace depth must be at least 1");
    assert!(regions >= 1, "need at least one region");
    (stack_hash(&ctx.frames, depth) % regions as u64) as u32
}
