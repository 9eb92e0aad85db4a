use serde::{Deserialize, Serialize};

/// Quantized allocation sizes served by segregated free lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeClassTable {
    classes: Vec<u64>,
}

impl SizeClassTable {
    /// Geometric table with four classes per power of two, from 8 bytes up
    /// to and including `max` (rounded down to a power of two).
    pub fn geometric(max: u64) -> Self {
        assert!(max >= 8, "largest size class must be at least 8 bytes");
        let mut classes = Vec::new();
        let mut octave = 8u64;
        while octave < max {
            let step = octave / 4;
            for k in 0..4 {
                let c = octave + k * step;
                if c > max {
                    break;
                }
                classes.push(c);
            }
            octave *= 2;
        }
        if classes.last() != Some(&max) {
            classes.push(max);
        }
        Self { classes }
    }

    /// Builds a table from an explicit, strictly increasing list.
    pub fn from_classes(classes: Vec<u64>) -> Result<Self, String> {
        if classes.is_empty() {
            return Err("size class table is empty".into());
        }
        if classes[0] == 0 || classes.windows(2).any(|w| w[0] >= w[1]) {
            return Err("size classes must be positive and strictly increasing".into());
        }
        Ok(Self { classes })
    }

    pub fn classes(&self) -> &[u64] {
        &self.classes
    }

    pub fn max(&self) -> u64 {
        *self.classes.last().expect("non-empty table")
    }

    /// Index of the smallest class that holds `size`, or `None` if `size`
    /// exceeds the largest class.
    pub fn class_for(&self, size: u64) -> Option<usize> {
        let idx = self.classes.partition_point(|&c| c < size);
        (idx < self.classes.len()).then_some(idx)
    }

    pub fn class_size(&self, idx: usize) -> u64 {
        self.classes[idx]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn four_k_table() {
        let t = SizeClassTable::geometric(4096);
        assert_eq!(&t.classes()[..6], &[8, 10, 12, 14, 16, 20]);
        assert_eq!(t.max(), 4096);
        assert_eq!(t.classes().len(), 37);
        assert_eq!(t.class_size(t.class_for(64).unwrap()), 64);
        assert_eq!(t.class_size(t.class_for(65).unwrap()), 80);
        assert_eq!(t.class_size(t.class_for(1).unwrap()), 8);
        assert_eq!(t.class_for(4097), None);
    }

    #[test]
    fn explicit_tables_are_validated() {
        assert!(SizeClassTable::from_classes(vec![8, 8]).is_err());
        assert!(SizeClassTable::from_classes(vec![]).is_err());
        assert!(SizeClassTable::from_classes(vec![16, 32]).is_ok());
    }

    proptest! {
        #[test]
        fn smallest_fitting_class(size in 1u64..=4096) {
            let t = SizeClassTable::geometric(4096);
            let idx = t.class_for(size).unwrap();
            prop_assert!(t.class_size(idx) >= size);
            if idx > 0 {
                prop_assert!(t.class_size(idx - 1) < size);
            }
        }
    }
}
