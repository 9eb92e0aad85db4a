//! Logarithmic page-hotness histogram.
//!
//! Pages are binned by `floor(log2(counter))`, so bin `n` holds pages whose
//! counter lies in `[2^n, 2^(n+1))`. Sixteen bins are tracked; anything at or
//! above `2^15` lands in the top bin and anything below 1 in bin 0.

use serde::{Deserialize, Serialize};

use crate::error::HistogramError;

/// Number of histogram bins.
pub const NUM_BINS: usize = 16;

/// Highest bin index.
pub const TOP_BIN: u8 = (NUM_BINS - 1) as u8;

/// Maps a (possibly fractional) counter value to its bin.
pub fn bin_index(counter_value: f64) -> u8 {
    if !(counter_value >= 1.0) {
        // also catches NaN
        return 0;
    }
    if counter_value >= (1u64 << TOP_BIN) as f64 {
        return TOP_BIN;
    }
    // log2 of an exact power of two is exact, but guard the neighbourhood
    // of the boundary against rounding in either direction.
    let mut b = counter_value.log2().floor() as i32;
    if (2f64).powi(b + 1) <= counter_value {
        b += 1;
    } else if (2f64).powi(b) > counter_value {
        b -= 1;
    }
    b.clamp(0, TOP_BIN as i32) as u8
}

/// System-wide page counts per bin plus the current hot/warm thresholds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HotnessHistogram {
    bins: [u64; NUM_BINS],
    t_hot: u8,
    t_warm: Option<u8>,
}

impl Default for HotnessHistogram {
    fn default() -> Self {
        Self::new()
    }
}

impl HotnessHistogram {
    pub fn new() -> Self {
        Self {
            bins: [0; NUM_BINS],
            t_hot: 0,
            t_warm: None,
        }
    }

    /// Builds a histogram from raw counts (thresholds start at 0 / none).
    pub fn from_bins(bins: [u64; NUM_BINS]) -> Self {
        Self {
            bins,
            t_hot: 0,
            t_warm: None,
        }
    }

    pub fn bins(&self) -> &[u64; NUM_BINS] {
        &self.bins
    }

    pub fn count(&self, bin: u8) -> u64 {
        self.bins[bin as usize]
    }

    pub fn total(&self) -> u64 {
        self.bins.iter().sum()
    }

    pub fn t_hot(&self) -> u8 {
        self.t_hot
    }

    pub fn t_warm(&self) -> Option<u8> {
        self.t_warm
    }

    /// Installs new thresholds. `t_warm`, when present, must sit directly
    /// below `t_hot`.
    pub fn set_thresholds(&mut self, t_hot: u8, t_warm: Option<u8>) {
        assert!(t_hot <= TOP_BIN, "t_hot out of range: {t_hot}");
        if let Some(w) = t_warm {
            assert!(
                t_hot >= 1 && w == t_hot - 1,
                "t_warm must equal t_hot - 1 (t_hot={t_hot}, t_warm={w})"
            );
        }
        self.t_hot = t_hot;
        self.t_warm = t_warm;
    }

    /// Number of pages at or above `bin`.
    pub fn pages_at_or_above(&self, bin: u8) -> u64 {
        self.bins[bin as usize..].iter().sum()
    }

    /// Registers a new page in `bin`.
    pub fn insert(&mut self, bin: u8) {
        self.bins[bin as usize] += 1;
    }

    /// Removes a page from `bin`.
    pub fn remove(&mut self, bin: u8) -> Result<(), HistogramError> {
        let slot = &mut self.bins[bin as usize];
        if *slot == 0 {
            return Err(HistogramError::Underflow { bin });
        }
        *slot -= 1;
        Ok(())
    }

    /// Moves one page from `old_bin` to `new_bin`; the total is unchanged.
    pub fn move_page(&mut self, old_bin: u8, new_bin: u8) -> Result<(), HistogramError> {
        if self.bins[old_bin as usize] == 0 {
            return Err(HistogramError::Underflow { bin: old_bin });
        }
        if old_bin != new_bin {
            self.bins[old_bin as usize] -= 1;
            self.bins[new_bin as usize] += 1;
        }
        Ok(())
    }
}
