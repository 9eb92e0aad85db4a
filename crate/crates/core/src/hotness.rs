//! Per-page access counters, cooling and threshold adaptation.
//!
//! Two counter schemes share one two-accumulator state ([`CounterState`]):
//!
//! * **Sawtooth**: the counter grows by one per sampled access and is
//!   multiplied by the decay factor at every cooling boundary. Decay is
//!   applied lazily, on the first access after the boundary.
//! * **Smooth**: the value decays a little on every access, interpolating
//!   the decay factor across the period, so that at each boundary it equals
//!   the sawtooth value without ever jumping.
//!
//! With `f = (t - cpstart) / cp` and decay factor `d`, the smooth value is
//! `(1 - (1 - d) f) * base + d * accesses` for the linear shape and
//! `d^f * base + d * accesses` for the exponential one. Both reach
//! `d * (base + accesses)` at `f = 1`.

use serde::{Deserialize, Serialize};

use crate::histogram::{HotnessHistogram, NUM_BINS, TOP_BIN};
use crate::page::LogicalTime;

/// Start of the cooling period that contains `t`.
pub fn cpstart_of(t: LogicalTime, cp: u64) -> LogicalTime {
    assert!(cp >= 1, "cooling interval must be at least 1");
    LogicalTime(t.0 / cp * cp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayShape {
    /// Sawtooth: decay only at boundaries.
    Step,
    LinearSmooth,
    ExponentialSmooth,
}

impl DecayShape {
    pub fn is_smooth(self) -> bool {
        !matches!(self, DecayShape::Step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoolingTrigger {
    /// A cooling boundary every `interval_samples` samples.
    EverySamples,
    /// Cool whenever any page counter reaches the threshold.
    MaxCounter(u64),
}

/// How many decay steps a lazily-cooled sawtooth counter applies when it
/// missed several boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LazyDecay {
    PerEpoch,
    Single,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoolingConfig {
    pub interval_samples: u64,
    pub decay_factor: f64,
    pub trigger: CoolingTrigger,
    pub decay_shape: DecayShape,
    pub lazy_decay: LazyDecay,
}

impl CoolingConfig {
    pub fn sawtooth(interval_samples: u64) -> Self {
        Self {
            interval_samples,
            decay_factor: 0.5,
            trigger: CoolingTrigger::EverySamples,
            decay_shape: DecayShape::Step,
            lazy_decay: LazyDecay::PerEpoch,
        }
    }

    pub fn smooth(interval_samples: u64) -> Self {
        Self {
            decay_shape: DecayShape::LinearSmooth,
            ..Self::sawtooth(interval_samples)
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.interval_samples < 1 {
            return Err("cooling interval must be at least 1 sample".into());
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return Err(format!("decay factor {} outside (0, 1]", self.decay_factor));
        }
        match self.trigger {
            CoolingTrigger::MaxCounter(th) if th < 2 => Err("max-counter cooling threshold must be at least 2".into()),
            CoolingTrigger::MaxCounter(_) if self.decay_shape.is_smooth() => {
                Err("smooth decay needs a sample-interval cooling trigger".into())
            }
            _ => Ok(()),
        }
    }

    /// Epoch containing `t` for the sample-interval trigger.
    pub fn epoch_at(&self, t: LogicalTime) -> Epoch {
        let index = t.0 / self.interval_samples;
        Epoch {
            index,
            start: LogicalTime(index * self.interval_samples),
        }
    }
}

/// A cooling period: its ordinal and the time it began.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Epoch {
    pub index: u64,
    pub start: LogicalTime,
}

/// Two accumulators per page plus the bookkeeping needed for lazy decay.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CounterState {
    /// Counter value at the start of the current cooling period.
    pub base_at_cpstart: f64,
    /// Sampled accesses since the period started.
    pub accesses_in_period: u64,
    pub cpstart: LogicalTime,
    pub cooling_epoch_seen: u64,
}

impl CounterState {
    pub fn new(epoch: Epoch) -> Self {
        Self {
            base_at_cpstart: 0.0,
            accesses_in_period: 0,
            cpstart: epoch.start,
            cooling_epoch_seen: epoch.index,
        }
    }

    fn raw(&self) -> f64 {
        self.base_at_cpstart + self.accesses_in_period as f64
    }

    /// Base the counter would have after folding up to `epoch`.
    fn folded_base(&self, epoch: Epoch, cfg: &CoolingConfig) -> Option<f64> {
        let elapsed = epoch.index.checked_sub(self.cooling_epoch_seen)?;
        if elapsed == 0 {
            return None;
        }
        let steps = match (cfg.decay_shape, cfg.lazy_decay) {
            (DecayShape::Step, LazyDecay::Single) => 1,
            _ => elapsed,
        };
        Some(self.raw() * decay_pow(cfg.decay_factor, steps))
    }

    /// Applies any decay owed for boundaries crossed since the last fold.
    pub fn fold_to(&mut self, epoch: Epoch, cfg: &CoolingConfig) {
        if let Some(base) = self.folded_base(epoch, cfg) {
            self.base_at_cpstart = base;
            self.accesses_in_period = 0;
            self.cpstart = epoch.start;
            self.cooling_epoch_seen = epoch.index;
        }
    }

    /// Sawtooth value as seen at `epoch`, without mutating the state.
    pub fn sawtooth_value(&self, epoch: Epoch, cfg: &CoolingConfig) -> f64 {
        self.folded_base(epoch, cfg).unwrap_or_else(|| self.raw())
    }

    /// Records one sampled access under the sawtooth scheme and returns the
    /// new effective value.
    pub fn record_sawtooth(&mut self, epoch: Epoch, cfg: &CoolingConfig) -> f64 {
        self.fold_to(epoch, cfg);
        self.accesses_in_period += 1;
        self.raw()
    }

    /// Smooth value at time `t` inside `epoch` (folding virtually if the
    /// state still belongs to an earlier period).
    pub fn smooth_value(&self, t: LogicalTime, epoch: Epoch, cfg: &CoolingConfig) -> f64 {
        let (base, accesses) = match self.folded_base(epoch, cfg) {
            Some(b) => (b, 0),
            None => (self.base_at_cpstart, self.accesses_in_period),
        };
        let f = period_fraction(t, epoch, cfg.interval_samples);
        let d = cfg.decay_factor;
        let base_weight = match cfg.decay_shape {
            DecayShape::ExponentialSmooth => d.powf(f),
            // Step never reaches here through `effective`, but interpolating
            // linearly is the sensible reading if someone asks.
            DecayShape::LinearSmooth | DecayShape::Step => 1.0 - (1.0 - d) * f,
        };
        base_weight * base + d * accesses as f64
    }

    /// Records one sampled access under the smooth scheme and returns the
    /// new effective value.
    pub fn record_smooth(&mut self, t: LogicalTime, epoch: Epoch, cfg: &CoolingConfig) -> f64 {
        self.fold_to(epoch, cfg);
        self.accesses_in_period += 1;
        self.smooth_value(t, epoch, cfg)
    }

    /// Effective value under whichever scheme `cfg` selects.
    pub fn effective(&self, t: LogicalTime, epoch: Epoch, cfg: &CoolingConfig) -> f64 {
        if cfg.decay_shape.is_smooth() {
            self.smooth_value(t, epoch, cfg)
        } else {
            self.sawtooth_value(epoch, cfg)
        }
    }

    pub fn record(&mut self, t: LogicalTime, epoch: Epoch, cfg: &CoolingConfig) -> f64 {
        if cfg.decay_shape.is_smooth() {
            self.record_smooth(t, epoch, cfg)
        } else {
            self.record_sawtooth(epoch, cfg)
        }
    }
}

fn decay_pow(d: f64, steps: u64) -> f64 {
    if d == 1.0 {
        1.0
    } else {
        d.powi(steps.min(i32::MAX as u64) as i32)
    }
}

fn period_fraction(t: LogicalTime, epoch: Epoch, cp: u64) -> f64 {
    let into = t.0.saturating_sub(epoch.start.0) as f64;
    (into / cp as f64).clamp(0.0, 1.0)
}

/// Sawtooth access at `t` with a sample-interval trigger.
pub fn record_access_sawtooth(state: &mut CounterState, t: LogicalTime, cfg: &CoolingConfig) -> f64 {
    state.record_sawtooth(cfg.epoch_at(t), cfg)
}

/// Smooth access at `t` with a sample-interval trigger.
pub fn record_access_smooth(state: &mut CounterState, t: LogicalTime, cfg: &CoolingConfig) -> f64 {
    state.record_smooth(t, cfg.epoch_at(t), cfg)
}

/// Smooth value at `t` with a sample-interval trigger.
pub fn smooth_value(state: &CounterState, t: LogicalTime, cfg: &CoolingConfig) -> f64 {
    state.smooth_value(t, cfg.epoch_at(t), cfg)
}

/// Which pages count as "hot" when deciding whether to drop the warm bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarmDisableBasis {
    /// Every page at or above `t_hot`, wherever it lives.
    HotSet,
    /// Only hot pages already resident in the fast tier.
    FastResident,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub adapt_interval_samples: u64,
    pub warm_disable_fraction: f64,
    pub warm_disable_basis: WarmDisableBasis,
}

impl ThresholdConfig {
    pub fn every(adapt_interval_samples: u64) -> Self {
        Self {
            adapt_interval_samples,
            warm_disable_fraction: 0.75,
            warm_disable_basis: WarmDisableBasis::HotSet,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thresholds {
    pub t_hot: u8,
    pub t_warm: Option<u8>,
}

/// Picks `t_hot` so the hot set fits the fast tier and decides whether a
/// warm bin exists.
///
/// `fast_bins` counts fast-resident pages per bin; it is only consulted with
/// [`WarmDisableBasis::FastResident`].
pub fn adapt_thresholds(
    h: &HotnessHistogram,
    fast_bins: &[u64; NUM_BINS],
    fast_capacity: u64,
    cfg: &ThresholdConfig,
) -> Thresholds {
    let t_hot = if fast_capacity == 0 {
        TOP_BIN
    } else {
        let mut t_hot = TOP_BIN;
        let mut above = 0u64;
        for b in (0..NUM_BINS).rev() {
            above += h.bins()[b];
            if above > fast_capacity {
                break;
            }
            t_hot = b as u8;
        }
        t_hot
    };

    // bin 0 holds untouched pages and is never warm
    let t_warm = if t_hot <= 1 || fast_capacity == 0 {
        None
    } else {
        let hot = match cfg.warm_disable_basis {
            WarmDisableBasis::HotSet => h.pages_at_or_above(t_hot),
            WarmDisableBasis::FastResident => fast_bins[t_hot as usize..].iter().sum(),
        };
        if hot as f64 >= cfg.warm_disable_fraction * fast_capacity as f64 {
            None
        } else {
            Some(t_hot - 1)
        }
    };
    Thresholds { t_hot, t_warm }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Class {
    Hot,
    Warm,
    Cold,
}

pub fn classify(page_bin: u8, t_hot: u8, t_warm: Option<u8>) -> Class {
    if page_bin >= t_hot {
        Class::Hot
    } else if t_warm == Some(page_bin) {
        Class::Warm
    } else {
        Class::Cold
    }
}
