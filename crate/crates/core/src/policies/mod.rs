//! Page-classification policies.
//!
//! A policy sees sampled accesses, keeps page counters and the histogram
//! current, and emits promotion or demotion intents. The migration engine
//! asks it again (re-validation) before executing any move.

mod histogram;
mod numa;
mod two_interval;

use serde::{Deserialize, Serialize};

pub use self::histogram::HistogramPolicy;
pub use self::numa::{NumaDemotion, NumaHintConfig, NumaHintPolicy};
pub use self::two_interval::{TwoIntervalConfig, TwoIntervalPolicy};
use crate::error::SimError;
use crate::hotness::{CoolingConfig, CounterState, ThresholdConfig, Thresholds};
use crate::page::{LogicalTime, PageId, QueueKind, TieredMemory};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Intent {
    Promote(PageId),
    Demote(PageId),
}

impl Intent {
    pub fn page(self) -> PageId {
        match self {
            Intent::Promote(p) | Intent::Demote(p) => p,
        }
    }
}

/// Counters a policy keeps about its own activity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyStats {
    pub coolings: u64,
    pub adaptations: u64,
    /// Times a page moved into or out of the hot class.
    pub hot_transitions: u64,
    /// Sample time of the most recent such move.
    pub last_hot_transition: Option<LogicalTime>,
}

pub trait Policy: Send {
    fn name(&self) -> &str;

    /// Counter state for a page registered at `t`.
    fn init_counter(&self, t: LogicalTime) -> CounterState;

    /// Handles one sampled access to `page` at sample time `t`.
    fn on_sample(
        &mut self,
        mem: &mut TieredMemory,
        page: PageId,
        t: LogicalTime,
        out: &mut Vec<Intent>,
    ) -> Result<(), SimError>;

    /// Whether a queued move is still wanted at time `t`. May refresh the
    /// page's counter value.
    fn revalidate(
        &mut self,
        mem: &mut TieredMemory,
        page: PageId,
        kind: QueueKind,
        t: LogicalTime,
    ) -> Result<bool, SimError>;

    /// Current thresholds, for policies that use the histogram.
    fn thresholds(&self) -> Option<Thresholds>;

    fn stats(&self) -> PolicyStats;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    SawtoothDefault,
    SawtoothQC,
    Smooth,
    TwoInterval,
    NumaHintOnce,
    NumaHintTwice,
    NumaHintNoDemotion,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 7] = [
        PolicyKind::SawtoothDefault,
        PolicyKind::SawtoothQC,
        PolicyKind::Smooth,
        PolicyKind::TwoInterval,
        PolicyKind::NumaHintOnce,
        PolicyKind::NumaHintTwice,
        PolicyKind::NumaHintNoDemotion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::SawtoothDefault => "sawtooth-default",
            PolicyKind::SawtoothQC => "sawtooth-qc",
            PolicyKind::Smooth => "smooth",
            PolicyKind::TwoInterval => "two-interval",
            PolicyKind::NumaHintOnce => "numa-hint-once",
            PolicyKind::NumaHintTwice => "numa-hint-twice",
            PolicyKind::NumaHintNoDemotion => "numa-hint-no-demotion",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Default parameters with every sample-denominated interval multiplied
    /// by `scale`.
    pub fn default_config(self, scale: f64, page_size: u64) -> PolicyConfig {
        let s = |n: u64| scaled(n, scale);
        match self {
            PolicyKind::SawtoothDefault => PolicyConfig::Histogram {
                kind: self,
                cooling: CoolingConfig::sawtooth(s(2_000_000)),
                thresholds: ThresholdConfig::every(s(100_000)),
            },
            PolicyKind::SawtoothQC => PolicyConfig::Histogram {
                kind: self,
                cooling: CoolingConfig::sawtooth(s(120_000)),
                thresholds: ThresholdConfig::every(s(100_000)),
            },
            PolicyKind::Smooth => PolicyConfig::Histogram {
                kind: self,
                cooling: CoolingConfig::smooth(s(120_000)),
                thresholds: ThresholdConfig::every(s(12_000)),
            },
            PolicyKind::TwoInterval => PolicyConfig::TwoInterval(TwoIntervalConfig {
                momentum_interval_samples: s(500_000),
                frequency_interval_samples: s(80_000_000),
                momentum_hot_threshold: 3,
                adapt_interval_samples: s(100_000),
            }),
            PolicyKind::NumaHintOnce | PolicyKind::NumaHintTwice | PolicyKind::NumaHintNoDemotion => {
                PolicyConfig::NumaHint(NumaHintConfig {
                    kind: self,
                    scan_window_pages: (256 << 20) / page_size.max(1),
                    scan_interval_samples: s(100_000),
                    hot_fault_threshold: if self == PolicyKind::NumaHintTwice { 2 } else { 1 },
                    demotion: if self == PolicyKind::NumaHintNoDemotion {
                        NumaDemotion::None
                    } else {
                        NumaDemotion::LruWatermark { high: 0.95, low: 0.90 }
                    },
                })
            }
        }
    }
}

/// `n * scale` rounded, at least 1.
pub fn scaled(n: u64, scale: f64) -> u64 {
    ((n as f64 * scale).round() as u64).max(1)
}

/// Full parameter set for one policy instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum PolicyConfig {
    Histogram {
        kind: PolicyKind,
        cooling: CoolingConfig,
        thresholds: ThresholdConfig,
    },
    TwoInterval(TwoIntervalConfig),
    NumaHint(NumaHintConfig),
}

impl PolicyConfig {
    pub fn kind(&self) -> PolicyKind {
        match self {
            PolicyConfig::Histogram { kind, .. } => *kind,
            PolicyConfig::TwoInterval(_) => PolicyKind::TwoInterval,
            PolicyConfig::NumaHint(c) => c.kind,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            PolicyConfig::Histogram {
                cooling, thresholds, ..
            } => {
                cooling.validate()?;
                if thresholds.adapt_interval_samples < 1 {
                    return Err("threshold adaptation interval must be at least 1".into());
                }
                if !(0.0..=1.0).contains(&thresholds.warm_disable_fraction) {
                    return Err("warm_disable_fraction must be in [0, 1]".into());
                }
                Ok(())
            }
            PolicyConfig::TwoInterval(c) => c.validate(),
            PolicyConfig::NumaHint(c) => c.validate(),
        }
    }

    pub fn build(&self) -> Box<dyn Policy> {
        match self {
            PolicyConfig::Histogram {
                kind,
                cooling,
                thresholds,
            } => Box::new(HistogramPolicy::new(kind.name(), cooling.clone(), thresholds.clone())),
            PolicyConfig::TwoInterval(c) => Box::new(TwoIntervalPolicy::new(c.clone())),
            PolicyConfig::NumaHint(c) => Box::new(NumaHintPolicy::new(c.clone())),
        }
    }
}
