use serde::{Deserialize, Serialize};

use crate::seed;

/// One-in-N access sampling, standing in for hardware event sampling.
///
/// Decisions are a pure function of `(seed, event sequence number)`, so the
/// same seed always observes the same accesses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingModel {
    pub rate: u64,
    pub seed: u64,
    /// Per-access perturbation of the sampling probability: each access is
    /// observed with probability `(1 +/- jitter) / rate`, the sign chosen by
    /// a fair coin.
    pub jitter: f64,
}

impl SamplingModel {
    pub fn every_access() -> Self {
        Self {
            rate: 1,
            seed: 0,
            jitter: 0.0,
        }
    }

    pub fn one_in(rate: u64, seed: u64) -> Self {
        Self {
            rate,
            seed,
            jitter: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.rate < 1 {
            return Err("sampling rate must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.jitter) {
            return Err(format!("sampling jitter {} outside [0, 1)", self.jitter));
        }
        Ok(())
    }

    /// Whether the access with sequence number `seq` reaches the policy.
    pub fn observes(&self, seq: u64) -> bool {
        if self.rate == 1 && self.jitter == 0.0 {
            return true;
        }
        let mut p = 1.0 / self.rate as f64;
        if self.jitter > 0.0 {
            let up = seed::hash2(self.seed ^ 0x6a69_7474, seq) & 1 == 1;
            p *= if up { 1.0 + self.jitter } else { 1.0 - self.jitter };
        }
        seed::unit(self.seed, seq) < p.min(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_one_sees_everything() {
        let m = SamplingModel::every_access();
        assert!((0..10_000).all(|s| m.observes(s)));
    }

    #[test]
    fn same_seed_same_observations() {
        let a = SamplingModel::one_in(7, 99);
        let b = SamplingModel::one_in(7, 99);
        let c = SamplingModel::one_in(7, 100);
        let pick = |m: &SamplingModel| (0..5000).filter(|&s| m.observes(s)).collect::<Vec<_>>();
        assert_eq!(pick(&a), pick(&b));
        assert_ne!(pick(&a), pick(&c));
    }

    #[test]
    fn one_in_hundred_within_three_sigma() {
        let m = SamplingModel::one_in(100, 5);
        let n = 1_000_000u64;
        let observed = (0..n).filter(|&s| m.observes(s)).count() as f64;
        let mean = n as f64 / 100.0;
        let sigma = (n as f64 * 0.01 * 0.99).sqrt();
        assert!((observed - mean).abs() <= 3.0 * sigma, "{observed} vs {mean}");
    }

    #[test]
    fn jitter_keeps_the_mean() {
        let m = SamplingModel {
            rate: 10,
            seed: 3,
            jitter: 0.5,
        };
        let n = 400_000u64;
        let observed = (0..n).filter(|&s| m.observes(s)).count() as f64;
        let sigma = (n as f64 * 0.1 * 0.9).sqrt();
        assert!((observed - n as f64 / 10.0).abs() <= 4.0 * sigma);
    }
}
