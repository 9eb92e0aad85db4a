/// Inverse-CDF table for a Zipf distribution over ranks `0..n`.
#[derive(Debug, Clone)]
pub struct ZipfTable {
    cdf: Vec<f64>,
}

impl ZipfTable {
    /// `skew = 0` is uniform; `skew = inf` puts all mass on rank 0.
    pub fn new(n: usize, skew: f64) -> Self {
        assert!(n >= 1, "zipf over an empty set");
        assert!(skew >= 0.0, "zipf skew must be non-negative");
        let mut cdf = Vec::with_capacity(n);
        if skew.is_infinite() {
            cdf.resize(n, 1.0);
            return Self { cdf };
        }
        let mut acc = 0.0;
        for i in 0..n {
            acc += (-skew * ((i + 1) as f64).ln()).exp();
            cdf.push(acc);
        }
        let total = acc;
        for c in &mut cdf {
            *c /= total;
        }
        *cdf.last_mut().expect("n >= 1") = 1.0;
        Self { cdf }
    }

    pub fn len(&self) -> usize {
        self.cdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cdf.is_empty()
    }

    /// Probability of rank `i`.
    pub fn probability(&self, i: usize) -> f64 {
        if i == 0 {
            self.cdf[0]
        } else {
            self.cdf[i] - self.cdf[i - 1]
        }
    }

    /// Rank for a uniform draw `u` in `[0, 1)`.
    pub fn sample(&self, u: f64) -> usize {
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_and_degenerate() {
        let u = ZipfTable::new(4, 0.0);
        for i in 0..4 {
            assert!((u.probability(i) - 0.25).abs() < 1e-12);
        }
        assert_eq!(u.sample(0.0), 0);
        assert_eq!(u.sample(0.26), 1);
        assert_eq!(u.sample(0.999), 3);

        let d = ZipfTable::new(10, f64::INFINITY);
        assert_eq!(d.probability(0), 1.0);
        assert!((0..100).all(|k| d.sample(k as f64 / 100.0) == 0));
    }

    #[test]
    fn harmonic_weights() {
        let z = ZipfTable::new(3, 1.0);
        let h = 1.0 + 0.5 + 1.0 / 3.0;
        assert!((z.probability(0) - 1.0 / h).abs() < 1e-12);
        assert!((z.probability(2) - 1.0 / 3.0 / h).abs() < 1e-12);
    }
}
