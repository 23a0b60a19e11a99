//! Small statistical helpers shared by the verifiers.

use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// A Bernoulli frequency with its Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Frequency {
    pub fn new(successes: u64, trials: u64) -> Self {
        let (lower, upper) = wilson_interval(successes, trials, Z95);
        let estimate = if trials == 0 { 0.0 } else { successes as f64 / trials as f64 };
        Self { successes, trials, estimate, lower, upper }
    }

    /// Binomial standard error at the point estimate.
    pub fn standard_error(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        (self.estimate * (1.0 - self.estimate) / self.trials as f64).sqrt()
    }
}

/// Wilson score interval for `successes / trials` at normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Lower-interpolation percentile of an already sorted slice: the element at
/// rank `floor(p/100 · (n − 1))`.
pub fn percentile_lower(sorted: &[f64], percentile: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty sample");
    let rank = (percentile / 100.0 * (sorted.len() - 1) as f64).floor() as usize;
    sorted[rank.min(sorted.len() - 1)]
}

/// Sample mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_brackets_estimate() {
        let f = Frequency::new(30, 100);
        assert!(f.lower < 0.3 && 0.3 < f.upper);
        // reference values for 30/100 at z = 1.96
        assert!((f.lower - 0.2189).abs() < 1e-3);
        assert!((f.upper - 0.3958).abs() < 1e-3);
        let all = Frequency::new(100, 100);
        assert_eq!(all.upper, 1.0);
        assert!(all.lower > 0.96);
    }

    #[test]
    fn lower_percentile() {
        let xs: Vec<f64> = (0..11).map(f64::from).collect();
        assert_eq!(percentile_lower(&xs, 50.0), 5.0);
        assert_eq!(percentile_lower(&xs, 0.0), 0.0);
        assert_eq!(percentile_lower(&xs, 10.0), 1.0);
        assert_eq!(percentile_lower(&xs, 99.0), 9.0);
    }
}
