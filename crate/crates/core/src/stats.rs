//! Deterministic reductions and small statistical helpers.
//!
//! Every Monte-Carlo mean in the crate goes through [`pairwise_sum`], a
//! binary tree with a fixed leaf size, so results do not depend on how the
//! caller produced the samples. Floating-point addition is monotone in each
//! argument, and a fixed tree preserves that: if `x[i] >= y[i]` for all `i`
//! then `pairwise_sum(x) >= pairwise_sum(y)` holds bit-exactly.

use serde::{Deserialize, Serialize};

const LEAF: usize = 32;

/// Sum with a fixed binary-tree order (fan-in 2, leaves of 32 summed left to right).
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= LEAF {
        return values.iter().fold(0.0, |acc, v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Monte-Carlo sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    /// Returns `None` for an empty sample.
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        let n = samples.len();
        if n == 0 {
            return None;
        }
        let mean = pairwise_sum(samples) / n as f64;
        let se = if n > 1 {
            let dev: Vec<f64> = samples.iter().map(|s| (s - mean) * (s - mean)).collect();
            (pairwise_sum(&dev) / (n as f64 - 1.0) / n as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, se, n })
    }

    pub fn exact(value: f64) -> Self {
        Self { mean: value, se: 0.0, n: 1 }
    }
}

/// Least-squares slope of `ln y` against `ln x`.
///
/// Points with a non-positive coordinate are dropped; `None` when fewer
/// than two points remain.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Index and value of the maximum; the first index wins on ties.
pub fn argmax_first(values: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let v: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 500_500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn estimate_of_constant_has_zero_se() {
        let e = Estimate::from_samples(&[2.5; 64]).unwrap();
        assert_eq!(e.mean, 2.5);
        assert_eq!(e.se, 0.0);
        assert!(Estimate::from_samples(&[]).is_none());
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [2.0, 4.0, 8.0, 16.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 / x).collect();
        assert!((log_log_slope(&xs, &ys).unwrap() + 1.0).abs() < 1e-12);
        assert!(log_log_slope(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn argmax_prefers_first_on_ties() {
        assert_eq!(argmax_first(&[0.2, 0.5, 0.5, 0.4]), Some((1, 0.5)));
        assert_eq!(argmax_first(&[]), None);
    }
}
