//! Monte Carlo statistics.

use serde::{Deserialize, Serialize};

pub const BATCHES: usize = 20;

/// A sample mean with its batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

impl Estimate {
    /// `|mean − target| ≤ k·std_error`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error
    }
}

/// Mean of `v` with the standard error from `BATCHES` contiguous batches.
pub fn batch_means(v: &[f64]) -> Estimate {
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n.max(1) as f64;
    let b = BATCHES.min(n);
    if b < 2 {
        return Estimate { mean, std_error: f64::INFINITY };
    }
    let size = n / b;
    let means: Vec<f64> = (0..b).map(|i| v[i * size..(i + 1) * size].iter().sum::<f64>() / size as f64).collect();
    let m = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (b - 1) as f64;
    Estimate { mean, std_error: (var / b as f64).sqrt() }
}

/// Batch-means estimate of the mean squared error between two sequences.
pub fn mse_estimate(x: &[f64], y: &[f64]) -> Estimate {
    let e: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).collect();
    batch_means(&e)
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

pub fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len().max(1) as f64
}

pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Raw second moments `E[v_i v_j]`.
pub fn second_moments(cols: &[&[f64]]) -> Vec<Vec<f64>> {
    let n = cols.first().map_or(0, |c| c.len()).max(1) as f64;
    cols.iter()
        .map(|a| cols.iter().map(|b| a.iter().zip(*b).map(|(x, y)| x * y).sum::<f64>() / n).collect())
        .collect()
}

/// One-sample Kolmogorov–Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// KS test of `v` against the continuous CDF `cdf`.
pub fn ks_test(v: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let mut s = v.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    let n = s.len() as f64;
    let d = s
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let sq = n.sqrt();
    KsResult { statistic: d, p_value: kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d) }
}

/// KS test against `U(−half, half]`.
pub fn ks_uniform(v: &[f64], half: f64) -> KsResult {
    ks_test(v, |x| ((x + half) / (2.0 * half)).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_tail_values() {
        assert!((kolmogorov_sf(1.36) - 0.0494).abs() < 1e-3);
        assert!((kolmogorov_sf(1.63) - 0.0098).abs() < 1e-3);
    }

    #[test]
    fn batch_means_of_constant() {
        let e = batch_means(&[2.0; 1000]);
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn ks_on_grid_is_tiny() {
        let v: Vec<f64> = (0..10_000).map(|i| -0.5 + (i as f64 + 0.5) / 10_000.0).collect();
        let r = ks_uniform(&v, 0.5);
        assert!(r.statistic < 1e-3 && r.p_value > 0.99);
    }
}
