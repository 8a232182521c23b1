//! High-resolution predictions and the distortion-product yardstick.

use crate::error::{MdqError, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::{E, PI};

/// Bisection tolerance for the balanced tap.
pub const A2_TOL: f64 = 1e-12;
/// Rates below this many bits are flagged as outside the high-resolution regime.
pub const HIGHRES_MIN_RATE: f64 = 4.0;

/// `5a³ + 4a² + 4/3`, zero where the two side distortions balance.
pub fn balance_cubic(a: f64) -> f64 {
    5.0 * a * a * a + 4.0 * a * a + 4.0 / 3.0
}

/// The root of [`balance_cubic`] in `(−4/3, −1)`.
pub fn solve_balanced_a2() -> f64 {
    let (mut lo, mut hi) = (-4.0 / 3.0, -1.0);
    debug_assert!(balance_cubic(lo) < 0.0 && balance_cubic(hi) > 0.0);
    while hi - lo > A2_TOL {
        let m = 0.5 * (lo + hi);
        if balance_cubic(m) < 0.0 {
            lo = m;
        } else {
            hi = m;
        }
    }
    0.5 * (lo + hi)
}

/// Fraction of `C_s` cells built from three segments.
pub fn three_segment_fraction(a2: f64) -> f64 {
    -3.0 - 3.0 * a2
}

/// High-resolution `D₂/Δa²` for the staircase with slope `a₁ = 2`.
pub fn side2_coefficient(a2: f64) -> f64 {
    -(5.0 * a2 + 4.0) * a2 * a2 / 16.0
}

/// Differential entropy of a Gaussian of variance `var`, bits.
pub fn gaussian_entropy_bits(var: f64) -> f64 {
    0.5 * (2.0 * PI * E * var).log2()
}

/// Closed-form `q_b` rate: `−log₂Δb + (3+3a₂)log₂(3/2) + h`.
pub fn rate2_closed_form(step_b: f64, a2: f64, h_bits: f64) -> f64 {
    -step_b.log2() + (3.0 + 3.0 * a2) * 1.5f64.log2() + h_bits
}

/// Inverse of [`rate2_closed_form`].
pub fn step_b_for_rate(rate: f64, a2: f64, h_bits: f64) -> f64 {
    2f64.powf(h_bits + (3.0 + 3.0 * a2) * 1.5f64.log2() - rate)
}

/// Uniform step with entropy rate `rate` on a Gaussian of variance `var`.
pub fn step_for_rate(rate: f64, var: f64) -> f64 {
    (2.0 * PI * E * var).sqrt() * 2f64.powf(-rate)
}

/// Central-distortion factor `(3/2)^{6+6a₂}` of the balanced staircase.
pub fn central_factor(a2: f64) -> f64 {
    1.5f64.powf(6.0 + 6.0 * a2)
}

/// `10·log₁₀(D₁D₃ / (σ⁴2^{−4R}/4))`.
pub fn distortion_product_gap(d1: f64, d3: f64, rate: f64, var: f64) -> f64 {
    10.0 * (d1 * d3 / (var * var * 2f64.powf(-4.0 * rate) / 4.0)).log10()
}

/// Granular product `D₁D₃/(σ⁴2^{−4R})` of the threshold-optimized scalar MD
/// quantizer used as the reference.
pub fn mdsq_product() -> f64 {
    10f64.powf(0.267) / 4.0
}

/// Gap of the reference quantizer at rate `rate`.
pub fn mdsq_reference_gap(rate: f64) -> f64 {
    distortion_product_gap(mdsq_product() * 2f64.powf(-4.0 * rate), 1.0, rate, 1.0)
}

/// Side distortion `bσ²2^{−2(1−η)R}` with `b ≥ 1`, `0 ≤ η < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HighResSpec {
    pub rate: f64,
    pub b: f64,
    pub eta: f64,
}

impl HighResSpec {
    pub fn new(rate: f64, b: f64, eta: f64) -> Result<Self> {
        if !(b >= 1.0 && (0.0..1.0).contains(&eta) && rate.is_finite()) {
            return Err(MdqError::InvalidParameter(format!("need b ≥ 1 and 0 ≤ η < 1, got b = {b}, η = {eta}")));
        }
        Ok(Self { rate, b, eta })
    }

    pub fn side_distortion(&self, var: f64) -> f64 {
        self.b * var * 2f64.powf(-2.0 * (1.0 - self.eta) * self.rate)
    }

    /// Smallest achievable central distortion at this side distortion.
    pub fn central_bound(&self, var: f64) -> f64 {
        let r = self.rate;
        if self.eta == 0.0 {
            var * 2f64.powf(-2.0 * r) / (2.0 * (self.b + (self.b * self.b - 1.0).sqrt()))
        } else {
            var * 2f64.powf(-2.0 * r * (1.0 + self.eta)) / (4.0 * self.b)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HighResMode {
    /// Two encoders, `a₂ = −1`, `Δa ≫ Δb`.
    Successive,
    /// Two encoders with the balancing tap.
    SuccessiveBalanced,
    /// Time sharing between the two successive orders.
    Timeshared,
    /// Three encoders at equal rates, no time sharing.
    SplittingBalanced,
}

/// Predicted operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HighResPoint {
    pub mode: HighResMode,
    pub r1: f64,
    pub r2: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub a2: f64,
    /// Product gap at the mean rate.
    pub gap_db: f64,
    pub low_rate: bool,
}

/// Closed-form prediction. For `SplittingBalanced`, `r1` is the common
/// rate and `r2` the rate of `q_a` alone.
pub fn highres_point(mode: HighResMode, r1: f64, r2: f64, var: f64) -> HighResPoint {
    let c = 2.0 * PI * E * var;
    let a2 = match mode {
        HighResMode::Successive | HighResMode::Timeshared => -1.0,
        _ => solve_balanced_a2(),
    };
    let (pr1, pr2, d1, d2, d3) = match mode {
        HighResMode::Successive => {
            let d1 = c / 12.0 * 2f64.powf(-2.0 * r1);
            (r1, r2, d1, 0.75 * d1, c / 48.0 * 2f64.powf(-2.0 * r2))
        }
        HighResMode::SuccessiveBalanced => {
            let d1 = c / 12.0 * 2f64.powf(-2.0 * r1);
            (r1, r2, d1, d1, central_factor(a2) * c / 48.0 * 2f64.powf(-2.0 * r2))
        }
        HighResMode::Timeshared => {
            let d1 = c / 12.0 * 2f64.powf(-2.0 * r1);
            let r = 0.5 * (r1 + r2);
            (r, r, 0.875 * d1, 0.875 * d1, c / 48.0 * 2f64.powf(-2.0 * r2))
        }
        HighResMode::SplittingBalanced => {
            let d1 = c / 12.0 * 2f64.powf(-2.0 * r2);
            (r1, r1, d1, d1, central_factor(a2) * c / 48.0 * 2f64.powf(-2.0 * (2.0 * r1 - r2)))
        }
    };
    HighResPoint {
        mode,
        r1: pr1,
        r2: pr2,
        d1,
        d2,
        d3,
        a2,
        gap_db: distortion_product_gap(0.5 * (d1 + d2), d3, 0.5 * (pr1 + pr2), var),
        low_rate: pr1.min(pr2) < HIGHRES_MIN_RATE,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_is_zero_at_the_bound() {
        let r = 5.0;
        let d1 = 0.01;
        let d3 = 2f64.powf(-4.0 * r) / 4.0 / d1;
        assert!(distortion_product_gap(d1, d3, r, 1.0).abs() < 1e-12);
    }

    #[test]
    fn central_bound_meets_product() {
        let s = HighResSpec::new(6.0, 1.5, 0.3).unwrap();
        let p = s.side_distortion(1.0) * s.central_bound(1.0);
        assert!((p - 2f64.powf(-24.0) / 4.0).abs() < 1e-20);
        assert!(HighResSpec::new(6.0, 0.5, 0.3).is_err());
    }
}
