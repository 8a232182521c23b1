//! Quadratic Gaussian two-description region and the codec coefficients
//! that reach it.
//!
//! Everything is parametrized by the Gaussian test channel
//! `U_i = X + T_0 + T_i`, with `T_0` independent of `(T_1, T_2)` and the pair
//! `(T_1, T_2)` perfectly anti-correlated, `E[T_1 T_2] = −σ_T1 σ_T2`. Given a
//! distortion triple in the non-degenerate band the noise variances are
//! unique, and so are the successive-quantization coefficients `a_i`, the
//! splitting coefficients `b_i`, `b*_i`, the decoder gains and the innovation
//! variances that set each quantizer's step.
//!
//! The extra splitting variance `σ²_T3` moves the operating point along the
//! dominant face: zero gives vertex V2, and the [`SplitVariance::Infinite`]
//! sentinel gives vertex V1. Rates are in bits.

use crate::error::{MdqError, Result};
use serde::{Deserialize, Serialize};

/// Relative slack accepted on band endpoints.
const BAND_TOL: f64 = 1e-12;

#[inline]
fn half_log2(x: f64) -> f64 {
    0.5 * x.log2()
}

/// Source variance and the three target distortions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionTriple {
    pub var: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl DistortionTriple {
    pub fn new(var: f64, d1: f64, d2: f64, d3: f64) -> Result<Self> {
        let t = Self { var, d1, d2, d3 };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<()> {
        if !(self.var > 0.0) || !self.var.is_finite() {
            return Err(MdqError::InvalidParameter(format!("source variance must be positive, got {}", self.var)));
        }
        for (name, d) in [("D1", self.d1), ("D2", self.d2), ("D3", self.d3)] {
            if !(d > 0.0) || d > self.var || !d.is_finite() {
                return Err(MdqError::InvalidParameter(format!(
                    "{name} = {d} must lie in (0, {}]",
                    self.var
                )));
            }
        }
        Ok(())
    }

    /// `(1/D₁ + 1/D₂ − 1/σ²)⁻¹`, the largest useful central distortion.
    pub fn harmonic_bound(&self) -> f64 {
        1.0 / (1.0 / self.d1 + 1.0 / self.d2 - 1.0 / self.var)
    }

    /// `D₁ + D₂ − σ²`, below which the central target is degenerate.
    pub fn lower_bound(&self) -> f64 {
        self.d1 + self.d2 - self.var
    }

    /// All three distortions multiplied by `f`.
    pub fn scaled(&self, f: f64) -> Result<Self> {
        Self::new(self.var, self.d1 * f, self.d2 * f, self.d3 * f)
    }

    pub fn is_at_harmonic_bound(&self) -> bool {
        (self.d3 - self.harmonic_bound()).abs() <= 1e-10 * self.var
    }

    pub fn is_at_lower_bound(&self) -> bool {
        (self.d3 - self.lower_bound()).abs() <= 1e-10 * self.var
    }

    fn in_band(&self) -> Result<()> {
        let tol = BAND_TOL * self.var;
        if self.d3 < self.lower_bound() - tol {
            return Err(MdqError::OutOfBand(format!(
                "D3 = {} below D1 + D2 - var = {}",
                self.d3,
                self.lower_bound()
            )));
        }
        if self.d3 > self.harmonic_bound() + tol {
            return Err(MdqError::OutOfBand(format!(
                "D3 = {} above the harmonic bound {}",
                self.d3,
                self.harmonic_bound()
            )));
        }
        Ok(())
    }
}

/// Which side of the band, if any, a clamp acted on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "bound", rename_all = "snake_case")]
pub enum ClampFlag {
    Inside,
    /// `D₃` was lowered to the harmonic bound.
    Harmonic { original_d3: f64 },
    /// `D₃ < D₁ + D₂ − σ²`: reported only, the triple is left as given.
    BelowLower { lower: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Clamped {
    pub triple: DistortionTriple,
    pub flag: ClampFlag,
}

pub fn clamp_degenerate(d: DistortionTriple) -> Result<Clamped> {
    d.validate()?;
    let h = d.harmonic_bound();
    if d.d3 > h + BAND_TOL * d.var {
        let triple = DistortionTriple { d3: h, ..d };
        return Ok(Clamped { triple, flag: ClampFlag::Harmonic { original_d3: d.d3 } });
    }
    if d.d3 < d.lower_bound() - BAND_TOL * d.var {
        return Ok(Clamped { triple: d, flag: ClampFlag::BelowLower { lower: d.lower_bound() } });
    }
    Ok(Clamped { triple: d, flag: ClampFlag::Inside })
}

/// Excess-sum-rate factor for a variance `var`, any triple, all three branches.
pub fn psi_piecewise(var: f64, d1: f64, d2: f64, d3: f64) -> f64 {
    if d3 <= d1 + d2 - var {
        return 1.0;
    }
    let h = 1.0 / (1.0 / d1 + 1.0 / d2 - 1.0 / var);
    if d3 >= h {
        return var * d3 / (d1 * d2);
    }
    let a = (var - d3) * (var - d3);
    let c = ((var - d1) * (var - d2)).sqrt() - ((d1 - d3) * (d2 - d3)).sqrt();
    a / (a - c * c)
}

/// `ψ(D₁, D₂, D₃)` for a triple inside the band.
pub fn psi(d: &DistortionTriple) -> Result<f64> {
    d.validate()?;
    d.in_band()?;
    Ok(psi_piecewise(d.var, d.d1, d.d2, d.d3))
}

/// Minimum sum rate `½log₂(σ²/D₃) + ½log₂ψ`.
pub fn sum_rate(d: &DistortionTriple) -> Result<f64> {
    Ok(half_log2(d.var / d.d3) + half_log2(psi(d)?))
}

/// Noise variances of the Gaussian test channel and the decoder gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestChannel {
    pub triple: DistortionTriple,
    pub psi: f64,
    /// `σ²_T0`
    pub t0: f64,
    /// `σ²_T1`
    pub t1: f64,
    /// `σ²_T2`
    pub t2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
}

/// Outcome of solving the test channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "channel", rename_all = "snake_case")]
pub enum ChannelSolution {
    /// `D₃ = σ²`: nothing is described, `σ²_T0` is unbounded and all rates are zero.
    Silent,
    Active(TestChannel),
}

impl ChannelSolution {
    pub fn active(self) -> Result<TestChannel> {
        match self {
            Self::Active(c) => Ok(c),
            Self::Silent => Err(MdqError::Degenerate("all rates are zero; no codec to build".into())),
        }
    }
}

pub fn test_channel_params(d: &DistortionTriple) -> Result<ChannelSolution> {
    d.validate()?;
    d.in_band()?;
    if d.d3 == d.var {
        return Ok(ChannelSolution::Silent);
    }
    if d.d1 == d.var || d.d2 == d.var {
        return Err(MdqError::Degenerate(
            "a description with D_i = var carries no information; use a single-description code".into(),
        ));
    }
    let v = d.var;
    let t0 = d.d3 * v / (v - d.d3);
    let clamp = |x: f64, name: &str| -> Result<f64> {
        if x < -1e-12 {
            Err(MdqError::OutOfBand(format!("{name} = {x} is negative")))
        } else {
            Ok(x.max(0.0))
        }
    };
    let t1 = clamp(d.d1 * v / (v - d.d1) - t0, "sigma2_T1")?;
    let t2 = clamp(d.d2 * v / (v - d.d2) - t0, "sigma2_T2")?;
    let (s1, s2) = (t1.sqrt(), t2.sqrt());
    let alpha1 = v / (v + t0 + t1);
    let alpha2 = v / (v + t0 + t2);
    let (beta1, beta2) = if s1 + s2 > 0.0 {
        (v * s2 / ((s1 + s2) * (v + t0)), v * s1 / ((s1 + s2) * (v + t0)))
    } else {
        let b = v / (2.0 * (v + t0));
        (b, b)
    };
    let c = TestChannel { triple: *d, psi: psi_piecewise(v, d.d1, d.d2, d.d3), t0, t1, t2, alpha1, alpha2, beta1, beta2 };
    let (r1, r2, r3) = c.reconstructed_distortions();
    let scale = v.max(1.0);
    for (got, want) in [(r1, d.d1), (r2, d.d2), (r3, d.d3)] {
        if (got - want).abs() > 1e-12 * scale {
            return Err(MdqError::Degenerate(format!(
                "test channel self-check failed: reconstructed {got} for target {want}"
            )));
        }
    }
    Ok(ChannelSolution::Active(c))
}

/// Tag on a rate pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "point", rename_all = "snake_case")]
pub enum RateTag {
    Vertex1,
    Vertex2,
    Split { sigma2_t3: SplitVariance },
    Timeshare { gamma: f64 },
    OuterBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    pub r1: f64,
    pub r2: f64,
    pub tag: RateTag,
}

impl RatePair {
    pub fn sum(&self) -> f64 {
        self.r1 + self.r2
    }
}

/// `σ²_T3`, with an explicit sentinel for the unbounded end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitVariance {
    Finite(f64),
    Infinite,
}

/// Which quantizer of a two-stage chain runs first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Order {
    /// `U₁` then `U₂`: vertex V1.
    FirstThenSecond,
    /// `U₂` then `U₁`: vertex V2.
    SecondThenFirst,
}

/// Two-stage chain: stage 1 quantizes `X`, stage 2 quantizes `a₁X + a₂W₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessiveCoeffs {
    pub order: Order,
    pub a1: f64,
    pub a2: f64,
    /// `E B₂²`, noise variance of the first stage.
    pub eb2: f64,
    /// `E B₃²`, noise variance of the second stage.
    pub eb3: f64,
}

/// Three-stage splitting chain and its rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplittingCoeffs {
    pub sigma2_t3: f64,
    /// `b₁ … b₈`
    pub b: [f64; 8],
    /// `b*₁ … b*₆`
    pub b_star: [f64; 6],
    pub eb_tilde2: f64,
    pub eb_tilde3: f64,
    pub eb_bar2: f64,
    pub eb_bar3: f64,
    pub eb_bar4: f64,
    pub r1: f64,
    pub r2: f64,
    /// Rate of the coarse stage of description 2.
    pub r21: f64,
    /// Rate of the refinement stage of description 2.
    pub r22: f64,
}

/// Splitting coefficients, or the vertex-V1 chain the unbounded split degenerates to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "topology", rename_all = "snake_case")]
pub enum SplitSolution {
    Split(SplittingCoeffs),
    Successive(SuccessiveCoeffs),
}

/// How [`TestChannel::split_sigma_t3`] reached its answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMethod {
    ClosedForm,
    Bisection,
    Endpoint,
    /// Both vertices coincide; every `σ²_T3` gives the same rates.
    Indifferent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitPoint {
    pub sigma2_t3: SplitVariance,
    pub method: SplitMethod,
}

impl TestChannel {
    fn sig(&self) -> (f64, f64) {
        (self.t1.sqrt(), self.t2.sqrt())
    }

    pub fn var(&self) -> f64 {
        self.triple.var
    }

    /// `E[(U₁−X)(U₂−X)] = σ²_T0 − σ_T1σ_T2`.
    pub fn error_correlation(&self) -> f64 {
        let (s1, s2) = self.sig();
        self.t0 - s1 * s2
    }

    /// `E[U₁U₂] = σ² + σ²_T0 − σ_T1σ_T2`.
    pub fn cross_moment_u(&self) -> f64 {
        self.var() + self.error_correlation()
    }

    /// Covariance of `(X, U₁, U₂)`.
    pub fn covariance_xuu(&self) -> [[f64; 3]; 3] {
        let v = self.var();
        let c = self.cross_moment_u();
        [[v, v, v], [v, v + self.t0 + self.t1, c], [v, c, v + self.t0 + self.t2]]
    }

    /// Distortions of the three linear decoders, from second moments.
    pub fn reconstructed_distortions(&self) -> (f64, f64, f64) {
        let k = self.covariance_xuu();
        let v = k[0][0];
        let d1 = v - 2.0 * self.alpha1 * v + self.alpha1 * self.alpha1 * k[1][1];
        let d2 = v - 2.0 * self.alpha2 * v + self.alpha2 * self.alpha2 * k[2][2];
        let (b1, b2) = (self.beta1, self.beta2);
        let d3 = v - 2.0 * (b1 + b2) * v + b1 * b1 * k[1][1] + 2.0 * b1 * b2 * k[1][2] + b2 * b2 * k[2][2];
        (d1, d2, d3)
    }

    pub fn sum_rate(&self) -> f64 {
        half_log2(self.var() / self.triple.d3) + half_log2(self.psi)
    }

    pub fn vertices(&self) -> (RatePair, RatePair) {
        let d = self.triple;
        let hp = half_log2(self.psi);
        let v1 = RatePair {
            r1: half_log2(d.var / d.d1),
            r2: half_log2(d.d1 / d.d3) + hp,
            tag: RateTag::Vertex1,
        };
        let v2 = RatePair {
            r1: half_log2(d.d2 / d.d3) + hp,
            r2: half_log2(d.var / d.d2),
            tag: RateTag::Vertex2,
        };
        (v1, v2)
    }

    pub fn successive_coeffs(&self, order: Order) -> SuccessiveCoeffs {
        let (v_first, v_second) = match order {
            Order::FirstThenSecond => (self.t1, self.t2),
            Order::SecondThenFirst => (self.t2, self.t1),
        };
        let (sf, ss) = (v_first.sqrt(), v_second.sqrt());
        let t0 = self.t0;
        let den = t0 + v_first;
        SuccessiveCoeffs {
            order,
            a1: (v_first + sf * ss) / den,
            a2: (t0 - sf * ss) / den,
            eb2: den,
            eb3: t0 * (sf + ss) * (sf + ss) / den,
        }
    }

    /// `R₁` on the dominant face as a function of `σ²_T3`.
    pub fn r1_of(&self, t3: SplitVariance) -> f64 {
        match t3 {
            SplitVariance::Infinite => self.vertices().0.r1,
            SplitVariance::Finite(t3) => {
                let (s1, s2) = self.sig();
                let (v, t0, t1, t2) = (self.var(), self.t0, self.t1, self.t2);
                half_log2((v + t0 + t1) * (t0 + t2 + t3) / (t0 * (s1 + s2) * (s1 + s2) + t3 * (t0 + t1)))
            }
        }
    }

    pub fn splitting_coeffs(&self, t3: SplitVariance) -> Result<SplitSolution> {
        let t3 = match t3 {
            SplitVariance::Infinite => {
                return Ok(SplitSolution::Successive(self.successive_coeffs(Order::FirstThenSecond)))
            }
            SplitVariance::Finite(t3) if t3 >= 0.0 && t3.is_finite() => t3,
            SplitVariance::Finite(t3) => {
                return Err(MdqError::InvalidParameter(format!("sigma2_T3 must be >= 0, got {t3}")))
            }
        };
        let (s1, s2) = self.sig();
        let (v, t0, t1, t2) = (self.var(), self.t0, self.t1, self.t2);
        let s = t0 + t2 + t3;
        let q = t0 * (s1 + s2) * (s1 + s2) + t3 * (t0 + t1);
        let b1 = (t2 + t3 + s1 * s2) / s;
        let b2 = (t0 - s1 * s2) / s;
        let b3 = v / (v + s);
        let b4 = (v + t0 - s1 * s2) / (v + s);
        let b5 = b1;
        let b6 = (v + t0 + t2) / (v + s);
        let b7 = t3 / s;
        let b8 = if q > 0.0 { t3 * (t0 - s1 * s2) / q } else { 0.0 };
        let eb_tilde2 = s;
        let eb_tilde3 = q / s;
        let eb_bar2 = v * s / (v + s);
        let eb_bar3 = eb_tilde3;
        let raw4 = t3 * (v + t0 + t2) / (v + s) - b7 * b7 * eb_bar2 - b8 * b8 * eb_bar3;
        let eb_bar4 = if raw4.abs() <= 1e-12 * v { 0.0 } else { raw4 };
        if eb_bar4 < 0.0 {
            return Err(MdqError::Degenerate(format!("negative refinement innovation variance {eb_bar4}")));
        }
        let b_star = [b1, b2, b7 - b5 * b8, b8, b3 * b5 * b8 - b3 * b7 - b4 * b8, b6];
        let r1 = half_log2((v + t0 + t1) * s / q);
        let r2 = self.sum_rate() - r1;
        let r21 = half_log2((v + eb_tilde2) / eb_tilde2);
        Ok(SplitSolution::Split(SplittingCoeffs {
            sigma2_t3: t3,
            b: [b1, b2, b3, b4, b5, b6, b7, b8],
            b_star,
            eb_tilde2,
            eb_tilde3,
            eb_bar2,
            eb_bar3,
            eb_bar4,
            r1,
            r2,
            r21,
            r22: r2 - r21,
        }))
    }

    /// `σ²_T3` placing the first description at rate `target`.
    pub fn split_sigma_t3(&self, target: f64) -> Result<SplitPoint> {
        let (v1, v2) = self.vertices();
        let (lo, hi) = (v1.r1, v2.r1);
        let slack = 1e-12 * hi.abs().max(1.0);
        if hi - lo <= slack {
            if (target - lo).abs() <= slack {
                return Ok(SplitPoint { sigma2_t3: SplitVariance::Finite(0.0), method: SplitMethod::Indifferent });
            }
            return Err(MdqError::RateOutOfRange { target, lo, hi });
        }
        if target < lo - slack || target > hi + slack || !target.is_finite() {
            return Err(MdqError::RateOutOfRange { target, lo, hi });
        }
        if (target - hi).abs() <= slack {
            return Ok(SplitPoint { sigma2_t3: SplitVariance::Finite(0.0), method: SplitMethod::Endpoint });
        }
        if (target - lo).abs() <= slack {
            return Ok(SplitPoint { sigma2_t3: SplitVariance::Infinite, method: SplitMethod::Endpoint });
        }
        let (s1, s2) = self.sig();
        let (v, t0, t1, t2) = (self.var(), self.t0, self.t1, self.t2);
        let g = (2.0 * target).exp2();
        let num = t0 * (s1 + s2) * (s1 + s2) * g - (t0 + t2) * (v + t0 + t1);
        let den = v + t0 + t1 - g * (t0 + t1);
        if den.abs() > 1e-10 {
            let t3 = (num / den).max(0.0);
            if (self.r1_of(SplitVariance::Finite(t3)) - target).abs() <= 1e-10 {
                return Ok(SplitPoint { sigma2_t3: SplitVariance::Finite(t3), method: SplitMethod::ClosedForm });
            }
        }
        Ok(SplitPoint { sigma2_t3: SplitVariance::Finite(self.bisect_t3(target)), method: SplitMethod::Bisection })
    }

    /// Bisection in `ln(1 + σ²_T3)`, where `R₁` is decreasing.
    fn bisect_t3(&self, target: f64) -> f64 {
        let f = |u: f64| self.r1_of(SplitVariance::Finite(u.exp_m1())) - target;
        let (mut a, mut b) = (0.0, 1.0);
        while f(b) > 0.0 && b < 700.0 {
            b *= 2.0;
        }
        for _ in 0..400 {
            let m = 0.5 * (a + b);
            if f(m) > 0.0 {
                a = m;
            } else {
                b = m;
            }
            if (f(m)).abs() < 1e-13 {
                return m.exp_m1();
            }
        }
        (0.5 * (a + b)).exp_m1()
    }

    /// Split with `R₁ = R₂`.
    pub fn balanced_sigma_t3(&self) -> Result<SplitPoint> {
        self.split_sigma_t3(0.5 * self.sum_rate())
    }

    /// Resolve a rate-split request to a point on the dominant face.
    pub fn resolve(&self, target: RateTarget) -> Result<SplitPoint> {
        match target {
            RateTarget::Vertex(1) => Ok(SplitPoint { sigma2_t3: SplitVariance::Infinite, method: SplitMethod::Endpoint }),
            RateTarget::Vertex(2) => Ok(SplitPoint { sigma2_t3: SplitVariance::Finite(0.0), method: SplitMethod::Endpoint }),
            RateTarget::Vertex(k) => Err(MdqError::InvalidParameter(format!("vertex must be 1 or 2, got {k}"))),
            RateTarget::Balanced => self.balanced_sigma_t3(),
            RateTarget::R1(r) => self.split_sigma_t3(r),
        }
    }

    pub fn rates_at(&self, t3: SplitVariance) -> RatePair {
        let r1 = self.r1_of(t3);
        RatePair { r1, r2: self.sum_rate() - r1, tag: RateTag::Split { sigma2_t3: t3 } }
    }
}

/// Requested operating point on the dominant face.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateTarget {
    Vertex(u8),
    Balanced,
    R1(f64),
}

/// Vertex rate pairs; both zero for a silent channel.
pub fn vertices(d: &DistortionTriple) -> Result<(RatePair, RatePair)> {
    match test_channel_params(d)? {
        ChannelSolution::Active(c) => Ok(c.vertices()),
        ChannelSolution::Silent => Ok((
            RatePair { r1: 0.0, r2: 0.0, tag: RateTag::Vertex1 },
            RatePair { r1: 0.0, r2: 0.0, tag: RateTag::Vertex2 },
        )),
    }
}

/// Lower bounds on the rates of any source with entropy power `p_x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuterBound {
    pub entropy_power: f64,
    pub phi: f64,
    pub r1_min: f64,
    pub r2_min: f64,
    pub sum_min: f64,
}

pub fn outer_bound_phi(d: &DistortionTriple, p_x: f64) -> Result<OuterBound> {
    d.validate()?;
    if !(p_x > 0.0) || p_x > d.var * (1.0 + 1e-12) {
        return Err(MdqError::InvalidParameter(format!(
            "entropy power {p_x} must lie in (0, var = {}]",
            d.var
        )));
    }
    let phi = psi_piecewise(p_x, d.d1, d.d2, d.d3).max(1.0);
    let pos = |x: f64| half_log2(x).max(0.0);
    Ok(OuterBound {
        entropy_power: p_x,
        phi,
        r1_min: pos(p_x / d.d1),
        r2_min: pos(p_x / d.d2),
        sum_min: pos(p_x / d.d3) + half_log2(phi),
    })
}

/// High-resolution form of `½log₂ϕ`.
pub fn highres_half_log_phi(d: &DistortionTriple, p_x: f64) -> f64 {
    let r = (d.d1 - d.d3).sqrt() + (d.d2 - d.d3).sqrt();
    half_log2(p_x / (r * r))
}

/// One row of the timesharing family for `D₃ = D₁ + D₂ − σ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeshareRow {
    pub gamma: f64,
    pub r1: f64,
    pub r2: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

pub fn timeshare_point(var: f64, d3: f64, gamma: f64) -> Result<TimeshareRow> {
    if !(0.0..=1.0).contains(&gamma) || !(d3 > 0.0 && d3 <= var) {
        return Err(MdqError::InvalidParameter(format!("need gamma in [0,1] and 0 < D3 <= var, got {gamma}, {d3}")));
    }
    let full = half_log2(var / d3);
    Ok(TimeshareRow {
        gamma,
        r1: gamma * full,
        r2: (1.0 - gamma) * full,
        d1: gamma * d3 + (1.0 - gamma) * var,
        d2: (1.0 - gamma) * d3 + gamma * var,
        d3,
    })
}

/// The timesharing weight reaching `(D₁, D₂)` when `D₃ = D₁ + D₂ − σ²`.
pub fn timeshare_for(d: &DistortionTriple) -> Result<TimeshareRow> {
    if !d.is_at_lower_bound() {
        return Err(MdqError::InvalidParameter("timesharing requires D3 = D1 + D2 - var".into()));
    }
    timeshare_point(d.var, d.d3, (d.var - d.d1) / (d.var - d.d3))
}

/// Every parameter of one operating point, keyed by symbol name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamReport {
    #[serde(rename = "sigma2_X")]
    pub var: f64,
    #[serde(rename = "D1")]
    pub d1: f64,
    #[serde(rename = "D2")]
    pub d2: f64,
    #[serde(rename = "D3")]
    pub d3: f64,
    pub clamp: ClampFlag,
    pub psi: f64,
    pub sum_rate: f64,
    #[serde(rename = "sigma2_T0")]
    pub t0: f64,
    #[serde(rename = "sigma2_T1")]
    pub t1: f64,
    #[serde(rename = "sigma2_T2")]
    pub t2: f64,
    #[serde(rename = "sigma2_T3")]
    pub t3: SplitVariance,
    pub split_method: SplitMethod,
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
    #[serde(rename = "E_T1T2")]
    pub e_t1t2: f64,
    pub error_correlation: f64,
    #[serde(rename = "E_U1U2")]
    pub e_u1u2: f64,
    pub vertex1: RatePair,
    pub vertex2: RatePair,
    pub a1: f64,
    pub a2: f64,
    #[serde(rename = "EB2_sq")]
    pub eb2: f64,
    #[serde(rename = "EB3_sq")]
    pub eb3: f64,
    pub splitting: Option<SplittingReport>,
    #[serde(rename = "R1G")]
    pub r1: f64,
    #[serde(rename = "R2G")]
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplittingReport {
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
    pub b5: f64,
    pub b6: f64,
    pub b7: f64,
    pub b8: f64,
    pub b_star1: f64,
    pub b_star2: f64,
    pub b_star3: f64,
    pub b_star4: f64,
    pub b_star5: f64,
    pub b_star6: f64,
    #[serde(rename = "EB_tilde2_sq")]
    pub eb_tilde2: f64,
    #[serde(rename = "EB_tilde3_sq")]
    pub eb_tilde3: f64,
    #[serde(rename = "EB_bar2_sq")]
    pub eb_bar2: f64,
    #[serde(rename = "EB_bar3_sq")]
    pub eb_bar3: f64,
    #[serde(rename = "EB_bar4_sq")]
    pub eb_bar4: f64,
    #[serde(rename = "R2_1G")]
    pub r21: f64,
    #[serde(rename = "R2_2G")]
    pub r22: f64,
}

impl From<&SplittingCoeffs> for SplittingReport {
    fn from(c: &SplittingCoeffs) -> Self {
        let [b1, b2, b3, b4, b5, b6, b7, b8] = c.b;
        let [s1, s2, s3, s4, s5, s6] = c.b_star;
        Self {
            b1, b2, b3, b4, b5, b6, b7, b8,
            b_star1: s1, b_star2: s2, b_star3: s3, b_star4: s4, b_star5: s5, b_star6: s6,
            eb_tilde2: c.eb_tilde2,
            eb_tilde3: c.eb_tilde3,
            eb_bar2: c.eb_bar2,
            eb_bar3: c.eb_bar3,
            eb_bar4: c.eb_bar4,
            r21: c.r21,
            r22: c.r22,
        }
    }
}

/// Full parameter report for `d` (clamped first) at `target`.
pub fn param_report(d: &DistortionTriple, target: RateTarget) -> Result<ParamReport> {
    let clamped = clamp_degenerate(*d)?;
    let c = test_channel_params(&clamped.triple)?.active()?;
    let point = c.resolve(target)?;
    let (v1, v2) = c.vertices();
    let succ = c.successive_coeffs(Order::FirstThenSecond);
    let splitting = match c.splitting_coeffs(point.sigma2_t3)? {
        SplitSolution::Split(s) => Some(SplittingReport::from(&s)),
        SplitSolution::Successive(_) => None,
    };
    let rates = c.rates_at(point.sigma2_t3);
    let (s1, s2) = c.sig();
    Ok(ParamReport {
        var: clamped.triple.var,
        d1: clamped.triple.d1,
        d2: clamped.triple.d2,
        d3: clamped.triple.d3,
        clamp: clamped.flag,
        psi: c.psi,
        sum_rate: c.sum_rate(),
        t0: c.t0,
        t1: c.t1,
        t2: c.t2,
        t3: point.sigma2_t3,
        split_method: point.method,
        alpha1: c.alpha1,
        alpha2: c.alpha2,
        beta1: c.beta1,
        beta2: c.beta2,
        e_t1t2: -s1 * s2,
        error_correlation: c.error_correlation(),
        e_u1u2: c.cross_moment_u(),
        vertex1: v1,
        vertex2: v2,
        a1: succ.a1,
        a2: succ.a2,
        eb2: succ.eb2,
        eb3: succ.eb3,
        splitting,
        r1: rates.r1,
        r2: rates.r2,
    })
}
