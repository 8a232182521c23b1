//! The staircase case studies: staggered and fine-step two-encoder schemes
//! and the balanced three-encoder construction.

use super::analysis::{cell_distortions, d2_over_d1_border_excluded, three_interval_share, CellAnalysis, Reproduction, ThreeIntervalShare};
use super::density::SourcePdf;
use super::highres::{
    distortion_product_gap, highres_point, mdsq_reference_gap, rate2_closed_form, solve_balanced_a2, step_b_for_rate, step_for_rate,
    three_segment_fraction, HighResMode, HighResPoint,
};
use super::partition::{compute_cells, CellSet, Refinement, ScalarScheme, UniformPartition};
use crate::error::{MdqError, Result};
use crate::exec::ExecMode;
use serde::{Deserialize, Serialize};

/// Refinement tap with the constant shift of the `r` partition.
pub const NOMINAL_B5: f64 = 2.9555;
/// Default half-width of the analysis range, in standard deviations.
pub const RANGE_SIGMAS: f64 = 8.0;
/// Default `Δa/Δb` of the fine-step case.
pub const FINE_RATIO: f64 = 64.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarCase {
    /// `Δa = Δb`, thresholds staggered by half a step.
    Staggered,
    /// `Δa = FINE_RATIO·Δb`, aligned thresholds.
    FineStep,
    /// Three encoders at equal description rates.
    Balanced,
}

impl std::str::FromStr for ScalarCase {
    type Err = MdqError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig8a" | "staggered" => Ok(Self::Staggered),
            "fig8b" | "fine-step" => Ok(Self::FineStep),
            "balanced" => Ok(Self::Balanced),
            _ => Err(MdqError::InvalidParameter(format!("unknown scalar case {s:?}"))),
        }
    }
}

/// How the balancing tap `a₂` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TapChoice {
    /// Root of the high-resolution balance cubic.
    #[default]
    Asymptotic,
    /// Bisection on the exact integrals so that `D₂ = D₁` at the design steps.
    Calibrated,
}

/// How the refinement tap `b₅` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum B5Choice {
    /// Least-squares zero of `E(r | q_a)` over all `q_a` cells.
    #[default]
    Refined,
    Nominal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarOptions {
    pub reproduction: Reproduction,
    /// Rate of `q_a` in the balanced case; half the rate when `None`.
    pub r1a: Option<f64>,
    pub tap: TapChoice,
    pub b5: B5Choice,
    pub ratio: f64,
    pub range_sigmas: f64,
    pub exec: ExecMode,
}

impl Default for ScalarOptions {
    fn default() -> Self {
        Self {
            reproduction: Reproduction::Midpoint,
            r1a: None,
            tap: TapChoice::Asymptotic,
            b5: B5Choice::Refined,
            ratio: FINE_RATIO,
            range_sigmas: RANGE_SIGMAS,
            exec: ExecMode::Parallel,
        }
    }
}

/// Product gaps of a measured operating point under three rate/side conventions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// `D₁`, `D₃` at the design rate.
    pub design: f64,
    /// Mean side distortion at the design rate.
    pub side_mean: f64,
    /// Mean side distortion at the mean measured index entropy.
    pub measured_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarReport {
    pub case: ScalarCase,
    pub rate: f64,
    pub scheme: ScalarScheme,
    pub ratio: f64,
    pub analysis: CellAnalysis,
    pub d3_over_d1: f64,
    pub d2_over_d1: f64,
    pub d2_over_d1_border_excluded: f64,
    pub three_interval: ThreeIntervalShare,
    pub three_interval_predicted: f64,
    /// Closed-form `q_b` rate at the scheme's steps.
    pub rate2_closed_form: f64,
    pub predicted: HighResPoint,
    pub gap: GapReport,
    pub mdsq_gap: f64,
}

/// A case at `rate` bits, returning the scheme and its predicted point.
pub fn scalar_scheme(case: ScalarCase, rate: f64, var: f64, opts: &ScalarOptions) -> Result<(ScalarScheme, HighResPoint)> {
    let sd = var.sqrt();
    let range = (-opts.range_sigmas * sd, opts.range_sigmas * sd);
    let h = SourcePdf::Gaussian { var }.entropy_bits();
    match case {
        ScalarCase::Staggered => {
            let d = step_for_rate(rate, var);
            let s = ScalarScheme::new(UniformPartition::midtread(d)?, UniformPartition::new(d, 0.0)?, 2.0, -1.0, range, sd)?;
            let mut p = highres_point(HighResMode::Successive, rate, rate, var);
            p.d2 = p.d1;
            p.d3 = p.d1 / 4.0;
            p.gap_db = distortion_product_gap(p.d1, p.d3, rate, var);
            Ok((s, p))
        }
        ScalarCase::FineStep => {
            let da = step_for_rate(rate, var);
            let db = da / opts.ratio;
            let s = ScalarScheme::new(UniformPartition::midtread(da)?, UniformPartition::new(db, 0.0)?, 2.0, -1.0, range, sd)?;
            Ok((s, highres_point(HighResMode::Successive, rate, rate2_closed_form(db, -1.0, h), var)))
        }
        ScalarCase::Balanced => {
            let r1a = opts.r1a.unwrap_or(rate / 2.0);
            if !(r1a > 0.0 && r1a < rate) {
                return Err(MdqError::InvalidParameter(format!("q_a rate {r1a} must lie in (0, {rate})")));
            }
            let pdf = SourcePdf::Gaussian { var };
            let a2 = match opts.tap {
                TapChoice::Asymptotic => solve_balanced_a2(),
                TapChoice::Calibrated => calibrate_a2(rate, r1a, var, range, opts)?,
            };
            let base = two_encoder(rate, r1a, a2, var, range)?;
            let b5 = match opts.b5 {
                B5Choice::Refined => refined_b5(&base, 2.0, -1.0, &pdf, opts.exec)?,
                B5Choice::Nominal => NOMINAL_B5,
            };
            let db = base.qb.step;
            let qc = UniformPartition::new(db * 2f64.powf(r1a - rate), -db / 2.0)?;
            let s = base.with_refinement(Refinement { b3: 2.0, b4: -1.0, b5, qc })?;
            Ok((s, highres_point(HighResMode::SplittingBalanced, rate, r1a, var)))
        }
    }
}

fn two_encoder(rate: f64, r1a: f64, a2: f64, var: f64, range: (f64, f64)) -> Result<ScalarScheme> {
    let h = SourcePdf::Gaussian { var }.entropy_bits();
    let qa = UniformPartition::midtread(step_for_rate(r1a, var))?;
    let qb = UniformPartition::new(step_b_for_rate(rate, a2, h), 0.0)?;
    ScalarScheme::new(qa, qb, 2.0, a2, range, var.sqrt())
}

/// `a₂ ∈ (−4/3, −1)` where the exact side distortions of the two-encoder
/// scheme agree, with `Δb` following the closed-form rate.
fn calibrate_a2(rate: f64, r1a: f64, var: f64, range: (f64, f64), opts: &ScalarOptions) -> Result<f64> {
    let pdf = SourcePdf::Gaussian { var };
    let excess = |a2: f64| -> Result<f64> {
        let s = two_encoder(rate, r1a, a2, var, range)?;
        let a = cell_distortions(&compute_cells(&s), &pdf, opts.reproduction, opts.exec)?;
        Ok(a.d2 - a.d1)
    };
    let (mut lo, mut hi) = (-4.0 / 3.0, -1.0);
    if excess(lo)? < 0.0 || excess(hi)? > 0.0 {
        return Err(MdqError::Degenerate("side distortions do not cross on (-4/3, -1)".into()));
    }
    while hi - lo > 1e-7 {
        let m = 0.5 * (lo + hi);
        if excess(m)? > 0.0 {
            lo = m;
        } else {
            hi = m;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `b₅` minimizing `Σ_i P(i)·E(b₃x + b₄t + b₅y | q_a = i)²`.
pub fn refined_b5(base: &ScalarScheme, b3: f64, b4: f64, pdf: &SourcePdf, exec: ExecMode) -> Result<f64> {
    let a = cell_distortions(&compute_cells(base), pdf, Reproduction::Midpoint, exec)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for c in &a.central {
        if let super::partition::Owner::Central(ia, j, _) = c.owner {
            let y = base.qa.center(ia);
            let t = base.qb.center(j);
            num += y * c.mass * (b3 * c.mean + b4 * t);
            den += y * y * c.mass;
        }
    }
    if den <= 0.0 {
        return Err(MdqError::Degenerate("no q_a cell away from the origin".into()));
    }
    Ok(-num / den)
}

/// Build, integrate and summarize one case.
pub fn scalar_analysis(case: ScalarCase, rate: f64, var: f64, opts: &ScalarOptions) -> Result<(CellSet, ScalarReport)> {
    let (scheme, predicted) = scalar_scheme(case, rate, var, opts)?;
    let cells = compute_cells(&scheme);
    let analysis = cell_distortions(&cells, &SourcePdf::Gaussian { var }, opts.reproduction, opts.exec)?;
    let h = SourcePdf::Gaussian { var }.entropy_bits();
    let measured = 0.5 * (analysis.h1 + analysis.h2);
    let side = 0.5 * (analysis.d1 + analysis.d2);
    let report = ScalarReport {
        case,
        rate,
        scheme,
        ratio: scheme.ratio(),
        d3_over_d1: analysis.d3 / analysis.d1,
        d2_over_d1: analysis.d2 / analysis.d1,
        d2_over_d1_border_excluded: d2_over_d1_border_excluded(&analysis),
        three_interval: three_interval_share(&analysis.side2),
        three_interval_predicted: three_segment_fraction(scheme.a2),
        rate2_closed_form: rate2_closed_form(scheme.qb.step, scheme.a2, h),
        predicted,
        gap: GapReport {
            design: distortion_product_gap(analysis.d1, analysis.d3, rate, var),
            side_mean: distortion_product_gap(side, analysis.d3, rate, var),
            measured_rate: distortion_product_gap(side, analysis.d3, measured, var),
        },
        mdsq_gap: mdsq_reference_gap(rate),
        analysis,
    };
    Ok((cells, report))
}
