//! Per-cell integrals: probability, reproduction, distortion and index entropies.

use super::density::SourcePdf;
use super::partition::{CellSet, Owner, PartitionCell};
use super::quad::integrate;
use crate::error::{MdqError, Result};
use crate::exec::{map_items, ExecMode};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Integration tolerance per unit variance, spread over the range.
pub const QUAD_TOL: f64 = 1e-12;
/// Probability outside the range above which overload is flagged.
pub const OUTSIDE_MASS_WARN: f64 = 1e-6;

/// Gains of the undithered codec's linear decoders on `y` and `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearDecoders {
    pub side1: f64,
    pub side2: f64,
    pub central: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Reproduction {
    /// Uniform centroid of the cell.
    #[default]
    Midpoint,
    /// Conditional mean under the source density.
    Centroid,
    /// Linear functions of the quantized values.
    Linear(LinearDecoders),
}

impl std::str::FromStr for Reproduction {
    type Err = MdqError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "midpoint" => Ok(Self::Midpoint),
            "centroid" => Ok(Self::Centroid),
            _ => Err(MdqError::InvalidParameter(format!("unknown reproduction mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMoments {
    pub owner: Owner,
    pub intervals: usize,
    pub measure: f64,
    pub border: bool,
    pub mass: f64,
    /// Conditional mean of the source on the cell.
    pub mean: f64,
    pub reproduction: f64,
    /// `∫ (x − rep)² p(x) dx` over the cell.
    pub distortion: f64,
}

/// Distortions and index entropies of the three decoders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellAnalysis {
    pub reproduction: Reproduction,
    /// Decoder holding `q_a` (and `q_c`).
    pub d1: f64,
    /// Decoder holding `q_b`.
    pub d2: f64,
    pub d3: f64,
    /// Entropy of the description-1 index, bits.
    pub h1: f64,
    /// Entropy of the `q_b` index, bits.
    pub h2: f64,
    /// Entropy of the `q_a` index alone, bits.
    pub h_qa: f64,
    pub outside_mass: f64,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub side1: Vec<CellMoments>,
    #[serde(skip)]
    pub side2: Vec<CellMoments>,
    #[serde(skip)]
    pub central: Vec<CellMoments>,
}

/// Integrate every cell of `cells` against `pdf`.
pub fn cell_distortions(cells: &CellSet, pdf: &SourcePdf, mode: Reproduction, exec: ExecMode) -> Result<CellAnalysis> {
    let scheme = &cells.scheme;
    if matches!(mode, Reproduction::Linear(_)) && scheme.refinement.is_some() {
        return Err(MdqError::InvalidParameter("linear decoders are defined for the two-encoder scheme only".into()));
    }
    let (lo, hi) = scheme.range;
    let tol = QUAD_TOL * pdf.var() / (hi - lo);
    let kinks = pdf.kinks();
    let linear_rep = |o: &Owner| -> Option<f64> {
        let Reproduction::Linear(g) = mode else { return None };
        Some(match *o {
            Owner::X(ia) => g.side1 * scheme.qa.center(ia),
            Owner::S(j) => g.side2 * scheme.qb.center(j),
            Owner::Central(ia, j, _) => g.central.0 * scheme.qa.center(ia) + g.central.1 * scheme.qb.center(j),
            Owner::Xr(..) => unreachable!("rejected above"),
        })
    };
    let run = |v: &[PartitionCell]| -> Vec<CellMoments> {
        map_items(v.to_vec(), exec, |c| {
            let x0 = c.midpoint;
            let mut m = [0.0; 3];
            for &(a, b) in &c.intervals {
                let mut cuts = vec![a];
                cuts.extend(kinks.iter().copied().filter(|&k| k > a && k < b));
                cuts.push(b);
                for w in cuts.windows(2) {
                    let f = |x: f64| {
                        let p = pdf.pdf(x);
                        let u = x - x0;
                        [p, u * p, u * u * p]
                    };
                    let r = integrate(&f, w[0], w[1], tol * (w[1] - w[0]));
                    for k in 0..3 {
                        m[k] += r[k];
                    }
                }
            }
            let rep = match mode {
                Reproduction::Midpoint => x0,
                Reproduction::Centroid if m[0] > 0.0 => x0 + m[1] / m[0],
                Reproduction::Centroid => x0,
                Reproduction::Linear(_) => linear_rep(&c.owner).expect("linear mode"),
            };
            let d = rep - x0;
            CellMoments {
                owner: c.owner,
                intervals: c.intervals.len(),
                measure: c.measure(),
                border: c.border,
                mass: m[0],
                mean: if m[0] > 0.0 { x0 + m[1] / m[0] } else { x0 },
                reproduction: rep,
                distortion: (m[2] - 2.0 * d * m[1] + d * d * m[0]).max(0.0),
            }
        })
    };
    let side1 = run(&cells.side1);
    let side2 = run(&cells.side2);
    let central = run(&cells.central);
    let total = |v: &[CellMoments]| v.iter().map(|c| c.distortion).sum::<f64>();
    let mut by_qa: BTreeMap<i64, f64> = BTreeMap::new();
    for c in &side1 {
        let ia = match c.owner {
            Owner::X(i) | Owner::Xr(i, _) => i,
            _ => unreachable!("side-1 owners"),
        };
        *by_qa.entry(ia).or_default() += c.mass;
    }
    let outside_mass = pdf.cdf(lo) + (1.0 - pdf.cdf(hi));
    let mut warnings = Vec::new();
    if outside_mass > OUTSIDE_MASS_WARN {
        warnings.push(format!("probability {outside_mass:e} outside the analysis range; overload distortion is not modeled"));
    }
    if scheme.low_ratio() {
        warnings.push(format!("step ratio Δa/Δb = {:.3} is below {}", scheme.ratio(), super::partition::RATIO_FLAG));
    }
    Ok(CellAnalysis {
        reproduction: mode,
        d1: total(&side1),
        d2: total(&side2),
        d3: total(&central),
        h1: entropy(side1.iter().map(|c| c.mass)),
        h2: entropy(side2.iter().map(|c| c.mass)),
        h_qa: entropy(by_qa.into_values()),
        outside_mass,
        warnings,
        side1,
        side2,
        central,
    })
}

pub fn entropy(p: impl Iterator<Item = f64>) -> f64 {
    p.filter(|&v| v > 0.0).map(|v| -v * v.log2()).sum()
}

/// Share of `C_s` cells made of three or more intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassFractions {
    pub by_count: f64,
    pub by_measure: f64,
    pub by_probability: f64,
    pub cells: usize,
}

/// Three-interval fractions over all `C_s` cells and over non-border ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreeIntervalShare {
    pub all: ClassFractions,
    pub border_excluded: ClassFractions,
}

pub fn three_interval_share(side2: &[CellMoments]) -> ThreeIntervalShare {
    let frac = |keep: &dyn Fn(&CellMoments) -> bool| {
        let v: Vec<&CellMoments> = side2.iter().filter(|c| keep(c) && c.mass > 0.0).collect();
        let three: Vec<&&CellMoments> = v.iter().filter(|c| c.intervals >= 3).collect();
        let sum = |w: &[&&CellMoments], f: &dyn Fn(&CellMoments) -> f64| w.iter().map(|c| f(c)).sum::<f64>();
        let all: Vec<&&CellMoments> = v.iter().collect();
        ClassFractions {
            by_count: three.len() as f64 / v.len().max(1) as f64,
            by_measure: sum(&three, &|c| c.measure) / sum(&all, &|c| c.measure),
            by_probability: sum(&three, &|c| c.mass) / sum(&all, &|c| c.mass),
            cells: v.len(),
        }
    };
    ThreeIntervalShare { all: frac(&|_| true), border_excluded: frac(&|c| !c.border) }
}

/// Side-2 distortion ratio over non-border `C_s` cells, renormalized by mass.
pub fn d2_over_d1_border_excluded(a: &CellAnalysis) -> f64 {
    let kept: Vec<&CellMoments> = a.side2.iter().filter(|c| !c.border).collect();
    let mass: f64 = kept.iter().map(|c| c.mass).sum();
    let d: f64 = kept.iter().map(|c| c.distortion).sum();
    d / mass / a.d1
}

/// One CSV row of the cell dump.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellRow {
    pub decoder: u8,
    pub owner: &'static str,
    pub index: String,
    pub intervals: String,
    pub reproduction: f64,
    pub mass: f64,
    pub distortion: f64,
    pub border: bool,
}

/// Rows for every cell, joined with its intervals.
pub fn cell_rows(cells: &CellSet, a: &CellAnalysis) -> Vec<CellRow> {
    let mut out = Vec::new();
    for (dec, geo, mom) in [(1u8, &cells.side1, &a.side1), (2, &cells.side2, &a.side2), (3, &cells.central, &a.central)] {
        for (g, m) in geo.iter().zip(mom) {
            out.push(CellRow {
                decoder: dec,
                owner: g.owner.class(),
                index: g.owner.index_label(),
                intervals: g.intervals.iter().map(|(l, h)| format!("{l:.12e}:{h:.12e}")).collect::<Vec<_>>().join(";"),
                reproduction: m.reproduction,
                mass: m.mass,
                distortion: m.distortion,
                border: g.border,
            });
        }
    }
    out
}
