//! Uniform scalar partitions and the interval cells they induce on the line.

use crate::error::{MdqError, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Relative snapping tolerance for computed thresholds.
pub const SNAP: f64 = 1e-12;
/// The analysis range must cover at least this many standard deviations.
pub const MIN_RANGE_SIGMAS: f64 = 6.0;
/// Balanced analyses with `Δa/Δb` below this are flagged.
pub const RATIO_FLAG: f64 = 8.0;

/// Cells `(offset + kΔ, offset + (k+1)Δ]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformPartition {
    pub step: f64,
    pub offset: f64,
}

impl UniformPartition {
    pub fn new(step: f64, offset: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite() && offset.is_finite()) {
            return Err(MdqError::InvalidParameter(format!("partition step {step}, offset {offset}")));
        }
        Ok(Self { step, offset })
    }

    /// Cells centered on the multiples of `step`, as the undithered lattice quantizer.
    pub fn midtread(step: f64) -> Result<Self> {
        Self::new(step, -step / 2.0)
    }

    pub fn index(&self, v: f64) -> i64 {
        ((v - self.offset) / self.step).ceil() as i64 - 1
    }

    pub fn lower(&self, k: i64) -> f64 {
        self.offset + k as f64 * self.step
    }

    pub fn center(&self, k: i64) -> f64 {
        self.offset + (k as f64 + 0.5) * self.step
    }
}

/// The refinement encoder `q_c` applied to `r = b₃x + b₄t + b₅y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub b3: f64,
    pub b4: f64,
    pub b5: f64,
    pub qc: UniformPartition,
}

/// Undithered scalar scheme: `y = q_a(x)`, `t = q_b(a₁x + a₂y)` and
/// optionally `q_c(b₃x + b₄t + b₅y)`, analyzed on `(lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarScheme {
    pub qa: UniformPartition,
    pub qb: UniformPartition,
    pub a1: f64,
    pub a2: f64,
    pub refinement: Option<Refinement>,
    pub range: (f64, f64),
    /// Source standard deviation the range is measured against.
    pub sigma: f64,
}

impl ScalarScheme {
    pub fn new(qa: UniformPartition, qb: UniformPartition, a1: f64, a2: f64, range: (f64, f64), sigma: f64) -> Result<Self> {
        if a2 > 0.0 {
            return Err(MdqError::InvalidParameter(format!("tap a2 = {a2} > 0 breaks the staircase geometry")));
        }
        if !(a1 > 0.0 && a1.is_finite() && a2.is_finite()) {
            return Err(MdqError::InvalidParameter(format!("tap a1 = {a1} must be positive")));
        }
        if !(sigma > 0.0) || range.0 > -MIN_RANGE_SIGMAS * sigma || range.1 < MIN_RANGE_SIGMAS * sigma {
            return Err(MdqError::InvalidParameter(format!(
                "analysis range ({}, {}] does not cover ±{MIN_RANGE_SIGMAS}σ with σ = {sigma}",
                range.0, range.1
            )));
        }
        Ok(Self { qa, qb, a1, a2, refinement: None, range, sigma })
    }

    pub fn with_refinement(mut self, r: Refinement) -> Result<Self> {
        if !(r.b3 > 0.0 && r.b3.is_finite() && r.b4.is_finite() && r.b5.is_finite()) {
            return Err(MdqError::InvalidParameter(format!("refinement tap b3 = {} must be positive", r.b3)));
        }
        self.refinement = Some(r);
        Ok(self)
    }

    pub fn ratio(&self) -> f64 {
        self.qa.step / self.qb.step
    }

    pub fn low_ratio(&self) -> bool {
        self.ratio() < RATIO_FLAG
    }

    fn eps(&self) -> f64 {
        SNAP * (self.range.1 - self.range.0)
    }

    /// The finest common refinement of all encoders: consecutive intervals on
    /// which every index is constant, in increasing order.
    pub fn atoms(&self) -> Vec<Atom> {
        let (lo, hi) = self.range;
        let eps = self.eps();
        let mut out = Vec::new();
        for ia in self.qa.index(lo)..=self.qa.index(hi) {
            let la = self.qa.lower(ia).max(lo);
            let ha = self.qa.lower(ia + 1).min(hi);
            if ha - la <= eps {
                continue;
            }
            let y = self.qa.center(ia);
            let s_of = |x: f64| self.a1 * x + self.a2 * y;
            let first = out.len();
            let mut start = la;
            for j in self.qb.index(s_of(la))..=self.qb.index(s_of(ha)) {
                let end = snap((self.qb.lower(j + 1) - self.a2 * y) / self.a1, start, ha, eps).min(ha);
                if end - start <= eps {
                    continue;
                }
                let t = self.qb.center(j);
                match &self.refinement {
                    None => out.push(Atom { lo: start, hi: end, ia, j, ic: None }),
                    Some(r) => {
                        let r_of = |x: f64| r.b3 * x + r.b4 * t + r.b5 * y;
                        let piece = out.len();
                        let mut s2 = start;
                        for ic in r.qc.index(r_of(start))..=r.qc.index(r_of(end)) {
                            let e2 = snap((r.qc.lower(ic + 1) - r.b4 * t - r.b5 * y) / r.b3, s2, end, eps).min(end);
                            if e2 - s2 > eps {
                                out.push(Atom { lo: s2, hi: e2, ia, j, ic: Some(ic) });
                                s2 = e2;
                            }
                        }
                        if out.len() == piece {
                            let ic = r.qc.index(r_of((start + end) / 2.0));
                            out.push(Atom { lo: start, hi: end, ia, j, ic: Some(ic) });
                        }
                        out.last_mut().expect("piece has an atom").hi = end;
                    }
                }
                start = end;
            }
            if out.len() > first {
                out.last_mut().expect("cell has an atom").hi = ha;
            }
        }
        out
    }
}

fn snap(v: f64, lo: f64, hi: f64, eps: f64) -> f64 {
    if (v - lo).abs() <= eps {
        lo
    } else if (v - hi).abs() <= eps {
        hi
    } else {
        v
    }
}

/// An interval `(lo, hi]` on which `(i_a, j, i_c)` is constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub lo: f64,
    pub hi: f64,
    pub ia: i64,
    pub j: i64,
    pub ic: Option<i64>,
}

/// Which decoder a cell belongs to and its index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Owner {
    /// `C_x(i_a)`: what the `q_a` decoder knows.
    X(i64),
    /// `C_s(j)`: what the `q_b` decoder knows.
    S(i64),
    /// `C_xr(i_a, i_c)`: the `q_a` decoder once `q_c` is added.
    Xr(i64, i64),
    /// Both descriptions.
    Central(i64, i64, Option<i64>),
}

impl Owner {
    pub fn class(&self) -> &'static str {
        match self {
            Self::X(_) => "C_x",
            Self::S(_) => "C_s",
            Self::Xr(..) => "C_xr",
            Self::Central(..) => "central",
        }
    }

    pub fn index_label(&self) -> String {
        match self {
            Self::X(i) | Self::S(i) => i.to_string(),
            Self::Xr(a, c) => format!("{a}:{c}"),
            Self::Central(a, j, Some(c)) => format!("{a}:{j}:{c}"),
            Self::Central(a, j, None) => format!("{a}:{j}"),
        }
    }
}

/// A union of disjoint half-open intervals, sorted, with its midpoint reproduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionCell {
    pub owner: Owner,
    pub intervals: Vec<(f64, f64)>,
    /// Uniform centroid of the union.
    pub midpoint: f64,
    /// Some constituent segment is cut short by a `q_a` boundary or the range.
    pub border: bool,
}

impl PartitionCell {
    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }
}

/// The cells of the three decoders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSet {
    pub scheme: ScalarScheme,
    /// `C_x` cells, or `C_xr` cells when `q_c` is present.
    pub side1: Vec<PartitionCell>,
    pub side2: Vec<PartitionCell>,
    pub central: Vec<PartitionCell>,
}

/// Compute every cell of every decoder over the analysis range.
pub fn compute_cells(scheme: &ScalarScheme) -> CellSet {
    let atoms = scheme.atoms();
    let eps = scheme.eps();
    let full_s = scheme.qb.step / scheme.a1;
    let full_r = scheme.refinement.map(|r| r.qc.step / r.b3);
    let side1_owner = |a: &Atom| match a.ic {
        Some(c) => Owner::Xr(a.ia, c),
        None => Owner::X(a.ia),
    };
    let side1_full = full_r.unwrap_or(scheme.qa.step);
    let central_full = full_r.unwrap_or(full_s).min(full_s);
    CellSet {
        scheme: *scheme,
        side1: group(&atoms, side1_owner, side1_full, eps),
        side2: group(&atoms, |a| Owner::S(a.j), full_s, eps),
        central: group(&atoms, |a| Owner::Central(a.ia, a.j, a.ic), central_full, eps),
    }
}

/// Collect atoms by owner. A segment is a run of atoms inside one `q_a`
/// cell; the cell is on the border when a segment is shorter than `full`.
fn group(atoms: &[Atom], owner: impl Fn(&Atom) -> Owner, full: f64, eps: f64) -> Vec<PartitionCell> {
    let mut runs: BTreeMap<Owner, Vec<(f64, f64, i64)>> = BTreeMap::new();
    for a in atoms {
        let v = runs.entry(owner(a)).or_default();
        match v.last_mut() {
            Some(last) if last.2 == a.ia && (a.lo - last.1).abs() <= eps => last.1 = a.hi,
            _ => v.push((a.lo, a.hi, a.ia)),
        }
    }
    runs.into_iter()
        .map(|(owner, segs)| {
            let border = segs.iter().any(|s| s.1 - s.0 < full * (1.0 - 1e-9) - eps);
            let mut intervals: Vec<(f64, f64)> = Vec::with_capacity(segs.len());
            for (lo, hi, _) in segs {
                match intervals.last_mut() {
                    Some(last) if (lo - last.1).abs() <= eps => last.1 = hi,
                    _ => intervals.push((lo, hi)),
                }
            }
            let m: f64 = intervals.iter().map(|(a, b)| b - a).sum();
            let midpoint = intervals.iter().map(|(a, b)| (b - a) * (a + b) / 2.0).sum::<f64>() / m;
            PartitionCell { owner, intervals, midpoint, border }
        })
        .collect()
}
