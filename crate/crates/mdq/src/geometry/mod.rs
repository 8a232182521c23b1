//! Exact cell geometry of the undithered scalar scheme.
//!
//! Without dither, every encoder is a uniform partition of a linear function
//! of the source and of earlier reproductions, so each decoder's cells are
//! finite unions of intervals on the source line. The module computes them,
//! integrates a source density over them, and compares the results with the
//! high-resolution closed forms.

pub mod analysis;
pub mod cases;
pub mod density;
pub mod highres;
pub mod partition;
pub mod quad;

pub use analysis::{cell_distortions, cell_rows, CellAnalysis, CellMoments, CellRow, LinearDecoders, Reproduction};
pub use cases::{scalar_analysis, scalar_scheme, B5Choice, ScalarCase, ScalarOptions, ScalarReport, TapChoice};
pub use density::SourcePdf;
pub use highres::{distortion_product_gap, highres_point, solve_balanced_a2, HighResMode, HighResPoint, HighResSpec};
pub use partition::{compute_cells, CellSet, Owner, PartitionCell, Refinement, ScalarScheme, UniformPartition};

use crate::codec::{CodecKind, CodecTopology};
use crate::error::{MdqError, Result};

/// The two-stage successive codec as a scalar scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodecGeometry {
    pub scheme: ScalarScheme,
    pub decoders: LinearDecoders,
    /// The first stage carries description 2, so side decoders swap.
    pub swapped: bool,
}

impl CodecGeometry {
    /// Map `(D_qa, D_qb, D₃)` of the scheme to `(D₁, D₂, D₃)` of the codec.
    pub fn codec_distortions(&self, a: &CellAnalysis) -> (f64, f64, f64) {
        if self.swapped {
            (a.d2, a.d1, a.d3)
        } else {
            (a.d1, a.d2, a.d3)
        }
    }
}

/// Read the steps, taps and decoder gains off a scalar successive topology.
pub fn successive_geometry(topo: &CodecTopology, range_sigmas: f64) -> Result<CodecGeometry> {
    let stage_ok = topo.stages.len() == 2 && topo.stages.iter().all(|s| s.quantizer.is_some());
    if topo.kind != CodecKind::Successive || topo.dim != 1 || !stage_ok {
        return Err(MdqError::InvalidParameter("needs a scalar successive topology with two quantized stages".into()));
    }
    let step = |k: usize| topo.stages[k].quantizer.as_ref().expect("checked").step();
    let s2 = &topo.stages[1];
    let a2 = s2.taps.iter().find(|&&(j, _)| j == 0).map_or(0.0, |&(_, c)| c);
    let sd = topo.channel.var().sqrt();
    let scheme = ScalarScheme::new(
        UniformPartition::midtread(step(0))?,
        UniformPartition::midtread(step(1))?,
        s2.x_tap,
        a2,
        (-range_sigmas * sd, range_sigmas * sd),
        sd,
    )?;
    let swapped = topo.stages[0].description == 2;
    let (ga, gb) = if swapped { (topo.alpha2, topo.alpha1) } else { (topo.alpha1, topo.alpha2) };
    let central = if swapped { (topo.beta2, topo.beta1) } else { (topo.beta1, topo.beta2) };
    Ok(CodecGeometry { scheme, decoders: LinearDecoders { side1: ga, side2: gb, central }, swapped })
}
