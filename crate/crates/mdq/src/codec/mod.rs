//! Two-description codecs built from dithered quantizers.
//!
//! [`topology::build`] wires one of four encoders at a point of the dominant
//! face: successive quantization, successive quantization with splitting of
//! description 2, separate quantization, and the splitting codec rewritten to
//! reuse a single base quantizer. [`encode::encode`] produces the two index
//! streams, and the three linear decoders in [`encode`] rebuild the side and
//! central reconstructions from whatever streams arrived.

pub mod arith;
pub mod chain;
pub mod encode;
pub mod rate;
pub mod stream;
pub mod topology;

pub use encode::{
    decode, decode_central, decode_side1, decode_side2, description_variables, encode, Decoder, DescriptionStreams,
    Encoded, StageStream,
};
pub use rate::{measure_rate, EstimatorConfig, RateEstimate};
pub use topology::{build, CodecKind, CodecTopology, Stage};

use crate::error::{MdqError, Result};
use crate::exec::ExecMode;
use serde::Serialize;

/// Mean squared error between two equal-length sequences.
pub fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len().max(1) as f64
}

/// One coded block of source samples with whatever decoders could run.
#[derive(Debug, Clone, Serialize)]
pub struct SimBatch {
    pub n: usize,
    #[serde(skip)]
    pub x: Vec<f64>,
    #[serde(skip)]
    pub xhat1: Option<Vec<f64>>,
    #[serde(skip)]
    pub xhat2: Option<Vec<f64>>,
    #[serde(skip)]
    pub xhat3: Option<Vec<f64>>,
    pub rates: Option<RateEstimate>,
    pub d1: Option<f64>,
    pub d2: Option<f64>,
    pub d3: Option<f64>,
}

impl SimBatch {
    /// Decode `streams` with every decoder whose inputs arrived.
    pub fn from_streams(topo: &CodecTopology, x: Vec<f64>, streams: &DescriptionStreams, rates: Option<RateEstimate>, mode: ExecMode) -> Result<Self> {
        if x.len() != streams.n {
            return Err(MdqError::InvalidParameter("source and stream lengths differ".into()));
        }
        let attempt = |which| match decode(topo, streams, which, mode) {
            Ok(v) => Ok(Some(v)),
            Err(MdqError::ChannelFailure(_)) => Ok(None),
            Err(e) => Err(e),
        };
        let xhat1 = attempt(Decoder::Side1)?;
        let xhat2 = attempt(Decoder::Side2)?;
        let xhat3 = attempt(Decoder::Central)?;
        let dist = |r: &Option<Vec<f64>>| r.as_ref().map(|r| mse(&x, r));
        Ok(Self { n: x.len(), d1: dist(&xhat1), d2: dist(&xhat2), d3: dist(&xhat3), x, xhat1, xhat2, xhat3, rates })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

/// Encode, estimate rates when there are enough samples, and decode.
pub fn simulate_batch(topo: &CodecTopology, x: Vec<f64>, cfg: &EstimatorConfig, mode: ExecMode) -> Result<SimBatch> {
    let enc = encode(topo, &x, mode)?;
    let rates = if x.len() >= cfg.min_samples { Some(measure_rate(topo, &enc.streams, cfg)?) } else { None };
    SimBatch::from_streams(topo, x, &enc.streams, rates, mode)
}
