//! Conditional-entropy rate estimates for dithered index streams.
//!
//! An ideal entropy coder that knows the dither spends `H(K | Z)` bits per
//! index. The estimator discretizes the dither of each stage into equal bins
//! and returns the plug-in conditional entropy with the Miller–Madow bias
//! correction applied inside every bin.

use super::encode::{DescriptionStreams, StageStream};
use super::topology::CodecTopology;
use crate::error::{MdqError, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub bins: usize,
    pub min_samples: usize,
    /// Stated accuracy at 10⁶ samples, in bits.
    pub tolerance: f64,
    /// Bins per dither for the joint estimate of a two-stage description.
    pub joint_bins: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { bins: 64, min_samples: 100_000, tolerance: 0.02, joint_bins: 8 }
    }
}

/// Entropy in bits of sorted labels, with Miller–Madow correction.
fn entropy_of_runs<T: PartialEq>(sorted: &[T]) -> (f64, usize) {
    let n = sorted.len() as f64;
    if sorted.is_empty() {
        return (0.0, 0);
    }
    let mut h = 0.0;
    let mut support = 0usize;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let p = (j - i) as f64 / n;
        h -= p * p.ln();
        support += 1;
        i = j;
    }
    ((h + (support as f64 - 1.0) / (2.0 * n)) / LN_2, support)
}

/// `Σ_b P(b) H(K | b)` for `(bin, key)` pairs sorted by bin then key.
fn conditional_entropy<K: PartialEq + Copy>(pairs: &[(u32, K)]) -> f64 {
    let n = pairs.len() as f64;
    let mut total = 0.0;
    let mut i = 0;
    let mut keys: Vec<K> = Vec::new();
    while i < pairs.len() {
        let b = pairs[i].0;
        let mut j = i;
        keys.clear();
        while j < pairs.len() && pairs[j].0 == b {
            keys.push(pairs[j].1);
            j += 1;
        }
        let (h, _) = entropy_of_runs(&keys);
        total += (j - i) as f64 / n * h;
        i = j;
    }
    total
}

/// Dither-bin labels for one stream.
fn dither_bins(topo: &CodecTopology, st: &StageStream, bins: usize) -> Result<Vec<u32>> {
    let q = topo.stages[st.stage]
        .quantizer
        .as_ref()
        .ok_or_else(|| MdqError::Format(format!("stage {} has no quantizer", st.stage)))?;
    let mut cur = q.cursor(0);
    Ok((0..st.indices.len())
        .map(|_| ((cur.next_unit() * bins as f64) as usize).min(bins - 1) as u32)
        .collect())
}

/// Estimated `H(index | dither bin)` of one stage, in bits per sample.
pub fn stage_rate(topo: &CodecTopology, st: &StageStream, cfg: &EstimatorConfig) -> Result<f64> {
    let n = st.indices.len();
    if n < cfg.min_samples {
        return Err(MdqError::InsufficientSamples { needed: cfg.min_samples, got: n });
    }
    let bins = dither_bins(topo, st, cfg.bins)?;
    let mut pairs: Vec<(u32, i64)> = bins.into_iter().zip(st.indices.iter().copied()).collect();
    pairs.sort_unstable();
    Ok(conditional_entropy(&pairs))
}

/// Rates of both descriptions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    /// `(stage, bits)` for every quantized stage.
    pub stages: Vec<(usize, u8, f64)>,
    pub r1: f64,
    /// Sum of the description-2 stage rates.
    pub r2: f64,
    /// Joint estimate for a two-stream description 2, when present.
    pub r2_joint: Option<f64>,
    pub tolerance: f64,
}

pub fn measure_rate(topo: &CodecTopology, streams: &DescriptionStreams, cfg: &EstimatorConfig) -> Result<RateEstimate> {
    if streams.n < cfg.min_samples {
        return Err(MdqError::InsufficientSamples { needed: cfg.min_samples, got: streams.n });
    }
    let mut stages = Vec::new();
    let (mut r1, mut r2) = (0.0, 0.0);
    for st in streams.all_streams() {
        let r = stage_rate(topo, st, cfg)?;
        stages.push((st.stage, st.description, r));
        if st.description == 1 {
            r1 += r;
        } else {
            r2 += r;
        }
    }
    stages.sort_by_key(|s| s.0);
    let r2_joint = match streams.desc2.as_deref() {
        Some([a, b]) => Some(joint_rate(topo, a, b, cfg)?),
        _ => None,
    };
    Ok(RateEstimate { stages, r1, r2, r2_joint, tolerance: cfg.tolerance })
}

/// `H(i_a, i_b | coarse bins of both dithers)`.
pub fn joint_rate(topo: &CodecTopology, a: &StageStream, b: &StageStream, cfg: &EstimatorConfig) -> Result<f64> {
    let ba = dither_bins(topo, a, cfg.joint_bins)?;
    let bb = dither_bins(topo, b, cfg.joint_bins)?;
    let nb = cfg.joint_bins as u32;
    let mut pairs: Vec<(u32, (i64, i64))> = (0..a.indices.len())
        .map(|t| (ba[t] * nb + bb[t], (a.indices[t], b.indices[t])))
        .collect();
    pairs.sort_unstable();
    Ok(conditional_entropy(&pairs))
}

/// Plain empirical entropy of a label sequence, bits, with Miller–Madow.
pub fn empirical_entropy(labels: &[i64]) -> f64 {
    let mut v = labels.to_vec();
    v.sort_unstable();
    entropy_of_runs(&v).0
}
