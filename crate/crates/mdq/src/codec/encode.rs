use super::topology::{CodecKind, CodecTopology};
use crate::error::{MdqError, Result};
use crate::exec::{map_chunks, ExecMode, CHUNK};
use crate::lattice::INDEX_LIMIT;

/// Index stream of one quantized stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageStream {
    pub stage: usize,
    pub description: u8,
    pub stream_id: u64,
    pub indices: Vec<i64>,
}

/// What the two channels carry. A `None` description models a failed channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DescriptionStreams {
    pub kind: CodecKind,
    pub seed: u64,
    pub n: usize,
    pub fingerprint: [u8; 32],
    pub desc1: Option<Vec<StageStream>>,
    pub desc2: Option<Vec<StageStream>>,
}

impl DescriptionStreams {
    pub fn description(&self, d: u8) -> Option<&[StageStream]> {
        match d {
            1 => self.desc1.as_deref(),
            2 => self.desc2.as_deref(),
            _ => None,
        }
    }

    /// Drop description `d`, as if its channel failed.
    pub fn lose(mut self, d: u8) -> Self {
        match d {
            1 => self.desc1 = None,
            2 => self.desc2 = None,
            _ => {}
        }
        self
    }

    pub fn all_streams(&self) -> impl Iterator<Item = &StageStream> {
        self.desc1.iter().flatten().chain(self.desc2.iter().flatten())
    }
}

/// Encoder output: the channel streams plus every stage's reproduction.
#[derive(Debug, Clone)]
pub struct Encoded {
    pub streams: DescriptionStreams,
    /// `outputs[k][t]` is `W_k` at time `t`.
    pub outputs: Vec<Vec<f64>>,
}

struct ChunkOut {
    indices: Vec<Vec<i64>>,
    outputs: Vec<Vec<f64>>,
}

fn encode_chunk(topo: &CodecTopology, x: &[f64], range: std::ops::Range<usize>) -> Result<ChunkOut> {
    let m = topo.stages.len();
    let len = range.len();
    let mut cursors: Vec<_> = topo.stages.iter().map(|s| s.quantizer.as_ref().map(|q| q.cursor(range.start as u64))).collect();
    let mut indices: Vec<Vec<i64>> = topo.stages.iter().map(|s| if s.quantizer.is_some() { Vec::with_capacity(len) } else { Vec::new() }).collect();
    let mut outputs = vec![Vec::with_capacity(len); m];
    let mut w = vec![0.0; m];
    for t in range {
        let xt = x[t];
        if !xt.is_finite() {
            return Err(MdqError::NonFinite { t: t as u64, coord: 0, value: xt });
        }
        for (k, s) in topo.stages.iter().enumerate() {
            let mut v = s.x_tap * xt;
            for &(j, c) in &s.taps {
                v += c * w[j];
            }
            w[k] = match (&s.quantizer, &mut cursors[k]) {
                (Some(q), Some(cur)) => {
                    let (idx, out) = q.quantize_with(v, cur.next_base());
                    if idx.abs() > INDEX_LIMIT || !idx.is_finite() {
                        return Err(MdqError::IndexOverflow { stage: k, t: t as u64, value: idx });
                    }
                    indices[k].push(idx as i64);
                    out
                }
                _ => v,
            };
            outputs[k].push(w[k]);
        }
    }
    Ok(ChunkOut { indices, outputs })
}

/// Run the encoder over `x`; time index `t` is the sample position.
pub fn encode(topo: &CodecTopology, x: &[f64], mode: ExecMode) -> Result<Encoded> {
    if x.len() % topo.dim != 0 {
        return Err(MdqError::InvalidParameter(format!(
            "{} samples do not fill blocks of dimension {}",
            x.len(),
            topo.dim
        )));
    }
    let chunks = map_chunks(x.len(), CHUNK, mode, |r| encode_chunk(topo, x, r));
    let m = topo.stages.len();
    let mut indices: Vec<Vec<i64>> = vec![Vec::new(); m];
    let mut outputs: Vec<Vec<f64>> = vec![Vec::with_capacity(x.len()); m];
    for c in chunks {
        let c = c?;
        for k in 0..m {
            indices[k].extend_from_slice(&c.indices[k]);
            outputs[k].extend_from_slice(&c.outputs[k]);
        }
    }
    let mut desc1 = Vec::new();
    let mut desc2 = Vec::new();
    for (k, (s, idx)) in topo.stages.iter().zip(indices).enumerate() {
        if let Some(q) = &s.quantizer {
            let st = StageStream { stage: k, description: s.description, stream_id: q.stream_id(), indices: idx };
            if s.description == 1 {
                desc1.push(st);
            } else {
                desc2.push(st);
            }
        }
    }
    Ok(Encoded {
        streams: DescriptionStreams {
            kind: topo.kind,
            seed: topo.seed,
            n: x.len(),
            fingerprint: topo.fingerprint(),
            desc1: Some(desc1),
            desc2: Some(desc2),
        },
        outputs,
    })
}

/// Which decoder to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decoder {
    Side1,
    Side2,
    Central,
}

/// Rebuild the stage outputs of description `d` from its streams alone.
fn stage_outputs(topo: &CodecTopology, streams: &DescriptionStreams, d: u8, mode: ExecMode) -> Result<Vec<Option<Vec<f64>>>> {
    let received = streams.description(d).ok_or(MdqError::ChannelFailure(d))?;
    if streams.fingerprint != topo.fingerprint() {
        return Err(MdqError::Format("streams were produced by a different topology".into()));
    }
    let n = streams.n;
    let m = topo.stages.len();
    let mut by_stage: Vec<Option<&StageStream>> = vec![None; m];
    for s in received {
        if s.stage >= m || s.indices.len() != n {
            return Err(MdqError::Format(format!("malformed stream for stage {}", s.stage)));
        }
        by_stage[s.stage] = Some(s);
    }
    let chunks = map_chunks(n, CHUNK, mode, |r| -> Result<Vec<Vec<f64>>> {
        let mut out: Vec<Vec<f64>> = vec![Vec::new(); m];
        for (k, s) in topo.stages.iter().enumerate() {
            if s.description != d {
                continue;
            }
            match &s.quantizer {
                Some(q) => {
                    let st = by_stage[k].ok_or(MdqError::ChannelFailure(d))?;
                    let mut cur = q.cursor(r.start as u64);
                    out[k] = st.indices[r.clone()].iter().map(|&i| q.reconstruct_with(i, cur.next_base())).collect();
                }
                None => {
                    let mut col = vec![0.0; r.len()];
                    for &(j, c) in &s.taps {
                        for (o, v) in col.iter_mut().zip(&out[j]) {
                            *o += c * v;
                        }
                    }
                    out[k] = col;
                }
            }
        }
        Ok(out)
    });
    let mut full: Vec<Option<Vec<f64>>> = topo.stages.iter().map(|s| (s.description == d).then(|| Vec::with_capacity(n))).collect();
    for c in chunks {
        let c = c?;
        for (k, col) in c.into_iter().enumerate() {
            if let Some(f) = &mut full[k] {
                f.extend_from_slice(&col);
            }
        }
    }
    Ok(full)
}

fn combine(u: &[(usize, f64)], w: &[Option<Vec<f64>>], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for &(j, c) in u {
        let col = w[j].as_ref().expect("description stage decoded");
        for (o, v) in out.iter_mut().zip(col) {
            *o += c * v;
        }
    }
    out
}

/// Reconstruction of decoder `which`, or [`MdqError::ChannelFailure`].
pub fn decode(topo: &CodecTopology, streams: &DescriptionStreams, which: Decoder, mode: ExecMode) -> Result<Vec<f64>> {
    let n = streams.n;
    match which {
        Decoder::Side1 => {
            let w = stage_outputs(topo, streams, 1, mode)?;
            Ok(combine(&topo.u1, &w, n).into_iter().map(|u| topo.alpha1 * u).collect())
        }
        Decoder::Side2 => {
            let w = stage_outputs(topo, streams, 2, mode)?;
            Ok(combine(&topo.u2, &w, n).into_iter().map(|u| topo.alpha2 * u).collect())
        }
        Decoder::Central => {
            let w1 = stage_outputs(topo, streams, 1, mode)?;
            let w2 = stage_outputs(topo, streams, 2, mode)?;
            let u1 = combine(&topo.u1, &w1, n);
            let u2 = combine(&topo.u2, &w2, n);
            Ok(u1.iter().zip(&u2).map(|(a, b)| topo.beta1 * a + topo.beta2 * b).collect())
        }
    }
}

pub fn decode_side1(topo: &CodecTopology, streams: &DescriptionStreams) -> Result<Vec<f64>> {
    decode(topo, streams, Decoder::Side1, ExecMode::default())
}

pub fn decode_side2(topo: &CodecTopology, streams: &DescriptionStreams) -> Result<Vec<f64>> {
    decode(topo, streams, Decoder::Side2, ExecMode::default())
}

pub fn decode_central(topo: &CodecTopology, streams: &DescriptionStreams) -> Result<Vec<f64>> {
    decode(topo, streams, Decoder::Central, ExecMode::default())
}

/// `U₁`, `U₂` as seen by the encoder.
pub fn description_variables(topo: &CodecTopology, enc: &Encoded) -> (Vec<f64>, Vec<f64>) {
    let w: Vec<Option<Vec<f64>>> = enc.outputs.iter().cloned().map(Some).collect();
    let n = enc.streams.n;
    (combine(&topo.u1, &w, n), combine(&topo.u2, &w, n))
}
