use crate::error::{MdqError, Result};
use crate::lattice::DitheredLattice;
use crate::region::{Order, RateTarget, SplitPoint, SplitSolution, SplitVariance, SuccessiveCoeffs, TestChannel};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodecKind {
    Successive,
    Splitting,
    Separate,
    Reuse,
}

impl CodecKind {
    pub fn code(self) -> u8 {
        match self {
            Self::Successive => 0,
            Self::Splitting => 1,
            Self::Separate => 2,
            Self::Reuse => 3,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        [Self::Successive, Self::Splitting, Self::Separate, Self::Reuse].get(c as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Successive => "successive",
            Self::Splitting => "splitting",
            Self::Separate => "separate",
            Self::Reuse => "reuse",
        }
    }
}

impl std::str::FromStr for CodecKind {
    type Err = MdqError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "successive" => Ok(Self::Successive),
            "splitting" => Ok(Self::Splitting),
            "separate" => Ok(Self::Separate),
            "reuse" => Ok(Self::Reuse),
            _ => Err(MdqError::InvalidParameter(format!("unknown codec kind {s:?}"))),
        }
    }
}

/// One quantization stage: `W = Q(x_tap·X + Σ c·W_j + Z) − Z`, or the
/// noiseless linear combination when `quantizer` is `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub label: &'static str,
    /// Channel carrying this stage's index stream.
    pub description: u8,
    pub quantizer: Option<DitheredLattice>,
    /// Innovation variance this stage is built for.
    pub noise_var: f64,
    pub x_tap: f64,
    pub taps: Vec<(usize, f64)>,
}

/// A wired two-description encoder with its three linear decoders.
#[derive(Debug, Clone)]
pub struct CodecTopology {
    pub kind: CodecKind,
    pub dim: usize,
    pub seed: u64,
    pub point: SplitPoint,
    pub channel: TestChannel,
    pub stages: Vec<Stage>,
    /// `U₁` as a combination of stage outputs (description-1 stages only).
    pub u1: Vec<(usize, f64)>,
    /// `U₂` as a combination of stage outputs (description-2 stages only).
    pub u2: Vec<(usize, f64)>,
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Shaping gains `a*_i` of the reuse form, one per stage.
    pub shaping_gains: Option<Vec<f64>>,
}

type StageSpec<'a> = (u8, Option<f64>, f64, f64, &'a [(usize, f64)]);

#[derive(Serialize)]
struct Fingerprint<'a> {
    kind: CodecKind,
    dim: usize,
    seed: u64,
    point: &'a SplitPoint,
    channel: &'a TestChannel,
    stages: Vec<StageSpec<'a>>,
    u1: &'a [(usize, f64)],
    u2: &'a [(usize, f64)],
    gains: [f64; 4],
}

impl CodecTopology {
    /// SHA-256 over the full wiring, coefficients and seed.
    pub fn fingerprint(&self) -> [u8; 32] {
        let fp = Fingerprint {
            kind: self.kind,
            dim: self.dim,
            seed: self.seed,
            point: &self.point,
            channel: &self.channel,
            stages: self
                .stages
                .iter()
                .map(|s| (s.description, s.quantizer.as_ref().map(|q| q.step()), s.noise_var, s.x_tap, s.taps.as_slice()))
                .collect(),
            u1: &self.u1,
            u2: &self.u2,
            gains: [self.alpha1, self.alpha2, self.beta1, self.beta2],
        };
        let bytes = serde_json::to_vec(&fp).expect("plain data serializes");
        Sha256::digest(&bytes).into()
    }

    pub fn fingerprint_hex(&self) -> String {
        self.fingerprint().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn stages_of(&self, description: u8) -> impl Iterator<Item = (usize, &Stage)> {
        self.stages.iter().enumerate().filter(move |(_, s)| s.description == description)
    }

    /// Pin every quantizer's dither to zero (undithered operation).
    pub fn undithered(&self) -> Result<Self> {
        let mut out = self.clone();
        for s in &mut out.stages {
            if let Some(q) = &s.quantizer {
                s.quantizer = Some(q.with_forced_dither(vec![0.0; q.dim()])?);
            }
        }
        Ok(out)
    }

    /// Force a fixed dither on every quantizer.
    pub fn with_forced_dither(&self, value: f64) -> Result<Self> {
        let mut out = self.clone();
        for s in &mut out.stages {
            if let Some(q) = &s.quantizer {
                s.quantizer = Some(q.with_forced_dither(vec![value; q.dim()])?);
            }
        }
        Ok(out)
    }

    fn validate(&self) -> Result<()> {
        for (k, s) in self.stages.iter().enumerate() {
            if s.taps.iter().any(|&(j, _)| j >= k) {
                return Err(MdqError::InvalidParameter(format!("stage {k} taps a later stage")));
            }
            if s.quantizer.is_none() {
                let foreign = s.taps.iter().any(|&(j, c)| c != 0.0 && self.stages[j].description != s.description);
                if s.x_tap != 0.0 || foreign {
                    return Err(MdqError::Degenerate(format!(
                        "pass-through stage {} depends on data its decoder lacks",
                        s.label
                    )));
                }
            }
        }
        for (u, d) in [(&self.u1, 1u8), (&self.u2, 2u8)] {
            if u.iter().any(|&(j, _)| self.stages[j].description != d) {
                return Err(MdqError::InvalidParameter(format!("U{d} reads another description")));
            }
        }
        Ok(())
    }
}

/// Stream id of stage `k`; equal across kinds so matched topologies share dithers.
pub fn stage_stream_id(k: usize) -> u64 {
    k as u64 + 1
}

fn quantizer(dim: usize, noise_var: f64, seed: u64, k: usize) -> Result<Option<DitheredLattice>> {
    if noise_var == 0.0 {
        Ok(None)
    } else {
        DitheredLattice::for_noise_variance(dim, noise_var, seed, stage_stream_id(k)).map(Some)
    }
}

const NOISE_FLOOR: f64 = 1e-12;

fn clean(v: f64, scale: f64) -> f64 {
    if v.abs() <= NOISE_FLOOR * scale {
        0.0
    } else {
        v
    }
}

/// Build a topology for `kind` at the operating point requested by `target`.
pub fn build(kind: CodecKind, channel: &TestChannel, target: RateTarget, seed: u64, dim: usize) -> Result<CodecTopology> {
    let point = channel.resolve(target)?;
    let var = channel.var();
    let topo = match kind {
        CodecKind::Successive => {
            let order = match (target, point.sigma2_t3) {
                (RateTarget::Vertex(2), _) => Order::SecondThenFirst,
                (RateTarget::Vertex(_), _) | (_, SplitVariance::Infinite) => Order::FirstThenSecond,
                (_, SplitVariance::Finite(0.0)) => Order::SecondThenFirst,
                _ => {
                    return Err(MdqError::InvalidParameter(
                        "successive quantization reaches only the vertices; use splitting".into(),
                    ))
                }
            };
            successive(channel, channel.successive_coeffs(order), point, seed, dim, CodecKind::Successive)?
        }
        CodecKind::Splitting | CodecKind::Reuse => match channel.splitting_coeffs(point.sigma2_t3)? {
            SplitSolution::Successive(c) => successive(channel, c, point, seed, dim, kind)?,
            SplitSolution::Split(c) => {
                let [s1, s2, s3, s4, s5, s6] = c.b_star;
                let v4 = clean(c.eb_bar4, var);
                let (s3, s4, s5) = if v4 == 0.0 { (0.0, 0.0, 0.0) } else { (s3, s4, s5) };
                let stages = vec![
                    Stage { label: "W2'", description: 2, quantizer: quantizer(dim, c.eb_tilde2, seed, 0)?, noise_var: c.eb_tilde2, x_tap: 1.0, taps: vec![] },
                    Stage { label: "W1", description: 1, quantizer: quantizer(dim, clean(c.eb_tilde3, var), seed, 1)?, noise_var: c.eb_tilde3, x_tap: s1, taps: vec![(0, s2)] },
                    Stage { label: "Delta", description: 2, quantizer: quantizer(dim, v4, seed, 2)?, noise_var: v4, x_tap: s3, taps: vec![(1, s4), (0, s5)] },
                ];
                let split = CodecTopology {
                    kind: CodecKind::Splitting,
                    dim,
                    seed,
                    point,
                    channel: *channel,
                    stages,
                    u1: vec![(1, 1.0)],
                    u2: vec![(2, 1.0), (0, s6)],
                    alpha1: channel.alpha1,
                    alpha2: channel.alpha2,
                    beta1: channel.beta1,
                    beta2: channel.beta2,
                    shaping_gains: None,
                };
                if kind == CodecKind::Reuse {
                    reuse_form(&split)?
                } else {
                    split
                }
            }
        },
        CodecKind::Separate => {
            if !channel.triple.is_at_harmonic_bound() {
                return Err(MdqError::InvalidParameter(format!(
                    "separate quantization needs D3 at the harmonic bound {}, got {}",
                    channel.triple.harmonic_bound(),
                    channel.triple.d3
                )));
            }
            let v1 = channel.t0 + channel.t1;
            let v2 = channel.t0 + channel.t2;
            CodecTopology {
                kind,
                dim,
                seed,
                point,
                channel: *channel,
                stages: vec![
                    Stage { label: "W1", description: 1, quantizer: quantizer(dim, v1, seed, 0)?, noise_var: v1, x_tap: 1.0, taps: vec![] },
                    Stage { label: "W2", description: 2, quantizer: quantizer(dim, v2, seed, 1)?, noise_var: v2, x_tap: 1.0, taps: vec![] },
                ],
                u1: vec![(0, 1.0)],
                u2: vec![(1, 1.0)],
                alpha1: channel.alpha1,
                alpha2: channel.alpha2,
                beta1: channel.beta1,
                beta2: channel.beta2,
                shaping_gains: None,
            }
        }
    };
    topo.validate()?;
    Ok(topo)
}

fn successive(channel: &TestChannel, c: SuccessiveCoeffs, point: SplitPoint, seed: u64, dim: usize, kind: CodecKind) -> Result<CodecTopology> {
    let (first, second) = match c.order {
        Order::FirstThenSecond => (1u8, 2u8),
        Order::SecondThenFirst => (2u8, 1u8),
    };
    let v3 = clean(c.eb3, channel.var());
    let (x2, t2) = (c.a1, c.a2);
    let stages = vec![
        Stage { label: if first == 1 { "W1" } else { "W2" }, description: first, quantizer: quantizer(dim, c.eb2, seed, 0)?, noise_var: c.eb2, x_tap: 1.0, taps: vec![] },
        Stage { label: if second == 1 { "W1" } else { "W2" }, description: second, quantizer: quantizer(dim, v3, seed, 1)?, noise_var: v3, x_tap: x2, taps: vec![(0, t2)] },
    ];
    let (u1, u2) = if first == 1 { (vec![(0, 1.0)], vec![(1, 1.0)]) } else { (vec![(1, 1.0)], vec![(0, 1.0)]) };
    Ok(CodecTopology {
        kind,
        dim,
        seed,
        point,
        channel: *channel,
        stages,
        u1,
        u2,
        alpha1: channel.alpha1,
        alpha2: channel.alpha2,
        beta1: channel.beta1,
        beta2: channel.beta2,
        shaping_gains: None,
    })
}

/// Rewrite a splitting topology so every stage uses the first stage's
/// quantizer, with the gains moved into pre/post filters.
fn reuse_form(split: &CodecTopology) -> Result<CodecTopology> {
    let base = split.stages[0]
        .quantizer
        .clone()
        .ok_or_else(|| MdqError::Degenerate("coarse stage has no quantizer".into()))?;
    let base_var = split.stages[0].noise_var;
    let gains: Vec<f64> = split
        .stages
        .iter()
        .map(|s| if s.quantizer.is_some() { (s.noise_var / base_var).sqrt() } else { 1.0 })
        .collect();
    let stages = split
        .stages
        .iter()
        .enumerate()
        .map(|(k, s)| Stage {
            label: s.label,
            description: s.description,
            quantizer: s.quantizer.as_ref().map(|_| base.with_stream(stage_stream_id(k))),
            noise_var: base_var,
            x_tap: s.x_tap / gains[k],
            taps: s.taps.iter().map(|&(j, c)| (j, c * gains[j] / gains[k])).collect(),
        })
        .collect();
    let rescale = |u: &[(usize, f64)], g: f64| -> Vec<(usize, f64)> { u.iter().map(|&(j, c)| (j, c * gains[j] / g)).collect() };
    let g1 = gains[split.u1[0].0];
    let g2 = gains[split.u2[0].0];
    Ok(CodecTopology {
        kind: CodecKind::Reuse,
        stages,
        u1: rescale(&split.u1, g1),
        u2: rescale(&split.u2, g2),
        alpha1: split.alpha1 * g1,
        alpha2: split.alpha2 * g2,
        beta1: split.beta1 * g1,
        beta2: split.beta2 * g2,
        shaping_gains: Some(gains),
        ..split.clone()
    })
}
