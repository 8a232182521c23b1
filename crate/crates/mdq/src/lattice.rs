//! Subtractively dithered lattice quantizers over `Z^n`.
//!
//! A [`DitheredLattice`] maps `x` to `w = Q(x + z) - z`, where `Q` rounds each
//! coordinate to the nearest multiple of the step and `z` is uniform over the
//! basic cell `(-Δ/2, Δ/2]`. The dither for time index `t` is a pure function
//! of `(seed, stream_id, t)`, so an encoder and a decoder holding the same
//! lattice value regenerate identical dithers without exchanging them, and
//! workers may process disjoint time ranges in any order.
//!
//! Cells are half-open on the left: the point `kΔ + Δ/2` belongs to cell `k`.

use crate::error::{MdqError, Result};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Normalized second moment of the scalar lattice (and of `Z^n` for every `n`).
pub const G1: f64 = 1.0 / 12.0;

/// Largest index magnitude a stream may carry.
pub const INDEX_LIMIT: f64 = 2_147_483_648.0;

/// Per-stage rate redundancy of the scalar lattice, `½ log₂(2πe/12)` bits.
pub fn scalar_redundancy_bits() -> f64 {
    redundancy_bits(G1)
}

/// Rate redundancy `½ log₂(2πe G)` of a lattice with normalized second moment `g`.
pub fn redundancy_bits(g: f64) -> f64 {
    0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * g).log2()
}

/// Best known normalized second moments, for reporting bounds only.
///
/// Only `Z^n` is constructed by this crate.
pub fn best_known_g(n: usize) -> Option<f64> {
    match n {
        1 => Some(G1),
        2 => Some(5.0 / (36.0 * 3f64.sqrt())),
        3 => Some(0.078_543_3),
        4 => Some(0.076_603_2),
        8 => Some(0.071_682_1),
        24 => Some(0.065_771_1),
        _ => None,
    }
}

/// Limit of the normalized second moment as the dimension grows.
pub fn g_infinity() -> f64 {
    1.0 / (2.0 * std::f64::consts::PI * std::f64::consts::E)
}

/// Step size whose uniform quantization noise has variance `noise_var`.
///
/// Returns `Ok(None)` for exactly zero variance, the signal for a
/// pass-through stage that needs no quantizer.
pub fn step_for_noise_variance(noise_var: f64) -> Result<Option<f64>> {
    if noise_var == 0.0 {
        return Ok(None);
    }
    if !(noise_var > 0.0) || !noise_var.is_finite() {
        return Err(MdqError::InvalidParameter(format!(
            "noise variance must be positive and finite, got {noise_var}"
        )));
    }
    Ok(Some((12.0 * noise_var).sqrt()))
}

#[inline]
fn unit_from_bits(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Counter-addressable stream of uniform variates in `[0, 1)`.
///
/// Position `p` of stream `(seed, stream_id)` is the ChaCha8 output word pair
/// at that position, so any sub-range can be regenerated independently.
#[derive(Clone)]
pub struct UniformStream {
    rng: ChaCha8Rng,
}

impl UniformStream {
    pub fn at(seed: u64, stream_id: u64, position: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        rng.set_word_pos(2 * position as u128);
        Self { rng }
    }

    #[inline]
    pub fn next_unit(&mut self) -> f64 {
        unit_from_bits(self.rng.next_u64())
    }
}

/// Dither in base units for a unit-free uniform draw `u ∈ [0,1)`: `Δ(½ − u) ∈ (−Δ/2, Δ/2]`.
#[inline]
pub fn dither_from_unit(step: f64, u: f64) -> f64 {
    step * (0.5 - u)
}

/// Nearest lattice coordinate for half-open cells `(kΔ − Δ/2, kΔ + Δ/2]`.
#[inline]
pub fn lattice_coordinate(v: f64, step: f64) -> f64 {
    (v / step - 0.5).ceil()
}

/// Output of one quantization: lattice coordinates and reproduction.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedSample {
    pub index: Vec<i64>,
    pub reproduction: Vec<f64>,
    /// Dither used, in output units.
    pub dither: Vec<f64>,
}

/// A `Z^n` quantizer with a seeded subtractive dither stream.
///
/// The base step is fixed at construction; [`DitheredLattice::shape`] only
/// multiplies a gain, so the shaped quantizer reuses the original dither draws.
#[derive(Debug, Clone, PartialEq)]
pub struct DitheredLattice {
    dim: usize,
    base_step: f64,
    gain: f64,
    seed: u64,
    stream_id: u64,
    forced: Option<Vec<f64>>,
}

impl DitheredLattice {
    pub fn new(dim: usize, step: f64, seed: u64, stream_id: u64) -> Result<Self> {
        if dim == 0 {
            return Err(MdqError::InvalidParameter("dimension must be positive".into()));
        }
        if !(step > 0.0) || !step.is_finite() {
            return Err(MdqError::InvalidParameter(format!(
                "step must be positive and finite, got {step}"
            )));
        }
        Ok(Self { dim, base_step: step, gain: 1.0, seed, stream_id, forced: None })
    }

    /// Lattice whose noise second moment per axis equals `noise_var > 0`.
    pub fn for_noise_variance(dim: usize, noise_var: f64, seed: u64, stream_id: u64) -> Result<Self> {
        match step_for_noise_variance(noise_var)? {
            Some(step) => Self::new(dim, step, seed, stream_id),
            None => Err(MdqError::InvalidParameter(
                "zero noise variance has no quantizer; use a pass-through stage".into(),
            )),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Effective step `|a|Δ`.
    pub fn step(&self) -> f64 {
        self.gain.abs() * self.base_step
    }

    pub fn base_step(&self) -> f64 {
        self.base_step
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Per-axis noise second moment `Δ²/12`.
    pub fn second_moment(&self) -> f64 {
        let s = self.step();
        s * s / 12.0
    }

    pub fn normalized_second_moment(&self) -> f64 {
        G1
    }

    /// Cell volume `Δ^n`.
    pub fn cell_volume(&self) -> f64 {
        self.step().powi(self.dim as i32)
    }

    /// Pre/post scaling by `a`: `Q'(x) = a·Q(x/a)` with the dither scaled by `a`.
    pub fn shape(&self, a: f64) -> Result<Self> {
        if a == 0.0 || !a.is_finite() {
            return Err(MdqError::InvalidParameter(format!(
                "shaping gain must be finite and nonzero, got {a}"
            )));
        }
        let mut out = self.clone();
        out.gain *= a;
        Ok(out)
    }

    /// Same geometry with a different dither stream.
    pub fn with_stream(&self, stream_id: u64) -> Self {
        let mut out = self.clone();
        out.stream_id = stream_id;
        out
    }

    /// Test hook: use `dither` (output units, one per axis) at every time index.
    pub fn with_forced_dither(&self, dither: Vec<f64>) -> Result<Self> {
        if dither.len() != self.dim {
            return Err(MdqError::InvalidParameter(format!(
                "forced dither has {} coordinates, lattice has {}",
                dither.len(),
                self.dim
            )));
        }
        let mut out = self.clone();
        out.forced = Some(dither);
        Ok(out)
    }

    pub fn is_forced(&self) -> bool {
        self.forced.is_some()
    }

    /// Base-unit dither for each axis at time `t`.
    fn base_dither(&self, t: u64) -> Vec<f64> {
        match &self.forced {
            Some(z) => z.iter().map(|v| v / self.gain).collect(),
            None => {
                let mut s = UniformStream::at(self.seed, self.stream_id, t * self.dim as u64);
                (0..self.dim).map(|_| dither_from_unit(self.base_step, s.next_unit())).collect()
            }
        }
    }

    /// Dither at time `t` in output units.
    pub fn dither(&self, t: u64) -> Vec<f64> {
        self.base_dither(t).into_iter().map(|z| z * self.gain).collect()
    }

    pub fn quantize(&self, x: &[f64], t: u64) -> Result<QuantizedSample> {
        if x.len() != self.dim {
            return Err(MdqError::InvalidParameter(format!(
                "input has {} coordinates, lattice has {}",
                x.len(),
                self.dim
            )));
        }
        if let Some(coord) = x.iter().position(|v| !v.is_finite()) {
            return Err(MdqError::NonFinite { t, coord, value: x[coord] });
        }
        let zb = self.base_dither(t);
        let mut index = Vec::with_capacity(self.dim);
        let mut reproduction = Vec::with_capacity(self.dim);
        for (xi, z) in x.iter().zip(&zb) {
            let v = xi / self.gain + z;
            let k = lattice_coordinate(v, self.base_step);
            if k.abs() > INDEX_LIMIT {
                return Err(MdqError::IndexOverflow { stage: 0, t, value: k });
            }
            index.push(k as i64);
            reproduction.push(self.gain * (k * self.base_step - z));
        }
        let dither = zb.iter().map(|z| z * self.gain).collect();
        Ok(QuantizedSample { index, reproduction, dither })
    }

    /// Decoder side: rebuild `w` from the index and the regenerated dither.
    pub fn reconstruct(&self, index: &[i64], t: u64) -> Result<Vec<f64>> {
        if index.len() != self.dim {
            return Err(MdqError::InvalidParameter(format!(
                "index has {} coordinates, lattice has {}",
                index.len(),
                self.dim
            )));
        }
        let zb = self.base_dither(t);
        Ok(index
            .iter()
            .zip(&zb)
            .map(|(&k, z)| self.gain * (k as f64 * self.base_step - z))
            .collect())
    }
}

/// Sequential reader of base-unit dithers starting at a flattened coordinate
/// position `t·n + axis`.
#[derive(Clone)]
pub struct DitherCursor {
    stream: Option<UniformStream>,
    forced: Vec<f64>,
    step: f64,
    position: u64,
}

impl DitherCursor {
    #[inline]
    pub fn next_base(&mut self) -> f64 {
        let z = match &mut self.stream {
            Some(s) => dither_from_unit(self.step, s.next_unit()),
            None => self.forced[(self.position % self.forced.len() as u64) as usize],
        };
        self.position += 1;
        z
    }

    /// Next dither as a unit draw `u ∈ [0,1)` with `z = Δ(½ − u)`.
    #[inline]
    pub fn next_unit(&mut self) -> f64 {
        0.5 - self.next_base() / self.step
    }
}

impl DitheredLattice {
    /// Cursor over base-unit dithers from flattened position `position`.
    pub fn cursor(&self, position: u64) -> DitherCursor {
        match &self.forced {
            Some(z) => DitherCursor {
                stream: None,
                forced: z.iter().map(|v| v / self.gain).collect(),
                step: self.base_step,
                position,
            },
            None => DitherCursor {
                stream: Some(UniformStream::at(self.seed, self.stream_id, position)),
                forced: Vec::new(),
                step: self.base_step,
                position,
            },
        }
    }

    /// Scalar quantization with an explicit base dither; returns `(index, w)`.
    #[inline]
    pub fn quantize_with(&self, x: f64, base_dither: f64) -> (f64, f64) {
        let k = lattice_coordinate(x / self.gain + base_dither, self.base_step);
        (k, self.gain * (k * self.base_step - base_dither))
    }

    /// Scalar reconstruction with an explicit base dither.
    #[inline]
    pub fn reconstruct_with(&self, k: i64, base_dither: f64) -> f64 {
        self.gain * (k as f64 * self.base_step - base_dither)
    }
}
