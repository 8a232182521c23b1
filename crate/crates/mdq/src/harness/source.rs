//! Unit-variance memoryless sources.

use crate::error::{MdqError, Result};
use crate::exec::{map_chunks, ExecMode, CHUNK};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::{E, PI};
use std::path::{Path, PathBuf};

/// Keeps source randomness disjoint from every dither stream of the same seed.
const SOURCE_DOMAIN: u64 = 0x5eed_50ce_0000_0001;
/// Stated accuracy of the spacing entropy estimate, in bits.
pub const SPACING_TOLERANCE_BITS: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    Uniform,
    Laplacian,
    File(PathBuf),
}

impl std::str::FromStr for Family {
    type Err = MdqError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "uniform" => Ok(Self::Uniform),
            "laplacian" => Ok(Self::Laplacian),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(Self::File(PathBuf::from(p))),
                _ => Err(MdqError::InvalidParameter(format!("unknown source {s:?}"))),
            },
        }
    }
}

/// A source family at a given scale. Samples are produced at unit variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub family: Family,
    /// Variance of the original data; reports multiply distortions back by it.
    pub variance: f64,
    pub seed: u64,
}

/// Samples plus what is known about their law, at unit variance.
#[derive(Debug, Clone)]
pub struct SourceSamples {
    pub x: Vec<f64>,
    /// Entropy power of the unit-variance source.
    pub entropy_power: f64,
    /// Differential entropy in bits, at unit variance.
    pub entropy_bits: f64,
    pub entropy_tolerance: f64,
    /// Mean and standard deviation removed from file data.
    pub original_mean: f64,
    pub original_std: f64,
}

pub fn entropy_power_from_bits(h: f64) -> f64 {
    2f64.powf(2.0 * h) / (2.0 * PI * E)
}

pub fn bits_from_entropy_power(p: f64) -> f64 {
    0.5 * (2.0 * PI * E * p).log2()
}

impl SourceSpec {
    pub fn new(family: Family, seed: u64) -> Self {
        Self { family, variance: 1.0, seed }
    }

    /// Analytic entropy power at unit variance, when the family has one.
    pub fn analytic_entropy_power(&self) -> Option<f64> {
        match self.family {
            Family::Gaussian => Some(1.0),
            Family::Uniform => Some(6.0 / (PI * E)),
            Family::Laplacian => Some(E / PI),
            Family::File(_) => None,
        }
    }

    /// Draw `n` samples; chunk `c` uses its own ChaCha stream, so the output
    /// does not depend on the execution mode.
    pub fn generate(&self, n: usize, mode: ExecMode) -> Result<SourceSamples> {
        let fam = self.family.clone();
        let x: Vec<f64> = match fam {
            Family::File(ref path) => return self.read_file(path, n),
            _ => map_chunks(n, CHUNK, mode, |r| {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ SOURCE_DOMAIN);
                rng.set_stream((r.start / CHUNK) as u64);
                r.map(|_| draw(&fam, &mut rng)).collect::<Vec<_>>()
            })
            .concat(),
        };
        let p = self.analytic_entropy_power().expect("analytic family");
        Ok(SourceSamples {
            x,
            entropy_power: p,
            entropy_bits: bits_from_entropy_power(p),
            entropy_tolerance: 0.0,
            original_mean: 0.0,
            original_std: self.variance.sqrt(),
        })
    }

    fn read_file(&self, path: &Path, n: usize) -> Result<SourceSamples> {
        let raw = read_f64_file(path)?;
        if raw.len() < n {
            return Err(MdqError::InsufficientSamples { needed: n, got: raw.len() });
        }
        let raw = &raw[..n];
        let mean = raw.iter().sum::<f64>() / n as f64;
        let var = raw.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        if !(var > 0.0) {
            return Err(MdqError::Degenerate("file source has zero variance".into()));
        }
        let sd = var.sqrt();
        let x: Vec<f64> = raw.iter().map(|v| (v - mean) / sd).collect();
        let h = spacing_entropy_bits(&x)?;
        Ok(SourceSamples {
            x,
            entropy_power: entropy_power_from_bits(h).min(1.0),
            entropy_bits: h,
            entropy_tolerance: SPACING_TOLERANCE_BITS,
            original_mean: mean,
            original_std: sd,
        })
    }
}

fn draw(fam: &Family, rng: &mut ChaCha8Rng) -> f64 {
    match fam {
        Family::Gaussian => rng.sample(StandardNormal),
        Family::Uniform => rng.random_range(-3f64.sqrt()..3f64.sqrt()),
        Family::Laplacian => {
            let u: f64 = rng.random_range(-0.5..0.5);
            -u.signum() * (1.0 - 2.0 * u.abs()).ln() / 2f64.sqrt()
        }
        Family::File(_) => unreachable!("file sources are read, not drawn"),
    }
}

/// Raw little-endian `f64` samples.
pub fn read_f64_file(path: &Path) -> Result<Vec<f64>> {
    let bytes = std::fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(MdqError::Format(format!("{} is not a whole number of f64 values", path.display())));
    }
    let v: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    if let Some(t) = v.iter().position(|x| !x.is_finite()) {
        return Err(MdqError::NonFinite { t: t as u64, coord: 0, value: v[t] });
    }
    Ok(v)
}

pub fn write_f64_file(path: &Path, x: &[f64]) -> Result<()> {
    let bytes: Vec<u8> = x.iter().flat_map(|v| v.to_le_bytes()).collect();
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Ebrahimi's m-spacing differential entropy estimate, in bits.
pub fn spacing_entropy_bits(x: &[f64]) -> Result<f64> {
    let n = x.len();
    if n < 1000 {
        return Err(MdqError::InsufficientSamples { needed: 1000, got: n });
    }
    let mut s = x.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    let m = ((n as f64).sqrt() / 2.0).round().max(1.0) as usize;
    let mut acc = 0.0;
    for i in 0..n {
        let hi = s[(i + m).min(n - 1)];
        let lo = s[i.saturating_sub(m)];
        let c = if i < m {
            1.0 + i as f64 / m as f64
        } else if i >= n - m {
            1.0 + (n - 1 - i) as f64 / m as f64
        } else {
            2.0
        };
        let gap = (hi - lo).max(f64::MIN_POSITIVE);
        acc += (n as f64 / (c * m as f64) * gap).ln();
    }
    Ok(acc / n as f64 / std::f64::consts::LN_2)
}
