//! Source densities for the cell integrals.

use crate::error::{MdqError, Result};
use crate::harness::source::Family;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Laplace, Normal, Uniform};

/// A zero-mean density of variance `var`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourcePdf {
    Gaussian { var: f64 },
    Uniform { var: f64 },
    Laplacian { var: f64 },
}

impl SourcePdf {
    pub fn from_family(f: &Family, var: f64) -> Result<Self> {
        if !(var > 0.0 && var.is_finite()) {
            return Err(MdqError::InvalidParameter(format!("source variance {var}")));
        }
        match f {
            Family::Gaussian => Ok(Self::Gaussian { var }),
            Family::Uniform => Ok(Self::Uniform { var }),
            Family::Laplacian => Ok(Self::Laplacian { var }),
            Family::File(_) => Err(MdqError::InvalidParameter("cell integrals need an analytic density".into())),
        }
    }

    pub fn var(&self) -> f64 {
        match *self {
            Self::Gaussian { var } | Self::Uniform { var } | Self::Laplacian { var } => var,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let sd = self.var().sqrt();
        match self {
            Self::Gaussian { .. } => Normal::new(0.0, sd).expect("valid").pdf(x),
            Self::Uniform { .. } => {
                let h = 3f64.sqrt() * sd;
                if x.abs() <= h {
                    0.5 / h
                } else {
                    0.0
                }
            }
            Self::Laplacian { .. } => Laplace::new(0.0, sd / 2f64.sqrt()).expect("valid").pdf(x),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let sd = self.var().sqrt();
        match self {
            Self::Gaussian { .. } => Normal::new(0.0, sd).expect("valid").cdf(x),
            Self::Uniform { .. } => {
                let h = 3f64.sqrt() * sd;
                Uniform::new(-h, h).expect("valid").cdf(x)
            }
            Self::Laplacian { .. } => Laplace::new(0.0, sd / 2f64.sqrt()).expect("valid").cdf(x),
        }
    }

    /// Differential entropy in bits.
    pub fn entropy_bits(&self) -> f64 {
        use std::f64::consts::{E, PI};
        let v = self.var();
        match self {
            Self::Gaussian { .. } => 0.5 * (2.0 * PI * E * v).log2(),
            Self::Uniform { .. } => (2.0 * 3f64.sqrt() * v.sqrt()).log2(),
            Self::Laplacian { .. } => (2.0 * E * (v / 2.0).sqrt()).log2(),
        }
    }

    /// Points where the density is not smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            Self::Gaussian { .. } => vec![],
            Self::Uniform { var } => {
                let h = 3f64.sqrt() * var.sqrt();
                vec![-h, h]
            }
            Self::Laplacian { .. } => vec![0.0],
        }
    }

    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        self.cdf(hi) - self.cdf(lo)
    }
}
