//! Sequential dithered quantization of a correlated vector.
//!
//! Given a covariance `K` for `(X_1, …, X_M)`, the chain keeps `X̃_1 = X_1`
//! and forms `X̃_i = Q_i(Σ_j w_ij X̃_j + Z_i) − Z_i`, with `w_i` the linear
//! MMSE predictor row and the step of `Q_i` matched to the innovation
//! variance. The outputs then have covariance `K` whatever the law of `X_1`.
//! Zero innovations become noiseless prediction. The block version does the
//! same for vector components, shaping a cubic lattice by the Cholesky
//! factor of each innovation covariance, or by the eigen-split when that
//! covariance is singular.

use crate::error::{MdqError, Result};
use crate::exec::{map_chunks, ExecMode, CHUNK};
use crate::gs::{block_ldl, ldl, vector_gs_degenerate, CovarianceMatrix, SINGULAR_TOL};
use crate::lattice::{DitheredLattice, G1};
use nalgebra::{DMatrix, DVector};

/// Chain output: `samples[i][t]` is `X̃_i` at time `t`.
pub fn scalar_chain(k: &CovarianceMatrix, x1: &[f64], seed: u64, mode: ExecMode) -> Result<Vec<Vec<f64>>> {
    let dec = ldl(k);
    let m = k.dim();
    let quantizers: Vec<Option<DitheredLattice>> = (0..m)
        .map(|i| {
            if i == 0 || dec.d[i] == 0.0 {
                Ok(None)
            } else {
                DitheredLattice::for_noise_variance(1, dec.d[i], seed, i as u64).map(Some)
            }
        })
        .collect::<Result<_>>()?;
    let chunks = map_chunks(x1.len(), CHUNK, mode, |r| {
        let mut cursors: Vec<_> = quantizers.iter().map(|q| q.as_ref().map(|q| q.cursor(r.start as u64))).collect();
        let mut out = vec![Vec::with_capacity(r.len()); m];
        let mut xt = vec![0.0; m];
        for t in r {
            xt[0] = x1[t];
            for i in 1..m {
                let pred: f64 = dec.predictors[i].iter().zip(&xt[..i]).map(|(w, x)| w * x).sum();
                xt[i] = match (&quantizers[i], &mut cursors[i]) {
                    (Some(q), Some(c)) => q.quantize_with(pred, c.next_base()).1,
                    _ => pred,
                };
            }
            for i in 0..m {
                out[i].push(xt[i]);
            }
        }
        out
    });
    let mut full = vec![Vec::with_capacity(x1.len()); m];
    for c in chunks {
        for (f, col) in full.iter_mut().zip(c) {
            f.extend_from_slice(&col);
        }
    }
    Ok(full)
}

enum BlockQuantizer {
    First,
    Null,
    /// `X̃ = A(Q(A⁻¹v + Z) − Z)` on a unit-step cubic lattice.
    Shaped { a: DMatrix<f64>, a_inv: DMatrix<f64>, lattice: DitheredLattice },
    /// Quantize the top `rank` eigen-coordinates; keep the rest predicted.
    Subspace { basis: DMatrix<f64>, rank: usize, steps: Vec<DitheredLattice> },
}

/// Block chain over `n`-dimensional components; `x1[t]` is the first block.
/// Returns `samples[t]`, the concatenated output vector at time `t`.
pub fn vector_chain(k: &CovarianceMatrix, n: usize, x1: &[Vec<f64>], seed: u64) -> Result<Vec<Vec<f64>>> {
    let blocks = block_ldl(k, n)?;
    let count = k.dim() / n;
    let base = DitheredLattice::new(n, 1.0, seed, 0)?;
    let mut qs = Vec::with_capacity(count);
    for (b, kb) in blocks.innovation_cov.iter().enumerate() {
        if b == 0 {
            qs.push(BlockQuantizer::First);
            continue;
        }
        let cov = CovarianceMatrix::new(kb.clone())?;
        let sub = vector_gs_degenerate(&cov, SINGULAR_TOL);
        if sub.rank == 0 {
            qs.push(BlockQuantizer::Null);
        } else if sub.rank == n {
            let chol = kb.clone().cholesky().ok_or_else(|| MdqError::Degenerate("Cholesky failed".into()))?;
            let a = chol.l() / G1.sqrt();
            let a_inv = a.clone().try_inverse().ok_or_else(|| MdqError::Degenerate("shaping matrix singular".into()))?;
            qs.push(BlockQuantizer::Shaped { a, a_inv, lattice: base.with_stream(b as u64) });
        } else {
            let steps = sub
                .eigenvalues
                .iter()
                .enumerate()
                .map(|(j, &lam)| DitheredLattice::for_noise_variance(1, lam, seed, (b * n + j) as u64 + (1 << 32)))
                .collect::<Result<_>>()?;
            qs.push(BlockQuantizer::Subspace { basis: sub.basis.clone(), rank: sub.rank, steps });
        }
    }
    let mut out = Vec::with_capacity(x1.len());
    for (t, first) in x1.iter().enumerate() {
        if first.len() != n {
            return Err(MdqError::InvalidParameter(format!("first block must have {n} coordinates")));
        }
        let mut xt: Vec<f64> = first.clone();
        for (b, q) in qs.iter().enumerate().skip(1) {
            let pred = &blocks.predictors[b] * DVector::from_column_slice(&xt);
            let next: Vec<f64> = match q {
                BlockQuantizer::First => unreachable!("only block 0"),
                BlockQuantizer::Null => pred.iter().copied().collect(),
                BlockQuantizer::Shaped { a, a_inv, lattice } => {
                    let v = a_inv * &pred;
                    let w = lattice.quantize(v.as_slice(), t as u64)?.reproduction;
                    (a * DVector::from_vec(w)).iter().copied().collect()
                }
                BlockQuantizer::Subspace { basis, rank, steps } => {
                    let c = basis.transpose() * &pred;
                    let mut coords: Vec<f64> = c.iter().copied().collect();
                    for j in 0..*rank {
                        coords[j] = steps[j].quantize(&[coords[j]], t as u64)?.reproduction[0];
                    }
                    (basis * DVector::from_vec(coords)).iter().copied().collect()
                }
            };
            xt.extend(next);
        }
        out.push(xt);
    }
    Ok(out)
}

/// Empirical second-moment matrix of column-major samples.
pub fn second_moments(cols: &[Vec<f64>]) -> DMatrix<f64> {
    let m = cols.len();
    let n = cols.first().map_or(0, |c| c.len()) as f64;
    DMatrix::from_fn(m, m, |i, j| cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum::<f64>() / n)
}
