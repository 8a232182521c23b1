//! Gram-Schmidt orthogonalization of jointly distributed variables.
//!
//! For a zero-mean vector with covariance `K`, the innovations
//! `B_i = X_i − E[X_i | X_1..X_{i−1}]` (linear MMSE) satisfy `X = L·B` with `L`
//! unit lower triangular and `Cov(B) = diag(D)`, i.e. `K = L·diag(D)·Lᵀ`. The
//! innovation variances `D_i` are the noise variances a chain of dithered
//! quantizers must inject to reproduce `K`.
//!
//! Singular covariances are allowed. An innovation whose variance falls below
//! `1e-9·λ_max` is set to exactly zero: the variable is then a deterministic
//! linear function of its predecessors and its stage needs no quantizer.

use crate::error::{MdqError, Result};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Relative tolerance below which an innovation or eigenvalue is zero.
pub const SINGULAR_TOL: f64 = 1e-9;

/// A validated symmetric positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    k: DMatrix<f64>,
    eigenvalues: Vec<f64>,
}

impl CovarianceMatrix {
    pub fn new(k: DMatrix<f64>) -> Result<Self> {
        let m = k.nrows();
        if m == 0 || k.ncols() != m {
            return Err(MdqError::InvalidParameter(format!(
                "covariance must be square and nonempty, got {}x{}",
                k.nrows(),
                k.ncols()
            )));
        }
        if let Some(v) = k.iter().find(|v| !v.is_finite()) {
            return Err(MdqError::InvalidParameter(format!("non-finite covariance entry {v}")));
        }
        let scale = k.amax().max(1.0);
        for i in 0..m {
            for j in 0..i {
                let gap = (k[(i, j)] - k[(j, i)]).abs();
                if gap > 1e-12 * scale {
                    return Err(MdqError::Asymmetric { i, j, gap });
                }
            }
        }
        let sym = (&k + k.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym.clone());
        let trace = sym.trace();
        let tolerance = SINGULAR_TOL * trace.abs().max(f64::MIN_POSITIVE);
        let min = eig.eigenvalues.min();
        if min < -tolerance {
            return Err(MdqError::Indefinite { eigenvalue: min, tolerance });
        }
        Ok(Self { k: sym, eigenvalues: eig.eigenvalues.iter().copied().collect() })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        if rows.iter().any(|r| r.len() != m) {
            return Err(MdqError::InvalidParameter("rows must form a square matrix".into()));
        }
        Self::new(DMatrix::from_fn(m, m, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.k.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(0.0, f64::max)
    }

    pub fn trace(&self) -> f64 {
        self.k.trace()
    }
}

/// `K = L·diag(D)·Lᵀ` together with the linear-MMSE predictor of each variable.
#[derive(Debug, Clone)]
pub struct InnovationsDecomposition {
    /// Unit lower triangular; row `i` holds the weights of `X_i` on `B_1..B_{i−1}`.
    pub l: DMatrix<f64>,
    /// Innovation variances, exactly zero for singular directions.
    pub d: Vec<f64>,
    /// Row `i`: minimum-norm weights of `X_i` on `X_1..X_{i−1}`.
    pub predictors: Vec<Vec<f64>>,
}

impl InnovationsDecomposition {
    pub fn pass_through(&self) -> Vec<bool> {
        self.d.iter().map(|&v| v == 0.0).collect()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&DVector::from_vec(self.d.clone()));
        &self.l * d * self.l.transpose()
    }

    /// Innovations of one realization: `B = L⁻¹ X`.
    pub fn innovations(&self, x: &[f64]) -> Vec<f64> {
        let m = self.d.len();
        let mut b = vec![0.0; m];
        for i in 0..m {
            let mut v = x[i];
            for (j, bj) in b.iter().enumerate().take(i) {
                v -= self.l[(i, j)] * bj;
            }
            b[i] = v;
        }
        b
    }
}

/// LDLᵀ factorization with zero-clamped singular innovations.
pub fn ldl(k: &CovarianceMatrix) -> InnovationsDecomposition {
    let m = k.dim();
    let kk = k.matrix();
    let tol = SINGULAR_TOL * k.lambda_max();
    let mut l = DMatrix::<f64>::identity(m, m);
    let mut d = vec![0.0; m];
    for j in 0..m {
        let mut dj = kk[(j, j)];
        for p in 0..j {
            dj -= l[(j, p)] * l[(j, p)] * d[p];
        }
        if dj <= tol {
            d[j] = 0.0;
            continue;
        }
        d[j] = dj;
        for i in (j + 1)..m {
            let mut v = kk[(i, j)];
            for p in 0..j {
                v -= l[(i, p)] * l[(j, p)] * d[p];
            }
            l[(i, j)] = v / dj;
        }
    }
    let predictors = (0..m).map(|i| predictor_row(kk, i)).collect();
    InnovationsDecomposition { l, d, predictors }
}

/// Minimum-norm solution of `w·K_{<i} = K_{i,<i}`.
fn predictor_row(k: &DMatrix<f64>, i: usize) -> Vec<f64> {
    if i == 0 {
        return Vec::new();
    }
    let sub = k.view((0, 0), (i, i)).into_owned();
    let rhs = k.view((i, 0), (1, i)).into_owned();
    let lam = SymmetricEigen::new(sub.clone()).eigenvalues.amax();
    let pinv = sub
        .pseudo_inverse(SINGULAR_TOL * lam.max(f64::MIN_POSITIVE))
        .expect("non-negative epsilon");
    (rhs * pinv).iter().copied().collect()
}

/// Innovation variances `E B_i²`; zeros mark pass-through stages.
pub fn innovations_variances(k: &CovarianceMatrix) -> Vec<f64> {
    ldl(k).d
}

/// Block version for vector variables of dimension `n`: predictor blocks and
/// innovation covariances `K_B,i` (each `n×n`, possibly singular).
#[derive(Debug, Clone)]
pub struct BlockInnovations {
    pub n: usize,
    /// `predictors[i]` is `n × (i·n)`: weights of block `i` on all earlier coordinates.
    pub predictors: Vec<DMatrix<f64>>,
    pub innovation_cov: Vec<DMatrix<f64>>,
}

pub fn block_ldl(k: &CovarianceMatrix, n: usize) -> Result<BlockInnovations> {
    let total = k.dim();
    if n == 0 || total % n != 0 {
        return Err(MdqError::InvalidParameter(format!(
            "block size {n} does not divide dimension {total}"
        )));
    }
    let kk = k.matrix();
    let blocks = total / n;
    let mut predictors = Vec::with_capacity(blocks);
    let mut innovation_cov = Vec::with_capacity(blocks);
    let lam = k.lambda_max().max(f64::MIN_POSITIVE);
    for b in 0..blocks {
        let lo = b * n;
        let kii = kk.view((lo, lo), (n, n)).into_owned();
        if b == 0 {
            predictors.push(DMatrix::zeros(n, 0));
            innovation_cov.push(kii);
            continue;
        }
        let past = kk.view((0, 0), (lo, lo)).into_owned();
        let cross = kk.view((lo, 0), (n, lo)).into_owned();
        let pinv = past.pseudo_inverse(SINGULAR_TOL * lam).expect("non-negative epsilon");
        let w = &cross * pinv;
        let kb = &kii - &w * cross.transpose();
        let kb = (&kb + kb.transpose()) * 0.5;
        predictors.push(w);
        innovation_cov.push(kb);
    }
    Ok(BlockInnovations { n, predictors, innovation_cov })
}

/// Eigen-split of a possibly singular innovation covariance.
#[derive(Debug, Clone)]
pub struct Subspace {
    pub rank: usize,
    /// Orthonormal eigenvectors as columns, eigenvalues descending.
    pub basis: DMatrix<f64>,
    /// The `rank` nonzero eigenvalues.
    pub eigenvalues: Vec<f64>,
}

impl Subspace {
    /// Coordinates of `v` in the eigenbasis.
    pub fn coordinates(&self, v: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(v);
        (self.basis.transpose() * v).iter().copied().collect()
    }

    /// Completion rule: the first `rank` coordinates come from `active`
    /// (quantized), the rest from the prediction, which carries no innovation there.
    pub fn complete(&self, active: &[f64], predicted: &[f64]) -> Vec<f64> {
        let mut c = self.coordinates(predicted);
        c[..self.rank].copy_from_slice(&active[..self.rank]);
        (&self.basis * DVector::from_vec(c)).iter().copied().collect()
    }
}

/// Eigenvalues below `tol·λ_max` count as zero.
pub fn vector_gs_degenerate(k_b: &CovarianceMatrix, tol: f64) -> Subspace {
    let n = k_b.dim();
    let eig = SymmetricEigen::new(k_b.matrix().clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).expect("finite eigenvalues").then(a.cmp(&b))
    });
    let lam_max = eig.eigenvalues.max().max(0.0);
    let mut basis = DMatrix::zeros(n, n);
    let mut eigenvalues = Vec::new();
    for (c, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        if let Some(first) = col.iter().find(|v| v.abs() > 1e-12) {
            if *first < 0.0 {
                col = -col;
            }
        }
        basis.set_column(c, &col);
        let lam = eig.eigenvalues[src];
        if lam_max > 0.0 && lam > tol * lam_max {
            eigenvalues.push(lam);
        }
    }
    Subspace { rank: eigenvalues.len(), basis, eigenvalues }
}

/// Shaping matrix `A` with `A·(σ²I)·Aᵀ = K_B` for a cubic base lattice of
/// per-axis second moment `sigma2`, via the lower Cholesky factor.
pub fn shaping_matrix(k_b: &CovarianceMatrix, sigma2: f64) -> Result<DMatrix<f64>> {
    if !(sigma2 > 0.0) {
        return Err(MdqError::InvalidParameter("base second moment must be positive".into()));
    }
    let chol = k_b.matrix().clone().cholesky().ok_or_else(|| {
        MdqError::Degenerate("innovation covariance is singular; quantize in its eigen-subspace".into())
    })?;
    Ok(chol.l() / sigma2.sqrt())
}

/// Eigen-based alternative to [`shaping_matrix`]: `A = U Λ^{1/2} / σ`.
pub fn shaping_matrix_eigen(k_b: &CovarianceMatrix, sigma2: f64) -> Result<DMatrix<f64>> {
    let s = vector_gs_degenerate(k_b, SINGULAR_TOL);
    if s.rank < k_b.dim() {
        return Err(MdqError::Degenerate("innovation covariance is singular".into()));
    }
    let root = DMatrix::from_diagonal(&DVector::from_iterator(
        s.rank,
        s.eigenvalues.iter().map(|v| v.sqrt()),
    ));
    Ok(&s.basis * root / sigma2.sqrt())
}
