//! Independent re-derivation of the Gaussian two-description test channel.
//!
//! The channel is `U_i = X + T₀ + T_i` with `E T₁T₂ = −σ_T1σ_T2`, and the
//! split description is `V = U₂ + T₃`. Rates are mutual informations
//! computed from log-determinants of the joint covariance.
#![allow(dead_code)]

use nalgebra::DMatrix;

#[derive(Debug, Clone, Copy)]
pub struct Oracle {
    pub v: f64,
    pub d: [f64; 3],
    pub t0: f64,
    pub t1: f64,
    pub t2: f64,
}

pub fn psi(v: f64, d1: f64, d2: f64, d3: f64) -> f64 {
    let a = (v - d3) * (v - d3);
    let b = ((v - d1) * (v - d2)).sqrt() - ((d1 - d3) * (d2 - d3)).sqrt();
    a / (a - b * b)
}

impl Oracle {
    pub fn new(v: f64, d1: f64, d2: f64, d3: f64) -> Self {
        let t0 = d3 * v / (v - d3);
        Self { v, d: [d1, d2, d3], t0, t1: d1 * v / (v - d1) - t0, t2: d2 * v / (v - d2) - t0 }
    }

    /// Covariance of `(X, U₁, U₂)` and, for a finite `t3`, `V`.
    pub fn cov(&self, t3: Option<f64>) -> DMatrix<f64> {
        let (v, t0) = (self.v, self.t0);
        let c12 = v + t0 - (self.t1 * self.t2).sqrt();
        let mut k = DMatrix::from_row_slice(3, 3, &[v, v, v, v, v + t0 + self.t1, c12, v, c12, v + t0 + self.t2]);
        if let Some(t3) = t3 {
            k = k.resize(4, 4, 0.0);
            for i in 0..3 {
                k[(i, 3)] = k[(i, 2)];
                k[(3, i)] = k[(2, i)];
            }
            k[(3, 3)] = k[(2, 2)] + t3;
        }
        k
    }

    /// `log₂ det` of the principal submatrix on `idx`; zero when empty.
    fn logdet(k: &DMatrix<f64>, idx: &[usize]) -> f64 {
        if idx.is_empty() {
            return 0.0;
        }
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, j| k[(idx[i], idx[j])]);
        sub.determinant().log2()
    }

    /// `I(A; B | C)` in bits.
    pub fn mi(k: &DMatrix<f64>, a: &[usize], b: &[usize], c: &[usize]) -> f64 {
        let cat = |x: &[usize], y: &[usize]| [x, y].concat();
        0.5 * (Self::logdet(k, &cat(a, c)) + Self::logdet(k, &cat(b, c)) - Self::logdet(k, &cat(&cat(a, b), c)) - Self::logdet(k, c))
    }

    /// Linear MMSE of `X` from the listed components.
    pub fn mmse(&self, from: &[usize]) -> f64 {
        let k = self.cov(None);
        let kyy = DMatrix::from_fn(from.len(), from.len(), |i, j| k[(from[i], from[j])]);
        let kxy = DMatrix::from_fn(1, from.len(), |_, j| k[(0, from[j])]);
        let g = &kxy * kyy.try_inverse().expect("invertible");
        self.v - (g * kxy.transpose())[(0, 0)]
    }

    /// `(R₁, R₂)` at `σ²_T3 = t3`; `None` is the first-description-first vertex.
    pub fn rates(&self, t3: Option<f64>) -> (f64, f64) {
        match t3 {
            None => {
                let k = self.cov(None);
                (Self::mi(&k, &[0], &[1], &[]), Self::mi(&k, &[0, 1], &[2], &[]))
            }
            Some(0.0) => {
                let k = self.cov(None);
                (Self::mi(&k, &[0, 2], &[1], &[]), Self::mi(&k, &[0], &[2], &[]))
            }
            Some(t) => {
                let k = self.cov(Some(t));
                let r1 = Self::mi(&k, &[0, 3], &[1], &[]);
                let r2 = Self::mi(&k, &[0], &[3], &[]) + Self::mi(&k, &[0, 1], &[2], &[3]);
                (r1, r2)
            }
        }
    }

    pub fn sum_rate(&self) -> f64 {
        let k = self.cov(None);
        Self::mi(&k, &[0], &[1, 2], &[]) + Self::mi(&k, &[1], &[2], &[])
    }

    /// Coefficients of `E[U₂ − b₆V | X, U₁, V]` on `(X, U₁, V)`, with `b₆` the
    /// regression coefficient of `U₂` on `V`.
    pub fn refinement_regression(&self, t3: f64) -> (f64, [f64; 3]) {
        let k = self.cov(Some(t3));
        let b6 = k[(2, 3)] / k[(3, 3)];
        let idx = [0usize, 1, 3];
        let kyy = DMatrix::from_fn(3, 3, |i, j| k[(idx[i], idx[j])]);
        let kz = DMatrix::from_fn(3, 1, |i, _| k[(2, idx[i])] - b6 * k[(3, idx[i])]);
        let c = kyy.lu().solve(&kz).expect("invertible");
        (b6, [c[0], c[1], c[2]])
    }

    /// `σ²_T3` with equal rates, by bisection on `log σ²_T3`.
    pub fn balanced_t3(&self) -> f64 {
        let gap = |t: f64| {
            let (a, b) = self.rates(Some(t));
            a - b
        };
        let (mut lo, mut hi) = (-20.0f64, 20.0f64);
        assert!(gap(lo.exp()) > 0.0 && gap(hi.exp()) < 0.0, "no balanced point");
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if gap(m.exp()) > 0.0 {
                lo = m;
            } else {
                hi = m;
            }
        }
        (0.5 * (lo + hi)).exp()
    }
}
