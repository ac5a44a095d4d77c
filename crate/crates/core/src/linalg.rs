//! Small wrappers around nalgebra's SVD used by the regression and DMDc code.

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{Error, Result};

const SVD_MAX_ITER: usize = 50_000;

/// Thin SVD `A = U diag(s) V^T` with singular values in descending order.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

impl ThinSvd {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        if a.iter().any(|x| !x.is_finite()) {
            return Err(Error::SvdFailure);
        }
        if a.nrows() == 0 || a.ncols() == 0 {
            let k = 0;
            return Ok(Self {
                u: DMatrix::zeros(a.nrows(), k),
                s: DVector::zeros(k),
                v_t: DMatrix::zeros(k, a.ncols()),
            });
        }
        let svd = SVD::try_new(a.clone(), true, true, f64::EPSILON, SVD_MAX_ITER).ok_or(Error::SvdFailure)?;
        Ok(Self {
            u: svd.u.ok_or(Error::SvdFailure)?,
            s: svd.singular_values,
            v_t: svd.v_t.ok_or(Error::SvdFailure)?,
        })
    }

    /// Number of singular values above `rel_tol * sigma_max`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let smax = self.s.iter().copied().fold(0.0, f64::max);
        if smax == 0.0 {
            return 0;
        }
        self.s.iter().filter(|&&s| s > rel_tol * smax).count()
    }

    /// Smallest `k` whose leading squared singular values hold at least
    /// `fraction` of the total.
    pub fn energy_rank(&self, fraction: f64) -> usize {
        let total: f64 = self.s.iter().map(|s| s * s).sum();
        if total == 0.0 {
            return 0;
        }
        let mut acc = 0.0;
        for (k, s) in self.s.iter().enumerate() {
            acc += s * s;
            if acc >= fraction * total {
                return k + 1;
            }
        }
        self.s.len()
    }

    /// Moore-Penrose inverse built from the leading `k` triplets.
    pub fn pinv_truncated(&self, k: usize) -> DMatrix<f64> {
        let k = k.min(self.s.len());
        let u = self.u.columns(0, k);
        let v_t = self.v_t.rows(0, k);
        let mut v_scaled = v_t.transpose();
        for (j, mut col) in v_scaled.column_iter_mut().enumerate() {
            col /= self.s[j];
        }
        v_scaled * u.transpose()
    }
}

/// Frobenius norm of `x1 - op * y0`.
pub fn residual_frobenius(x1: &DMatrix<f64>, op: &DMatrix<f64>, y0: &DMatrix<f64>) -> f64 {
    (x1 - op * y0).norm()
}
