//! Least-squares and ridge fits of the stacked operator `[M N]`.
//!
//! The ridge problem
//!
//! ```text
//! min ||X1 - [M N] [X0; U0]||_F^2 + lambda^2 ||M||_F^2
//! ```
//!
//! is solved as an ordinary least-squares problem on augmented matrices:
//!
//! ```text
//! X1_bar = [X1  0]        Y0_bar = [X0  lambda*I]
//!                                  [U0  0       ]
//! ```
//!
//! so that `[M N] = X1_bar * pinv(Y0_bar)`. With `penalize_control_block`
//! the control rows get their own `lambda*I` column block as well.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{residual_frobenius, ThinSvd};
use crate::stabilization::spectral_radius;
use crate::types::{ControlledLinearModel, FitReport, SnapshotSystem};

/// Relative singular-value cutoff used for pseudoinverses.
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RidgeSolver {
    /// One SVD of the augmented regressor matrix.
    #[default]
    AugmentedPseudoinverse,
    /// Regularized normal equations solved row by row.
    PerRowRidge,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RidgeConfig {
    pub lambda: f64,
    pub solver: RidgeSolver,
    pub penalize_control_block: bool,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            solver: RidgeSolver::AugmentedPseudoinverse,
            penalize_control_block: false,
        }
    }
}

impl RidgeConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    pub fn at(&self, lambda: f64) -> Self {
        Self { lambda, ..*self }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "ridge penalty must be a finite non-negative number, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// SVD-based Moore-Penrose inverse; singular values at or below
/// `rank_tol * sigma_max` are treated as zero.
pub fn pseudoinverse(a: &DMatrix<f64>, rank_tol: f64) -> Result<DMatrix<f64>> {
    let svd = ThinSvd::new(a)?;
    Ok(svd.pinv_truncated(svd.rank(rank_tol)))
}

/// Augmented `(X1_bar, Y0_bar)` pair for penalty `lambda`.
pub(crate) fn augmented_system(
    sys: &SnapshotSystem,
    lambda: f64,
    penalize_control: bool,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let dim = sys.state_dim();
    let dp = sys.feature_dim();
    let ns = sys.pair_count();
    let extra = dim + if penalize_control { dp } else { 0 };

    let mut x1_bar = DMatrix::zeros(dim, ns + extra);
    x1_bar.columns_mut(0, ns).copy_from(&sys.x1);

    let mut y0_bar = DMatrix::zeros(dim + dp, ns + extra);
    y0_bar.view_mut((0, 0), (dim, ns)).copy_from(&sys.x0);
    y0_bar.view_mut((dim, 0), (dp, ns)).copy_from(&sys.u0);
    for i in 0..extra {
        y0_bar[(i, ns + i)] = lambda;
    }
    (x1_bar, y0_bar)
}

fn validate_system(sys: &SnapshotSystem) -> Result<()> {
    if sys.pair_count() == 0 || sys.state_dim() == 0 {
        return Err(Error::EmptySystem);
    }
    if sys.x1.nrows() != sys.state_dim() || sys.u0.ncols() != sys.pair_count() || sys.x1.ncols() != sys.pair_count() {
        return Err(Error::DimensionMismatch("snapshot matrices disagree in shape".into()));
    }
    sys.check_finite()
}

/// Stacked operator `[M N]` for the given penalty.
pub(crate) fn ridge_operator(sys: &SnapshotSystem, cfg: &RidgeConfig) -> Result<DMatrix<f64>> {
    cfg.validate()?;
    validate_system(sys)?;
    match cfg.solver {
        RidgeSolver::AugmentedPseudoinverse => {
            let (x1_bar, y0_bar) = augmented_system(sys, cfg.lambda, cfg.penalize_control_block);
            let pinv = pseudoinverse(&y0_bar, DEFAULT_RANK_TOL)?;
            Ok(x1_bar * pinv)
        }
        RidgeSolver::PerRowRidge => per_row_ridge(sys, cfg),
    }
}

fn per_row_ridge(sys: &SnapshotSystem, cfg: &RidgeConfig) -> Result<DMatrix<f64>> {
    let dim = sys.state_dim();
    let y0 = sys.regressors();
    let p = y0.nrows();
    let mut gram = &y0 * y0.transpose();
    let lam2 = cfg.lambda * cfg.lambda;
    let penalized = if cfg.penalize_control_block { p } else { dim };
    for i in 0..penalized {
        gram[(i, i)] += lam2;
    }
    let rhs = &y0 * sys.x1.transpose();

    let solve: Box<dyn Fn(usize) -> nalgebra::DVector<f64> + Sync> = match gram.clone().cholesky() {
        Some(chol) => Box::new(move |i| chol.solve(&rhs.column(i).into_owned())),
        None => {
            let ginv = pseudoinverse(&gram, DEFAULT_RANK_TOL)?;
            Box::new(move |i| &ginv * rhs.column(i))
        }
    };
    let rows: Vec<_> = (0..dim).into_par_iter().map(&*solve).collect();
    let mut op = DMatrix::zeros(dim, p);
    for (i, r) in rows.iter().enumerate() {
        op.row_mut(i).copy_from(&r.transpose());
    }
    Ok(op)
}

/// Splits `[M N]` and wraps it with diagnostics.
pub(crate) fn model_from_operator(
    sys: &SnapshotSystem,
    op: &DMatrix<f64>,
    lambda: f64,
) -> Result<ControlledLinearModel> {
    let dim = sys.state_dim();
    let m = op.columns(0, dim).into_owned();
    let n = op.columns(dim, sys.feature_dim()).into_owned();
    let rho = spectral_radius(&m)?;
    let residual = residual_frobenius(&sys.x1, op, &sys.regressors());
    Ok(ControlledLinearModel {
        m,
        n,
        lambda,
        spectral_radius: rho,
        feature_spec: sys.feature_spec,
        scaling: sys.scaling.clone(),
        control_dim: sys.control_dim,
        dt: sys.dt,
        fit_report: FitReport {
            residual_frobenius: residual,
            lambda_search_iterations: 0,
            rho_at_lambda_zero: rho,
            stabilized: false,
        },
    })
}

/// Minimum-norm least-squares fit, `lambda = 0`.
pub fn fit_ols(sys: &SnapshotSystem) -> Result<ControlledLinearModel> {
    validate_system(sys)?;
    let op = &sys.x1 * pseudoinverse(&sys.regressors(), DEFAULT_RANK_TOL)?;
    model_from_operator(sys, &op, 0.0)
}

pub fn fit_ridge(sys: &SnapshotSystem, cfg: &RidgeConfig) -> Result<ControlledLinearModel> {
    let op = ridge_operator(sys, cfg)?;
    let mut model = model_from_operator(sys, &op, cfg.lambda)?;
    if cfg.lambda > 0.0 {
        model.fit_report.rho_at_lambda_zero = f64::NAN;
    }
    Ok(model)
}
