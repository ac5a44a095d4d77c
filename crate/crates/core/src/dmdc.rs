//! Dynamic mode decomposition with control on the ridge-augmented snapshot
//! matrices, its reduced-order projection, and open-loop rollouts.
//!
//! With `Y0_bar = Xi~ S~ V~^T` truncated at rank `r~`, the operators are
//!
//! ```text
//! M = X1_bar V~ S~^-1 Xi1~^T        (Xi1~ = first D rows of Xi~)
//! N = X1_bar V~ S~^-1 Xi2~^T        (Xi2~ = remaining d' rows)
//! ```
//!
//! The reduced model uses the leading `r` left singular vectors `Xi` of
//! `X1_bar`: `M_hat = Xi^T M Xi`, `N_hat = Xi^T N`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::features::control_features;
use crate::linalg::{residual_frobenius, ThinSvd};
use crate::regression::{augmented_system, DEFAULT_RANK_TOL};
use crate::stabilization::{search_penalty, spectral_radius, StabilizationConfig};
use crate::types::{ControlledLinearModel, FitReport, ReducedControlledModel, Scaling, SnapshotSystem};

/// Any state entry beyond this magnitude aborts a rollout.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SvdTruncation {
    FixedRank(usize),
    /// Keep the leading singular values holding this fraction of the
    /// squared-singular-value energy.
    Energy(f64),
}

impl Default for SvdTruncation {
    fn default() -> Self {
        SvdTruncation::Energy(1.0 - 1e-10)
    }
}

impl SvdTruncation {
    fn validate(&self) -> Result<()> {
        match *self {
            SvdTruncation::FixedRank(0) => Err(Error::InvalidConfig("fixed rank must be at least 1".into())),
            SvdTruncation::Energy(e) if !(e > 0.0 && e <= 1.0) => Err(Error::InvalidConfig(format!(
                "energy fraction must lie in (0, 1], got {e}"
            ))),
            _ => Ok(()),
        }
    }

    /// Rank selected from `svd`, never above its numerical rank.
    fn select(&self, svd: &ThinSvd, min_dim: usize) -> Result<usize> {
        self.validate()?;
        let numerical = svd.rank(DEFAULT_RANK_TOL);
        let k = match *self {
            SvdTruncation::FixedRank(k) => {
                if k > min_dim {
                    return Err(Error::RankTooLarge {
                        requested: k,
                        available: min_dim,
                    });
                }
                k
            }
            SvdTruncation::Energy(e) => svd.energy_rank(e),
        };
        Ok(k.min(numerical))
    }
}

/// Factors shared by the full and reduced DMDc operators.
struct DmdcFactors {
    /// `X1_bar V~ S~^-1`, `D x r~`.
    left: DMatrix<f64>,
    /// `Xi1~^T`, `r~ x D`.
    xi1_t: DMatrix<f64>,
    /// `Xi2~^T`, `r~ x d'`.
    xi2_t: DMatrix<f64>,
    x1_bar: DMatrix<f64>,
    rank: usize,
}

impl DmdcFactors {
    fn new(sys: &SnapshotSystem, lambda: f64, trunc: SvdTruncation) -> Result<Self> {
        if sys.pair_count() == 0 || sys.state_dim() == 0 {
            return Err(Error::EmptySystem);
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "penalty must be non-negative, got {lambda}"
            )));
        }
        sys.check_finite()?;
        let dim = sys.state_dim();
        let dp = sys.feature_dim();
        let (x1_bar, y0_bar) = augmented_system(sys, lambda, false);
        let svd = ThinSvd::new(&y0_bar)?;
        let min_dim = y0_bar.nrows().min(y0_bar.ncols());
        let rank = trunc.select(&svd, min_dim)?;

        let mut v_scaled = svd.v_t.rows(0, rank).transpose();
        for (j, mut col) in v_scaled.column_iter_mut().enumerate() {
            col /= svd.s[j];
        }
        let left = &x1_bar * v_scaled;
        let xi = svd.u.columns(0, rank);
        Ok(Self {
            left,
            xi1_t: xi.rows(0, dim).transpose(),
            xi2_t: xi.rows(dim, dp).transpose(),
            x1_bar,
            rank,
        })
    }
}

/// DMDc operators `(M, N)` at penalty `lambda` with input-space truncation.
pub fn fit_dmdc(sys: &SnapshotSystem, lambda: f64, trunc_input: SvdTruncation) -> Result<ControlledLinearModel> {
    let f = DmdcFactors::new(sys, lambda, trunc_input)?;
    let m = &f.left * &f.xi1_t;
    let n = &f.left * &f.xi2_t;
    let rho = spectral_radius(&m)?;
    let residual = (&sys.x1 - &m * &sys.x0 - &n * &sys.u0).norm();
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
            rho_at_lambda_zero: if lambda == 0.0 { rho } else { f64::NAN },
            stabilized: false,
        },
    })
}

/// Reduced-order operators on the leading output-space singular vectors.
pub fn reduce_model(
    sys: &SnapshotSystem,
    lambda: f64,
    trunc_input: SvdTruncation,
    trunc_output: SvdTruncation,
) -> Result<ReducedControlledModel> {
    let f = DmdcFactors::new(sys, lambda, trunc_input)?;
    let out_svd = ThinSvd::new(&f.x1_bar)?;
    let available = out_svd.rank(DEFAULT_RANK_TOL);
    let r = match trunc_output {
        SvdTruncation::FixedRank(r) => {
            trunc_output.validate()?;
            if r > available {
                return Err(Error::RankTooLarge {
                    requested: r,
                    available,
                });
            }
            r
        }
        SvdTruncation::Energy(_) => trunc_output.select(&out_svd, available)?,
    };
    if r == 0 {
        return Err(Error::RankTooLarge {
            requested: 1,
            available: 0,
        });
    }
    let basis = out_svd.u.columns(0, r).into_owned();
    let proj = basis.transpose() * &f.left;
    let m_hat = &proj * &f.xi1_t * &basis;
    let n_hat = &proj * &f.xi2_t;
    Ok(ReducedControlledModel {
        m_hat,
        n_hat,
        basis,
        rank: r,
        input_rank: f.rank,
        lambda,
        feature_spec: sys.feature_spec,
        scaling: sys.scaling.clone(),
        control_dim: sys.control_dim,
        dt: sys.dt,
    })
}

/// DMDc fit with the penalty searched so that `rho(M) <= rho_desired`.
pub fn fit_stable_dmdc(
    sys: &SnapshotSystem,
    trunc_input: SvdTruncation,
    cfg: &StabilizationConfig,
) -> Result<ControlledLinearModel> {
    let outcome = search_penalty(
        |lambda| fit_dmdc(sys, lambda, trunc_input),
        |m: &ControlledLinearModel| Ok(m.spectral_radius),
        cfg,
    )?;
    let mut model = outcome.fit;
    model.fit_report.lambda_search_iterations = outcome.iterations;
    model.fit_report.rho_at_lambda_zero = outcome.rho_at_zero;
    model.fit_report.stabilized = outcome.searched;
    Ok(model)
}

/// Reduced fit with the penalty searched on `rho(M_hat)`.
pub fn fit_stable_reduced(
    sys: &SnapshotSystem,
    trunc_input: SvdTruncation,
    trunc_output: SvdTruncation,
    cfg: &StabilizationConfig,
) -> Result<(ReducedControlledModel, FitReport)> {
    let outcome = search_penalty(
        |lambda| reduce_model(sys, lambda, trunc_input, trunc_output),
        |m: &ReducedControlledModel| spectral_radius(&m.m_hat),
        cfg,
    )?;
    let model = outcome.fit;
    let lifted_m = &model.basis * &model.m_hat * model.basis.transpose();
    let lifted_n = &model.basis * &model.n_hat;
    let residual = (&sys.x1 - lifted_m * &sys.x0 - lifted_n * &sys.u0).norm();
    let report = FitReport {
        residual_frobenius: residual,
        lambda_search_iterations: outcome.iterations,
        rho_at_lambda_zero: outcome.rho_at_zero,
        stabilized: outcome.searched,
    };
    Ok((model, report))
}

/// Scaled feature columns `0..steps` for a raw control sequence.
fn rollout_features(
    controls: &DMatrix<f64>,
    steps: usize,
    control_dim: usize,
    spec: &crate::features::FeatureSpec,
    scaling: Option<&Scaling>,
    dt: f64,
) -> Result<DMatrix<f64>> {
    if controls.nrows() != control_dim {
        return Err(Error::DimensionMismatch(format!(
            "controls have {} rows, model expects {control_dim}",
            controls.nrows()
        )));
    }
    if controls.ncols() < steps {
        return Err(Error::DimensionMismatch(format!(
            "{} control columns cannot drive {steps} steps",
            controls.ncols()
        )));
    }
    let feats = control_features(&controls.columns(0, steps).into_owned(), spec, dt)?;
    Ok(match scaling {
        Some(s) => s.scale_features(&feats),
        None => feats,
    })
}

fn check_state(z: &DVector<f64>, step: usize) -> Result<()> {
    if z.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT) {
        return Err(Error::Diverged { step });
    }
    Ok(())
}

/// Open-loop prediction `z_{n+1} = M z_n + N u_n` from `z0`. Returns a
/// `D x (steps + 1)` matrix whose first column is `z0`.
pub fn rollout(
    model: &ControlledLinearModel,
    z0: &DVector<f64>,
    controls: &DMatrix<f64>,
    steps: usize,
) -> Result<DMatrix<f64>> {
    let dim = model.state_dim();
    if z0.len() != dim {
        return Err(Error::DimensionMismatch(format!(
            "initial state has {} entries, model expects {dim}",
            z0.len()
        )));
    }
    let feats = rollout_features(
        controls,
        steps,
        model.control_dim,
        &model.feature_spec,
        model.scaling.as_ref(),
        model.dt,
    )?;
    let mut out = DMatrix::zeros(dim, steps + 1);
    out.set_column(0, z0);
    let mut z = match &model.scaling {
        Some(s) => s.scale_state(z0),
        None => z0.clone(),
    };
    for n in 0..steps {
        z = &model.m * &z + &model.n * feats.column(n);
        let raw = match &model.scaling {
            Some(s) => s.unscale_state(&z),
            None => z.clone(),
        };
        check_state(&raw, n + 1)?;
        out.set_column(n + 1, &raw);
    }
    Ok(out)
}

/// Rollout in reduced coordinates, lifted back through the basis. The first
/// column is the projection of `z0` onto the basis.
pub fn rollout_reduced(
    model: &ReducedControlledModel,
    z0: &DVector<f64>,
    controls: &DMatrix<f64>,
    steps: usize,
) -> Result<DMatrix<f64>> {
    let dim = model.state_dim();
    if z0.len() != dim {
        return Err(Error::DimensionMismatch(format!(
            "initial state has {} entries, model expects {dim}",
            z0.len()
        )));
    }
    let feats = rollout_features(
        controls,
        steps,
        model.control_dim,
        &model.feature_spec,
        model.scaling.as_ref(),
        model.dt,
    )?;
    let lift = |zh: &DVector<f64>| {
        let z = &model.basis * zh;
        match &model.scaling {
            Some(s) => s.unscale_state(&z),
            None => z,
        }
    };
    let scaled0 = match &model.scaling {
        Some(s) => s.scale_state(z0),
        None => z0.clone(),
    };
    let mut zh = model.basis.transpose() * scaled0;
    let mut out = DMatrix::zeros(dim, steps + 1);
    out.set_column(0, &lift(&zh));
    for n in 0..steps {
        zh = &model.m_hat * &zh + &model.n_hat * feats.column(n);
        let raw = lift(&zh);
        check_state(&raw, n + 1)?;
        out.set_column(n + 1, &raw);
    }
    Ok(out)
}

/// Training residual of a fitted model on its own snapshot system.
pub fn training_residual(model: &ControlledLinearModel, sys: &SnapshotSystem) -> f64 {
    let mut op = DMatrix::zeros(model.state_dim(), model.state_dim() + model.feature_dim());
    op.columns_mut(0, model.state_dim()).copy_from(&model.m);
    op.columns_mut(model.state_dim(), model.feature_dim())
        .copy_from(&model.n);
    residual_frobenius(&sys.x1, &op, &sys.regressors())
}
