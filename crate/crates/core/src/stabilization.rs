//! Penalty search that drives the spectral radius of the learned state
//! operator below a target.
//!
//! The ridge penalty shrinks `M`, and `rho(M) <= ||M||` for every induced
//! norm, so a large enough penalty always yields a stable operator. The search
//! looks for a zero of
//!
//! ```text
//! f(lambda) = rho_desired - rho(M(lambda))
//! ```
//!
//! by first growing an upper bracket geometrically from a tiny penalty and
//! then bisecting (or applying regula falsi) until `0 <= f <= f_tol`.
//! Acceptance is decided on the value of `f`, never on the bracket width, so
//! a returned model always satisfies `rho(M) <= rho_desired`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::regression::{fit_ridge, RidgeConfig};
use crate::types::{ControlledLinearModel, FitReport, SnapshotSystem};

const SCHUR_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SearchMethod {
    #[default]
    Bisection,
    RegulaFalsi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilizationConfig {
    pub rho_desired: f64,
    pub f_tol: f64,
    pub lambda_bracket_growth: f64,
    pub initial_lambda: f64,
    pub max_expansions: usize,
    pub max_iterations: usize,
    pub method: SearchMethod,
}

impl Default for StabilizationConfig {
    fn default() -> Self {
        Self {
            rho_desired: 0.999,
            f_tol: 1e-4,
            lambda_bracket_growth: 10.0,
            initial_lambda: 1e-8,
            max_expansions: 60,
            max_iterations: 200,
            method: SearchMethod::Bisection,
        }
    }
}

impl StabilizationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho_desired > 0.0 && self.rho_desired <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "rho_desired must lie in (0, 1], got {}",
                self.rho_desired
            )));
        }
        if !(self.f_tol > 0.0) {
            return Err(Error::InvalidConfig("f_tol must be positive".into()));
        }
        if !(self.lambda_bracket_growth > 1.0) {
            return Err(Error::InvalidConfig("bracket growth must exceed 1".into()));
        }
        if !(self.initial_lambda > 0.0) {
            return Err(Error::InvalidConfig("initial penalty must be positive".into()));
        }
        Ok(())
    }
}

/// Largest eigenvalue modulus, from a real Schur decomposition.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("operator"));
    }
    let schur = m
        .clone()
        .try_schur(f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or(Error::EigenFailure)?;
    Ok(schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Result of a penalty search over an arbitrary fit.
#[derive(Debug, Clone)]
pub struct PenaltySearch<T> {
    pub lambda: f64,
    pub iterations: usize,
    pub rho_at_zero: f64,
    pub rho: f64,
    pub fit: T,
    /// False when the unpenalized fit already met the target.
    pub searched: bool,
}

/// Bracketed root search on `rho_desired - rho(fit(lambda))`.
///
/// `fit` produces a model for a penalty and `rho` measures it. Every call to
/// `fit` after the one at `lambda = 0` counts as an iteration.
pub fn search_penalty<T, F, R>(mut fit: F, rho: R, cfg: &StabilizationConfig) -> Result<PenaltySearch<T>>
where
    F: FnMut(f64) -> Result<T>,
    R: Fn(&T) -> Result<f64>,
{
    cfg.validate()?;
    let gap = |r: f64| cfg.rho_desired - r;
    let accept = |f: f64| (0.0..=cfg.f_tol).contains(&f);

    let fit0 = fit(0.0)?;
    let rho0 = rho(&fit0)?;
    if gap(rho0) >= 0.0 {
        return Ok(PenaltySearch {
            lambda: 0.0,
            iterations: 0,
            rho_at_zero: rho0,
            rho: rho0,
            fit: fit0,
            searched: false,
        });
    }

    let mut iterations = 0;
    let done = |lambda, iterations, r, fit| {
        Ok(PenaltySearch {
            lambda,
            iterations,
            rho_at_zero: rho0,
            rho: r,
            fit,
            searched: true,
        })
    };

    // grow the upper end until the fit is stable
    let (mut lo, mut f_lo) = (0.0, gap(rho0));
    let mut hi = cfg.initial_lambda;
    let mut expansions = 0;
    let mut f_hi = loop {
        let model = fit(hi)?;
        let r = rho(&model)?;
        iterations += 1;
        let f = gap(r);
        if accept(f) {
            return done(hi, iterations, r, model);
        }
        if f > 0.0 {
            break f;
        }
        expansions += 1;
        if expansions > cfg.max_expansions {
            return Err(Error::BracketFailure { expansions });
        }
        lo = hi;
        f_lo = f;
        hi *= cfg.lambda_bracket_growth;
    };

    // regula falsi falls back to a midpoint after two one-sided updates
    let mut same_side = 0i32;
    loop {
        if iterations >= cfg.max_iterations {
            return Err(Error::SearchExhausted { iterations, lambda: hi });
        }
        let mid = 0.5 * (lo + hi);
        let c = match cfg.method {
            SearchMethod::Bisection => mid,
            SearchMethod::RegulaFalsi if same_side.abs() >= 2 => {
                same_side = 0;
                mid
            }
            SearchMethod::RegulaFalsi => {
                let c = hi - f_hi * (hi - lo) / (f_hi - f_lo);
                if c > lo && c < hi && c.is_finite() {
                    c
                } else {
                    mid
                }
            }
        };
        let model = fit(c)?;
        let r = rho(&model)?;
        iterations += 1;
        let f = gap(r);
        if accept(f) {
            return done(c, iterations, r, model);
        }
        if f < 0.0 {
            lo = c;
            f_lo = f;
            same_side = if same_side < 0 { same_side - 1 } else { -1 };
        } else {
            hi = c;
            f_hi = f;
            same_side = if same_side > 0 { same_side + 1 } else { 1 };
        }
    }
}

/// `f(lambda) = rho_desired - rho(M(lambda))` for the ridge fit.
pub fn stability_gap(sys: &SnapshotSystem, cfg: &RidgeConfig, rho_desired: f64) -> Result<f64> {
    let model = fit_ridge(sys, cfg)?;
    Ok(rho_desired - model.spectral_radius)
}

/// Searches the ridge penalty; returns `lambda* = 0` without iterating when
/// the unpenalized fit is already stable enough.
pub fn find_stabilizing_lambda(
    sys: &SnapshotSystem,
    ridge: &RidgeConfig,
    cfg: &StabilizationConfig,
) -> Result<(f64, FitReport)> {
    let model = fit_stable(sys, ridge, cfg)?;
    Ok((model.lambda, model.fit_report))
}

/// Ridge fit whose state operator satisfies `rho(M) <= rho_desired`.
pub fn fit_stable(
    sys: &SnapshotSystem,
    ridge: &RidgeConfig,
    cfg: &StabilizationConfig,
) -> Result<ControlledLinearModel> {
    let outcome = search_penalty(
        |lambda| fit_ridge(sys, &ridge.at(lambda)),
        |m: &ControlledLinearModel| Ok(m.spectral_radius),
        cfg,
    )?;
    let mut model = outcome.fit;
    model.fit_report.lambda_search_iterations = outcome.iterations;
    model.fit_report.rho_at_lambda_zero = outcome.rho_at_zero;
    model.fit_report.stabilized = outcome.searched;
    Ok(model)
}
