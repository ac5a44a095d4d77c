//! Trajectory datasets, snapshot matrices and fitted model containers.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::features::{control_features, d_prime, FeatureSpec};

/// Relative tolerance on the sampling step within and across flights.
pub const DT_REL_TOL: f64 = 1e-6;

/// One uniformly sampled trajectory. Column `k` of `states` / `controls` is
/// snapshot `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Flight {
    pub id: String,
    pub times: Vec<f64>,
    pub states: DMatrix<f64>,
    pub controls: DMatrix<f64>,
}

impl Flight {
    pub fn new(id: impl Into<String>, times: Vec<f64>, states: DMatrix<f64>, controls: DMatrix<f64>) -> Result<Self> {
        let id = id.into();
        if states.ncols() != controls.ncols() || states.ncols() != times.len() {
            return Err(Error::DimensionMismatch(format!(
                "flight `{id}`: {} times, {} state columns, {} control columns",
                times.len(),
                states.ncols(),
                controls.ncols()
            )));
        }
        Ok(Self {
            id,
            times,
            states,
            controls,
        })
    }

    /// Builds a flight with timestamps `t0 + k * dt`.
    pub fn uniform(
        id: impl Into<String>,
        t0: f64,
        dt: f64,
        states: DMatrix<f64>,
        controls: DMatrix<f64>,
    ) -> Result<Self> {
        let times = (0..states.ncols()).map(|k| t0 + k as f64 * dt).collect();
        Self::new(id, times, states, controls)
    }

    pub fn n_snapshots(&self) -> usize {
        self.states.ncols()
    }

    pub fn state_dim(&self) -> usize {
        self.states.nrows()
    }

    pub fn control_dim(&self) -> usize {
        self.controls.nrows()
    }

    pub fn state(&self, k: usize) -> DVector<f64> {
        self.states.column(k).into_owned()
    }

    /// Estimated sampling step; `None` for single-snapshot flights.
    fn step(&self) -> Option<f64> {
        (self.times.len() >= 2).then(|| self.times[1] - self.times[0])
    }
}

/// A set of flights sharing state/control dimensions and sampling step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDataset {
    flights: Vec<Flight>,
    state_dim: usize,
    control_dim: usize,
    dt: f64,
}

impl TrajectoryDataset {
    pub fn new(flights: Vec<Flight>) -> Result<Self> {
        let first = flights
            .first()
            .ok_or_else(|| Error::InvalidConfig("dataset has no flights".into()))?;
        let state_dim = first.state_dim();
        let control_dim = first.control_dim();
        if state_dim == 0 {
            return Err(Error::DimensionMismatch("state dimension must be positive".into()));
        }
        let dt = flights
            .iter()
            .find_map(Flight::step)
            .ok_or_else(|| Error::InvalidConfig("no flight has two snapshots".into()))?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "sampling step must be positive, got {dt}"
            )));
        }

        let mut seen = HashMap::new();
        for f in &flights {
            if seen.insert(f.id.clone(), ()).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate flight id `{}`", f.id)));
            }
            if f.state_dim() != state_dim || f.control_dim() != control_dim {
                return Err(Error::DimensionMismatch(format!(
                    "flight `{}` has D={}, d={} but dataset has D={state_dim}, d={control_dim}",
                    f.id,
                    f.state_dim(),
                    f.control_dim()
                )));
            }
            if f.n_snapshots() < 2 {
                return Err(Error::FlightTooShort {
                    id: f.id.clone(),
                    len: f.n_snapshots(),
                    required: 2,
                });
            }
            for (k, w) in f.times.windows(2).enumerate() {
                let step = w[1] - w[0];
                if (step - dt).abs() > DT_REL_TOL * dt {
                    return Err(Error::NonUniformSampling {
                        flight: f.id.clone(),
                        index: k + 1,
                        found: step,
                        expected: dt,
                    });
                }
            }
            if f.states.iter().chain(f.controls.iter()).any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("flight data"));
            }
        }
        Ok(Self {
            flights,
            state_dim,
            control_dim,
            dt,
        })
    }

    pub fn flights(&self) -> &[Flight] {
        &self.flights
    }

    pub fn into_flights(self) -> Vec<Flight> {
        self.flights
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn control_dim(&self) -> usize {
        self.control_dim
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn flight(&self, id: &str) -> Result<&Flight> {
        self.flights
            .iter()
            .find(|f| f.id == id)
            .ok_or_else(|| Error::UnknownFlight(id.to_string()))
    }

    pub fn flight_ids(&self) -> Vec<&str> {
        self.flights.iter().map(|f| f.id.as_str()).collect()
    }

    /// Keeps the named flights, in the given order.
    pub fn subset(&self, ids: &[&str]) -> Result<Self> {
        let flights = ids
            .iter()
            .map(|id| self.flight(id).cloned())
            .collect::<Result<Vec<_>>>()?;
        Self::new(flights)
    }
}

/// Per-row affine map `x -> (x - mean) / scale` for states and control
/// features.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaling {
    pub state_mean: DVector<f64>,
    pub state_scale: DVector<f64>,
    pub feature_mean: DVector<f64>,
    pub feature_scale: DVector<f64>,
}

impl Scaling {
    /// Column statistics of `states` and `features` (population std). Rows
    /// with (near) zero spread keep unit scale.
    pub fn fit(states: &DMatrix<f64>, features: &DMatrix<f64>) -> Self {
        let (state_mean, state_scale) = row_stats(states);
        let (feature_mean, feature_scale) = row_stats(features);
        Self {
            state_mean,
            state_scale,
            feature_mean,
            feature_scale,
        }
    }

    pub fn identity(state_dim: usize, feature_dim: usize) -> Self {
        Self {
            state_mean: DVector::zeros(state_dim),
            state_scale: DVector::from_element(state_dim, 1.0),
            feature_mean: DVector::zeros(feature_dim),
            feature_scale: DVector::from_element(feature_dim, 1.0),
        }
    }

    pub fn scale_states(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        apply_rows(x, &self.state_mean, &self.state_scale)
    }

    pub fn scale_features(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        apply_rows(x, &self.feature_mean, &self.feature_scale)
    }

    pub fn scale_state(&self, z: &DVector<f64>) -> DVector<f64> {
        (z - &self.state_mean).component_div(&self.state_scale)
    }

    pub fn unscale_state(&self, z: &DVector<f64>) -> DVector<f64> {
        z.component_mul(&self.state_scale) + &self.state_mean
    }
}

fn row_stats(x: &DMatrix<f64>) -> (DVector<f64>, DVector<f64>) {
    let n = x.ncols().max(1) as f64;
    let mean = DVector::from_iterator(x.nrows(), x.row_iter().map(|r| r.sum() / n));
    let scale = DVector::from_iterator(
        x.nrows(),
        x.row_iter().zip(mean.iter()).map(|(r, &m)| {
            let var = r.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            if sd > 1e-12 * (1.0 + m.abs()) {
                sd
            } else {
                1.0
            }
        }),
    );
    (mean, scale)
}

fn apply_rows(x: &DMatrix<f64>, mean: &DVector<f64>, scale: &DVector<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row.apply(|v| *v = (*v - mean[i]) / scale[i]);
    }
    out
}

/// Training matrices: `x0` current states, `x1` successor states, `u0`
/// control features. Column `k` of all three belongs to one transition.
///
/// When the feature spec asks for standardization the stored matrices are
/// already scaled and `scaling` holds the map.
#[derive(Debug, Clone)]
pub struct SnapshotSystem {
    pub x0: DMatrix<f64>,
    pub x1: DMatrix<f64>,
    pub u0: DMatrix<f64>,
    pub feature_spec: FeatureSpec,
    pub scaling: Option<Scaling>,
    pub control_dim: usize,
    pub dt: f64,
}

impl SnapshotSystem {
    /// Builds a system directly from raw matrices (no standardization).
    pub fn from_matrices(x0: DMatrix<f64>, x1: DMatrix<f64>, u0: DMatrix<f64>) -> Result<Self> {
        if x0.ncols() != x1.ncols() || x0.ncols() != u0.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "column counts differ: X0 {}, X1 {}, U0 {}",
                x0.ncols(),
                x1.ncols(),
                u0.ncols()
            )));
        }
        if x0.nrows() != x1.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "X0 has {} rows but X1 has {}",
                x0.nrows(),
                x1.nrows()
            )));
        }
        let spec = if u0.nrows() > 0 {
            FeatureSpec::control_only()
        } else {
            FeatureSpec::state_only()
        };
        let control_dim = u0.nrows();
        Ok(Self {
            x0,
            x1,
            u0,
            feature_spec: spec,
            scaling: None,
            control_dim,
            dt: 1.0,
        })
    }

    pub fn pair_count(&self) -> usize {
        self.x0.ncols()
    }

    pub fn state_dim(&self) -> usize {
        self.x0.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.u0.nrows()
    }

    /// `[X0; U0]`.
    pub fn regressors(&self) -> DMatrix<f64> {
        stack_rows(&self.x0, &self.u0)
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        if self
            .x0
            .iter()
            .chain(self.x1.iter())
            .chain(self.u0.iter())
            .any(|x| !x.is_finite())
        {
            return Err(Error::NonFinite("snapshot matrices"));
        }
        Ok(())
    }
}

pub(crate) fn stack_rows(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    debug_assert_eq!(top.ncols(), bottom.ncols());
    let mut out = DMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    out
}

/// Stacks the transition pairs of the selected flights, flight by flight and
/// in time order. Pairs never straddle two flights.
pub fn assemble_snapshots(dataset: &TrajectoryDataset, flights: &[&str], spec: FeatureSpec) -> Result<SnapshotSystem> {
    if flights.is_empty() {
        return Err(Error::EmptySystem);
    }
    let d = dataset.control_dim();
    let dim = dataset.state_dim();
    let dp = d_prime(&spec, d);
    let required = spec.min_snapshots();

    let mut selected = Vec::with_capacity(flights.len());
    for id in flights {
        let f = dataset.flight(id)?;
        if f.n_snapshots() < required {
            return Err(Error::FlightTooShort {
                id: f.id.clone(),
                len: f.n_snapshots(),
                required,
            });
        }
        selected.push(f);
    }

    let n_s: usize = selected.iter().map(|f| f.n_snapshots() - 1).sum();
    let mut x0 = DMatrix::zeros(dim, n_s);
    let mut x1 = DMatrix::zeros(dim, n_s);
    let mut u0 = DMatrix::zeros(dp, n_s);
    let mut col = 0;
    for f in selected {
        let n = f.n_snapshots() - 1;
        let feats = control_features(&f.controls, &spec, dataset.dt())?;
        x0.columns_mut(col, n).copy_from(&f.states.columns(0, n));
        x1.columns_mut(col, n).copy_from(&f.states.columns(1, n));
        u0.columns_mut(col, n).copy_from(&feats.columns(0, n));
        col += n;
    }

    let scaling = spec.standardize.then(|| Scaling::fit(&x0, &u0));
    if let Some(s) = &scaling {
        x0 = s.scale_states(&x0);
        x1 = s.scale_states(&x1);
        u0 = s.scale_features(&u0);
    }

    Ok(SnapshotSystem {
        x0,
        x1,
        u0,
        feature_spec: spec,
        scaling,
        control_dim: d,
        dt: dataset.dt(),
    })
}

/// Diagnostics recorded alongside every fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub residual_frobenius: f64,
    pub lambda_search_iterations: usize,
    pub rho_at_lambda_zero: f64,
    pub stabilized: bool,
}

/// `z_{n+1} = M z_n + N u_n` in (possibly standardized) fit coordinates.
#[derive(Debug, Clone)]
pub struct ControlledLinearModel {
    pub m: DMatrix<f64>,
    pub n: DMatrix<f64>,
    pub lambda: f64,
    pub spectral_radius: f64,
    pub feature_spec: FeatureSpec,
    pub scaling: Option<Scaling>,
    pub control_dim: usize,
    pub dt: f64,
    pub fit_report: FitReport,
}

impl ControlledLinearModel {
    pub fn state_dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.n.ncols()
    }
}

/// Dynamics projected on the orthonormal basis `xi`:
/// `zhat_{n+1} = M_hat zhat_n + N_hat u_n`, `z = xi zhat`.
#[derive(Debug, Clone)]
pub struct ReducedControlledModel {
    pub m_hat: DMatrix<f64>,
    pub n_hat: DMatrix<f64>,
    pub basis: DMatrix<f64>,
    pub rank: usize,
    pub input_rank: usize,
    pub lambda: f64,
    pub feature_spec: FeatureSpec,
    pub scaling: Option<Scaling>,
    pub control_dim: usize,
    pub dt: f64,
}

impl ReducedControlledModel {
    pub fn state_dim(&self) -> usize {
        self.basis.nrows()
    }
}
