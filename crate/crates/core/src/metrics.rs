//! Range-normalized trajectory errors and the measurement-noise bound.
//!
//! For variable `i`, `err_i(t) = (z_i^GT(t) - z_i^pred(t)) / R_i` where `R_i`
//! is the max-minus-min of `z_i` over every ground-truth flight. Variables
//! with `R_i = 0` are excluded and listed in the report.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hybrid::check_aligned;
use crate::types::TrajectoryDataset;

/// Max minus min of each state variable over all flights.
pub fn variable_ranges(gt: &TrajectoryDataset) -> DVector<f64> {
    let d = gt.state_dim();
    let mut lo = DVector::from_element(d, f64::INFINITY);
    let mut hi = DVector::from_element(d, f64::NEG_INFINITY);
    for f in gt.flights() {
        for col in f.states.column_iter() {
            for i in 0..d {
                lo[i] = lo[i].min(col[i]);
                hi[i] = hi[i].max(col[i]);
            }
        }
    }
    hi - lo
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlightError {
    pub id: String,
    pub times: Vec<f64>,
    /// One row per entry of `ErrorReport::variables`, one column per snapshot.
    pub err: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub ranges: DVector<f64>,
    /// Indices of the variables kept (nonzero range).
    pub variables: Vec<usize>,
    /// Indices dropped because their range is zero.
    pub excluded: Vec<usize>,
    pub flights: Vec<FlightError>,
}

fn split_variables(ranges: &DVector<f64>) -> Result<(Vec<usize>, Vec<usize>)> {
    if ranges.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(Error::NonFinite("variable ranges"));
    }
    let (keep, drop): (Vec<usize>, Vec<usize>) = (0..ranges.len()).partition(|&i| ranges[i] > 0.0);
    if keep.is_empty() {
        return Err(Error::InvalidConfig("every variable has zero range".into()));
    }
    Ok((keep, drop))
}

/// `(gt - other) / range` per flight of `other`, restricted to `vars`.
fn normalized_differences(
    other: &TrajectoryDataset,
    gt: &TrajectoryDataset,
    ranges: &DVector<f64>,
    vars: &[usize],
) -> Result<Vec<FlightError>> {
    if ranges.len() != gt.state_dim() || other.state_dim() != gt.state_dim() {
        return Err(Error::DimensionMismatch(format!(
            "{} ranges for {} ground-truth and {} predicted variables",
            ranges.len(),
            gt.state_dim(),
            other.state_dim()
        )));
    }
    other
        .flights()
        .par_iter()
        .map(|p| {
            let g = gt
                .flight(&p.id)
                .map_err(|_| Error::Misaligned(format!("flight `{}` missing from ground truth", p.id)))?;
            check_aligned(p, g)?;
            let err = DMatrix::from_fn(vars.len(), p.n_snapshots(), |r, k| {
                let i = vars[r];
                (g.states[(i, k)] - p.states[(i, k)]) / ranges[i]
            });
            Ok(FlightError {
                id: p.id.clone(),
                times: p.times.clone(),
                err,
            })
        })
        .collect()
}

pub fn normalized_error(
    predicted: &TrajectoryDataset,
    gt: &TrajectoryDataset,
    ranges: &DVector<f64>,
) -> Result<ErrorReport> {
    let (variables, excluded) = split_variables(ranges)?;
    let flights = normalized_differences(predicted, gt, ranges, &variables)?;
    Ok(ErrorReport {
        ranges: ranges.clone(),
        variables,
        excluded,
        flights,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlightBound {
    pub id: String,
    /// Max over time of the signed normalized difference `(gt - measured) / R`.
    pub signed: DVector<f64>,
    /// Max over time of its absolute value.
    pub absolute: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementBound {
    pub variables: Vec<usize>,
    pub excluded: Vec<usize>,
    pub per_flight: Vec<FlightBound>,
    /// Signed bound over all flights, one entry per kept variable.
    pub signed: DVector<f64>,
    pub absolute: DVector<f64>,
}

impl MeasurementBound {
    pub fn flight(&self, id: &str) -> Option<&FlightBound> {
        self.per_flight.iter().find(|b| b.id == id)
    }
}

impl FlightBound {
    /// Mean over variables of the signed per-variable bound.
    pub fn mean_signed(&self) -> f64 {
        self.signed.mean()
    }

    pub fn mean_absolute(&self) -> f64 {
        self.absolute.mean()
    }
}

pub fn measurement_error_bound(
    measured: &TrajectoryDataset,
    gt: &TrajectoryDataset,
    ranges: &DVector<f64>,
) -> Result<MeasurementBound> {
    let (variables, excluded) = split_variables(ranges)?;
    let diffs = normalized_differences(measured, gt, ranges, &variables)?;
    let k = variables.len();
    let per_flight: Vec<FlightBound> = diffs
        .into_iter()
        .map(|f| FlightBound {
            signed: DVector::from_iterator(k, f.err.row_iter().map(|r| r.max())),
            absolute: DVector::from_iterator(k, f.err.row_iter().map(|r| r.amax())),
            id: f.id,
        })
        .collect();
    let fold = |pick: fn(&FlightBound) -> &DVector<f64>| {
        DVector::from_fn(k, |i, _| {
            per_flight.iter().map(|b| pick(b)[i]).fold(f64::NEG_INFINITY, f64::max)
        })
    };
    let signed = fold(|b| &b.signed);
    let absolute = fold(|b| &b.absolute);
    Ok(MeasurementBound {
        variables,
        excluded,
        per_flight,
        signed,
        absolute,
    })
}

/// Mean of the signed error over time and variables, per flight.
pub fn per_flight_mean_error(report: &ErrorReport) -> Vec<(String, f64)> {
    report.flights.iter().map(|f| (f.id.clone(), f.err.mean())).collect()
}

/// Mean of `|err|` over time and variables, per flight.
pub fn per_flight_mean_abs_error(report: &ErrorReport) -> Vec<(String, f64)> {
    report
        .flights
        .iter()
        .map(|f| {
            (
                f.id.clone(),
                f.err.iter().map(|e| e.abs()).sum::<f64>() / f.err.len() as f64,
            )
        })
        .collect()
}

/// Mean of `|err|` over time for each kept variable of one flight.
pub fn variable_mean_abs_error(flight: &FlightError) -> DVector<f64> {
    DVector::from_iterator(
        flight.err.nrows(),
        flight
            .err
            .row_iter()
            .map(|r| r.iter().map(|e| e.abs()).sum::<f64>() / r.len() as f64),
    )
}

/// `flight,variable,t,err` rows; variables are named `z1..zD`.
pub fn error_table_csv(report: &ErrorReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["flight", "variable", "t", "err"])?;
    for f in &report.flights {
        for (r, &i) in report.variables.iter().enumerate() {
            let name = format!("z{}", i + 1);
            for (k, t) in f.times.iter().enumerate() {
                w.write_record([f.id.as_str(), &name, &t.to_string(), &f.err[(r, k)].to_string()])?;
            }
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Per-flight summary. `err_max_meas` is the mean over variables of the
/// signed per-variable bound on that flight; the `_abs` columns are the
/// absolute-value variants.
pub fn summary_csv(report: &ErrorReport, bound: Option<&MeasurementBound>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["flight", "mean_err", "err_max_meas", "mean_abs_err", "err_max_meas_abs"])?;
    let signed = per_flight_mean_error(report);
    let abs = per_flight_mean_abs_error(report);
    for ((id, mean), (_, mean_abs)) in signed.iter().zip(&abs) {
        let (b, b_abs) = match bound.and_then(|b| b.flight(id)) {
            Some(fb) => (fb.mean_signed().to_string(), fb.mean_absolute().to_string()),
            None => (String::new(), String::new()),
        };
        w.write_record([id.as_str(), &mean.to_string(), &b, &mean_abs.to_string(), &b_abs])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// `variable,err_max_meas,err_max_meas_abs` over all flights.
pub fn bound_csv(bound: &MeasurementBound) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["variable", "err_max_meas", "err_max_meas_abs"])?;
    for (r, &i) in bound.variables.iter().enumerate() {
        w.write_record([
            format!("z{}", i + 1),
            bound.signed[r].to_string(),
            bound.absolute[r].to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}
