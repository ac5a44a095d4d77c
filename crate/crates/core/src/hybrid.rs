//! Hybrid twin: a coarse model's trajectories plus a learned, stabilized
//! correction `C_n = Z_n^m - Z_n^c` evolving as `C_{n+1} = W C_n + V u_n`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dmdc::rollout;
use crate::error::{Error, Result};
use crate::features::FeatureSpec;
use crate::regression::RidgeConfig;
use crate::stabilization::{fit_stable, StabilizationConfig};
use crate::types::{assemble_snapshots, ControlledLinearModel, Flight, TrajectoryDataset, DT_REL_TOL};

/// Measurement minus coarse prediction, with the measured controls.
pub type ResidualDataset = TrajectoryDataset;

#[derive(Debug, Clone)]
pub struct HybridTwinModel {
    pub correction: ControlledLinearModel,
    /// Where the aligned coarse trajectories live, usually a CSV path.
    pub coarse_source: String,
}

impl HybridTwinModel {
    pub fn feature_spec(&self) -> FeatureSpec {
        self.correction.feature_spec
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridConfig {
    pub feature_spec: FeatureSpec,
    pub ridge: RidgeConfig,
    pub stabilization: StabilizationConfig,
}

impl Default for HybridConfig {
    fn default() -> Self {
        Self {
            feature_spec: FeatureSpec::extended().with_standardize(true),
            ridge: RidgeConfig::default(),
            stabilization: StabilizationConfig::default(),
        }
    }
}

/// Checks that `a` and `b` describe the same flight on the same time grid.
pub fn check_aligned(a: &Flight, b: &Flight) -> Result<()> {
    if a.state_dim() != b.state_dim() {
        return Err(Error::Misaligned(format!(
            "flight `{}`: state dimensions {} and {}",
            a.id,
            a.state_dim(),
            b.state_dim()
        )));
    }
    if a.n_snapshots() != b.n_snapshots() {
        return Err(Error::Misaligned(format!(
            "flight `{}`: lengths {} and {}",
            a.id,
            a.n_snapshots(),
            b.n_snapshots()
        )));
    }
    let scale = a.times.iter().chain(&b.times).fold(1.0f64, |m, t| m.max(t.abs()));
    for (k, (ta, tb)) in a.times.iter().zip(&b.times).enumerate() {
        if (ta - tb).abs() > DT_REL_TOL * scale {
            return Err(Error::Misaligned(format!(
                "flight `{}`: timestamps differ at index {k}",
                a.id
            )));
        }
    }
    Ok(())
}

/// Per-snapshot `measured - coarse` for every measured flight.
pub fn compute_residuals(measured: &TrajectoryDataset, coarse: &TrajectoryDataset) -> Result<ResidualDataset> {
    if (measured.dt() - coarse.dt()).abs() > DT_REL_TOL * measured.dt() {
        return Err(Error::Misaligned(format!(
            "sampling intervals {} and {}",
            measured.dt(),
            coarse.dt()
        )));
    }
    let flights = measured
        .flights()
        .iter()
        .map(|m| {
            let c = coarse
                .flight(&m.id)
                .map_err(|_| Error::Misaligned(format!("flight `{}` missing from coarse data", m.id)))?;
            check_aligned(m, c)?;
            Flight::new(m.id.clone(), m.times.clone(), &m.states - &c.states, m.controls.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    TrajectoryDataset::new(flights)
}

/// Fits the correction on the residuals of the `train` flights.
pub fn fit_hybrid_twin(
    measured: &TrajectoryDataset,
    coarse: &TrajectoryDataset,
    train: &[&str],
    coarse_source: impl Into<String>,
    cfg: &HybridConfig,
) -> Result<HybridTwinModel> {
    let residuals = compute_residuals(&measured.subset(train)?, coarse)?;
    let sys = assemble_snapshots(&residuals, train, cfg.feature_spec)?;
    let correction = fit_stable(&sys, &cfg.ridge, &cfg.stabilization)?;
    Ok(HybridTwinModel {
        correction,
        coarse_source: coarse_source.into(),
    })
}

/// `Z^c + C` with `C` rolled out from `z0_measured - Z_0^c`; one prediction
/// per coarse snapshot.
pub fn predict_hybrid(
    ht: &HybridTwinModel,
    coarse: &Flight,
    z0_measured: &DVector<f64>,
    controls: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = coarse.n_snapshots();
    if controls.ncols() < n.saturating_sub(1) {
        return Err(Error::DimensionMismatch(format!(
            "horizon of {} steps but only {} control columns",
            n - 1,
            controls.ncols()
        )));
    }
    if z0_measured.len() != coarse.state_dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has {} entries, coarse model {}",
            z0_measured.len(),
            coarse.state_dim()
        )));
    }
    let c0 = z0_measured - coarse.states.column(0);
    let correction = rollout(&ht.correction, &c0, controls, n - 1)?;
    Ok(&coarse.states + correction)
}

/// Predicts every flight of `measured` from its first snapshot only.
pub fn predict_hybrid_dataset(
    ht: &HybridTwinModel,
    measured: &TrajectoryDataset,
    coarse: &TrajectoryDataset,
) -> Result<TrajectoryDataset> {
    let flights = measured
        .flights()
        .par_iter()
        .map(|m| {
            let c = coarse
                .flight(&m.id)
                .map_err(|_| Error::Misaligned(format!("flight `{}` missing from coarse data", m.id)))?;
            check_aligned(m, c)?;
            let states = predict_hybrid(ht, c, &m.state(0), &m.controls)?;
            Flight::new(m.id.clone(), m.times.clone(), states, m.controls.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    TrajectoryDataset::new(flights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::FitReport;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_flight(id: &str, n: usize, rng: &mut ChaCha8Rng) -> Flight {
        Flight::uniform(
            id,
            0.0,
            1.0,
            DMatrix::from_fn(3, n, |_, _| rng.random_range(-1.0..1.0)),
            DMatrix::from_fn(2, n, |_, _| rng.random_range(-1.0..1.0)),
        )
        .unwrap()
    }

    fn zero_model(d: usize, d_prime: usize, spec: FeatureSpec) -> HybridTwinModel {
        HybridTwinModel {
            correction: ControlledLinearModel {
                m: DMatrix::zeros(d, d),
                n: DMatrix::zeros(d, d_prime),
                lambda: 0.0,
                spectral_radius: 0.0,
                feature_spec: spec,
                scaling: None,
                control_dim: 2,
                dt: 1.0,
                fit_report: FitReport {
                    residual_frobenius: 0.0,
                    lambda_search_iterations: 0,
                    rho_at_lambda_zero: 0.0,
                    stabilized: false,
                },
            },
            coarse_source: "mem".into(),
        }
    }

    /// Coarse model: slower decay and a weaker input than the truth.
    fn scenario(seed: u64) -> (TrajectoryDataset, TrajectoryDataset) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a_true = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, -0.05, 0.8]);
        let b_true = DMatrix::from_row_slice(2, 1, &[0.5, 0.2]);
        let a_cm = DMatrix::from_row_slice(2, 2, &[0.85, 0.1, -0.05, 0.85]);
        let b_cm = DMatrix::from_row_slice(2, 1, &[0.4, 0.2]);
        let mut gt = Vec::new();
        let mut cm = Vec::new();
        for f in 0..6 {
            let n = 120;
            let mut u = DMatrix::zeros(1, n);
            let mut level = 0.0;
            for k in 0..n {
                if k % 15 == 0 {
                    level = rng.random_range(-1.0..1.0);
                }
                u[(0, k)] = level;
            }
            let run = |a: &DMatrix<f64>, b: &DMatrix<f64>| {
                let mut z = DMatrix::zeros(2, n);
                for k in 1..n {
                    let next = a * z.column(k - 1) + b * u.column(k - 1);
                    z.set_column(k, &next);
                }
                z
            };
            let id = format!("f{f}");
            gt.push(Flight::uniform(id.clone(), 0.0, 1.0, run(&a_true, &b_true), u.clone()).unwrap());
            cm.push(Flight::uniform(id, 0.0, 1.0, run(&a_cm, &b_cm), u).unwrap());
        }
        (TrajectoryDataset::new(gt).unwrap(), TrajectoryDataset::new(cm).unwrap())
    }

    #[test]
    fn residual_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ds =
            TrajectoryDataset::new(vec![random_flight("a", 5, &mut rng), random_flight("b", 7, &mut rng)]).unwrap();
        let zero = compute_residuals(&ds, &ds).unwrap();
        assert!(zero.flights().iter().all(|f| f.states.iter().all(|&v| v == 0.0)));

        let blank = TrajectoryDataset::new(
            ds.flights()
                .iter()
                .map(|f| Flight::new(f.id.clone(), f.times.clone(), f.states.map(|_| 0.0), f.controls.clone()).unwrap())
                .collect(),
        )
        .unwrap();
        let same = compute_residuals(&ds, &blank).unwrap();
        assert_eq!(same.flight("b").unwrap(), ds.flight("b").unwrap());
    }

    #[test]
    fn misalignment_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = TrajectoryDataset::new(vec![random_flight("a", 5, &mut rng)]).unwrap();
        let short = TrajectoryDataset::new(vec![random_flight("a", 4, &mut rng)]).unwrap();
        let other = TrajectoryDataset::new(vec![random_flight("b", 5, &mut rng)]).unwrap();
        let f = a.flight("a").unwrap();
        let shifted = Flight::uniform("a", 0.5, 1.0, f.states.clone(), f.controls.clone()).unwrap();
        let shifted = TrajectoryDataset::new(vec![shifted]).unwrap();
        for coarse in [&short, &other, &shifted] {
            assert!(matches!(compute_residuals(&a, coarse), Err(Error::Misaligned(_))));
        }
    }

    #[test]
    fn zero_residual_training_gives_zero_correction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ds =
            TrajectoryDataset::new(vec![random_flight("a", 30, &mut rng), random_flight("b", 30, &mut rng)]).unwrap();
        let ht = fit_hybrid_twin(&ds, &ds, &["a", "b"], "mem", &HybridConfig::default()).unwrap();
        let f = ds.flight("a").unwrap();
        let pred = predict_hybrid(&ht, f, &f.state(0), &f.controls).unwrap();
        assert!((&pred - &f.states).amax() <= 1e-10);
    }

    #[test]
    fn frozen_correction_keeps_initial_offset_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let coarse = random_flight("a", 10, &mut rng);
        let ht = zero_model(3, 2, FeatureSpec::control_only());
        let z0 = coarse.state(0).add_scalar(0.3);
        let pred = predict_hybrid(&ht, &coarse, &z0, &coarse.controls).unwrap();
        assert_eq!(pred.column(0), z0.column(0));
        assert_eq!(pred.columns(1, 9), coarse.states.columns(1, 9));
    }

    #[test]
    fn prediction_is_coarse_plus_correction_rollout() {
        let (gt, cm) = scenario(5);
        let ht = fit_hybrid_twin(&gt, &cm, &["f0", "f1", "f2"], "mem", &HybridConfig::default()).unwrap();
        let m = gt.flight("f4").unwrap();
        let c = cm.flight("f4").unwrap();
        let pred = predict_hybrid(&ht, c, &m.state(0), &m.controls).unwrap();
        let alone = rollout(
            &ht.correction,
            &(m.state(0) - c.state(0)),
            &m.controls,
            m.n_snapshots() - 1,
        )
        .unwrap();
        assert_eq!(pred, &c.states + alone);
    }

    #[test]
    fn later_measurements_are_not_used() {
        let (gt, cm) = scenario(6);
        let ht = fit_hybrid_twin(&gt, &cm, &["f0", "f1"], "mem", &HybridConfig::default()).unwrap();
        let before = predict_hybrid_dataset(&ht, &gt.subset(&["f3"]).unwrap(), &cm).unwrap();
        let f = gt.flight("f3").unwrap();
        let mut states = f.states.clone();
        states.columns_mut(1, f.n_snapshots() - 1).add_scalar_mut(5.0);
        let tampered = TrajectoryDataset::new(vec![
            Flight::new("f3", f.times.clone(), states, f.controls.clone()).unwrap()
        ])
        .unwrap();
        let after = predict_hybrid_dataset(&ht, &tampered, &cm).unwrap();
        assert_eq!(before.flight("f3").unwrap().states, after.flight("f3").unwrap().states);
    }

    #[test]
    fn correction_beats_coarse_model() {
        let (gt, cm) = scenario(7);
        let ht = fit_hybrid_twin(&gt, &cm, &["f0", "f1", "f2"], "mem", &HybridConfig::default()).unwrap();
        assert!(ht.correction.spectral_radius <= 0.999 + 1e-9);
        for id in ["f3", "f4", "f5"] {
            let m = gt.flight(id).unwrap();
            let c = cm.flight(id).unwrap();
            let pred = predict_hybrid(&ht, c, &m.state(0), &m.controls).unwrap();
            let ht_err = (&pred - &m.states).norm();
            let cm_err = (&c.states - &m.states).norm();
            assert!(ht_err < 0.1 * cm_err, "{id}: {ht_err} vs {cm_err}");
        }
    }

    #[test]
    fn horizon_must_be_covered() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let coarse = random_flight("a", 10, &mut rng);
        let ht = zero_model(3, 2, FeatureSpec::control_only());
        let short = coarse.controls.columns(0, 5).into_owned();
        assert!(predict_hybrid(&ht, &coarse, &coarse.state(0), &short).is_err());
    }
}
