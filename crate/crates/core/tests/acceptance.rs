//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any criterion fails.

#![allow(clippy::needless_range_loop)]

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stable_dmdc::datagen::{generate_scenario, generate_unstable_fit_case, ScenarioConfig, UnstableCaseConfig};
use stable_dmdc::dmdc::{fit_dmdc, reduce_model, rollout, rollout_reduced, training_residual, SvdTruncation};
use stable_dmdc::hybrid::{fit_hybrid_twin, predict_hybrid_dataset, HybridConfig};
use stable_dmdc::metrics::{
    measurement_error_bound, normalized_error, per_flight_mean_abs_error, variable_mean_abs_error, variable_ranges,
};
use stable_dmdc::regression::{fit_ols, fit_ridge, RidgeConfig};
use stable_dmdc::stabilization::{fit_stable, spectral_radius, StabilizationConfig};
use stable_dmdc::{assemble_snapshots, FeatureSpec, Flight, SnapshotSystem, TrajectoryDataset};

/// Seed of the frozen scenario used by the figure-level criteria.
const FROZEN_SEED: u64 = 42;
const HT_TRAIN_FLIGHTS: usize = 9;
const SCRATCH_TRAIN_FLIGHTS: usize = 2;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_system(rng: &mut ChaCha8Rng, states: usize, controls: usize, pairs: usize) -> SnapshotSystem {
    SnapshotSystem::from_matrices(
        DMatrix::from_fn(states, pairs, |_, _| rng.random_range(-1.0..1.0)),
        DMatrix::from_fn(states, pairs, |_, _| rng.random_range(-1.0..1.0)),
        DMatrix::from_fn(controls, pairs, |_, _| rng.random_range(-1.0..1.0)),
    )
    .unwrap()
}

fn criterion_1() -> Outcome {
    let cfg = StabilizationConfig::default();
    let mut worst_rho = 0.0f64;
    let mut worst_iter = 0;
    let mut worst_time = Duration::ZERO;
    for case in 0..50u64 {
        let fixture = match generate_unstable_fit_case(&UnstableCaseConfig {
            seed: 1000 * case,
            ..Default::default()
        }) {
            Ok(f) => f,
            Err(e) => return outcome(false, format!("case {case}: generation failed: {e}")),
        };
        let ids = fixture.dataset.flight_ids();
        let sys = assemble_snapshots(&fixture.dataset, &ids, FeatureSpec::control_only()).unwrap();
        assert!(sys.x0.nrows() + sys.u0.nrows() <= 20 && sys.pair_count() <= 2000);
        let start = Instant::now();
        let model = match fit_stable(&sys, &RidgeConfig::default(), &cfg) {
            Ok(m) => m,
            Err(e) => return outcome(false, format!("case {case}: {e}")),
        };
        worst_time = worst_time.max(start.elapsed());
        worst_rho = worst_rho.max(spectral_radius(&model.m).unwrap());
        worst_iter = worst_iter.max(model.fit_report.lambda_search_iterations);
    }
    outcome(
        worst_rho <= 0.999 + 1e-9 && worst_iter <= 200 && worst_time < Duration::from_secs(1),
        format!("max rho {worst_rho:.6}, max iterations {worst_iter}, slowest {worst_time:?}"),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for k in 0..20 {
        let sys = random_system(&mut rng, 2 + k % 7, k % 4, 30 + 5 * k);
        let ridge = fit_ridge(&sys, &RidgeConfig::with_lambda(0.0)).unwrap();
        let ols = fit_ols(&sys).unwrap();
        let num = ((&ridge.m - &ols.m).norm_squared() + (&ridge.n - &ols.n).norm_squared()).sqrt();
        let den = (ols.m.norm_squared() + ols.n.norm_squared()).sqrt();
        worst = worst.max(num / den);
    }
    outcome(worst <= 1e-10, format!("max relative difference {worst:.2e}"))
}

fn criterion_3() -> Outcome {
    let grid = [0.0, 0.01, 0.1, 1.0, 10.0, 100.0];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut violations = Vec::new();
    for k in 0..10 {
        let sys = random_system(&mut rng, 3 + k % 5, 1 + k % 3, 40 + 10 * k);
        let fits: Vec<_> = grid
            .iter()
            .map(|&l| fit_ridge(&sys, &RidgeConfig::with_lambda(l)).unwrap())
            .collect();
        for w in fits.windows(2) {
            if w[1].m.norm() > w[0].m.norm() + 1e-10 {
                violations.push(format!("system {k}: norm grew at lambda {}", w[1].lambda));
            }
            let (r0, r1) = (training_residual(&w[0], &sys), training_residual(&w[1], &sys));
            if r1 < r0 - 1e-10 {
                violations.push(format!("system {k}: residual fell at lambda {}", w[1].lambda));
            }
        }
    }
    outcome(
        violations.is_empty(),
        violations
            .first()
            .cloned()
            .unwrap_or_else(|| "10 systems, 6 penalties".into()),
    )
}

/// Trajectory of a known stable `(M, N)` driven by white-noise controls.
fn known_system(
    rng: &mut ChaCha8Rng,
    dim: usize,
    d: usize,
    steps: usize,
    noise: f64,
) -> (DMatrix<f64>, DMatrix<f64>, TrajectoryDataset) {
    let q = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0)).qr().q();
    let diag = DMatrix::from_diagonal(&DVector::from_fn(dim, |i, _| 0.3 + 0.1 * i as f64));
    let m_true = &q * diag * q.transpose();
    let n_true = DMatrix::from_fn(dim, d, |_, _| rng.random_range(-1.0..1.0));
    let u = DMatrix::from_fn(d, steps, |_, _| rng.random_range(-1.0..1.0));
    let mut z = DMatrix::zeros(dim, steps);
    z.set_column(0, &DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0)));
    for k in 1..steps {
        let kick = DVector::from_fn(dim, |_, _| rng.random_range(-noise..=noise));
        let next = &m_true * z.column(k - 1) + &n_true * u.column(k - 1) + kick;
        z.set_column(k, &next);
    }
    let flight = Flight::uniform("known", 0.0, 1.0, z, u).unwrap();
    (m_true, n_true, TrajectoryDataset::new(vec![flight]).unwrap())
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (m_true, n_true, ds) = known_system(&mut rng, 6, 2, 200, 0.0);
    let sys = assemble_snapshots(&ds, &["known"], FeatureSpec::control_only()).unwrap();
    let model = fit_dmdc(&sys, 0.0, SvdTruncation::default()).unwrap();
    let err = (&model.m - &m_true).amax().max((&model.n - &n_true).amax());
    outcome(err <= 1e-6, format!("max operator error {err:.2e}"))
}

/// Largest distance from an eigenvalue of `a` to the nearest of `b`, both ways.
fn spectrum_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let eig = |m: &DMatrix<f64>| -> Vec<Complex<f64>> { m.clone().complex_eigenvalues().iter().copied().collect() };
    let (ea, eb) = (eig(a), eig(b));
    let one_way = |x: &[Complex<f64>], y: &[Complex<f64>]| {
        x.iter()
            .map(|p| y.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one_way(&ea, &eb).max(one_way(&eb, &ea))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (dim, d) = (5, 2);
    let (_, _, ds) = known_system(&mut rng, dim, d, 80, 0.05);
    let sys = assemble_snapshots(&ds, &["known"], FeatureSpec::control_only()).unwrap();
    let full = fit_dmdc(&sys, 0.0, SvdTruncation::default()).unwrap();
    let red = reduce_model(&sys, 0.0, SvdTruncation::default(), SvdTruncation::FixedRank(dim)).unwrap();

    let z0 = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
    let u = DMatrix::from_fn(d, 100, |_, _| rng.random_range(-1.0..1.0));
    let a = rollout(&full, &z0, &u, 100).unwrap();
    let b = rollout_reduced(&red, &z0, &u, 100).unwrap();
    let traj = (&a - &b).amax();
    let eig = spectrum_distance(&red.m_hat, &(red.basis.transpose() * &full.m * &red.basis));
    outcome(
        traj <= 1e-8 && eig <= 1e-8,
        format!("rollout gap {traj:.2e}, eigenvalue gap {eig:.2e}"),
    )
}

fn norm_trajectory(
    model: &stable_dmdc::ControlledLinearModel,
    z0: &DVector<f64>,
    steps: usize,
) -> (f64, Option<usize>) {
    let controls = DMatrix::zeros(model.control_dim, steps);
    match rollout(model, z0, &controls, steps) {
        Ok(traj) => (traj.column_iter().map(|c| c.norm()).fold(0.0, f64::max), None),
        Err(stable_dmdc::Error::Diverged { step }) => (f64::INFINITY, Some(step)),
        Err(e) => panic!("rollout failed: {e}"),
    }
}

fn criterion_6() -> Outcome {
    let fixture = generate_unstable_fit_case(&UnstableCaseConfig::default()).unwrap();
    let ids = fixture.dataset.flight_ids();
    let sys = assemble_snapshots(&fixture.dataset, &ids, FeatureSpec::control_only()).unwrap();
    let raw = fit_dmdc(&sys, 0.0, SvdTruncation::default()).unwrap();
    let stable = fit_stable(&sys, &RidgeConfig::default(), &StabilizationConfig::default()).unwrap();
    let z0 = fixture.dataset.flights()[0].state(0);
    let horizon = 1000;
    let (raw_peak, _) = norm_trajectory(&raw, &z0, horizon);
    let (stable_peak, _) = norm_trajectory(&stable, &z0, horizon);
    outcome(
        raw_peak > 1e6 && stable_peak < 1e3 * z0.norm(),
        format!(
            "seed {}, unpenalized rho {:.4} peak {raw_peak:.2e}; stabilized rho {:.4} peak {stable_peak:.2e} (|z0| = {:.2e})",
            fixture.seed,
            fixture.rho_unregularized,
            stable.spectral_radius,
            z0.norm()
        ),
    )
}

fn frozen_scenario() -> stable_dmdc::datagen::Scenario {
    generate_scenario(&ScenarioConfig {
        seed: FROZEN_SEED,
        ..Default::default()
    })
    .unwrap()
}

fn criterion_7() -> Outcome {
    let sc = frozen_scenario();
    let ids = sc.ped.flight_ids();
    let (train, test) = ids.split_at(HT_TRAIN_FLIGHTS);
    let ht = fit_hybrid_twin(&sc.ped, &sc.cm, train, "frozen", &HybridConfig::default()).unwrap();
    let held = sc.ped.subset(test).unwrap();
    let pred = predict_hybrid_dataset(&ht, &held, &sc.cm).unwrap();
    let ranges = variable_ranges(&sc.gt);
    let ht_err = per_flight_mean_abs_error(&normalized_error(&pred, &sc.gt, &ranges).unwrap());
    let cm_err = per_flight_mean_abs_error(&normalized_error(&sc.cm.subset(test).unwrap(), &sc.gt, &ranges).unwrap());
    let bound = measurement_error_bound(&held, &sc.gt, &ranges).unwrap();
    let n = test.len() as f64;
    let beats_cm = ht_err.iter().zip(&cm_err).filter(|(h, c)| h.1 < c.1).count() as f64 / n;
    let beats_meas = ht_err
        .iter()
        .filter(|(id, e)| *e < bound.flight(id).unwrap().mean_signed())
        .count() as f64
        / n;
    let mean = |v: &[(String, f64)]| v.iter().map(|x| x.1).sum::<f64>() / v.len() as f64;
    let mean_bound = bound.per_flight.iter().map(|b| b.mean_signed()).sum::<f64>() / n;
    outcome(
        beats_cm >= 0.8 && beats_meas >= 0.6,
        format!(
            "HT < CM on {:.0}%, HT < bound on {:.0}% of {} flights (mean HT {:.4}, CM {:.4}, bound {:.4}, lambda {:.3e}, rho {:.4})",
            100.0 * beats_cm,
            100.0 * beats_meas,
            test.len(),
            mean(&ht_err),
            mean(&cm_err),
            mean_bound,
            ht.correction.lambda,
            ht.correction.spectral_radius
        ),
    )
}

fn criterion_8() -> Outcome {
    let sc = frozen_scenario();
    let ids = sc.gt.flight_ids();
    let (train, test) = ids.split_at(SCRATCH_TRAIN_FLIGHTS);
    let sys = assemble_snapshots(&sc.gt, train, FeatureSpec::control_only()).unwrap();
    let model = fit_stable(&sys, &RidgeConfig::default(), &StabilizationConfig::default()).unwrap();
    let flights = test
        .iter()
        .map(|id| {
            let f = sc.gt.flight(id).unwrap();
            let traj = rollout(&model, &f.state(0), &f.controls, f.n_snapshots() - 1).unwrap();
            Flight::new(f.id.clone(), f.times.clone(), traj, f.controls.clone()).unwrap()
        })
        .collect();
    let pred = TrajectoryDataset::new(flights).unwrap();
    let rep = normalized_error(&pred, &sc.gt, &variable_ranges(&sc.gt)).unwrap();
    let slow = ScenarioConfig::default().slow_vars();
    let mut total = 0;
    let mut good = 0;
    let mut worst = 0.0f64;
    for f in &rep.flights {
        let per_var = variable_mean_abs_error(f);
        for (r, &var) in rep.variables.iter().enumerate() {
            if var < slow {
                total += 1;
                worst = worst.max(per_var[r]);
                if per_var[r] <= 0.05 {
                    good += 1;
                }
            }
        }
    }
    let frac = good as f64 / total as f64;
    outcome(
        frac >= 0.85,
        format!(
            "{good}/{total} slow-variable flights within 5% ({:.0}%), worst {worst:.4}, rho {:.4}",
            100.0 * frac,
            model.spectral_radius
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for trial in 0..20 {
        let dim = 1 + trial % 5;
        let lens: Vec<usize> = (0..1 + trial % 4).map(|_| rng.random_range(2..50)).collect();
        let mk = |rng: &mut ChaCha8Rng, jitter: f64, base: Option<&TrajectoryDataset>| {
            let flights = lens
                .iter()
                .enumerate()
                .map(|(f, &n)| {
                    let states = DMatrix::from_fn(dim, n, |i, k| {
                        let b = base.map_or(0.0, |ds| ds.flights()[f].states[(i, k)]);
                        b + rng.random_range(-1.0..1.0) * jitter * (i + 1) as f64
                    });
                    Flight::uniform(format!("f{f}"), 0.0, 0.5, states, DMatrix::zeros(0, n)).unwrap()
                })
                .collect();
            TrajectoryDataset::new(flights).unwrap()
        };
        let gt = mk(&mut rng, 10.0, None);
        let other = mk(&mut rng, 0.7, Some(&gt));

        // reference: flat vectors and explicit loops
        let mut lo = vec![f64::MAX; dim];
        let mut hi = vec![f64::MIN; dim];
        for f in gt.flights() {
            for k in 0..f.n_snapshots() {
                for i in 0..dim {
                    lo[i] = lo[i].min(f.states[(i, k)]);
                    hi[i] = hi[i].max(f.states[(i, k)]);
                }
            }
        }
        let range: Vec<f64> = (0..dim).map(|i| hi[i] - lo[i]).collect();
        let ranges = variable_ranges(&gt);
        let rep = normalized_error(&other, &gt, &ranges).unwrap();
        let bound = measurement_error_bound(&other, &gt, &ranges).unwrap();
        for (fi, f) in other.flights().iter().enumerate() {
            let g = &gt.flights()[fi];
            for i in 0..dim {
                let mut smax = f64::MIN;
                let mut amax = 0.0f64;
                for k in 0..f.n_snapshots() {
                    let e = (g.states[(i, k)] - f.states[(i, k)]) / range[i];
                    worst = worst.max((rep.flights[fi].err[(i, k)] - e).abs());
                    smax = smax.max(e);
                    amax = amax.max(e.abs());
                }
                let fb = bound.flight(&f.id).unwrap();
                worst = worst
                    .max((fb.signed[i] - smax).abs())
                    .max((fb.absolute[i] - amax).abs());
            }
        }
    }
    outcome(worst <= 1e-12, format!("max deviation from reference {worst:.2e}"))
}

fn run_pipeline(bin: &Path, dir: &Path) -> Result<(), String> {
    let run = |args: &[&str]| -> Result<(), String> {
        let out = Command::new(bin).args(args).output().map_err(|e| e.to_string())?;
        if out.status.success() {
            Ok(())
        } else {
            Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
        }
    };
    let d = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let data = d("data");
    run(&["generate", "--seed", "42", "--out-dir", &data])?;
    let (gt, cm, ped) = (d("data/gt.csv"), d("data/cm.csv"), d("data/ped.csv"));
    let train = "f000,f001,f002,f003,f004,f005,f006,f007,f008";
    run(&[
        "fit",
        "--mode",
        "hybrid",
        "--data",
        &ped,
        "--coarse",
        &cm,
        "--train-flights",
        train,
        "--out",
        &d("ht.model"),
    ])?;
    run(&[
        "fit",
        "--mode",
        "scratch",
        "--data",
        &gt,
        "--train-flights",
        "f000,f001",
        "--out",
        &d("scratch.model"),
    ])?;
    run(&[
        "predict",
        "--model",
        &d("ht.model"),
        "--data",
        &ped,
        "--coarse",
        &cm,
        "--out",
        &d("ht_pred.csv"),
    ])?;
    run(&[
        "predict",
        "--model",
        &d("scratch.model"),
        "--data",
        &gt,
        "--out",
        &d("scratch_pred.csv"),
    ])?;
    run(&[
        "evaluate",
        "--pred",
        &d("ht_pred.csv"),
        "--gt",
        &gt,
        "--ped",
        &ped,
        "--out-dir",
        &d("eval_ht"),
    ])?;
    run(&[
        "evaluate",
        "--pred",
        &d("scratch_pred.csv"),
        "--gt",
        &gt,
        "--out-dir",
        &d("eval_scratch"),
    ])?;
    Ok(())
}

fn csv_files(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            out.extend(csv_files(&p));
        } else if p.extension().is_some_and(|e| e == "csv") {
            out.push(p);
        }
    }
    out.sort();
    out
}

fn criterion_10() -> Outcome {
    let bin = Path::new(env!("CARGO_BIN_EXE_stable-dmdc"));
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        if let Err(e) = run_pipeline(bin, dir) {
            return outcome(false, format!("pipeline failed: {e}"));
        }
    }
    let fa = csv_files(a.path());
    let fb = csv_files(b.path());
    let rel = |root: &Path, p: &Path| p.strip_prefix(root).unwrap().to_path_buf();
    if fa
        .iter()
        .map(|p| rel(a.path(), p))
        .ne(fb.iter().map(|p| rel(b.path(), p)))
    {
        return outcome(false, "runs produced different file sets");
    }
    for (x, y) in fa.iter().zip(&fb) {
        if std::fs::read(x).unwrap() != std::fs::read(y).unwrap() {
            return outcome(false, format!("{} differs", rel(a.path(), x).display()));
        }
    }
    outcome(true, format!("{} CSV files byte-identical", fa.len()))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("stabilization guarantee on 50 unstable cases", criterion_1),
        ("zero-penalty ridge equals least squares", criterion_2),
        ("shrinkage path monotone", criterion_3),
        ("exact operator recovery", criterion_4),
        ("full-rank reduced model consistency", criterion_5),
        ("unstable vs stabilized rollout", criterion_6),
        ("hybrid twin beats coarse model and sensors", criterion_7),
        ("two-flight scratch model generalizes", criterion_8),
        ("metrics match reference", criterion_9),
        ("pipeline determinism", criterion_10),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| f == &n.to_string()) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let status = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failed += 1;
        }
        println!(
            "[{status}] criterion {n:>2}: {name}: {} ({:.1?})",
            o.detail,
            start.elapsed()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
