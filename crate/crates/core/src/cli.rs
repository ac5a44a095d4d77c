//! Command-line workflow: `generate`, `fit`, `predict`, `evaluate`.
//!
//! Every option can also come from a flat `key=value` file given with
//! `--config`; keys are the long option names without dashes and options on
//! the command line win. Every command writes a manifest next to its output.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use rayon::prelude::*;

use crate::datagen::{generate_scenario, generate_unstable_fit_case, ScenarioConfig, UnstableCaseConfig};
use crate::dmdc::{
    fit_dmdc, fit_stable_dmdc, fit_stable_reduced, reduce_model, rollout, rollout_reduced, SvdTruncation,
};
use crate::error::{Error, Result};
use crate::features::FeatureSpec;
use crate::hybrid::{check_aligned, fit_hybrid_twin, predict_hybrid_dataset, HybridConfig, HybridTwinModel};
use crate::io::{read_dataset, write_atomic, write_dataset, Manifest};
use crate::metrics::{
    bound_csv, error_table_csv, measurement_error_bound, normalized_error, per_flight_mean_abs_error, summary_csv,
    variable_ranges,
};
use crate::model_io::{load_model, save_model, ModelFile};
use crate::regression::{fit_ridge, RidgeConfig, RidgeSolver};
use crate::stabilization::{fit_stable, SearchMethod, StabilizationConfig};
use crate::types::{assemble_snapshots, ControlledLinearModel, FitReport, Flight, TrajectoryDataset, DT_REL_TOL};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_FIT: i32 = 3;
pub const EXIT_SEARCH: i32 = 4;
pub const EXIT_ALIGNMENT: i32 = 5;
pub const EXIT_DIVERGENCE: i32 = 6;

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => EXIT_IO,
        Error::Parse { .. } | Error::Csv(_) | Error::InvalidConfig(_) | Error::NonUniformSampling { .. } => EXIT_USAGE,
        Error::SearchExhausted { .. } | Error::BracketFailure { .. } => EXIT_SEARCH,
        Error::Misaligned(_) | Error::UnknownFlight(_) => EXIT_ALIGNMENT,
        Error::Diverged { .. } => EXIT_DIVERGENCE,
        _ => EXIT_FIT,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "stable-dmdc",
    version,
    about = "Stable DMD / DMDc identification and hybrid-twin correction"
)]
#[command(args_override_self = true)]
pub struct Cli {
    /// Worker threads for per-flight work (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Flat key=value file with default option values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate GT, CM and PED trajectories (or an unstable-fit fixture).
    Generate(GenerateArgs),
    /// Fit a model and write it with its fit report.
    Fit(FitArgs),
    /// Roll a model out from each flight's first snapshot.
    Predict(PredictArgs),
    /// Normalized error tables against ground truth.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Scenario,
    Unstable,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value = "scenario")]
    pub kind: Kind,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub n_flights: Option<usize>,
    #[arg(long)]
    pub horizon_min: Option<usize>,
    #[arg(long)]
    pub horizon_max: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Noise standard deviation as a fraction of each variable's range.
    #[arg(long)]
    pub noise_fraction: Option<f64>,
    /// Per-variable noise standard deviations, comma separated.
    #[arg(long)]
    pub noise_sigma: Option<String>,
    #[arg(long)]
    pub cm_degradation: Option<f64>,
    #[arg(long)]
    pub nonlinearity: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Ridge fit of the full operators.
    Scratch,
    /// DMDc operator split through the truncated SVD.
    Dmdc,
    /// Correction model on measured minus coarse trajectories.
    Hybrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Search {
    Bisection,
    RegulaFalsi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Solver {
    Augmented,
    PerRow,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, value_enum, default_value = "scratch")]
    pub mode: Mode,
    /// Training trajectories (measured data in hybrid mode).
    #[arg(long)]
    pub data: PathBuf,
    /// Coarse-model trajectories, required in hybrid mode.
    #[arg(long)]
    pub coarse: Option<PathBuf>,
    /// Comma-separated flight ids (default: every flight).
    #[arg(long)]
    pub train_flights: Option<String>,
    /// Feature blocks, e.g. `z,u,ulag,omega,W`.
    #[arg(long)]
    pub features: Option<String>,
    #[arg(long)]
    pub standardize: Option<bool>,
    /// Fixed penalty; skips the stabilizing search.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub rho_desired: Option<f64>,
    #[arg(long, value_enum, default_value = "bisection")]
    pub search: Search,
    #[arg(long, value_enum, default_value = "augmented")]
    pub solver: Solver,
    /// Apply the ridge penalty to `N` as well as `M`.
    #[arg(long)]
    pub penalize_control: Option<bool>,
    /// Output rank of a reduced DMDc model.
    #[arg(long)]
    pub rank: Option<usize>,
    /// Energy fraction kept by the input-space truncation.
    #[arg(long)]
    pub energy: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Trajectories providing initial states, controls and timestamps.
    #[arg(long)]
    pub data: PathBuf,
    /// Coarse trajectories for hybrid models (default: the model's source).
    #[arg(long)]
    pub coarse: Option<PathBuf>,
    /// Comma-separated flight ids (default: every flight).
    #[arg(long)]
    pub flights: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// Pseudo-measurements for the measurement error bound.
    #[arg(long)]
    pub ped: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

/// Finds `--config FILE` (or `--config=FILE`) in the raw arguments.
fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// Inserts `--key value` pairs from the config file right after the
/// subcommand so explicit options, which come later, override them.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let manifest = Manifest::read(&path)?;
    let sub = args
        .iter()
        .position(|a| matches!(a.to_str(), Some("generate" | "fit" | "predict" | "evaluate")))
        .ok_or_else(|| Error::InvalidConfig("no subcommand given".into()))?;
    let mut out: Vec<OsString> = args[..=sub].to_vec();
    for (k, v) in manifest.entries() {
        out.push(format!("--{}", k.replace('_', "-")).into());
        out.push(v.into());
    }
    out.extend_from_slice(&args[sub + 1..]);
    Ok(out)
}

fn id_list(s: &Option<String>, ds: &TrajectoryDataset) -> Vec<String> {
    match s {
        Some(s) => s
            .split(',')
            .map(|t| t.trim().to_string())
            .filter(|t| !t.is_empty())
            .collect(),
        None => ds.flight_ids().into_iter().map(String::from).collect(),
    }
}

fn render_report(m: &mut Manifest, r: &FitReport) {
    m.set("residual_frobenius", r.residual_frobenius)
        .set("lambda_search_iterations", r.lambda_search_iterations)
        .set("rho_at_lambda_zero", r.rho_at_lambda_zero)
        .set("stabilized", r.stabilized);
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

fn base_manifest(command: &str) -> Manifest {
    let mut m = Manifest::new();
    m.set("tool", "stable-dmdc")
        .set("version", env!("CARGO_PKG_VERSION"))
        .set("command", command);
    m
}

fn cmd_generate(a: &GenerateArgs) -> Result<String> {
    let mut manifest = base_manifest("generate");
    match a.kind {
        Kind::Scenario => {
            let mut cfg = ScenarioConfig {
                seed: a.seed,
                ..Default::default()
            };
            if let Some(v) = a.n_flights {
                cfg.n_flights = v;
            }
            if let Some(v) = a.horizon_min {
                cfg.horizon_min = v;
            }
            if let Some(v) = a.horizon_max {
                cfg.horizon_max = v;
            }
            if let Some(v) = a.dt {
                cfg.dt = v;
            }
            if let Some(v) = a.noise_fraction {
                cfg.noise_fraction = v;
            }
            if let Some(v) = a.cm_degradation {
                cfg.cm_degradation = v;
            }
            if let Some(v) = a.nonlinearity {
                cfg.nonlinearity = v;
            }
            if let Some(s) = &a.noise_sigma {
                let vals = s
                    .split(',')
                    .map(|t| t.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::InvalidConfig(format!("bad noise sigma list `{s}`")))?;
                cfg.noise_sigma = Some(vals);
            }
            let sc = generate_scenario(&cfg)?;
            write_dataset(&a.out_dir.join("gt.csv"), &sc.gt)?;
            write_dataset(&a.out_dir.join("cm.csv"), &sc.cm)?;
            write_dataset(&a.out_dir.join("ped.csv"), &sc.ped)?;
            manifest.set("kind", "scenario");
            cfg.to_manifest(&mut manifest);
            let sigma: Vec<String> = sc.noise_sigma.iter().map(|v| v.to_string()).collect();
            manifest
                .set("noise_sigma_used", sigma.join(" "))
                .set("gt_spectral_radius", sc.gt_spectral_radius)
                .set("outputs", "gt.csv cm.csv ped.csv");
            manifest.write(&a.out_dir.join("manifest.txt"))?;
            Ok(format!(
                "wrote {} flights to {}",
                sc.gt.flights().len(),
                a.out_dir.display()
            ))
        }
        Kind::Unstable => {
            let mut cfg = UnstableCaseConfig {
                seed: a.seed,
                ..Default::default()
            };
            if let Some(v) = a.n_flights {
                cfg.n_flights = v;
            }
            if let Some(v) = a.horizon_min {
                cfg.horizon = v;
            }
            if let Some(v) = a.noise_fraction {
                cfg.noise_fraction = v;
            }
            let case = generate_unstable_fit_case(&cfg)?;
            write_dataset(&a.out_dir.join("unstable.csv"), &case.dataset)?;
            manifest
                .set("kind", "unstable")
                .set("requested_seed", cfg.seed)
                .set("seed", case.seed)
                .set("retries", case.retries)
                .set("n_flights", cfg.n_flights)
                .set("horizon", cfg.horizon)
                .set("noise_fraction", cfg.noise_fraction)
                .set("margin", cfg.margin)
                .set("rho_unregularized", case.rho_unregularized)
                .set("outputs", "unstable.csv");
            manifest.write(&a.out_dir.join("manifest.txt"))?;
            Ok(format!(
                "wrote unstable fixture (seed {}, unpenalized rho {:.4}) to {}",
                case.seed,
                case.rho_unregularized,
                a.out_dir.display()
            ))
        }
    }
}

fn fit_configs(a: &FitArgs) -> Result<(FeatureSpec, RidgeConfig, StabilizationConfig)> {
    let default_spec = match a.mode {
        Mode::Hybrid => HybridConfig::default().feature_spec,
        _ => FeatureSpec::control_only(),
    };
    let mut spec = match &a.features {
        Some(s) => s.parse::<FeatureSpec>()?.with_standardize(default_spec.standardize),
        None => default_spec,
    };
    if let Some(s) = a.standardize {
        spec.standardize = s;
    }
    let ridge = RidgeConfig {
        solver: match a.solver {
            Solver::Augmented => RidgeSolver::AugmentedPseudoinverse,
            Solver::PerRow => RidgeSolver::PerRowRidge,
        },
        penalize_control_block: a.penalize_control.unwrap_or(false),
        ..RidgeConfig::default()
    };
    let mut stab = StabilizationConfig {
        method: match a.search {
            Search::Bisection => SearchMethod::Bisection,
            Search::RegulaFalsi => SearchMethod::RegulaFalsi,
        },
        ..Default::default()
    };
    if let Some(r) = a.rho_desired {
        stab.rho_desired = r;
    }
    stab.validate()?;
    if let Some(l) = a.lambda {
        if !(l >= 0.0) {
            return Err(Error::InvalidConfig(format!("lambda must be non-negative, got {l}")));
        }
    }
    Ok((spec, ridge, stab))
}

/// Fixed-penalty fit: diagnostics record the penalty as given.
fn fixed_report(mut model: ControlledLinearModel) -> ControlledLinearModel {
    model.fit_report.stabilized = false;
    model.fit_report.lambda_search_iterations = 0;
    model
}

fn cmd_fit(a: &FitArgs) -> Result<String> {
    let (spec, ridge, stab) = fit_configs(a)?;
    let data = read_dataset(&a.data)?;
    let ids = id_list(&a.train_flights, &data);
    let id_refs: Vec<&str> = ids.iter().map(String::as_str).collect();
    let trunc_in = match a.energy {
        Some(e) => SvdTruncation::Energy(e),
        None => SvdTruncation::default(),
    };

    let mut manifest = base_manifest("fit");
    manifest
        .set("mode", format!("{:?}", a.mode).to_lowercase())
        .set("data", a.data.display())
        .set("train_flights", ids.join(","))
        .set("features", spec)
        .set("standardize", spec.standardize)
        .set("penalize_control_block", ridge.penalize_control_block)
        .set("rho_desired", stab.rho_desired)
        .set("search", format!("{:?}", stab.method));

    let model = match a.mode {
        Mode::Hybrid => {
            let coarse_path = a
                .coarse
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("hybrid mode needs --coarse".into()))?;
            let coarse = read_dataset(coarse_path)?;
            let cfg = HybridConfig {
                feature_spec: spec,
                ridge,
                stabilization: stab,
            };
            manifest.set("coarse", coarse_path.display());
            let source = coarse_path.display().to_string();
            let ht = match a.lambda {
                Some(l) => {
                    let residuals = crate::hybrid::compute_residuals(&data.subset(&id_refs)?, &coarse)?;
                    let sys = assemble_snapshots(&residuals, &id_refs, spec)?;
                    HybridTwinModel {
                        correction: fixed_report(fit_ridge(&sys, &ridge.at(l))?),
                        coarse_source: source,
                    }
                }
                None => fit_hybrid_twin(&data, &coarse, &id_refs, source, &cfg)?,
            };
            ModelFile::Hybrid(ht)
        }
        Mode::Scratch => {
            let sys = assemble_snapshots(&data, &id_refs, spec)?;
            ModelFile::Full(match a.lambda {
                Some(l) => fixed_report(fit_ridge(&sys, &ridge.at(l))?),
                None => fit_stable(&sys, &ridge, &stab)?,
            })
        }
        Mode::Dmdc => {
            let sys = assemble_snapshots(&data, &id_refs, spec)?;
            match (a.rank, a.lambda) {
                (Some(r), Some(l)) => ModelFile::Reduced(reduce_model(&sys, l, trunc_in, SvdTruncation::FixedRank(r))?),
                (Some(r), None) => {
                    let (red, report) = fit_stable_reduced(&sys, trunc_in, SvdTruncation::FixedRank(r), &stab)?;
                    render_report(&mut manifest, &report);
                    ModelFile::Reduced(red)
                }
                (None, Some(l)) => ModelFile::Full(fixed_report(fit_dmdc(&sys, l, trunc_in)?)),
                (None, None) => ModelFile::Full(fit_stable_dmdc(&sys, trunc_in, &stab)?),
            }
        }
    };

    let summary = match &model {
        ModelFile::Full(m) | ModelFile::Hybrid(HybridTwinModel { correction: m, .. }) => {
            manifest
                .set("lambda", m.lambda)
                .set("spectral_radius", m.spectral_radius);
            render_report(&mut manifest, &m.fit_report);
            format!(
                "lambda {:e}, rho {:.6} (unpenalized {:.6}), stabilized {}, {} search iterations",
                m.lambda,
                m.spectral_radius,
                m.fit_report.rho_at_lambda_zero,
                m.fit_report.stabilized,
                m.fit_report.lambda_search_iterations
            )
        }
        ModelFile::Reduced(r) => {
            let rho = crate::stabilization::spectral_radius(&r.m_hat)?;
            manifest
                .set("lambda", r.lambda)
                .set("rank", r.rank)
                .set("input_rank", r.input_rank)
                .set("spectral_radius", rho);
            format!(
                "reduced rank {} (input rank {}), lambda {:e}, rho {:.6}",
                r.rank, r.input_rank, r.lambda, rho
            )
        }
    };
    if let Some(l) = a.lambda {
        manifest.set("fixed_lambda", l);
    }
    manifest.set("kind", model.kind()).set("model", a.out.display());
    save_model(&a.out, &model)?;
    manifest.write(&manifest_path(&a.out))?;
    Ok(summary)
}

fn rollout_flight(model: &ModelFile, f: &Flight) -> Result<nalgebra::DMatrix<f64>> {
    let steps = f.n_snapshots() - 1;
    match model {
        ModelFile::Full(m) => rollout(m, &f.state(0), &f.controls, steps),
        ModelFile::Reduced(r) => rollout_reduced(r, &f.state(0), &f.controls, steps),
        ModelFile::Hybrid(_) => unreachable!("hybrid models are predicted against coarse data"),
    }
}

fn cmd_predict(a: &PredictArgs) -> Result<String> {
    let model = load_model(&a.model)?;
    let data = read_dataset(&a.data)?;
    let ids = id_list(&a.flights, &data);
    let id_refs: Vec<&str> = ids.iter().map(String::as_str).collect();
    let subset = data.subset(&id_refs)?;
    let mut manifest = base_manifest("predict");
    manifest
        .set("model", a.model.display())
        .set("kind", model.kind())
        .set("data", a.data.display())
        .set("flights", ids.join(","));

    let model_dt = match &model {
        ModelFile::Full(m) | ModelFile::Hybrid(HybridTwinModel { correction: m, .. }) => m.dt,
        ModelFile::Reduced(r) => r.dt,
    };
    if (subset.dt() - model_dt).abs() > DT_REL_TOL * model_dt {
        return Err(Error::Misaligned(format!(
            "model was fitted at dt = {model_dt}, data is sampled at dt = {}",
            subset.dt()
        )));
    }

    let pred = match &model {
        ModelFile::Hybrid(ht) => {
            let coarse_path = a.coarse.clone().unwrap_or_else(|| PathBuf::from(&ht.coarse_source));
            let coarse = read_dataset(&coarse_path)?;
            manifest.set("coarse", coarse_path.display());
            for f in subset.flights() {
                let c = coarse
                    .flight(&f.id)
                    .map_err(|_| Error::Misaligned(format!("flight `{}` missing from coarse data", f.id)))?;
                check_aligned(f, c)?;
            }
            predict_hybrid_dataset(ht, &subset, &coarse)?
        }
        _ => {
            let flights = subset
                .flights()
                .par_iter()
                .map(|f| {
                    let states = rollout_flight(&model, f)?;
                    Flight::new(f.id.clone(), f.times.clone(), states, f.controls.clone())
                })
                .collect::<Result<Vec<_>>>()?;
            TrajectoryDataset::new(flights)?
        }
    };
    write_dataset(&a.out, &pred)?;
    manifest.set("out", a.out.display());
    manifest.write(&manifest_path(&a.out))?;
    Ok(format!(
        "predicted {} flights into {}",
        pred.flights().len(),
        a.out.display()
    ))
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<String> {
    let pred = read_dataset(&a.pred)?;
    let gt = read_dataset(&a.gt)?;
    let ranges = variable_ranges(&gt);
    let report = normalized_error(&pred, &gt, &ranges)?;
    let bound = match &a.ped {
        Some(p) => {
            let ped = read_dataset(p)?;
            let ids: Vec<&str> = pred.flight_ids();
            Some(measurement_error_bound(&ped.subset(&ids)?, &gt, &ranges)?)
        }
        None => None,
    };
    write_atomic(&a.out_dir.join("errors.csv"), &error_table_csv(&report)?)?;
    write_atomic(&a.out_dir.join("summary.csv"), &summary_csv(&report, bound.as_ref())?)?;
    if let Some(b) = &bound {
        write_atomic(&a.out_dir.join("bound.csv"), &bound_csv(b)?)?;
    }

    let mut manifest = base_manifest("evaluate");
    let fmt_vec = |v: &DVector<f64>| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    let excluded: Vec<String> = report.excluded.iter().map(|i| format!("z{}", i + 1)).collect();
    manifest
        .set("pred", a.pred.display())
        .set("gt", a.gt.display())
        .set("ranges", fmt_vec(&ranges))
        .set("excluded_variables", excluded.join(","));
    if let Some(p) = &a.ped {
        manifest.set("ped", p.display());
    }
    let means = per_flight_mean_abs_error(&report);
    let overall = means.iter().map(|m| m.1).sum::<f64>() / means.len() as f64;
    manifest.set("mean_abs_error", overall);
    manifest.write(&a.out_dir.join("manifest.txt"))?;
    let mut msg = format!("{} flights, mean |err| {overall:.5}", means.len());
    if !excluded.is_empty() {
        msg.push_str(&format!(", zero-range variables excluded: {}", excluded.join(",")));
    }
    Ok(msg)
}

fn dispatch(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        pool = pool.num_threads(n);
    }
    let result = match pool.build() {
        Ok(pool) => pool.install(|| dispatch(&cli)),
        Err(e) => Err(Error::InvalidConfig(format!("worker pool: {e}"))),
    };
    match result {
        Ok(msg) => {
            println!("{msg}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
