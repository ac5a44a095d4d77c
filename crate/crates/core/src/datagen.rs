//! Synthetic flights: a ground-truth plant (GT), a degraded coarse model
//! (CM) and noisy pseudo-measurements (PED).
//!
//! The plant works in normalized coordinates `x` and reports physical
//! states `z = scale * x`. Its linear part is block lower triangular: the
//! leading "slow" variables evolve on their own, the trailing "fast" ones are
//! driven by the slow block and by a saturated input `s tanh(B_f u / s)`.
//! All random draws come from ChaCha streams derived from the seed, one
//! stream per flight, so generation is reproducible and parallel.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;

use crate::dmdc::{fit_dmdc, SvdTruncation};
use crate::error::{Error, Result};
use crate::features::FeatureSpec;
use crate::io::Manifest;
use crate::stabilization::spectral_radius;
use crate::types::{assemble_snapshots, Flight, TrajectoryDataset};

const PLANT_STREAM: u64 = 0;
const FLIGHT_STREAM: u64 = 1 << 20;
const NOISE_STREAM: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub state_dim: usize,
    pub control_dim: usize,
    /// Trailing variables with fast, saturated dynamics.
    pub fast_vars: usize,
    pub n_flights: usize,
    pub horizon_min: usize,
    pub horizon_max: usize,
    pub dt: f64,
    pub seed: u64,
    /// Shortest and longest constant-control segment, in steps.
    pub segment_min: usize,
    pub segment_max: usize,
    /// Moduli of the slow and fast eigenvalues are drawn from these ranges.
    pub slow_modulus: (f64, f64),
    pub fast_modulus: (f64, f64),
    pub nonlinearity: bool,
    /// Saturation level of the fast input channel, in normalized units.
    pub saturation: f64,
    /// Relative perturbation of the coarse model's time constants and gains.
    pub cm_degradation: f64,
    /// Noise standard deviation as a fraction of each variable's GT range.
    pub noise_fraction: f64,
    /// Explicit per-variable noise standard deviations (physical units).
    pub noise_sigma: Option<Vec<f64>>,
    /// Largest admissible `|z|` in any GT snapshot.
    pub envelope: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            state_dim: 8,
            control_dim: 3,
            fast_vars: 2,
            n_flights: 20,
            horizon_min: 200,
            horizon_max: 400,
            dt: 1.0,
            seed: 42,
            segment_min: 20,
            segment_max: 80,
            slow_modulus: (0.90, 0.97),
            fast_modulus: (0.3, 0.6),
            nonlinearity: true,
            saturation: 0.6,
            cm_degradation: 0.35,
            noise_fraction: 0.015,
            noise_sigma: None,
            envelope: 1e3,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.state_dim == 0 || self.fast_vars >= self.state_dim {
            return bad("need at least one slow variable and fast_vars < state_dim");
        }
        if self.n_flights == 0 {
            return bad("n_flights must be positive");
        }
        if self.horizon_min < 3 || self.horizon_max < self.horizon_min {
            return bad("horizon range must satisfy 3 <= min <= max");
        }
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if self.segment_min == 0 || self.segment_max < self.segment_min {
            return bad("segment range must satisfy 1 <= min <= max");
        }
        for (lo, hi) in [self.slow_modulus, self.fast_modulus] {
            if !(0.0 <= lo && lo <= hi) {
                return bad("eigenvalue modulus range must be ordered and non-negative");
            }
        }
        if !(self.saturation > 0.0) {
            return bad("saturation must be positive");
        }
        if !(self.cm_degradation >= 0.0 && self.noise_fraction >= 0.0) {
            return bad("degradation and noise must be non-negative");
        }
        if let Some(s) = &self.noise_sigma {
            if s.len() != self.state_dim || s.iter().any(|v| !(*v >= 0.0)) {
                return bad("noise_sigma needs one non-negative entry per state");
            }
        }
        Ok(())
    }

    pub fn slow_vars(&self) -> usize {
        self.state_dim - self.fast_vars
    }

    pub fn to_manifest(&self, m: &mut Manifest) {
        m.set("state_dim", self.state_dim)
            .set("control_dim", self.control_dim)
            .set("fast_vars", self.fast_vars)
            .set("n_flights", self.n_flights)
            .set("horizon_min", self.horizon_min)
            .set("horizon_max", self.horizon_max)
            .set("dt", self.dt)
            .set("seed", self.seed)
            .set("segment_min", self.segment_min)
            .set("segment_max", self.segment_max)
            .set(
                "slow_modulus",
                format!("{} {}", self.slow_modulus.0, self.slow_modulus.1),
            )
            .set(
                "fast_modulus",
                format!("{} {}", self.fast_modulus.0, self.fast_modulus.1),
            )
            .set("nonlinearity", self.nonlinearity)
            .set("saturation", self.saturation)
            .set("cm_degradation", self.cm_degradation)
            .set("noise_fraction", self.noise_fraction);
        if let Some(s) = &self.noise_sigma {
            let s: Vec<String> = s.iter().map(|v| v.to_string()).collect();
            m.set("noise_sigma", s.join(" "));
        }
    }
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Modes of one diagonal block: real eigenvalues and `(modulus, angle)` pairs.
#[derive(Debug, Clone)]
struct Spectrum {
    real: Vec<f64>,
    pairs: Vec<(f64, f64)>,
}

impl Spectrum {
    fn draw(n: usize, modulus: (f64, f64), max_angle: f64, rng: &mut ChaCha8Rng) -> Self {
        let pairs = (0..n / 2)
            .map(|_| {
                (
                    rng.random_range(modulus.0..=modulus.1),
                    rng.random_range(0.02..=max_angle),
                )
            })
            .collect();
        let real = (0..n % 2).map(|_| rng.random_range(modulus.0..=modulus.1)).collect();
        Self { real, pairs }
    }

    fn degrade(&self, deg: f64, eps: &[f64]) -> Self {
        let mut k = 0;
        let mut next = || {
            k += 1;
            eps[k - 1] * deg
        };
        Self {
            real: self.real.iter().map(|&t| t - (1.0 - t) * next()).collect(),
            pairs: self
                .pairs
                .iter()
                .map(|&(r, th)| (r - (1.0 - r) * next(), th + th * next()))
                .collect(),
        }
    }

    fn block(&self) -> DMatrix<f64> {
        let n = self.real.len() + 2 * self.pairs.len();
        let mut t = DMatrix::zeros(n, n);
        for (j, &(r, th)) in self.pairs.iter().enumerate() {
            let i = 2 * j;
            t[(i, i)] = r * th.cos();
            t[(i, i + 1)] = -r * th.sin();
            t[(i + 1, i)] = r * th.sin();
            t[(i + 1, i + 1)] = r * th.cos();
        }
        for (j, &v) in self.real.iter().enumerate() {
            let i = 2 * self.pairs.len() + j;
            t[(i, i)] = v;
        }
        t
    }
}

fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

/// Discrete-time plant in normalized coordinates.
#[derive(Debug, Clone)]
pub struct Plant {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub scale: DVector<f64>,
    pub fast_vars: usize,
    /// Saturation level on the fast input rows; `None` keeps them linear.
    pub saturation: Option<f64>,
}

impl Plant {
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    fn input(&self, u: &DVector<f64>) -> DVector<f64> {
        let mut v = &self.b * u;
        if let Some(s) = self.saturation {
            let slow = self.state_dim() - self.fast_vars;
            for i in slow..self.state_dim() {
                v[i] = s * (v[i] / s).tanh();
            }
        }
        v
    }

    /// Equilibrium for a constant input.
    pub fn steady_state(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.state_dim();
        let lhs = DMatrix::identity(n, n) - &self.a;
        lhs.lu()
            .solve(&self.input(u))
            .ok_or(Error::Generation("plant has a unit eigenvalue".into()))
    }

    /// Physical trajectory from the normalized initial state `x0`.
    pub fn simulate(&self, x0: &DVector<f64>, controls: &DMatrix<f64>) -> DMatrix<f64> {
        let n = controls.ncols();
        let mut x = x0.clone();
        let mut out = DMatrix::zeros(self.state_dim(), n);
        for k in 0..n {
            out.set_column(k, &x.component_mul(&self.scale));
            if k + 1 < n {
                x = &self.a * &x + self.input(&controls.column(k).into_owned());
            }
        }
        out
    }

    pub fn linear_spectral_radius(&self) -> Result<f64> {
        spectral_radius(&self.a)
    }
}

/// Plant parameters from which both GT and CM are assembled.
#[derive(Debug, Clone)]
struct PlantParams {
    q: DMatrix<f64>,
    slow: Spectrum,
    fast: Spectrum,
    coupling: DMatrix<f64>,
    gain_slow: DMatrix<f64>,
    gain_fast: DMatrix<f64>,
    scale: DVector<f64>,
    fast_vars: usize,
}

impl PlantParams {
    fn draw(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Self {
        let ns = cfg.slow_vars();
        let nf = cfg.fast_vars;
        let d = cfg.control_dim;
        let q = random_orthogonal(ns, rng);
        let slow = Spectrum::draw(ns, cfg.slow_modulus, 0.15, rng);
        let fast = Spectrum::draw(nf, cfg.fast_modulus, 0.3, rng);
        let gain = 1.0 / (d.max(1) as f64).sqrt();
        let coupling = DMatrix::from_fn(nf, ns, |_, _| rng.sample::<f64, _>(StandardNormal) * 0.05);
        let gain_slow = DMatrix::from_fn(ns, d, |_, _| rng.sample::<f64, _>(StandardNormal) * gain);
        let gain_fast = DMatrix::from_fn(nf, d, |_, _| rng.sample::<f64, _>(StandardNormal) * gain);
        // a quarter of the variables are pressures, the rest temperatures
        let n_p = cfg.state_dim.div_ceil(4);
        let scale = DVector::from_fn(cfg.state_dim, |i, _| if i < n_p { 0.5 } else { 12.0 });
        Self {
            q,
            slow,
            fast,
            coupling,
            gain_slow,
            gain_fast,
            scale,
            fast_vars: nf,
        }
    }

    fn degrade(&self, deg: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut eps = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect() };
        let perturb = |m: &DMatrix<f64>, e: Vec<f64>| {
            DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
                let v = m[(i, j)];
                v + v * deg * e[i * m.ncols() + j]
            })
        };
        let slow_eps = eps(self.slow.real.len() + 2 * self.slow.pairs.len());
        let fast_eps = eps(self.fast.real.len() + 2 * self.fast.pairs.len());
        let coupling = perturb(&self.coupling, eps(self.coupling.len()));
        let gain_slow = perturb(&self.gain_slow, eps(self.gain_slow.len()));
        let gain_fast = perturb(&self.gain_fast, eps(self.gain_fast.len()));
        Self {
            q: self.q.clone(),
            slow: self.slow.degrade(deg, &slow_eps),
            fast: self.fast.degrade(deg, &fast_eps),
            coupling,
            gain_slow,
            gain_fast,
            scale: self.scale.clone(),
            fast_vars: self.fast_vars,
        }
    }

    /// Slow block `Q T Q^T`; inputs are shaped as `(I - A) G` so that `G`
    /// is the steady-state gain of the isolated block.
    fn build(&self, saturation: Option<f64>) -> Plant {
        let ns = self.q.nrows();
        let nf = self.fast_vars;
        let n = ns + nf;
        let a_ss = &self.q * self.slow.block() * self.q.transpose();
        let a_ff = self.fast.block();
        let mut a = DMatrix::zeros(n, n);
        a.view_mut((0, 0), (ns, ns)).copy_from(&a_ss);
        a.view_mut((ns, ns), (nf, nf)).copy_from(&a_ff);
        a.view_mut((ns, 0), (nf, ns)).copy_from(&self.coupling);
        let d = self.gain_slow.ncols();
        let mut b = DMatrix::zeros(n, d);
        b.view_mut((0, 0), (ns, d))
            .copy_from(&((DMatrix::identity(ns, ns) - &a_ss) * &self.gain_slow));
        b.view_mut((ns, 0), (nf, d))
            .copy_from(&((DMatrix::identity(nf, nf) - &a_ff) * &self.gain_fast));
        Plant {
            a,
            b,
            scale: self.scale.clone(),
            fast_vars: nf,
            saturation,
        }
    }
}

/// GT and CM plants of a scenario.
pub fn scenario_plants(cfg: &ScenarioConfig) -> Result<(Plant, Plant)> {
    cfg.validate()?;
    let mut rng = stream(cfg.seed, PLANT_STREAM);
    let params = PlantParams::draw(cfg, &mut rng);
    let coarse = params.degrade(cfg.cm_degradation, &mut rng);
    let gt = params.build(cfg.nonlinearity.then_some(cfg.saturation));
    let cm = coarse.build(None);
    for (name, p) in [("ground-truth", &gt), ("coarse", &cm)] {
        let rho = p.linear_spectral_radius()?;
        if rho >= 1.0 {
            return Err(Error::Generation(format!(
                "{name} plant is unstable (spectral radius {rho})"
            )));
        }
    }
    Ok((gt, cm))
}

/// Piecewise-constant schedule in `[-1, 1]`, all channels switching together.
pub fn control_schedule(d: usize, n: usize, seg: (usize, usize), rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut u = DMatrix::zeros(d, n);
    let mut k = 0;
    while k < n {
        let len = rng.random_range(seg.0..=seg.1);
        let level = DVector::from_fn(d, |_, _| rng.random_range(-1.0..=1.0));
        for j in k..(k + len).min(n) {
            u.set_column(j, &level);
        }
        k += len;
    }
    u
}

pub fn flight_id(index: usize, total: usize) -> String {
    let width = total.saturating_sub(1).to_string().len().max(3);
    format!("f{index:0width$}")
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub gt: TrajectoryDataset,
    pub cm: TrajectoryDataset,
    pub ped: TrajectoryDataset,
    /// Noise standard deviation actually used per variable.
    pub noise_sigma: DVector<f64>,
    pub gt_spectral_radius: f64,
}

pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    let (gt_plant, cm_plant) = scenario_plants(cfg)?;
    let d = cfg.control_dim;
    let pairs = (0..cfg.n_flights)
        .into_par_iter()
        .map(|f| {
            let mut rng = stream(cfg.seed, FLIGHT_STREAM + f as u64);
            let n = rng.random_range(cfg.horizon_min..=cfg.horizon_max);
            let u = control_schedule(d, n, (cfg.segment_min, cfg.segment_max), &mut rng);
            let x0 = gt_plant.steady_state(&u.column(0).into_owned())?;
            let id = flight_id(f, cfg.n_flights);
            let gt = Flight::uniform(id.clone(), 0.0, cfg.dt, gt_plant.simulate(&x0, &u), u.clone())?;
            let cm = Flight::uniform(id, 0.0, cfg.dt, cm_plant.simulate(&x0, &u), u)?;
            Ok((gt, cm))
        })
        .collect::<Result<Vec<_>>>()?;
    let (gt_flights, cm_flights): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();

    for f in &gt_flights {
        let peak = f.states.amax();
        if !(peak <= cfg.envelope) {
            return Err(Error::Generation(format!(
                "flight `{}` leaves the envelope ({peak} > {})",
                f.id, cfg.envelope
            )));
        }
    }
    let gt = TrajectoryDataset::new(gt_flights)?;
    let cm = TrajectoryDataset::new(cm_flights)?;

    let noise_sigma = match &cfg.noise_sigma {
        Some(s) => DVector::from_column_slice(s),
        None => crate::metrics::variable_ranges(&gt) * cfg.noise_fraction,
    };
    let ped_flights = gt
        .flights()
        .par_iter()
        .enumerate()
        .map(|(f, fl)| {
            let mut rng = stream(cfg.seed, NOISE_STREAM + f as u64);
            let mut states = fl.states.clone();
            for i in 0..states.nrows() {
                if noise_sigma[i] > 0.0 {
                    let dist = Normal::new(0.0, noise_sigma[i]).map_err(|e| Error::Generation(e.to_string()))?;
                    for k in 0..states.ncols() {
                        states[(i, k)] += dist.sample(&mut rng);
                    }
                }
            }
            Flight::new(fl.id.clone(), fl.times.clone(), states, fl.controls.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Scenario {
        ped: TrajectoryDataset::new(ped_flights)?,
        gt,
        cm,
        noise_sigma,
        gt_spectral_radius: gt_plant.linear_spectral_radius()?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnstableCaseConfig {
    pub state_dim: usize,
    pub control_dim: usize,
    pub n_flights: usize,
    pub horizon: usize,
    pub dt: f64,
    pub seed: u64,
    /// Eigenvalue moduli of the near-marginal plant.
    pub modulus: (f64, f64),
    pub noise_fraction: f64,
    /// Required excess of the unpenalized spectral radius over one.
    pub margin: f64,
    pub max_retries: usize,
}

impl Default for UnstableCaseConfig {
    fn default() -> Self {
        Self {
            state_dim: 8,
            control_dim: 3,
            n_flights: 2,
            horizon: 14,
            dt: 1.0,
            seed: 7,
            modulus: (0.985, 0.999),
            noise_fraction: 0.03,
            margin: 0.02,
            max_retries: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct UnstableCase {
    pub dataset: TrajectoryDataset,
    /// Seed that produced the dataset.
    pub seed: u64,
    pub retries: usize,
    /// Spectral radius of the unpenalized DMDc fit.
    pub rho_unregularized: f64,
}

fn unstable_attempt(cfg: &UnstableCaseConfig, seed: u64) -> Result<(TrajectoryDataset, f64)> {
    let scenario = ScenarioConfig {
        state_dim: cfg.state_dim,
        control_dim: cfg.control_dim,
        fast_vars: 0,
        n_flights: cfg.n_flights,
        horizon_min: cfg.horizon,
        horizon_max: cfg.horizon,
        dt: cfg.dt,
        seed,
        segment_min: 2,
        segment_max: 5,
        slow_modulus: cfg.modulus,
        fast_modulus: cfg.modulus,
        nonlinearity: false,
        cm_degradation: 0.35,
        noise_fraction: cfg.noise_fraction,
        ..ScenarioConfig::default()
    };
    let sc = generate_scenario(&scenario)?;
    let ids = sc.ped.flight_ids();
    let sys = assemble_snapshots(&sc.ped, &ids, FeatureSpec::control_only())?;
    let model = fit_dmdc(&sys, 0.0, SvdTruncation::default())?;
    Ok((sc.ped, model.spectral_radius))
}

/// Short, noisy flights of a near-marginal plant on which the unpenalized
/// DMDc fit is unstable. Seeds `seed, seed + 1, ...` are tried in turn.
pub fn generate_unstable_fit_case(cfg: &UnstableCaseConfig) -> Result<UnstableCase> {
    if cfg.state_dim == 0 || cfg.n_flights == 0 || cfg.horizon < 3 {
        return Err(Error::InvalidConfig(
            "unstable case needs states, flights and horizon >= 3".into(),
        ));
    }
    for retry in 0..cfg.max_retries {
        let seed = cfg.seed.wrapping_add(retry as u64);
        let (dataset, rho) = unstable_attempt(cfg, seed)?;
        if rho > 1.0 + cfg.margin {
            return Ok(UnstableCase {
                dataset,
                seed,
                retries: retry,
                rho_unregularized: rho,
            });
        }
    }
    Err(Error::Generation(format!(
        "no unstable fit found in {} seeds starting at {}",
        cfg.max_retries, cfg.seed
    )))
}
