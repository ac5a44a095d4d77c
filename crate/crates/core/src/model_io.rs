//! Plain-text model files.
//!
//! A header of `key value` lines is followed by `matrix NAME ROWS COLS`
//! blocks (one row per line) and `vector NAME LEN` blocks. Numbers are written
//! with 17 significant digits so a save/load cycle is bit exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::features::FeatureSpec;
use crate::hybrid::HybridTwinModel;
use crate::io::write_atomic;
use crate::types::{ControlledLinearModel, FitReport, ReducedControlledModel, Scaling};

const MAGIC: &str = "stable-dmdc-model";
const VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub enum ModelFile {
    Full(ControlledLinearModel),
    Reduced(ReducedControlledModel),
    Hybrid(HybridTwinModel),
}

impl ModelFile {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelFile::Full(_) => "full",
            ModelFile::Reduced(_) => "reduced",
            ModelFile::Hybrid(_) => "hybrid",
        }
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn put_matrix(out: &mut String, name: &str, m: &DMatrix<f64>) {
    let _ = writeln!(out, "matrix {name} {} {}", m.nrows(), m.ncols());
    for r in 0..m.nrows() {
        let row: Vec<String> = m.row(r).iter().map(|&v| num(v)).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
}

fn put_vector(out: &mut String, name: &str, v: &DVector<f64>) {
    let _ = writeln!(out, "vector {name} {}", v.len());
    let vals: Vec<String> = v.iter().map(|&x| num(x)).collect();
    let _ = writeln!(out, "{}", vals.join(" "));
}

fn put_common(
    out: &mut String,
    spec: &FeatureSpec,
    control_dim: usize,
    dt: f64,
    lambda: f64,
    scaling: Option<&Scaling>,
) {
    let _ = writeln!(out, "control_dim {control_dim}");
    let _ = writeln!(out, "feature_spec {}", spec.to_flags());
    let _ = writeln!(out, "dt {}", num(dt));
    let _ = writeln!(out, "lambda {}", num(lambda));
    let _ = writeln!(out, "scaled {}", u8::from(scaling.is_some()));
}

fn put_full(out: &mut String, m: &ControlledLinearModel) {
    let _ = writeln!(out, "state_dim {}", m.state_dim());
    let _ = writeln!(out, "feature_dim {}", m.feature_dim());
    put_common(out, &m.feature_spec, m.control_dim, m.dt, m.lambda, m.scaling.as_ref());
    let _ = writeln!(out, "spectral_radius {}", num(m.spectral_radius));
    let r = &m.fit_report;
    let _ = writeln!(out, "residual_frobenius {}", num(r.residual_frobenius));
    let _ = writeln!(out, "lambda_search_iterations {}", r.lambda_search_iterations);
    let _ = writeln!(out, "rho_at_lambda_zero {}", num(r.rho_at_lambda_zero));
    let _ = writeln!(out, "stabilized {}", u8::from(r.stabilized));
}

fn put_scaling(out: &mut String, s: Option<&Scaling>) {
    if let Some(s) = s {
        put_vector(out, "state_mean", &s.state_mean);
        put_vector(out, "state_scale", &s.state_scale);
        put_vector(out, "feature_mean", &s.feature_mean);
        put_vector(out, "feature_scale", &s.feature_scale);
    }
}

pub fn render_model(model: &ModelFile) -> String {
    let mut out = format!("{MAGIC}\nversion {VERSION}\nkind {}\n", model.kind());
    match model {
        ModelFile::Full(m) => {
            put_full(&mut out, m);
            put_matrix(&mut out, "M", &m.m);
            put_matrix(&mut out, "N", &m.n);
            put_scaling(&mut out, m.scaling.as_ref());
        }
        ModelFile::Hybrid(h) => {
            let _ = writeln!(out, "coarse_source {}", h.coarse_source);
            put_full(&mut out, &h.correction);
            put_matrix(&mut out, "M", &h.correction.m);
            put_matrix(&mut out, "N", &h.correction.n);
            put_scaling(&mut out, h.correction.scaling.as_ref());
        }
        ModelFile::Reduced(m) => {
            let _ = writeln!(out, "state_dim {}", m.state_dim());
            let _ = writeln!(out, "feature_dim {}", m.n_hat.ncols());
            let _ = writeln!(out, "rank {}", m.rank);
            let _ = writeln!(out, "input_rank {}", m.input_rank);
            put_common(
                &mut out,
                &m.feature_spec,
                m.control_dim,
                m.dt,
                m.lambda,
                m.scaling.as_ref(),
            );
            put_matrix(&mut out, "M_hat", &m.m_hat);
            put_matrix(&mut out, "N_hat", &m.n_hat);
            put_matrix(&mut out, "Xi", &m.basis);
            put_scaling(&mut out, m.scaling.as_ref());
        }
    }
    out
}

pub fn save_model(path: &Path, model: &ModelFile) -> Result<()> {
    write_atomic(path, render_model(model).as_bytes())
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    parse_model(&fs::read_to_string(path)?, path)
}

struct Doc<'a> {
    path: &'a Path,
    header: Vec<(&'a str, &'a str)>,
    matrices: Vec<(&'a str, DMatrix<f64>)>,
    vectors: Vec<(&'a str, DVector<f64>)>,
}

impl<'a> Doc<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.path, msg)
    }

    fn str(&self, key: &str) -> Result<&'a str> {
        self.header
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| self.err(format!("missing field `{key}`")))
    }

    fn f64(&self, key: &str) -> Result<f64> {
        let v = self.str(key)?;
        v.parse()
            .map_err(|_| self.err(format!("field `{key}`: bad number `{v}`")))
    }

    fn usize(&self, key: &str) -> Result<usize> {
        let v = self.str(key)?;
        v.parse()
            .map_err(|_| self.err(format!("field `{key}`: bad integer `{v}`")))
    }

    fn bool(&self, key: &str) -> Result<bool> {
        match self.str(key)? {
            "1" => Ok(true),
            "0" => Ok(false),
            v => Err(self.err(format!("field `{key}`: expected 0 or 1, found `{v}`"))),
        }
    }

    fn matrix(&self, name: &str, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        let m = self
            .matrices
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, m)| m.clone())
            .ok_or_else(|| self.err(format!("missing matrix `{name}`")))?;
        if m.shape() != (rows, cols) {
            return Err(self.err(format!(
                "matrix `{name}` is {}x{}, expected {rows}x{cols}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(m)
    }

    fn vector(&self, name: &str, len: usize) -> Result<DVector<f64>> {
        let v = self
            .vectors
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| v.clone())
            .ok_or_else(|| self.err(format!("missing vector `{name}`")))?;
        if v.len() != len {
            return Err(self.err(format!("vector `{name}` has {} entries, expected {len}", v.len())));
        }
        Ok(v)
    }

    fn scaling(&self, state_dim: usize, feature_dim: usize) -> Result<Option<Scaling>> {
        if !self.bool("scaled")? {
            return Ok(None);
        }
        Ok(Some(Scaling {
            state_mean: self.vector("state_mean", state_dim)?,
            state_scale: self.vector("state_scale", state_dim)?,
            feature_mean: self.vector("feature_mean", feature_dim)?,
            feature_scale: self.vector("feature_scale", feature_dim)?,
        }))
    }

    fn full(&self) -> Result<ControlledLinearModel> {
        let dim = self.usize("state_dim")?;
        let fdim = self.usize("feature_dim")?;
        Ok(ControlledLinearModel {
            m: self.matrix("M", dim, dim)?,
            n: self.matrix("N", dim, fdim)?,
            lambda: self.f64("lambda")?,
            spectral_radius: self.f64("spectral_radius")?,
            feature_spec: FeatureSpec::from_flags(self.str("feature_spec")?)?,
            scaling: self.scaling(dim, fdim)?,
            control_dim: self.usize("control_dim")?,
            dt: self.f64("dt")?,
            fit_report: FitReport {
                residual_frobenius: self.f64("residual_frobenius")?,
                lambda_search_iterations: self.usize("lambda_search_iterations")?,
                rho_at_lambda_zero: self.f64("rho_at_lambda_zero")?,
                stabilized: self.bool("stabilized")?,
            },
        })
    }

    fn reduced(&self) -> Result<ReducedControlledModel> {
        let dim = self.usize("state_dim")?;
        let fdim = self.usize("feature_dim")?;
        let r = self.usize("rank")?;
        Ok(ReducedControlledModel {
            m_hat: self.matrix("M_hat", r, r)?,
            n_hat: self.matrix("N_hat", r, fdim)?,
            basis: self.matrix("Xi", dim, r)?,
            rank: r,
            input_rank: self.usize("input_rank")?,
            lambda: self.f64("lambda")?,
            feature_spec: FeatureSpec::from_flags(self.str("feature_spec")?)?,
            scaling: self.scaling(dim, fdim)?,
            control_dim: self.usize("control_dim")?,
            dt: self.f64("dt")?,
        })
    }
}

fn parse_numbers(line: &str, expected: usize, path: &Path, what: &str) -> Result<Vec<f64>> {
    let vals = line
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::parse(path, format!("{what}: bad number")))?;
    if vals.len() != expected {
        return Err(Error::parse(
            path,
            format!("{what}: expected {expected} values, found {}", vals.len()),
        ));
    }
    Ok(vals)
}

pub fn parse_model(text: &str, path: &Path) -> Result<ModelFile> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(MAGIC) {
        return Err(Error::parse(path, "not a model file"));
    }
    let mut doc = Doc {
        path,
        header: Vec::new(),
        matrices: Vec::new(),
        vectors: Vec::new(),
    };
    while let Some(line) = lines.next() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
        match key {
            "matrix" => {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                let [name, rows, cols] = parts[..] else {
                    return Err(Error::parse(path, format!("bad matrix header `{line}`")));
                };
                let (rows, cols): (usize, usize) = match (rows.parse(), cols.parse()) {
                    (Ok(r), Ok(c)) => (r, c),
                    _ => return Err(Error::parse(path, format!("bad matrix header `{line}`"))),
                };
                let mut data = Vec::with_capacity(rows * cols);
                for r in 0..rows {
                    let row = lines
                        .next()
                        .ok_or_else(|| Error::parse(path, format!("matrix `{name}` truncated")))?;
                    data.extend(parse_numbers(row, cols, path, &format!("matrix `{name}` row {r}"))?);
                }
                doc.matrices.push((name, DMatrix::from_row_slice(rows, cols, &data)));
            }
            "vector" => {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                let [name, len] = parts[..] else {
                    return Err(Error::parse(path, format!("bad vector header `{line}`")));
                };
                let len: usize = len
                    .parse()
                    .map_err(|_| Error::parse(path, format!("bad vector header `{line}`")))?;
                let row = lines.next().unwrap_or("");
                let vals = parse_numbers(row, len, path, &format!("vector `{name}`"))?;
                doc.vectors.push((name, DVector::from_vec(vals)));
            }
            _ => doc.header.push((key, rest.trim())),
        }
    }

    let version = doc.usize("version")?;
    if version != VERSION as usize {
        return Err(doc.err(format!("unsupported model version {version}")));
    }
    match doc.str("kind")? {
        "full" => Ok(ModelFile::Full(doc.full()?)),
        "reduced" => Ok(ModelFile::Reduced(doc.reduced()?)),
        "hybrid" => Ok(ModelFile::Hybrid(HybridTwinModel {
            correction: doc.full()?,
            coarse_source: doc.str("coarse_source")?.to_string(),
        })),
        other => Err(doc.err(format!("unknown model kind `{other}`"))),
    }
}
