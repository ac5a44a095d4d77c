//! Trajectory CSV files and flat key-value manifests.
//!
//! Trajectory files have the header `t,flight,z1,...,zD,u1,...,ud`, one row
//! per snapshot, sorted by flight and then time.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::types::{Flight, TrajectoryDataset};

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn trajectory_header(state_dim: usize, control_dim: usize) -> Vec<String> {
    let mut h = vec!["t".to_string(), "flight".to_string()];
    h.extend((1..=state_dim).map(|i| format!("z{i}")));
    h.extend((1..=control_dim).map(|i| format!("u{i}")));
    h
}

/// Serializes a dataset; flights are written in ascending id order.
pub fn dataset_to_csv(ds: &TrajectoryDataset) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(trajectory_header(ds.state_dim(), ds.control_dim()))?;
    let mut flights: Vec<&Flight> = ds.flights().iter().collect();
    flights.sort_by(|a, b| a.id.cmp(&b.id));
    let mut row = Vec::with_capacity(2 + ds.state_dim() + ds.control_dim());
    for f in flights {
        for k in 0..f.n_snapshots() {
            row.clear();
            row.push(f.times[k].to_string());
            row.push(f.id.clone());
            row.extend(f.states.column(k).iter().map(|v| v.to_string()));
            row.extend(f.controls.column(k).iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn write_dataset(path: &Path, ds: &TrajectoryDataset) -> Result<()> {
    write_atomic(path, &dataset_to_csv(ds)?)
}

pub fn read_dataset(path: &Path) -> Result<TrajectoryDataset> {
    let bytes = fs::read(path)?;
    parse_dataset(&bytes, path)
}

pub fn parse_dataset(bytes: &[u8], path: &Path) -> Result<TrajectoryDataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let header = rdr.headers()?.clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < 3 || cols[0] != "t" || cols[1] != "flight" {
        return Err(Error::parse(path, "header must start with `t,flight,z1`"));
    }
    let state_dim = cols[2..].iter().take_while(|c| c.starts_with('z')).count();
    let control_dim = cols.len() - 2 - state_dim;
    for (i, c) in cols[2..2 + state_dim].iter().enumerate() {
        if *c != format!("z{}", i + 1) {
            return Err(Error::parse(
                path,
                format!("expected column z{} but found `{c}`", i + 1),
            ));
        }
    }
    for (i, c) in cols[2 + state_dim..].iter().enumerate() {
        if *c != format!("u{}", i + 1) {
            return Err(Error::parse(
                path,
                format!("expected column u{} but found `{c}`", i + 1),
            ));
        }
    }
    if state_dim == 0 {
        return Err(Error::parse(path, "no state columns"));
    }

    struct Partial {
        id: String,
        times: Vec<f64>,
        values: Vec<f64>,
    }
    let mut flights: Vec<Partial> = Vec::new();
    let width = state_dim + control_dim;
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != cols.len() {
            return Err(Error::parse(path, format!("row {} has {} fields", line + 2, rec.len())));
        }
        let num = |j: usize| -> Result<f64> {
            rec[j]
                .parse::<f64>()
                .map_err(|_| Error::parse(path, format!("row {}: bad number `{}`", line + 2, &rec[j])))
        };
        let t = num(0)?;
        let id = &rec[1];
        match flights.last_mut() {
            Some(p) if p.id == id => {
                if t <= *p.times.last().unwrap() {
                    return Err(Error::parse(
                        path,
                        format!("row {}: time not increasing in flight `{id}`", line + 2),
                    ));
                }
                p.times.push(t);
            }
            _ => {
                if flights.iter().any(|p| p.id == id) {
                    return Err(Error::parse(
                        path,
                        format!("row {}: rows of flight `{id}` are not contiguous", line + 2),
                    ));
                }
                flights.push(Partial {
                    id: id.to_string(),
                    times: vec![t],
                    values: Vec::new(),
                });
            }
        }
        let p = flights.last_mut().unwrap();
        for j in 0..width {
            p.values.push(num(2 + j)?);
        }
    }
    if flights.is_empty() {
        return Err(Error::parse(path, "no data rows"));
    }

    let flights = flights
        .into_iter()
        .map(|p| {
            let n = p.times.len();
            let all = DMatrix::from_column_slice(width, n, &p.values);
            let states = all.rows(0, state_dim).into_owned();
            let controls = all.rows(state_dim, control_dim).into_owned();
            Flight::new(p.id, p.times, states, controls)
        })
        .collect::<Result<Vec<_>>>()?;
    TrajectoryDataset::new(flights)
}

/// Ordered `key=value` pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets `key`, replacing any earlier value.
    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut m = Self::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, format!("line {}: expected key=value", i + 1)))?;
            m.set(k.trim(), v.trim());
        }
        Ok(m)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?, path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.render().as_bytes())
    }
}
