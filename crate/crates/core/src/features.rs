//! Extended control features: the raw control, its one-step lag, and the
//! running integral `omega` and double integral `W` of the control signal.
//!
//! For a flight with uniform step `dt` and controls `mu_0..mu_{n-1}`:
//!
//! ```text
//! omega_n = sum_{i=0}^{n} mu_i * dt
//! W_n     = sum_{i=0}^{n} omega_i * dt
//! ```
//!
//! The lag at the first snapshot repeats `mu_0`. Integrals restart at every
//! flight.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Which blocks make up the control-feature vector fed to the `N` operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FeatureSpec {
    pub include_control: bool,
    pub include_lagged_control: bool,
    pub include_omega: bool,
    pub include_w: bool,
    pub standardize: bool,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self::control_only()
    }
}

impl FeatureSpec {
    /// State only, no control features.
    pub fn state_only() -> Self {
        Self {
            include_control: false,
            include_lagged_control: false,
            include_omega: false,
            include_w: false,
            standardize: false,
        }
    }

    /// `[z_n; mu_n]`, the plain DMDc layout.
    pub fn control_only() -> Self {
        Self {
            include_control: true,
            ..Self::state_only()
        }
    }

    /// `[z_n; mu_n; mu_{n-1}; omega_n; W_n]`.
    pub fn extended() -> Self {
        Self {
            include_control: true,
            include_lagged_control: true,
            include_omega: true,
            include_w: true,
            standardize: false,
        }
    }

    pub fn with_standardize(mut self, on: bool) -> Self {
        self.standardize = on;
        self
    }

    pub fn block_count(&self) -> usize {
        [
            self.include_control,
            self.include_lagged_control,
            self.include_omega,
            self.include_w,
        ]
        .iter()
        .filter(|&&b| b)
        .count()
    }

    pub fn uses_controls(&self) -> bool {
        self.block_count() > 0
    }

    /// Minimum snapshots per flight needed to assemble at least one pair.
    pub fn min_snapshots(&self) -> usize {
        if self.include_lagged_control {
            3
        } else {
            2
        }
    }

    /// Encodes the five flags as `0`/`1` separated by spaces.
    pub fn to_flags(&self) -> String {
        [
            self.include_control,
            self.include_lagged_control,
            self.include_omega,
            self.include_w,
            self.standardize,
        ]
        .iter()
        .map(|&b| if b { "1" } else { "0" })
        .collect::<Vec<_>>()
        .join(" ")
    }

    pub fn from_flags(s: &str) -> Result<Self> {
        let flags = s
            .split_whitespace()
            .map(|tok| match tok {
                "0" | "false" => Ok(false),
                "1" | "true" => Ok(true),
                other => Err(Error::InvalidConfig(format!("bad feature flag `{other}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if flags.len() != 5 {
            return Err(Error::InvalidConfig(format!(
                "expected 5 feature flags, found {}",
                flags.len()
            )));
        }
        Ok(Self {
            include_control: flags[0],
            include_lagged_control: flags[1],
            include_omega: flags[2],
            include_w: flags[3],
            standardize: flags[4],
        })
    }
}

/// Parses the comma-separated list used on the command line
/// (`z,u,ulag,omega,W`). `z` is always implied; standardization is not part
/// of the list.
impl FromStr for FeatureSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut spec = FeatureSpec::state_only();
        for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match tok {
                "z" => {}
                "u" => spec.include_control = true,
                "ulag" => spec.include_lagged_control = true,
                "omega" => spec.include_omega = true,
                "W" | "w" => spec.include_w = true,
                other => return Err(Error::InvalidConfig(format!("unknown feature `{other}`"))),
            }
        }
        Ok(spec)
    }
}

impl fmt::Display for FeatureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = vec!["z"];
        if self.include_control {
            parts.push("u");
        }
        if self.include_lagged_control {
            parts.push("ulag");
        }
        if self.include_omega {
            parts.push("omega");
        }
        if self.include_w {
            parts.push("W");
        }
        f.write_str(&parts.join(","))
    }
}

/// Total control-feature dimension `d'` for raw control dimension `d`.
pub fn d_prime(spec: &FeatureSpec, d: usize) -> usize {
    spec.block_count() * d
}

/// Builds the `d' x n` feature matrix for a control sequence given as a
/// `d x n` matrix (one column per snapshot).
pub fn control_features(controls: &DMatrix<f64>, spec: &FeatureSpec, dt: f64) -> Result<DMatrix<f64>> {
    let d = controls.nrows();
    let n = controls.ncols();
    if d == 0 && spec.uses_controls() {
        return Err(Error::InvalidConfig(
            "feature spec requests control blocks but the dataset has no controls".into(),
        ));
    }
    let dp = d_prime(spec, d);
    let mut out = DMatrix::zeros(dp, n);
    if dp == 0 {
        return Ok(out);
    }

    let mut omega = vec![0.0; d];
    let mut w = vec![0.0; d];
    for k in 0..n {
        for j in 0..d {
            omega[j] += controls[(j, k)] * dt;
            w[j] += omega[j] * dt;
        }
        let mut row = 0;
        if spec.include_control {
            for j in 0..d {
                out[(row + j, k)] = controls[(j, k)];
            }
            row += d;
        }
        if spec.include_lagged_control {
            let lag = k.saturating_sub(1);
            for j in 0..d {
                out[(row + j, k)] = controls[(j, lag)];
            }
            row += d;
        }
        if spec.include_omega {
            for j in 0..d {
                out[(row + j, k)] = omega[j];
            }
            row += d;
        }
        if spec.include_w {
            for j in 0..d {
                out[(row + j, k)] = w[j];
            }
        }
    }
    Ok(out)
}
