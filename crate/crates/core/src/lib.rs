//! Stable linear system identification from snapshot data.
//!
//! Learns `z_{n+1} = M z_n + N u_n` (DMD / DMDc) by ridge-regularized least
//! squares, searching the ridge penalty until the spectral radius of `M`
//! drops below a target, and uses such models as data-driven corrections on
//! top of a coarse physics model (hybrid twin).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod datagen;
pub mod dmdc;
pub mod error;
pub mod features;
pub mod hybrid;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod model_io;
pub mod regression;
pub mod stabilization;
pub mod types;

pub use error::{Error, Result};
pub use features::{control_features, d_prime, FeatureSpec};
pub use types::{
    assemble_snapshots, ControlledLinearModel, FitReport, Flight, ReducedControlledModel, Scaling, SnapshotSystem,
    TrajectoryDataset,
};
