//! Coverage, spectral efficiency and area spectral efficiency of Poisson
//! small-cell networks under a combined LOS/NLOS path-loss model.
//!
//! Two independent engines compute the same quantities:
//!
//! * [`analytics`] evaluates the serving-distance law, the interference
//!   Laplace functional and the SIR CCDF by nested adaptive quadrature.
//! * [`montecarlo`] drops base stations, thins them into LOS/NLOS sets,
//!   associates the typical user and measures the SIR directly.
//!
//! [`experiments`] sweeps either engine over base-station density or the
//! LOS length scale and [`cli`] exposes everything on the command line.

pub mod analytics;
pub mod cli;
pub mod curve;
pub mod error;
pub mod experiments;
pub mod montecarlo;
pub mod propagation;
pub mod quadrature;

pub use analytics::{Analyzer, NetworkConfig};
pub use curve::Curve;
pub use error::{Error, Result};
pub use propagation::{LosModel, PathLossParams};
