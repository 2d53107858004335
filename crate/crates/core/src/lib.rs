//! Design and simulation toolkit for quasi-phase-matched thin-film lithium
//! niobate waveguides.
//!
//! The crate is layered bottom-up:
//!
//! * [`materials`]: temperature-dependent Sellmeier models loaded from a data file.
//! * [`mode_solver`]: finite-difference eigenmodes of a trapezoidal ridge and the
//!   three-wave overlap integral.
//! * [`qpm`]: wavevector mismatch, poling periods, tuning curves, SHG efficiency
//!   and DFG spectra.
//! * [`pairs`]: SPDC pair-rate, coincidence and CAR models plus a Monte-Carlo
//!   gated-detector simulation.
//! * [`metrics`]: facet-loss de-embedding and resonator Q to propagation loss.
//! * [`config`] and [`runner`]: the project file and the command implementations
//!   behind the `qpmkit` binary.

// `!(x > 0.0)` is deliberate throughout: it rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod materials;
pub mod metrics;
pub mod mode_solver;
pub mod output;
pub mod pairs;
pub mod qpm;
pub mod runner;
pub mod units;

pub use error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Vacuum permittivity, F/m.
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;

/// Tool version stamped into every emitted file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
