//! Stochastic-electrodynamics toolkit: zero-point field sampling, driven
//! particle ensembles, phase-space statistics, quantum hydrodynamics, a
//! reference Schrödinger solver, Wigner functions and a variational
//! ground-state solver.
//!
//! Everything runs in dimensionless units (`hbar = m = omega0 = 1` by
//! default). Where the momentum dispersion scale `beta` appears, `hbar` is
//! derived as `2 beta`.

pub mod deriv;
pub mod ensemble;
pub mod error;
pub mod field;
pub mod grid;
pub mod hydro;
pub mod io;
pub mod params;
pub mod phase_stats;
pub mod schrod;
pub mod states;
pub mod sum;
pub mod varmin;
pub mod wigner;

pub use error::{Error, Result};
pub use grid::{Boundary, Grid1};
pub use num_complex::Complex64;
pub use params::{default_params, PhysicalParams, Potential};
