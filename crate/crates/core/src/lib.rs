//! Numerical periodic homogenization of quasilinear monotone elliptic
//! operators `-div A(x/eps, grad u) = F` on the unit square.
//!
//! The crate is organised bottom-up:
//!
//! * [`coefficients`] – admissible flux maps `A(y, z)` and built-in models.
//! * [`mesh`] – structured P1 meshes, fields, norms, mollifier and cut-off.
//! * [`laplace`] – discrete Laplace solves (fast spectral and CG).
//! * [`solver`] – preconditioned Zarantonello iteration for monotone problems.
//! * [`cell`] – cell correctors, effective flux, flux correctors and tables.
//! * [`bvp`] – Dirichlet problems for the oscillating and homogenized operators.
//! * [`expansion`] – smoothed first-order expansion and its error functionals.
//! * [`probe`] – excess, Lipschitz-profile and integrability measurements.
//! * [`harness`] – study configuration, slope fitting and batch drivers.
//! * [`acceptance`] – the built-in verification suite.

pub mod acceptance;
pub mod bvp;
pub mod cell;
pub mod coefficients;
pub mod error;
pub mod expansion;
pub mod harness;
pub mod laplace;
pub mod linalg;
pub mod mesh;
pub mod probe;
pub mod solver;

pub use cell::{
    build_effective_table, effective_flux, flux_corrector, solve_corrector, CorrectorSolution,
    CorrectorTable, EffectiveTable, FluxCorrector, XiGrid,
};
pub use coefficients::{CoefficientModel, ModelKind};
pub use error::{Error, Result};
pub use mesh::{Flavor, Mesh, RegionMask, Vec2};
pub use solver::{SolveOptions, SolveReport};
