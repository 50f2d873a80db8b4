//! Numerical laboratory for Llarull potentials on rotationally symmetric
//! Riemannian 3-spheres `g = φ(θ)²dθ² + f(θ)²g_{S²}`.
//!
//! The crate builds metrics from named families, solves the potential
//! equation `Δ_g u + 3cot(θ)|∇u| = 0` with `u(±p) = ±1` by two independent
//! routes, evaluates the integral functionals of the stability estimates and
//! turns each estimate into a falsifiable [`checks::CheckResult`].
//!
//! Algorithm variants (metric families, potential solvers, check suites) sit
//! behind traits and are looked up by name in registries, so scenarios pick
//! them from configuration.

pub mod checks;
pub mod error;
pub mod families;
pub mod fmm;
pub mod functionals;
pub mod grid;
pub mod ledger;
pub mod metric;
pub mod potential;
pub mod report;
pub mod scenario;
pub mod sequence;

pub use error::{LabError, Result};
pub use grid::RadialGrid;
pub use metric::{ClassParams, WarpedMetric};
pub use potential::{Potential, SolverConfig};
