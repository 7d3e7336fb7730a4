//! Dirichlet eigenvalues of the Stokes system on closed surfaces in three
//! dimensions, computed as real zeros of a single-layer boundary operator, and
//! their asymptotic expansions under small normal perturbations of the boundary.
//!
//! The crate is organised bottom-up:
//!
//! - [`series`]: truncated power-series arithmetic in the perturbation amplitude.
//! - [`geometry`]: star-shaped surfaces, perturbation fields, the deformation map.
//! - [`kernels`]: the oscillatory Stokeslet, its pressure, and δ-expansions.
//! - [`layer`]: Galerkin discretisation of the single-layer operator and
//!   potential evaluation away from the boundary.
//! - [`spectral`]: smallest-singular-value scans and eigenvalue location.
//! - [`perturbation`]: contour-integral eigenvalue coefficients and
//!   eigenfunction/eigenpressure corrections.
//! - [`oracles`]: independent reference values (Bessel zeros, slope fits,
//!   finite-difference eigenvalue derivatives).
//! - [`validation`]: kernel and geometry property checks.
//! - [`config`] and [`pipeline`]: the run configuration and the CLI stages.

pub mod config;
pub mod error;
pub mod geometry;
pub mod kernels;
pub mod layer;
pub mod oracles;
pub mod perturbation;
pub mod pipeline;
pub mod series;
pub mod spectral;
pub mod validation;

pub use error::{Error, Result};

/// Complex double used for every operator entry.
pub type C64 = num_complex::Complex64;
