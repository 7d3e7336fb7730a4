//! Surfaces, perturbation fields and the deformation map.

pub mod deform;
pub mod field;
pub mod grid;
pub mod surface;

pub use deform::{injectivity_budget, jacobian_det_direct, theta, DeformedSurface, JacobianKind, PerturbedNode};
pub use field::PerturbationField;
pub use grid::{gauss_legendre, PolarRule, SphereGrid};
pub use surface::{ParamSurface, Surface, SurfacePoint};
