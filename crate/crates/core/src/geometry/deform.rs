//! The normal deformation `Ψ_δ(x) = x + δ ρ(x) ν(x)` and its purely geometric
//! expansion coefficients.
//!
//! The matrix `M = ∇(ρν)` needs an ambient extension of `ρν`. On tangent
//! vectors it is fixed by the surface (`Mτ = (∇_Sρ·τ) ν + ρ Wτ`, with `W` the
//! shape operator); along the normal we use `Mν = ρ H ν`, `H` the mean
//! curvature, which turns the dilation field of a sphere into the identity
//! matrix. Quantities built from tangential data only (exact area ratio,
//! deformed normal) do not depend on this choice.

use super::field::PerturbationField;
use super::surface::{Surface, SurfacePoint};
use crate::series::Series;
use crate::{Error, Result};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// Which surface element the deformed operators use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianKind {
    /// Exact area ratio `|τ₁^δ × τ₂^δ| / |τ₁ × τ₂|`.
    #[default]
    Exact,
    /// The cubic `det(I + δM)`.
    Polynomial,
}

/// Surface point together with the perturbation data needed by Ψ_δ.
#[derive(Clone, Debug)]
pub struct PerturbedNode {
    pub point: SurfacePoint,
    pub rho: f64,
    /// Surface gradient of ρ.
    pub grad_s: Vector3<f64>,
    /// Tangential Hessian of ρ (projected ambient Hessian with curvature correction).
    pub hess_s: Matrix3<f64>,
    pub m: Matrix3<f64>,
    /// ρ(x) ν(x).
    pub rho_nu: Vector3<f64>,
}

impl PerturbedNode {
    pub fn new(surface: &Surface, field: &PerturbationField, dir: &Vector3<f64>) -> Self {
        Self::from_point(surface.point(dir), field)
    }

    pub fn from_point(point: SurfacePoint, field: &PerturbationField) -> Self {
        let (rho, g, h) = field.jet(&point.x);
        let nu = point.normal;
        let proj = Matrix3::identity() - nu * nu.transpose();
        let grad_s = proj * g;
        let hess_s = proj * h * proj - nu.dot(&g) * point.shape;
        let m = nu * grad_s.transpose() + rho * point.shape + rho * point.mean_curvature() * nu * nu.transpose();
        let rho_nu = rho * nu;
        Self { point, rho, grad_s, hess_s, m, rho_nu }
    }

    pub fn x(&self) -> Vector3<f64> {
        self.point.x
    }

    /// `Ψ_δ(x) = x + δ ρ(x) ν(x)`.
    pub fn psi(&self, delta: f64) -> Vector3<f64> {
        self.point.x + delta * self.rho_nu
    }

    /// Coefficients `(σ₀, σ₁, σ₂, σ₃)` of `det(I + δM)`.
    pub fn surface_element_series(&self) -> [f64; 4] {
        let m = &self.m;
        let tr = m.trace();
        let tr2 = (m * m).trace();
        [1.0, tr, 0.5 * (tr * tr - tr2), m.determinant()]
    }

    /// `det(I + δM)` through its cubic polynomial.
    pub fn jacobian_det_polynomial(&self, delta: f64) -> f64 {
        let s = self.surface_element_series();
        s[0] + delta * (s[1] + delta * (s[2] + delta * s[3]))
    }

    /// Coefficients `(a, b, c)` of `(τ₁ + δMτ₁) × (τ₂ + δMτ₂) / |τ₁ × τ₂|`.
    pub fn cross_series(&self) -> [Vector3<f64>; 3] {
        let p = &self.point;
        let mt1 = self.m * p.t1;
        let mt2 = self.m * p.t2;
        let inv = 1.0 / p.area;
        [p.t1.cross(&p.t2) * inv, (p.t1.cross(&mt2) + mt1.cross(&p.t2)) * inv, mt1.cross(&mt2) * inv]
    }

    fn cross_at(&self, delta: f64) -> Vector3<f64> {
        let [a, b, c] = self.cross_series();
        a + delta * b + delta * delta * c
    }

    /// Exact area-element ratio of the deformed surface.
    pub fn surface_element_exact(&self, delta: f64) -> f64 {
        self.cross_at(delta).norm()
    }

    pub fn surface_element(&self, kind: JacobianKind, delta: f64) -> f64 {
        match kind {
            JacobianKind::Exact => self.surface_element_exact(delta),
            JacobianKind::Polynomial => self.jacobian_det_polynomial(delta),
        }
    }

    /// Taylor coefficients in δ of the chosen surface element.
    pub fn surface_element_taylor<const L: usize>(&self, kind: JacobianKind) -> Series<L> {
        match kind {
            JacobianKind::Polynomial => Series::from_real(&self.surface_element_series()),
            JacobianKind::Exact => {
                let [a, b, c] = self.cross_series();
                let sq = [a.dot(&a), 2.0 * a.dot(&b), b.dot(&b) + 2.0 * a.dot(&c), 2.0 * b.dot(&c), c.dot(&c)];
                Series::<L>::from_real(&sq).powf(0.5)
            }
        }
    }

    /// Unit normal of the deformed surface at `Ψ_δ(x)`.
    pub fn deformed_normal(&self, delta: f64) -> Vector3<f64> {
        self.cross_at(delta).normalize()
    }

    /// `(ν⁽⁰⁾, ν⁽¹⁾)`, the first two Taylor coefficients of the deformed normal.
    pub fn normal_series(&self) -> (Vector3<f64>, Vector3<f64>) {
        let [a, b, _] = self.cross_series();
        let an = a.norm();
        let nu0 = a / an;
        let nu1 = (b - nu0.dot(&b) * nu0) / an;
        (nu0, nu1)
    }

    /// Discrete C² size of ρ at this node: `|ρ| + |∇_Sρ| + ‖Hess_S ρ‖_F`.
    pub fn c2_proxy(&self) -> f64 {
        self.rho.abs() + self.grad_s.norm() + self.hess_s.norm()
    }

    /// Spectral norm of M.
    pub fn m_norm(&self) -> f64 {
        let s = self.m.singular_values();
        s.iter().fold(0.0, |a: f64, b| a.max(*b))
    }
}

/// `Θ(x, y) = ρ(x)ν(x) − ρ(y)ν(y)`, so that `Ψ_δ(x) − Ψ_δ(y) = x − y + δΘ`.
pub fn theta(x: &PerturbedNode, y: &PerturbedNode) -> Vector3<f64> {
    x.rho_nu - y.rho_nu
}

/// Direct determinant `det(I + δM)`.
pub fn jacobian_det_direct(m: &Matrix3<f64>, delta: f64) -> f64 {
    (Matrix3::identity() + delta * m).determinant()
}

/// Injectivity budget `δ₀ = 0.9 / (sup ‖M‖₂ + sup |ρ| · κ_max)` over the nodes.
pub fn injectivity_budget(nodes: &[PerturbedNode]) -> f64 {
    let m = nodes.iter().map(|n| n.m_norm()).fold(0.0, f64::max);
    let r = nodes.iter().map(|n| n.rho.abs()).fold(0.0, f64::max);
    let k = nodes.iter().map(|n| n.point.max_curvature()).fold(0.0, f64::max);
    let denom = m + r * k;
    if denom == 0.0 {
        f64::INFINITY
    } else {
        0.9 / denom
    }
}

/// Largest discrete C² size of ρ over the nodes.
pub fn c2_norm_proxy(nodes: &[PerturbedNode]) -> f64 {
    nodes.iter().map(|n| n.c2_proxy()).fold(0.0, f64::max)
}

/// The deformed surface `Ψ_δ(∂Ω)` with its admissibility check.
#[derive(Clone, Debug)]
pub struct DeformedSurface {
    pub base: Surface,
    pub field: PerturbationField,
    pub delta: f64,
    pub delta0: f64,
}

impl DeformedSurface {
    /// Checks `|δ| < δ₀`, with δ₀ estimated on `nodes`.
    pub fn new(base: Surface, field: PerturbationField, delta: f64, nodes: &[PerturbedNode]) -> Result<Self> {
        let delta0 = injectivity_budget(nodes);
        if delta.abs() >= delta0 {
            return Err(Error::DeltaOutOfRange { delta, delta0 });
        }
        Ok(Self { base, field, delta, delta0 })
    }

    pub fn node(&self, dir: &Vector3<f64>) -> PerturbedNode {
        PerturbedNode::new(&self.base, &self.field, dir)
    }

    /// Radial gap of `x` relative to the deformed surface, measured along x̂.
    /// Positive inside. Uses a few fixed-point steps to invert the radial map.
    pub fn radial_gap(&self, x: &Vector3<f64>) -> f64 {
        let r = x.norm();
        if r == 0.0 {
            return f64::INFINITY;
        }
        let target = x / r;
        // Find the parameter direction whose deformed image points along x̂.
        let mut s = target;
        for _ in 0..50 {
            let img = self.node(&s).psi(self.delta);
            let dir = img.normalize();
            let corr = target - dir;
            if corr.norm() < 1e-14 {
                break;
            }
            s = (s + corr).normalize();
        }
        self.node(&s).psi(self.delta).norm() - r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pole() -> Vector3<f64> {
        Vector3::new(0.0, 0.0, 1.0)
    }

    #[test]
    fn psi_examples() {
        let sphere = Surface::Sphere { radius: 1.0 };
        let n = PerturbedNode::new(&sphere, &PerturbationField::Constant { value: 1.0 }, &pole());
        assert!((n.psi(0.1) - Vector3::new(0.0, 0.0, 1.1)).norm() < 1e-15);
        assert!((n.psi(0.0) - n.x()).norm() == 0.0);
        let n3 = PerturbedNode::new(&sphere, &PerturbationField::X3 { amplitude: 1.0 }, &pole());
        assert!((n3.psi(0.05) - Vector3::new(0.0, 0.0, 1.05)).norm() < 1e-15);
    }

    #[test]
    fn sphere_dilation_has_identity_m() {
        let sphere = Surface::Sphere { radius: 1.0 };
        let d = Vector3::new(0.3, 0.5, -0.2).normalize();
        let n = PerturbedNode::new(&sphere, &PerturbationField::Constant { value: 1.0 }, &d);
        assert!((n.m - Matrix3::identity()).norm() < 1e-14);
        let s = n.surface_element_series();
        for (a, b) in s.iter().zip([1.0, 3.0, 3.0, 1.0]) {
            assert!((a - b).abs() < 1e-14);
        }
        let dl = 0.07;
        assert!((n.surface_element_exact(dl) - (1.0 + dl).powi(2)).abs() < 1e-14);
        assert!(n.normal_series().1.norm() < 1e-14);
    }

    #[test]
    fn zero_field_is_inert() {
        let e = Surface::Ellipsoid { a: 1.0, b: 0.8, c: 0.6 };
        let d = Vector3::new(0.1, 0.5, 0.4).normalize();
        let n = PerturbedNode::new(&e, &PerturbationField::zero(), &d);
        assert_eq!(n.surface_element_series(), [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(n.jacobian_det_polynomial(0.3), 1.0);
        assert_eq!(n.normal_series().1.norm(), 0.0);
    }

    #[test]
    fn exact_area_ratio_matches_chart_finite_difference() {
        let e = Surface::Ellipsoid { a: 1.0, b: 0.8, c: 0.6 };
        let f = PerturbationField::TrigBump { amplitude: 0.4, theta0: 0.7, phi0: 1.1, width: 0.8 };
        let d = Vector3::new(0.3, 0.5, 0.6).normalize();
        let delta = 1e-3;
        let n = PerturbedNode::new(&e, &f, &d);
        let (e1, e2) = super::super::surface::sphere_frame(&d);
        let h = 1e-5;
        let image = |s: Vector3<f64>| PerturbedNode::new(&e, &f, &s.normalize()).psi(delta);
        let chart = |s: Vector3<f64>| PerturbedNode::new(&e, &f, &s.normalize()).psi(0.0);
        let dd = |g: &dyn Fn(Vector3<f64>) -> Vector3<f64>, v: Vector3<f64>| (g(d + h * v) - g(d - h * v)) / (2.0 * h);
        let a_def = dd(&image, e1).cross(&dd(&image, e2)).norm();
        let a_ref = dd(&chart, e1).cross(&dd(&chart, e2)).norm();
        assert!((a_def / a_ref - n.surface_element_exact(delta)).abs() < 1e-8);
    }

    #[test]
    fn exact_series_reproduces_exact_element() {
        let b = Surface::BumpySphere { amplitude: 0.15 };
        let f = PerturbationField::X3Squared { amplitude: 0.8 };
        let d = Vector3::new(-0.2, 0.6, 0.4).normalize();
        let n = PerturbedNode::new(&b, &f, &d);
        let s = n.surface_element_taylor::<5>(JacobianKind::Exact);
        for delta in [1e-2, 1e-3] {
            let err = (s.eval(delta).re - n.surface_element_exact(delta)).abs();
            assert!(err < 10.0 * delta.powi(5) + 1e-15, "{err}");
        }
    }

    #[test]
    fn deformed_radial_gap_on_dilated_sphere() {
        let sphere = Surface::Sphere { radius: 1.0 };
        let ds = DeformedSurface {
            base: sphere,
            field: PerturbationField::Constant { value: 1.0 },
            delta: 0.1,
            delta0: 0.45,
        };
        let g = ds.radial_gap(&Vector3::new(0.5, 0.0, 0.0));
        assert!((g - 0.6).abs() < 1e-12);
    }

    #[test]
    fn budget_rejects_large_delta() {
        let sphere = Surface::Sphere { radius: 1.0 };
        let f = PerturbationField::Constant { value: 1.0 };
        let nodes: Vec<_> = [pole()].iter().map(|d| PerturbedNode::new(&sphere, &f, d)).collect();
        assert!((injectivity_budget(&nodes) - 0.45).abs() < 1e-12);
        assert!(DeformedSurface::new(sphere, f, 0.5, &nodes).is_err());
    }
}
