//! Star-shaped closed surfaces given as level sets and parameterised radially
//! over the unit sphere, `X(ŝ) = t(ŝ) ŝ`.

use super::grid::SphereGrid;
use crate::{Error, Result};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// Surfaces shipped with the solver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Surface {
    Sphere { radius: f64 },
    Ellipsoid { a: f64, b: f64, c: f64 },
    /// `r(ŝ) = 1 + amplitude · q(ŝ)` with a fixed cubic harmonic-like polynomial `q`.
    BumpySphere { amplitude: f64 },
}

impl Default for Surface {
    fn default() -> Self {
        Surface::Sphere { radius: 1.0 }
    }
}

// q(x) = x1 x2 x3 + 0.5 x3³ − 0.4 x1² x2, homogeneous of degree 3.
fn bump_q(x: &Vector3<f64>) -> f64 {
    x.x * x.y * x.z + 0.5 * x.z.powi(3) - 0.4 * x.x * x.x * x.y
}

fn bump_grad(x: &Vector3<f64>) -> Vector3<f64> {
    Vector3::new(
        x.y * x.z - 0.8 * x.x * x.y,
        x.x * x.z - 0.4 * x.x * x.x,
        x.x * x.y + 1.5 * x.z * x.z,
    )
}

fn bump_hess(x: &Vector3<f64>) -> Matrix3<f64> {
    let h12 = x.z - 0.8 * x.x;
    Matrix3::new(-0.8 * x.y, h12, x.y, h12, 0.0, x.x, x.y, x.x, 3.0 * x.z)
}

/// Geometric data at one point of the surface.
#[derive(Clone, Debug)]
pub struct SurfacePoint {
    /// Parameter direction ŝ on the unit sphere.
    pub dir: Vector3<f64>,
    pub x: Vector3<f64>,
    /// Outward unit normal.
    pub normal: Vector3<f64>,
    /// Tangents: pushforwards of an orthonormal frame of T_ŝS².
    pub t1: Vector3<f64>,
    pub t2: Vector3<f64>,
    /// Area element relative to the solid angle, `|t1 × t2|`.
    pub area: f64,
    /// Shape operator (Weingarten map) as an ambient 3×3 matrix acting on tangent vectors.
    pub shape: Matrix3<f64>,
}

impl SurfacePoint {
    pub fn mean_curvature(&self) -> f64 {
        0.5 * self.shape.trace()
    }

    /// Largest absolute principal curvature.
    pub fn max_curvature(&self) -> f64 {
        let eig = self.shape.symmetric_eigenvalues();
        eig.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

/// Orthonormal frame of the tangent plane of S² at `s`.
pub fn sphere_frame(s: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let a = if s.x.abs() <= s.y.abs() && s.x.abs() <= s.z.abs() {
        Vector3::x()
    } else if s.y.abs() <= s.z.abs() {
        Vector3::y()
    } else {
        Vector3::z()
    };
    let e1 = a.cross(s).normalize();
    let e2 = s.cross(&e1);
    (e1, e2)
}

impl Surface {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Surface::Sphere { radius } => radius > 0.0 && radius.is_finite(),
            Surface::Ellipsoid { a, b, c } => [a, b, c].iter().all(|v| *v > 0.0 && v.is_finite()),
            Surface::BumpySphere { amplitude } => amplitude.abs() < 0.3,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("surface parameters out of range: {self:?}")))
        }
    }

    /// Radial distance `t(ŝ)` of the surface along the unit direction `s`.
    pub fn radial(&self, s: &Vector3<f64>) -> f64 {
        match *self {
            Surface::Sphere { radius } => radius,
            Surface::Ellipsoid { a, b, c } => {
                1.0 / ((s.x / a).powi(2) + (s.y / b).powi(2) + (s.z / c).powi(2)).sqrt()
            }
            Surface::BumpySphere { amplitude } => 1.0 + amplitude * bump_q(s),
        }
    }

    /// Level-set function F, its gradient and Hessian at `x`; the surface is
    /// `F = 0` and ∇F points outward.
    pub fn level_set(&self, x: &Vector3<f64>) -> (f64, Vector3<f64>, Matrix3<f64>) {
        match *self {
            Surface::Sphere { radius } => {
                let r = x.norm();
                let g = x / r;
                let h = (Matrix3::identity() - g * g.transpose()) / r;
                (r - radius, g, h)
            }
            Surface::Ellipsoid { a, b, c } => {
                let inv = Vector3::new(1.0 / (a * a), 1.0 / (b * b), 1.0 / (c * c));
                let f = x.component_mul(x).dot(&inv) - 1.0;
                let g = 2.0 * x.component_mul(&inv);
                let h = Matrix3::from_diagonal(&(2.0 * inv));
                (f, g, h)
            }
            Surface::BumpySphere { amplitude: e } => {
                let r = x.norm();
                let (r3, r5, r7) = (r.powi(3), r.powi(5), r.powi(7));
                let q = bump_q(x);
                let gq = bump_grad(x);
                let hq = bump_hess(x);
                let xxt = x * x.transpose();
                let f = r - 1.0 - e * q / r3;
                let g = x / r - e * (gq / r3 - 3.0 * q / r5 * x);
                let h_bump = hq / r3 - 3.0 / r5 * (gq * x.transpose() + x * gq.transpose())
                    - 3.0 * q / r5 * Matrix3::identity()
                    + 15.0 * q / r7 * xxt;
                let h = (Matrix3::identity() - xxt / (r * r)) / r - e * h_bump;
                (f, g, h)
            }
        }
    }

    /// Full geometric data at the surface point above the unit direction `s`.
    pub fn point(&self, s: &Vector3<f64>) -> SurfacePoint {
        let t = self.radial(s);
        let x = s * t;
        let (_, g, h) = self.level_set(&x);
        let gn = g.norm();
        let normal = g / gn;
        let proj = Matrix3::identity() - normal * normal.transpose();
        let shape = proj * h * proj / gn;
        let (e1, e2) = sphere_frame(s);
        let ns = normal.dot(s);
        let t1 = t * (e1 - (normal.dot(&e1) / ns) * s);
        let t2 = t * (e2 - (normal.dot(&e2) / ns) * s);
        let area = t1.cross(&t2).norm();
        SurfacePoint { dir: *s, x, normal, t1, t2, area, shape }
    }

    /// Radial gap `t(x̂) − |x|`; positive inside the domain.
    pub fn radial_gap(&self, x: &Vector3<f64>) -> f64 {
        let r = x.norm();
        if r == 0.0 {
            return self.radial(&Vector3::z());
        }
        self.radial(&(x / r)) - r
    }

    pub fn contains(&self, x: &Vector3<f64>) -> bool {
        self.radial_gap(x) > 0.0
    }

    /// Radius of the largest origin-centred ball inside the domain, estimated on `grid`.
    pub fn inner_radius(&self, grid: &SphereGrid) -> f64 {
        grid.dirs.iter().map(|s| self.radial(s)).fold(f64::INFINITY, f64::min)
    }
}

/// The unperturbed surface sampled on a sphere grid: node positions, frames and
/// area-weighted quadrature weights.
#[derive(Clone, Debug)]
pub struct ParamSurface {
    pub surface: Surface,
    pub grid: SphereGrid,
    pub points: Vec<SurfacePoint>,
    /// Area weights: solid-angle weight times area element.
    pub weights: Vec<f64>,
}

impl ParamSurface {
    pub fn new(surface: Surface, degree: usize) -> Self {
        let grid = SphereGrid::new(degree);
        let points: Vec<SurfacePoint> = grid.dirs.iter().map(|s| surface.point(s)).collect();
        let weights = points.iter().zip(&grid.weights).map(|(p, w)| p.area * w).collect();
        Self { surface, grid, points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn area(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Writes the node set as CSV with columns `x,y,z,nx,ny,nz,w`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "z", "nx", "ny", "nz", "w"])?;
        for (p, wt) in self.points.iter().zip(&self.weights) {
            w.write_record(
                [p.x.x, p.x.y, p.x.z, p.normal.x, p.normal.y, p.normal.z, *wt].map(|v| format!("{v:.17e}")),
            )?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}
