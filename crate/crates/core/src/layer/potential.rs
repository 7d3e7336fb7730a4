//! Off-surface evaluation of the single-layer velocity and pressure potentials.

use super::harmonics;
use super::Discretization;
use crate::geometry::{PerturbedNode, SphereGrid};
use crate::kernels::{pressure, stokeslet_upper, PhaseRate, SpectralParam};
use crate::{Error, Result, C64};
use nalgebra::Vector3;

/// A density sampled on a fine evaluation grid of the deformed surface,
/// ready for potential evaluation at interior or exterior points.
#[derive(Clone, Debug)]
pub struct LayerPotential {
    points: Vec<Vector3<f64>>,
    /// Density times quadrature weight at each evaluation node.
    weighted: Vec<[C64; 3]>,
    /// Typical node spacing of the evaluation grid.
    pub spacing: f64,
    rate: PhaseRate,
}

impl LayerPotential {
    /// Samples the density with coefficients `coeffs` of `disc` on a product
    /// grid of degree `eval_degree`.
    pub fn new(disc: &Discretization, coeffs: &[C64], eval_degree: usize) -> Self {
        let grid = SphereGrid::new(eval_degree.max(disc.degree()));
        let p = disc.degree();
        let nb = harmonics::basis_len(p);
        let mut y = vec![0.0; nb];
        let mut points = Vec::with_capacity(grid.len());
        let mut weighted = Vec::with_capacity(grid.len());
        let mut area = 0.0;
        for (s, w) in grid.dirs.iter().zip(&grid.weights) {
            let node = PerturbedNode::new(&disc.surface, &disc.field, s);
            let wt = w * node.point.area * node.surface_element(disc.options.jacobian, disc.delta);
            area += wt;
            harmonics::eval_into(p, s, &mut y);
            let mut v = [C64::new(0.0, 0.0); 3];
            for (j, vj) in v.iter_mut().enumerate() {
                for b in 0..nb {
                    *vj += coeffs[j * nb + b] * y[b];
                }
                *vj *= wt;
            }
            points.push(node.psi(disc.delta));
            weighted.push(v);
        }
        let spacing = (area / grid.len() as f64).sqrt();
        Self { points, weighted, spacing, rate: disc.options.rate }
    }

    /// Default evaluation degree for a discretization of degree `p`.
    pub fn default_degree(p: usize) -> usize {
        (3 * p).max(32)
    }

    /// Distance from `x` to the nearest evaluation node.
    pub fn node_distance(&self, x: &Vector3<f64>) -> f64 {
        self.points.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min)
    }

    fn check(&self, x: &Vector3<f64>) -> Result<()> {
        let d = self.node_distance(x);
        let limit = 2.0 * self.spacing;
        if d <= limit {
            Err(Error::TooCloseToBoundary { distance: d, limit })
        } else {
            Ok(())
        }
    }

    /// Single-layer velocity `∫ Γ(λ, x − y) φ(y) dσ(y)`.
    pub fn velocity(&self, lambda: C64, x: &Vector3<f64>) -> Result<[C64; 3]> {
        self.check(x)?;
        let kappa = SpectralParam::new(lambda).kappa(self.rate);
        let mut v = [C64::new(0.0, 0.0); 3];
        for (y, f) in self.points.iter().zip(&self.weighted) {
            let g = stokeslet_upper(kappa, &(x - y))?;
            v[0] += g[0] * f[0] + g[1] * f[1] + g[2] * f[2];
            v[1] += g[1] * f[0] + g[3] * f[1] + g[4] * f[2];
            v[2] += g[2] * f[0] + g[4] * f[1] + g[5] * f[2];
        }
        Ok(v)
    }

    /// Pressure potential `∫ P(x − y) · φ(y) dσ(y)`.
    pub fn pressure(&self, x: &Vector3<f64>) -> Result<C64> {
        self.check(x)?;
        let mut p = C64::new(0.0, 0.0);
        for (y, f) in self.points.iter().zip(&self.weighted) {
            let pv = pressure(&(x - y))?;
            p += f[0] * pv[0] + f[1] * pv[1] + f[2] * pv[2];
        }
        Ok(p)
    }
}
