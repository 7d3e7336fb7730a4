//! Gauss product grids on the unit sphere.

use gauss_quad::legendre::GaussLegendre;
use nalgebra::Vector3;
use std::f64::consts::PI;
use std::num::NonZeroUsize;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, sorted ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let n = NonZeroUsize::new(n.max(1)).expect("nonzero");
    let rule = GaussLegendre::new(n);
    let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Product rule on S²: `p + 1` Gauss–Legendre rings in cos θ times `2p + 2`
/// equispaced longitudes. Integrates spherical polynomials of degree `2p + 1`
/// exactly.
#[derive(Clone, Debug)]
pub struct SphereGrid {
    pub degree: usize,
    pub n_theta: usize,
    pub n_phi: usize,
    /// Unit directions, ring-major (`ring * n_phi + k`).
    pub dirs: Vec<Vector3<f64>>,
    /// Solid-angle weights summing to 4π.
    pub weights: Vec<f64>,
    /// cos θ of each ring.
    pub ring_z: Vec<f64>,
    /// Longitude of each column.
    pub phis: Vec<f64>,
}

impl SphereGrid {
    pub fn new(degree: usize) -> Self {
        let n_theta = degree + 1;
        let n_phi = 2 * degree + 2;
        let (z, wz) = gauss_legendre(n_theta);
        let phis: Vec<f64> = (0..n_phi).map(|k| 2.0 * PI * k as f64 / n_phi as f64).collect();
        let mut dirs = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        for (&zi, &wi) in z.iter().zip(&wz) {
            let s = (1.0 - zi * zi).max(0.0).sqrt();
            for &phi in &phis {
                dirs.push(Vector3::new(s * phi.cos(), s * phi.sin(), zi));
                weights.push(wi * 2.0 * PI / n_phi as f64);
            }
        }
        Self { degree, n_theta, n_phi, dirs, weights, ring_z: z, phis }
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    /// Degree whose grid size `2 (p + 1)²` is closest to `nodes`.
    pub fn degree_for_nodes(nodes: usize) -> usize {
        let p = ((nodes as f64 / 2.0).sqrt() - 1.0).round();
        p.max(2.0) as usize
    }

    /// Typical geodesic node spacing on the unit sphere.
    pub fn spacing(&self) -> f64 {
        PI / self.n_theta as f64
    }
}

/// Local polar product rule about the north pole: Gauss–Legendre in the
/// colatitude θ' ∈ (0, π) with the sin θ' Jacobian folded into the weights,
/// and equispaced azimuths offset by half a step. The polar Jacobian cancels
/// the 1/|x − y| singularity of the Stokeslet at the pole.
#[derive(Clone, Debug)]
pub struct PolarRule {
    pub dirs: Vec<Vector3<f64>>,
    pub weights: Vec<f64>,
}

impl PolarRule {
    pub fn new(n_radial: usize, n_azimuth: usize) -> Self {
        let (x, w) = gauss_legendre(n_radial);
        let mut dirs = Vec::with_capacity(n_radial * n_azimuth);
        let mut weights = Vec::with_capacity(n_radial * n_azimuth);
        let dphi = 2.0 * PI / n_azimuth as f64;
        for (&xi, &wi) in x.iter().zip(&w) {
            let th = 0.5 * PI * (xi + 1.0);
            let (st, ct) = th.sin_cos();
            for k in 0..n_azimuth {
                let phi = (k as f64 + 0.5) * dphi;
                dirs.push(Vector3::new(st * phi.cos(), st * phi.sin(), ct));
                weights.push(0.5 * PI * wi * st * dphi);
            }
        }
        Self { dirs, weights }
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }
}
