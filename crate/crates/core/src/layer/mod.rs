//! Discretization of the single-layer operator
//! `A_δ(λ)φ(x) = ∫ Γ(λ, Ψ_δ(x) − Ψ_δ(y)) φ(y) J_δ(y) dσ(y)` on a radially
//! parameterised surface.
//!
//! Densities are expanded in real spherical harmonics of degree ≤ p over the
//! parameter sphere, one expansion per Cartesian component, and the operator is
//! projected by a Galerkin scheme whose test integrals use the Gauss product
//! grid. For each target node the weakly singular inner integral is computed
//! with a polar product rule centred at the node, so the polar Jacobian
//! cancels the `1/|x − y|` singularity.
//!
//! Unknowns are ordered component-major: index `j · n_b + b` for component `j`
//! and harmonic `b`.

pub mod harmonics;
pub mod potential;

use crate::geometry::{injectivity_budget, JacobianKind, PerturbationField, PerturbedNode, PolarRule, SphereGrid, Surface};
use crate::kernels::{stokeslet_upper, PairGeometry, PhaseRate, SpectralParam};
use crate::{Error, Result, C64};
use faer::Mat;
use nalgebra::Vector3;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

pub use potential::LayerPotential;

/// Components `(i, j)` of the upper triangle of a symmetric 3×3 block.
pub const UPPER: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

/// Resolution and kernel options of a discretization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerOptions {
    /// Harmonic degree p; the node grid has `2 (p + 1)²` points.
    pub degree: usize,
    /// Extra polar-rule resolution beyond `p + 1`; `None` selects a default.
    pub extra: Option<usize>,
    pub jacobian: JacobianKind,
    pub rate: PhaseRate,
}

impl LayerOptions {
    pub fn new(degree: usize) -> Self {
        Self { degree, extra: None, jacobian: JacobianKind::Exact, rate: PhaseRate::Sqrt }
    }

    /// Options whose node count is closest to `nodes`.
    pub fn for_nodes(nodes: usize) -> Self {
        Self::new(SphereGrid::degree_for_nodes(nodes))
    }

    pub fn polar_extra(&self) -> usize {
        self.extra.unwrap_or_else(|| (self.degree / 4).max(3))
    }
}

/// A dense operator together with the tags it was assembled for.
#[derive(Clone, Debug)]
pub struct DenseOperator {
    pub matrix: Mat<C64>,
    pub lambda: C64,
    pub delta: f64,
    /// Number of surface nodes of the underlying grid.
    pub nodes: usize,
}

impl DenseOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn frobenius(&self) -> f64 {
        frobenius(&self.matrix)
    }

    /// Writes the matrix as little-endian complex64 pairs, row-major, after a
    /// 32-byte header: magic `STKOP1`, two padding bytes, the block size
    /// `dim / 3` as u64, and λ as two f64.
    pub fn write_dump(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(b"STKOP1\0\0")?;
        f.write_all(&((self.dim() / 3) as u64).to_le_bytes())?;
        f.write_all(&self.lambda.re.to_le_bytes())?;
        f.write_all(&self.lambda.im.to_le_bytes())?;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                let v = self.matrix[(i, j)];
                f.write_all(&(v.re as f32).to_le_bytes())?;
                f.write_all(&(v.im as f32).to_le_bytes())?;
            }
        }
        f.flush()?;
        Ok(())
    }
}

pub fn frobenius(m: &Mat<C64>) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += m[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

/// Values of the operator applied to a density at the grid nodes, one 3×3
/// upper-triangle block row per node.
#[derive(Clone, Debug)]
pub struct Collocation {
    re: Vec<Mat<f64>>,
    im: Vec<Mat<f64>>,
}

impl Collocation {
    /// `(Aφ)(x_t)` for every node `t`.
    pub fn apply(&self, coeffs: &[C64]) -> Vec<[C64; 3]> {
        let n = self.re[0].nrows();
        let nb = self.re[0].ncols();
        let mut out = vec![[C64::new(0.0, 0.0); 3]; n];
        for (c, &(i, j)) in UPPER.iter().enumerate() {
            for t in 0..n {
                let mut sij = C64::new(0.0, 0.0);
                let mut sji = C64::new(0.0, 0.0);
                for b in 0..nb {
                    let k = C64::new(self.re[c][(t, b)], self.im[c][(t, b)]);
                    sij += k * coeffs[j * nb + b];
                    if i != j {
                        sji += k * coeffs[i * nb + b];
                    }
                }
                out[t][i] += sij;
                if i != j {
                    out[t][j] += sji;
                }
            }
        }
        out
    }
}

/// One block of six target-by-harmonic matrices per expansion order.
type Blocks = (Vec<Mat<f64>>, Vec<Mat<f64>>);

/// Geometry, quadrature and cached pair data for one (surface, ρ, δ, p).
pub struct Discretization {
    pub surface: Surface,
    pub field: PerturbationField,
    pub delta: f64,
    pub delta0: f64,
    pub options: LayerOptions,
    pub grid: SphereGrid,
    /// Base nodes (δ = 0 geometry plus ρ data).
    pub nodes: Vec<PerturbedNode>,
    /// Galerkin test weights: solid-angle weight times base area element.
    pub test_weights: Vec<f64>,
    /// Harmonics at the grid nodes, `N × n_b`.
    pub basis: Mat<f64>,
    rule: PolarRule,
    ring_dirs: Vec<Vec<Vector3<f64>>>,
    /// Per target and polar point: separation `Ψ_δ(x) − Ψ_δ(y)` and weight.
    pairs: Vec<[f64; 4]>,
    deflation: Vec<f64>,
}

fn rot_z(phi: f64, v: &Vector3<f64>) -> Vector3<f64> {
    let (s, c) = phi.sin_cos();
    Vector3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
}

impl Discretization {
    pub fn new(surface: Surface, field: PerturbationField, delta: f64, options: LayerOptions) -> Result<Self> {
        surface.validate()?;
        field.validate()?;
        if options.degree < 2 {
            return Err(Error::InvalidInput("harmonic degree must be at least 2".into()));
        }
        let p = options.degree;
        let grid = SphereGrid::new(p);
        let nodes: Vec<PerturbedNode> = grid.dirs.iter().map(|s| PerturbedNode::new(&surface, &field, s)).collect();
        let delta0 = injectivity_budget(&nodes);
        if delta.abs() >= delta0 {
            return Err(Error::DeltaOutOfRange { delta, delta0 });
        }
        let test_weights: Vec<f64> = nodes.iter().zip(&grid.weights).map(|(n, w)| w * n.point.area).collect();
        let basis = harmonics::matrix(p, &grid.dirs);
        let m = p + 1 + options.polar_extra();
        let rule = PolarRule::new(m, 2 * m);
        let ring_dirs: Vec<Vec<Vector3<f64>>> = grid
            .ring_z
            .iter()
            .map(|&z| {
                let st = (1.0 - z * z).max(0.0).sqrt();
                rule.dirs.iter().map(|d| Vector3::new(z * d.x + st * d.z, d.y, -st * d.x + z * d.z)).collect()
            })
            .collect();
        let nb = harmonics::basis_len(p);
        let mut deflation = vec![0.0; 3 * nb];
        for (t, node) in nodes.iter().enumerate() {
            for j in 0..3 {
                let f = test_weights[t] * node.point.normal[j];
                for b in 0..nb {
                    deflation[j * nb + b] += f * basis[(t, b)];
                }
            }
        }
        let mut disc = Self {
            surface,
            field,
            delta,
            delta0,
            options,
            grid,
            nodes,
            test_weights,
            basis,
            rule,
            ring_dirs,
            pairs: Vec::new(),
            deflation,
        };
        disc.pairs = disc.pair_cache();
        Ok(disc)
    }

    pub fn degree(&self) -> usize {
        self.options.degree
    }

    pub fn node_count(&self) -> usize {
        self.grid.len()
    }

    pub fn basis_len(&self) -> usize {
        harmonics::basis_len(self.options.degree)
    }

    /// Number of unknowns, `3 n_b`.
    pub fn dim(&self) -> usize {
        3 * self.basis_len()
    }

    pub fn polar_len(&self) -> usize {
        self.rule.len()
    }

    /// Direction of polar point `q` around target `t`.
    fn polar_dir(&self, t: usize, q: usize) -> Vector3<f64> {
        let ring = t / self.grid.n_phi;
        let k = t % self.grid.n_phi;
        rot_z(self.grid.phis[k], &self.ring_dirs[ring][q])
    }

    fn pair_cache(&self) -> Vec<[f64; 4]> {
        let nq = self.rule.len();
        let delta = self.delta;
        let kind = self.options.jacobian;
        (0..self.nodes.len())
            .into_par_iter()
            .flat_map_iter(|t| {
                let x = self.nodes[t].psi(delta);
                (0..nq).map(move |q| {
                    let dir = self.polar_dir(t, q);
                    let wq = self.rule.weights[q];
                    if delta == 0.0 {
                        let pt = self.surface.point(&dir);
                        let r = x - pt.x;
                        [r.x, r.y, r.z, wq * pt.area]
                    } else {
                        let y = PerturbedNode::new(&self.surface, &self.field, &dir);
                        let r = x - y.psi(delta);
                        [r.x, r.y, r.z, wq * y.point.area * y.surface_element(kind, delta)]
                    }
                })
            })
            .collect()
    }

    /// Target-by-harmonic collocation blocks for `K` kernels evaluated by `kernel(t, q, dir, w)`.
    fn collocate<const K: usize, F>(&self, kernel: F) -> Result<Vec<Blocks>>
    where
        F: Fn(usize, usize, &Vector3<f64>, f64) -> Result<[[C64; 6]; K]> + Sync,
    {
        let p = self.options.degree;
        let nb = harmonics::basis_len(p);
        let nphi = self.grid.n_phi;
        let nq = self.rule.len();
        let orders = harmonics::orders(p);
        let rings: Vec<Vec<Blocks>> = (0..self.grid.n_theta)
            .into_par_iter()
            .map(|ring| -> Result<Vec<Blocks>> {
                let ybase = harmonics::matrix(p, &self.ring_dirs[ring]);
                let mut gre: Vec<Mat<f64>> = (0..K).map(|_| Mat::zeros(6 * nphi, nq)).collect();
                let mut gim: Vec<Mat<f64>> = (0..K).map(|_| Mat::zeros(6 * nphi, nq)).collect();
                for k in 0..nphi {
                    let t = ring * nphi + k;
                    for q in 0..nq {
                        let dir = rot_z(self.grid.phis[k], &self.ring_dirs[ring][q]);
                        let vals = kernel(t, q, &dir, self.rule.weights[q])?;
                        for (o, v) in vals.iter().enumerate() {
                            for c in 0..6 {
                                gre[o][(6 * k + c, q)] = v[c].re;
                                gim[o][(6 * k + c, q)] = v[c].im;
                            }
                        }
                    }
                }
                let mut out = Vec::with_capacity(K);
                for o in 0..K {
                    let pre = &gre[o] * &ybase;
                    let pim = &gim[o] * &ybase;
                    let mut re: Vec<Mat<f64>> = (0..6).map(|_| Mat::zeros(nphi, nb)).collect();
                    let mut im: Vec<Mat<f64>> = (0..6).map(|_| Mat::zeros(nphi, nb)).collect();
                    for k in 0..nphi {
                        let alpha = self.grid.phis[k];
                        for c in 0..6 {
                            let row = 6 * k + c;
                            for (b, &m) in orders.iter().enumerate() {
                                let (vr, vi) = if m == 0 {
                                    (pre[(row, b)], pim[(row, b)])
                                } else {
                                    let (s, co) = ((m.unsigned_abs() as f64) * alpha).sin_cos();
                                    let partner = (b as i64 - 2 * m) as usize;
                                    if m > 0 {
                                        (co * pre[(row, b)] - s * pre[(row, partner)], co * pim[(row, b)] - s * pim[(row, partner)])
                                    } else {
                                        (co * pre[(row, b)] + s * pre[(row, partner)], co * pim[(row, b)] + s * pim[(row, partner)])
                                    }
                                };
                                re[c][(k, b)] = vr;
                                im[c][(k, b)] = vi;
                            }
                        }
                    }
                    out.push((re, im));
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
        let n = self.nodes.len();
        let mut blocks: Vec<Blocks> = (0..K)
            .map(|_| ((0..6).map(|_| Mat::zeros(n, nb)).collect(), (0..6).map(|_| Mat::zeros(n, nb)).collect()))
            .collect();
        for (ring, per) in rings.into_iter().enumerate() {
            for (o, (re, im)) in per.into_iter().enumerate() {
                for c in 0..6 {
                    for k in 0..nphi {
                        for b in 0..nb {
                            blocks[o].0[c][(ring * nphi + k, b)] = re[c][(k, b)];
                            blocks[o].1[c][(ring * nphi + k, b)] = im[c][(k, b)];
                        }
                    }
                }
            }
        }
        Ok(blocks)
    }

    /// Galerkin projection of collocation blocks onto the test harmonics.
    fn project(&self, blocks: &Blocks) -> Mat<C64> {
        let nb = self.basis_len();
        let n = self.nodes.len();
        let yw = Mat::<f64>::from_fn(nb, n, |b, t| self.basis[(t, b)] * self.test_weights[t]);
        let mut out = Mat::<C64>::zeros(3 * nb, 3 * nb);
        for (c, &(i, j)) in UPPER.iter().enumerate() {
            let re = &yw * &blocks.0[c];
            let im = &yw * &blocks.1[c];
            for a in 0..nb {
                for b in 0..nb {
                    let v = C64::new(re[(a, b)], im[(a, b)]);
                    out[(i * nb + a, j * nb + b)] = v;
                    out[(j * nb + a, i * nb + b)] = v;
                }
            }
        }
        out
    }

    fn kappa(&self, lambda: C64) -> C64 {
        SpectralParam::new(lambda).kappa(self.options.rate)
    }

    fn direct_blocks(&self, lambda: C64) -> Result<Blocks> {
        let kappa = self.kappa(lambda);
        let nq = self.rule.len();
        let mut b = self.collocate::<1, _>(|t, q, _, _| {
            let e = &self.pairs[t * nq + q];
            let g = stokeslet_upper(kappa, &Vector3::new(e[0], e[1], e[2]))
                .map_err(|_| Error::SingularAssemblyFailure(format!("coincident quadrature point at node {t}")))?;
            Ok([g.map(|v| v * e[3])])
        })?;
        Ok(b.remove(0))
    }

    /// The single-layer operator `A_δ(λ)` at this discretization's δ.
    pub fn assemble(&self, lambda: C64) -> Result<DenseOperator> {
        let blocks = self.direct_blocks(lambda)?;
        Ok(self.tag(self.project(&blocks), lambda))
    }

    /// `A_δ(λ)` together with its values at the grid nodes.
    pub fn assemble_with_collocation(&self, lambda: C64) -> Result<(DenseOperator, Collocation)> {
        let blocks = self.direct_blocks(lambda)?;
        let m = self.project(&blocks);
        Ok((self.tag(m, lambda), Collocation { re: blocks.0, im: blocks.1 }))
    }

    fn tag(&self, matrix: Mat<C64>, lambda: C64) -> DenseOperator {
        DenseOperator { matrix, lambda, delta: self.delta, nodes: self.nodes.len() }
    }

    /// Rank-one term `(1/4π) u uᵀ` with `u` the Galerkin moments of the base
    /// normal. It removes the normal-density null vector that the single-layer
    /// operator has at every λ, and does not depend on λ or δ.
    pub fn deflation(&self) -> Mat<C64> {
        let d = &self.deflation;
        Mat::from_fn(d.len(), d.len(), |i, j| C64::new(d[i] * d[j] / (4.0 * PI), 0.0))
    }

    pub fn add_deflation(&self, m: &mut Mat<C64>) {
        let d = &self.deflation;
        for j in 0..d.len() {
            for i in 0..d.len() {
                m[(i, j)] += C64::new(d[i] * d[j] / (4.0 * PI), 0.0);
            }
        }
    }

    /// `A_δ(λ)` plus the deflation term: the matrix whose singular values
    /// locate eigenvalues.
    pub fn system(&self, lambda: C64) -> Result<Mat<C64>> {
        let mut m = self.assemble(lambda)?.matrix;
        self.add_deflation(&mut m);
        Ok(m)
    }

    /// Expansion operators `A^(0..=order)(λ)` of the base surface in δ.
    pub fn assemble_expansion(&self, lambda: C64, order: usize) -> Result<Vec<DenseOperator>> {
        if order > 2 {
            return Err(Error::OrderTooHigh { requested: order, max: 2 });
        }
        let kappa = self.kappa(lambda);
        let kind = self.options.jacobian;
        let zero_field = self.field.is_zero();
        let blocks = self.collocate::<3, _>(|t, _q, dir, wq| {
            let y = PerturbedNode::new(&self.surface, &self.field, dir);
            let x = &self.nodes[t];
            let w = wq * y.point.area;
            let mut out = [[C64::new(0.0, 0.0); 6]; 3];
            if zero_field {
                let g = stokeslet_upper(kappa, &(x.x() - y.x()))
                    .map_err(|_| Error::SingularAssemblyFailure(format!("coincident quadrature point at node {t}")))?;
                out[0] = g.map(|v| v * w);
                return Ok(out);
            }
            let pair = PairGeometry::<3>::new(x, &y, kind);
            let g = pair
                .gamma(kappa)
                .map_err(|_| Error::SingularAssemblyFailure(format!("coincident quadrature point at node {t}")))?;
            for (n, o) in out.iter_mut().enumerate() {
                for (c, &(i, j)) in UPPER.iter().enumerate() {
                    o[c] = g[i][j].c[n] * w;
                }
            }
            Ok(out)
        })?;
        Ok(blocks
            .iter()
            .take(order + 1)
            .map(|b| DenseOperator { matrix: self.project(b), lambda, delta: 0.0, nodes: self.nodes.len() })
            .collect())
    }

    /// Density values at arbitrary parameter directions.
    pub fn density_at(&self, coeffs: &[C64], dirs: &[Vector3<f64>]) -> Vec<[C64; 3]> {
        let p = self.options.degree;
        let nb = self.basis_len();
        let mut y = vec![0.0; nb];
        dirs.iter()
            .map(|s| {
                harmonics::eval_into(p, s, &mut y);
                let mut v = [C64::new(0.0, 0.0); 3];
                for (j, vj) in v.iter_mut().enumerate() {
                    for b in 0..nb {
                        *vj += coeffs[j * nb + b] * y[b];
                    }
                }
                v
            })
            .collect()
    }

    /// Galerkin coefficients of a density given at the grid nodes, in the
    /// solid-angle inner product.
    pub fn coefficients_of(&self, values: &[[C64; 3]]) -> Vec<C64> {
        let nb = self.basis_len();
        let mut out = vec![C64::new(0.0, 0.0); 3 * nb];
        for (t, v) in values.iter().enumerate() {
            let w = self.grid.weights[t];
            for j in 0..3 {
                for b in 0..nb {
                    out[j * nb + b] += v[j] * (w * self.basis[(t, b)]);
                }
            }
        }
        out
    }

    /// Deformed node positions `Ψ_δ(x_t)`.
    pub fn deformed_nodes(&self) -> Vec<Vector3<f64>> {
        self.nodes.iter().map(|n| n.psi(self.delta)).collect()
    }

    /// Same geometry with a different δ.
    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::new(self.surface.clone(), self.field.clone(), delta, self.options)
    }

    /// Same geometry and δ with a different degree.
    pub fn with_degree(&self, degree: usize) -> Result<Self> {
        let mut o = self.options;
        o.degree = degree;
        Self::new(self.surface.clone(), self.field.clone(), self.delta, o)
    }

    /// Largest spectral norm of `M = ∇(ρν)` over the nodes.
    pub fn max_m_norm(&self) -> f64 {
        self.nodes.iter().map(|n| n.m_norm()).fold(0.0, f64::max)
    }
}

/// Upper triangle of a symmetric matrix as stored in collocation blocks.
pub fn upper_of(m: &[[C64; 3]; 3]) -> [C64; 6] {
    UPPER.map(|(i, j)| m[i][j])
}
