//! Eigenvalues as real zeros of the smallest singular value of the deflated
//! single-layer system, null densities, and eigenpair reconstruction.

use crate::layer::{Discretization, LayerPotential};
use crate::{Error, Result, C64};
use faer::linalg::solvers::Solve;
use faer::Mat;
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Block size used by the smallest-singular-value iteration.
pub const DEFAULT_BLOCK: usize = 12;

/// Points of the pre-scan that checks a bracket before minimisation.
pub const BRACKET_SCAN_POINTS: usize = 9;

/// Smallest singular values with their right singular vectors.
#[derive(Clone, Debug)]
pub struct SmallSingular {
    /// Ascending.
    pub values: Vec<f64>,
    /// Right singular vectors as columns, matching `values`.
    pub vectors: Mat<C64>,
}

fn orthonormalize(x: &Mat<C64>) -> Mat<C64> {
    x.qr().compute_thin_Q()
}

/// The `block` smallest singular values of a square matrix by subspace
/// iteration on `(AᴴA)⁻¹` with an LU factorization.
pub fn smallest_singular(a: &Mat<C64>, block: usize) -> Result<SmallSingular> {
    let n = a.nrows();
    let b = block.min(n);
    let lu = a.partial_piv_lu();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x = Mat::<C64>::from_fn(n, b, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    x = orthonormalize(&x);
    let mut prev: Vec<f64> = Vec::new();
    for _ in 0..40 {
        let y = lu.solve(&x);
        if !y.col_iter().all(|c| c.iter().all(|v| v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::FactorizationFailure("non-finite solve result".into()));
        }
        let svd = y.thin_svd().map_err(|e| Error::FactorizationFailure(format!("{e:?}")))?;
        let s = svd.S().column_vector();
        let values: Vec<f64> = (0..b).map(|i| 1.0 / s[i].re).collect();
        let converged = prev.len() == b && values.iter().zip(&prev).all(|(v, p)| (v - p).abs() <= 1e-11 * p.abs().max(1e-300));
        if converged {
            return Ok(SmallSingular { values, vectors: svd.U().to_owned() });
        }
        prev = values;
        x = orthonormalize(&lu.solve_adjoint(&y));
    }
    let y = lu.solve(&x);
    let svd = y.thin_svd().map_err(|e| Error::FactorizationFailure(format!("{e:?}")))?;
    let s = svd.S().column_vector();
    Ok(SmallSingular { values: (0..b).map(|i| 1.0 / s[i].re).collect(), vectors: svd.U().to_owned() })
}

/// σ_min of the deflated system at real λ.
pub fn sigma_min(disc: &Discretization, lambda: f64) -> Result<f64> {
    let m = disc.system(C64::new(lambda, 0.0))?;
    Ok(smallest_singular(&m, 4)?.values[0])
}

/// One row of a σ_min scan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub lambda: f64,
    pub sigma_min: f64,
}

/// σ_min over a sorted grid of positive λ.
pub fn sigma_min_scan(disc: &Discretization, grid: &[f64]) -> Result<Vec<ScanPoint>> {
    if grid.iter().any(|l| !(*l > 0.0)) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("scan grid must be positive and strictly increasing".into()));
    }
    grid.par_iter()
        .map(|&lambda| Ok(ScanPoint { lambda, sigma_min: sigma_min(disc, lambda)? }))
        .collect()
}

/// Evenly spaced grid `lo, lo + step, …` up to `hi` inclusive.
pub fn lambda_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}

/// Indices of interior strict local minima of a scan.
pub fn dips(scan: &[ScanPoint]) -> Vec<usize> {
    (1..scan.len().saturating_sub(1))
        .filter(|&i| scan[i].sigma_min < scan[i - 1].sigma_min && scan[i].sigma_min < scan[i + 1].sigma_min)
        .collect()
}

/// Brent minimisation of `f` on `[a, b]` to absolute tolerance `tol` in x.
pub fn brent_minimize<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    const GOLD: f64 = 0.381_966_011_250_105_1;
    let (mut a, mut b) = (a.min(b), a.max(b));
    let mut x = a + GOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x)?;
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0_f64, 0.0_f64);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let tol1 = tol + 1e-12 * x.abs();
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            return Ok((x, fx));
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < m { b - x } else { a - x };
            d = GOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1 * d.signum() };
        let fu = f(u)?;
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Ok((x, fx))
}

/// A located eigenvalue with its null densities.
#[derive(Clone, Debug)]
pub struct EigenResult {
    pub lambda: f64,
    pub sigma_min: f64,
    /// Number of singular values below `10 σ_min`.
    pub multiplicity: usize,
    pub nodes: usize,
    pub delta: f64,
    /// Unit-norm null density (harmonic coefficients).
    pub phi: Vec<C64>,
    /// Smallest singular values at λ*, ascending.
    pub singular_values: Vec<f64>,
    /// Orthonormal basis of the numerical null space (`multiplicity` vectors).
    pub null_space: Vec<Vec<C64>>,
}

/// Serializable summary of an [`EigenResult`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenSummary {
    pub lambda: f64,
    pub sigma_min: f64,
    pub multiplicity: usize,
    #[serde(rename = "N")]
    pub nodes: usize,
    pub delta: f64,
    pub phi_file: Option<String>,
}

impl EigenResult {
    pub fn summary(&self, phi_file: Option<String>) -> EigenSummary {
        EigenSummary {
            lambda: self.lambda,
            sigma_min: self.sigma_min,
            multiplicity: self.multiplicity,
            nodes: self.nodes,
            delta: self.delta,
            phi_file,
        }
    }
}

/// Null data at a given λ.
pub fn null_data(disc: &Discretization, lambda: f64) -> Result<EigenResult> {
    let m = disc.system(C64::new(lambda, 0.0))?;
    let ss = smallest_singular(&m, DEFAULT_BLOCK)?;
    let smin = ss.values[0];
    let multiplicity = ss.values.iter().filter(|&&s| s < 10.0 * smin).count();
    let col = |k: usize| (0..ss.vectors.nrows()).map(|i| ss.vectors[(i, k)]).collect::<Vec<C64>>();
    Ok(EigenResult {
        lambda,
        sigma_min: smin,
        multiplicity,
        nodes: disc.node_count(),
        delta: disc.delta,
        phi: col(0),
        singular_values: ss.values.clone(),
        null_space: (0..multiplicity).map(col).collect(),
    })
}

/// Minimises σ_min on `(lo, hi)` around a dip at scan index `i`.
fn refine(disc: &Discretization, lo: f64, hi: f64, tol: f64) -> Result<EigenResult> {
    let (lambda, _) = brent_minimize(
        |l| {
            let s = sigma_min(disc, l)?;
            Ok(s * s)
        },
        lo,
        hi,
        tol,
    )?;
    null_data(disc, lambda)
}

/// Locates the single eigenvalue inside `bracket` to tolerance 1e-8.
pub fn find_eigen(disc: &Discretization, bracket: (f64, f64)) -> Result<EigenResult> {
    find_eigen_tol(disc, bracket, 1e-8)
}

pub fn find_eigen_tol(disc: &Discretization, bracket: (f64, f64), tol: f64) -> Result<EigenResult> {
    let (lo, hi) = bracket;
    if !(hi > lo && lo > 0.0) {
        return Err(Error::InvalidInput(format!("invalid bracket ({lo}, {hi})")));
    }
    let step = (hi - lo) / (BRACKET_SCAN_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..BRACKET_SCAN_POINTS).map(|i| lo + step * i as f64).collect();
    let scan = sigma_min_scan(disc, &grid)?;
    let d = dips(&scan);
    match d.len() {
        0 => Err(Error::NoDipInBracket { lo, hi }),
        1 => refine(disc, grid[d[0] - 1], grid[d[0] + 1], tol),
        count => Err(Error::MultipleDips { lo, hi, count }),
    }
}

/// All eigenvalues in a window, found from a scan with `points` samples.
#[derive(Clone, Debug)]
pub struct Cluster {
    pub members: Vec<EigenResult>,
}

impl Cluster {
    /// Total multiplicity.
    pub fn multiplicity(&self) -> usize {
        self.members.iter().map(|m| m.multiplicity).sum()
    }

    /// Multiplicity-weighted sum of eigenvalues.
    pub fn sum(&self) -> f64 {
        self.members.iter().map(|m| m.lambda * m.multiplicity as f64).sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.multiplicity() as f64
    }
}

/// Locates every dip in `window` using a scan of `points` samples.
pub fn find_cluster(disc: &Discretization, window: (f64, f64), points: usize, tol: f64) -> Result<Cluster> {
    let (lo, hi) = window;
    let points = points.max(3);
    let step = (hi - lo) / (points - 1) as f64;
    let grid: Vec<f64> = (0..points).map(|i| lo + step * i as f64).collect();
    let scan = sigma_min_scan(disc, &grid)?;
    let d = dips(&scan);
    if d.is_empty() {
        return Err(Error::NoDipInBracket { lo, hi });
    }
    let members = d
        .iter()
        .map(|&i| refine(disc, grid[i - 1], grid[i + 1], tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(Cluster { members })
}

/// Step of the central λ-difference used by the linearised problems.
const LINEAR_STEP: f64 = 1e-4;

/// The `count` values of `θ` closest to zero for which
/// `A(μ) + θ ∂_λA(μ)` is singular, from subspace iteration on `A⁻¹∂_λA`.
pub fn linearized_shifts(disc: &Discretization, mu: f64, count: usize) -> Result<Vec<C64>> {
    let a = disc.system(C64::new(mu, 0.0))?;
    let ap = disc.system(C64::new(mu + LINEAR_STEP, 0.0))?;
    let am = disc.system(C64::new(mu - LINEAR_STEP, 0.0))?;
    let n = a.nrows();
    let d = Mat::<C64>::from_fn(n, n, |i, j| (ap[(i, j)] - am[(i, j)]) / (2.0 * LINEAR_STEP));
    let lu = a.partial_piv_lu();
    let b = (count + 4).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(0x11ea7);
    let mut q = orthonormalize(&Mat::<C64>::from_fn(n, b, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)));
    for _ in 0..6 {
        q = orthonormalize(&lu.solve(&(&d * &q)));
    }
    let tq = lu.solve(&(&d * &q));
    let h = q.adjoint() * &tq;
    let nu = h.eigenvalues().map_err(|e| Error::FactorizationFailure(format!("{e:?}")))?;
    let mut theta: Vec<C64> = nu.iter().filter(|v| v.norm() > 0.0).map(|v| -1.0 / v).collect();
    if theta.iter().any(|t| !t.re.is_finite() || !t.im.is_finite()) {
        return Err(Error::FactorizationFailure("non-finite linearised shift".into()));
    }
    theta.sort_by(|x, y| x.norm().total_cmp(&y.norm()));
    theta.truncate(count);
    Ok(theta)
}

/// The `count` eigenvalues nearest `center`, each converged by successive
/// linear problems. Resolves branches of a split cluster however close.
pub fn refine_cluster(disc: &Discretization, center: f64, count: usize) -> Result<Vec<f64>> {
    let starts = linearized_shifts(disc, center, count)?;
    let mut out = Vec::with_capacity(count);
    for s in starts {
        let mut mu = center + s.re;
        for _ in 0..10 {
            let t = linearized_shifts(disc, mu, 1)?[0];
            mu += t.re;
            if t.norm() < 1e-12 * mu.abs() {
                break;
            }
        }
        out.push(mu);
    }
    out.sort_by(|x, y| x.total_cmp(y));
    Ok(out)
}

/// Reference value and error bound from a sequence of mesh-refined values:
/// the finest value and its distance to the previous one.
pub fn mesh_extrapolate(values: &[f64]) -> Result<(f64, f64)> {
    match values {
        [] => Err(Error::InvalidInput("no mesh values".into())),
        [v] => Ok((*v, f64::INFINITY)),
        _ => {
            let n = values.len();
            Ok((values[n - 1], (values[n - 1] - values[n - 2]).abs()))
        }
    }
}

/// Velocity and pressure of a reconstructed eigenpair at probe points.
#[derive(Clone, Debug)]
pub struct Eigenpair {
    pub lambda: f64,
    pub potential: LayerPotential,
    /// Scale applied to the density so that `∫|v|² ≈ 1` over the domain.
    pub scale: f64,
    pub velocity: Vec<[C64; 3]>,
    pub pressure: Vec<C64>,
}

/// Points of the cell-centred `n³` Cartesian grid over the bounding box of
/// the deformed nodes that lie at least `margin` inside, with cell volume.
pub fn interior_grid(disc: &Discretization, n: usize, pot: &LayerPotential) -> (Vec<Vector3<f64>>, f64) {
    let pts = disc.deformed_nodes();
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for p in &pts {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let h = (hi - lo) / n as f64;
    let vol = h.x * h.y * h.z;
    let deformed = crate::geometry::DeformedSurface {
        base: disc.surface.clone(),
        field: disc.field.clone(),
        delta: disc.delta,
        delta0: disc.delta0,
    };
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let x = lo + Vector3::new((i as f64 + 0.5) * h.x, (j as f64 + 0.5) * h.y, (k as f64 + 0.5) * h.z);
                if deformed.radial_gap(&x) > 0.0 && pot.node_distance(&x) > 2.0 * pot.spacing {
                    out.push(x);
                }
            }
        }
    }
    (out, vol)
}

/// Reconstructs `v = S(λ*)φ` and `p = Qφ` at `probes`, normalised by a 10³
/// interior grid estimate of `∫|v|²`.
pub fn reconstruct_eigenpair(disc: &Discretization, result: &EigenResult, probes: &[Vector3<f64>]) -> Result<Eigenpair> {
    let lambda = C64::new(result.lambda, 0.0);
    let pot = LayerPotential::new(disc, &result.phi, LayerPotential::default_degree(disc.degree()));
    let (grid, vol) = interior_grid(disc, 10, &pot);
    let norm2: f64 = grid
        .par_iter()
        .map(|x| pot.velocity(lambda, x).map(|v| v.iter().map(|c| c.norm_sqr()).sum::<f64>()))
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum::<f64>()
        * vol;
    let scale = 1.0 / norm2.sqrt();
    let velocity = probes
        .iter()
        .map(|x| pot.velocity(lambda, x).map(|v| v.map(|c| c * scale)))
        .collect::<Result<Vec<_>>>()?;
    let pressure = probes.iter().map(|x| pot.pressure(x).map(|p| p * scale)).collect::<Result<Vec<_>>>()?;
    Ok(Eigenpair { lambda: result.lambda, potential: pot, scale, velocity, pressure })
}

/// Largest boundary trace of the single layer at the grid nodes relative to
/// the largest interior velocity at half-radius sample points.
pub fn boundary_trace_residual(disc: &Discretization, lambda: f64, coeffs: &[C64]) -> Result<f64> {
    let l = C64::new(lambda, 0.0);
    let (_, col) = disc.assemble_with_collocation(l)?;
    let trace = col.apply(coeffs);
    let tmax = trace.iter().map(|v| v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()).fold(0.0, f64::max);
    let pot = LayerPotential::new(disc, coeffs, LayerPotential::default_degree(disc.degree()));
    let samples = crate::geometry::SphereGrid::new(4);
    let mut vmax = 0.0_f64;
    for s in &samples.dirs {
        let node = crate::geometry::PerturbedNode::new(&disc.surface, &disc.field, s);
        let x = node.psi(disc.delta) * 0.5;
        let v = pot.velocity(l, &x)?;
        vmax = vmax.max(v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt());
    }
    Ok(tmax / vmax)
}

/// A deterministic sample of interior probe points at radii in
/// `[0.2, 0.6]` of the base surface.
pub fn probe_points(disc: &Discretization, count: usize, seed: u64) -> Vec<Vector3<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let z: f64 = rng.random_range(-1.0..1.0);
            let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let r: f64 = rng.random_range(0.2..0.6);
            let s = Vector3::new((1.0 - z * z).sqrt() * phi.cos(), (1.0 - z * z).sqrt() * phi.sin(), z);
            s * (disc.surface.radial(&s) * r)
        })
        .collect()
}
