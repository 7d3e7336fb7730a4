//! Contour-integral perturbation theory for eigenvalue clusters, and
//! δ-corrections of eigenfunctions and eigenpressures.
//!
//! All trace quantities are cluster sums. Reported coefficients are cluster
//! means, i.e. divided by the winding number `a₀`.

use crate::geometry::{gauss_legendre, SphereGrid};
use crate::layer::{DenseOperator, Discretization, LayerPotential};
use crate::oracles::{fit_order, richardson_first, SlopeFit};
use crate::spectral::{find_eigen, smallest_singular, EigenResult};
use crate::{Error, Result, C64};
use faer::linalg::solvers::Solve;
use faer::Mat;
use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Default number of contour quadrature points.
pub const CONTOUR_POINTS: usize = 32;

/// Circle `|λ − center| = radius` with an `points`-node trapezoidal rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub center: f64,
    pub radius: f64,
    pub points: usize,
}

impl Contour {
    pub fn new(center: f64, radius: f64, points: usize) -> Result<Self> {
        if !(radius > 0.0 && center.is_finite()) || points < 4 {
            return Err(Error::InvalidInput(format!("invalid contour: center {center}, radius {radius}, {points} points")));
        }
        Ok(Self { center, radius, points })
    }

    /// Radius from the neighbouring σ_min dips: half the gap to the nearest
    /// other dip, capped at 2.
    pub fn radius_from_dips(center: f64, dips: &[f64]) -> f64 {
        let gap = dips
            .iter()
            .map(|d| (d - center).abs())
            .filter(|g| *g > 1e-6 * center.abs().max(1.0))
            .fold(f64::INFINITY, f64::min);
        (0.5 * gap).min(2.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { radius: self.radius * factor, ..*self }
    }

    /// Nodes `λ_k` and weights `w_k` with `(1/2πi)∮ f dλ ≈ Σ w_k f(λ_k)`.
    pub fn nodes(&self) -> Vec<(C64, C64)> {
        (0..self.points)
            .map(|k| {
                let t = TAU * k as f64 / self.points as f64;
                let e = C64::from_polar(1.0, t);
                (C64::new(self.center, 0.0) + e * self.radius, e * (self.radius / self.points as f64))
            })
            .collect()
    }

    /// Central-difference step for λ-derivatives.
    pub fn derivative_step(&self) -> f64 {
        self.radius / 100.0
    }
}

fn trace(m: &Mat<C64>) -> C64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

/// `tr(AB)` without forming the product.
fn trace_product(a: &Mat<C64>, b: &Mat<C64>) -> C64 {
    let n = a.nrows();
    let mut s = C64::new(0.0, 0.0);
    for j in 0..n {
        for i in 0..n {
            s += a[(i, j)] * b[(j, i)];
        }
    }
    s
}

/// Fourth-order central difference from samples at `λ ± h`, `λ ± 2h`.
fn difference(p1: &Mat<C64>, m1: &Mat<C64>, p2: &Mat<C64>, m2: &Mat<C64>, h: f64) -> Mat<C64> {
    Mat::from_fn(p1.nrows(), p1.ncols(), |i, j| {
        (8.0 * (p1[(i, j)] - m1[(i, j)]) - (p2[(i, j)] - m2[(i, j)])) / (12.0 * h)
    })
}

/// Rejects contours that pass within reach of an eigenvalue: any σ_min below
/// a tenth of the median along the circle.
fn check_contour(contour: &Contour, sigmas: &[f64]) -> Result<()> {
    let mut sorted = sigmas.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let median = sorted[sorted.len() / 2];
    let threshold = 0.1 * median;
    for (&s, (l, _)) in sigmas.iter().zip(contour.nodes()) {
        if s < threshold {
            return Err(Error::ContourThroughEigenvalue { lambda: format!("{l}"), sigma: s, threshold });
        }
    }
    Ok(())
}

/// Zeroth and first moments of `tr[A⁻¹ ∂_λA]` on a contour.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourMoments {
    /// `(1/2πi)∮ tr[A⁻¹∂A]`: number of enclosed eigenvalues.
    pub a0: C64,
    /// `(1/2πi)∮ (λ − λ₀) tr[A⁻¹∂A]`: sum of enclosed shifts `λ_i − λ₀`.
    pub a1: C64,
}

/// Moments of the deflated system of `disc` on `contour`.
pub fn contour_moments(disc: &Discretization, contour: &Contour) -> Result<ContourMoments> {
    let h = contour.derivative_step();
    let center = C64::new(contour.center, 0.0);
    let per_point: Vec<(C64, C64, f64)> = contour
        .nodes()
        .par_iter()
        .map(|&(l, w)| {
            let a = disc.system(l)?;
            let d = difference(&disc.system(l + h)?, &disc.system(l - h)?, &disc.system(l + 2.0 * h)?, &disc.system(l - 2.0 * h)?, h);
            let sigma = smallest_singular(&a, 2)?.values[0];
            let y = a.partial_piv_lu().solve(&d);
            let t = trace(&y);
            if !t.re.is_finite() || !t.im.is_finite() {
                return Err(Error::FactorizationFailure(format!("non-finite trace at λ = {l}")));
            }
            Ok((w * t, w * (l - center) * t, sigma))
        })
        .collect::<Result<Vec<_>>>()?;
    let sigmas: Vec<f64> = per_point.iter().map(|p| p.2).collect();
    check_contour(contour, &sigmas)?;
    let mut m = ContourMoments { a0: C64::new(0.0, 0.0), a1: C64::new(0.0, 0.0) };
    for (a0, a1, _) in per_point {
        m.a0 += a0;
        m.a1 += a1;
    }
    Ok(m)
}

/// Sum of enclosed eigenvalue shifts `Σ(λ_i(δ) − λ₀)`.
pub fn contour_shift(disc: &Discretization, contour: &Contour) -> Result<C64> {
    Ok(contour_moments(disc, contour)?.a1)
}

/// Rounds `a₀` to the number of enclosed eigenvalues.
pub fn winding_from(a0: C64) -> Result<usize> {
    let r = a0.re.round();
    if (a0 - r).norm() > 0.05 || r < 0.0 {
        return Err(Error::NonIntegerWinding { value: a0.re });
    }
    Ok(r as usize)
}

/// Number of eigenvalues, with multiplicity, inside `contour`.
pub fn winding_multiplicity(disc: &Discretization, contour: &Contour) -> Result<usize> {
    winding_from(contour_moments(disc, contour)?.a0)
}

/// Cluster-mean series coefficients from expansion operators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaSeries {
    /// Cluster mean at δ = 0.
    pub lambda0: f64,
    pub multiplicity: usize,
    pub a0: C64,
    /// `−(1/2πi)∮ tr[A₀⁻¹A₁] / a₀`.
    pub lambda1: f64,
    /// `−(1/2πi)∮ tr[A₀⁻¹A₂ − ½(A₀⁻¹A₁)²] / a₀`.
    pub lambda2: f64,
    /// Imaginary parts of the two coefficients (quadrature noise).
    pub imag: [f64; 2],
    /// The same coefficients in the unintegrated form with `(λ − λ₀)` weight
    /// and λ-derivatives of every expansion operator.
    pub derivative_form: [f64; 2],
    /// The single-term first-order and three-term second-order trace forms
    /// with corrected signs, lacking the `∂_λA₁` and `∂_λA₂` pairings.
    pub reduced_form: [f64; 2],
}

/// Trace data at one contour node.
struct ExpansionTraces {
    x1: C64,
    x2: C64,
    x1x1: C64,
    y0: C64,
    y1: C64,
    y2: C64,
    x1y0: C64,
    x1y1: C64,
    x2y0: C64,
    x1x1y0: C64,
}

fn expansion_traces(disc: &Discretization, lambda: C64, h: f64) -> Result<ExpansionTraces> {
    let with_deflation = |mut ops: Vec<DenseOperator>| {
        disc.add_deflation(&mut ops[0].matrix);
        ops.into_iter().map(|o| o.matrix).collect::<Vec<_>>()
    };
    let a = with_deflation(disc.assemble_expansion(lambda, 2)?);
    let shifted = [h, -h, 2.0 * h, -2.0 * h]
        .iter()
        .map(|&s| disc.assemble_expansion(lambda + s, 2).map(with_deflation))
        .collect::<Result<Vec<_>>>()?;
    let lu = a[0].partial_piv_lu();
    let x1 = lu.solve(&a[1]);
    let x2 = lu.solve(&a[2]);
    let y: Vec<Mat<C64>> = (0..3)
        .map(|j| lu.solve(&difference(&shifted[0][j], &shifted[1][j], &shifted[2][j], &shifted[3][j], h)))
        .collect();
    let x1x1 = &x1 * &x1;
    Ok(ExpansionTraces {
        x1: trace(&x1),
        x2: trace(&x2),
        x1x1: trace(&x1x1),
        y0: trace(&y[0]),
        y1: trace(&y[1]),
        y2: trace(&y[2]),
        x1y0: trace_product(&x1, &y[0]),
        x1y1: trace_product(&x1, &y[1]),
        x2y0: trace_product(&x2, &y[0]),
        x1x1y0: trace_product(&x1x1, &y[0]),
    })
}

/// `λ₁` and `λ₂` of the cluster inside `contour` for the perturbation
/// field of `disc` (whose own δ is ignored).
pub fn lambda_series(disc: &Discretization, contour: &Contour) -> Result<LambdaSeries> {
    let h = contour.derivative_step();
    let center = C64::new(contour.center, 0.0);
    let nodes = contour.nodes();
    let sigmas: Vec<f64> = nodes
        .par_iter()
        .map(|&(l, _)| Ok(smallest_singular(&disc.system(l)?, 2)?.values[0]))
        .collect::<Result<Vec<_>>>()?;
    check_contour(contour, &sigmas)?;
    let traces = nodes
        .par_iter()
        .map(|&(l, _)| expansion_traces(disc, l, h))
        .collect::<Result<Vec<_>>>()?;
    let zero = C64::new(0.0, 0.0);
    let (mut a0, mut a1) = (zero, zero);
    let (mut g1, mut g2) = (zero, zero);
    let (mut d1, mut d2) = (zero, zero);
    let (mut r1, mut r2) = (zero, zero);
    for (&(l, w), t) in nodes.iter().zip(&traces) {
        let s = l - center;
        a0 += w * t.y0;
        a1 += w * s * t.y0;
        g1 -= w * t.x1;
        g2 -= w * (t.x2 - 0.5 * t.x1x1);
        d1 += w * s * (t.y1 - t.x1y0);
        d2 += w * s * (t.y2 - t.x1y1 - t.x2y0 + t.x1x1y0);
        r1 -= w * s * t.x1y0;
        r2 += w * s * (-t.x1y1 - t.x2y0 + t.x1x1y0);
    }
    let m = winding_from(a0)?;
    if m == 0 {
        return Err(Error::InvalidInput("contour encloses no eigenvalue".into()));
    }
    let (g1, g2) = (g1 / a0, g2 / a0);
    Ok(LambdaSeries {
        lambda0: contour.center + (a1 / a0).re,
        multiplicity: m,
        a0,
        lambda1: g1.re,
        lambda2: g2.re,
        imag: [g1.im, g2.im],
        derivative_form: [(d1 / a0).re, (d2 / a0).re],
        reduced_form: [(r1 / a0).re, (r2 / a0).re],
    })
}

/// Quadrature on the ball `|x| ≤ radius` used for field inner products.
#[derive(Clone, Debug)]
pub struct BallQuadrature {
    pub radius: f64,
    pub points: Vec<Vector3<f64>>,
    pub weights: Vec<f64>,
}

impl BallQuadrature {
    pub fn new(radius: f64, radial: usize, angular_degree: usize) -> Self {
        let (r, wr) = gauss_legendre(radial);
        let sphere = SphereGrid::new(angular_degree);
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (ri, wi) in r.iter().zip(&wr) {
            let rad = 0.5 * radius * (ri + 1.0);
            let w = 0.5 * radius * wi * rad * rad;
            for (s, ws) in sphere.dirs.iter().zip(&sphere.weights) {
                points.push(s * rad);
                weights.push(w * ws);
            }
        }
        Self { radius, points, weights }
    }

    /// `⟨u, w⟩ = ∫ ū·w`.
    pub fn inner(&self, u: &[[C64; 3]], w: &[[C64; 3]]) -> C64 {
        self.weights
            .iter()
            .zip(u.iter().zip(w))
            .map(|(q, (a, b))| (a[0].conj() * b[0] + a[1].conj() * b[1] + a[2].conj() * b[2]) * *q)
            .sum()
    }
}

/// Options shared by the eigenfunction and eigenpressure corrections.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldOptions {
    /// δ-step of the Richardson difference.
    pub step: f64,
    /// Half-width of the bracket used to track the branch.
    pub half_width: f64,
    /// Reference ball radius as a fraction of the base inner radius.
    pub ball_fraction: f64,
    /// δ values of the order diagnostic; empty to skip it.
    pub order_deltas: [f64; 4],
    pub check_order: bool,
}

impl Default for FieldOptions {
    fn default() -> Self {
        Self { step: 1e-3, half_width: 1.0, ball_fraction: 0.5, order_deltas: [0.02, 0.01, 0.005, 0.0025], check_order: true }
    }
}

/// Eigenfunction at one δ in the common gauge.
#[derive(Clone, Debug)]
pub struct GaugedState {
    pub delta: f64,
    pub lambda: f64,
    pub multiplicity: usize,
    /// Potential of the aligned, normalised density.
    pub potential: LayerPotential,
    /// `|⟨v₀, v⟩|` on the reference ball.
    pub overlap: f64,
}

impl GaugedState {
    pub fn velocity(&self, x: &Vector3<f64>) -> Result<[C64; 3]> {
        self.potential.velocity(C64::new(self.lambda, 0.0), x)
    }

    pub fn pressure(&self, x: &Vector3<f64>) -> Result<C64> {
        self.potential.pressure(x)
    }
}

/// Gauge-fixed eigenfunction branch and its first δ-correction at probes.
#[derive(Clone, Debug)]
pub struct EigenfunctionCorrection {
    pub probes: Vec<Vector3<f64>>,
    pub step: f64,
    /// States at `0, h, −h, 2h, −2h`.
    pub states: Vec<GaugedState>,
    /// Branch derivative `dλ/dδ` at 0.
    pub lambda1: f64,
    pub v0: Vec<[C64; 3]>,
    pub v1: Vec<[C64; 3]>,
    /// Slope of `max|v(δ) − v₀ − δv₁| / max|v₀|` over the order deltas.
    pub order: Option<SlopeFit>,
    pub order_residuals: Vec<(f64, f64)>,
}

fn vec_norm(v: &[C64; 3]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn combine(coeffs: &[Vec<C64>], c: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); coeffs[0].len()];
    for (v, ck) in coeffs.iter().zip(c) {
        for (o, x) in out.iter_mut().zip(v) {
            *o += x * ck;
        }
    }
    out
}

struct Gauge<'a> {
    ball: &'a BallQuadrature,
    reference: Option<Vec<[C64; 3]>>,
}

impl Gauge<'_> {
    fn fields(&self, pot: &LayerPotential, lambda: f64) -> Result<Vec<[C64; 3]>> {
        let l = C64::new(lambda, 0.0);
        self.ball.points.par_iter().map(|x| pot.velocity(l, x)).collect()
    }

    /// Aligns the null space of `result` with the reference field.
    fn align(&mut self, disc: &Discretization, result: &EigenResult) -> Result<GaugedState> {
        let degree = LayerPotential::default_degree(disc.degree());
        let basis: Vec<Vec<C64>> = if self.reference.is_none() { vec![result.phi.clone()] } else { result.null_space.clone() };
        let fields = basis
            .iter()
            .map(|phi| self.fields(&LayerPotential::new(disc, phi, degree), result.lambda))
            .collect::<Result<Vec<_>>>()?;
        let m = fields.len();
        let (coeffs, overlap) = match &self.reference {
            None => {
                let f = &fields[0];
                let norm = self.ball.inner(f, f).re.sqrt();
                let peak = f.iter().flat_map(|v| v.iter()).max_by(|a, b| a.norm().total_cmp(&b.norm())).copied().unwrap();
                let phase = peak.conj() / peak.norm();
                (vec![phase / norm], 1.0)
            }
            Some(v0) => {
                let g = Mat::<C64>::from_fn(m, m, |k, l| self.ball.inner(&fields[k], &fields[l]));
                let b = Mat::<C64>::from_fn(m, 1, |k, _| self.ball.inner(&fields[k], v0));
                let c = g.partial_piv_lu().solve(&b);
                let mut c: Vec<C64> = (0..m).map(|k| c[(k, 0)]).collect();
                let mut v = vec![[C64::new(0.0, 0.0); 3]; self.ball.points.len()];
                for (f, ck) in fields.iter().zip(&c) {
                    for (o, x) in v.iter_mut().zip(f) {
                        for j in 0..3 {
                            o[j] += x[j] * ck;
                        }
                    }
                }
                let norm = self.ball.inner(&v, &v).re.sqrt();
                let ov = self.ball.inner(v0, &v) / norm;
                if !(ov.norm() >= 0.5) {
                    return Err(Error::GaugeAlignmentFailure(format!(
                        "overlap {:.3} with the reference eigenfunction at δ = {}",
                        ov.norm(),
                        disc.delta
                    )));
                }
                let phase = ov.conj() / ov.norm();
                for ck in c.iter_mut() {
                    *ck *= phase / norm;
                }
                (c, ov.norm())
            }
        };
        let phi = combine(&basis, &coeffs);
        let potential = LayerPotential::new(disc, &phi, degree);
        if self.reference.is_none() {
            self.reference = Some(self.fields(&potential, result.lambda)?);
        }
        Ok(GaugedState { delta: disc.delta, lambda: result.lambda, multiplicity: result.multiplicity, potential, overlap })
    }
}

/// Tracks the eigenfunction branch through `bracket` at δ = 0 and returns
/// `v₀`, `v₁` at `probes`, normalised on a reference ball.
pub fn eigenfunction_correction(
    base: &Discretization,
    bracket: (f64, f64),
    probes: &[Vector3<f64>],
    options: &FieldOptions,
) -> Result<EigenfunctionCorrection> {
    let h = options.step;
    let inner = base.surface.inner_radius(&base.grid);
    let ball = BallQuadrature::new(options.ball_fraction * inner, 6, 7);
    let mut gauge = Gauge { ball: &ball, reference: None };
    let mut solve = |delta: f64, bracket: (f64, f64)| -> Result<GaugedState> {
        let disc = base.with_delta(delta)?;
        let r = find_eigen(&disc, bracket)?;
        gauge.align(&disc, &r)
    };
    let mut states = Vec::with_capacity(5);
    for d in [0.0, h, -h, 2.0 * h, -2.0 * h] {
        states.push(solve(d, bracket)?);
    }
    let lambda1 = richardson_first(states[4].lambda, states[2].lambda, states[1].lambda, states[3].lambda, h);
    let sample = |s: &GaugedState| probes.iter().map(|x| s.velocity(x)).collect::<Result<Vec<_>>>();
    let samples = states.iter().map(sample).collect::<Result<Vec<_>>>()?;
    let v0 = samples[0].clone();
    let v1: Vec<[C64; 3]> = (0..probes.len())
        .map(|i| {
            let mut out = [C64::new(0.0, 0.0); 3];
            for (j, o) in out.iter_mut().enumerate() {
                *o = (8.0 * (samples[1][i][j] - samples[2][i][j]) - (samples[3][i][j] - samples[4][i][j])) / (12.0 * h);
            }
            out
        })
        .collect();
    let mut order_residuals = Vec::new();
    let mut order = None;
    if options.check_order {
        let scale = v0.iter().map(vec_norm).fold(0.0, f64::max);
        let mid = 0.5 * (bracket.0 + bracket.1);
        for &d in &options.order_deltas {
            let c = mid + d * lambda1;
            let s = solve(d, (c - options.half_width, c + options.half_width))?;
            let v = sample(&s)?;
            let e = (0..probes.len())
                .map(|i| {
                    let r: [C64; 3] = std::array::from_fn(|j| v[i][j] - v0[i][j] - v1[i][j] * d);
                    vec_norm(&r)
                })
                .fold(0.0, f64::max);
            order_residuals.push((d, e / scale));
        }
        order = match fit_order(&order_residuals) {
            Ok(f) => Some(f),
            Err(Error::DegenerateData(_)) => None,
            Err(e) => return Err(e),
        };
    }
    Ok(EigenfunctionCorrection { probes: probes.to_vec(), step: h, states, lambda1, v0, v1, order, order_residuals })
}

/// First-order pressure correction by two routes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PressureCorrection {
    pub reference: [f64; 3],
    /// `p₀(x) − p₀(x_ref)`.
    pub p0: Vec<C64>,
    /// δ-difference of `p(x; δ) − p(x_ref; δ)`.
    pub p1: Vec<C64>,
    /// Line integral of `Δv₁ + λ₀v₁ + λ₁v₀` from the reference point.
    pub p1_line: Vec<C64>,
    /// `max|p₁ − p₁_line| / max|p₁|`.
    pub disagreement: f64,
    /// `max|p₀(x) − p₀(x_ref)| / max|v₀|` over the probes.
    pub p0_spread: f64,
}

/// Step of the finite-difference Laplacian along integration paths.
const LAPLACIAN_STEP: f64 = 0.02;

fn path_error(e: Error, x: &Vector3<f64>) -> Error {
    match e {
        Error::TooCloseToBoundary { .. } => Error::PathLeavesDomain { point: [x.x, x.y, x.z] },
        other => other,
    }
}

/// `p₁` at the probes of `corr`, normalised by `p(reference) = 0`.
pub fn eigenpressure_correction(corr: &EigenfunctionCorrection, reference: Vector3<f64>) -> Result<PressureCorrection> {
    let h = corr.step;
    let s = &corr.states;
    let fd = |f: &dyn Fn(&GaugedState) -> Result<C64>| -> Result<C64> {
        let v: Vec<C64> = s.iter().map(f).collect::<Result<_>>()?;
        Ok((8.0 * (v[1] - v[2]) - (v[3] - v[4])) / (12.0 * h))
    };
    let p_ref = s.iter().map(|st| st.pressure(&reference)).collect::<Result<Vec<_>>>().map_err(|e| path_error(e, &reference))?;
    let mut p0 = Vec::new();
    let mut p1 = Vec::new();
    for x in &corr.probes {
        let vals = s.iter().map(|st| st.pressure(x)).collect::<Result<Vec<_>>>()?;
        let rel: Vec<C64> = vals.iter().zip(&p_ref).map(|(a, b)| a - b).collect();
        p0.push(rel[0]);
        p1.push((8.0 * (rel[1] - rel[2]) - (rel[3] - rel[4])) / (12.0 * h));
    }
    let lambda0 = s[0].lambda;
    let v1_at = |y: &Vector3<f64>, j: usize| fd(&|st: &GaugedState| st.velocity(y).map(|v| v[j]));
    // ∂_j p₁ = Δv₁_j + λ₀ v₁_j + λ₁ v₀_j, with a fourth-order Laplacian.
    let grad_p1 = |y: &Vector3<f64>, j: usize| -> Result<C64> {
        let c = v1_at(y, j)?;
        let mut lap = -90.0 * c;
        for a in 0..3 {
            let mut e = Vector3::zeros();
            e[a] = LAPLACIAN_STEP;
            lap += 16.0 * (v1_at(&(y + e), j)? + v1_at(&(y - e), j)?) - (v1_at(&(y + 2.0 * e), j)? + v1_at(&(y - 2.0 * e), j)?);
        }
        lap /= 12.0 * LAPLACIAN_STEP * LAPLACIAN_STEP;
        Ok(lap + lambda0 * c + corr.lambda1 * s[0].velocity(y)?[j])
    };
    let (gx, gw) = gauss_legendre(10);
    let p1_line = corr
        .probes
        .par_iter()
        .map(|x| {
            let mut total = C64::new(0.0, 0.0);
            let mut start = reference;
            for axis in 0..3 {
                let mut end = start;
                end[axis] = x[axis];
                let len = end[axis] - start[axis];
                if len != 0.0 {
                    for (t, w) in gx.iter().zip(&gw) {
                        let mut y = start;
                        y[axis] += 0.5 * len * (t + 1.0);
                        total += grad_p1(&y, axis).map_err(|e| path_error(e, &y))? * (0.5 * len * w);
                    }
                }
                start = end;
            }
            Ok(total)
        })
        .collect::<Result<Vec<_>>>()?;
    let scale = p1.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let diff = p1.iter().zip(&p1_line).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    let vmax = corr.v0.iter().map(vec_norm).fold(0.0, f64::max);
    let spread = p0.iter().map(|v| v.norm()).fold(0.0, f64::max) / vmax;
    Ok(PressureCorrection {
        reference: [reference.x, reference.y, reference.z],
        p0,
        p1,
        p1_line,
        disagreement: if scale > 0.0 { diff / scale } else { diff },
        p0_spread: spread,
    })
}

/// Dilation oracle for `v₁` when `ρ ≡ 1` on a ball centred at the origin:
/// `w − ⟨v₀, w⟩_B v₀` with `w = −x·∇v₀`, the inner product taken on the
/// reference ball of `corr`.
pub fn dilation_v1(corr: &EigenfunctionCorrection, ball_radius: f64) -> Result<Vec<[C64; 3]>> {
    let state = &corr.states[0];
    let ball = BallQuadrature::new(ball_radius, 6, 7);
    let eps = 1e-4;
    let w_at = |x: &Vector3<f64>| -> Result<[C64; 3]> {
        let a = state.velocity(&(x * (1.0 + eps)))?;
        let b = state.velocity(&(x * (1.0 - eps)))?;
        Ok(std::array::from_fn(|j| -(a[j] - b[j]) / (2.0 * eps)))
    };
    let v0b = ball.points.par_iter().map(|x| state.velocity(x)).collect::<Result<Vec<_>>>()?;
    let wb = ball.points.par_iter().map(w_at).collect::<Result<Vec<_>>>()?;
    let proj = ball.inner(&v0b, &wb) / ball.inner(&v0b, &v0b).re;
    corr.probes
        .iter()
        .zip(&corr.v0)
        .map(|(x, v0)| {
            let w = w_at(x)?;
            Ok(std::array::from_fn(|j| w[j] - proj * v0[j]))
        })
        .collect()
}

/// One probe of the serialized series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSample {
    pub x: [f64; 3],
    pub v0: [[f64; 2]; 3],
    pub v1: [[f64; 2]; 3],
    pub p0: [f64; 2],
    pub p1: [f64; 2],
}

/// Diagnostic slopes of the eigenvalue predictions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesSlopes {
    pub order1: Option<f64>,
    pub order2: Option<f64>,
}

/// Serializable perturbation summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSeries {
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub multiplicity: usize,
    pub contour: Contour,
    pub slopes: SeriesSlopes,
    pub probes: Vec<ProbeSample>,
}

fn pair(c: C64) -> [f64; 2] {
    [c.re, c.im]
}

impl ProbeSample {
    pub fn new(x: &Vector3<f64>, v0: &[C64; 3], v1: &[C64; 3], p0: C64, p1: C64) -> Self {
        Self { x: [x.x, x.y, x.z], v0: v0.map(pair), v1: v1.map(pair), p0: pair(p0), p1: pair(p1) }
    }
}
