//! Property checks shared by the `validate-kernels` stage and the acceptance
//! suite. Each returns a [`Check`] with the measured value and its bound.

use crate::geometry::{jacobian_det_direct, JacobianKind, PerturbationField, PerturbedNode, Surface};
use crate::kernels::expansion::gamma_series;
use crate::kernels::{pressure, stokeslet, SpectralParam};
use crate::layer::{frobenius, Discretization, LayerOptions};
use crate::oracles::{fit_order, SlopeFit};
use crate::spectral::Eigenpair;
use crate::{Error, Result, C64};
use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One validated quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Bound the value is compared against.
    pub bound: f64,
    /// `"max"` when the value must not exceed the bound, `"min"` otherwise.
    pub kind: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    pub fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, kind: "max".into(), passed: value <= bound, note: None }
    }

    pub fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, kind: "min".into(), passed: value >= bound, note: None }
    }

    /// A measured quantity that is reported without a bound.
    pub fn report(name: &str, value: f64) -> Self {
        Self { name: name.into(), value, bound: f64::NAN, kind: "report".into(), passed: true, note: None }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// A slope check that also requires fit correlation ≥ 0.99. Exact
    /// truncations (zero residuals) pass.
    pub fn slope(name: &str, fit: &Result<SlopeFit>, bound: f64) -> Self {
        match fit {
            Ok(f) => {
                let mut c = Self::at_least(name, f.slope, bound);
                c.passed = f.at_least(bound);
                c.with_note(format!("correlation {:.5}", f.correlation))
            }
            Err(Error::DegenerateData(m)) => {
                Self { passed: true, ..Self::at_least(name, f64::INFINITY, bound) }.with_note(format!("exact: {m}"))
            }
            Err(e) => Self { passed: false, ..Self::at_least(name, f64::NAN, bound) }.with_note(e.to_string()),
        }
    }
}

fn random_point(rng: &mut ChaCha8Rng, rmin: f64, rmax: f64) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n * rng.random_range(rmin..rmax);
        }
    }
}

/// Largest relative residual of `−ΔΓ + ∇P − λΓ` and of `∇·Γ`, by fourth-order
/// finite differences at `points` random separations for `lambdas` random
/// `λ ∈ (0, 50]`.
pub fn stokeslet_pde_residual(seed: u64, points: usize, lambdas: usize) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 2e-3;
    let mut pde = 0.0_f64;
    let mut div = 0.0_f64;
    for _ in 0..lambdas {
        let lambda: f64 = 50.0 * (1.0 - rng.random::<f64>());
        let param = SpectralParam::real(lambda);
        let g = |x: &Vector3<f64>| stokeslet(&param, x).map(|k| k.gamma);
        for _ in 0..points {
            let x = random_point(&mut rng, 0.3, 1.5);
            let g0 = g(&x)?;
            let mut lap = [[C64::new(0.0, 0.0); 3]; 3];
            let mut grad = [[[C64::new(0.0, 0.0); 3]; 3]; 3];
            let mut grad_p = [[0.0; 3]; 3];
            for a in 0..3 {
                let mut e = Vector3::zeros();
                e[a] = h;
                let (p1, m1, p2, m2) = (g(&(x + e))?, g(&(x - e))?, g(&(x + 2.0 * e))?, g(&(x - 2.0 * e))?);
                let (pp1, pm1, pp2, pm2) = (pressure(&(x + e))?, pressure(&(x - e))?, pressure(&(x + 2.0 * e))?, pressure(&(x - 2.0 * e))?);
                for i in 0..3 {
                    grad_p[a][i] = (8.0 * (pp1[i] - pm1[i]) - (pp2[i] - pm2[i])) / (12.0 * h);
                    for j in 0..3 {
                        lap[i][j] += (-p2[i][j] + 16.0 * p1[i][j] - 30.0 * g0[i][j] + 16.0 * m1[i][j] - m2[i][j]) / (12.0 * h * h);
                        grad[a][i][j] = (8.0 * (p1[i][j] - m1[i][j]) - (p2[i][j] - m2[i][j])) / (12.0 * h);
                    }
                }
            }
            let mut scale = 0.0_f64;
            let mut res = 0.0_f64;
            let mut dscale = 0.0_f64;
            let mut dres = 0.0_f64;
            for i in 0..3 {
                for j in 0..3 {
                    // Column j is the velocity of a point force along e_j with pressure P_j.
                    let r = -lap[i][j] + grad_p[i][j] - lambda * g0[i][j];
                    res = res.max(r.norm());
                    scale = scale.max(lap[i][j].norm()).max((lambda * g0[i][j]).norm()).max(grad_p[i][j].abs());
                    dscale = dscale.max(grad[i][i][j].norm());
                }
                let d: C64 = (0..3).map(|a| grad[a][a][i]).sum();
                dres = dres.max(d.norm());
            }
            pde = pde.max(res / scale);
            div = div.max(dres / dscale);
        }
    }
    Ok((pde, div))
}

/// `max_k |a_k − b_k| / max_k |b_k|` over probe samples of a vector field.
pub fn field_deviation(a: &[[C64; 3]], b: &[[C64; 3]]) -> f64 {
    let norm = |v: &[C64; 3]| v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let scale = b.iter().map(norm).fold(0.0, f64::max);
    let err = a.iter().zip(b).map(|(x, y)| norm(&[x[0] - y[0], x[1] - y[1], x[2] - y[2]])).fold(0.0, f64::max);
    err / scale
}

/// Step of the eigenpair residual stencil.
pub const EIGENPAIR_FD_STEP: f64 = 0.02;

/// Fourth-order finite-difference residuals of a reconstructed eigenpair at
/// `points`: the largest `|−Δv + ∇p − λv| / (λ max|v|)` and
/// `|∇·v| / max|∇v|`.
pub fn eigenpair_fd_residuals(pair: &Eigenpair, points: &[Vector3<f64>], h: f64) -> Result<(f64, f64)> {
    let l = C64::new(pair.lambda, 0.0);
    let v = |x: &Vector3<f64>| pair.potential.velocity(l, x).map(|v| v.map(|c| c * pair.scale));
    let p = |x: &Vector3<f64>| pair.potential.pressure(x).map(|c| c * pair.scale);
    let mut vmax = 0.0_f64;
    let mut gmax = 0.0_f64;
    let mut res = Vec::new();
    for x in points {
        let v0 = v(x)?;
        let mut lap = [C64::new(0.0, 0.0); 3];
        let mut grad_p = [C64::new(0.0, 0.0); 3];
        let mut div = C64::new(0.0, 0.0);
        for a in 0..3 {
            let mut e = Vector3::zeros();
            e[a] = h;
            let (p1, m1, p2, m2) = (v(&(x + e))?, v(&(x - e))?, v(&(x + 2.0 * e))?, v(&(x - 2.0 * e))?);
            grad_p[a] = (8.0 * (p(&(x + e))? - p(&(x - e))?) - (p(&(x + 2.0 * e))? - p(&(x - 2.0 * e))?)) / (12.0 * h);
            for i in 0..3 {
                lap[i] += (-p2[i] + 16.0 * p1[i] - 30.0 * v0[i] + 16.0 * m1[i] - m2[i]) / (12.0 * h * h);
                let d = (8.0 * (p1[i] - m1[i]) - (p2[i] - m2[i])) / (12.0 * h);
                gmax = gmax.max(d.norm());
                if i == a {
                    div += d;
                }
            }
        }
        let r = (0..3).map(|i| (-lap[i] + grad_p[i] - l * v0[i]).norm_sqr()).sum::<f64>().sqrt();
        vmax = vmax.max(v0.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt());
        res.push((r, div.norm()));
    }
    let pde = res.iter().map(|r| r.0).fold(0.0, f64::max) / (pair.lambda * vmax);
    let div = res.iter().map(|r| r.1).fold(0.0, f64::max) / gmax;
    Ok((pde, div))
}

fn random_matrix(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0))
}

/// Largest deviation of the cubic Jacobian polynomial from the direct
/// determinant over random `M` and δ.
pub fn jacobian_identity_error(seed: u64, samples: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..samples {
        let m = random_matrix(&mut rng);
        let delta: f64 = rng.random_range(-0.5..0.5);
        let tr = m.trace();
        let poly = 1.0 + tr * delta + 0.5 * (tr * tr - (m * m).trace()) * delta * delta + m.determinant() * delta.powi(3);
        worst = worst.max((poly - jacobian_det_direct(&m, delta)).abs());
    }
    worst
}

/// Largest deviation of `Σ σₙ δⁿ` from the cubic polynomial at sampled nodes.
pub fn surface_series_error(surface: &Surface, field: &PerturbationField, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..32 {
        let s = random_point(&mut rng, 1.0, 1.0 + 1e-12).normalize();
        let n = PerturbedNode::new(surface, field, &s);
        let sig = n.surface_element_series();
        let delta: f64 = rng.random_range(-0.2..0.2);
        let sum = sig[0] + sig[1] * delta + sig[2] * delta * delta + sig[3] * delta.powi(3);
        worst = worst.max((sum - n.jacobian_det_polynomial(delta)).abs());
    }
    worst
}

/// Order in δ of `max |exact area ratio − det(I + δM)|` over random nodes.
pub fn surface_element_difference_fit(surface: &Surface, field: &PerturbationField, seed: u64) -> Result<SlopeFit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes: Vec<PerturbedNode> =
        (0..16).map(|_| PerturbedNode::new(surface, field, &random_point(&mut rng, 1.0, 1.0 + 1e-12).normalize())).collect();
    let pts: Vec<(f64, f64)> = TRUNCATION_DELTAS
        .iter()
        .map(|&d| (d, nodes.iter().map(|n| (n.surface_element_exact(d) - n.jacobian_det_polynomial(d)).abs()).fold(0.0, f64::max)))
        .collect();
    fit_order(&pts)
}

/// Surface-element coefficients at one node of the unit sphere with ρ ≡ 1.
pub fn dilation_coefficients() -> [f64; 4] {
    let n = PerturbedNode::new(&Surface::Sphere { radius: 1.0 }, &PerturbationField::Constant { value: 1.0 }, &Vector3::new(0.0, 0.6, 0.8));
    n.surface_element_series()
}

/// δ grid of the truncation fits.
pub const TRUNCATION_DELTAS: [f64; 5] = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];

/// Worst-case slope fits of the normal truncation `ν_δ − ν⁽⁰⁾ − δν⁽¹⁾` at
/// sampled nodes.
pub fn normal_truncation_fit(surface: &Surface, field: &PerturbationField, seed: u64) -> Result<SlopeFit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: Option<SlopeFit> = None;
    for _ in 0..8 {
        let s = random_point(&mut rng, 1.0, 1.0 + 1e-12).normalize();
        let n = PerturbedNode::new(surface, field, &s);
        let (n0, n1) = n.normal_series();
        let pts: Vec<(f64, f64)> = TRUNCATION_DELTAS.iter().map(|&d| (d, (n.deformed_normal(d) - n0 - n1 * d).norm())).collect();
        let fit = fit_order(&pts)?;
        if worst.as_ref().is_none_or(|w| fit.slope < w.slope) {
            worst = Some(fit);
        }
    }
    worst.ok_or_else(|| Error::DegenerateData("no samples".into()))
}

/// Worst-case fits of the kernel truncations of order 1 and 2 at sampled
/// node pairs: `|Γ(Ψ_δx − Ψ_δy)J_δ − Σ_{n≤N} Γ^(n)δⁿ|`.
pub fn kernel_truncation_fits(
    surface: &Surface,
    field: &PerturbationField,
    kind: JacobianKind,
    seed: u64,
) -> Result<(Result<SlopeFit>, Result<SlopeFit>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: [Option<Result<SlopeFit>>; 2] = [None, None];
    for _ in 0..6 {
        let sx = random_point(&mut rng, 1.0, 1.0 + 1e-12).normalize();
        let sy = random_point(&mut rng, 1.0, 1.0 + 1e-12).normalize();
        if (sx - sy).norm() < 0.3 {
            continue;
        }
        let lambda: f64 = rng.random_range(1.0..50.0);
        let param = SpectralParam::real(lambda);
        let kappa = param.kappa(crate::kernels::PhaseRate::Sqrt);
        let (x, y) = (PerturbedNode::new(surface, field, &sx), PerturbedNode::new(surface, field, &sy));
        let coeffs = gamma_series(kappa, &x, &y, kind, 2)?;
        for (order, slot) in worst.iter_mut().enumerate() {
            let pts: Vec<(f64, f64)> = TRUNCATION_DELTAS
                .iter()
                .map(|&d| {
                    let exact = stokeslet(&param, &(x.psi(d) - y.psi(d)))?.gamma;
                    let jac = y.surface_element(kind, d);
                    let mut e = 0.0_f64;
                    for i in 0..3 {
                        for j in 0..3 {
                            let mut s = C64::new(0.0, 0.0);
                            for (n, c) in coeffs.iter().enumerate().take(order + 2) {
                                s += c[i][j] * d.powi(n as i32);
                            }
                            e = e.max((exact[i][j] * jac - s).norm());
                        }
                    }
                    Ok((d, e))
                })
                .collect::<Result<_>>()?;
            let fit = fit_order(&pts);
            let replace = match (&slot, &fit) {
                (None, _) => true,
                (Some(Ok(w)), Ok(f)) => f.slope < w.slope,
                (Some(Err(Error::DegenerateData(_))), _) => true,
                (Some(_), Err(Error::DegenerateData(_))) => false,
                (Some(Err(_)), _) => false,
                (Some(Ok(_)), Err(_)) => true,
            };
            if replace {
                *slot = Some(fit);
            }
        }
    }
    let [a, b] = worst;
    Ok((a.unwrap_or_else(|| Err(Error::DegenerateData("no pairs".into()))), b.unwrap_or_else(|| Err(Error::DegenerateData("no pairs".into())))))
}

/// Fit of the operator truncation `‖A_δ − A^(0) − δA^(1)‖_F`.
pub fn operator_truncation_fit(surface: &Surface, field: &PerturbationField, options: LayerOptions, lambda: f64) -> Result<SlopeFit> {
    let base = Discretization::new(surface.clone(), field.clone(), 0.0, options)?;
    let l = C64::new(lambda, 0.0);
    let ops = base.assemble_expansion(l, 1)?;
    let mut pts = Vec::new();
    for &d in &TRUNCATION_DELTAS {
        let a = base.with_delta(d)?.assemble(l)?.matrix;
        let n = a.nrows();
        let r = faer::Mat::<C64>::from_fn(n, n, |i, j| a[(i, j)] - ops[0].matrix[(i, j)] - ops[1].matrix[(i, j)] * d);
        pts.push((d, frobenius(&r)));
    }
    fit_order(&pts)
}

/// Geometry and kernel suites that need no linear algebra beyond 3×3.
pub fn kernel_suite(surface: &Surface, field: &PerturbationField, kind: JacobianKind, seed: u64) -> Result<Vec<Check>> {
    let (pde, div) = stokeslet_pde_residual(seed, 10, 5)?;
    let mut checks = vec![
        Check::at_most("stokeslet_pde_residual", pde, 1e-5),
        Check::at_most("stokeslet_divergence", div, 1e-5),
        Check::at_most("jacobian_polynomial_vs_direct", jacobian_identity_error(seed, 200), 1e-12),
        Check::at_most("surface_element_series_identity", surface_series_error(surface, field, seed), 1e-12),
    ];
    let c = dilation_coefficients();
    let dev = c.iter().zip([1.0, 3.0, 3.0, 1.0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    checks.push(Check::at_most("sphere_dilation_coefficients", dev, 1e-12));
    let x3 = PerturbationField::X3 { amplitude: 1.0 };
    let sphere = Surface::Sphere { radius: 1.0 };
    checks.push(Check::slope("normal_truncation_slope", &normal_truncation_fit(&sphere, &x3, seed), 1.9));
    let elem = match surface_element_difference_fit(surface, field, seed) {
        Ok(f) => Check::report("surface_element_difference_order", f.slope).with_note(format!("correlation {:.5}", f.correlation)),
        Err(e) => Check::report("surface_element_difference_order", f64::INFINITY).with_note(e.to_string()),
    };
    checks.push(elem);
    let (k1, k2) = kernel_truncation_fits(surface, field, kind, seed)?;
    checks.push(Check::slope("kernel_order1_truncation_slope", &k1, 1.9));
    checks.push(Check::slope("kernel_order2_truncation_slope", &k2, 2.9));
    Ok(checks)
}
