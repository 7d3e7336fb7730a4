//! Independent reference values: spherical Bessel zeros for the ball,
//! log-log order fits, and finite-difference eigenvalue derivatives.
//!
//! Nothing here calls kernel, operator or solver code. Eigenvalue oracles
//! receive the direct solver as a closure.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Spherical Bessel function `j_n(x)` for `x > 0`.
pub fn spherical_bessel(n: usize, x: f64) -> f64 {
    let (s, c) = x.sin_cos();
    match n {
        0 => s / x,
        1 => s / (x * x) - c / x,
        2 => (3.0 / (x * x) - 1.0) * s / x - 3.0 * c / (x * x),
        _ if n <= 8 || x > n as f64 => upward(n, x),
        _ => downward(n, x),
    }
}

fn upward(n: usize, x: f64) -> f64 {
    let mut jm = spherical_bessel(1, x);
    let mut j = spherical_bessel(2, x);
    for l in 2..n {
        let next = (2 * l + 1) as f64 / x * j - jm;
        jm = j;
        j = next;
    }
    j
}

/// Miller's backward recurrence normalised against `j_0`.
fn downward(n: usize, x: f64) -> f64 {
    let start = n + 20 + x as usize;
    let (mut jp, mut j) = (0.0_f64, 1e-300_f64);
    let mut at_n = 0.0;
    for l in (1..=start).rev() {
        let prev = (2 * l + 1) as f64 / x * j - jp;
        jp = j;
        j = prev;
        if l - 1 == n {
            at_n = j;
        }
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp *= 1e-250;
            at_n *= 1e-250;
        }
    }
    at_n * spherical_bessel(0, x) / j
}

/// One toroidal eigenvalue of the unit ball.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesselZero {
    pub n: usize,
    pub s: usize,
    pub zero: f64,
    /// `λ = j_{n,s}²`.
    pub lambda: f64,
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut fa = f(a);
    while b - a > tol {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// The `s`-th positive zero of `j_n`, by bisection on `[π/2, (s + n + 2)π]`.
pub fn bessel_zero(n: usize, s: usize) -> Result<f64> {
    if s == 0 {
        return Err(Error::BracketFailure { n, s });
    }
    let lo = std::f64::consts::FRAC_PI_2;
    let hi = (s + n + 2) as f64 * std::f64::consts::PI;
    let steps = 64 * (s + n + 2);
    let h = (hi - lo) / steps as f64;
    let mut found = 0;
    let mut a = lo;
    let mut fa = spherical_bessel(n, a);
    for i in 1..=steps {
        let b = lo + h * i as f64;
        let fb = spherical_bessel(n, b);
        if fa != 0.0 && (fa > 0.0) != (fb > 0.0) {
            found += 1;
            if found == s {
                return Ok(bisect(|x| spherical_bessel(n, x), a, b, 1e-13));
            }
        }
        a = b;
        fa = fb;
    }
    Err(Error::BracketFailure { n, s })
}

/// Toroidal ball spectrum `j_{n,s}²` for `1 ≤ n ≤ n_max`, `1 ≤ s ≤ zeros_per_n`.
pub fn bessel_toroidal_spectrum(n_max: usize, zeros_per_n: usize) -> Result<Vec<BesselZero>> {
    if n_max < 1 {
        return Err(Error::InvalidInput("n_max must be at least 1".into()));
    }
    let mut out = Vec::new();
    for n in 1..=n_max {
        for s in 1..=zeros_per_n {
            let zero = bessel_zero(n, s)?;
            out.push(BesselZero { n, s, zero, lambda: zero * zero });
        }
    }
    Ok(out)
}

/// Writes an oracle table as CSV with columns `n,s,zero,lambda`.
pub fn write_spectrum_csv<W: Write>(table: &[BesselZero], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "s", "zero", "lambda"])?;
    for z in table {
        w.write_record([z.n.to_string(), z.s.to_string(), format!("{:.15e}", z.zero), format!("{:.15e}", z.lambda)])?;
    }
    w.flush()?;
    Ok(())
}

/// Least-squares line through `(log δ, log e)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub abscissae: Vec<f64>,
    pub residuals: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub correlation: f64,
}

impl SlopeFit {
    /// True when the slope is at least `min` with correlation ≥ 0.99.
    pub fn at_least(&self, min: f64) -> bool {
        self.slope >= min && self.correlation >= 0.99
    }
}

/// Fits `log e = slope · log δ + intercept`.
///
/// A zero residual yields [`Error::DegenerateData`], which callers treat as
/// an exact (infinite-order) truncation.
pub fn fit_order(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(Error::InvalidInput(format!("order fit needs at least 3 points, got {}", points.len())));
    }
    if points.iter().any(|&(_, e)| e == 0.0) {
        return Err(Error::DegenerateData("zero residual in order fit".into()));
    }
    if points.iter().any(|&(d, e)| !(d > 0.0) || !(e > 0.0) || !e.is_finite()) {
        return Err(Error::InvalidInput("order fit needs positive abscissae and residuals".into()));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateData("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let correlation = if syy == 0.0 { 1.0 } else { (sxy / (sxx * syy).sqrt()).abs() };
    Ok(SlopeFit {
        abscissae: points.iter().map(|p| p.0).collect(),
        residuals: points.iter().map(|p| p.1).collect(),
        slope,
        intercept: my - slope * mx,
        correlation,
    })
}

/// Fourth-order central first derivative from samples at `±h, ±2h`.
pub fn richardson_first(fm2: f64, fm1: f64, fp1: f64, fp2: f64, h: f64) -> f64 {
    (8.0 * (fp1 - fm1) - (fp2 - fm2)) / (12.0 * h)
}

/// Fourth-order central second derivative from samples at `0, ±h, ±2h`.
pub fn richardson_second(fm2: f64, fm1: f64, f0: f64, fp1: f64, fp2: f64, h: f64) -> f64 {
    (-fp2 + 16.0 * fp1 - 30.0 * f0 + 16.0 * fm1 - fm2) / (12.0 * h * h)
}

/// First and second δ-derivatives of a direct eigenvalue solver.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdSlope {
    pub lambda0: f64,
    pub lambda1: f64,
    /// Half the second derivative, the δ² coefficient.
    pub lambda2: f64,
    /// `λ₁ < 0`: expected when the perturbation is everywhere outward.
    pub monotone_sign: bool,
}

/// Richardson-extrapolated `λ₁` and `λ₂` of `solve(δ)` (a cluster-mean
/// eigenvalue) from samples at `0, ±h, ±2h`.
pub fn fd_eigen_slope<F>(mut solve: F, h: f64) -> Result<FdSlope>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(h > 0.0) {
        return Err(Error::InvalidInput("finite-difference step must be positive".into()));
    }
    let f0 = solve(0.0)?;
    let fp1 = solve(h)?;
    let fm1 = solve(-h)?;
    let fp2 = solve(2.0 * h)?;
    let fm2 = solve(-2.0 * h)?;
    let lambda1 = richardson_first(fm2, fm1, fp1, fp2, h);
    let lambda2 = 0.5 * richardson_second(fm2, fm1, f0, fp1, fp2, h);
    Ok(FdSlope { lambda0: f0, lambda1, lambda2, monotone_sign: lambda1 < 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_order_closed_forms_agree_with_recurrence() {
        for &x in &[0.7, 3.3, 12.0] {
            let j3 = 5.0 / x * spherical_bessel(2, x) - spherical_bessel(1, x);
            assert!((spherical_bessel(3, x) - j3).abs() < 1e-14);
        }
    }

    #[test]
    fn downward_matches_upward_where_both_are_stable() {
        for n in [9usize, 12, 15] {
            let x = n as f64 + 5.0;
            assert!((downward(n, x) - upward(n, x)).abs() < 1e-12, "{n}");
        }
    }

    #[test]
    fn small_argument_high_order() {
        // j_n(x) ≈ x^n / (2n+1)!! for small x.
        let x: f64 = 0.01;
        let n = 10;
        let dfact: f64 = (1..=n).map(|k| (2 * k + 1) as f64).product();
        let approx = x.powi(n as i32) / dfact;
        assert!((spherical_bessel(n, x) / approx - 1.0).abs() < 1e-4);
    }

    #[test]
    fn first_zeros() {
        assert!((bessel_zero(1, 1).unwrap() - 4.493409457909064).abs() < 1e-9);
        assert!((bessel_zero(2, 1).unwrap() - 5.763459196894550).abs() < 1e-9);
        assert!((bessel_zero(0, 2).unwrap() - 2.0 * std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn zeros_interlace() {
        let t = bessel_toroidal_spectrum(6, 1).unwrap();
        assert!(t.windows(2).all(|w| w[0].zero < w[1].zero));
    }

    #[test]
    fn zero_index_is_rejected() {
        assert!(matches!(bessel_zero(1, 0), Err(Error::BracketFailure { .. })));
    }

    #[test]
    fn exact_powers() {
        let pts: Vec<(f64, f64)> = [0.1, 0.01, 0.001].iter().map(|&d| (d, d * d)).collect();
        let f = fit_order(&pts).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        let pts: Vec<(f64, f64)> = [0.1, 0.01, 0.001].iter().map(|&d: &f64| (d, 3.0 * d.powi(3))).collect();
        let f = fit_order(&pts).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-12);
        assert!((f.intercept - 3.0_f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn zero_residual_is_degenerate() {
        assert!(matches!(fit_order(&[(0.1, 1.0), (0.01, 0.0), (0.001, 1e-3)]), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn fd_slope_of_dilation_series() {
        let l0 = 20.0;
        let r = fd_eigen_slope(|d| Ok(l0 / (1.0 + d).powi(2)), 1e-3).unwrap();
        assert!((r.lambda1 + 2.0 * l0).abs() < 1e-6);
        assert!((r.lambda2 - 3.0 * l0).abs() < 1e-3);
        assert!(r.monotone_sign);
    }

    #[test]
    fn fd_slope_of_constant_is_zero() {
        let r = fd_eigen_slope(|_| Ok(7.0), 1e-3).unwrap();
        assert_eq!((r.lambda1, r.lambda2), (0.0, 0.0));
    }
}
