//! Taylor coefficients in δ of kernel quantities evaluated at deformed points
//! `x̃ − ỹ = r + δΘ`, `r = x − y`.
//!
//! Every family is produced by the generic series engine. A few low-order
//! closed forms are kept alongside as independent cross-checks.

use super::{h_taylor, SINGULAR_CUTOFF, TAYLOR_RADIUS};
use crate::geometry::{theta, JacobianKind, PerturbedNode};
use crate::series::{Series, FULL, N_MAX};
use crate::{Error, Result, C64};
use nalgebra::Vector3;
use std::f64::consts::PI;
use std::io::Write;

const I: C64 = C64 { re: 0.0, im: 1.0 };

type Tensor<const L: usize> = [[Series<L>; 3]; 3];

fn tensor_zero<const L: usize>() -> Tensor<L> {
    [[Series::zero(); 3]; 3]
}

/// Geometry of one node pair: separation, Θ, and the surface-element series at y.
#[derive(Clone, Debug)]
pub struct PairGeometry<const L: usize> {
    pub r: Vector3<f64>,
    pub theta: Vector3<f64>,
    pub jac: Series<L>,
}

impl<const L: usize> PairGeometry<L> {
    pub fn new(x: &PerturbedNode, y: &PerturbedNode, kind: JacobianKind) -> Self {
        Self { r: x.x() - y.x(), theta: theta(x, y), jac: y.surface_element_taylor(kind) }
    }

    /// Pair without surface-element factor (unit Jacobian).
    pub fn bare(r: Vector3<f64>, theta: Vector3<f64>) -> Self {
        Self { r, theta, jac: Series::real(1.0) }
    }

    fn check(&self) -> Result<()> {
        if self.r.norm() < SINGULAR_CUTOFF {
            Err(Error::CoincidentPoints)
        } else {
            Ok(())
        }
    }

    /// `|r + δΘ|²`.
    pub fn dist_sq(&self) -> Series<L> {
        Series::from_real(&[self.r.norm_squared(), 2.0 * self.r.dot(&self.theta), self.theta.norm_squared()])
    }

    /// Component `i` of `r + δΘ`.
    pub fn xi(&self, i: usize) -> Series<L> {
        Series::from_real(&[self.r[i], self.theta[i]])
    }

    /// `c^(m)`: Taylor coefficients of `|r + δΘ|^m`.
    pub fn distance_power(&self, m: i32) -> Result<Series<L>> {
        self.check()?;
        Ok(self.dist_sq().powf(m as f64 / 2.0))
    }

    /// `K`: coefficients of `e^{iκ|r + δΘ|}`.
    pub fn exp_phase(&self, kappa: C64) -> Result<Series<L>> {
        Ok(self.distance_power(1)?.scale(I * kappa).exp())
    }

    /// `T^(m)` with `T₀ = 1`: `e^{iκ|r̃|}/|r̃|^m = (e^{iκr}/r^m) Σ δⁿ Tₙ`.
    pub fn t_series(&self, kappa: C64, m: i32) -> Result<Series<L>> {
        let k = self.exp_phase(kappa)?;
        let cm = self.distance_power(m)?;
        let base = k.c[0] / cm.c[0];
        Ok(k.div(&cm).scale(base.inv()))
    }

    /// `ĝ`: coefficients of `(r + δΘ)_i (r + δΘ)_j`.
    pub fn ghat(&self) -> Tensor<L> {
        let mut out = tensor_zero();
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = self.xi(i) * self.xi(j);
            }
        }
        out
    }

    /// `T̂^(m)`: coefficients of `(r̃_i r̃_j / |r̃|^m) J_δ(y)`.
    pub fn that(&self, m: i32) -> Result<Tensor<L>> {
        let inv = self.distance_power(m)?.recip() * self.jac;
        let g = self.ghat();
        let mut out = tensor_zero();
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = g[i][j] * inv;
            }
        }
        Ok(out)
    }

    /// `E`: coefficients of `r̃_i r̃_j |r̃| e^{iκ|r̃|} J_δ(y)`.
    pub fn e_series(&self, kappa: C64) -> Result<Tensor<L>> {
        let f = self.distance_power(1)? * self.exp_phase(kappa)? * self.jac;
        let g = self.ghat();
        let mut out = tensor_zero();
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = g[i][j] * f;
            }
        }
        Ok(out)
    }

    /// `R^(ij)`: coefficients of `∂_i∂_j [(e^{iκs} − 1)/s^p]` at `s = |r̃|`,
    /// through the radial derivatives `∂_i∂_j g = g'' ξ_iξ_j/s² + g'(δ_ij/s − ξ_iξ_j/s³)`.
    pub fn r_series(&self, kappa: C64, p: i32) -> Result<Tensor<L>> {
        let s = self.distance_power(1)?;
        let e = s.scale(I * kappa).exp();
        let em1 = e - Series::real(1.0);
        let sp = |q: i32| s.powf(-(q as f64));
        let pf = p as f64;
        let ik = I * kappa;
        let g1 = e.scale(ik) * sp(p) - (em1 * sp(p + 1)).scale_re(pf);
        let g2 = e.scale(ik * ik) * sp(p) - (e * sp(p + 1)).scale(ik * 2.0 * pf) + (em1 * sp(p + 2)).scale_re(pf * (pf + 1.0));
        let inv_s = sp(1);
        let inv_s2 = sp(2);
        let inv_s3 = sp(3);
        let mut out = tensor_zero();
        for i in 0..3 {
            for j in 0..3 {
                let xx = self.xi(i) * self.xi(j);
                let mut v = g2 * xx * inv_s2 - g1 * xx * inv_s3;
                if i == j {
                    v += g1 * inv_s;
                }
                out[i][j] = v;
            }
        }
        Ok(out)
    }

    /// `R^(ij)` through the structured form
    /// `[iκ δ/s^{p+1} − p δ/s^{p+2} − κ² ξξ/s^{p+2} − (2p+1) iκ ξξ/s^{p+3} + p(p+2) ξξ/s^{p+4}] e^{iκs}
    ///  + p δ/s^{p+2} − p(p+2) ξξ/s^{p+4}`, assembled from the inverse powers
    /// `κ̂^(m) = 1/|r̃|^m`, the quotients `β_m = ξ_iξ_j/|r̃|^m` and `K`.
    pub fn r_series_structured(&self, kappa: C64, p: i32) -> Result<Tensor<L>> {
        let k = self.exp_phase(kappa)?;
        let khat = |m: i32| -> Result<Series<L>> { Ok(self.distance_power(m)?.recip()) };
        let pf = p as f64;
        let ik = I * kappa;
        let kh1 = khat(p + 1)?;
        let kh2 = khat(p + 2)?;
        let kh3 = khat(p + 3)?;
        let kh4 = khat(p + 4)?;
        let g = self.ghat();
        let mut out = tensor_zero();
        for i in 0..3 {
            for j in 0..3 {
                let b2 = g[i][j] * kh2;
                let b3 = g[i][j] * kh3;
                let b4 = g[i][j] * kh4;
                let mut osc = b2.scale(ik * ik) - b3.scale(ik * (2.0 * pf + 1.0)) + b4.scale_re(pf * (pf + 2.0));
                let mut stat = -b4.scale_re(pf * (pf + 2.0));
                if i == j {
                    osc += kh1.scale(ik) - kh2.scale_re(pf);
                    stat += kh2.scale_re(pf);
                }
                out[i][j] = osc * k + stat;
            }
        }
        Ok(out)
    }

    /// `Γ^(n)`: coefficients of `Γ(κ, r̃) J_δ(y)` through the profiles a(z), b(z).
    pub fn gamma(&self, kappa: C64) -> Result<Tensor<L>> {
        let s2 = self.dist_sq();
        if s2.c[0].re.sqrt() < SINGULAR_CUTOFF {
            return Err(Error::CoincidentPoints);
        }
        let s = s2.powf(0.5);
        let z = s.scale(I * kappa);
        let e = z.exp();
        let h = if z.c[0].norm() < TAYLOR_RADIUS {
            z.compose_taylor(&h_taylor(16))
        } else {
            (e * (z - Series::real(1.0)) + Series::real(1.0)).div(&(z * z))
        };
        let a = e - h;
        let b = h.scale_re(3.0) - e;
        let inv_s = s.recip();
        let inv_s3 = inv_s * inv_s * inv_s;
        let diag = a * inv_s * self.jac;
        let off = b * inv_s3 * self.jac;
        let xs = [self.xi(0), self.xi(1), self.xi(2)];
        let mut out = tensor_zero();
        for i in 0..3 {
            for j in i..3 {
                let mut v = off * (xs[i] * xs[j]);
                if i == j {
                    v += diag;
                }
                v = v.scale_re(1.0 / (4.0 * PI));
                out[i][j] = v;
                out[j][i] = v;
            }
        }
        Ok(out)
    }

    /// `Γ^(n)` through `(1/4π)[δ_ij e^{iκs}/s + κ⁻² R^(ij)_{p=1}] J_δ(y)`.
    pub fn gamma_structured(&self, kappa: C64) -> Result<Tensor<L>> {
        let t = self.exp_phase(kappa)? * self.distance_power(1)?.recip();
        let r = self.r_series(kappa, 1)?;
        let inv_k2 = (kappa * kappa).inv();
        let mut out = tensor_zero();
        for i in 0..3 {
            for j in 0..3 {
                let mut v = r[i][j].scale(inv_k2);
                if i == j {
                    v += t;
                }
                out[i][j] = (v * self.jac).scale_re(1.0 / (4.0 * PI));
            }
        }
        Ok(out)
    }
}

/// Closed forms of the lowest coefficients, used as cross-checks.
pub mod closed {
    use super::*;

    /// `c₁^(m) = m (r·Θ) |r|^{m−2}`.
    pub fn c1(m: i32, r: &Vector3<f64>, th: &Vector3<f64>) -> f64 {
        m as f64 * r.dot(th) * r.norm().powi(m - 2)
    }

    /// `c₂^(m) = (m/2) |r|^m [ |Θ|²/|r|² + (m − 2) ((r·Θ)/|r|²)² ]`.
    pub fn c2(m: i32, r: &Vector3<f64>, th: &Vector3<f64>) -> f64 {
        let rn = r.norm();
        let q = r.dot(th) / (rn * rn);
        0.5 * m as f64 * rn.powi(m) * (th.norm_squared() / (rn * rn) + (m as f64 - 2.0) * q * q)
    }

    /// `K₁ = iκ (Θ·r/|r|) e^{iκ|r|}`.
    pub fn k1(kappa: C64, r: &Vector3<f64>, th: &Vector3<f64>) -> C64 {
        let rn = r.norm();
        I * kappa * (th.dot(r) / rn) * (I * kappa * rn).exp()
    }

    /// `T₁^(m) = −m (Θ·r)/|r|² + iκ (Θ·r)/|r|`.
    pub fn t1(kappa: C64, m: i32, r: &Vector3<f64>, th: &Vector3<f64>) -> C64 {
        let rn = r.norm();
        let d = th.dot(r);
        C64::new(-(m as f64) * d / (rn * rn), 0.0) + I * kappa * d / rn
    }

    /// `E₀ = ĝ₀ |r| e^{iκ|r|}`.
    pub fn e0(kappa: C64, r: &Vector3<f64>, i: usize, j: usize) -> C64 {
        let rn = r.norm();
        (I * kappa * rn).exp() * (r[i] * r[j] * rn)
    }

    /// `ĝ₁ = θ_i r_j + θ_j r_i`, `ĝ₂ = θ_i θ_j`.
    pub fn ghat12(r: &Vector3<f64>, th: &Vector3<f64>, i: usize, j: usize) -> (f64, f64) {
        (th[i] * r[j] + th[j] * r[i], th[i] * th[j])
    }

    /// First-order coefficient of `∂_i∂_j[(e^{iκs} − 1)/s³]` assembled term by
    /// term from `κ̂₀, κ̂₁` (inverse distance powers), `β₀, β₁` and `K₀, K₁`.
    pub fn r1(kappa: C64, r: &Vector3<f64>, th: &Vector3<f64>, i: usize, j: usize) -> C64 {
        let rn = r.norm();
        let c0 = |m: i32| rn.powi(m);
        let kh0 = |m: i32| 1.0 / c0(m);
        let kh1 = |m: i32| -c1(m, r, th) / (c0(m) * c0(m));
        let a0 = r[i] * r[j];
        let a1 = th[i] * r[j] + th[j] * r[i];
        let b0 = |m: i32| a0 * kh0(m);
        let b1 = |m: i32| a0 * kh1(m) + a1 * kh0(m);
        let d = if i == j { 1.0 } else { 0.0 };
        let l = kappa;
        let k0 = (I * l * rn).exp();
        let k1v = k1(l, r, th);
        let bracket0 = I * l * d * kh0(4) - 3.0 * d * kh0(5) - l * l * b0(5) - 7.0 * I * l * b0(6) + 15.0 * b0(7);
        let bracket1 = I * l * d * kh1(4) - 3.0 * d * kh1(5) - l * l * b1(5) - 7.0 * I * l * b1(6) + 15.0 * b1(7);
        bracket0 * k1v + bracket1 * k0 + 3.0 * d * kh1(5) - 15.0 * b1(7)
    }
}

/// All coefficient tables at one node pair, orders `0..=N_MAX`.
#[derive(Clone, Debug)]
pub struct KernelSeries {
    /// `c^(m)` for `m = 1..=7` (index `m − 1`).
    pub c: Vec<Series<FULL>>,
    pub k: Series<FULL>,
    /// `T^(m)` for `m = 1..=7` (index `m − 1`).
    pub t: Vec<Series<FULL>>,
    /// `R^(ij)` for the unit-power profile `(e^{iκs} − 1)/s`.
    pub r: Tensor<FULL>,
    pub ghat: Tensor<FULL>,
    /// `T̂` for `m = 3`.
    pub that: Tensor<FULL>,
    pub e: Tensor<FULL>,
    pub gamma: Tensor<FULL>,
}

impl KernelSeries {
    pub fn new(kappa: C64, pair: &PairGeometry<FULL>) -> Result<Self> {
        let c = (1..=7).map(|m| pair.distance_power(m)).collect::<Result<Vec<_>>>()?;
        let t = (1..=7).map(|m| pair.t_series(kappa, m)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            c,
            k: pair.exp_phase(kappa)?,
            t,
            r: pair.r_series(kappa, 1)?,
            ghat: pair.ghat(),
            that: pair.that(3)?,
            e: pair.e_series(kappa)?,
            gamma: pair.gamma(kappa)?,
        })
    }

    /// `Γ^(n)` for `n ≤ order`.
    pub fn gamma_orders(&self, order: usize) -> Result<Vec<[[C64; 3]; 3]>> {
        if order > N_MAX {
            return Err(Error::OrderTooHigh { requested: order, max: N_MAX });
        }
        Ok((0..=order)
            .map(|n| {
                let mut g = [[C64::new(0.0, 0.0); 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        g[i][j] = self.gamma[i][j].c[n];
                    }
                }
                g
            })
            .collect())
    }
}

/// `Γ^(n)` for `n ≤ order` at a node pair (surface element included).
pub fn gamma_series(
    kappa: C64,
    x: &PerturbedNode,
    y: &PerturbedNode,
    kind: JacobianKind,
    order: usize,
) -> Result<Vec<[[C64; 3]; 3]>> {
    if order > N_MAX {
        return Err(Error::OrderTooHigh { requested: order, max: N_MAX });
    }
    let pair = PairGeometry::<FULL>::new(x, y, kind);
    let g = pair.gamma(kappa)?;
    Ok((0..=order)
        .map(|n| {
            let mut m = [[C64::new(0.0, 0.0); 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    m[i][j] = g[i][j].c[n];
                }
            }
            m
        })
        .collect())
}

/// Writes `Γ^(n)` coefficients as CSV rows `i,j,n,re,im,x-index,y-index`.
pub fn write_coefficient_csv<W: Write>(
    out: W,
    entries: &[(usize, usize, Vec<[[C64; 3]; 3]>)],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["i", "j", "n", "re", "im", "x-index", "y-index"])?;
    for (xi, yi, orders) in entries {
        for (n, g) in orders.iter().enumerate() {
            for i in 0..3 {
                for j in 0..3 {
                    w.write_record([
                        (i + 1).to_string(),
                        (j + 1).to_string(),
                        n.to_string(),
                        format!("{:.17e}", g[i][j].re),
                        format!("{:.17e}", g[i][j].im),
                        xi.to_string(),
                        yi.to_string(),
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::stokeslet_kappa;

    fn pair() -> PairGeometry<FULL> {
        PairGeometry::bare(Vector3::new(0.6, -0.3, 0.45), Vector3::new(0.2, 0.35, -0.15))
    }

    #[test]
    fn order_zero_gamma_is_stokeslet() {
        let p = pair();
        let kappa = C64::new(3.1, 0.0);
        let g = p.gamma(kappa).unwrap();
        let direct = stokeslet_kappa(kappa, &p.r).unwrap().gamma;
        for i in 0..3 {
            for j in 0..3 {
                assert!((g[i][j].c[0] - direct[i][j]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn gamma_routes_agree() {
        let p = pair();
        for kappa in [C64::new(2.0, 0.0), C64::new(4.5, 0.3)] {
            let a = p.gamma(kappa).unwrap();
            let b = p.gamma_structured(kappa).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    for n in 0..FULL {
                        let (x, y) = (a[i][j].c[n], b[i][j].c[n]);
                        assert!((x - y).norm() < 1e-10 * (1.0 + x.norm()), "{i}{j}{n} {x} {y}");
                    }
                }
            }
        }
    }

    #[test]
    fn r_routes_agree_for_both_powers() {
        let p = pair();
        let kappa = C64::new(2.5, 0.0);
        for pw in [1, 3] {
            let a = p.r_series(kappa, pw).unwrap();
            let b = p.r_series_structured(kappa, pw).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    for n in 0..FULL {
                        let (x, y) = (a[i][j].c[n], b[i][j].c[n]);
                        assert!((x - y).norm() < 1e-9 * (1.0 + x.norm()));
                    }
                }
            }
        }
    }

    #[test]
    fn closed_forms_match_engine() {
        let p = pair();
        let kappa = C64::new(1.7, 0.0);
        for m in 1..=7 {
            let c = p.distance_power(m).unwrap();
            assert!((c.c[1].re - closed::c1(m, &p.r, &p.theta)).abs() < 1e-13);
            assert!((c.c[2].re - closed::c2(m, &p.r, &p.theta)).abs() < 1e-13);
            let t = p.t_series(kappa, m).unwrap();
            assert!((t.c[1] - closed::t1(kappa, m, &p.r, &p.theta)).norm() < 1e-13);
        }
        let k = p.exp_phase(kappa).unwrap();
        assert!((k.c[1] - closed::k1(kappa, &p.r, &p.theta)).norm() < 1e-13);
        let e = p.e_series(kappa).unwrap();
        let g = p.ghat();
        let r3 = p.r_series(kappa, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((e[i][j].c[0] - closed::e0(kappa, &p.r, i, j)).norm() < 1e-13);
                let (g1, g2) = closed::ghat12(&p.r, &p.theta, i, j);
                assert!((g[i][j].c[1].re - g1).abs() < 1e-15);
                assert!((g[i][j].c[2].re - g2).abs() < 1e-15);
                let r1 = closed::r1(kappa, &p.r, &p.theta, i, j);
                assert!((r3[i][j].c[1] - r1).norm() < 1e-9 * (1.0 + r1.norm()));
            }
        }
    }

    #[test]
    fn even_powers_terminate() {
        let p = pair();
        for m in [2, 4, 6] {
            let c = p.distance_power(m).unwrap();
            for n in (m as usize + 1)..FULL {
                assert!(c.c[n].norm() < 1e-13);
            }
        }
    }

    #[test]
    fn coincident_points_rejected() {
        let p = PairGeometry::<FULL>::bare(Vector3::zeros(), Vector3::new(1.0, 0.0, 0.0));
        assert!(matches!(p.distance_power(1), Err(Error::CoincidentPoints)));
        assert!(matches!(p.gamma(C64::new(1.0, 0.0)), Err(Error::CoincidentPoints)));
    }
}
