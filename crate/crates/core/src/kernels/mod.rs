//! The oscillatory Stokeslet of `−Δv + ∇p − λv = δ e_i`, its pressure vector,
//! and Taylor expansions of both in the perturbation amplitude.
//!
//! With `s = |r|`, `z = iκs` and phase rate κ (normally `κ = √λ`),
//!
//! ```text
//! Γ_ij = (1 / 4πs) [ a(z) δ_ij + b(z) r_i r_j / s² ],   P_i = r_i / (4π s³),
//! a(z) = e^z − h(z),  b(z) = −e^z + 3 h(z),  h(z) = (e^z (z − 1) + 1) / z²,
//! ```
//!
//! which equals `(1/4π)[δ_ij e^{iκs}/s + κ⁻² ∂_i∂_j (e^{iκs} − 1)/s]` and tends to
//! the static Stokeslet `(δ_ij/s + r_i r_j/s³)/(8π)` as κ → 0.

pub mod expansion;

use crate::{Error, Result, C64};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub use expansion::{KernelSeries, PairGeometry};

/// Separations below this are rejected as singular.
pub const SINGULAR_CUTOFF: f64 = 1e-14;

/// Below this |z| the function h(z) is summed from its Taylor series.
const TAYLOR_RADIUS: f64 = 0.2;

/// Spectral parameter λ with the wavenumber `k = √λ` on the principal branch.
/// For Im λ ≥ 0 this is the branch with Im k ≥ 0; elsewhere it is its analytic
/// continuation across the positive real axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralParam {
    pub lambda: C64,
    pub k: C64,
}

impl SpectralParam {
    pub fn new(lambda: C64) -> Self {
        Self { lambda, k: lambda.sqrt() }
    }

    pub fn real(lambda: f64) -> Self {
        Self::new(C64::new(lambda, 0.0))
    }

    /// Phase rate κ used in `e^{iκ|x|}`.
    pub fn kappa(&self, rate: PhaseRate) -> C64 {
        match rate {
            PhaseRate::Sqrt => self.k,
            PhaseRate::Literal => self.lambda,
        }
    }
}

/// Phase rate of the oscillatory factor: `√λ` (physical) or `λ` as printed in
/// the source formula. The literal choice yields the Stokeslet at parameter λ².
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseRate {
    #[default]
    Sqrt,
    Literal,
}

/// Stokeslet matrix and pressure vector at one separation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelValue {
    pub gamma: [[C64; 3]; 3],
    pub pressure: [f64; 3],
}

/// Taylor coefficients of h(z) = Σ_{n≥2} (n − 1) z^{n−2} / n!.
pub(crate) fn h_taylor(terms: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(terms);
    let mut fact = 2.0;
    for n in 2..terms + 2 {
        if n > 2 {
            fact *= n as f64;
        }
        out.push(C64::new((n - 1) as f64 / fact, 0.0));
    }
    out
}

fn h_of(z: C64) -> C64 {
    if z.norm() < TAYLOR_RADIUS {
        let coeffs = h_taylor(16);
        coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c)
    } else {
        (z.exp() * (z - 1.0) + 1.0) / (z * z)
    }
}

/// The scalar profiles `(a(z), b(z))`.
pub fn ab(z: C64) -> (C64, C64) {
    let e = z.exp();
    let h = h_of(z);
    (e - h, -e + 3.0 * h)
}

/// Pressure vector `P(r) = r / (4π|r|³)`.
pub fn pressure(r: &Vector3<f64>) -> Result<[f64; 3]> {
    let s = r.norm();
    if s < SINGULAR_CUTOFF {
        return Err(Error::SingularPoint(s));
    }
    let f = 1.0 / (4.0 * PI * s * s * s);
    Ok([r.x * f, r.y * f, r.z * f])
}

/// Stokeslet with an explicit phase rate κ.
pub fn stokeslet_kappa(kappa: C64, r: &Vector3<f64>) -> Result<KernelValue> {
    let s = r.norm();
    if s < SINGULAR_CUTOFF {
        return Err(Error::SingularPoint(s));
    }
    let (a, b) = ab(C64::new(0.0, 1.0) * kappa * s);
    let pref = 1.0 / (4.0 * PI * s);
    let mut gamma = [[C64::new(0.0, 0.0); 3]; 3];
    let u = r / s;
    for i in 0..3 {
        for j in 0..3 {
            let d = if i == j { a } else { C64::new(0.0, 0.0) };
            gamma[i][j] = (d + b * (u[i] * u[j])) * pref;
        }
    }
    Ok(KernelValue { gamma, pressure: pressure(r)? })
}

/// Upper triangle `(11, 12, 13, 22, 23, 33)` of the Stokeslet with phase rate κ.
pub(crate) fn stokeslet_upper(kappa: C64, r: &Vector3<f64>) -> Result<[C64; 6]> {
    let s = r.norm();
    if s < SINGULAR_CUTOFF {
        return Err(Error::SingularPoint(s));
    }
    let (a, b) = ab(C64::new(0.0, 1.0) * kappa * s);
    let pref = 1.0 / (4.0 * PI * s);
    let u = r / s;
    let a = a * pref;
    let b = b * pref;
    Ok([
        a + b * (u.x * u.x),
        b * (u.x * u.y),
        b * (u.x * u.z),
        a + b * (u.y * u.y),
        b * (u.y * u.z),
        a + b * (u.z * u.z),
    ])
}

/// Stokeslet `Γ(λ, r)` and pressure `P(r)` with κ = √λ.
pub fn stokeslet(param: &SpectralParam, r: &Vector3<f64>) -> Result<KernelValue> {
    stokeslet_kappa(param.k, r)
}

/// Static Stokeslet `(δ_ij/|r| + r_i r_j/|r|³)/(8π)`.
pub fn static_stokeslet(r: &Vector3<f64>) -> [[f64; 3]; 3] {
    let s = r.norm();
    let mut g = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let d = if i == j { 1.0 } else { 0.0 };
            g[i][j] = (d / s + r[i] * r[j] / (s * s * s)) / (8.0 * PI);
        }
    }
    g
}
