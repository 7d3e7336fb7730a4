//! Real orthonormal spherical harmonics without the Condon–Shortley phase.
//!
//! `Y_{l,0} = Q_l^0`, `Y_{l,m} = √2 Q_l^m Re (x + iy)^m` and
//! `Y_{l,−m} = √2 Q_l^m Im (x + iy)^m` for `m > 0`, where
//! `Q_l^m = P̄_l^m(z) / sin^m θ` is a polynomial in `z`.

use faer::Mat;
use nalgebra::Vector3;
use std::f64::consts::PI;

/// Number of harmonics of degree at most `p`.
pub fn basis_len(p: usize) -> usize {
    (p + 1) * (p + 1)
}

/// Position of `Y_{l,m}` in the basis.
pub fn index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

/// Evaluates all harmonics of degree ≤ `p` at the unit vector `s` into `out`.
pub fn eval_into(p: usize, s: &Vector3<f64>, out: &mut [f64]) {
    debug_assert!(out.len() >= basis_len(p));
    let (x, y, z) = (s.x, s.y, s.z);
    // (x + iy)^m
    let mut cr = 1.0;
    let mut ci = 0.0;
    let mut qmm = 1.0 / (4.0 * PI).sqrt();
    for m in 0..=p {
        if m > 0 {
            qmm *= ((2 * m + 1) as f64 / (2 * m) as f64).sqrt();
            let (nr, ni) = (cr * x - ci * y, cr * y + ci * x);
            cr = nr;
            ci = ni;
        }
        let mf = m as f64;
        let mut q_prev = 0.0;
        let mut q = qmm;
        for l in m..=p {
            if l == m + 1 {
                q_prev = q;
                q = (2.0 * mf + 3.0).sqrt() * z * qmm;
            } else if l > m + 1 {
                let lf = l as f64;
                let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
                let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
                let next = a * (z * q - b * q_prev);
                q_prev = q;
                q = next;
            }
            if m == 0 {
                out[index(l, 0)] = q;
            } else {
                let f = std::f64::consts::SQRT_2 * q;
                out[index(l, m as i64)] = f * cr;
                out[index(l, -(m as i64))] = f * ci;
            }
        }
    }
}

/// Matrix of harmonics, one row per direction.
pub fn matrix(p: usize, dirs: &[Vector3<f64>]) -> Mat<f64> {
    let nb = basis_len(p);
    let mut out = Mat::<f64>::zeros(dirs.len(), nb);
    let mut row = vec![0.0; nb];
    for (i, s) in dirs.iter().enumerate() {
        eval_into(p, s, &mut row);
        for (b, v) in row.iter().enumerate() {
            out[(i, b)] = *v;
        }
    }
    out
}

/// Order `m` of each basis index.
pub fn orders(p: usize) -> Vec<i64> {
    let mut out = Vec::with_capacity(basis_len(p));
    for l in 0..=p as i64 {
        for m in -l..=l {
            out.push(m);
        }
    }
    out
}
