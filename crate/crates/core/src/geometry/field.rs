//! Scalar perturbation amplitudes ρ with hand-coded ambient derivatives.

use crate::{Error, Result};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// Catalog of analytic perturbation fields. Each is defined on all of ℝ³ \ {0}
/// so that gradients and Hessians are ambient quantities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PerturbationField {
    Constant { value: f64 },
    X3 { amplitude: f64 },
    X3Squared { amplitude: f64 },
    /// `amplitude · exp((x̂·c − 1)/width²)` with `c` the unit vector at polar
    /// angle `theta0` and azimuth `phi0`.
    TrigBump { amplitude: f64, theta0: f64, phi0: f64, width: f64 },
}

impl Default for PerturbationField {
    fn default() -> Self {
        PerturbationField::Constant { value: 1.0 }
    }
}

impl PerturbationField {
    pub fn zero() -> Self {
        PerturbationField::Constant { value: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = match *self {
            PerturbationField::Constant { value } => value.is_finite(),
            PerturbationField::X3 { amplitude } | PerturbationField::X3Squared { amplitude } => amplitude.is_finite(),
            PerturbationField::TrigBump { amplitude, theta0, phi0, width } => {
                [amplitude, theta0, phi0].iter().all(|v| v.is_finite()) && width > 0.0
            }
        };
        if finite {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("perturbation field parameters out of range: {self:?}")))
        }
    }

    /// True when the field vanishes identically.
    pub fn is_zero(&self) -> bool {
        match *self {
            PerturbationField::Constant { value } => value == 0.0,
            PerturbationField::X3 { amplitude } | PerturbationField::X3Squared { amplitude } => amplitude == 0.0,
            PerturbationField::TrigBump { amplitude, .. } => amplitude == 0.0,
        }
    }

    fn bump_axis(theta0: f64, phi0: f64) -> Vector3<f64> {
        Vector3::new(theta0.sin() * phi0.cos(), theta0.sin() * phi0.sin(), theta0.cos())
    }

    pub fn value(&self, x: &Vector3<f64>) -> f64 {
        self.jet(x).0
    }

    pub fn gradient(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.jet(x).1
    }

    pub fn hessian(&self, x: &Vector3<f64>) -> Matrix3<f64> {
        self.jet(x).2
    }

    /// Value, ambient gradient and ambient Hessian at `x`.
    pub fn jet(&self, x: &Vector3<f64>) -> (f64, Vector3<f64>, Matrix3<f64>) {
        match *self {
            PerturbationField::Constant { value } => (value, Vector3::zeros(), Matrix3::zeros()),
            PerturbationField::X3 { amplitude } => (amplitude * x.z, Vector3::new(0.0, 0.0, amplitude), Matrix3::zeros()),
            PerturbationField::X3Squared { amplitude } => {
                let mut h = Matrix3::zeros();
                h[(2, 2)] = 2.0 * amplitude;
                (amplitude * x.z * x.z, Vector3::new(0.0, 0.0, 2.0 * amplitude * x.z), h)
            }
            PerturbationField::TrigBump { amplitude, theta0, phi0, width } => {
                let c = Self::bump_axis(theta0, phi0);
                let r = x.norm();
                let xc = x.dot(&c);
                let g = xc / r;
                let dg = c / r - xc / r.powi(3) * x;
                let hg = -(c * x.transpose() + x * c.transpose()) / r.powi(3) - xc / r.powi(3) * Matrix3::identity()
                    + 3.0 * xc / r.powi(5) * (x * x.transpose());
                let w2 = width * width;
                let f = amplitude * ((g - 1.0) / w2).exp();
                let f1 = f / w2;
                let f2 = f / (w2 * w2);
                (f, f1 * dg, f2 * dg * dg.transpose() + f1 * hg)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trig_bump_derivatives_match_finite_differences() {
        let f = PerturbationField::TrigBump { amplitude: 0.7, theta0: 0.8, phi0: 0.3, width: 0.6 };
        let x = Vector3::new(0.5, 0.2, 0.9);
        let (_, g, h) = f.jet(&x);
        let eps = 1e-5;
        for k in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += eps;
            xm[k] -= eps;
            assert!(((f.value(&xp) - f.value(&xm)) / (2.0 * eps) - g[k]).abs() < 1e-8);
            let col = (f.gradient(&xp) - f.gradient(&xm)) / (2.0 * eps);
            for i in 0..3 {
                assert!((col[i] - h[(i, k)]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn polynomial_fields() {
        let x = Vector3::new(0.1, 0.2, 0.5);
        assert_eq!(PerturbationField::X3 { amplitude: 2.0 }.value(&x), 1.0);
        assert_eq!(PerturbationField::X3Squared { amplitude: 2.0 }.value(&x), 0.5);
        assert!(PerturbationField::zero().is_zero());
    }
}
