//! Solver and perturbation behaviour on a coarse sphere mesh.

use nalgebra::Vector3;
use stokes_shape_spectra::geometry::{PerturbationField, Surface};
use stokes_shape_spectra::layer::{Discretization, LayerOptions};
use stokes_shape_spectra::perturbation::{
    contour_moments, eigenfunction_correction, eigenpressure_correction, lambda_series, Contour, FieldOptions,
};
use stokes_shape_spectra::spectral::{find_eigen, probe_points, refine_cluster};
use stokes_shape_spectra::Error;

const BRACKET: (f64, f64) = (19.5, 21.0);

fn coarse(field: PerturbationField) -> Discretization {
    Discretization::new(Surface::Sphere { radius: 1.0 }, field, 0.0, LayerOptions::for_nodes(72)).unwrap()
}

#[test]
fn dilated_ball_scales_exactly() {
    let base = coarse(PerturbationField::Constant { value: 1.0 });
    let l0 = find_eigen(&base, BRACKET).unwrap();
    assert_eq!(l0.multiplicity, 3);
    let d = 0.05;
    let s = (1.0 + d) * (1.0 + d);
    let l = find_eigen(&base.with_delta(d).unwrap(), (BRACKET.0 / s, BRACKET.1 / s)).unwrap();
    assert!((l.lambda * s - l0.lambda).abs() < 1e-8 * l0.lambda);
}

#[test]
fn empty_bracket_is_reported() {
    let base = coarse(PerturbationField::zero());
    assert!(matches!(find_eigen(&base, (21.5, 23.0)), Err(Error::NoDipInBracket { .. })));
}

#[test]
fn contour_through_an_eigenvalue_is_rejected() {
    let base = coarse(PerturbationField::zero());
    let l0 = find_eigen(&base, BRACKET).unwrap().lambda;
    let contour = Contour::new(l0 - 1.0, 1.0, 32).unwrap();
    assert!(matches!(contour_moments(&base, &contour), Err(Error::ContourThroughEigenvalue { .. })));
}

#[test]
fn zero_field_has_vanishing_coefficients() {
    let base = coarse(PerturbationField::zero());
    let l0 = find_eigen(&base, BRACKET).unwrap().lambda;
    let s = lambda_series(&base, &Contour::new(l0, 2.0, 32).unwrap()).unwrap();
    assert_eq!(s.multiplicity, 3);
    assert!(s.lambda1.abs() < 1e-9 && s.lambda2.abs() < 1e-9, "{s:?}");
}

#[test]
fn split_cluster_mean_tracks_the_series() {
    let base = coarse(PerturbationField::X3Squared { amplitude: 1.0 });
    let l0 = find_eigen(&base, BRACKET).unwrap().lambda;
    let s = lambda_series(&base, &Contour::new(l0, 2.0, 32).unwrap()).unwrap();
    let d = 5e-3;
    let roots = refine_cluster(&base.with_delta(d).unwrap(), l0, s.multiplicity).unwrap();
    assert_eq!(roots.len(), 3);
    let mean = roots.iter().sum::<f64>() / 3.0;
    assert!((mean - l0 - d * s.lambda1 - d * d * s.lambda2).abs() < 1e-5, "{roots:?}");
}

#[test]
fn zero_field_has_vanishing_field_corrections() {
    let base = coarse(PerturbationField::zero());
    let l0 = find_eigen(&base, BRACKET).unwrap().lambda;
    let probes = probe_points(&base, 3, 7);
    let opts = FieldOptions { check_order: false, ..FieldOptions::default() };
    let corr = eigenfunction_correction(&base, (l0 - 1.0, l0 + 1.0), &probes, &opts).unwrap();
    let vmax = corr.v0.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max);
    assert!(corr.v1.iter().flatten().all(|c| c.norm() < 1e-8 * vmax));
    let p = eigenpressure_correction(&corr, Vector3::zeros()).unwrap();
    assert!(p.p1.iter().all(|c| c.norm() < 1e-8 * vmax));
}
