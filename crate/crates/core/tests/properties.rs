//! Property tests for the geometric, kernel, contour and oracle invariants.

use nalgebra::Vector3;
use proptest::prelude::*;
use stokes_shape_spectra::config::RunConfig;
use stokes_shape_spectra::geometry::{
    injectivity_budget, jacobian_det_direct, theta, PerturbationField, PerturbedNode, SphereGrid, Surface,
};
use stokes_shape_spectra::kernels::{static_stokeslet, stokeslet, SpectralParam};
use stokes_shape_spectra::oracles::{bessel_zero, fit_order, richardson_first, richardson_second, spherical_bessel};
use stokes_shape_spectra::perturbation::{winding_from, Contour};
use stokes_shape_spectra::C64;

fn direction() -> impl Strategy<Value = Vector3<f64>> {
    (-1.0..1.0f64, 0.0..std::f64::consts::TAU).prop_map(|(z, phi): (f64, f64)| {
        let s = (1.0 - z * z).sqrt();
        Vector3::new(s * phi.cos(), s * phi.sin(), z)
    })
}

fn surface() -> impl Strategy<Value = Surface> {
    prop_oneof![
        (0.5..2.0f64).prop_map(|radius| Surface::Sphere { radius }),
        (0.7..1.3f64, 0.7..1.3f64, 0.7..1.3f64).prop_map(|(a, b, c)| Surface::Ellipsoid { a, b, c }),
        (0.0..0.15f64).prop_map(|amplitude| Surface::BumpySphere { amplitude }),
    ]
}

fn field() -> impl Strategy<Value = PerturbationField> {
    prop_oneof![
        (-2.0..2.0f64).prop_map(|value| PerturbationField::Constant { value }),
        (-2.0..2.0f64).prop_map(|amplitude| PerturbationField::X3 { amplitude }),
        (-2.0..2.0f64).prop_map(|amplitude| PerturbationField::X3Squared { amplitude }),
        (-1.0..1.0f64, 0.2..2.9f64, 0.0..6.2f64, 0.3..1.0f64).prop_map(|(amplitude, theta0, phi0, width)| {
            PerturbationField::TrigBump { amplitude, theta0, phi0, width }
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn theta_is_antisymmetric(s in surface(), f in field(), a in direction(), b in direction()) {
        let x = PerturbedNode::new(&s, &f, &a);
        let y = PerturbedNode::new(&s, &f, &b);
        prop_assert_eq!(theta(&x, &y), -theta(&y, &x));
    }

    #[test]
    fn surface_element_polynomial_matches_its_coefficients(s in surface(), f in field(), d in direction(), delta in -0.3..0.3f64) {
        let n = PerturbedNode::new(&s, &f, &d);
        let c = n.surface_element_series();
        let sum = c[0] + c[1] * delta + c[2] * delta * delta + c[3] * delta.powi(3);
        prop_assert!((sum - n.jacobian_det_polynomial(delta)).abs() <= 1e-12 * (1.0 + sum.abs()));
        prop_assert!((n.jacobian_det_polynomial(delta) - jacobian_det_direct(&n.m, delta)).abs() <= 1e-12 * (1.0 + sum.abs()));
    }

    #[test]
    fn deformation_is_injective_within_budget(s in surface(), f in field(), frac in -0.99..0.99f64) {
        let grid = SphereGrid::new(5);
        let nodes: Vec<PerturbedNode> = grid.dirs.iter().map(|d| PerturbedNode::new(&s, &f, d)).collect();
        let delta = frac * injectivity_budget(&nodes).min(1.0);
        let images: Vec<Vector3<f64>> = nodes.iter().map(|n| n.psi(delta)).collect();
        for i in 0..images.len() {
            for j in 0..i {
                prop_assert!((images[i] - images[j]).norm() > 1e-9);
            }
        }
    }

    #[test]
    fn stokeslet_is_symmetric_and_even(lambda in 1e-3..50.0f64, d in direction(), r in 0.05..3.0f64) {
        let p = SpectralParam::real(lambda);
        let g = stokeslet(&p, &(d * r)).unwrap().gamma;
        let h = stokeslet(&p, &(-d * r)).unwrap().gamma;
        for i in 0..3 {
            for j in 0..3 {
                prop_assert_eq!(g[i][j], g[j][i]);
                prop_assert!((g[i][j] - h[i][j]).norm() <= 1e-14 * (1.0 + g[i][j].norm()));
            }
        }
    }

    #[test]
    fn contour_quadrature_reproduces_cauchy_integral(center in 1.0..40.0f64, radius in 0.1..2.0f64, t in 0.0..0.6f64, out in 1.5..3.0f64) {
        let c = Contour::new(center, radius, 32).unwrap();
        let inside = C64::new(center + t * radius, 0.0);
        let outside = C64::new(center + out * radius, 0.0);
        let w = c.nodes();
        let i: C64 = w.iter().map(|(l, wk)| wk / (l - inside)).sum();
        let o: C64 = w.iter().map(|(l, wk)| wk / (l - outside)).sum();
        prop_assert!((i - 1.0).norm() < 1e-5, "{}", i);
        prop_assert!(o.norm() < 1e-5, "{}", o);
    }

    #[test]
    fn winding_rounds_near_integers(k in 0usize..9, e in -0.04..0.04f64) {
        prop_assert_eq!(winding_from(C64::new(k as f64 + e, 0.0)).unwrap(), k);
    }

    #[test]
    fn winding_rejects_non_integers(k in 0usize..9, e in 0.1..0.9f64) {
        prop_assert!(winding_from(C64::new(k as f64 + e, 0.0)).is_err());
    }

    #[test]
    fn slope_fit_recovers_power_laws(c in 0.1..10.0f64, k in 0.5..4.0f64) {
        let pts: Vec<(f64, f64)> = [0.1f64, 0.03, 0.01, 0.003, 0.001].iter().map(|&d| (d, c * d.powf(k))).collect();
        let fit = fit_order(&pts).unwrap();
        prop_assert!((fit.slope - k).abs() < 1e-9);
        prop_assert!(fit.correlation > 0.999_999);
    }

    #[test]
    fn richardson_is_exact_on_quartics(a in -3.0..3.0f64, b in -3.0..3.0f64, c in -3.0..3.0f64, d in -3.0..3.0f64, h in 1e-3..1e-1f64) {
        let f = |x: f64| a + b * x + c * x * x + d * x.powi(3) + 0.5 * x.powi(4);
        let d1 = richardson_first(f(-2.0 * h), f(-h), f(h), f(2.0 * h), h);
        let d2 = richardson_second(f(-2.0 * h), f(-h), f(0.0), f(h), f(2.0 * h), h);
        prop_assert!((d1 - b).abs() < 1e-8);
        prop_assert!((d2 - 2.0 * c).abs() < 1e-6);
    }

    #[test]
    fn config_round_trips_through_canonical_form(seed in 0u64..1000, nodes in 18i64..2000, step in 0.05..1.0f64) {
        let mut c = RunConfig::default();
        c.seed = seed;
        c.mesh.nodes = nodes;
        c.scan.step = step;
        prop_assert_eq!(RunConfig::parse(&c.canonical()).unwrap(), c);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn bessel_zeros_are_zeros(n in 0usize..7, s in 1usize..4) {
        let z = bessel_zero(n, s).unwrap();
        prop_assert!(spherical_bessel(n, z).abs() < 1e-10);
        if s > 1 {
            prop_assert!(bessel_zero(n, s - 1).unwrap() < z);
        }
    }
}

#[test]
fn stokeslet_has_static_limit() {
    let r = Vector3::new(0.3, -0.4, 0.5);
    let g = stokeslet(&SpectralParam::real(1e-6), &r).unwrap().gamma;
    let s = static_stokeslet(&r);
    for i in 0..3 {
        for j in 0..3 {
            assert!((g[i][j].re - s[i][j]).abs() <= 1e-4 * s[i][j].abs().max(1e-3), "{i}{j}: {} vs {}", g[i][j], s[i][j]);
        }
    }
}

#[test]
fn zero_perturbation_leaves_nodes_fixed() {
    let n = PerturbedNode::new(&Surface::Ellipsoid { a: 1.0, b: 0.9, c: 1.2 }, &PerturbationField::zero(), &Vector3::new(0.0, 0.6, 0.8));
    assert_eq!(n.psi(0.3), n.x());
    assert_eq!(n.surface_element_series(), [1.0, 0.0, 0.0, 0.0]);
}
