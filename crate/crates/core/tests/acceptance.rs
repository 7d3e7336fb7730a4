//! Acceptance suite: one line per criterion with the measured values, the
//! bound, and the wall time against its budget.
//!
//! The process exits 0 even when criteria fail so that the suite reports
//! every line; set `ACCEPTANCE_STRICT=1` to turn failures into a non-zero exit.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::Vector3;
use stokes_shape_spectra::geometry::{JacobianKind, PerturbationField, Surface};
use stokes_shape_spectra::layer::{Discretization, LayerOptions};
use stokes_shape_spectra::oracles::{bessel_zero, fd_eigen_slope, fit_order, SlopeFit};
use stokes_shape_spectra::perturbation::{
    contour_shift, dilation_v1, eigenfunction_correction, eigenpressure_correction, lambda_series, winding_multiplicity, Contour,
    FieldOptions, LambdaSeries,
};
use stokes_shape_spectra::spectral::{
    boundary_trace_residual, find_eigen, mesh_extrapolate, probe_points, reconstruct_eigenpair, refine_cluster,
};
use stokes_shape_spectra::validation::{
    dilation_coefficients, eigenpair_fd_residuals, field_deviation, jacobian_identity_error, kernel_truncation_fits,
    normal_truncation_fit, operator_truncation_fit, stokeslet_pde_residual, surface_series_error, EIGENPAIR_FD_STEP,
};
use stokes_shape_spectra::Result;

const SEED: u64 = 7;
const J11_BRACKET: (f64, f64) = (20.0, 20.5);
const J21_BRACKET: (f64, f64) = (33.0, 33.5);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

fn criterion(n: usize, title: &str, budget: Duration, f: impl FnOnce() -> Result<Outcome>) -> bool {
    let t = Instant::now();
    let r = f();
    let elapsed = t.elapsed();
    let in_budget = elapsed <= budget;
    let (passed, detail) = match r {
        Ok(o) => (o.passed && in_budget, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    println!(
        "criterion {n:>2} {} {title}: {detail}; time {:.1} s (budget {} s)",
        if passed { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    passed
}

fn sphere() -> Surface {
    Surface::Sphere { radius: 1.0 }
}

fn disc(surface: Surface, field: PerturbationField, nodes: usize) -> Result<Discretization> {
    Discretization::new(surface, field, 0.0, LayerOptions::for_nodes(nodes))
}

fn slope_text(name: &str, fit: &Result<SlopeFit>) -> String {
    match fit {
        Ok(f) => format!("{name} slope {:.3} (r {:.4})", f.slope, f.correlation),
        Err(e) => format!("{name} {e}"),
    }
}

fn slope_ok(fit: &Result<SlopeFit>, min: f64) -> bool {
    match fit {
        Ok(f) => f.at_least(min),
        Err(stokes_shape_spectra::Error::DegenerateData(_)) => true,
        Err(_) => false,
    }
}

fn c1_kernel_pde() -> Result<Outcome> {
    let (pde, div) = stokeslet_pde_residual(SEED, 10, 5)?;
    outcome(pde <= 1e-5 && div <= 1e-5, format!("PDE residual {pde:.2e} <= 1e-5, divergence {div:.2e} <= 1e-5"))
}

fn c2_geometry() -> Result<Outcome> {
    let jac = jacobian_identity_error(SEED, 200);
    let series = [
        surface_series_error(&sphere(), &PerturbationField::X3Squared { amplitude: 1.0 }, SEED),
        surface_series_error(&Surface::Ellipsoid { a: 1.0, b: 0.9, c: 1.2 }, &PerturbationField::X3 { amplitude: 1.0 }, SEED),
        surface_series_error(&Surface::BumpySphere { amplitude: 0.1 }, &PerturbationField::Constant { value: 1.0 }, SEED),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let d = dilation_coefficients();
    let derr = d.iter().zip([1.0, 3.0, 3.0, 1.0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    outcome(
        jac <= 1e-12 && series <= 1e-12 && derr <= 1e-12,
        format!("det(I+dM) {jac:.1e}, series identity {series:.1e}, dilation coefficients {d:?}"),
    )
}

fn c3_truncation() -> Result<Outcome> {
    let surf = Surface::Ellipsoid { a: 1.0, b: 0.9, c: 1.2 };
    let field = PerturbationField::X3Squared { amplitude: 1.0 };
    let normal = normal_truncation_fit(&surf, &field, SEED);
    let (k1, k2) = kernel_truncation_fits(&surf, &field, JacobianKind::Exact, SEED)?;
    let op = operator_truncation_fit(&surf, &field, LayerOptions::for_nodes(300), 20.0);
    let passed = slope_ok(&normal, 1.9) && slope_ok(&k1, 1.9) && slope_ok(&op, 1.9) && slope_ok(&k2, 2.9);
    outcome(
        passed,
        format!(
            "{}, {}, {}, {} (bounds 1.9/1.9/1.9/2.9, r >= 0.99)",
            slope_text("normal", &normal),
            slope_text("kernel order-1", &k1),
            slope_text("operator", &op),
            slope_text("kernel order-2", &k2)
        ),
    )
}

fn c4_ball_spectrum() -> Result<Outcome> {
    let mut detail = Vec::new();
    let mut passed = true;
    for (bracket, n, expected_mult) in [(J11_BRACKET, 1, 3), (J21_BRACKET, 2, 5)] {
        let oracle = bessel_zero(n, 1)?.powi(2);
        let mut values = Vec::new();
        let mut mult = 0;
        for nodes in [300, 600, 1200] {
            let r = find_eigen(&disc(sphere(), PerturbationField::zero(), nodes)?, bracket)?;
            values.push(r.lambda);
            mult = r.multiplicity;
        }
        let (lambda, step) = mesh_extrapolate(&values)?;
        let rel = ((lambda - oracle) / oracle).abs();
        passed &= rel <= 1e-3 && mult == expected_mult;
        detail.push(format!(
            "j{n}1^2: {lambda:.8} vs {oracle:.8} rel {rel:.1e} <= 1e-3 (last mesh step {step:.1e}), multiplicity {mult} (expected {expected_mult})"
        ));
    }
    outcome(passed, detail.join("; "))
}

fn c5_dilation() -> Result<Outcome> {
    let base = disc(sphere(), PerturbationField::Constant { value: 1.0 }, 300)?;
    let l0 = find_eigen(&base, J11_BRACKET)?.lambda;
    let mut dev = 0.0_f64;
    for d in [0.01, 0.05, 0.1] {
        let s = (1.0 + d) * (1.0 + d);
        let l = find_eigen(&base.with_delta(d)?, (J11_BRACKET.0 / s, J11_BRACKET.1 / s))?.lambda;
        dev = dev.max((l * s - l0).abs() / l0);
    }
    let series = lambda_series(&base, &Contour::new(l0, 2.0, 32)?)?;
    let (r1, r2) = (series.lambda1 / series.lambda0, series.lambda2 / series.lambda0);
    outcome(
        dev <= 1e-3 && (r1 / -2.0 - 1.0).abs() <= 0.01 && (r2 / 3.0 - 1.0).abs() <= 0.05,
        format!("max |l(d)(1+d)^2 - l0|/l0 {dev:.1e} <= 1e-3, l1/l0 {r1:.6} (-2 +- 1%), l2/l0 {r2:.6} (3 +- 5%)"),
    )
}

/// Sphere with ρ = x₃²: shared between the contour and generic-series criteria.
struct GenericCase {
    base: Discretization,
    center: f64,
    contour: Contour,
    series: LambdaSeries,
}

fn generic_case() -> Result<GenericCase> {
    let base = disc(sphere(), PerturbationField::X3Squared { amplitude: 1.0 }, 300)?;
    let center = find_eigen(&base, J11_BRACKET)?.lambda;
    let contour = Contour::new(center, 2.0, 32)?;
    let series = lambda_series(&base, &contour)?;
    Ok(GenericCase { base, center, contour, series })
}

fn c6_contour(case: &GenericCase) -> Result<Outcome> {
    let m = case.series.multiplicity;
    let d = case.base.with_delta(1e-2)?;
    let shift = contour_shift(&d, &case.contour)?;
    let direct: f64 = refine_cluster(&d, case.center, m)?.iter().map(|l| l - case.center).sum();
    let rel = ((shift.re - direct) / direct).abs();
    let w: Vec<usize> =
        [0.8, 1.2].iter().map(|f| winding_multiplicity(&case.base, &case.contour.scaled(*f))).collect::<Result<_>>()?;
    outcome(
        rel <= 1e-3 && w.iter().all(|&k| k == m),
        format!(
            "contour shift {:.8} vs direct {direct:.8} rel {rel:.1e} <= 1e-3 (imaginary ratio {:.1e}), winding {m} at r, {} at 0.8r, {} at 1.2r",
            shift.re,
            (shift.im / shift.re).abs(),
            w[0],
            w[1]
        ),
    )
}

fn c7_generic_series(case: &GenericCase) -> Result<Outcome> {
    let m = case.series.multiplicity;
    let mean = |d: f64| -> Result<f64> { Ok(refine_cluster(&case.base.with_delta(d)?, case.center, m)?.iter().sum::<f64>() / m as f64) };
    let fd = fd_eigen_slope(mean, 1e-3)?;
    let rel = ((case.series.lambda1 - fd.lambda1) / fd.lambda1).abs();
    let (mut e1, mut e2) = (Vec::new(), Vec::new());
    for d in [0.02, 0.01, 0.005, 0.0025] {
        let v = mean(d)?;
        e1.push((d, (v - fd.lambda0 - d * case.series.lambda1).abs()));
        e2.push((d, (v - fd.lambda0 - d * case.series.lambda1 - d * d * case.series.lambda2).abs()));
    }
    let (f1, f2) = (fit_order(&e1), fit_order(&e2));
    outcome(
        rel <= 0.02 && slope_ok(&f1, 1.9) && slope_ok(&f2, 2.7),
        format!(
            "l1 {:.6} vs FD {:.6} rel {rel:.1e} <= 2e-2, {} >= 1.9, {} >= 2.7",
            case.series.lambda1,
            fd.lambda1,
            slope_text("order-1", &f1),
            slope_text("order-2", &f2)
        ),
    )
}

fn c8_eigenpair() -> Result<Outcome> {
    let base = disc(sphere(), PerturbationField::zero(), 300)?;
    let r = find_eigen(&base, J11_BRACKET)?;
    let trace = boundary_trace_residual(&base, r.lambda, &r.phi)?;
    let probes = probe_points(&base, 5, SEED);
    let pair = reconstruct_eigenpair(&base, &r, &probes)?;
    let (pde, div) = eigenpair_fd_residuals(&pair, &probes, EIGENPAIR_FD_STEP)?;
    outcome(
        trace <= 1e-3 && pde <= 1e-3 && div <= 1e-4,
        format!("eigen-equation {pde:.1e} <= 1e-3, divergence {div:.1e} <= 1e-4, boundary trace {trace:.1e} <= 1e-3"),
    )
}

fn c9_fields() -> Result<Outcome> {
    let ball = disc(sphere(), PerturbationField::Constant { value: 1.0 }, 300)?;
    let l0 = find_eigen(&ball, J11_BRACKET)?.lambda;
    let probes = probe_points(&ball, 5, SEED);
    let opts = FieldOptions::default();
    let corr = eigenfunction_correction(&ball, (l0 - opts.half_width, l0 + opts.half_width), &probes, &opts)?;
    let oracle = dilation_v1(&corr, opts.ball_fraction * ball.surface.inner_radius(&ball.grid))?;
    let dil = field_deviation(&corr.v1, &oracle);
    let pc = eigenpressure_correction(&corr, Vector3::zeros())?;
    let vmax = corr.v0.iter().map(|v| v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()).fold(0.0, f64::max);
    let p1 = pc.p1.iter().map(|c| c.norm()).fold(0.0, f64::max) / vmax;

    let ell = disc(Surface::Ellipsoid { a: 1.0, b: 0.9, c: 1.2 }, PerturbationField::X3Squared { amplitude: 1.0 }, 300)?;
    let gopts = FieldOptions { half_width: 0.5, ..FieldOptions::default() };
    let gprobes = probe_points(&ell, 5, SEED);
    let gcorr = eigenfunction_correction(&ell, (18.25, 19.25), &gprobes, &gopts)?;
    let slope = gcorr.order.as_ref().map(|f| (f.slope, f.correlation));
    let gpc = eigenpressure_correction(&gcorr, Vector3::zeros())?;
    let slope_pass = slope.is_some_and(|(s, r)| (1.9..=2.1).contains(&s) && r >= 0.99);
    outcome(
        dil <= 0.02 && pc.p0_spread <= 1e-3 && p1 <= 1e-3 && slope_pass && gpc.disagreement <= 0.05,
        format!(
            "ball: v1 vs dilation {dil:.1e} <= 2e-2, p0 spread {:.1e} <= 1e-3, |p1|/|v0| {p1:.1e} <= 1e-3; ellipsoid: order slope {} in [1.9, 2.1], p1 dual agreement {:.1e} <= 5e-2",
            pc.p0_spread,
            slope.map_or("none".into(), |(s, r)| format!("{s:.3} (r {r:.4})")),
            gpc.disagreement
        ),
    )
}

const DETERMINISM_CONFIG: &str = r#"seed = 11

[surface]
kind = "sphere"
radius = 1.0

[rho]
kind = "x3_squared"
amplitude = 1.0

[mesh]
nodes = 72

[scan]
lambda_min = 18.0
lambda_max = 23.0
step = 0.5

[perturbation]
deltas = [0.02, 0.01, 0.005, 0.0025]
fd_step = 0.001
contour_delta = 0.01
fields = false
probes = 3
"#;

fn payloads(dir: &Path) -> std::io::Result<Vec<(String, Vec<u8>)>> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir)? {
        let e = e?;
        let name = e.file_name().to_string_lossy().into_owned();
        if !e.file_type()?.is_file() {
            continue;
        }
        let mut bytes = std::fs::read(e.path())?;
        if name == "manifest.json" {
            let text = String::from_utf8_lossy(&bytes);
            bytes = text.lines().filter(|l| !l.contains("created_utc")).collect::<Vec<_>>().join("\n").into_bytes();
        }
        out.push((name, bytes));
    }
    out.sort();
    Ok(out)
}

fn c10_determinism() -> Result<Outcome> {
    let tmp = tempfile::tempdir()?;
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, DETERMINISM_CONFIG)?;
    let mut runs = Vec::new();
    for k in 0..2 {
        let out = tmp.path().join(format!("out{k}"));
        let status = Command::new(env!("CARGO_BIN_EXE_stokes-shape-spectra"))
            .args(["full", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .env("RUST_LOG", "warn")
            .stderr(std::process::Stdio::null())
            .status()?;
        runs.push((status.code(), payloads(&out)?));
    }
    let names: Vec<&str> = runs[0].1.iter().map(|(n, _)| n.as_str()).collect();
    let identical = runs[0].1 == runs[1].1;
    let complete = ["scan.csv", "eigens.json", "perturbation.json", "validation.json", "manifest.json"].iter().all(|n| names.contains(n));
    outcome(
        identical && complete && runs[0].0 == runs[1].0,
        format!("{} files byte-identical: {identical}, all artifacts present: {complete}, exit codes {:?}/{:?}", names.len(), runs[0].0, runs[1].0),
    )
}

fn main() {
    let min = |m: u64| Duration::from_secs(60 * m);
    let mut passed = Vec::new();
    passed.push(criterion(1, "kernel PDE residual", Duration::from_secs(5), c1_kernel_pde));
    passed.push(criterion(2, "geometric polynomial identities", Duration::from_secs(1), c2_geometry));
    passed.push(criterion(3, "expansion truncation orders", min(5), c3_truncation));
    passed.push(criterion(4, "ball spectrum oracle", min(30), c4_ball_spectrum));
    passed.push(criterion(5, "dilation exactness", min(20), c5_dilation));
    let t = Instant::now();
    let case = generic_case();
    let setup = t.elapsed();
    match case {
        Ok(case) => {
            passed.push(criterion(6, "contour vs direct", min(10).saturating_sub(setup), || c6_contour(&case)));
            passed.push(criterion(7, "generic-rho series", min(45).saturating_sub(setup), || c7_generic_series(&case)));
        }
        Err(e) => {
            for (n, title) in [(6, "contour vs direct"), (7, "generic-rho series")] {
                println!("criterion {n:>2} FAIL {title}: error: {e}");
                passed.push(false);
            }
        }
    }
    passed.push(criterion(8, "eigenpair residuals", min(5), c8_eigenpair));
    passed.push(criterion(9, "eigenfunction and eigenpressure corrections", min(20), c9_fields));
    passed.push(criterion(10, "determinism", min(30), c10_determinism));
    let n = passed.iter().filter(|p| **p).count();
    println!("acceptance: {n}/{} criteria passed", passed.len());
    if n < passed.len() && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
