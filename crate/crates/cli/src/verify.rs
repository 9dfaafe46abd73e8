//! The cross-check invariant suite: named, independently evaluated facts
//! about the builtin models, each with a measured residual and a threshold.
//! A clean build passes every invariant; `--inject-fault curvature-sign`
//! corrupts the sign of the curvature entering one closed-form oracle, which
//! must make the suite fail with that invariant's name.

use std::f64::consts::{FRAC_PI_2, PI};

use lorentzkit::config::{parse_metric_spec, MetricSpec};
use lorentzkit::frames::{complete_frame, connection_gap, measure_assumption_bounds, Observer, OrthoFrame};
use lorentzkit::geodesic::{exp_map, exp_map_inverse, integrate_geodesic, velocity_norm2};
use lorentzkit::jacobi::{first_conjugate_point, integrate_jacobi};
use lorentzkit::cone::{comparison_ratio_curve, localize_null_cone, ConeOrientation, ConeSpec};
use lorentzkit::ode::OdeOptions;
use lorentzkit::radius::{
    detect_short_loops, injectivity_radius, theorem_foliated_bound, theorem_main_bound,
    BoundConstants,
};
use lorentzkit::spacetime::{christoffel_at, metric_at, riemann_at};
use lorentzkit::Result;

use crate::bundle::{f, i, s, Bundle, Table};
use crate::commands::{eta, quad};
use crate::CliError;

/// Deliberate corruption injected into one oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    None,
    /// Flip the curvature sign in the closed-form Jacobi oracle.
    CurvatureSign,
}

struct Check {
    measure: f64,
    threshold: f64,
    note: String,
}

fn ck(measure: f64, threshold: f64, note: impl Into<String>) -> Result<Check> {
    Ok(Check { measure, threshold, note: note.into() })
}

fn frame_at(spec: &MetricSpec, p: &[f64]) -> Result<OrthoFrame> {
    let obs = Observer::foliation_normal(spec, p)?;
    complete_frame(spec, &obs)
}

/// Static product of a time line with a round 2-sphere of radius `a`.
fn sphere_product(a: f64) -> Result<MetricSpec> {
    let a2 = a * a;
    parse_metric_spec(&format!(
        "[model]\nkind = foliated\ndim = 3\n\n[lapse]\nn = 1\n\n[spatial]\ng11 = {a2}\ng22 = {a2}*sin(x1)^2\n\n[domain]\nt = -10 10\nx1 = 0.1 3.0415926535897932\nx2 = periodic 6.283185307179586\n",
    ))
}

/// `g_T = g + 2 T♭ ⊗ T♭` assembled by hand from the metric and observer.
fn reference_metric(
    g: &lorentzkit::nalgebra::DMatrix<f64>,
    t: &[f64],
) -> lorentzkit::nalgebra::DMatrix<f64> {
    let dim = t.len();
    let mut flat = vec![0.0; dim];
    for a in 0..dim {
        for c in 0..dim {
            flat[a] += g[(a, c)] * t[c];
        }
    }
    let mut gt = g.clone();
    for a in 0..dim {
        for c in 0..dim {
            gt[(a, c)] += 2.0 * flat[a] * flat[c];
        }
    }
    gt
}

fn flat_curvature_zero(opts: &OdeOptions) -> Result<Check> {
    let _ = opts;
    let spec = MetricSpec::minkowski(4);
    let mut worst: f64 = 0.0;
    for p in spec.probe_points(16) {
        let gamma = christoffel_at(&spec, &p)?.gamma;
        let riem = riemann_at(&spec, &p)?.riem;
        worst = worst.max(gamma.data.iter().fold(0.0f64, |a, v| a.max(v.abs())));
        worst = worst.max(riem.data.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    }
    ck(worst, 0.0, "max |Gamma|, |Riem| over flat probes (exact zeros)")
}

fn frame_eta_orthonormality(_opts: &OdeOptions) -> Result<Check> {
    let spec = MetricSpec::flrw("1 + 0.3*t^2", 4)?;
    let p = [0.2, 0.3, -0.4, 0.5];
    let frame = frame_at(&spec, &p)?;
    let g = metric_at(&spec, &p)?.g;
    let mut worst: f64 = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            worst = worst.max((quad(&g, &frame.basis[a], &frame.basis[b]) - eta(a, b)).abs());
        }
    }
    ck(worst, 1e-10, "max |g(E_a,E_b) - eta_ab| for the completed frame")
}

fn reference_metric_identity(_opts: &OdeOptions) -> Result<Check> {
    let spec = MetricSpec::schwarzschild(1.0);
    let p = [0.0, 6.0, FRAC_PI_2, 0.0];
    let obs = Observer::new(&spec, &p, &[1.0, 0.05, 0.0, 0.01])?;
    let frame = complete_frame(&spec, &obs)?;
    let g = metric_at(&spec, &p)?.g;
    let gt = reference_metric(&g, &obs.t);
    // A g-orthonormal frame is g_T-orthonormal with all signs positive.
    let mut worst: f64 = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            let expect = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((quad(&gt, &frame.basis[a], &frame.basis[b]) - expect).abs());
        }
    }
    ck(worst, 1e-10, "g_T = g + 2 T_flat x T_flat makes the frame orthonormal")
}

fn volume_form_coincidence(_opts: &OdeOptions) -> Result<Check> {
    let spec = MetricSpec::flrw("1 + 0.3*t^2", 4)?;
    let p = [0.7, -0.2, 0.4, 1.1];
    let obs = Observer::foliation_normal(&spec, &p)?;
    let m = metric_at(&spec, &p)?;
    let gt = reference_metric(&m.g, &obs.t);
    let det_gt = gt.determinant();
    let measure = (det_gt.sqrt() / m.det.abs().sqrt() - 1.0).abs();
    ck(measure, 1e-10, "sqrt det g_T = sqrt |det g|")
}

fn geodesic_norm_conservation(opts: &OdeOptions) -> Result<Check> {
    let spec = MetricSpec::schwarzschild(1.0);
    let p = [0.0, 6.0, FRAC_PI_2, 0.0];
    let frame = frame_at(&spec, &p)?;
    let v = frame.vector_from_frame(&[1.0, 0.3, 0.0, 0.2]);
    let norm0 = velocity_norm2(&spec, &p, &v)?;
    let geo = integrate_geodesic(&spec, &p, &v, 2.0, opts)?;
    let mut worst: f64 = 0.0;
    for k in 1..=9 {
        let sk = geo.s_max() * k as f64 / 9.0;
        let norm = velocity_norm2(&spec, &geo.point(sk), &geo.velocity(sk))?;
        worst = worst.max((norm - norm0).abs());
    }
    ck(worst, 1e-8, "g(v,v) drift along an orbit segment")
}

fn exp_log_roundtrip(opts: &OdeOptions) -> Result<Check> {
    let spec = MetricSpec::schwarzschild(1.0);
    let p = [0.0, 6.0, FRAC_PI_2, 0.0];
    let frame = frame_at(&spec, &p)?;
    let xi = [0.36, 0.12, 0.0, 0.1];
    let target = exp_map(&spec, &frame, &xi, opts)?
        .point
        .ok_or_else(|| lorentzkit::Error::Unsupported("trial geodesic left the chart".into()))?;
    let guess = [0.3, 0.1, 0.0, 0.08];
    let back = exp_map_inverse(&spec, &frame, &target, &guess, 1e-10, opts)?;
    let worst = xi.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
    ck(worst, 1e-7, "exp then log returns the tangent vector")
}

fn jacobi_sinh_closed_form(opts: &OdeOptions, fault: Fault) -> Result<Check> {
    let spec = sphere_product(1.0)?;
    let frame = frame_at(&spec, &[0.0, FRAC_PI_2, 0.0])?;
    // Equatorial spatial geodesic: transverse Jacobi determinant is the
    // product of a flat time factor s and the sphere factor sin(s).
    let track = integrate_jacobi(&spec, &frame, &[0.0, 0.0, 1.0], 2.0, opts)?;
    let mut worst: f64 = 0.0;
    for k in 1..=10 {
        let sk = 0.2 * k as f64;
        let expected = match fault {
            Fault::None => sk * sk.sin(),
            Fault::CurvatureSign => sk * sk.sinh(),
        };
        worst = worst.max((track.det_m(sk) - expected).abs());
    }
    ck(worst, 1e-6, "det M(s) = s sin(s) on the unit-sphere product")
}

fn conjugate_curvature_scaling(opts: &OdeOptions) -> Result<Check> {
    let mut conj = Vec::new();
    for (a, s_end) in [(1.0, 4.0), (0.5, 2.0)] {
        let spec = sphere_product(a)?;
        let frame = frame_at(&spec, &[0.0, FRAC_PI_2, 0.0])?;
        let track = integrate_jacobi(&spec, &frame, &[0.0, 0.0, 1.0], s_end, opts)?;
        let out = first_conjugate_point(&track);
        conj.push(out.s_conj.ok_or_else(|| {
            lorentzkit::Error::Unsupported("no conjugate point located".into())
        })?);
    }
    let measure = (conj[1] / conj[0] - 0.5).abs().max((conj[0] - PI).abs());
    ck(measure, 1e-3, "conjugate radius pi*a halves when the sphere radius halves")
}

fn torus_loop_detection(opts: &OdeOptions) -> Result<Check> {
    let spec = MetricSpec::flat_spatial_torus(2.0, 4);
    let frame = frame_at(&spec, &[0.0, 1.0, 1.0, 1.0])?;
    let looped = detect_short_loops(&spec, &frame, 1.3, 72, opts)?;
    match looped {
        Some(l) => ck((l - 2.0).abs(), 1e-6, "shortest torus loop equals the period"),
        None => ck(f64::NAN, 1e-6, "no loop found on the torus"),
    }
}

fn flat_collision_absence(opts: &OdeOptions) -> Result<Check> {
    let spec = MetricSpec::minkowski(4);
    let frame = frame_at(&spec, &[0.0; 4])?;
    let looped = detect_short_loops(&spec, &frame, 1.5, 48, opts)?;
    let measure = if looped.is_some() { 1.0 } else { 0.0 };
    ck(measure, 0.0, "no spurious loops in flat space")
}

fn connection_gap_bound(_opts: &OdeOptions) -> Result<Check> {
    let spec = MetricSpec::desitter_slicing(1.0, 4);
    let rep = connection_gap(&spec, 24)?;
    let measure = rep.violations as f64
        + if rep.max_lhs <= rep.bound * (1.0 + 1e-9) + 1e-10 { 0.0 } else { 1.0 };
    ck(
        measure,
        0.0,
        format!("sup |Gamma_gT - Gamma_g|_T = {:.6} vs bound {:.6}", rep.max_lhs, rep.bound),
    )
}

fn theorem_bounds_direction(opts: &OdeOptions) -> Result<Check> {
    let spec = MetricSpec::flrw("1 + 0.3*t^2", 4)?;
    let frame = frame_at(&spec, &[0.0; 4])?;
    let rep = injectivity_radius(&spec, &frame, 1.0, 24, opts)?;
    let bounds = measure_assumption_bounds(&spec, 48)?;
    let chain = theorem_foliated_bound(&bounds, 0.1)?;
    let main = theorem_main_bound(&spec, &frame, 0.5, &BoundConstants::default(), 24, opts)?;
    let measure = (chain.i0 - rep.inj_estimate).max(main.bound - rep.inj_estimate);
    ck(
        measure,
        1e-9,
        format!(
            "bounds {:.4e} (chain), {:.4e} (volume) below estimate {:.4}",
            chain.i0, main.bound, rep.inj_estimate
        ),
    )
}

fn volume_ratio_monotonicity(opts: &OdeOptions) -> Result<Check> {
    let spec = MetricSpec::desitter_slicing(1.0, 4);
    let frame = frame_at(&spec, &[0.0; 4])?;
    let cone = ConeSpec::cap(ConeOrientation::Future, 0.6, 0.9)?;
    let radii: Vec<f64> = (1..=6).map(|k| 0.15 * k as f64).collect();
    let curve = comparison_ratio_curve(&spec, &frame, &cone, &radii, 1.0, 16, opts)?;
    let measure = (curve.monotonicity_violations + curve.ricci_violations) as f64;
    ck(measure, 0.0, "cone/model ratio nonincreasing under the Ricci hypothesis")
}

fn cone_slope_flat(opts: &OdeOptions) -> Result<Check> {
    let spec = MetricSpec::minkowski(4);
    let frame = frame_at(&spec, &[0.0; 4])?;
    let loc = localize_null_cone(&spec, &frame, 0.8, 12, opts)?;
    let measure = (loc.slope_lo - 1.0)
        .abs()
        .max((loc.slope_hi - 1.0).abs())
        .max(loc.violations as f64);
    ck(measure, 1e-6, "flat null cone has slope exactly 1")
}

fn parser_roundtrip(_opts: &OdeOptions) -> Result<Check> {
    let specs = [
        MetricSpec::minkowski(4),
        MetricSpec::schwarzschild(1.0),
        MetricSpec::desitter_slicing(1.0, 4),
        MetricSpec::flrw("1 + 0.3*t^2", 4)?,
        MetricSpec::flat_spatial_torus(2.0, 4),
    ];
    let mut worst: f64 = 0.0;
    for spec in &specs {
        let doc = spec.as_expression_document().ok_or_else(|| {
            lorentzkit::Error::Unsupported("builtin without expression document".into())
        })?;
        let back = parse_metric_spec(&doc)?;
        for p in spec.probe_points(4) {
            let g0 = metric_at(spec, &p)?.g;
            let g1 = metric_at(&back, &p)?.g;
            for a in 0..spec.dim {
                for c in 0..spec.dim {
                    worst = worst.max((g0[(a, c)] - g1[(a, c)]).abs());
                }
            }
        }
    }
    ck(worst, 1e-12, "metric values survive the document round-trip")
}

/// Runs the whole suite, writes `verify` tables, and fails the run when any
/// invariant fails.
pub fn run_suite(tol: f64, fault: Fault, mut b: Bundle) -> std::result::Result<(), CliError> {
    let opts = OdeOptions::with_tol(tol);
    if fault != Fault::None {
        b.meta("injected-fault", "curvature-sign");
    }

    let runs: Vec<(&'static str, Result<Check>)> = vec![
        ("flat-curvature-zero", flat_curvature_zero(&opts)),
        ("frame-eta-orthonormality", frame_eta_orthonormality(&opts)),
        ("reference-metric-identity", reference_metric_identity(&opts)),
        ("volume-form-coincidence", volume_form_coincidence(&opts)),
        ("geodesic-norm-conservation", geodesic_norm_conservation(&opts)),
        ("exp-log-roundtrip", exp_log_roundtrip(&opts)),
        ("jacobi-sinh-closed-form", jacobi_sinh_closed_form(&opts, fault)),
        ("conjugate-curvature-scaling", conjugate_curvature_scaling(&opts)),
        ("torus-loop-detection", torus_loop_detection(&opts)),
        ("flat-collision-absence", flat_collision_absence(&opts)),
        ("connection-gap-bound", connection_gap_bound(&opts)),
        ("theorem-bounds-direction", theorem_bounds_direction(&opts)),
        ("volume-ratio-monotonicity", volume_ratio_monotonicity(&opts)),
        ("cone-slope-flat", cone_slope_flat(&opts)),
        ("parser-roundtrip", parser_roundtrip(&opts)),
    ];

    let mut table = Table::new("verify", &["invariant", "pass", "measure", "threshold", "note"]);
    let mut passed = 0usize;
    for (name, outcome) in &runs {
        let (pass, measure, threshold, note) = match outcome {
            // NaN measures compare false and therefore fail.
            Ok(c) => (c.measure <= c.threshold, c.measure, c.threshold, c.note.clone()),
            Err(e) => (false, f64::NAN, 0.0, e.to_string()),
        };
        table.push(vec![s(*name), i(pass as usize), f(measure), f(threshold), s(note.clone())]);
        b.line(format!(
            "[{}] {name}: measure {measure:.3e} vs threshold {threshold:.3e} — {note}",
            if pass { "PASS" } else { "FAIL" }
        ));
        if pass {
            passed += 1;
        } else {
            b.fail(format!("invariant {name} failed (measure {measure:.3e} > {threshold:.3e})"));
        }
    }
    b.push_table(table);
    b.line(format!("{passed}/{} invariants passed", runs.len()));
    b.write()
}
