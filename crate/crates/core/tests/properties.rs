//! Property tests for structural invariants: parser robustness and error
//! locations, reference-metric algebra, exponential-map homogeneity, and
//! linearity of the Jacobi deviation system.

use lorentzkit::config::{parse_metric_spec, MetricSpec};
use lorentzkit::frames::{complete_frame, reference_metric_at, Observer};
use lorentzkit::geodesic::integrate_geodesic;
use lorentzkit::jacobi::integrate_jacobi;
use lorentzkit::ode::OdeOptions;
use lorentzkit::spacetime::metric_at;
use lorentzkit::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn quad(m: &DMatrix<f64>, u: &[f64], v: &[f64]) -> f64 {
    let n = m.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += m[(i, j)] * u[i] * v[j];
        }
    }
    acc
}

/// The four builtin model families exercised by the algebraic properties,
/// with a window of safe base points for each.
fn model(case: usize) -> (MetricSpec, Vec<f64>, Vec<f64>) {
    match case % 4 {
        0 => (MetricSpec::minkowski(4), vec![0.0; 4], vec![1.0; 4]),
        1 => (
            MetricSpec::schwarzschild(1.0),
            vec![0.0, 8.0, 1.2, 0.0],
            vec![1.0, 3.0, 0.5, 1.0],
        ),
        2 => (MetricSpec::desitter_slicing(1.0, 4), vec![0.0; 4], vec![0.5; 4]),
        _ => (MetricSpec::flat_spatial_torus(2.0, 4), vec![0.0; 4], vec![0.5; 4]),
    }
}

fn observer_at(spec: &MetricSpec, x: &[f64], boost: &[f64]) -> Observer {
    // Boost the foliation normal by frame components (1, b) with |b| < 1.
    let obs0 = Observer::foliation_normal(spec, x).unwrap();
    let frame = complete_frame(spec, &obs0).unwrap();
    let mut xi = vec![1.0];
    xi.extend_from_slice(boost);
    let t_raw = frame.vector_from_frame(&xi);
    Observer::new(spec, x, &t_raw).unwrap()
}

proptest! {
    /// Arbitrary unicode text never panics the document parser.
    #[test]
    fn parser_total_on_raw_text(chars in prop::collection::vec(any::<char>(), 0..400)) {
        let src: String = chars.into_iter().collect();
        let _ = parse_metric_spec(&src);
    }

    /// Token-salad documents built from plausible fragments never panic,
    /// and every reported parse error points inside the document.
    #[test]
    fn parser_errors_are_located(
        lines in prop::collection::vec(
            prop_oneof![
                prop::sample::select(vec![
                    "[model]", "[lapse]", "[spatial]", "[metric]", "[domain]",
                    "[orbit]", "[model", "# comment only", "",
                ])
                .prop_map(String::from),
                "kind = (minkowski|schwarzschild|desitter_slicing|flrw|flat_spatial_torus|foliated|general|warp)",
                "dim = [0-9]{1,2}",
                "(mass|k|period|scale|a) = -?[0-9]{1,3}(\\.[0-9]{1,3})?",
                "n = (1|t|sqrt\\(x1\\)|0|-2|1 \\+)",
                "g[0-9][0-9] = (1|x1\\^2|sin\\(x2\\)\\^2|exp\\(2\\*t\\)|1 \\+ |\\)\\()",
                "(t|x[1-9]) = (-?[0-9] [0-9]|periodic [0-9]|0 0|5 1)",
                prop::sample::select(vec!["= 1", "g11 == 2", "kind minkowski"])
                    .prop_map(String::from),
            ],
            0..14,
        )
    ) {
        let src = lines.join("\n");
        match parse_metric_spec(&src) {
            Ok(_) => {}
            Err(Error::Parse { line, col, msg }) => {
                let n_lines = src.lines().count().max(1);
                prop_assert!(line >= 1 && line <= n_lines, "line {line} outside 1..={n_lines}: {msg}");
                prop_assert!(col >= 1, "column must be 1-based");
                prop_assert!(!msg.is_empty());
            }
            Err(Error::InvalidSpec(msg)) => prop_assert!(!msg.is_empty()),
            Err(e) => prop_assert!(false, "unexpected error class: {e}"),
        }
    }

    /// g_T(V, W) = g(V, W) + 2 g(T, V) g(T, W) for arbitrary vectors and
    /// boosted observers, and |det g| = det g_T.
    #[test]
    fn reference_metric_identity(
        case in 0usize..4,
        b in prop::collection::vec(-0.45f64..0.45, 3),
        shift in prop::collection::vec(-0.4f64..0.4, 4),
        v in prop::collection::vec(-2.0f64..2.0, 4),
        w in prop::collection::vec(-2.0f64..2.0, 4),
    ) {
        let (spec, base, window) = model(case);
        let x: Vec<f64> = base.iter().zip(&window).zip(&shift)
            .map(|((p, w), s)| p + w * s).collect();
        let obs = observer_at(&spec, &x, &b);
        let m = metric_at(&spec, &x).unwrap();
        let r = reference_metric_at(&spec, &obs).unwrap();
        let gtv = quad(&m.g, &obs.t, &v);
        let gtw = quad(&m.g, &obs.t, &w);
        let lhs = quad(&r.g_t, &v, &w);
        let rhs = quad(&m.g, &v, &w) + 2.0 * gtv * gtw;
        let scale = 1.0 + lhs.abs().max(rhs.abs());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * scale, "identity residual {}", (lhs - rhs).abs());

        let det_g = m.g.clone().lu().determinant();
        prop_assert!((det_g.abs() - r.det).abs() <= 1e-8 * (1.0 + r.det.abs()),
            "|det g| = {} vs det g_T = {}", det_g.abs(), r.det);

        // Positive definiteness: nonzero vectors have positive g_T length.
        let vnorm: f64 = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if vnorm > 1e-6 {
            prop_assert!(quad(&r.g_t, &v, &v) > 0.0, "g_T not positive on {v:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Geodesics are affinely homogeneous: the point reached at parameter
    /// s with velocity λv equals the point at λs with velocity v.
    #[test]
    fn exp_map_is_homogeneous(
        case in 0usize..4,
        lambda in 0.25f64..2.0,
        xi in prop::collection::vec(-0.6f64..0.6, 4),
        s in 0.05f64..0.45,
    ) {
        let (spec, base, _) = model(case);
        let obs = Observer::foliation_normal(&spec, &base).unwrap();
        let frame = complete_frame(&spec, &obs).unwrap();
        let v = frame.vector_from_frame(&xi);
        let opts = OdeOptions::default();
        let geo1 = integrate_geodesic(&spec, &base, &v, 1.0, &opts).unwrap();
        let scaled: Vec<f64> = v.iter().map(|c| c * lambda).collect();
        let geo2 = integrate_geodesic(&spec, &base, &scaled, 1.0, &opts).unwrap();
        if geo1.s_max() >= lambda * s && geo2.s_max() >= s {
            let a = geo1.point(lambda * s);
            let b = geo2.point(s);
            for (ai, bi) in a.iter().zip(&b) {
                prop_assert!((ai - bi).abs() <= 1e-8, "{a:?} vs {b:?}");
            }
        }
    }

    /// The deviation matrix acts linearly on initial data: on the flat
    /// model, M(s)·c reproduces the exact finite difference of the
    /// exponential map along w = Σ c_k F_k for arbitrary coefficients.
    #[test]
    fn jacobi_superposition_on_flat(
        c in prop::collection::vec(-1.0f64..1.0, 3),
        dir in 0usize..3,
        s in 0.3f64..2.0,
    ) {
        let spec = MetricSpec::minkowski(4);
        let base = vec![0.0; 4];
        let obs = Observer::foliation_normal(&spec, &base).unwrap();
        let frame = complete_frame(&spec, &obs).unwrap();
        let xi = match dir {
            0 => vec![1.0, 0.0, 0.0, 0.0],                    // timelike
            1 => vec![0.3, 1.0, 0.0, 0.0],                    // tilted spacelike
            _ => vec![0.0, 0.6, 0.8, 0.0],                    // spacelike
        };
        let opts = OdeOptions::default();
        let track = integrate_jacobi(&spec, &frame, &xi, s, &opts).unwrap();
        let l = track.l;
        prop_assume!(l == 3);
        let y = track.sol.eval(s);
        let dim = 4;
        // Chart legs F_k(s) and the M-route field Σ_k (M c)_k F_k.
        let m = track.m_matrix(s);
        let mut field_m = vec![0.0; dim];
        for k in 0..l {
            let mc: f64 = (0..l).map(|j| m[(k, j)] * c[j]).sum();
            let leg = &y[(2 + k) * dim..(3 + k) * dim];
            for i in 0..dim {
                field_m[i] += mc * leg[i];
            }
        }
        // FD route: central difference of exp_p(s(ξ ± ε w)) with w from the
        // initial legs; flat exp is linear so this is exact to roundoff.
        let legs0: Vec<Vec<f64>> = (0..l)
            .map(|k| track.sol.eval(0.0)[(2 + k) * dim..(3 + k) * dim].to_vec())
            .collect();
        let mut w = vec![0.0; dim];
        for k in 0..l {
            for i in 0..dim {
                w[i] += c[k] * legs0[k][i];
            }
        }
        let eps = 1e-6;
        let mut plus = frame.vector_from_frame(&xi);
        let mut minus = plus.clone();
        for i in 0..dim {
            plus[i] += eps * w[i];
            minus[i] -= eps * w[i];
        }
        let gp = integrate_geodesic(&spec, &base, &plus, s, &opts).unwrap();
        let gm = integrate_geodesic(&spec, &base, &minus, s, &opts).unwrap();
        let (ap, am) = (gp.point(s), gm.point(s));
        for i in 0..dim {
            let fd = (ap[i] - am[i]) / (2.0 * eps);
            prop_assert!((fd - field_m[i]).abs() <= 1e-6 * (1.0 + fd.abs()),
                "component {i}: fd {fd} vs M-route {}", field_m[i]);
        }
    }
}

/// Builtin models re-serialized as expression documents parse back to the
/// same metric values on a probe grid.
#[test]
fn builtin_documents_round_trip() {
    let models = vec![
        MetricSpec::minkowski(4),
        MetricSpec::schwarzschild(1.0),
        MetricSpec::desitter_slicing(0.7, 4),
        MetricSpec::flat_spatial_torus(2.0, 4),
        MetricSpec::flrw("1 + 0.1*t^2", 4).unwrap(),
        MetricSpec::minkowski(3).with_scale(2.5),
    ];
    for spec in models {
        let doc = spec.as_expression_document().unwrap();
        let back = parse_metric_spec(&doc)
            .unwrap_or_else(|e| panic!("round trip failed for {}: {e}\n{doc}", spec.describe()));
        assert_eq!(back.dim, spec.dim);
        for p in spec.probe_points(32) {
            let ga = lorentzkit::spacetime::metric_value(&spec, &p);
            let gb = lorentzkit::spacetime::metric_value(&back, &p);
            for i in 0..spec.dim {
                for j in 0..spec.dim {
                    let (a, b) = (ga[(i, j)], gb[(i, j)]);
                    assert!(
                        (a - b).abs() <= 1e-12 * (1.0 + a.abs()),
                        "{}: g[{i}{j}] {a} vs {b} at {p:?}",
                        spec.describe()
                    );
                }
            }
        }
    }
}

/// Twenty+ malformed documents, each reporting a parse error at the
/// expected 1-based line and column.
#[test]
fn malformed_documents_report_positions() {
    let cases: Vec<(&str, usize, usize, &str)> = vec![
        ("[model\nkind = minkowski\n", 1, 1, "missing ']'"),
        ("[orbit]\nkind = minkowski\n", 1, 1, "unknown section"),
        ("[model]\n[model]\n", 2, 1, "duplicate section"),
        ("kind = minkowski\n", 1, 1, "before any section"),
        ("[model]\nkind minkowski\n", 2, 1, "expected 'key = value'"),
        ("[model]\n=minkowski\n", 2, 1, "empty key"),
        ("[model]\nki~nd = x\n", 2, 1, "malformed key"),
        ("[model]\nkind =\n", 2, 7, "missing value"),
        ("[model]\nkind = warp\n", 2, 8, "unknown model kind"),
        ("[model]\nkind = minkowski\ndim = 7\n", 3, 7, "dim must be an integer in 2..=6"),
        ("[model]\nkind = minkowski\ndim = 2.5\n", 3, 7, "dim must be an integer in 2..=6"),
        ("[model]\nkind = schwarzschild\nmass = -1\n", 3, 8, "mass must be positive"),
        ("[model]\nkind = minkowski\nmass = 1\n", 3, 8, "unknown key 'mass'"),
        ("[model]\nkind = minkowski\nkind = minkowski\n", 3, 1, "duplicate key"),
        ("[lapse]\nn = 1\n", 1, 1, "requires a [spatial] section"),
        (
            "[model]\nkind = foliated\n[spatial]\ng11 = 1\ng22 = 1\ng33 = 1\n",
            1,
            1,
            "requires a [lapse] section",
        ),
        ("[lapse]\nn = 1\n[spatial]\ng11 = 1\ng33 = 1\n", 3, 1, "missing diagonal component g22"),
        ("[lapse]\nn = 1\n[spatial]\ng11 = 1\ng21 = 1\ng22 = 1\n", 5, 7, "specify g12 instead"),
        (
            "[model]\nkind = foliated\ndim = 3\n[lapse]\nn = 1\n[spatial]\ng11 = 1\ng22 = 1\ng44 = 1\n",
            9,
            7,
            "out of range",
        ),
        ("[lapse]\nn = 0\n[spatial]\ng11 = 1\ng22 = 1\ng33 = 1\n", 2, 5, "lapse must be positive"),
        ("[lapse]\nn = 1\n[spatial]\ng11 = 1 +\ng22 = 1\ng33 = 1\n", 4, 10, "unexpected end"),
        ("[model]\nkind = minkowski\n[domain]\nt = 3 1\n", 4, 5, "need lo < hi"),
        ("[model]\nkind = minkowski\n[domain]\nx9 = 0 1\n", 4, 6, "unknown key 'x9'"),
        ("[model]\nkind = minkowski\n[domain]\nx1 = periodic -2\n", 4, 6, "positive"),
        ("[model]\nkind = flrw\n", 1, 1, "missing required key 'a'"),
        ("[model]\nkind = flrw\na = 1 + x1\n", 3, 5, "must depend on t only"),
    ];
    assert!(cases.len() >= 20);
    for (src, line, col, frag) in cases {
        match parse_metric_spec(src) {
            Err(Error::Parse { line: l, col: c, msg }) => {
                assert_eq!((l, c), (line, col), "position for {src:?}: got ({l},{c}) '{msg}'");
                assert!(
                    msg.contains(frag),
                    "message for {src:?} should mention '{frag}', got '{msg}'"
                );
            }
            other => panic!("expected located parse error for {src:?}, got {other:?}"),
        }
    }
}

/// A deterministic 10⁴-document fuzz sweep: the parser must return (never
/// panic, never loop) on pseudo-random fragment soup.
#[test]
fn parser_survives_fragment_soup() {
    let fragments = [
        "[model]", "[lapse]", "[spatial]", "[metric]", "[domain]", "[mod el]", "[", "]",
        "kind = minkowski", "kind = foliated", "kind = general", "kind = flrw", "kind =",
        "dim = 4", "dim = 99", "dim = -1", "mass = 1", "mass = nan", "scale = 0", "a = t",
        "n = 1", "n = sqrt(1 - 2/x1)", "n = log(", "n = )", "g11 = 1", "g00 = -1", "g12 = x9",
        "g11 = 1/0", "g11 = x1^", "g99 = 1", "t = 0 1", "t = 1 0", "x1 = periodic 2",
        "x1 = periodic", "= =", "g11 = sin(x2)^2", "鏡 = 面", "g11 = exp(2*t)", "#", " ",
    ];
    let mut state = 0x9e3779b97f4a7c15u64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    for _ in 0..10_000 {
        let n_lines = (next() % 12) as usize;
        let mut doc = String::new();
        for _ in 0..n_lines {
            doc.push_str(fragments[(next() as usize) % fragments.len()]);
            doc.push('\n');
        }
        let _ = parse_metric_spec(&doc);
    }
}
