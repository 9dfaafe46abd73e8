//! The geometry subcommands: each one drives library routines and fills a
//! report bundle with data tables, human-readable lines, and analysis
//! failures (which become the nonzero exit code).

use lorentzkit::cone::{
    cone_graph, comparison_ratio_curve, future_cone_volume, localize_null_cone,
    null_injectivity_radius, ConeOrientation, ConeSpec,
};
use lorentzkit::dirlattice::sphere_area;
use lorentzkit::frames::measure_assumption_bounds;
use lorentzkit::geodesic::{integrate_geodesic, parallel_transport, velocity_norm2};
use lorentzkit::jacobi::integrate_jacobi;
use lorentzkit::radius::{
    injectivity_radius, reference_ball_volume, theorem_foliated_bound, theorem_main_bound,
    BoundConstants, RadiusLimit,
};
use lorentzkit::spacetime::{christoffel_at, metric_at, riemann_at};

use crate::bundle::{f, fo, i, s, Bundle, Table};
use crate::{CliError, Context};

/// `u^T M v` for a chart metric matrix.
pub(crate) fn quad(m: &lorentzkit::nalgebra::DMatrix<f64>, u: &[f64], v: &[f64]) -> f64 {
    let n = m.nrows();
    let mut acc = 0.0;
    for a in 0..n {
        for b in 0..n {
            acc += m[(a, b)] * u[a] * v[b];
        }
    }
    acc
}

/// Minkowski component `η_ab` = diag(−1, 1, ..., 1).
pub(crate) fn eta(a: usize, b: usize) -> f64 {
    if a != b {
        0.0
    } else if a == 0 {
        -1.0
    } else {
        1.0
    }
}

// ---------------------------------------------------------------------------
// describe
// ---------------------------------------------------------------------------

pub fn describe(ctx: &Context, probes: usize, mut b: Bundle) -> Result<(), CliError> {
    let spec = &ctx.spec;
    let dim = spec.dim;
    let p = &ctx.observer.point;

    let mut headers: Vec<String> = vec!["probe".into()];
    headers.extend((0..dim).map(|k| format!("x{k} [chart]")));
    headers.push("sqrt_abs_det_g".into());
    headers.push("max_abs_gamma [1/len]".into());
    headers.push("max_abs_riem [1/len^2]".into());
    let mut survey =
        Table::new("survey", &headers.iter().map(String::as_str).collect::<Vec<_>>());
    let mut sup_gamma: f64 = 0.0;
    let mut sup_riem: f64 = 0.0;
    for (idx, x) in spec.probe_points(probes.max(1)).iter().enumerate() {
        let m = metric_at(spec, x)?;
        let gamma = christoffel_at(spec, x)?.gamma;
        let riem = riemann_at(spec, x)?.riem;
        let gmax = gamma.data.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let rmax = riem.data.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        sup_gamma = sup_gamma.max(gmax);
        sup_riem = sup_riem.max(rmax);
        let mut row = vec![i(idx)];
        row.extend(x.iter().map(|&c| f(c)));
        row.extend([f(m.det.abs().sqrt()), f(gmax), f(rmax)]);
        survey.push(row);
    }
    b.push_table(survey);

    let m = metric_at(spec, p)?;
    let mut metric = Table::new("metric", &["i", "j", "g_ij"]);
    for a in 0..dim {
        for c in a..dim {
            metric.push(vec![i(a), i(c), f(m.g[(a, c)])]);
        }
    }
    b.push_table(metric);

    let gamma = christoffel_at(spec, p)?.gamma;
    let mut chris = Table::new("christoffel", &["a", "b", "c", "gamma^a_bc [1/len]"]);
    for a in 0..dim {
        for bb in 0..dim {
            for c in bb..dim {
                chris.push(vec![i(a), i(bb), i(c), f(gamma.get(a, bb, c))]);
            }
        }
    }
    b.push_table(chris);

    let curv = riemann_at(spec, p)?;
    let mut riem = Table::new("riemann", &["a", "b", "c", "d", "R_abcd [1/len^2]"]);
    for a in 0..dim {
        for bb in 0..dim {
            for c in 0..dim {
                for d in 0..dim {
                    let v = curv.riem.get(a, bb, c, d);
                    if v.abs() > 1e-14 {
                        riem.push(vec![i(a), i(bb), i(c), i(d), f(v)]);
                    }
                }
            }
        }
    }
    let riem_rows = riem.rows.len();
    b.push_table(riem);

    b.line(format!("model: {} (dimension {dim})", ctx.label));
    b.line(format!("chart box: {:?}", spec.chart));
    if spec.is_foliated() {
        // The normalized foliation normal is lapse⁻¹ ∂_t.
        let normal = lorentzkit::frames::Observer::foliation_normal(spec, p)?;
        b.line(format!("lapse at point: {:.12}", 1.0 / normal.t[0]));
    }
    b.line(format!("scalar curvature at point: {:.12e}", curv.scalar));
    b.line(format!(
        "survey suprema: max|Gamma| = {sup_gamma:.6e}, max|Riem| = {sup_riem:.6e}"
    ));
    if sup_riem == 0.0 {
        b.line("curvature vanished identically on every probe".to_string());
    }
    b.line(format!("riemann table holds the {riem_rows} components above 1e-14"));
    b.write()
}

// ---------------------------------------------------------------------------
// geodesic
// ---------------------------------------------------------------------------

pub fn geodesic(
    ctx: &Context,
    xi: &[f64],
    smax: f64,
    samples: usize,
    check_tol: f64,
    mut b: Bundle,
) -> Result<(), CliError> {
    let spec = &ctx.spec;
    let dim = spec.dim;
    let p = &ctx.observer.point;
    if !(smax > 0.0 && smax.is_finite()) {
        return Err(CliError::Config(format!("--smax must be positive, got {smax}")));
    }

    let v0 = ctx.frame.vector_from_frame(xi);
    let norm0 = velocity_norm2(spec, p, &v0)?;
    let class = if norm0 < -1e-9 {
        "timelike"
    } else if norm0 > 1e-9 {
        "spacelike"
    } else {
        "null"
    };

    let geo = integrate_geodesic(spec, p, &v0, smax, &ctx.opts)?;
    let s_end = geo.s_max();
    let truncated = geo.left_chart() || s_end < smax;

    let mut headers: Vec<String> = vec!["s [affine]".into()];
    headers.extend((0..dim).map(|k| format!("x{k} [chart]")));
    headers.extend((0..dim).map(|k| format!("v{k} [chart/affine]")));
    headers.push("g_vv = g(v,v)".into());
    headers.push("drift = |g(v,v) - g(v,v)|_s=0".into());
    headers.push("eta_res = max|g(E_a,E_b) - eta_ab|".into());
    let mut track =
        Table::new("track", &headers.iter().map(String::as_str).collect::<Vec<_>>());

    let mut max_drift: f64 = 0.0;
    let mut max_eta: f64 = 0.0;
    for k in 0..samples {
        let sk = s_end * k as f64 / (samples - 1) as f64;
        let x = geo.point(sk);
        let v = geo.velocity(sk);
        let norm = velocity_norm2(spec, &x, &v)?;
        let drift = (norm - norm0).abs();

        let moved = if sk == 0.0 {
            ctx.frame.basis.clone()
        } else {
            parallel_transport(spec, p, &v0, &ctx.frame.basis, sk, &ctx.opts)?
        };
        let g_here = metric_at(spec, &x)?.g;
        let mut eta_res: f64 = 0.0;
        for a in 0..dim {
            for c in a..dim {
                let val = quad(&g_here, &moved[a], &moved[c]);
                eta_res = eta_res.max((val - eta(a, c)).abs());
            }
        }
        max_drift = max_drift.max(drift);
        max_eta = max_eta.max(eta_res);

        let mut row = vec![f(sk)];
        row.extend(x.iter().map(|&c| f(c)));
        row.extend(v.iter().map(|&c| f(c)));
        row.extend([f(norm), f(drift), f(eta_res)]);
        track.push(row);
    }
    b.push_table(track);

    b.line(format!("initial direction: {class} (g(v,v) = {norm0:.12e})"));
    b.line(format!("parameter reach: {s_end:.12} of {smax}"));
    if truncated {
        b.line("geodesic left the chart before the requested parameter".to_string());
    }
    b.line(format!("max norm drift: {max_drift:.6e}"));
    b.line(format!("max frame orthonormality residual: {max_eta:.6e}"));
    if max_drift > check_tol {
        b.fail(format!("norm drift {max_drift:.3e} exceeds the gate {check_tol:.3e}"));
    }
    if max_eta > check_tol {
        b.fail(format!(
            "frame orthonormality residual {max_eta:.3e} exceeds the gate {check_tol:.3e}"
        ));
    }
    b.write()
}

// ---------------------------------------------------------------------------
// radius
// ---------------------------------------------------------------------------

fn limit_label(l: RadiusLimit) -> &'static str {
    match l {
        RadiusLimit::Conjugate => "conjugate",
        RadiusLimit::Collision => "collision",
        RadiusLimit::Reach => "reach",
    }
}

pub fn radius(
    ctx: &Context,
    rmax: f64,
    grid: usize,
    r0: f64,
    eps: f64,
    mut b: Bundle,
) -> Result<(), CliError> {
    let spec = &ctx.spec;
    let rep = injectivity_radius(spec, &ctx.frame, rmax, grid, &ctx.opts)?;
    let main = theorem_main_bound(spec, &ctx.frame, r0, &BoundConstants::default(), grid, &ctx.opts)?;
    let chain = if spec.is_foliated() {
        let bounds = measure_assumption_bounds(spec, 96)?;
        Some(theorem_foliated_bound(&bounds, eps)?)
    } else {
        None
    };

    let slack = 1e-9 * (1.0 + rep.inj_estimate.abs());
    let main_ok = main.bound <= rep.inj_estimate + slack;
    let chain_ok = chain.as_ref().map(|c| c.i0 <= rep.inj_estimate + slack).unwrap_or(true);

    let mut radius = Table::new(
        "radius",
        &[
            "r_max [ref len]",
            "directions",
            "certified [ref len]",
            "inj_estimate [ref len]",
            "conj_radius [ref len]",
            "shortest_loop [ref len]",
            "limit",
            "refine_failures",
            "thm_volume_bound [ref len]",
            "thm_chain_bound [ref len]",
            "bound_leq_estimate",
        ],
    );
    radius.push(vec![
        f(rep.diagnostics.r_max),
        i(rep.diagnostics.directions),
        f(rep.diagnostics.certified),
        f(rep.inj_estimate),
        fo(rep.conj_radius),
        fo(rep.shortest_loop),
        s(limit_label(rep.diagnostics.limit)),
        i(rep.diagnostics.refine_failures),
        f(main.bound),
        fo(chain.as_ref().map(|c| c.i0)),
        i((main_ok && chain_ok) as usize),
    ]);
    b.push_table(radius);

    let mut bounds_tbl = Table::new("chain", &["constant", "value", "meaning"]);
    bounds_tbl.push(vec![s("c_n"), f(main.c_n), s("dimension constant of the volume bound")]);
    bounds_tbl.push(vec![s("vol_radius"), f(main.vol_radius), s("ball radius entering the volume")]);
    bounds_tbl.push(vec![s("volume"), f(main.volume), s("measured reference-ball volume")]);
    bounds_tbl.push(vec![s("volume_bound"), f(main.bound), s("volume-based lower bound")]);
    bounds_tbl.push(vec![s("volume_ratio"), f(main.ratio), s("scale-invariant bound / r0")]);
    bounds_tbl.push(vec![s("sup_riem"), f(main.sup_riem), s("sampled sup |Riem|_T along rays")]);
    bounds_tbl.push(vec![
        s("curvature_violations"),
        i(main.curvature_violations),
        s("samples breaking |Riem|_T <= 1/r0^2"),
    ]);
    if let Some(c) = &chain {
        bounds_tbl.push(vec![s("eps"), f(c.eps), s("margin of the chain")]);
        bounds_tbl.push(vec![s("k0"), f(c.k0), s("sup |ln lapse|")]);
        bounds_tbl.push(vec![s("k1"), f(c.k1), s("sup |L_T g|_T")]);
        bounds_tbl.push(vec![s("k2"), f(c.k2), s("sup |Riem|_T")]);
        bounds_tbl.push(vec![s("k3"), f(c.k3), s("connection gap bound e^{2 k0} k1^2")]);
        bounds_tbl.push(vec![s("v0"), f(c.v0), s("unit-ball volume lower bound")]);
        bounds_tbl.push(vec![s("i1"), f(c.i1), s("curvature-and-volume scale")]);
        bounds_tbl.push(vec![s("i2"), f(c.i2), s("scale after the connection-gap cap")]);
        bounds_tbl.push(vec![s("c1"), f(c.c1), s("metric-comparison growth over an i2-ball")]);
        bounds_tbl.push(vec![s("c2"), f(c.c2), s("growth including the lapse window")]);
        bounds_tbl.push(vec![s("r2"), f(c.r2), s("uniform chart radius")]);
        bounds_tbl.push(vec![s("r3"), f(c.r3), s("uniform injectivity scale")]);
        bounds_tbl.push(vec![s("i0"), f(c.i0), s("guaranteed injectivity lower bound")]);
    }
    b.push_table(bounds_tbl);

    let mut headers: Vec<String> =
        vec!["event".into(), "r_fail [ref len]".into(), "loop_length [ref len]".into(), "is_loop".into()];
    headers.extend((0..spec.dim).map(|k| format!("x{k} [chart]")));
    let mut events =
        Table::new("events", &headers.iter().map(String::as_str).collect::<Vec<_>>());
    for (idx, e) in rep.diagnostics.events.iter().enumerate() {
        let mut row = vec![i(idx), f(e.r_fail), f(e.loop_length), i(e.is_loop as usize)];
        row.extend(e.point.iter().map(|&c| f(c)));
        events.push(row);
    }
    b.push_table(events);

    b.line(format!(
        "injectivity estimate: {:.9} (limited by {}, certified to {:.9})",
        rep.inj_estimate,
        limit_label(rep.diagnostics.limit),
        rep.diagnostics.certified
    ));
    if let Some(c) = rep.conj_radius {
        b.line(format!("first conjugate radius: {c:.9}"));
    }
    if let Some(l) = rep.shortest_loop {
        b.line(format!("shortest geodesic loop: {l:.9}"));
    }
    b.line(format!("volume-based lower bound: {:.6e} at r0 = {r0}", main.bound));
    match &chain {
        Some(c) => b.line(format!("foliated chain lower bound: {:.6e} at eps = {eps}", c.i0)),
        None => b.line("foliated chain skipped: metric is not foliated".to_string()),
    }
    if !main_ok {
        b.fail(format!(
            "volume-based bound {:.6e} exceeds the injectivity estimate {:.6e}",
            main.bound, rep.inj_estimate
        ));
    }
    if !chain_ok {
        b.fail(format!(
            "foliated chain bound {:.6e} exceeds the injectivity estimate {:.6e}",
            chain.as_ref().map(|c| c.i0).unwrap_or(f64::NAN),
            rep.inj_estimate
        ));
    }
    b.write()
}

// ---------------------------------------------------------------------------
// nullcone
// ---------------------------------------------------------------------------

pub fn nullcone(
    ctx: &Context,
    rmax: f64,
    grid: usize,
    r0: f64,
    mut b: Bundle,
) -> Result<(), CliError> {
    let spec = &ctx.spec;
    if !spec.is_foliated() {
        return Err(CliError::Config(
            "nullcone needs a foliated metric (lapse and spatial block)".into(),
        ));
    }
    let loc = localize_null_cone(spec, &ctx.frame, rmax, grid, &ctx.opts)?;
    let graph = cone_graph(spec, &ctx.frame, rmax, (grid / 2).max(8), &ctx.opts)?;
    let nrad = null_injectivity_radius(spec, &ctx.frame, rmax, grid, Some(r0), &ctx.opts)?;

    let mut loc_tbl = Table::new(
        "localization",
        &[
            "t_range [chart]",
            "rays",
            "samples",
            "lapse_lo",
            "lapse_hi",
            "eig_lo [spatial metric]",
            "eig_hi [spatial metric]",
            "slope_lo = radius/depth",
            "slope_hi = radius/depth",
            "violations",
        ],
    );
    loc_tbl.push(vec![
        f(loc.t_range),
        i(loc.rays),
        i(loc.samples),
        f(loc.lapse_lo),
        f(loc.lapse_hi),
        f(loc.eig_lo),
        f(loc.eig_hi),
        f(loc.slope_lo),
        f(loc.slope_hi),
        i(loc.violations),
    ]);
    b.push_table(loc_tbl);

    let m = spec.dim - 1;
    let mut headers: Vec<String> = vec!["dir".into()];
    headers.extend((0..m).map(|k| format!("omega{k}")));
    headers.push("rho [bottom radius]".into());
    headers.push("tau [crossing depth]".into());
    headers.push("slope = rho/tau".into());
    let mut graph_tbl =
        Table::new("graph", &headers.iter().map(String::as_str).collect::<Vec<_>>());
    for (k, omega) in graph.directions.iter().enumerate() {
        for (j, &rho) in graph.bottom_radii.iter().enumerate() {
            let tau = graph.crossing_depths[k][j];
            let mut row = vec![i(k)];
            row.extend(omega.iter().map(|&c| f(c)));
            row.push(f(rho));
            row.push(fo(tau));
            row.push(fo(tau.map(|t| rho / t)));
            graph_tbl.push(row);
        }
    }
    b.push_table(graph_tbl);

    let mut null_tbl = Table::new(
        "nullradius",
        &[
            "directions",
            "conj_radius [ref len]",
            "meeting_radius [ref len]",
            "inj_estimate [ref len]",
            "certified [ref len]",
            "cone_ratio = slope_lo/slope_hi",
            "thm_bound = ratio^6 r0 [ref len]",
            "meetings",
            "bound_leq_estimate",
        ],
    );
    let thm_ok = match nrad.thm_bound {
        Some(t) => t <= nrad.inj_estimate + 1e-9 * (1.0 + nrad.inj_estimate.abs()),
        None => true,
    };
    null_tbl.push(vec![
        i(nrad.directions),
        fo(nrad.conj_radius),
        fo(nrad.meeting_radius),
        f(nrad.inj_estimate),
        f(nrad.certified),
        fo(nrad.cone_ratio),
        fo(nrad.thm_bound),
        i(nrad.events.len()),
        i(thm_ok as usize),
    ]);
    b.push_table(null_tbl);

    b.line(format!(
        "cone slopes in [{:.9}, {:.9}] over depth {:.6} ({} fan samples, {} violations)",
        loc.slope_lo, loc.slope_hi, loc.t_range, loc.samples, loc.violations
    ));
    b.line(format!(
        "graph Lipschitz constant {:.9} against slope_hi {:.9} ({} annulus violations, {} lines excluded)",
        graph.lipschitz, graph.localization.slope_hi, graph.annulus_violations, graph.excluded
    ));
    b.line(format!("null injectivity estimate: {:.9}", nrad.inj_estimate));
    if let Some(t) = nrad.thm_bound {
        b.line(format!("guaranteed null bound: {t:.6e} at r0 = {r0}"));
    }
    if loc.violations > 0 {
        b.fail(format!("{} fan samples left the slope annulus", loc.violations));
    }
    if graph.annulus_violations > 0 {
        b.fail(format!("{} graph crossings left the annulus", graph.annulus_violations));
    }
    if !thm_ok {
        b.fail(format!(
            "guaranteed null bound {:.6e} exceeds the estimate {:.6e}",
            nrad.thm_bound.unwrap_or(f64::NAN),
            nrad.inj_estimate
        ));
    }
    b.write()
}

// ---------------------------------------------------------------------------
// volume
// ---------------------------------------------------------------------------

pub struct VolumeConfig {
    pub rmax: f64,
    pub grid: usize,
    pub k2: f64,
    pub half_angle: f64,
    pub radii: usize,
    pub mc: usize,
    pub seed: u64,
}

/// xorshift64* generator for the optional Monte-Carlo cross-check; the only
/// seeded sampling in the toolkit.
struct Rng(u64);

impl Rng {
    fn new(seed: u64) -> Self {
        Rng(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1)
    }

    fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.0 = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform in [0, 1).
    fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }
}

pub fn volume(ctx: &Context, cfg: &VolumeConfig, mut b: Bundle) -> Result<(), CliError> {
    let spec = &ctx.spec;
    let dim = spec.dim;
    if cfg.radii == 0 {
        return Err(CliError::Config("--radii must be positive".into()));
    }
    let cone = ConeSpec::cap(ConeOrientation::Future, cfg.half_angle, cfg.rmax)?;
    let radii: Vec<f64> =
        (1..=cfg.radii).map(|k| cfg.rmax * k as f64 / cfg.radii as f64).collect();
    let curve = comparison_ratio_curve(spec, &ctx.frame, &cone, &radii, cfg.k2, cfg.grid, &ctx.opts)?;

    let mut curve_tbl = Table::new(
        "curve",
        &["r [ref len]", "volume [len^dim]", "model_volume(K2) [len^dim]", "ratio"],
    );
    for (((&r, &v), &mv), &ratio) in radii
        .iter()
        .zip(&curve.volumes)
        .zip(&curve.model_volumes)
        .zip(&curve.ratios)
    {
        curve_tbl.push(vec![f(r), f(v), f(mv), f(ratio)]);
    }
    b.push_table(curve_tbl);

    let coarse = future_cone_volume(spec, &ctx.frame, &cone, cfg.grid, &ctx.opts)?;
    let fine = future_cone_volume(spec, &ctx.frame, &cone, 2 * cfg.grid, &ctx.opts)?;
    let refine_delta = (fine.volume - coarse.volume).abs() / fine.volume.abs().max(1e-300);

    let mut summary = Table::new("summary", &["quantity", "value", "meaning"]);
    summary.push(vec![s("k2"), f(cfg.k2), s("model curvature constant")]);
    summary.push(vec![s("half_angle"), f(cfg.half_angle), s("cone cap half-angle [rad]")]);
    summary.push(vec![
        s("solid_angle"),
        f(cone.solid_angle(dim)),
        s("reference solid angle of the cap"),
    ]);
    summary.push(vec![s("rays"), f(cfg.grid as f64), s("quadrature directions")]);
    summary.push(vec![s("coverage"), f(curve.coverage), s("fraction of rays reaching r_max")]);
    summary.push(vec![
        s("monotonicity_violations"),
        f(curve.monotonicity_violations as f64),
        s("ratio increases along the curve"),
    ]);
    summary.push(vec![
        s("ricci_samples"),
        f(curve.ricci_samples as f64),
        s("Ricci lower-bound hypothesis samples"),
    ]);
    summary.push(vec![
        s("ricci_violations"),
        f(curve.ricci_violations as f64),
        s("samples breaking Ric(V,V) >= -n K2 |g(V,V)|"),
    ]);
    summary.push(vec![
        s("refine_coarse"),
        f(coarse.volume),
        s("cone volume at the requested direction count"),
    ]);
    summary.push(vec![
        s("refine_fine"),
        f(fine.volume),
        s("cone volume at twice the direction count"),
    ]);
    summary.push(vec![
        s("refine_rel_delta"),
        f(refine_delta),
        s("relative change under direction refinement"),
    ]);

    if cfg.mc > 0 {
        // Seeded Monte-Carlo estimate of the reference-ball volume:
        // vol = V_eucl(ball) * E[ |det M(s)| / s^(dim-1) ] over uniform
        // tangent samples; cross-checked against the lattice quadrature.
        let mut rng = Rng::new(cfg.seed);
        let mut total = 0.0;
        let mut truncated = 0usize;
        for _ in 0..cfg.mc {
            // Rejection-sample a uniform point of the unit ball.
            let u: Vec<f64> = loop {
                let cand: Vec<f64> =
                    (0..dim).map(|_| 2.0 * rng.uniform() - 1.0).collect();
                let n2: f64 = cand.iter().map(|c| c * c).sum();
                if n2 <= 1.0 && n2 > 1e-12 {
                    break cand;
                }
            };
            let norm = u.iter().map(|c| c * c).sum::<f64>().sqrt();
            let s_target = cfg.rmax * norm;
            let xi_unit: Vec<f64> = u.iter().map(|c| c / norm).collect();
            let track = integrate_jacobi(spec, &ctx.frame, &xi_unit, s_target, &ctx.opts)?;
            if track.s_max() < s_target * (1.0 - 1e-9) {
                truncated += 1;
                continue;
            }
            let det = track.det_m(s_target).abs();
            total += det / s_target.powi(dim as i32 - 1);
        }
        let ball_eucl = sphere_area(dim) / dim as f64 * cfg.rmax.powi(dim as i32);
        let mc_volume = ball_eucl * total / cfg.mc as f64;
        let lattice = reference_ball_volume(spec, &ctx.frame, cfg.rmax, cfg.grid, &ctx.opts)?;
        let rel = (mc_volume - lattice).abs() / lattice.abs().max(1e-300);
        summary.push(vec![s("mc_samples"), f(cfg.mc as f64), s("Monte-Carlo sample count")]);
        summary.push(vec![
            s("mc_truncated"),
            f(truncated as f64),
            s("samples dropped at the chart boundary"),
        ]);
        summary.push(vec![
            s("mc_ball_volume"),
            f(mc_volume),
            s("seeded Monte-Carlo reference-ball volume"),
        ]);
        summary.push(vec![
            s("lattice_ball_volume"),
            f(lattice),
            s("lattice quadrature reference-ball volume"),
        ]);
        summary.push(vec![s("mc_rel_diff"), f(rel), s("relative difference of the two routes")]);
        b.line(format!(
            "Monte-Carlo ball volume {mc_volume:.9e} vs lattice {lattice:.9e} (rel diff {rel:.3e}, {truncated} truncated)"
        ));
    }
    b.push_table(summary);

    b.line(format!(
        "ratio curve over {} radii to {:.6}: {} monotonicity violations, {} of {} Ricci samples violated",
        cfg.radii, cfg.rmax, curve.monotonicity_violations, curve.ricci_violations, curve.ricci_samples
    ));
    b.line(format!(
        "direction refinement {} -> {}: relative change {refine_delta:.3e}",
        cfg.grid,
        2 * cfg.grid
    ));
    b.line(format!("ray coverage: {:.6}", curve.coverage));
    if curve.monotonicity_violations > 0 {
        b.fail(format!(
            "{} ratio increases along the comparison curve",
            curve.monotonicity_violations
        ));
    }
    if curve.ricci_violations > 0 {
        b.fail(format!(
            "{} of {} samples broke the Ricci hypothesis at K2 = {}",
            curve.ricci_violations, curve.ricci_samples, cfg.k2
        ));
    }
    b.write()
}
