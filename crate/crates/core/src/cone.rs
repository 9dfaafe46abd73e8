//! Null-cone geometry and cone-volume comparison.
//!
//! Three groups of tools around the causal cone of an observer:
//!
//! - **Localization**: sandwich the past null cone between two coordinate
//!   cones measured from the metric (lapse and spatial-eigenvalue bounds over
//!   the probe region), and verify by shooting null geodesics that the cone
//!   slices stay inside the predicted annulus.
//! - **Graph and null injectivity**: trace the cone boundary as a
//!   radius-per-depth graph along vertical coordinate lines (bisection
//!   against a null-generator fan), measure its empirical Lipschitz
//!   constant, and estimate the null injectivity radius by combining null
//!   conjugate points with confirmed meetings of distinct null rays.
//! - **Cone volumes**: volumes of truncated causal cones over a direction
//!   cap by Jacobian quadrature, the constant-curvature model volume, the
//!   nonincreasing volume-comparison ratio curve, and the volume-based
//!   lower bound with a cap-gap constant.
//!
//! Directions live on the unit reference sphere at the observer; the
//! geodesic parameter equals the reference radius there. Cone rays are
//! truncated at the first conjugate point and at chart exit when
//! accumulating volume (overlapping sheets past a conjugate point are cut,
//! matching the comparison argument that only runs to the cut locus).

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::config::MetricSpec;
use crate::dirlattice::{gauss_legendre, gauss_legendre_on, sphere_directions};
use crate::frames::{reference_metric_at, Observer, OrthoFrame};
use crate::geodesic::{exp_map, integrate_geodesic, velocity_norm2};
use crate::jacobi::{first_conjugate_point, integrate_jacobi};
use crate::ode::OdeOptions;
use crate::radius::CollisionEvent;
use crate::spacetime::{metric_at, riemann_at};
use crate::{Error, Result};

fn enorm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

// ---------------------------------------------------------------------------
// Cone localization
// ---------------------------------------------------------------------------

/// Coordinate-cone sandwich of the past null cone over a probe region.
///
/// With lapse `n ∈ [lapse_lo, lapse_hi]` and spatial metric eigenvalues in
/// `[eig_lo, eig_hi]` over the region, every null curve changes coordinate
/// radius per unit coordinate depth at a rate in `[slope_lo, slope_hi]`
/// (`slope_lo = lapse_lo/√eig_hi`, `slope_hi = lapse_hi/√eig_lo`): depth-`t`
/// slices of the cone lie in the annulus `[slope_lo·t, slope_hi·t]`.
#[derive(Debug, Clone)]
pub struct ConeLocalization {
    /// Infimum of the lapse over the sampled region.
    pub lapse_lo: f64,
    /// Supremum of the lapse over the sampled region.
    pub lapse_hi: f64,
    /// Smallest spatial-metric eigenvalue observed.
    pub eig_lo: f64,
    /// Largest spatial-metric eigenvalue observed.
    pub eig_hi: f64,
    /// Inner cone slope (coordinate radius per unit depth).
    pub slope_lo: f64,
    /// Outer cone slope.
    pub slope_hi: f64,
    /// Coordinate-time depth probed below the vertex.
    pub t_range: f64,
    /// Null rays shot for verification.
    pub rays: usize,
    /// Ray samples checked against the annulus.
    pub samples: usize,
    /// Samples outside the annulus (beyond tolerance).
    pub violations: usize,
}

/// Sampled profile of one past null generator: (depth below vertex,
/// coordinate radius from the vertex axis), strictly increasing in depth.
struct RayProfile {
    depth: Vec<f64>,
    rad: Vec<f64>,
}

impl RayProfile {
    fn max_depth(&self) -> f64 {
        *self.depth.last().unwrap_or(&0.0)
    }

    /// Radius at a given depth by linear interpolation.
    fn rad_at(&self, d: f64) -> f64 {
        match self.depth.binary_search_by(|v| v.total_cmp(&d)) {
            Ok(i) => self.rad[i],
            Err(0) => {
                if self.depth.is_empty() {
                    0.0
                } else {
                    self.rad[0] * d / self.depth[0].max(1e-300)
                }
            }
            Err(i) if i >= self.depth.len() => *self.rad.last().unwrap_or(&0.0),
            Err(i) => {
                let (d0, d1) = (self.depth[i - 1], self.depth[i]);
                let w = (d - d0) / (d1 - d0).max(1e-300);
                self.rad[i - 1] * (1.0 - w) + self.rad[i] * w
            }
        }
    }
}

/// Integrates one past null geodesic from `p` with initial velocity `v`
/// until it reaches coordinate depth `t_range` below `p` or exits the
/// chart, and samples its (depth, radius) profile.
fn shoot_null_profile(
    spec: &MetricSpec,
    p: &[f64],
    v: &[f64],
    t_range: f64,
    opts: &OdeOptions,
) -> Result<(RayProfile, Vec<Vec<f64>>)> {
    let mut s_end = 1.5 * t_range / v[0].abs().max(1e-12);
    let mut geo = integrate_geodesic(spec, p, v, s_end, opts)?;
    for _ in 0..4 {
        let deep = spec.chart_delta(&geo.point(geo.s_max()), p)[0];
        if -deep >= t_range || geo.left_chart() {
            break;
        }
        s_end *= 1.6;
        geo = integrate_geodesic(spec, p, v, s_end, opts)?;
    }
    let m = 256usize;
    let mut depth = Vec::new();
    let mut rad = Vec::new();
    let mut points = Vec::new();
    for k in 1..=m {
        let s = geo.s_max() * k as f64 / m as f64;
        let x = geo.point(s);
        let delta = spec.chart_delta(&x, p);
        let d = -delta[0];
        if d <= 0.0 || d > t_range {
            if d > t_range {
                break;
            }
            continue;
        }
        if let Some(last) = depth.last() {
            if d <= *last {
                continue;
            }
        }
        depth.push(d);
        rad.push(enorm(&delta[1..]));
        points.push(x);
    }
    Ok((RayProfile { depth, rad }, points))
}

/// Measures the coordinate-cone localization constants of the past null
/// cone at the observer over depth `t_range`, and verifies them against a
/// fan of `grid` shot null geodesics.
///
/// The lapse and spatial-eigenvalue bounds are taken over the fan sample
/// points plus a coordinate lattice covering the cone's bounding box, so
/// the resulting annulus is a statement about the probed region rather
/// than a single point. Requires a foliated metric (the split into lapse
/// and spatial block is what the slopes are made of).
pub fn localize_null_cone(
    spec: &MetricSpec,
    frame: &OrthoFrame,
    t_range: f64,
    grid: usize,
    opts: &OdeOptions,
) -> Result<ConeLocalization> {
    if !spec.is_foliated() {
        return Err(Error::Unsupported(
            "cone localization needs a foliated metric (lapse + spatial block)".into(),
        ));
    }
    if !(t_range > 0.0) {
        return Err(Error::InvalidSpec("cone localization needs t_range > 0".into()));
    }
    let dim = spec.dim;
    let p = &frame.point;

    // Fan of past null rays, frame components (−1, ω)/√2.
    let omegas = sphere_directions(dim - 1, grid.max(8));
    let shots: Vec<(RayProfile, Vec<Vec<f64>>)> = omegas
        .dirs
        .par_iter()
        .map(|w| {
            let mut xi = vec![-std::f64::consts::FRAC_1_SQRT_2];
            xi.extend(w.iter().map(|c| c * std::f64::consts::FRAC_1_SQRT_2));
            let v = frame.vector_from_frame(&xi);
            shoot_null_profile(spec, p, &v, t_range, opts)
        })
        .collect::<Result<Vec<_>>>()?;

    // Metric bounds over fan points plus a bounding-box lattice.
    let mut probe_points: Vec<Vec<f64>> = vec![p.clone()];
    let mut rad_max = 0.0f64;
    for (prof, pts) in &shots {
        probe_points.extend(pts.iter().cloned());
        rad_max = rad_max.max(prof.rad.last().copied().unwrap_or(0.0));
    }
    let lat = 5usize;
    let mut lattice_idx = vec![0usize; dim];
    loop {
        let mut x = p.clone();
        x[0] -= t_range * lattice_idx[0] as f64 / (lat - 1) as f64;
        for ax in 1..dim {
            x[ax] += 1.05 * rad_max * (2.0 * lattice_idx[ax] as f64 / (lat - 1) as f64 - 1.0);
        }
        if spec.chart_contains(&x) {
            probe_points.push(x);
        }
        let mut ax = 0;
        loop {
            if ax == dim {
                break;
            }
            lattice_idx[ax] += 1;
            if lattice_idx[ax] < lat {
                break;
            }
            lattice_idx[ax] = 0;
            ax += 1;
        }
        if ax == dim {
            break;
        }
    }
    let fol = spec.fol().expect("foliated");
    let mut lapse_lo = f64::INFINITY;
    let mut lapse_hi = 0.0f64;
    let mut eig_lo = f64::INFINITY;
    let mut eig_hi = 0.0f64;
    for x in &probe_points {
        let n = fol.lapse2(x).max(0.0).sqrt();
        lapse_lo = lapse_lo.min(n);
        lapse_hi = lapse_hi.max(n);
        let g = metric_at(spec, x)?.g;
        let sp = g.view((1, 1), (dim - 1, dim - 1)).into_owned();
        for e in sp.symmetric_eigen().eigenvalues.iter() {
            eig_lo = eig_lo.min(*e);
            eig_hi = eig_hi.max(*e);
        }
    }
    if !(eig_lo > 0.0 && lapse_lo > 0.0) {
        return Err(Error::numerical(
            "localize_null_cone",
            "degenerate lapse or spatial metric over the probe region".to_string(),
        ));
    }
    let slope_lo = lapse_lo / eig_hi.sqrt();
    let slope_hi = lapse_hi / eig_lo.sqrt();

    // Annulus verification along the fan.
    let mut samples = 0usize;
    let mut violations = 0usize;
    for (prof, _) in &shots {
        for (d, r) in prof.depth.iter().zip(&prof.rad) {
            if *d < 0.05 * t_range {
                continue;
            }
            samples += 1;
            let lo = slope_lo * d * (1.0 - 1e-6) - 1e-9;
            let hi = slope_hi * d * (1.0 + 1e-6) + 1e-9;
            if *r < lo || *r > hi {
                violations += 1;
            }
        }
    }
    if samples == 0 {
        return Err(Error::numerical(
            "localize_null_cone",
            "no fan sample reached the requested depth range".to_string(),
        ));
    }
    Ok(ConeLocalization {
        lapse_lo,
        lapse_hi,
        eig_lo,
        eig_hi,
        slope_lo,
        slope_hi,
        t_range,
        rays: shots.len(),
        samples,
        violations,
    })
}

// ---------------------------------------------------------------------------
// Cone graph
// ---------------------------------------------------------------------------

/// The past null cone traced as a radius-per-depth graph along vertical
/// coordinate lines.
#[derive(Debug)]
pub struct ConeGraph {
    /// Localization constants used for brackets and the annulus check.
    pub localization: ConeLocalization,
    /// Spatial coordinate unit directions of the bottom grid.
    pub directions: Vec<Vec<f64>>,
    /// Bottom-slice radii ρ_j shared across directions.
    pub bottom_radii: Vec<f64>,
    /// Crossing depth of the vertical line at radius ρ_j in direction k
    /// (`None` when the line missed the traced footprint).
    pub crossing_depths: Vec<Vec<Option<f64>>>,
    /// Largest |Δρ/Δτ| over consecutive crossings of one direction: the
    /// empirical Lipschitz constant of the cone graph (radius as a function
    /// of depth). Bounded by `localization.slope_hi` up to tolerance.
    pub lipschitz: f64,
    /// Crossings outside the annulus `[slope_lo·τ, slope_hi·τ]`.
    pub annulus_violations: usize,
    /// Vertical lines without a bracketed crossing, plus directions whose
    /// generator left the chart early.
    pub excluded: usize,
}

/// Traces the past cone boundary over a grid of `grid` spatial directions
/// and eight bottom radii per direction, to coordinate depth `depth`.
///
/// For each direction the oracle is the null generator launched along that
/// coordinate direction (transverse drift of generators is second-order in
/// the probe depth and absorbed by the annulus tolerance); each vertical
/// line is bisected between the annulus brackets until it crosses the
/// generator's radius profile.
pub fn cone_graph(
    spec: &MetricSpec,
    frame: &OrthoFrame,
    depth: f64,
    grid: usize,
    opts: &OdeOptions,
) -> Result<ConeGraph> {
    let localization = localize_null_cone(spec, frame, depth, grid, opts)?;
    let dim = spec.dim;
    let p = &frame.point;
    let g_p = metric_at(spec, p)?.g;
    let fol = spec.fol().expect("foliated");
    let n_p = fol.lapse2(p).max(0.0).sqrt();

    let omegas = sphere_directions(dim - 1, grid.max(8));
    let mut excluded = 0usize;
    let profiles: Vec<(Vec<f64>, RayProfile)> = omegas
        .dirs
        .par_iter()
        .map(|w| -> Result<(Vec<f64>, RayProfile)> {
            // Null launch with coordinate-spatial direction w.
            let mut q = 0.0;
            for i in 0..dim - 1 {
                for j in 0..dim - 1 {
                    q += g_p[(i + 1, j + 1)] * w[i] * w[j];
                }
            }
            let mut v = vec![-q.max(0.0).sqrt() / n_p];
            v.extend_from_slice(w);
            let (prof, _) = shoot_null_profile(spec, p, &v, depth, opts)?;
            Ok((w.clone(), prof))
        })
        .collect::<Result<Vec<_>>>()?;
    let kept: Vec<&(Vec<f64>, RayProfile)> = profiles
        .iter()
        .filter(|(_, prof)| prof.max_depth() >= 0.5 * depth)
        .collect();
    excluded += profiles.len() - kept.len();
    if kept.is_empty() {
        return Err(Error::numerical(
            "cone_graph",
            "every generator left the chart above half the requested depth".to_string(),
        ));
    }
    let rho_max = 0.9
        * kept
            .iter()
            .map(|(_, prof)| prof.rad_at(prof.max_depth()))
            .fold(f64::INFINITY, f64::min);
    let steps = 8usize;
    let bottom_radii: Vec<f64> =
        (1..=steps).map(|j| rho_max * j as f64 / steps as f64).collect();

    let mut directions = Vec::with_capacity(kept.len());
    let mut crossing_depths = Vec::with_capacity(kept.len());
    let mut lipschitz = 0.0f64;
    let mut annulus_violations = 0usize;
    for (w, prof) in &kept {
        let mut row: Vec<Option<f64>> = Vec::with_capacity(steps);
        for &rho in &bottom_radii {
            if rho >= prof.rad_at(prof.max_depth()) {
                excluded += 1;
                row.push(None);
                continue;
            }
            // Bracket from the annulus, then bisect the vertical line: the
            // point at depth τ is inside the past once the cone radius
            // exceeds ρ.
            let mut lo = (rho / localization.slope_hi * (1.0 - 1e-3)).max(0.0);
            let mut hi = (rho / localization.slope_lo * (1.0 + 1e-3)).min(prof.max_depth());
            if !(prof.rad_at(hi) > rho && prof.rad_at(lo) <= rho) {
                lo = 0.0;
                hi = prof.max_depth();
            }
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if prof.rad_at(mid) > rho {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let tau = 0.5 * (lo + hi);
            let alo = localization.slope_lo * tau * (1.0 - 1e-6) - 1e-9;
            let ahi = localization.slope_hi * tau * (1.0 + 1e-6) + 1e-9;
            if rho < alo || rho > ahi {
                annulus_violations += 1;
            }
            row.push(Some(tau));
        }
        for j in 1..steps {
            if let (Some(t0), Some(t1)) = (row[j - 1], row[j]) {
                let slope = (bottom_radii[j] - bottom_radii[j - 1]) / (t1 - t0).max(1e-300);
                lipschitz = lipschitz.max(slope);
            }
        }
        directions.push(w.clone());
        crossing_depths.push(row);
    }
    Ok(ConeGraph {
        localization,
        directions,
        bottom_radii,
        crossing_depths,
        lipschitz,
        annulus_violations,
        excluded,
    })
}

// ---------------------------------------------------------------------------
// Null injectivity radius
// ---------------------------------------------------------------------------

/// Damped Gauss–Newton least squares for (possibly underdetermined)
/// residual systems; returns the solution when the residual norm drops
/// below `tol`.
fn gauss_newton(
    residual: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    z0: &[f64],
    tol: f64,
) -> Option<Vec<f64>> {
    let n = z0.len();
    let mut z = z0.to_vec();
    let mut res = residual(&z).ok()?;
    let mut rn = enorm(&res);
    let mut lambda = 1e-10;
    for _ in 0..60 {
        if rn <= tol {
            return Some(z);
        }
        let m = res.len();
        let h = 1e-6 * (1.0 + enorm(&z));
        let mut jac = DMatrix::<f64>::zeros(m, n);
        for j in 0..n {
            let mut zp = z.clone();
            zp[j] += h;
            let rp = residual(&zp).ok()?;
            for i in 0..m {
                jac[(i, j)] = (rp[i] - res[i]) / h;
            }
        }
        let jt = jac.transpose();
        let mut a = &jt * &jac;
        for i in 0..n {
            a[(i, i)] += lambda * (1.0 + a[(i, i)]);
        }
        let b = &jt * DVector::from_column_slice(&res);
        let Some(step) = a.lu().solve(&b) else {
            lambda *= 10.0;
            continue;
        };
        let trial: Vec<f64> = z.iter().zip(step.iter()).map(|(a, d)| a - d).collect();
        match residual(&trial) {
            Ok(rt) if enorm(&rt) < rn => {
                z = trial;
                rn = enorm(&rt);
                res = rt;
                lambda = (lambda * 0.25).max(1e-12);
            }
            _ => {
                lambda *= 10.0;
                if lambda > 1e8 {
                    return None;
                }
            }
        }
    }
    if rn <= tol {
        Some(z)
    } else {
        None
    }
}

/// Injectivity data of the null cone at the observer.
#[derive(Debug, Clone)]
pub struct NullRadiusReport {
    /// Smallest conjugate radius along the scanned null rays.
    pub conj_radius: Option<f64>,
    /// Reference radius of the first confirmed meeting of two distinct
    /// null rays.
    pub meeting_radius: Option<f64>,
    /// Null injectivity estimate: located failures win, otherwise the
    /// certified reach.
    pub inj_estimate: f64,
    /// Radius up to which the absence of failures was actually checked.
    pub certified: f64,
    /// Cone-opening ratio `slope_lo/slope_hi ≤ 1` from the localization
    /// (`None` when the metric is not foliated).
    pub cone_ratio: Option<f64>,
    /// Guaranteed lower bound `cone_ratio⁶ · r0` when a chart scale `r0`
    /// was supplied alongside a successful localization.
    pub thm_bound: Option<f64>,
    /// Null directions scanned.
    pub directions: usize,
    /// Confirmed meetings, sorted by failure radius.
    pub events: Vec<CollisionEvent>,
}

/// Lifts a spatial frame vector to the future null vector `(|w_sp|, w_sp)`.
fn null_lift(w_sp: &[f64]) -> Vec<f64> {
    let mut w = Vec::with_capacity(w_sp.len() + 1);
    w.push(enorm(w_sp));
    w.extend_from_slice(w_sp);
    w
}

/// Scans future null rays for pairwise meetings (`exp(w₁) = exp(w₂)` with
/// both `wᵢ` null). Candidates come from a hash grid over ray samples;
/// each is polished by Gauss–Newton on the spatial parametrization of the
/// two null vectors, with an equal-radius row to pin the symmetric
/// configuration.
fn null_meeting_scan(
    spec: &MetricSpec,
    frame: &OrthoFrame,
    r_max: f64,
    count: usize,
    opts: &OdeOptions,
) -> Result<Vec<CollisionEvent>> {
    let dim = spec.dim;
    let p = &frame.point;
    let obs = Observer::new(spec, p, &frame.basis[0])?;
    let g_t = reference_metric_at(spec, &obs)?.g_t;
    let omegas = sphere_directions(dim - 1, count);
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let xis: Vec<Vec<f64>> = omegas
        .dirs
        .iter()
        .map(|w| {
            let mut xi = vec![inv_sqrt2];
            xi.extend(w.iter().map(|c| c * inv_sqrt2));
            xi
        })
        .collect();
    let geos: Vec<Option<crate::geodesic::Geodesic>> = xis
        .par_iter()
        .map(|xi| {
            let v = frame.vector_from_frame(xi);
            integrate_geodesic(spec, p, &v, r_max, opts).ok()
        })
        .collect();

    let steps = 72usize;
    let ds = r_max / steps as f64;
    let capture = 2.0 * ds;
    struct Sample {
        dir: usize,
        s: f64,
        x: Vec<f64>,
    }
    let mut samples = Vec::new();
    for (d, geo) in geos.iter().enumerate() {
        if let Some(geo) = geo {
            for k in 1..=steps {
                let s = k as f64 * ds;
                if s > geo.s_max() {
                    break;
                }
                samples.push(Sample { dir: d, s, x: geo.point(s) });
            }
        }
    }
    if dim > 8 {
        return Err(Error::Unsupported("null meeting scan supports dimension at most 8".into()));
    }
    let cell: Vec<f64> = (0..dim).map(|ax| capture / g_t[(ax, ax)].sqrt()).collect();
    let key_of = |x: &[f64]| -> [i32; 8] {
        let delta = spec.chart_delta(x, p);
        let mut k = [0i32; 8];
        for ax in 0..dim {
            k[ax] = (delta[ax] / cell[ax]).floor() as i32;
        }
        k
    };
    let mut grid: HashMap<[i32; 8], Vec<usize>> = HashMap::new();
    for (i, smp) in samples.iter().enumerate() {
        grid.entry(key_of(&smp.x)).or_default().push(i);
    }
    let mut offsets: Vec<[i32; 8]> = Vec::new();
    for mut code in 0..3usize.pow(dim as u32) {
        let mut off = [0i32; 8];
        for item in off.iter_mut().take(dim) {
            *item = (code % 3) as i32 - 1;
            code /= 3;
        }
        offsets.push(off);
    }
    let gt_dist = |a: &[f64], b: &[f64]| -> f64 {
        let d = spec.chart_delta(a, b);
        let mut acc = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                acc += g_t[(i, j)] * d[i] * d[j];
            }
        }
        acc.max(0.0).sqrt()
    };
    let min_s = 6.0 * ds;
    let mut pair_best: HashMap<(usize, usize), (f64, usize, usize)> = HashMap::new();
    for (i, smp) in samples.iter().enumerate() {
        let base = key_of(&smp.x);
        for off in &offsets {
            let mut k = base;
            for ax in 0..dim {
                k[ax] += off[ax];
            }
            let Some(bucket) = grid.get(&k) else { continue };
            for &j in bucket {
                if j <= i {
                    continue;
                }
                let other = &samples[j];
                if other.dir == smp.dir {
                    continue;
                }
                if smp.s.max(other.s) < min_s {
                    continue;
                }
                let mut tan_sep2 = 0.0;
                for ax in 0..dim {
                    let d = xis[smp.dir][ax] * smp.s - xis[other.dir][ax] * other.s;
                    tan_sep2 += d * d;
                }
                if tan_sep2 < 25.0 * capture * capture {
                    continue;
                }
                if gt_dist(&smp.x, &other.x) >= capture {
                    continue;
                }
                let key = (smp.dir.min(other.dir), smp.dir.max(other.dir));
                let cand = smp.s.max(other.s);
                let e = pair_best.entry(key).or_insert((cand, i, j));
                if cand < e.0 {
                    *e = (cand, i, j);
                }
            }
        }
    }
    let mut cands: Vec<(f64, usize, usize)> = pair_best.into_values().collect();
    cands.sort_by(|a, b| a.0.total_cmp(&b.0));

    let m_sp = dim - 1;
    let exp_pt = |w_sp: &[f64]| -> Result<Vec<f64>> {
        let r = exp_map(spec, frame, &null_lift(w_sp), opts)?;
        r.point.ok_or_else(|| {
            Error::numerical("null_meeting", "ray left the chart".to_string())
        })
    };
    let mut events: Vec<CollisionEvent> = Vec::new();
    for (_, i, j) in cands.into_iter().take(48) {
        // Spatial parts of the two null tangents; parameter s at gT radius
        // s means spatial length s/√2.
        let w1_sp: Vec<f64> =
            omegas.dirs[samples[i].dir].iter().map(|c| c * samples[i].s * inv_sqrt2).collect();
        let w2_sp: Vec<f64> =
            omegas.dirs[samples[j].dir].iter().map(|c| c * samples[j].s * inv_sqrt2).collect();
        let residual = |z: &[f64]| -> Result<Vec<f64>> {
            let (a, b) = z.split_at(m_sp);
            let qa = exp_pt(a)?;
            let qb = exp_pt(b)?;
            let mut f = spec.chart_delta(&qa, &qb);
            f.push(enorm(a) - enorm(b));
            Ok(f)
        };
        let mut z0 = w1_sp.clone();
        z0.extend_from_slice(&w2_sp);
        let tol = 1e-9 * (1.0 + enorm(&w1_sp));
        let Some(z) = gauss_newton(&residual, &z0, tol) else { continue };
        let (a, b) = z.split_at(m_sp);
        let sep = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        if sep < 1e-3 * (1.0 + enorm(a)) {
            continue;
        }
        let w1 = null_lift(a);
        let w2 = null_lift(b);
        let r_fail = (2.0f64).sqrt() * enorm(a).max(enorm(b));
        if r_fail < 0.5 * min_s || r_fail > 1.5 * r_max {
            continue;
        }
        let Ok(point) = exp_pt(a) else { continue };
        let dup = events.iter().any(|e| {
            (e.r_fail - r_fail).abs() < 1e-6 * (1.0 + r_fail)
                && enorm(&spec.chart_delta(&e.point, &point)) < 1e-5 * (1.0 + r_fail)
        });
        if dup {
            continue;
        }
        events.push(CollisionEvent {
            xi1: w1,
            xi2: w2,
            point,
            r_fail,
            loop_length: 2.0 * r_fail,
            is_loop: false,
        });
    }
    events.sort_by(|a, b| a.r_fail.total_cmp(&b.r_fail));
    events.truncate(16);
    Ok(events)
}

/// Estimates the injectivity radius of the future null cone: scans `count`
/// null directions up to reference radius `r_max` for conjugate points and
/// for meetings of distinct null rays, and evaluates the guaranteed bound
/// `(slope_lo/slope_hi)⁶ · r0` when a chart scale `r0` is supplied and the
/// metric is foliated.
pub fn null_injectivity_radius(
    spec: &MetricSpec,
    frame: &OrthoFrame,
    r_max: f64,
    count: usize,
    chain_r0: Option<f64>,
    opts: &OdeOptions,
) -> Result<NullRadiusReport> {
    if spec.dim < 3 {
        return Err(Error::Unsupported("null cone scans need dimension at least 3".into()));
    }
    if !(r_max > 0.0) {
        return Err(Error::InvalidSpec("null radius needs r_max > 0".into()));
    }
    let dim = spec.dim;
    let omegas = sphere_directions(dim - 1, count);
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let outcomes: Vec<(Option<f64>, f64)> = omegas
        .dirs
        .par_iter()
        .map(|w| -> Result<(Option<f64>, f64)> {
            let mut xi = vec![inv_sqrt2];
            xi.extend(w.iter().map(|c| c * inv_sqrt2));
            let track = integrate_jacobi(spec, frame, &xi, r_max, opts)?;
            let reach = if track.left_chart { track.s_max() } else { r_max };
            let conj = first_conjugate_point(&track);
            Ok((conj.s_conj, reach))
        })
        .collect::<Result<Vec<_>>>()?;
    let conj_radius = outcomes
        .iter()
        .filter_map(|(c, _)| *c)
        .min_by(|a, b| a.total_cmp(b));
    let certified = outcomes.iter().map(|(_, r)| *r).fold(r_max, f64::min);

    let events = null_meeting_scan(spec, frame, r_max, count, opts)?;
    let meeting_radius = events.first().map(|e| e.r_fail);

    let inj_estimate = match (conj_radius, meeting_radius) {
        (Some(c), Some(m)) => c.min(m),
        (Some(c), None) => c,
        (None, Some(m)) => m,
        (None, None) => certified,
    };

    let (cone_ratio, thm_bound) = if spec.is_foliated() {
        match localize_null_cone(spec, frame, 0.25 * r_max, count.min(64), opts) {
            Ok(loc) => {
                let ratio = (loc.slope_lo / loc.slope_hi).min(1.0);
                (Some(ratio), chain_r0.map(|r0| ratio.powi(6) * r0))
            }
            Err(_) => (None, None),
        }
    } else {
        (None, None)
    };

    Ok(NullRadiusReport {
        conj_radius,
        meeting_radius,
        inj_estimate,
        certified,
        cone_ratio,
        thm_bound,
        directions: omegas.dirs.len(),
        events,
    })
}

// ---------------------------------------------------------------------------
// Cone volumes
// ---------------------------------------------------------------------------

/// Time orientation of a causal cone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeOrientation {
    Future,
    Past,
}

/// A truncated causal cone: directions on the unit reference sphere within
/// a band of angles from the observer axis, out to reference radius `r`.
///
/// The reference angle `α` from the ±T axis classifies causal character:
/// `α < π/4` is timelike, `α = π/4` null. Bands must stay inside the
/// timelike range.
#[derive(Debug, Clone, Copy)]
pub struct ConeSpec {
    pub orientation: ConeOrientation,
    /// Inner band angle (0 for a solid cap).
    pub alpha_lo: f64,
    /// Outer band angle, at most π/4.
    pub alpha_hi: f64,
    /// Reference radius of the truncation.
    pub r: f64,
}

impl ConeSpec {
    pub fn new(
        orientation: ConeOrientation,
        alpha_lo: f64,
        alpha_hi: f64,
        r: f64,
    ) -> Result<Self> {
        let quarter = std::f64::consts::FRAC_PI_4;
        if !(0.0 <= alpha_lo && alpha_lo < alpha_hi && alpha_hi <= quarter + 1e-12) {
            return Err(Error::InvalidSpec(
                "cone band needs 0 <= alpha_lo < alpha_hi <= pi/4".into(),
            ));
        }
        if !(r > 0.0) {
            return Err(Error::InvalidSpec("cone needs r > 0".into()));
        }
        Ok(ConeSpec { orientation, alpha_lo, alpha_hi, r })
    }

    /// Solid cap of half-angle `alpha` around the axis.
    pub fn cap(orientation: ConeOrientation, alpha: f64, r: f64) -> Result<Self> {
        ConeSpec::new(orientation, 0.0, alpha, r)
    }

    /// Reference solid angle of the direction band on the unit sphere.
    pub fn solid_angle(&self, dim: usize) -> f64 {
        let (nodes, weights) = gauss_legendre_on(self.alpha_lo, self.alpha_hi, 32);
        let shell = crate::dirlattice::sphere_area(dim - 1);
        let band: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(a, w)| w * a.sin().powi(dim as i32 - 2))
            .sum();
        shell * band
    }
}

/// Measured cone volume with quadrature coverage data.
#[derive(Debug, Clone)]
pub struct ConeVolume {
    pub volume: f64,
    /// Fraction of quadrature rays that reached the full radius before the
    /// chart boundary or a conjugate point.
    pub coverage: f64,
    pub rays: usize,
    pub truncated: usize,
    /// Reference solid angle of the direction band.
    pub solid_angle: f64,
}

/// Volume of the truncated causal cone by Jacobian quadrature:
/// `∫_band ∫₀^r |det M(s)| ds dΩ` over a product of a direction lattice
/// (`count` points on the transverse sphere), a 16-node angular rule with
/// the sphere measure `sin^{d−2}α`, and a 24-node radial rule per ray.
/// Rays stop at the first conjugate point and at chart exit.
pub fn future_cone_volume(
    spec: &MetricSpec,
    frame: &OrthoFrame,
    cone: &ConeSpec,
    count: usize,
    opts: &OdeOptions,
) -> Result<ConeVolume> {
    curve_volumes(spec, frame, cone, &[cone.r], count, opts).map(|(vols, cov, rays, trunc)| {
        ConeVolume {
            volume: vols[0],
            coverage: cov,
            rays,
            truncated: trunc,
            solid_angle: cone.solid_angle(spec.dim),
        }
    })
}

/// Shared quadrature core: volumes of the cone truncated at each radius in
/// `radii` (nondecreasing), from a single fan of Jacobi tracks.
fn curve_volumes(
    spec: &MetricSpec,
    frame: &OrthoFrame,
    cone: &ConeSpec,
    radii: &[f64],
    count: usize,
    opts: &OdeOptions,
) -> Result<(Vec<f64>, f64, usize, usize)> {
    let dim = spec.dim;
    if dim < 3 {
        return Err(Error::Unsupported("cone volumes need dimension at least 3".into()));
    }
    let r_last = *radii.last().expect("nonempty radii");
    let omegas = sphere_directions(dim - 1, count);
    let (a_nodes, a_weights) = gauss_legendre_on(cone.alpha_lo, cone.alpha_hi, 16);
    let (r_nodes, r_weights) = gauss_legendre(24);
    let sign = match cone.orientation {
        ConeOrientation::Future => 1.0,
        ConeOrientation::Past => -1.0,
    };

    struct RayOut {
        weight: f64,
        vols: Vec<f64>,
        full: bool,
    }
    let rays: Vec<RayOut> = omegas
        .dirs
        .par_iter()
        .zip(omegas.weights.par_iter())
        .flat_map_iter(|(w, w_omega)| {
            a_nodes.iter().zip(&a_weights).map(move |(alpha, w_alpha)| {
                (w, *w_omega, *alpha, *w_alpha)
            })
        })
        .map(|(w, w_omega, alpha, w_alpha)| -> Result<RayOut> {
            let mut xi = vec![sign * alpha.cos()];
            xi.extend(w.iter().map(|c| c * alpha.sin()));
            let track = integrate_jacobi(spec, frame, &xi, r_last, opts)?;
            let conj = first_conjugate_point(&track);
            let stop_base = track
                .s_max()
                .min(conj.s_conj.unwrap_or(f64::INFINITY));
            let weight = w_omega * w_alpha * alpha.sin().powi(dim as i32 - 2);
            let vols = radii
                .iter()
                .map(|&r| {
                    let stop = stop_base.min(r);
                    if stop <= 0.0 {
                        return 0.0;
                    }
                    let half = 0.5 * stop;
                    r_nodes
                        .iter()
                        .zip(&r_weights)
                        .map(|(u, gw)| gw * half * track.det_m(half * (1.0 + u)).abs())
                        .sum()
                })
                .collect();
            Ok(RayOut { weight, vols, full: stop_base >= r_last })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut vols = vec![0.0; radii.len()];
    for ray in &rays {
        for (v, rv) in vols.iter_mut().zip(&ray.vols) {
            *v += ray.weight * rv;
        }
    }
    let full = rays.iter().filter(|r| r.full).count();
    let truncated = rays.len() - full;
    Ok((vols, full as f64 / rays.len().max(1) as f64, rays.len(), truncated))
}

/// `sinh(x)/x`, series-safe near zero.
fn sinh_ratio(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 + x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sinh() / x
    }
}

/// Ball volume in the constant-curvature comparison space:
/// `solid_angle · ∫₀^r (sinh(√K2·s)/√K2)ⁿ ds`, with the flat limit `sⁿ`
/// (continuous as `K2 → 0`). `n` is the transverse dimension.
pub fn model_volume(k2: f64, r: f64, n: usize, solid_angle: f64) -> Result<f64> {
    if k2 < 0.0 || !(r >= 0.0) {
        return Err(Error::InvalidSpec("model volume needs K2 >= 0 and r >= 0".into()));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let k = k2.sqrt();
    let (nodes, weights) = gauss_legendre_on(0.0, r, 32);
    let integral: f64 = nodes
        .iter()
        .zip(&weights)
        .map(|(s, w)| w * (s * sinh_ratio(k * s)).powi(n as i32))
        .sum();
    Ok(solid_angle * integral)
}

/// Volume-comparison curve: cone volumes against the constant-curvature
/// model at each radius.
#[derive(Debug, Clone)]
pub struct VolumeCurve {
    pub radii: Vec<f64>,
    pub volumes: Vec<f64>,
    pub model_volumes: Vec<f64>,
    /// `volumes / model_volumes`; nonincreasing whenever the sampled Ricci
    /// hypothesis holds.
    pub ratios: Vec<f64>,
    /// Consecutive ratio increases beyond `1e−6` relative slack.
    pub monotonicity_violations: usize,
    /// Ricci-hypothesis samples along rays (`Ric(V,V) ≥ −n·K2·|g(V,V)|`).
    pub ricci_samples: usize,
    pub ricci_violations: usize,
    /// Fraction of rays reaching the final radius untruncated.
    pub coverage: f64,
}

/// Evaluates the cone-to-model volume ratio at the given radii (strictly
/// increasing), with the model normalized to the same direction band so the
/// ratio tends to 1 as `r → 0`. The Ricci lower-bound hypothesis is sampled
/// along a sub-fan of rays; violations are counted, not fatal.
pub fn comparison_ratio_curve(
    spec: &MetricSpec,
    frame: &OrthoFrame,
    cone: &ConeSpec,
    radii: &[f64],
    k2: f64,
    count: usize,
    opts: &OdeOptions,
) -> Result<VolumeCurve> {
    if radii.is_empty() || radii.windows(2).any(|w| w[1] <= w[0]) || radii[0] <= 0.0 {
        return Err(Error::InvalidSpec(
            "ratio curve needs strictly increasing positive radii".into(),
        ));
    }
    if k2 < 0.0 {
        return Err(Error::InvalidSpec("ratio curve needs K2 >= 0".into()));
    }
    let dim = spec.dim;
    let (volumes, coverage, _, _) = curve_volumes(spec, frame, cone, radii, count, opts)?;
    let solid_angle = cone.solid_angle(dim);
    let model_volumes: Vec<f64> = radii
        .iter()
        .map(|&r| model_volume(k2, r, dim - 1, solid_angle))
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> =
        volumes.iter().zip(&model_volumes).map(|(v, m)| v / m).collect();
    let monotonicity_violations = ratios
        .windows(2)
        .filter(|w| w[1] > w[0] + 1e-6 * (1.0 + w[0].abs()))
        .count();

    // Ricci hypothesis along a deterministic sub-fan at three band angles.
    let r_last = *radii.last().unwrap();
    let sign = match cone.orientation {
        ConeOrientation::Future => 1.0,
        ConeOrientation::Past => -1.0,
    };
    let omegas = sphere_directions(dim - 1, count.min(16));
    let fractions = [0.3, 0.6, 0.9];
    let band = [
        cone.alpha_lo + 0.25 * (cone.alpha_hi - cone.alpha_lo),
        0.5 * (cone.alpha_lo + cone.alpha_hi),
        cone.alpha_lo + 0.75 * (cone.alpha_hi - cone.alpha_lo),
    ];
    let checks: Vec<bool> = omegas
        .dirs
        .par_iter()
        .flat_map_iter(|w| {
            band.iter().map(move |alpha| {
                let mut xi = vec![sign * alpha.cos()];
                xi.extend(w.iter().map(|c| c * alpha.sin()));
                xi
            })
        })
        .flat_map_iter(|xi| {
            let v = frame.vector_from_frame(&xi);
            let mut out = Vec::new();
            if let Ok(geo) = integrate_geodesic(spec, &frame.point, &v, r_last, opts) {
                for f in fractions {
                    let s = f * geo.s_max().min(r_last);
                    let x = geo.point(s);
                    let vel = geo.velocity(s);
                    let (Ok(riem), Ok(g)) = (riemann_at(spec, &x), metric_at(spec, &x)) else {
                        continue;
                    };
                    let Ok(vv) = velocity_norm2(spec, &x, &vel) else { continue };
                    let mut ric_vv = 0.0;
                    for al in 0..dim {
                        for ga in 0..dim {
                            let ginv = g.g_inv[(al, ga)];
                            if ginv == 0.0 {
                                continue;
                            }
                            for be in 0..dim {
                                for de in 0..dim {
                                    ric_vv += ginv
                                        * riem.riem.get(al, be, ga, de)
                                        * vel[be]
                                        * vel[de];
                                }
                            }
                        }
                    }
                    let floor = -((dim - 1) as f64) * k2 * vv.abs();
                    out.push(ric_vv >= floor - 1e-6 * (1.0 + floor.abs()));
                }
            }
            out
        })
        .collect();
    let ricci_samples = checks.len();
    let ricci_violations = checks.iter().filter(|ok| !**ok).count();

    Ok(VolumeCurve {
        radii: radii.to_vec(),
        volumes,
        model_volumes,
        ratios,
        monotonicity_violations,
        ricci_samples,
        ricci_violations,
        coverage,
    })
}

/// The volume-based null-cone lower bound and its ingredients.
#[derive(Debug, Clone)]
pub struct CorollaryBound {
    /// `c_sigma · v0 / r0^dim · r0`.
    pub bound: f64,
    /// Band constant: `(1/8) · gap/(π/4)`, linear in the angular gap
    /// between the band edge and the null cone (a documented surrogate for
    /// the distance-dependent constant).
    pub c_sigma: f64,
    /// `π/4 − alpha_hi`.
    pub gap: f64,
    pub r0: f64,
    pub v0: f64,
    /// Measured cone volume at `r0` for the hypothesis check.
    pub measured_volume: f64,
    /// True when the measured volume fails the `≥ v0` hypothesis, making
    /// the bound vacuous.
    pub vacuous: bool,
}

/// Volume-based lower bound from a cone-volume hypothesis: if the cone
/// over the band holds volume at least `v0` at radius `r0`, the bound is
/// `c_sigma · v0 / r0^dim · r0` with `c_sigma` shrinking linearly as the
/// band approaches the null cone.
pub fn corollary_volume_bound(
    spec: &MetricSpec,
    frame: &OrthoFrame,
    cone: &ConeSpec,
    r0: f64,
    v0: f64,
    count: usize,
    opts: &OdeOptions,
) -> Result<CorollaryBound> {
    if !(r0 > 0.0 && v0 >= 0.0) {
        return Err(Error::InvalidSpec("volume bound needs r0 > 0 and v0 >= 0".into()));
    }
    let quarter = std::f64::consts::FRAC_PI_4;
    let gap = quarter - cone.alpha_hi;
    if gap <= 0.0 {
        return Err(Error::InvalidSpec(
            "volume bound needs a band strictly inside the null cone".into(),
        ));
    }
    let truncated = ConeSpec { r: r0, ..*cone };
    let measured = future_cone_volume(spec, frame, &truncated, count, opts)?;
    let c_sigma = 0.125 * gap / quarter;
    let bound = c_sigma * v0 / r0.powi(spec.dim as i32) * r0;
    Ok(CorollaryBound {
        bound,
        c_sigma,
        gap,
        r0,
        v0,
        measured_volume: measured.volume,
        vacuous: measured.volume + 1e-12 < v0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_metric_spec;
    use crate::frames::complete_frame;
    use crate::radius::injectivity_radius;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn frame_at(spec: &MetricSpec, p: &[f64]) -> OrthoFrame {
        let obs = Observer::foliation_normal(spec, p).unwrap();
        complete_frame(spec, &obs).unwrap()
    }

    fn rescaled_flat_spec() -> MetricSpec {
        parse_metric_spec(
            "[model]\nkind = foliated\ndim = 4\n\n[lapse]\nn = 1\n\n[spatial]\ng11 = 4\ng22 = 4\ng33 = 4\n\n[domain]\nt = -10 10\nx1 = -10 10\nx2 = -10 10\nx3 = -10 10\n",
        )
        .unwrap()
    }

    #[test]
    fn localize_minkowski_cone_is_exact() {
        let spec = MetricSpec::minkowski(4);
        let frame = frame_at(&spec, &[0.0; 4]);
        let loc = localize_null_cone(&spec, &frame, 0.8, 32, &OdeOptions::default()).unwrap();
        assert_relative_eq!(loc.slope_lo, 1.0, epsilon = 1e-9);
        assert_relative_eq!(loc.slope_hi, 1.0, epsilon = 1e-9);
        assert_eq!(loc.violations, 0);
        assert!(loc.samples > 1000);
    }

    #[test]
    fn localize_rescaled_flat_slope_half() {
        let spec = rescaled_flat_spec();
        let frame = frame_at(&spec, &[0.0; 4]);
        let loc = localize_null_cone(&spec, &frame, 0.8, 32, &OdeOptions::default()).unwrap();
        assert_relative_eq!(loc.slope_lo, 0.5, epsilon = 1e-9);
        assert_relative_eq!(loc.slope_hi, 0.5, epsilon = 1e-9);
        assert_eq!(loc.violations, 0);
    }

    #[test]
    fn localize_schwarzschild_annulus_holds() {
        let spec = MetricSpec::schwarzschild(1.0);
        let frame = frame_at(&spec, &[0.0, 10.0, PI / 2.0, 0.0]);
        // Verification fan at 10x the default direction grid.
        let loc = localize_null_cone(&spec, &frame, 0.5, 160, &OdeOptions::default()).unwrap();
        assert_eq!(loc.violations, 0, "slopes [{}, {}]", loc.slope_lo, loc.slope_hi);
        assert!(loc.slope_lo > 0.0 && loc.slope_lo < loc.slope_hi);
    }

    #[test]
    fn cone_graph_minkowski_lipschitz_one() {
        let spec = MetricSpec::minkowski(4);
        let frame = frame_at(&spec, &[0.0; 4]);
        let graph = cone_graph(&spec, &frame, 0.8, 24, &OdeOptions::default()).unwrap();
        assert_relative_eq!(graph.lipschitz, 1.0, epsilon = 1e-6);
        assert_eq!(graph.annulus_violations, 0);
        assert_eq!(graph.excluded, 0);
    }

    #[test]
    fn cone_graph_rescaled_lipschitz_half() {
        let spec = rescaled_flat_spec();
        let frame = frame_at(&spec, &[0.0; 4]);
        let graph = cone_graph(&spec, &frame, 0.8, 24, &OdeOptions::default()).unwrap();
        assert_relative_eq!(graph.lipschitz, 0.5, epsilon = 1e-6);
        assert_eq!(graph.annulus_violations, 0);
    }

    #[test]
    fn cone_graph_desitter_respects_measured_slope() {
        let spec = MetricSpec::desitter_slicing(1.0, 4);
        let frame = frame_at(&spec, &[0.0; 4]);
        let graph = cone_graph(&spec, &frame, 0.4, 24, &OdeOptions::default()).unwrap();
        assert!(
            graph.lipschitz <= graph.localization.slope_hi * (1.0 + 1e-3),
            "lipschitz {} vs slope_hi {}",
            graph.lipschitz,
            graph.localization.slope_hi
        );
        assert_eq!(graph.annulus_violations, 0);
    }

    #[test]
    fn null_radius_minkowski_is_reach_limited() {
        let spec = MetricSpec::minkowski(4);
        let frame = frame_at(&spec, &[0.0; 4]);
        let rep =
            null_injectivity_radius(&spec, &frame, 2.0, 48, Some(0.5), &OdeOptions::default())
                .unwrap();
        assert!(rep.conj_radius.is_none());
        assert!(rep.meeting_radius.is_none());
        assert_relative_eq!(rep.inj_estimate, 2.0, epsilon = 1e-12);
        // Exact cone: ratio 1, so the bound is the supplied chart scale.
        assert_relative_eq!(rep.cone_ratio.unwrap(), 1.0, epsilon = 1e-9);
        assert_relative_eq!(rep.thm_bound.unwrap(), 0.5, epsilon = 1e-9);
        assert!(rep.thm_bound.unwrap() <= rep.inj_estimate);
    }

    #[test]
    fn null_radius_torus_finds_meeting() {
        // Null lines wrap the torus: two rays with opposite unit spatial
        // parts along a period axis meet at spatial length L, i.e. at
        // reference radius √2·(L/2)·... = √2 for L = 2.
        let spec = MetricSpec::flat_spatial_torus(2.0, 3);
        let frame = frame_at(&spec, &[0.0, 0.4, -0.3]);
        let rep = null_injectivity_radius(&spec, &frame, 2.2, 96, None, &OdeOptions::default())
            .unwrap();
        let meet = rep.meeting_radius.expect("null meeting not found");
        assert_relative_eq!(meet, std::f64::consts::SQRT_2, max_relative = 2e-2);
        assert!(rep.conj_radius.is_none());
        assert_relative_eq!(rep.inj_estimate, meet, epsilon = 0.0);
        // The confirmed pair is symmetric: equal spatial radii, opposite
        // spatial directions.
        let e = &rep.events[0];
        let (s1, s2) = (enorm(&e.xi1[1..]), enorm(&e.xi2[1..]));
        assert_relative_eq!(s1, s2, max_relative = 1e-6);
        let dot: f64 = e.xi1[1..].iter().zip(&e.xi2[1..]).map(|(a, b)| a * b).sum();
        assert!(dot < -0.99 * s1 * s2, "not antipodal: dot {dot}");
    }

    #[test]
    fn flat_cone_volume_matches_closed_form_two_ways() {
        // Full future cone (band up to π/4), r = 1, dim 4. Closed form
        // π(π−2)/8; independent dual route: the elementary spacetime
        // integral 4π ∫ ρ²(√(1−ρ²) − ρ) dρ over ρ ∈ [0, 1/√2].
        let spec = MetricSpec::minkowski(4);
        let frame = frame_at(&spec, &[0.0; 4]);
        let cone = ConeSpec::cap(ConeOrientation::Future, PI / 4.0, 1.0).unwrap();
        let out = future_cone_volume(&spec, &frame, &cone, 64, &OdeOptions::default()).unwrap();
        let closed = PI * (PI - 2.0) / 8.0;
        let m = 4000;
        let h = std::f64::consts::FRAC_1_SQRT_2 / m as f64;
        let mut simpson = 0.0;
        for k in 0..=m {
            let rho = k as f64 * h;
            let f = rho * rho * ((1.0 - rho * rho).max(0.0).sqrt() - rho);
            let w = if k == 0 || k == m {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            simpson += w * f;
        }
        simpson *= 4.0 * PI * h / 3.0;
        assert_relative_eq!(simpson, closed, max_relative = 1e-9);
        assert_relative_eq!(out.volume, closed, max_relative = 1e-9);
        assert_relative_eq!(out.coverage, 1.0, epsilon = 0.0);
        // Scaling: volume ~ r^4.
        let half = ConeSpec::cap(ConeOrientation::Future, PI / 4.0, 0.5).unwrap();
        let out2 = future_cone_volume(&spec, &frame, &half, 64, &OdeOptions::default()).unwrap();
        assert_relative_eq!(out2.volume, closed / 16.0, max_relative = 1e-9);
    }

    #[test]
    fn narrow_cap_has_flat_leading_order() {
        let spec = MetricSpec::schwarzschild(1.0);
        let frame = frame_at(&spec, &[0.0, 8.0, PI / 2.0, 0.0]);
        let cone = ConeSpec::cap(ConeOrientation::Future, 0.05, 0.05).unwrap();
        let out = future_cone_volume(&spec, &frame, &cone, 32, &OdeOptions::default()).unwrap();
        let flat = out.solid_angle * 0.05f64.powi(4) / 4.0;
        assert_relative_eq!(out.volume, flat, max_relative = 1e-2);
    }

    #[test]
    fn cone_volume_additive_over_bands() {
        let spec = MetricSpec::desitter_slicing(1.0, 4);
        let frame = frame_at(&spec, &[0.0; 4]);
        let opts = OdeOptions::default();
        let lohi = |lo: f64, hi: f64| {
            let cone = ConeSpec::new(ConeOrientation::Future, lo, hi, 0.8).unwrap();
            future_cone_volume(&spec, &frame, &cone, 48, &opts).unwrap().volume
        };
        let a = lohi(0.0, 0.35);
        let b = lohi(0.35, 0.7);
        let whole = lohi(0.0, 0.7);
        assert_relative_eq!(a + b, whole, max_relative = 1e-6);
    }

    #[test]
    fn cone_volume_quadrature_refinement_consistent() {
        let spec = MetricSpec::minkowski(4);
        let frame = frame_at(&spec, &[0.0; 4]);
        let cone = ConeSpec::cap(ConeOrientation::Future, PI / 4.0, 1.0).unwrap();
        let closed = PI * (PI - 2.0) / 8.0;
        let opts = OdeOptions::default();
        let coarse =
            (future_cone_volume(&spec, &frame, &cone, 32, &opts).unwrap().volume - closed).abs();
        let fine =
            (future_cone_volume(&spec, &frame, &cone, 128, &opts).unwrap().volume - closed).abs();
        assert!(fine <= coarse + 1e-12, "fine {fine} vs coarse {coarse}");
    }

    #[test]
    fn model_volume_closed_forms() {
        // Flat: r⁴/4 × solid angle.
        let v0 = model_volume(0.0, 2.0, 3, 1.5).unwrap();
        assert_relative_eq!(v0, 1.5 * 16.0 / 4.0, epsilon = 1e-12);
        // Continuity at K2 → 0.
        let v_eps = model_volume(1e-12, 2.0, 3, 1.5).unwrap();
        assert!((v_eps - v0).abs() < 1e-9);
        // K2 = 1, n = 3: ∫₀¹ sinh³ = (cosh³1 − 3cosh1 + 2)/3.
        let c = 1.0f64.cosh();
        let exact = (c * c * c - 3.0 * c + 2.0) / 3.0;
        let v1 = model_volume(1.0, 1.0, 3, 1.0).unwrap();
        assert_relative_eq!(v1, exact, max_relative = 1e-9);
    }

    #[test]
    fn ratio_curve_flat_against_flat_is_constant() {
        let spec = MetricSpec::minkowski(4);
        let frame = frame_at(&spec, &[0.0; 4]);
        let cone = ConeSpec::cap(ConeOrientation::Future, 0.6, 1.0).unwrap();
        let radii: Vec<f64> = (1..=20).map(|k| 0.05 * k as f64).collect();
        let curve =
            comparison_ratio_curve(&spec, &frame, &cone, &radii, 0.0, 48, &OdeOptions::default())
                .unwrap();
        assert_eq!(curve.monotonicity_violations, 0);
        assert_eq!(curve.ricci_violations, 0);
        for r in &curve.ratios {
            assert_relative_eq!(*r, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn ratio_curve_flat_against_curved_model_decreases() {
        let spec = MetricSpec::minkowski(4);
        let frame = frame_at(&spec, &[0.0; 4]);
        let cone = ConeSpec::cap(ConeOrientation::Future, 0.6, 1.0).unwrap();
        let radii: Vec<f64> = (1..=20).map(|k| 0.05 * k as f64).collect();
        let curve =
            comparison_ratio_curve(&spec, &frame, &cone, &radii, 1.0, 48, &OdeOptions::default())
                .unwrap();
        assert_eq!(curve.monotonicity_violations, 0);
        assert_eq!(curve.ricci_violations, 0);
        for w in curve.ratios.windows(2) {
            assert!(w[1] < w[0], "ratio not strictly decreasing: {w:?}");
        }
    }

    #[test]
    fn ratio_curve_desitter_matches_tilted_closed_form() {
        // Constant curvature: a band direction tilted by α from the axis is
        // reference-unit but has |g(ξ,ξ)| = cos 2α = c², so each transverse
        // leg grows as sinh(cs)/c and |det M| = (sinh(cs)/c)^3.  The cone
        // volume therefore has the closed form
        //   V(r) = 4π ∫ sin²α · c⁻⁴ (cosh³(cr)/3 − cosh(cr) + 2/3) dα,
        // an independent oracle for the full quadrature stack.  Against the
        // axis model sinh³ s the ratio starts at 1 (r → 0) and decreases,
        // and the Ricci hypothesis holds with equality on the axis.
        let spec = MetricSpec::desitter_slicing(1.0, 4);
        let frame = frame_at(&spec, &[0.0; 4]);
        let alpha_hi = 0.6;
        let cone = ConeSpec::cap(ConeOrientation::Future, alpha_hi, 1.0).unwrap();
        let radii: Vec<f64> = (1..=20).map(|k| 0.05 * k as f64).collect();
        let curve =
            comparison_ratio_curve(&spec, &frame, &cone, &radii, 1.0, 48, &OdeOptions::default())
                .unwrap();
        assert_eq!(curve.monotonicity_violations, 0);
        assert_eq!(curve.ricci_violations, 0);
        assert_relative_eq!(curve.coverage, 1.0, epsilon = 0.0);

        let oracle = |r: f64| {
            let shell = crate::dirlattice::sphere_area(3);
            // Simpson in α of the per-direction radial antiderivative.
            let n = 2000;
            let h = alpha_hi / n as f64;
            let f = |a: f64| {
                let c = (2.0 * a).cos().sqrt();
                let ch = (c * r).cosh();
                a.sin().powi(2) * (ch * ch * ch / 3.0 - ch + 2.0 / 3.0) / c.powi(4)
            };
            let mut acc = f(0.0) + f(alpha_hi);
            for k in 1..n {
                acc += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
            }
            shell * acc * h / 3.0
        };
        for (r, v) in radii.iter().zip(&curve.volumes) {
            assert_relative_eq!(*v, oracle(*r), max_relative = 1e-8);
        }
        // The model over-counts tilted directions, so ratios sit just below
        // one and fall monotonically; at the smallest radius the deficit is
        // O(r² sin²α).
        assert!(curve.ratios[0] > 1.0 - 5e-4 && curve.ratios[0] < 1.0);
        for w in curve.ratios.windows(2) {
            assert!(w[1] < w[0], "ratio not strictly decreasing: {w:?}");
        }
        // A narrow band hugs the axis, where model and geometry agree.
        let narrow = ConeSpec::cap(ConeOrientation::Future, 1e-3, 1.0).unwrap();
        let short: Vec<f64> = (1..=5).map(|k| 0.2 * k as f64).collect();
        let ncurve =
            comparison_ratio_curve(&spec, &frame, &narrow, &short, 1.0, 16, &OdeOptions::default())
                .unwrap();
        for r in &ncurve.ratios {
            assert_relative_eq!(*r, 1.0, max_relative = 1e-6);
        }
    }

    #[test]
    fn corollary_bound_flat_sits_below_estimate() {
        let spec = MetricSpec::minkowski(4);
        let frame = frame_at(&spec, &[0.0; 4]);
        let opts = OdeOptions::default();
        let cone = ConeSpec::cap(ConeOrientation::Future, PI / 8.0, 1.0).unwrap();
        let measured = future_cone_volume(&spec, &frame, &cone, 48, &opts).unwrap().volume;
        let out =
            corollary_volume_bound(&spec, &frame, &cone, 1.0, 0.9 * measured, 48, &opts).unwrap();
        assert!(!out.vacuous);
        let inj = injectivity_radius(&spec, &frame, 1.0, 48, &opts).unwrap();
        assert!(out.bound <= inj.inj_estimate, "bound {} vs {}", out.bound, inj.inj_estimate);
        // v0 → 0 drives the bound to zero.
        let small = corollary_volume_bound(&spec, &frame, &cone, 1.0, 1e-12, 48, &opts).unwrap();
        assert!(small.bound < 1e-12);
        // Widening the band toward the null cone shrinks the constant.
        let wide = ConeSpec::cap(ConeOrientation::Future, PI / 4.0 - 0.05, 1.0).unwrap();
        let wide_out =
            corollary_volume_bound(&spec, &frame, &wide, 1.0, 1e-3, 48, &opts).unwrap();
        assert!(wide_out.c_sigma < out.c_sigma);
    }
}
