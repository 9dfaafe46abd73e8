//! Injectivity-radius estimation around an observer.
//!
//! Combines three ingredients measured in the observer's reference metric:
//! conjugate-point scans (from [`crate::jacobi`]), collision scans of the
//! exponential map (geodesic loops through the base point and pairwise
//! self-intersections, located on a hash grid and polished by Newton
//! iteration), and the reach of the chart. Directions are frame components
//! on the Euclidean unit sphere, so the geodesic parameter equals the
//! reference radius in the tangent space; a "failure at radius r" means the
//! exponential map on the open tangent ball of radius `r` is not injective
//! (collision) or not an immersion (conjugate point).
//!
//! The module also provides the reference-ball volume (polar integration of
//! the transverse Jacobian determinant), two guaranteed lower bounds for the
//! injectivity radius (a constant chain assembled from measured structure
//! constants of a foliation, and a volume-based bound), synchronous charts
//! based at a point on the past observer geodesic, and convexity checks of
//! the squared reference distance on such charts.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::config::MetricSpec;
use crate::dirlattice::{gauss_legendre, sphere_area, sphere_directions};
use crate::frames::{
    reference_metric_at, reference_metric_matrix, tensor_norm_t, AssumptionBounds, Observer,
    OrthoFrame,
};
use crate::geodesic::{exp_map, exp_map_inverse, integrate_geodesic, parallel_transport};
use crate::jacobi::{
    classify, conjugate_scan, first_conjugate_point, integrate_jacobi, CausalClass,
};
use crate::ode::OdeOptions;
use crate::spacetime::{christoffel_at, metric_at, riemann_at};
use crate::tensor::Tensor;
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Collision scan
// ---------------------------------------------------------------------------

/// A located failure of injectivity: two distinct tangent vectors with the
/// same image under the exponential map.
#[derive(Debug, Clone)]
pub struct CollisionEvent {
    /// Frame components of the first preimage.
    pub xi1: Vec<f64>,
    /// Frame components of the second preimage (zero for a loop: the second
    /// preimage is the origin).
    pub xi2: Vec<f64>,
    /// Common image point in chart coordinates.
    pub point: Vec<f64>,
    /// Ball radius at which the failure appears (the larger preimage
    /// radius).
    pub r_fail: f64,
    /// Length of the geodesic loop exhibited by the event: the sum of the
    /// two preimage radii for a pairwise collision, and for a loop through
    /// the base point the conservative `max` of parameter length and
    /// reference return speed. In both cases `loop_length = 2 r_fail`.
    pub loop_length: f64,
    /// True when the event is a geodesic loop through the base point.
    pub is_loop: bool,
}

/// Result of scanning for exponential-map collisions.
#[derive(Debug, Clone)]
pub struct CollisionScan {
    /// Refined events, sorted by failure radius.
    pub events: Vec<CollisionEvent>,
    /// Smallest failure radius over all events.
    pub min_failure: Option<f64>,
    /// Number of directions scanned.
    pub directions: usize,
    /// Candidates whose Newton refinement did not converge (a large count
    /// at zero events suggests the grid is too coarse).
    pub refine_failures: usize,
}

fn vec_norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// End point of `exp_p(ξ)`, failing if the geodesic leaves the chart.
fn exp_point(
    spec: &MetricSpec,
    frame: &OrthoFrame,
    xi: &[f64],
    opts: &OdeOptions,
) -> Result<Vec<f64>> {
    let r = exp_map(spec, frame, xi, opts)?;
    r.point.ok_or_else(|| {
        Error::numerical("exp_point", "geodesic left the chart before parameter 1".to_string())
    })
}

/// End point and arrival velocity of `exp_p(ξ)`.
fn exp_point_velocity(
    spec: &MetricSpec,
    frame: &OrthoFrame,
    xi: &[f64],
    opts: &OdeOptions,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let r = exp_map(spec, frame, xi, opts)?;
    let q = r.point.ok_or_else(|| {
        Error::numerical("exp_point", "geodesic left the chart before parameter 1".to_string())
    })?;
    let v = r.geodesic.velocity(1.0);
    Ok((q, v))
}

/// Generic damped Newton solve with finite-difference Jacobian; returns the
/// root when the residual norm drops below `tol`.
fn damped_newton(
    residual: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    z0: &[f64],
    tol: f64,
) -> Option<Vec<f64>> {
    let m = z0.len();
    let mut z = z0.to_vec();
    let mut res = residual(&z).ok()?;
    if res.len() != m {
        return None;
    }
    let mut res_norm = vec_norm(&res);
    for _ in 0..40 {
        if res_norm <= tol {
            return Some(z);
        }
        let h = 1e-6 * (1.0 + vec_norm(&z));
        let mut jac = DMatrix::<f64>::zeros(m, m);
        for j in 0..m {
            let mut zp = z.clone();
            zp[j] += h;
            let rp = residual(&zp).ok()?;
            for i in 0..m {
                jac[(i, j)] = (rp[i] - res[i]) / h;
            }
        }
        let rhs = DVector::from_column_slice(&res);
        let step = jac.lu().solve(&rhs)?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..25 {
            let trial: Vec<f64> = z.iter().zip(step.iter()).map(|(a, d)| a - lambda * d).collect();
            if let Ok(rt) = residual(&trial) {
                let nt = vec_norm(&rt);
                if nt < res_norm {
                    z = trial;
                    res = rt;
                    res_norm = nt;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    if res_norm <= tol {
        Some(z)
    } else {
        None
    }
}

/// Polishes a pairwise collision candidate to the stationary bigon: equal
/// tangent radii and anti-parallel arrival velocities.
///
/// The failure radius is locally minimal exactly at such configurations
/// (sliding the meeting point along either geodesic lowers one radius
/// otherwise), and the system is square: collision (n), equal radii (1),
/// and anti-parallel unit velocities (n − 1 after dropping the largest
/// component, which is redundant between unit vectors).
fn refine_pair(
    spec: &MetricSpec,
    frame: &OrthoFrame,
    w1_init: &[f64],
    w2_init: &[f64],
    opts: &OdeOptions,
) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let dim = spec.dim;
    // Fix the dropped component of the anti-parallelism equations from the
    // initial arrival direction.
    let (_, v1_init) = exp_point_velocity(spec, frame, w1_init, opts).ok()?;
    let m_drop = v1_init
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)?;
    let residual = |z: &[f64]| -> Result<Vec<f64>> {
        let w1 = &z[..dim];
        let w2 = &z[dim..];
        let (q1, v1) = exp_point_velocity(spec, frame, w1, opts)?;
        let (q2, v2) = exp_point_velocity(spec, frame, w2, opts)?;
        let (n1, n2) = (vec_norm(&v1), vec_norm(&v2));
        if n1 < 1e-12 || n2 < 1e-12 {
            return Err(Error::numerical("refine_pair", "degenerate velocity".to_string()));
        }
        let mut f = spec.chart_delta(&q1, &q2);
        let r1: f64 = w1.iter().map(|c| c * c).sum();
        let r2: f64 = w2.iter().map(|c| c * c).sum();
        f.push(0.5 * (r1 - r2));
        for i in 0..dim {
            if i != m_drop {
                f.push(v1[i] / n1 + v2[i] / n2);
            }
        }
        Ok(f)
    };
    let mut z0 = w1_init.to_vec();
    z0.extend_from_slice(w2_init);
    let tol = 1e-9 * (1.0 + vec_norm(w1_init));
    let z = damped_newton(&residual, &z0, tol)?;
    let w1 = z[..dim].to_vec();
    let w2 = z[dim..].to_vec();
    // Reject the trivial root w1 = w2 (same tangent vector).
    let sep: f64 = w1.iter().zip(&w2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    if sep < 1e-3 * (1.0 + vec_norm(&w1)) {
        return None;
    }
    let point = exp_point(spec, frame, &w1, opts).ok()?;
    Some((w1, w2, point))
}

/// Scans `count` reference-unit directions up to radius `r_max` for
/// injectivity failures of the exponential map.
///
/// Sample points of all geodesics are bucketed on a hash grid sized to the
/// sampling step; close pairs from different directions (or distant
/// parameters on one direction) seed pairwise Newton refinement, and
/// near-returns to the base point seed loop refinement via the exponential
/// inverse. For a loop of length `L` with return velocity `v`, traversing
/// halfway from both ends exhibits the failure, so the radius is recorded as
/// `max(L, |v|_T) / 2`.
pub fn collision_scan(
    spec: &MetricSpec,
    frame: &OrthoFrame,
    r_max: f64,
    count: usize,
    opts: &OdeOptions,
) -> Result<CollisionScan> {
    let dim = spec.dim;
    if dim > 8 {
        return Err(Error::Unsupported("collision scan supports dimension at most 8".into()));
    }
    if !(r_max > 0.0) {
        return Err(Error::InvalidSpec("collision scan needs r_max > 0".into()));
    }
    let p = &frame.point;
    let obs = Observer::new(spec, p, &frame.basis[0])?;
    let g_t = reference_metric_at(spec, &obs)?.g_t;

    let dirs = sphere_directions(dim, count);
    let geos: Vec<Option<crate::geodesic::Geodesic>> = dirs
        .dirs
        .par_iter()
        .map(|xi| {
            let v = frame.vector_from_frame(xi);
            integrate_geodesic(spec, p, &v, r_max, opts).ok()
        })
        .collect();

    // Sample the tracks on a uniform parameter grid.
    let steps = 72usize;
    let ds = r_max / steps as f64;
    // Capture radius for candidate passes. Direction lattices carry no
    // mirror-symmetric pairs, so genuine collisions appear as near-misses
    // whose closest-pass distance scales like r/count (nearest approach of
    // the sampled pair set to the codimension-two collision variety); the
    // Newton refinement below contracts such seeds onto the exact pair.
    let capture = (2.0 * ds).max(8.0 * r_max / count as f64);
    struct Sample {
        dir: usize,
        s: f64,
        x: Vec<f64>,
    }
    let mut samples: Vec<Sample> = Vec::new();
    for (d, geo) in geos.iter().enumerate() {
        if let Some(geo) = geo {
            let reach = geo.s_max();
            for k in 1..=steps {
                let s = k as f64 * ds;
                if s > reach {
                    break;
                }
                samples.push(Sample { dir: d, s, x: geo.point(s) });
            }
        }
    }

    // Hash grid keyed by the period-reduced offset from the base point,
    // scaled axis-wise so one cell is roughly one capture radius.
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
    let n_off = 3usize.pow(dim as u32);
    for mut code in 0..n_off {
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

    // Candidate pairs: keep the earliest per direction pair.
    let min_s = 6.0 * ds;
    let mut pair_best: HashMap<(usize, usize), (f64, usize, usize)> = HashMap::new();
    let mut loop_best: HashMap<usize, (f64, usize)> = HashMap::new();
    for (i, smp) in samples.iter().enumerate() {
        // Near-return to the base point.
        if smp.s > min_s && gt_dist(&smp.x, p) < capture {
            let e = loop_best.entry(smp.dir).or_insert((smp.s, i));
            if smp.s < e.0 {
                *e = (smp.s, i);
            }
        }
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
                if other.dir == smp.dir && (other.s - smp.s).abs() < 6.0 * ds {
                    continue;
                }
                if smp.s.max(other.s) < min_s {
                    continue;
                }
                // Nearly-parallel rays sit within capture distance for long
                // parameter stretches without any genuine collision; require
                // the tangent vectors themselves to be well separated.
                let mut tan_sep2 = 0.0;
                for ax in 0..dim {
                    let d = dirs.dirs[smp.dir][ax] * smp.s - dirs.dirs[other.dir][ax] * other.s;
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

    let mut events: Vec<CollisionEvent> = Vec::new();
    let mut refine_failures = 0usize;
    let mut best = f64::INFINITY;

    // Loops first: the refinement reuses the exponential inverse with the
    // base point as target.
    let mut loop_cands: Vec<(f64, usize)> = loop_best.into_values().collect();
    loop_cands.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (s_cand, idx) in loop_cands.into_iter().take(24) {
        if 0.5 * s_cand > best + 2.0 * capture {
            break;
        }
        let d = samples[idx].dir;
        let w0: Vec<f64> = dirs.dirs[d].iter().map(|c| c * s_cand).collect();
        let Ok(w) = exp_map_inverse(spec, frame, p, &w0, 1e-10, opts) else {
            refine_failures += 1;
            continue;
        };
        let l = vec_norm(&w);
        if l < min_s {
            continue;
        }
        let Ok(r) = exp_map(spec, frame, &w, opts) else { continue };
        let v1 = r.geodesic.velocity(r.geodesic.s_max());
        let mut vret2 = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                vret2 += g_t[(i, j)] * v1[i] * v1[j];
            }
        }
        let r_fail = 0.5 * l.max(vret2.max(0.0).sqrt());
        best = best.min(r_fail);
        events.push(CollisionEvent {
            xi1: w,
            xi2: vec![0.0; dim],
            point: p.clone(),
            r_fail,
            loop_length: 2.0 * r_fail,
            is_loop: true,
        });
    }

    // Pairwise collisions. No early break: the stationary bigon can sit
    // well below the grid-crossing radius of its candidate.
    let mut pair_cands: Vec<(f64, usize, usize)> = pair_best.into_values().collect();
    pair_cands.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (_, i, j) in pair_cands.into_iter().take(48) {
        let w1_init: Vec<f64> =
            dirs.dirs[samples[i].dir].iter().map(|c| c * samples[i].s).collect();
        let w2_init: Vec<f64> =
            dirs.dirs[samples[j].dir].iter().map(|c| c * samples[j].s).collect();
        let Some((w1, w2, point)) = refine_pair(spec, frame, &w1_init, &w2_init, opts) else {
            refine_failures += 1;
            continue;
        };
        let r_fail = vec_norm(&w1).max(vec_norm(&w2));
        if r_fail < 0.5 * min_s || r_fail > 1.5 * r_max {
            continue;
        }
        // Deduplicate bigons reached from several candidates.
        let dup = events.iter().any(|e| {
            (e.r_fail - r_fail).abs() < 1e-6 * (1.0 + r_fail)
                && vec_norm(&spec.chart_delta(&e.point, &point)) < 1e-5 * (1.0 + r_fail)
        });
        if dup {
            continue;
        }
        best = best.min(r_fail);
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
    events.truncate(32);
    let min_failure = events.first().map(|e| e.r_fail);
    Ok(CollisionScan { events, min_failure, directions: count, refine_failures })
}

/// Shortest confirmed geodesic loop based at the observer within reference
/// radius `r`, or `None` when the scan over `count` directions finds no
/// collision of the exponential map.
///
/// The returned length is the minimum of `|y₁|_T + |y₂|_T` over confirmed
/// preimage pairs `exp(y₁) = exp(y₂)`; half of it caps the injectivity
/// radius.
pub fn detect_short_loops(
    spec: &MetricSpec,
    frame: &OrthoFrame,
    r: f64,
    count: usize,
    opts: &OdeOptions,
) -> Result<Option<f64>> {
    let scan = collision_scan(spec, frame, r, count, opts)?;
    Ok(scan
        .events
        .iter()
        .map(|e| e.loop_length)
        .min_by(|a, b| a.total_cmp(b)))
}

// ---------------------------------------------------------------------------
// Combined injectivity radius
// ---------------------------------------------------------------------------

/// Which ingredient determined the reported radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadiusLimit {
    /// A conjugate point (differential of the exponential map degenerates).
    Conjugate,
    /// A collision (two tangent vectors share an image).
    Collision,
    /// No failure found; the chart reach or scan radius truncated the search.
    Reach,
}

/// Search metadata accompanying a [`RadiusReport`].
#[derive(Debug, Clone)]
pub struct RadiusDiagnostics {
    /// Which ingredient set the estimate.
    pub limit: RadiusLimit,
    /// Radius up to which every scanned direction stayed inside the chart:
    /// below it the absence of failures was actually checked, beyond it the
    /// chart truncated the search.
    pub certified: f64,
    /// Scan radius requested.
    pub r_max: f64,
    /// Number of directions scanned.
    pub directions: usize,
    /// Candidates whose Newton refinement diverged.
    pub refine_failures: usize,
    /// Refined collision events (sorted by failure radius).
    pub events: Vec<CollisionEvent>,
}

/// Injectivity-radius estimate with the quantities it was assembled from.
///
/// `inj_estimate = min(conj_radius, shortest_loop / 2, r_max)`, except that
/// when no failure is found and the chart truncates the search early the
/// estimate falls back to the certified reach. The two theorem bounds are
/// optional attachments (see [`theorem_foliated_bound`] and
/// [`theorem_main_bound`]); whenever finite they must sit below
/// `inj_estimate`.
#[derive(Debug, Clone)]
pub struct RadiusReport {
    /// Smallest conjugate radius over the scanned directions.
    pub conj_radius: Option<f64>,
    /// Shortest confirmed geodesic loop (reference length).
    pub shortest_loop: Option<f64>,
    /// Injectivity-radius estimate (an upper bound produced by located
    /// failures, truncated by the search radius).
    pub inj_estimate: f64,
    /// Guaranteed lower bound from the foliated-structure constant chain.
    pub thm_foliated_bound: Option<f64>,
    /// Guaranteed lower bound from the volume-based main theorem.
    pub thm_main_bound: Option<f64>,
    pub diagnostics: RadiusDiagnostics,
}

/// Estimates the injectivity radius of the exponential map at the observer
/// by combining a conjugate-point scan and a collision scan over `count`
/// directions up to reference radius `r_max`.
///
/// A located failure is a genuine upper bound for the injectivity radius
/// even when other directions leave the chart earlier; `certified` records
/// how far the absence of failures was actually verified. The theorem-bound
/// fields are left empty; attach them with the bound evaluators when the
/// metric supports them.
pub fn injectivity_radius(
    spec: &MetricSpec,
    frame: &OrthoFrame,
    r_max: f64,
    count: usize,
    opts: &OdeOptions,
) -> Result<RadiusReport> {
    let scan = conjugate_scan(spec, frame, r_max, count, opts)?;
    let coll = collision_scan(spec, frame, r_max, count, opts)?;
    let certified = scan.min_reach.min(r_max);
    let shortest_loop = coll.min_failure.map(|r| 2.0 * r);
    // A located failure wins over the reach truncation even when it lies
    // beyond the certified radius: it is a genuine upper bound.
    let (inj_estimate, limit) = match (scan.min_conjugate, coll.min_failure) {
        (Some(cj), Some(cl)) if cl < cj => (cl, RadiusLimit::Collision),
        (Some(cj), _) => (cj, RadiusLimit::Conjugate),
        (None, Some(cl)) => (cl, RadiusLimit::Collision),
        (None, None) => (certified, RadiusLimit::Reach),
    };
    Ok(RadiusReport {
        conj_radius: scan.min_conjugate,
        shortest_loop,
        inj_estimate,
        thm_foliated_bound: None,
        thm_main_bound: None,
        diagnostics: RadiusDiagnostics {
            limit,
            certified,
            r_max,
            directions: count,
            refine_failures: coll.refine_failures,
            events: coll.events,
        },
    })
}

// ---------------------------------------------------------------------------
// Reference-ball volume
// ---------------------------------------------------------------------------

/// How overlapping sheets of the exponential map contribute to the ball
/// volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolumeConvention {
    /// Integrate `|det M|` along each ray up to the stop radius regardless
    /// of conjugate points: regions covered by several sheets count once per
    /// sheet (the Jacobian-integral reading). Default.
    WithMultiplicity,
    /// Stop each ray at its first conjugate point; overlapping sheets are
    /// dropped, so the result is a lower bound for the ball volume.
    StopAtConjugate,
}

/// Volume of the image of the tangent ball of reference radius `r` under
/// the exponential map, by polar integration of the transverse Jacobian
/// determinant over `count` directions; sheets counted per `convention`.
///
/// Each radial integral stops at the chart exit, so directions truncated by
/// the chart undercount. Null lattice directions are nudged off the cone;
/// they carry zero measure in the limit.
pub fn reference_ball_volume_with(
    spec: &MetricSpec,
    frame: &OrthoFrame,
    r: f64,
    count: usize,
    convention: VolumeConvention,
    opts: &OdeOptions,
) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidSpec("ball volume needs r > 0".into()));
    }
    let dirs = sphere_directions(spec.dim, count);
    let (nodes, gl_w) = gauss_legendre(24);
    let contributions: Vec<f64> = dirs
        .dirs
        .par_iter()
        .zip(dirs.weights.par_iter())
        .map(|(dir, w)| -> Result<f64> {
            let mut xi = dir.clone();
            if classify(&xi, 1e-9) == CausalClass::Null {
                xi[0] *= 1.0 + 1e-7;
            }
            let track = integrate_jacobi(spec, frame, &xi, r, opts)?;
            let mut stop = track.s_max().min(r);
            if convention == VolumeConvention::StopAtConjugate {
                let conj = first_conjugate_point(&track);
                stop = stop.min(conj.s_conj.unwrap_or(f64::INFINITY));
            }
            if stop <= 0.0 {
                return Ok(0.0);
            }
            let half = 0.5 * stop;
            let mut radial = 0.0;
            for (u, gw) in nodes.iter().zip(&gl_w) {
                radial += gw * half * track.det_m(half * (1.0 + u)).abs();
            }
            Ok(w * radial)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(contributions.iter().sum())
}

/// [`reference_ball_volume_with`] under the default
/// [`VolumeConvention::WithMultiplicity`].
pub fn reference_ball_volume(
    spec: &MetricSpec,
    frame: &OrthoFrame,
    r: f64,
    count: usize,
    opts: &OdeOptions,
) -> Result<f64> {
    reference_ball_volume_with(spec, frame, r, count, VolumeConvention::WithMultiplicity, opts)
}

// ---------------------------------------------------------------------------
// Foliated lower bound (constant chain)
// ---------------------------------------------------------------------------

/// Lower-bound chain for the injectivity radius of a foliated metric, with
/// every intermediate constant exposed.
///
/// Inputs are the measured structure constants: `k0` bounds `|ln n|`, `k1`
/// the reference norm of the deformation `L_T g`, `k2` the reference norm
/// of the curvature, `k3 = e^{2 k0} k1²` the connection-gap bound, and `v0` a
/// lower bound for the volume of the unit reference ball (the Euclidean
/// unit-ball volume when absent). The chain shrinks a curvature-and-volume
/// scale `i1` by the connection gap to `i2`, converts it into
/// metric-comparison constants `c1` (gap growth over an `i2`-ball) and `c2`
/// (adding the lapse window), and emerges with a uniform chart radius
/// `r2 = i2 e^{−c2}/2` and the final injectivity lower bound
/// `i0 = r3 = r2 e^{−c2}/4`.
#[derive(Debug, Clone)]
pub struct BoundChain {
    pub eps: f64,
    pub dim: usize,
    pub k0: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    /// Unit-ball volume lower bound actually used.
    pub v0: f64,
    /// Euclidean unit-ball volume (the normalizer for `v0`).
    pub ball_volume: f64,
    pub i1: f64,
    pub i2: f64,
    pub c1: f64,
    pub c2: f64,
    pub r2: f64,
    pub r3: f64,
    /// The guaranteed injectivity lower bound (equals `r3`).
    pub i0: f64,
}

/// Evaluates the foliated lower-bound chain from measured bounds at margin
/// `eps`, returning every link; the final bound is `i0`.
///
/// The curvature-and-volume seed uses the configurable surrogate
/// `i1 = κ · min(1, v0/ω) · min(1, 1/√k2)` with `κ = 1/4` (the constant of
/// the underlying compactness result is not reproduced here); every later
/// link is the literal chain, so `i0` is monotone in each input.
pub fn theorem_foliated_bound(b: &AssumptionBounds, eps: f64) -> Result<BoundChain> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidSpec("bound chain needs eps > 0".into()));
    }
    let n = b.dim;
    let ball_volume = sphere_area(n) / n as f64;
    let v0 = b.v0.unwrap_or(ball_volume);
    let vol_term = (v0 / ball_volume).min(1.0);
    let curv_term = if b.k2 > 0.0 { (1.0 / b.k2.sqrt()).min(1.0) } else { 1.0 };
    let i1 = 0.25 * vol_term * curv_term;
    let gap_cap = if b.k3 > 0.0 { (-eps).exp() / (2.0 * b.k3) } else { f64::INFINITY };
    let i2 = i1.min(gap_cap);
    // k3 * i2 <= e^{-eps}/2, so the lower logarithm stays finite.
    let up = (eps.exp() + b.k3 * i2).ln();
    let down = -((-eps).exp() - b.k3 * i2).ln();
    let c1 = up.max(down);
    let c2 = c1 + 2.0 * b.k0;
    let r2 = 0.5 * i2 * (-c2).exp();
    let r3 = 0.25 * r2 * (-c2).exp();
    Ok(BoundChain {
        eps,
        dim: n,
        k0: b.k0,
        k1: b.k1,
        k2: b.k2,
        k3: b.k3,
        v0,
        ball_volume,
        i1,
        i2,
        c1,
        c2,
        r2,
        r3,
        i0: r3,
    })
}

// ---------------------------------------------------------------------------
// Volume-based lower bound
// ---------------------------------------------------------------------------

/// Configuration constants for the volume-based bound.
#[derive(Debug, Clone, Copy)]
pub struct BoundConstants {
    /// Dimension constant `c_n` of the volume bound. The default `1/8` keeps
    /// the bound on the guaranteed side for every model with a closed-form
    /// answer; the true optimal constant is not known to this implementation.
    pub c_n: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        BoundConstants { c_n: 0.125 }
    }
}

/// The volume-based lower bound and the quantities entering it.
#[derive(Debug, Clone)]
pub struct MainBoundReport {
    pub r0: f64,
    pub c_n: f64,
    /// Radius of the reference ball whose volume enters the bound
    /// (`c_n · r0`).
    pub vol_radius: f64,
    /// Measured volume of that ball.
    pub volume: f64,
    /// Sheet convention used for the volume.
    pub convention: VolumeConvention,
    /// The bound itself: `c_n · volume / r0^dim · r0`.
    pub bound: f64,
    /// Scale-invariant form `bound / r0`.
    pub ratio: f64,
    /// Curvature-hypothesis samples along rays (`|Riem|_{T(s)}` against
    /// `1/r0²` with the transported observer).
    pub curvature_samples: usize,
    pub curvature_violations: usize,
    pub sup_riem: f64,
}

/// Evaluates the volume-based injectivity lower bound at scale `r0`:
/// `bound = c_n · vol(B_T(p, c_n r0)) / r0^dim · r0` with the ball volume
/// integrated over `count` directions.
///
/// The hypothesis `sup |Riem|_T ≤ 1/r0²` is sampled along transported
/// observers on a sub-lattice of rays; violations are counted, not fatal
/// (the report makes the failed hypothesis visible).
pub fn theorem_main_bound(
    spec: &MetricSpec,
    frame: &OrthoFrame,
    r0: f64,
    constants: &BoundConstants,
    count: usize,
    opts: &OdeOptions,
) -> Result<MainBoundReport> {
    if !(r0 > 0.0 && constants.c_n > 0.0) {
        return Err(Error::InvalidSpec("volume bound needs r0 > 0 and c_n > 0".into()));
    }
    let dim = spec.dim;
    let convention = VolumeConvention::WithMultiplicity;
    let vol_radius = constants.c_n * r0;
    let volume = reference_ball_volume_with(spec, frame, vol_radius, count, convention, opts)?;
    let bound = constants.c_n * volume / r0.powi(dim as i32) * r0;

    // Sample the curvature hypothesis along rays with the transported T.
    let p = &frame.point;
    let t = frame.basis[0].clone();
    let ray_dirs = sphere_directions(dim, count.min(24));
    let threshold = 1.0 / (r0 * r0);
    let samples: Vec<(f64, bool)> = ray_dirs
        .dirs
        .par_iter()
        .flat_map_iter(|xi| {
            let v = frame.vector_from_frame(xi);
            let mut out = Vec::new();
            for k in 0..4 {
                let s = r0 * (k as f64 + 1.0) / 4.0;
                let Ok(moved) = parallel_transport(spec, p, &v, &[t.clone()], s, opts) else {
                    break; // ray left the chart; remaining radii unreachable
                };
                let Ok(geo) = integrate_geodesic(spec, p, &v, s, opts) else { break };
                if geo.left_chart() || geo.s_max() < s {
                    break;
                }
                let x = geo.point(s);
                let Ok(obs) = Observer::new(spec, &x, &moved[0]) else { break };
                let Ok(riem) = riemann_at(spec, &x) else { break };
                let Ok(norm) = tensor_norm_t(spec, &obs, &Tensor::from_t4_down(&riem.riem))
                else {
                    break;
                };
                out.push((norm, norm > threshold * (1.0 + 1e-9)));
            }
            out
        })
        .collect();
    let curvature_samples = samples.len();
    let curvature_violations = samples.iter().filter(|(_, v)| *v).count();
    let sup_riem = samples.iter().map(|(n, _)| *n).fold(0.0f64, f64::max);

    Ok(MainBoundReport {
        r0,
        c_n: constants.c_n,
        vol_radius,
        volume,
        convention,
        bound,
        ratio: bound / r0,
        curvature_samples,
        curvature_violations,
        sup_riem,
    })
}

// ---------------------------------------------------------------------------
// Synchronous chart
// ---------------------------------------------------------------------------

/// One lattice node of a synchronous chart.
#[derive(Debug, Clone)]
pub struct ChartNode {
    /// Chart coordinates of the node.
    pub x: Vec<f64>,
    /// Frame components at the base `q` of the tangent vector reaching the
    /// node, `exp_q(w) = x`.
    pub w: Vec<f64>,
    /// Proper-time distance from the base `q`.
    pub tau: f64,
    /// Covariant gradient `dτ` at the node (chart components).
    pub dtau: Vec<f64>,
    /// Synchronous reference metric `gN = g + 2 dτ⊗dτ` at the node.
    pub g_n: DMatrix<f64>,
    /// `| |∇τ|²_g + 1 |` from the arrival velocity of the solved geodesic
    /// (checks the two-point solve against the integrated flow).
    pub eikonal_residual: f64,
    /// False when the node is outside the chart, not timelike-separated
    /// from `q`, or a solve failed; such nodes carry zeroed data.
    pub valid: bool,
}

/// Synchronous chart based at a point `q` on the past observer geodesic:
/// `τ` is the Lorentzian (proper-time) distance from `q`, computed on a
/// coordinate lattice around the observer point `p` by two-point geodesic
/// solves, together with its gradient and the Riemannian reference metric
/// `gN = g + 2 dτ⊗dτ` it induces.
///
/// Away from the lattice, `(τ, y)` coordinates on the chart follow the
/// hyperboloid parametrization `ξ = τ(√(1+|y|²), y)` of future timelike
/// frame vectors at `q`; in these coordinates the pullback metric satisfies
/// the gauge conditions `g̃₀₀ = −1`, `g̃₀ᵢ = 0` exactly (unit-speed radial
/// geodesics and orthogonality of radial variations).
pub struct SynchronousChart<'a> {
    spec: &'a MetricSpec,
    opts: OdeOptions,
    tol: f64,
    /// Observer frame at `p`.
    pub frame_p: OrthoFrame,
    /// Transported frame at the past base point `q`.
    pub frame_q: OrthoFrame,
    /// Separation scale: `q` sits at proper time `r0/2` before `p`.
    pub r0: f64,
    /// Reference half-width of the lattice box around `p`.
    pub box_half: f64,
    /// Nodes per axis (odd, so `p` is the central node).
    pub steps: usize,
    /// Coordinate spacing per axis.
    pub axis_step: Vec<f64>,
    /// Lattice nodes in row-major order (axis 0 slowest).
    pub nodes: Vec<ChartNode>,
    /// Fraction of lattice nodes that are valid.
    pub valid_fraction: f64,
    /// Fraction of valid nodes with eikonal residual below 1e−6.
    pub residual_fraction: f64,
    /// Largest eikonal residual over valid nodes.
    pub max_residual: f64,
}

fn solve_chart_point(
    spec: &MetricSpec,
    frame_q: &OrthoFrame,
    x: &[f64],
    tol: f64,
    opts: &OdeOptions,
) -> Result<(Vec<f64>, f64, Vec<f64>, DMatrix<f64>, f64)> {
    let q = &frame_q.point;
    let g_q = metric_at(spec, q)?;
    let guess = frame_q.frame_components(&g_q.g, &spec.chart_delta(x, q));
    let w = exp_map_inverse(spec, frame_q, x, &guess, tol, opts)?;
    let q2 = w[0] * w[0] - w[1..].iter().map(|c| c * c).sum::<f64>();
    if !(q2 > 0.0 && w[0] > 0.0) {
        return Err(Error::numerical(
            "synchronous_chart",
            "node is not future-timelike-separated from the base".to_string(),
        ));
    }
    let tau = q2.sqrt();
    let v = frame_q.vector_from_frame(&w);
    let geo = integrate_geodesic(spec, q, &v, 1.0, opts)?;
    if geo.left_chart() || geo.s_max() < 1.0 {
        return Err(Error::numerical(
            "synchronous_chart",
            "radial geodesic left the chart".to_string(),
        ));
    }
    let v_arr = geo.velocity(1.0);
    let g_x = metric_at(spec, x)?;
    let dim = spec.dim;
    let u: Vec<f64> = v_arr.iter().map(|c| c / tau).collect();
    let mut dtau = vec![0.0; dim];
    for a in 0..dim {
        let mut acc = 0.0;
        for b in 0..dim {
            acc += g_x.g[(a, b)] * u[b];
        }
        dtau[a] = -acc;
    }
    let g_n = reference_metric_matrix(&g_x.g, &u);
    let mut uu = 0.0;
    for a in 0..dim {
        for b in 0..dim {
            uu += g_x.g[(a, b)] * u[a] * u[b];
        }
    }
    let residual = (uu + 1.0).abs();
    Ok((w, tau, dtau, g_n, residual))
}

/// Builds a synchronous chart for the observer frame at `p`: walks the past
/// geodesic (initial velocity `−T`) for proper time `r0/2` to the base `q`,
/// parallel-transports the frame, and solves the two-point problem from `q`
/// to every node of a `steps`-per-axis coordinate lattice covering the
/// reference box of half-width `box_half` around `p`.
pub fn build_synchronous_chart<'a>(
    spec: &'a MetricSpec,
    frame: &OrthoFrame,
    r0: f64,
    box_half: f64,
    steps: usize,
    opts: &OdeOptions,
) -> Result<SynchronousChart<'a>> {
    if !(r0 > 0.0 && box_half > 0.0) {
        return Err(Error::InvalidSpec("synchronous chart needs r0 > 0 and box_half > 0".into()));
    }
    if steps < 3 || steps % 2 == 0 {
        return Err(Error::InvalidSpec("synchronous chart needs an odd steps >= 3".into()));
    }
    let dim = spec.dim;
    let p = &frame.point;
    let half = 0.5 * r0;
    let v_past: Vec<f64> = frame.basis[0].iter().map(|c| -c).collect();
    let geo = integrate_geodesic(spec, p, &v_past, half, opts)?;
    if geo.left_chart() || geo.s_max() < half {
        return Err(Error::numerical(
            "build_synchronous_chart",
            format!("past geodesic left the chart at s = {:.3e} < r0/2", geo.s_max()),
        ));
    }
    let q = geo.point(half);
    let moved = parallel_transport(spec, p, &v_past, &frame.basis, half, opts)?;
    let frame_q = OrthoFrame { point: q, basis: moved };

    // Per-axis coordinate spacing: the box is reference-isotropic at p.
    let obs_p = Observer::new(spec, p, &frame.basis[0])?;
    let gtp = reference_metric_at(spec, &obs_p)?;
    let axis_half: Vec<f64> = (0..dim).map(|ax| box_half / gtp.g_t[(ax, ax)].sqrt()).collect();
    let axis_step: Vec<f64> =
        axis_half.iter().map(|h| 2.0 * h / (steps - 1) as f64).collect();
    let c = ((steps - 1) / 2) as i64;

    let total = steps.pow(dim as u32);
    let tol = 1e-12 * (1.0 + r0);
    let nodes: Vec<ChartNode> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut rem = flat;
            let mut x = p.clone();
            for ax in (0..dim).rev() {
                let idx = (rem % steps) as i64;
                rem /= steps;
                x[ax] += (idx - c) as f64 * axis_step[ax];
            }
            let invalid = |x: Vec<f64>| ChartNode {
                x,
                w: vec![0.0; dim],
                tau: 0.0,
                dtau: vec![0.0; dim],
                g_n: DMatrix::zeros(dim, dim),
                eikonal_residual: f64::INFINITY,
                valid: false,
            };
            if !spec.chart_contains(&x) {
                return invalid(x);
            }
            match solve_chart_point(spec, &frame_q, &x, tol, &opts.clone()) {
                Ok((w, tau, dtau, g_n, residual)) => ChartNode {
                    x,
                    w,
                    tau,
                    dtau,
                    g_n,
                    eikonal_residual: residual,
                    valid: true,
                },
                Err(_) => invalid(x),
            }
        })
        .collect();

    let valid = nodes.iter().filter(|n| n.valid).count();
    let good =
        nodes.iter().filter(|n| n.valid && n.eikonal_residual < 1e-6).count();
    let max_residual = nodes
        .iter()
        .filter(|n| n.valid)
        .map(|n| n.eikonal_residual)
        .fold(0.0f64, f64::max);
    Ok(SynchronousChart {
        spec,
        opts: opts.clone(),
        tol,
        frame_p: frame.clone(),
        frame_q,
        r0,
        box_half,
        steps,
        axis_step,
        nodes,
        valid_fraction: valid as f64 / total as f64,
        residual_fraction: if valid > 0 { good as f64 / valid as f64 } else { 0.0 },
        max_residual,
    })
}

impl SynchronousChart<'_> {
    /// Observer point (lattice center).
    pub fn p(&self) -> &[f64] {
        &self.frame_p.point
    }

    /// Base point of the chart (on the past observer geodesic).
    pub fn q(&self) -> &[f64] {
        &self.frame_q.point
    }

    /// Flat index of a lattice multi-index (axis 0 slowest).
    pub fn node_index(&self, idx: &[usize]) -> usize {
        let mut flat = 0usize;
        for &i in idx {
            flat = flat * self.steps + i;
        }
        flat
    }

    /// Coordinate length per unit reference length along an axis
    /// (resolution-independent, unlike `axis_step`).
    fn axis_scale(&self, ax: usize) -> f64 {
        self.axis_step[ax] * 0.5 * (self.steps - 1) as f64 / self.box_half
    }

    /// Proper-time distance from `q` and its covariant gradient at an
    /// arbitrary chart point.
    pub fn tau_at(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (_, tau, dtau, _, _) = solve_chart_point(self.spec, &self.frame_q, x, self.tol, &self.opts)?;
        Ok((tau, dtau))
    }

    /// Dual-route eikonal residual at `x`: `τ` is re-solved at displaced
    /// points and differentiated by central differences, then contracted
    /// with the inverse metric. Checks the τ field itself rather than the
    /// arrival velocity of a single solve.
    pub fn fd_eikonal_residual(&self, x: &[f64]) -> Result<f64> {
        let dim = self.spec.dim;
        let g = metric_at(self.spec, x)?;
        let (tau0, _) = self.tau_at(x)?;
        let mut grad = vec![0.0; dim];
        for ax in 0..dim {
            // Balance truncation (∝ h²/τ²) against solver noise (∝ tol/h);
            // the axis factor restores the per-axis coordinate scale.
            let h = 1e-4 * (1.0 + tau0) * self.axis_scale(ax);
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[ax] += h;
            xm[ax] -= h;
            let (tp, _) = self.tau_at(&xp)?;
            let (tm, _) = self.tau_at(&xm)?;
            grad[ax] = (tp - tm) / (2.0 * h);
        }
        let mut acc = 0.0;
        for a in 0..dim {
            for b in 0..dim {
                acc += g.g_inv[(a, b)] * grad[a] * grad[b];
            }
        }
        Ok((acc + 1.0).abs())
    }

    /// Hessian of `τ` at `x` with respect to the spacetime connection, by
    /// central differences of the analytic gradient, plus the eigenvalues of
    /// `−∇²τ` restricted to the spatial complement of `∇τ` (g-orthonormal
    /// basis, so the restricted metric is the identity).
    pub fn tau_hessian_eigs(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let dim = self.spec.dim;
        let (tau, dtau) = self.tau_at(x)?;
        let mut hess = DMatrix::<f64>::zeros(dim, dim);
        for ax in 0..dim {
            let h = 1e-4 * (1.0 + tau) * self.axis_scale(ax);
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[ax] += h;
            xm[ax] -= h;
            let (_, dp) = self.tau_at(&xp)?;
            let (_, dm) = self.tau_at(&xm)?;
            for b in 0..dim {
                hess[(ax, b)] += (dp[b] - dm[b]) / (2.0 * h);
            }
        }
        let hess = (hess.clone() + hess.transpose()) * 0.5;
        let ch = christoffel_at(self.spec, x)?;
        let mut full = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                let mut corr = 0.0;
                for k in 0..dim {
                    corr += ch.gamma.get(k, i, j) * dtau[k];
                }
                full[(i, j)] = hess[(i, j)] - corr;
            }
        }
        // Spatial frame orthogonal to the radial observer u = −g⁻¹dτ.
        let g = metric_at(self.spec, x)?;
        let mut u = vec![0.0; dim];
        for a in 0..dim {
            let mut acc = 0.0;
            for b in 0..dim {
                acc += g.g_inv[(a, b)] * dtau[b];
            }
            u[a] = -acc;
        }
        let obs = Observer::new(self.spec, x, &u)?;
        let fr = crate::frames::complete_frame(self.spec, &obs)?;
        let m = dim - 1;
        let mut a = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                let (ei, ej) = (&fr.basis[i + 1], &fr.basis[j + 1]);
                let mut acc = 0.0;
                for al in 0..dim {
                    for be in 0..dim {
                        acc += full[(al, be)] * ei[al] * ej[be];
                    }
                }
                a[(i, j)] = -acc;
            }
        }
        let a = (a.clone() + a.transpose()) * 0.5;
        let eigs = a.symmetric_eigen().eigenvalues.iter().copied().collect();
        Ok((tau, eigs))
    }

    fn xi_of(&self, tau: f64, y: &[f64]) -> Vec<f64> {
        let y2: f64 = y.iter().map(|c| c * c).sum();
        let mut xi = Vec::with_capacity(y.len() + 1);
        xi.push(tau * (1.0 + y2).sqrt());
        xi.extend(y.iter().map(|c| tau * c));
        xi
    }

    /// Chart map `(τ, y) →` spacetime point (radial geodesics from `q`).
    pub fn point(&self, tau: f64, y: &[f64]) -> Result<Vec<f64>> {
        let xi = self.xi_of(tau, y);
        exp_point(self.spec, &self.frame_q, &xi, &self.opts)
    }

    /// Inverse chart map; fails when the target is not timelike-separated
    /// from `q`. The sign of `τ` distinguishes future from past.
    pub fn coords(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let q = &self.frame_q.point;
        let delta = self.spec.chart_delta(x, q);
        let g = metric_at(self.spec, q)?;
        let guess = self.frame_q.frame_components(&g.g, &delta);
        let w = exp_map_inverse(self.spec, &self.frame_q, x, &guess, self.tol, &self.opts)?;
        let q2: f64 = w[0] * w[0] - w[1..].iter().map(|c| c * c).sum::<f64>();
        if q2 <= 0.0 {
            return Err(Error::numerical(
                "synchronous_chart",
                "target is not timelike-separated from the base point".to_string(),
            ));
        }
        let tau = q2.sqrt().copysign(w[0]);
        let y: Vec<f64> = w[1..].iter().map(|c| c / tau).collect();
        Ok((tau, y))
    }

    /// Pullback metric components at `(τ, y)` by centered differencing of
    /// the chart map with step `h`.
    pub fn metric_components(&self, tau: f64, y: &[f64], h: f64) -> Result<DMatrix<f64>> {
        let dim = self.spec.dim;
        let x0 = self.point(tau, y)?;
        let g = metric_at(self.spec, &x0)?.g;
        let mut jac = DMatrix::<f64>::zeros(dim, dim);
        for col in 0..dim {
            let (mut tp, mut tm) = (tau, tau);
            let (mut yp, mut ym) = (y.to_vec(), y.to_vec());
            if col == 0 {
                tp += h;
                tm -= h;
            } else {
                yp[col - 1] += h;
                ym[col - 1] -= h;
            }
            let xp = self.point(tp, &yp)?;
            let xm = self.point(tm, &ym)?;
            let d = self.spec.chart_delta(&xp, &xm);
            for row in 0..dim {
                jac[(row, col)] = d[row] / (2.0 * h);
            }
        }
        Ok(jac.transpose() * g * jac)
    }
}

// ---------------------------------------------------------------------------
// Convexity check on the synchronous chart
// ---------------------------------------------------------------------------

/// Band check for `−∇²τ` on the spatial complement of `∇τ` against the
/// curvature comparison coefficients `√K/tan(√K τ)` (below) and
/// `√K/tanh(√K τ)` (above), `K` the curvature bound; both collapse to `1/τ`
/// as `K → 0`.
#[derive(Debug, Clone)]
pub struct TauBandCheck {
    /// Curvature bound used for the coefficients.
    pub k2: f64,
    /// Probe points evaluated.
    pub probes: usize,
    /// Probes with an eigenvalue outside the band (beyond tolerance).
    pub violations: usize,
    /// Smallest `eig − lower coefficient` over probes.
    pub lo_margin: f64,
    /// Smallest `upper coefficient − eig` over probes.
    pub hi_margin: f64,
    /// Largest `|eig − 1/τ|` over probes (the flat-space value).
    pub max_dev_flat: f64,
}

/// Result of the convexity check of the squared reference distance on a
/// synchronous chart.
#[derive(Debug, Clone)]
pub struct ConvexityReport {
    /// Band half-width the eigenvalues were checked against.
    pub eps: f64,
    /// Smallest generalized Hessian eigenvalue over checked nodes.
    pub eig_min: f64,
    /// Largest generalized Hessian eigenvalue over checked nodes.
    pub eig_max: f64,
    /// True when every checked eigenvalue lies in `[2−eps, 2+eps]`.
    pub in_band: bool,
    /// Interior lattice nodes with a complete stencil.
    pub checked: usize,
    /// Fraction of checked nodes with all eigenvalues in the band.
    pub pass_fraction: f64,
    /// `checked / interior lattice size` (stencil completeness).
    pub coverage: f64,
    /// Hessian-comparison band for `−∇²τ`.
    pub tau_band: TauBandCheck,
}

/// Convexity check on a synchronous chart: the squared reference distance
/// `u(x) = |exp_p^{-1}(x)|²` (reference norm at `p`, a computable stand-in
/// for the squared chart distance whose Hessian is exactly `2 g_T(p)` in
/// flat space) is differenced on the lattice with Christoffel correction;
/// the generalized eigenvalues of `(∇²u, g_T(p))` must lie in
/// `[2−eps, 2+eps]`. The report also carries the comparison band for
/// `−∇²τ` with curvature bound `k2`, evaluated at up to eight probe nodes.
pub fn convexity_check(
    spec: &MetricSpec,
    chart: &SynchronousChart<'_>,
    eps: f64,
    k2: f64,
) -> Result<ConvexityReport> {
    if !(eps > 0.0) {
        return Err(Error::InvalidSpec("convexity check needs eps > 0".into()));
    }
    let dim = spec.dim;
    let steps = chart.steps;
    let p = chart.p().to_vec();
    let frame_p = &chart.frame_p;
    let g_p = metric_at(spec, &p)?;
    let obs_p = Observer::new(spec, &p, &frame_p.basis[0])?;
    let b = reference_metric_at(spec, &obs_p)?.g_t;
    let chol = b.clone().cholesky().ok_or_else(|| {
        Error::numerical("convexity_check", "reference metric not positive definite".to_string())
    })?;

    // u on the lattice.
    let u_vals: Vec<Option<f64>> = chart
        .nodes
        .par_iter()
        .map(|node| {
            if !node.valid {
                return None;
            }
            let guess =
                frame_p.frame_components(&g_p.g, &spec.chart_delta(&node.x, &p));
            let w = exp_map_inverse(spec, frame_p, &node.x, &guess, chart.tol, &chart.opts)
                .ok()?;
            Some(w.iter().map(|c| c * c).sum::<f64>())
        })
        .collect();

    let stride_of = |ax: usize| steps.pow((dim - 1 - ax) as u32);
    let interior: Vec<usize> = (0..chart.nodes.len())
        .filter(|&flat| {
            let mut rem = flat;
            for ax in (0..dim).rev() {
                let idx = rem % steps;
                rem /= steps;
                if idx == 0 || idx == steps - 1 {
                    return false;
                }
                let _ = ax;
            }
            true
        })
        .collect();
    let interior_total = interior.len();

    let mut eig_min = f64::INFINITY;
    let mut eig_max = f64::NEG_INFINITY;
    let mut checked = 0usize;
    let mut passed = 0usize;
    for &flat in &interior {
        let Some(u0) = u_vals[flat] else { continue };
        // Gather the full second-difference stencil.
        let mut ok = true;
        let mut h_mat = DMatrix::<f64>::zeros(dim, dim);
        let mut grad = vec![0.0; dim];
        'stencil: for i in 0..dim {
            let si = stride_of(i);
            let (Some(upi), Some(umi)) = (u_vals[flat + si], u_vals[flat - si]) else {
                ok = false;
                break 'stencil;
            };
            let hi = chart.axis_step[i];
            grad[i] = (upi - umi) / (2.0 * hi);
            h_mat[(i, i)] = (upi - 2.0 * u0 + umi) / (hi * hi);
            for j in (i + 1)..dim {
                let sj = stride_of(j);
                let (Some(upp), Some(umm), Some(upm), Some(ump)) = (
                    u_vals[flat + si + sj],
                    u_vals[flat - si - sj],
                    u_vals[flat + si - sj],
                    u_vals[flat - si + sj],
                ) else {
                    ok = false;
                    break 'stencil;
                };
                let hj = chart.axis_step[j];
                let v = (upp + umm - upm - ump) / (4.0 * hi * hj);
                h_mat[(i, j)] = v;
                h_mat[(j, i)] = v;
            }
        }
        if !ok {
            continue;
        }
        let node = &chart.nodes[flat];
        let ch = christoffel_at(spec, &node.x)?;
        for i in 0..dim {
            for j in 0..dim {
                let mut corr = 0.0;
                for k in 0..dim {
                    corr += ch.gamma.get(k, i, j) * grad[k];
                }
                h_mat[(i, j)] -= corr;
            }
        }
        let h_mat = (h_mat.clone() + h_mat.transpose()) * 0.5;
        // Generalized symmetric eigenproblem via the Cholesky factor of the
        // reference metric: eig(L⁻¹ H L⁻ᵀ).
        let l = chol.l();
        let x1 = l.clone().solve_lower_triangular(&h_mat).ok_or_else(|| {
            Error::numerical("convexity_check", "singular Cholesky factor".to_string())
        })?;
        let s = l
            .solve_lower_triangular(&x1.transpose())
            .ok_or_else(|| {
                Error::numerical("convexity_check", "singular Cholesky factor".to_string())
            })?
            .transpose();
        let s = (s.clone() + s.transpose()) * 0.5;
        let eigs = s.symmetric_eigen().eigenvalues;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &e in eigs.iter() {
            lo = lo.min(e);
            hi = hi.max(e);
        }
        eig_min = eig_min.min(lo);
        eig_max = eig_max.max(hi);
        checked += 1;
        if lo >= 2.0 - eps && hi <= 2.0 + eps {
            passed += 1;
        }
    }
    if checked == 0 {
        return Err(Error::numerical(
            "convexity_check",
            "no interior node carried a complete stencil".to_string(),
        ));
    }

    // Hessian-comparison band for τ at a spread of interior probe nodes.
    let mut probes = 0usize;
    let mut violations = 0usize;
    let mut lo_margin = f64::INFINITY;
    let mut hi_margin = f64::INFINITY;
    let mut max_dev_flat = 0.0f64;
    let candidates: Vec<usize> = interior
        .iter()
        .copied()
        .filter(|&f| chart.nodes[f].valid && chart.nodes[f].tau > 1e-3 * chart.r0)
        .collect();
    let take = candidates.len().min(8);
    for k in 0..take {
        let flat = candidates[k * candidates.len() / take.max(1)];
        let node = &chart.nodes[flat];
        let Ok((tau, eigs)) = chart.tau_hessian_eigs(&node.x) else { continue };
        let sk = k2.max(0.0).sqrt();
        let arg = sk * tau;
        let (lo_coeff, hi_coeff) = if arg < 1e-6 {
            (1.0 / tau, 1.0 / tau)
        } else if arg < 1.4 {
            (sk / arg.tan(), sk / arg.tanh())
        } else {
            continue; // band degenerate at this curvature scale
        };
        probes += 1;
        let slack = 1e-6 * (1.0 + hi_coeff.abs());
        let mut bad = false;
        for &e in &eigs {
            lo_margin = lo_margin.min(e - lo_coeff);
            hi_margin = hi_margin.min(hi_coeff - e);
            max_dev_flat = max_dev_flat.max((e - 1.0 / tau).abs());
            if e < lo_coeff - slack || e > hi_coeff + slack {
                bad = true;
            }
        }
        if bad {
            violations += 1;
        }
    }

    Ok(ConvexityReport {
        eps,
        eig_min,
        eig_max,
        in_band: eig_min >= 2.0 - eps && eig_max <= 2.0 + eps,
        checked,
        pass_fraction: passed as f64 / checked as f64,
        coverage: checked as f64 / interior_total.max(1) as f64,
        tau_band: TauBandCheck {
            k2,
            probes,
            violations,
            lo_margin,
            hi_margin,
            max_dev_flat,
        },
    })
}

// ---------------------------------------------------------------------------
// Convexity probe (geodesic second differences)
// ---------------------------------------------------------------------------

/// Outcome of probing convexity of the squared reference distance along
/// geodesics.
#[derive(Debug, Clone)]
pub struct ConvexityProbeReport {
    /// Geodesic probes that produced a second difference.
    pub samples: usize,
    /// Probes skipped because a leg left the chart or an inversion failed.
    pub skipped: usize,
    /// Smallest second difference of `u = |exp_p^{-1}|²` along the probes.
    pub min_second: f64,
    /// Probes with a significantly negative second difference.
    pub violations: usize,
}

/// Probes convexity of `u(q) = |exp_p^{-1}(q)|²` (squared reference radius)
/// on the normal ball of radius `radius`: along `count` deterministic
/// geodesic probes through interior points, the centered second difference
/// of `u` must be positive on a convex ball (flat value: exactly 2 for
/// unit-speed probes). Complements [`convexity_check`]: geodesic probes
/// test convexity in the Lorentzian connection without needing a chart.
pub fn convexity_probe(
    spec: &MetricSpec,
    frame: &OrthoFrame,
    radius: f64,
    count: usize,
    opts: &OdeOptions,
) -> Result<ConvexityProbeReport> {
    if !(radius > 0.0) {
        return Err(Error::InvalidSpec("convexity probe needs radius > 0".into()));
    }
    let dim = spec.dim;
    let anchors = sphere_directions(dim, count.max(4));
    let h2 = 0.1 * radius;
    let mut samples = 0usize;
    let mut skipped = 0usize;
    let mut min_second = f64::INFINITY;
    let mut violations = 0usize;
    for k in 0..count {
        // Deterministic interior anchor and probe direction.
        let u = (k as f64 + 0.5) / count as f64;
        let r_k = 0.6 * radius * u.powf(1.0 / dim as f64);
        let a: Vec<f64> = anchors.dirs[k % anchors.dirs.len()].iter().map(|c| c * r_k).collect();
        let d = &anchors.dirs[(k + anchors.dirs.len() / 3) % anchors.dirs.len()];
        let u0: f64 = a.iter().map(|c| c * c).sum();
        let Ok(q0) = exp_point(spec, frame, &a, opts) else {
            skipped += 1;
            continue;
        };
        let v = frame.vector_from_frame(d);
        let mut legs = [0.0f64; 2];
        let mut ok = true;
        for (sign, slot) in [(1.0, 0usize), (-1.0, 1usize)] {
            let vs: Vec<f64> = v.iter().map(|c| c * sign).collect();
            let geo = match integrate_geodesic(spec, &q0, &vs, h2, opts) {
                Ok(g) if !g.left_chart() && g.s_max() >= h2 => g,
                _ => {
                    ok = false;
                    break;
                }
            };
            let q = geo.point(h2);
            let guess: Vec<f64> = a.iter().zip(d).map(|(ai, di)| ai + sign * h2 * di).collect();
            match exp_map_inverse(spec, frame, &q, &guess, 1e-10, opts) {
                Ok(w) => legs[slot] = w.iter().map(|c| c * c).sum(),
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            skipped += 1;
            continue;
        }
        let second = (legs[0] - 2.0 * u0 + legs[1]) / (h2 * h2);
        samples += 1;
        min_second = min_second.min(second);
        if second < -1e-5 * (1.0 + u0) {
            violations += 1;
        }
    }
    if samples == 0 {
        return Err(Error::numerical(
            "convexity_probe",
            "no probe produced a second difference".to_string(),
        ));
    }
    Ok(ConvexityProbeReport { samples, skipped, min_second, violations })
}
