//! Observers, orthonormal frames, the observer reference metric, tensor
//! norms, measured assumption constants, and the connection-gap check.
//!
//! An observer is a point together with a future-directed unit timelike
//! vector `T` (`g(T,T) = -1`, positive time component in the chart). The
//! associated Riemannian reference metric is
//!
//! ```text
//! g_T = g + 2 T♭ ⊗ T♭,    T♭ = g(T, ·),
//! ```
//!
//! which is positive definite, satisfies `|det g_T| = |det g|`, and agrees
//! with `g` on the g-orthogonal complement of `T`. Any g-orthonormal frame
//! with `E_0 = T` is simultaneously g_T-orthonormal, so norms measured in
//! `g_T` are Euclidean norms of frame components.

use nalgebra::DMatrix;

use crate::config::MetricSpec;
use crate::spacetime::{self, fol_data, metric_at};
use crate::tensor::{Tensor, T3};
use crate::{Error, Result};

/// A point with a normalized future-directed timelike vector.
#[derive(Debug, Clone)]
pub struct Observer {
    pub point: Vec<f64>,
    /// Unit timelike vector, `g(T,T) = -1`, `T⁰ > 0`.
    pub t: Vec<f64>,
}

impl Observer {
    /// Normalizes `t_raw` into a unit future-directed observer at `point`.
    pub fn new(spec: &MetricSpec, point: &[f64], t_raw: &[f64]) -> Result<Observer> {
        if t_raw.len() != spec.dim || point.len() != spec.dim {
            return Err(Error::InvalidSpec(format!(
                "observer data must have dimension {}",
                spec.dim
            )));
        }
        let m = metric_at(spec, point)?;
        let norm2 = quad_form(&m.g, t_raw, t_raw);
        if !(norm2 < 0.0) {
            return Err(Error::InvalidSpec(format!(
                "observer vector is not timelike at {point:?} (g(T,T) = {norm2})"
            )));
        }
        if t_raw[0] <= 0.0 {
            return Err(Error::InvalidSpec(
                "observer vector must be future-directed (positive time component)".into(),
            ));
        }
        let inv = 1.0 / (-norm2).sqrt();
        Ok(Observer { point: point.to_vec(), t: t_raw.iter().map(|v| v * inv).collect() })
    }

    /// The normalized foliation normal `T = n⁻¹ ∂_t` of a foliated metric.
    pub fn foliation_normal(spec: &MetricSpec, point: &[f64]) -> Result<Observer> {
        let fol = spec.fol().ok_or_else(|| {
            Error::Unsupported("foliation_normal requires a foliated metric".into())
        })?;
        let l2 = fol.lapse2(point);
        if !(l2.is_finite() && l2 > 0.0) {
            return Err(Error::numerical(
                "foliation_normal",
                format!("lapse² = {l2} at {point:?}"),
            ));
        }
        let mut t = vec![0.0; spec.dim];
        t[0] = 1.0 / l2.sqrt();
        Ok(Observer { point: point.to_vec(), t })
    }
}

/// `uᵀ M v`.
pub(crate) fn quad_form(m: &DMatrix<f64>, u: &[f64], v: &[f64]) -> f64 {
    let n = m.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += m[(i, j)] * u[i] * v[j];
        }
    }
    acc
}

/// g-orthonormal frame `E_0 = T, E_1..E_n` with `g(E_a, E_b) = η_ab`.
#[derive(Debug, Clone)]
pub struct OrthoFrame {
    pub point: Vec<f64>,
    /// `basis[a]` = chart components of `E_a`; `basis[0]` is the observer.
    pub basis: Vec<Vec<f64>>,
}

impl OrthoFrame {
    /// Chart components of `Σ_a ξ^a E_a`.
    pub fn vector_from_frame(&self, xi: &[f64]) -> Vec<f64> {
        let dim = self.point.len();
        let mut v = vec![0.0; dim];
        for (a, e) in self.basis.iter().enumerate() {
            for i in 0..dim {
                v[i] += xi[a] * e[i];
            }
        }
        v
    }

    /// Frame components of a chart vector: `ξ^a = η^{ab} g(v, E_b)`.
    pub fn frame_components(&self, g: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
        let dim = self.point.len();
        let mut xi = vec![0.0; dim];
        for a in 0..dim {
            let inner = quad_form(g, v, &self.basis[a]);
            xi[a] = if a == 0 { -inner } else { inner };
        }
        xi
    }
}

/// Completes the observer to a g-orthonormal frame by Gram–Schmidt over the
/// chart basis (deterministic; skips candidates that degenerate).
pub fn complete_frame(spec: &MetricSpec, obs: &Observer) -> Result<OrthoFrame> {
    let m = metric_at(spec, &obs.point)?;
    complete_frame_with_metric(&m.g, &obs.point, &obs.t)
}

/// Frame completion against an explicit metric matrix (used along geodesics
/// where the metric is evaluated at moving points).
pub fn complete_frame_with_metric(
    g: &DMatrix<f64>,
    point: &[f64],
    t: &[f64],
) -> Result<OrthoFrame> {
    let dim = point.len();
    let mut basis: Vec<Vec<f64>> = vec![t.to_vec()];
    let mut signs: Vec<f64> = vec![-1.0];
    for cand_axis in 0..dim {
        if basis.len() == dim {
            break;
        }
        let mut v = vec![0.0; dim];
        v[cand_axis] = 1.0;
        for (e, sign) in basis.iter().zip(&signs) {
            let coef = quad_form(g, &v, e) / sign;
            for i in 0..dim {
                v[i] -= coef * e[i];
            }
        }
        let n2 = quad_form(g, &v, &v);
        if n2 <= 1e-10 {
            continue; // candidate (numerically) inside the span or null
        }
        let inv = 1.0 / n2.sqrt();
        basis.push(v.iter().map(|x| x * inv).collect());
        signs.push(1.0);
    }
    if basis.len() != dim {
        return Err(Error::numerical(
            "complete_frame",
            format!("could not complete an orthonormal frame at {point:?}"),
        ));
    }
    Ok(OrthoFrame { point: point.to_vec(), basis })
}

/// The reference Riemannian metric at the observer's point.
#[derive(Debug, Clone)]
pub struct ReferenceMetricAt {
    pub point: Vec<f64>,
    pub g_t: DMatrix<f64>,
    pub g_t_inv: DMatrix<f64>,
    pub det: f64,
}

/// Builds `g_T = g + 2 T♭ ⊗ T♭` from a metric matrix and observer vector.
pub fn reference_metric_matrix(g: &DMatrix<f64>, t: &[f64]) -> DMatrix<f64> {
    let dim = g.nrows();
    let mut flat = vec![0.0; dim];
    for i in 0..dim {
        for j in 0..dim {
            flat[i] += g[(i, j)] * t[j];
        }
    }
    let mut gt = g.clone();
    for i in 0..dim {
        for j in 0..dim {
            gt[(i, j)] += 2.0 * flat[i] * flat[j];
        }
    }
    gt
}

/// Reference metric of an observer, with inverse and determinant.
pub fn reference_metric_at(spec: &MetricSpec, obs: &Observer) -> Result<ReferenceMetricAt> {
    let m = metric_at(spec, &obs.point)?;
    let g_t = reference_metric_matrix(&m.g, &obs.t);
    let det = g_t.clone().lu().determinant();
    let g_t_inv = g_t.clone().try_inverse().ok_or_else(|| {
        Error::numerical("reference_metric_at", format!("g_T degenerate at {:?}", obs.point))
    })?;
    Ok(ReferenceMetricAt { point: obs.point.clone(), g_t, g_t_inv, det })
}

/// Norm of an arbitrary-variance tensor in the observer's reference metric.
pub fn tensor_norm_t(spec: &MetricSpec, obs: &Observer, tensor: &Tensor) -> Result<f64> {
    if tensor.dim != spec.dim {
        return Err(Error::InvalidSpec("tensor dimension mismatch".into()));
    }
    let r = reference_metric_at(spec, obs)?;
    Ok(tensor.norm_with(&r.g_t, &r.g_t_inv))
}

// ---------------------------------------------------------------------------
// Assumption constants
// ---------------------------------------------------------------------------

/// Quantitative geometry constants measured as suprema over deterministic
/// probe points of the chart domain, with respect to the foliation normal:
///
/// - `k0`: sup |ln n| (lapse log-range),
/// - `k1`: sup |L_T g|_T,
/// - `k2`: sup |Riem|_T,
/// - `k3 = e^{2 k0} k1²`: the derived bound on the gap between the
///   connections of `g` and `g_T` measured in `g_T`,
/// - `v0`: optional volume lower bound supplied by volume routines,
/// - `r0`: reference scale (callers may override; default 1).
#[derive(Debug, Clone)]
pub struct AssumptionBounds {
    pub dim: usize,
    pub k0: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub v0: Option<f64>,
    pub r0: f64,
    pub samples: usize,
}

/// Measures `k0, k1, k2` over `count` probe points of the domain box and
/// derives `k3`. Requires a foliated metric.
///
/// The probe set combines the Kronecker lattice with dense per-axis sweeps
/// close to the box edges: suprema of lapse and deformation often live in
/// thin boundary layers (near-horizon shells) that a bulk lattice misses.
pub fn measure_assumption_bounds(spec: &MetricSpec, count: usize) -> Result<AssumptionBounds> {
    let fol = spec.fol().ok_or_else(|| {
        Error::Unsupported("assumption bounds require a foliated metric".into())
    })?;
    let mut probes = spec.probe_points(count.max(8));
    probes.extend(spec.axis_sweep_points(48));
    let mut k0 = 0.0f64;
    let mut k1 = 0.0f64;
    let mut k2 = 0.0f64;
    let mut used = 0usize;
    for p in &probes {
        // Skip probes where the metric is ill-defined (clipped domains).
        let Ok(m) = metric_at(spec, p) else { continue };
        let l2 = fol.lapse2(p);
        if !(l2.is_finite() && l2 > 0.0) {
            continue;
        }
        let obs = Observer::foliation_normal(spec, p)?;
        let gt = reference_metric_matrix(&m.g, &obs.t);
        let Some(gt_inv) = gt.clone().try_inverse() else { continue };
        k0 = k0.max(0.5 * l2.ln().abs());
        let lie = spacetime::lie_derivative_t(spec, p)?;
        let lie_t = Tensor::from_matrix_down(&lie);
        k1 = k1.max(lie_t.norm_with(&gt, &gt_inv));
        let riem = spacetime::riemann_at(spec, p)?;
        let riem_t = Tensor::from_t4_down(&riem.riem);
        k2 = k2.max(riem_t.norm_with(&gt, &gt_inv));
        used += 1;
    }
    if used == 0 {
        return Err(Error::numerical(
            "measure_assumption_bounds",
            "no valid probe points in the domain".to_string(),
        ));
    }
    let k3 = (2.0 * k0).exp() * k1 * k1;
    Ok(AssumptionBounds { dim: spec.dim, k0, k1, k2, k3, v0: None, r0: 1.0, samples: used })
}

// ---------------------------------------------------------------------------
// Connection gap
// ---------------------------------------------------------------------------

/// One probe of the connection-gap check.
#[derive(Debug, Clone)]
pub struct GapSample {
    pub point: Vec<f64>,
    /// `|Γ(g_T) - Γ(g)|_T` with the reference-metric Christoffels computed
    /// by finite differences of the `g_T` field.
    pub lhs: f64,
    /// `n² |L_T g|_T²` at the probe (`n` the lapse) — the quantity the
    /// comparability statement claims equals `lhs`. Reported side by side
    /// because the claimed equality mixes an unsquared with a squared norm
    /// and does not hold as stated; only `lhs ≤ bound` is checked.
    pub rhs_paper: f64,
    /// `|L_T g|_T` at the probe.
    pub lie_norm: f64,
}

/// Result of comparing the connection gap against its derived bound.
#[derive(Debug, Clone)]
pub struct ConnectionGapReport {
    pub samples: Vec<GapSample>,
    /// Domain-supremum constants used to form the bound.
    pub k0: f64,
    pub k1: f64,
    /// `e^{2 k0} k1²` — the bound the samples are checked against.
    pub bound: f64,
    pub max_lhs: f64,
    pub max_rhs_paper: f64,
    pub violations: usize,
}

/// The reference-metric field of the foliation, `n² dt² + g_ij dx^i dx^j`,
/// evaluated as a full symmetric matrix.
pub(crate) fn foliation_reference_value(spec: &MetricSpec, x: &[f64]) -> DMatrix<f64> {
    let fol = spec.fol().expect("foliated metric required");
    let dim = spec.dim;
    let mut gt = DMatrix::zeros(dim, dim);
    gt[(0, 0)] = fol.lapse2(x);
    let gs = fol.gsp(x);
    for i in 0..dim - 1 {
        for j in 0..dim - 1 {
            gt[(i + 1, j + 1)] = gs[(i, j)];
        }
    }
    gt
}

/// Closed-form Christoffel symbols of the foliation reference metric
/// (`f = +n²` in the foliated formulas). Used as a cross-check for the
/// finite-difference route inside tests.
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn reference_christoffel_closed(spec: &MetricSpec, x: &[f64]) -> Result<T3> {
    let fol = spec.fol().ok_or_else(|| {
        Error::Unsupported("reference christoffels require a foliated metric".into())
    })?;
    let d = fol_data(&fol, x, 1.0, false)?;
    Ok(spacetime::christoffel_from_fol(&d))
}

/// Compares `|Γ(g_T) - Γ(g)|_T` at `count` probe points against the bound
/// `e^{2 K0} K1²` formed from domain-supremum constants, and logs the
/// claimed comparability right-hand side `n² |L_T g|_T²` next to it.
pub fn connection_gap(spec: &MetricSpec, count: usize) -> Result<ConnectionGapReport> {
    let Some(fol) = spec.fol() else {
        return Err(Error::Unsupported("connection_gap requires a foliated metric".into()));
    };
    let bounds = measure_assumption_bounds(spec, 256)?;
    let bound = bounds.k3;
    let probes = spec.probe_points(count);
    let mut samples = Vec::with_capacity(probes.len());
    let mut max_lhs = 0.0f64;
    let mut max_rhs_paper = 0.0f64;
    let mut violations = 0usize;
    for p in &probes {
        let Ok(m) = metric_at(spec, p) else { continue };
        let gamma_g = spacetime::christoffel_at(spec, p)?.gamma;
        let mut field = |y: &[f64]| foliation_reference_value(spec, y);
        let gamma_gt = spacetime::christoffel_of_field(
            &mut field,
            p,
            spec.dim,
            spacetime::numdiff::H1,
        )?;
        let mut delta = T3::zeros(spec.dim);
        for i in 0..delta.data.len() {
            delta.data[i] = gamma_gt.data[i] - gamma_g.data[i];
        }
        let obs = Observer::foliation_normal(spec, p)?;
        let gt = reference_metric_matrix(&m.g, &obs.t);
        let gt_inv = gt.clone().try_inverse().ok_or_else(|| {
            Error::numerical("connection_gap", format!("g_T degenerate at {p:?}"))
        })?;
        let lhs = Tensor::from_t3_connection(&delta).norm_with(&gt, &gt_inv);
        let lie = spacetime::lie_derivative_t(spec, p)?;
        let lie_norm = Tensor::from_matrix_down(&lie).norm_with(&gt, &gt_inv);
        let rhs_paper = fol.lapse2(p) * lie_norm * lie_norm;
        if lhs > bound * (1.0 + 1e-9) + 1e-10 {
            violations += 1;
        }
        max_lhs = max_lhs.max(lhs);
        max_rhs_paper = max_rhs_paper.max(rhs_paper);
        samples.push(GapSample { point: p.clone(), lhs, rhs_paper, lie_norm });
    }
    Ok(ConnectionGapReport {
        samples,
        k0: bounds.k0,
        k1: bounds.k1,
        bound,
        max_lhs,
        max_rhs_paper,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn lcg(state: &mut u64) -> f64 {
        *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*state >> 33) as f64) / (u32::MAX as f64)
    }

    #[test]
    fn observer_normalization_and_rejections() {
        let spec = MetricSpec::minkowski(4);
        let p = [0.0; 4];
        let obs = Observer::new(&spec, &p, &[2.0, 0.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(obs.t[0], 1.0);
        // Spacelike and past-directed vectors are rejected.
        assert!(Observer::new(&spec, &p, &[0.5, 1.0, 0.0, 0.0]).is_err());
        assert!(Observer::new(&spec, &p, &[-1.0, 0.0, 0.0, 0.0]).is_err());
        // Null is rejected too.
        assert!(Observer::new(&spec, &p, &[1.0, 1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn boosted_frame_is_eta_orthonormal() {
        let spec = MetricSpec::minkowski(4);
        let p = [0.0; 4];
        let b: f64 = 0.8;
        let obs = Observer::new(&spec, &p, &[b.cosh(), b.sinh(), 0.3, -0.1]).unwrap();
        let frame = complete_frame(&spec, &obs).unwrap();
        let m = metric_at(&spec, &p).unwrap();
        for a in 0..4 {
            for c in 0..4 {
                let want = if a != c {
                    0.0
                } else if a == 0 {
                    -1.0
                } else {
                    1.0
                };
                let got = quad_form(&m.g, &frame.basis[a], &frame.basis[c]);
                assert_relative_eq!(got, want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn frame_components_round_trip() {
        let spec = MetricSpec::schwarzschild(1.0);
        let p = [0.0, 6.0, 1.1, 0.4];
        let obs = Observer::foliation_normal(&spec, &p).unwrap();
        let frame = complete_frame(&spec, &obs).unwrap();
        let m = metric_at(&spec, &p).unwrap();
        let mut state = 7u64;
        for _ in 0..20 {
            let xi: Vec<f64> = (0..4).map(|_| 2.0 * lcg(&mut state) - 1.0).collect();
            let v = frame.vector_from_frame(&xi);
            let back = frame.frame_components(&m.g, &v);
            for (a, b) in xi.iter().zip(&back) {
                assert_relative_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn reference_metric_identities() {
        let mut state = 99u64;
        for spec in [
            MetricSpec::minkowski(4),
            MetricSpec::schwarzschild(1.0),
            MetricSpec::desitter_slicing(1.0, 4),
        ] {
            let p = match spec.kind.name() {
                "schwarzschild" => vec![0.0, 6.0, 1.1, 0.4],
                _ => vec![0.1, 0.2, -0.3, 0.4],
            };
            let m = metric_at(&spec, &p).unwrap();
            // A slightly boosted timelike vector.
            let mut t_raw = vec![1.0, 0.0, 0.0, 0.0];
            t_raw[1] = 0.2 * lcg(&mut state);
            // Scale to make it timelike in curved charts as well.
            t_raw[0] = 2.0 * (m.g[(1, 1)].abs().sqrt() / (-m.g[(0, 0)]).sqrt()).max(1.0);
            let obs = Observer::new(&spec, &p, &t_raw).unwrap();
            let r = reference_metric_at(&spec, &obs).unwrap();

            // g_T(T, V) = -g(T, V) for all V; in particular g_T(T,T) = 1.
            for _ in 0..20 {
                let v: Vec<f64> = (0..4).map(|_| 2.0 * lcg(&mut state) - 1.0).collect();
                let a = quad_form(&r.g_t, &obs.t, &v);
                let b = -quad_form(&m.g, &obs.t, &v);
                assert_relative_eq!(a, b, epsilon = 1e-11);
            }
            assert_relative_eq!(quad_form(&r.g_t, &obs.t, &obs.t), 1.0, epsilon = 1e-11);

            // g_T(V, W) = g(V, W) + 2 g(T,V) g(T,W).
            for _ in 0..100 {
                let v: Vec<f64> = (0..4).map(|_| 2.0 * lcg(&mut state) - 1.0).collect();
                let w: Vec<f64> = (0..4).map(|_| 2.0 * lcg(&mut state) - 1.0).collect();
                let lhs = quad_form(&r.g_t, &v, &w);
                let rhs = quad_form(&m.g, &v, &w)
                    + 2.0 * quad_form(&m.g, &obs.t, &v) * quad_form(&m.g, &obs.t, &w);
                assert_relative_eq!(lhs, rhs, epsilon = 1e-10, max_relative = 1e-10);
            }

            // |det g_T| = |det g| and positive definiteness.
            assert_relative_eq!(r.det.abs(), m.det.abs(), max_relative = 1e-10);
            let eig = r.g_t.clone().symmetric_eigen();
            assert!(eig.eigenvalues.iter().all(|&l| l > 0.0));
        }
    }

    #[test]
    fn flat_reference_metric_is_identity() {
        let spec = MetricSpec::minkowski(4);
        let obs = Observer::new(&spec, &[0.0; 4], &[1.0, 0.0, 0.0, 0.0]).unwrap();
        let r = reference_metric_at(&spec, &obs).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(r.g_t[(i, j)], want, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn tensor_norms_against_hand_values() {
        let spec = MetricSpec::minkowski(4);
        let obs = Observer::new(&spec, &[0.0; 4], &[1.0, 0.0, 0.0, 0.0]).unwrap();
        // |T|_T = 1.
        let t = Tensor::from_vector_up(&obs.t);
        assert_relative_eq!(tensor_norm_t(&spec, &obs, &t).unwrap(), 1.0);
        // A null vector has positive reference norm: (1,1,0,0) ↦ √2.
        let null = Tensor::from_vector_up(&[1.0, 1.0, 0.0, 0.0]);
        assert_relative_eq!(
            tensor_norm_t(&spec, &obs, &null).unwrap(),
            std::f64::consts::SQRT_2
        );
    }

    // Constant-curvature check of the measured constants: for curvature K
    // in dimension 4, |Riem|_T = K √24 because the frame components are
    // K(η_{ac}η_{bd} - η_{ad}η_{bc}).
    #[test]
    fn measured_bounds_on_expanding_slicing() {
        let spec = MetricSpec::desitter_slicing(1.0, 4);
        let b = measure_assumption_bounds(&spec, 64).unwrap();
        assert_relative_eq!(b.k0, 0.0, epsilon = 1e-12); // unit lapse
        assert_relative_eq!(b.k1, 12.0f64.sqrt(), max_relative = 1e-8);
        assert_relative_eq!(b.k2, 24.0f64.sqrt(), max_relative = 1e-7);
        assert_relative_eq!(b.k3, b.k1 * b.k1, max_relative = 1e-12);
    }

    #[test]
    fn connection_gap_flat_is_exactly_zero() {
        let spec = MetricSpec::minkowski(4);
        let rep = connection_gap(&spec, 25).unwrap();
        assert_eq!(rep.violations, 0);
        assert_eq!(rep.max_lhs, 0.0);
        assert_eq!(rep.bound, 0.0);
    }

    #[test]
    fn connection_gap_expanding_slicing_matches_hand_value() {
        // Unit lapse: the gap has components Δ⁰_ij = -∂_t g_ij and
        // Δ^k_00 = 0; its reference norm is |∂_t g|_g = √12 here, equal to
        // |L_T g|_T, and below the bound e^{2 K0} K1² = 12. The logged
        // comparability rhs is n²|L_T g|_T² = 12 at unit lapse.
        let spec = MetricSpec::desitter_slicing(1.0, 4);
        let rep = connection_gap(&spec, 20).unwrap();
        assert_eq!(rep.violations, 0);
        assert_relative_eq!(rep.bound, 12.0, max_relative = 1e-8);
        assert_relative_eq!(rep.max_lhs, 12.0f64.sqrt(), max_relative = 1e-6);
        assert_relative_eq!(rep.max_rhs_paper, 12.0, max_relative = 1e-6);
        for s in &rep.samples {
            assert_relative_eq!(s.lhs, s.lie_norm, max_relative = 1e-6);
            assert_relative_eq!(s.rhs_paper, s.lie_norm * s.lie_norm, max_relative = 1e-12);
        }
    }

    #[test]
    fn reference_christoffel_fd_matches_closed_form() {
        for spec in [MetricSpec::schwarzschild(1.0), MetricSpec::desitter_slicing(1.0, 4)] {
            let p = match spec.kind.name() {
                "schwarzschild" => vec![0.0, 6.0, 1.1, 0.4],
                _ => vec![0.2, 0.1, -0.4, 0.8],
            };
            let closed = reference_christoffel_closed(&spec, &p).unwrap();
            let mut field = |y: &[f64]| foliation_reference_value(&spec, y);
            let fd = spacetime::christoffel_of_field(
                &mut field,
                &p,
                spec.dim,
                spacetime::numdiff::H1,
            )
            .unwrap();
            assert!(closed.max_abs_diff(&fd) < 1e-7);
        }
    }

    #[test]
    fn connection_gap_schwarzschild_within_domain_bound() {
        let spec = MetricSpec::schwarzschild(1.0);
        let rep = connection_gap(&spec, 40).unwrap();
        assert_eq!(rep.violations, 0);
        assert!(rep.max_lhs > 0.0);
        assert!(rep.bound > rep.max_lhs);
    }
}
