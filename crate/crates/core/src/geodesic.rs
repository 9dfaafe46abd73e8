//! Geodesic flow, parallel transport, and the exponential map with its
//! local inverse.
//!
//! Geodesics solve `x'' = -Γ(x)(x', x')` as a joint first-order system in
//! `(x, v)` with adaptive embedded Runge–Kutta integration. Integration
//! stops cleanly (with a bisected boundary sample) when the trajectory
//! leaves the chart box; periodic coordinates never trigger an exit.
//!
//! The exponential map takes frame components: `exp_p(ξ) = γ(1)` where
//! `γ'(0) = Σ_a ξ^a E_a` for an orthonormal frame `E` at `p`, so `|ξ|`
//! (Euclidean) equals the reference-metric norm of the initial velocity.

use crate::config::MetricSpec;
use crate::frames::OrthoFrame;
use crate::ode::{integrate, OdeOptions, OdeSolution, OdeStatus};
use crate::spacetime::{christoffel_at, metric_at};
use crate::tensor::T3;
use crate::{Error, Result};

/// `-Γ^k_{ij} v^i w^j` for all `k` (transport derivative).
pub(crate) fn minus_gamma_vw(gamma: &T3, v: &[f64], w: &[f64], out: &mut [f64]) {
    let n = gamma.dim;
    for k in 0..n {
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += gamma.get(k, i, j) * v[i] * w[j];
            }
        }
        out[k] = -acc;
    }
}

/// A computed geodesic segment with dense output.
#[derive(Debug, Clone)]
pub struct Geodesic {
    pub dim: usize,
    pub x0: Vec<f64>,
    pub v0: Vec<f64>,
    /// Joint solution over `[x, v]`.
    pub sol: OdeSolution,
}

impl Geodesic {
    /// Largest parameter value reached.
    pub fn s_max(&self) -> f64 {
        self.sol.t_end()
    }

    /// Whether integration ended by leaving the chart.
    pub fn left_chart(&self) -> bool {
        self.sol.status == OdeStatus::Event
    }

    /// Position at parameter `s` (dense interpolation).
    pub fn point(&self, s: f64) -> Vec<f64> {
        self.sol.eval(s)[..self.dim].to_vec()
    }

    /// Velocity at parameter `s` (dense interpolation).
    pub fn velocity(&self, s: f64) -> Vec<f64> {
        self.sol.eval(s)[self.dim..].to_vec()
    }
}

/// Right-hand side of the geodesic flow; `false` aborts the step (metric
/// failure or non-finite state).
pub(crate) fn flow_rhs(spec: &MetricSpec, y: &[f64], dy: &mut [f64]) -> bool {
    let dim = spec.dim;
    let (x, v) = y.split_at(dim);
    if x.iter().chain(v.iter()).any(|c| !c.is_finite()) {
        return false;
    }
    let Ok(ch) = christoffel_at(spec, x) else { return false };
    dy[..dim].copy_from_slice(v);
    minus_gamma_vw(&ch.gamma, v, v, &mut dy[dim..]);
    true
}

/// Integrates the geodesic with initial data `(x0, v0)` up to parameter
/// `s_end`, stopping at the chart boundary if reached first.
pub fn integrate_geodesic(
    spec: &MetricSpec,
    x0: &[f64],
    v0: &[f64],
    s_end: f64,
    opts: &OdeOptions,
) -> Result<Geodesic> {
    let dim = spec.dim;
    if x0.len() != dim || v0.len() != dim {
        return Err(Error::InvalidSpec(format!("geodesic data must have dimension {dim}")));
    }
    if !spec.chart_contains(x0) {
        return Err(Error::InvalidSpec(format!("geodesic start {x0:?} outside the chart")));
    }
    let mut y0 = Vec::with_capacity(2 * dim);
    y0.extend_from_slice(x0);
    y0.extend_from_slice(v0);
    let mut rhs = |_s: f64, y: &[f64], dy: &mut [f64]| flow_rhs(spec, y, dy);
    let mut inside = |_s: f64, y: &[f64]| spec.chart_contains(&y[..dim]);
    let sol = integrate(&mut rhs, 0.0, &y0, s_end, opts, &mut inside);
    match sol.status {
        OdeStatus::RhsFailure | OdeStatus::StepUnderflow => Err(Error::numerical(
            "integrate_geodesic",
            format!("integration failed near s = {:.6e} from {x0:?}", sol.t_end()),
        )),
        OdeStatus::MaxSteps => Err(Error::numerical(
            "integrate_geodesic",
            format!("step budget exhausted at s = {:.6e}", sol.t_end()),
        )),
        _ => Ok(Geodesic { dim, x0: x0.to_vec(), v0: v0.to_vec(), sol }),
    }
}

/// Parallel-transports vectors `ws` along the geodesic with data
/// `(x0, v0)` up to parameter `s`; returns the transported vectors.
///
/// Transport is integrated jointly with the flow so no dense-output error
/// enters the connection coefficients.
pub fn parallel_transport(
    spec: &MetricSpec,
    x0: &[f64],
    v0: &[f64],
    ws: &[Vec<f64>],
    s: f64,
    opts: &OdeOptions,
) -> Result<Vec<Vec<f64>>> {
    let dim = spec.dim;
    let m = ws.len();
    let mut y0 = Vec::with_capacity((2 + m) * dim);
    y0.extend_from_slice(x0);
    y0.extend_from_slice(v0);
    for w in ws {
        y0.extend_from_slice(w);
    }
    let mut rhs = |_s: f64, y: &[f64], dy: &mut [f64]| {
        let x = &y[..dim];
        let v = &y[dim..2 * dim];
        if x.iter().any(|c| !c.is_finite()) {
            return false;
        }
        let Ok(ch) = christoffel_at(spec, x) else { return false };
        dy[..dim].copy_from_slice(v);
        minus_gamma_vw(&ch.gamma, v, v, &mut dy[dim..2 * dim]);
        for q in 0..m {
            let lo = (2 + q) * dim;
            let w = &y[lo..lo + dim];
            let mut dw = vec![0.0; dim];
            minus_gamma_vw(&ch.gamma, v, w, &mut dw);
            dy[lo..lo + dim].copy_from_slice(&dw);
        }
        true
    };
    let mut inside = |_s: f64, y: &[f64]| spec.chart_contains(&y[..dim]);
    let sol = integrate(&mut rhs, 0.0, &y0, s, opts, &mut inside);
    if sol.status != OdeStatus::Complete {
        return Err(Error::numerical(
            "parallel_transport",
            format!("transport stopped at s = {:.6e} (status {:?})", sol.t_end(), sol.status),
        ));
    }
    let yf = sol.y_end();
    Ok((0..m).map(|q| yf[(2 + q) * dim..(3 + q) * dim].to_vec()).collect())
}

/// Result of evaluating the exponential map.
#[derive(Debug, Clone)]
pub struct ExpResult {
    /// End point `exp_p(ξ)` if the unit-interval integration completed.
    pub point: Option<Vec<f64>>,
    /// Parameter actually reached (1 when complete).
    pub s_reached: f64,
    pub geodesic: Geodesic,
}

/// `exp_p(ξ)` for frame components `ξ`; integrates to parameter 1.
pub fn exp_map(
    spec: &MetricSpec,
    frame: &OrthoFrame,
    xi: &[f64],
    opts: &OdeOptions,
) -> Result<ExpResult> {
    let v = frame.vector_from_frame(xi);
    let geo = integrate_geodesic(spec, &frame.point, &v, 1.0, opts)?;
    let s = geo.s_max();
    let point = if geo.left_chart() || s < 1.0 { None } else { Some(geo.point(1.0)) };
    Ok(ExpResult { point, s_reached: s, geodesic: geo })
}

/// Inverts the exponential map by damped Newton iteration on frame
/// components: solves `exp_p(ξ) = target` starting from `guess`.
///
/// Differences between chart points are period-reduced, so targets across
/// a periodic seam resolve to the short representative. Fails if the
/// residual does not reach `tol` (chart-coordinate norm) within 60
/// iterations.
pub fn exp_map_inverse(
    spec: &MetricSpec,
    frame: &OrthoFrame,
    target: &[f64],
    guess: &[f64],
    tol: f64,
    opts: &OdeOptions,
) -> Result<Vec<f64>> {
    let dim = spec.dim;
    let mut xi = guess.to_vec();
    let residual = |xi: &[f64]| -> Result<Vec<f64>> {
        let r = exp_map(spec, frame, xi, opts)?;
        let q = r.point.ok_or_else(|| {
            Error::numerical("exp_map_inverse", "trial geodesic left the chart".to_string())
        })?;
        Ok(spec.chart_delta(&q, target))
    };
    let norm = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut res = residual(&xi)?;
    let mut res_norm = norm(&res);
    for _ in 0..60 {
        if res_norm <= tol {
            return Ok(xi);
        }
        // Finite-difference Jacobian d(exp)/dξ.
        let h = 1e-6 * (1.0 + norm(&xi));
        let mut jac = nalgebra::DMatrix::<f64>::zeros(dim, dim);
        for j in 0..dim {
            let mut xp = xi.clone();
            xp[j] += h;
            let rp = residual(&xp)?;
            for i in 0..dim {
                jac[(i, j)] = (rp[i] - res[i]) / h;
            }
        }
        let rhs = nalgebra::DVector::from_column_slice(&res);
        let step = jac.lu().solve(&rhs).ok_or_else(|| {
            Error::numerical("exp_map_inverse", "singular Newton system".to_string())
        })?;
        // Damped update: halve until the residual decreases.
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> =
                xi.iter().zip(step.iter()).map(|(x, s)| x - lambda * s).collect();
            match residual(&trial) {
                Ok(r) => {
                    let n = norm(&r);
                    if n < res_norm {
                        xi = trial;
                        res = r;
                        res_norm = n;
                        accepted = true;
                        break;
                    }
                }
                Err(_) => {} // trial left the chart; shrink the step
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if res_norm <= tol {
        Ok(xi)
    } else {
        Err(Error::numerical(
            "exp_map_inverse",
            format!("no convergence (residual {res_norm:.3e} > tol {tol:.3e})"),
        ))
    }
}

/// `g(v, v)` at a point — causal-type bookkeeping for tests and callers.
pub fn velocity_norm2(spec: &MetricSpec, x: &[f64], v: &[f64]) -> Result<f64> {
    let m = metric_at(spec, x)?;
    Ok(crate::frames::quad_form(&m.g, v, v))
}
