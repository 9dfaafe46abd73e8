//! Metric evaluation, connection coefficients, curvature, and the Lie
//! derivative along the normalized foliation normal.
//!
//! Two computation paths coexist and are cross-checked in tests:
//!
//! - **Foliated analytic path**: for metrics given as `g = f dt² + g_ij
//!   dx^i dx^j` (with `f = -n²`; the same formulas with `f = +n²` produce the
//!   Riemannian reference metric of the foliation), the connection and its
//!   first coordinate derivatives are closed-form expressions in first and
//!   second derivatives of `(f, g_ij)`. Builtin models supply those entry
//!   derivatives analytically; user expressions supply them by finite
//!   differences of smooth closed forms. Curvature is then assembled
//!   algebraically — no nested differencing.
//! - **General finite-difference path**: works for any symmetric component
//!   matrix; Christoffel symbols from first differences of the metric,
//!   curvature from first differences of the Christoffel field.
//!
//! Both paths return exact zeros for coordinate-constant metric entries,
//! so flat metrics produce machine-exact zero connection and curvature.
//!
//! Curvature convention, fixed everywhere in this crate:
//!
//! ```text
//! R^ζ_{αβδ} = ∂_α Γ^ζ_{βδ} - ∂_β Γ^ζ_{αδ} + Γ^ζ_{αη}Γ^η_{βδ} - Γ^ζ_{βη}Γ^η_{αδ}
//! R_{αβγδ}  = g_{γζ} R^ζ_{αβδ}          (lowered slot third)
//! Ric_{βδ}  = R^α_{αβδ},   Scal = g^{βδ} Ric_{βδ}
//! ```
//!
//! so that `g(R(X,Y)Y, X) = R_{αβγδ} X^α Y^β X^γ Y^δ` is `K(|X|²|Y|² -
//! ⟨X,Y⟩²)` on a space of constant curvature `K`, and the round unit sphere
//! has `R_{θφθφ} = +sin²θ`.

use nalgebra::DMatrix;

use crate::config::{MetricKind, MetricSpec};
use crate::tensor::{T3, T4};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Finite-difference steps
// ---------------------------------------------------------------------------

/// Central-difference helpers with steps tuned to `f64` precision.
pub(crate) mod numdiff {
    /// eps^(1/3): optimal step scale for first central differences.
    pub const H1: f64 = 6.055454452393343e-6;
    /// eps^(1/4): step scale for second differences of smooth closed forms.
    pub const H2: f64 = 1.220703125e-4;
    /// eps^(2/9): outer step scale when differencing data that itself
    /// carries ~eps^(2/3) noise (finite-difference-of-finite-difference).
    pub const HN: f64 = 3.3227711404413495e-4;

    #[inline]
    pub fn step(scale: f64, coord: f64) -> f64 {
        // Representable step: add-and-subtract trick keeps x+h and x-h
        // exactly symmetric around x in floating point.
        let h = scale * coord.abs().max(1.0);
        let volatile = coord + h;
        volatile - coord
    }

    /// First central difference along `ax`.
    pub fn d1(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], ax: usize, scale: f64) -> f64 {
        let h = step(scale, x[ax]);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[ax] += h;
        xm[ax] -= h;
        (f(&xp) - f(&xm)) / (2.0 * h)
    }

    /// Second derivative (same axis central / mixed four-point).
    pub fn d2(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], ax: usize, bx: usize, scale: f64) -> f64 {
        if ax == bx {
            let h = step(scale, x[ax]);
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[ax] += h;
            xm[ax] -= h;
            (f(&xp) - 2.0 * f(x) + f(&xm)) / (h * h)
        } else {
            let ha = step(scale, x[ax]);
            let hb = step(scale, x[bx]);
            let mut xx = x.to_vec();
            let mut eval = |sa: f64, sb: f64, xx: &mut Vec<f64>| {
                xx.copy_from_slice(x);
                xx[ax] += sa * ha;
                xx[bx] += sb * hb;
                f(xx)
            };
            (eval(1.0, 1.0, &mut xx) - eval(1.0, -1.0, &mut xx) - eval(-1.0, 1.0, &mut xx)
                + eval(-1.0, -1.0, &mut xx))
                / (4.0 * ha * hb)
        }
    }
}

// ---------------------------------------------------------------------------
// Metric evaluation
// ---------------------------------------------------------------------------

/// Metric, inverse, and determinant at one point.
#[derive(Debug, Clone)]
pub struct MetricAt {
    pub point: Vec<f64>,
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    pub det: f64,
}

/// Raw symmetric component matrix at a point (no inversion, no checks).
pub fn metric_value(spec: &MetricSpec, x: &[f64]) -> DMatrix<f64> {
    let dim = spec.dim;
    let s = spec.scale2;
    match &spec.kind {
        MetricKind::General { comps } => {
            let mut g = DMatrix::zeros(dim, dim);
            for i in 0..dim {
                for j in i..dim {
                    let v = s * comps.eval(i, j, x);
                    g[(i, j)] = v;
                    g[(j, i)] = v;
                }
            }
            g
        }
        _ => {
            let fol = Fol { spec };
            let mut g = DMatrix::zeros(dim, dim);
            g[(0, 0)] = -fol.lapse2(x);
            let gs = fol.gsp(x);
            for i in 0..dim - 1 {
                for j in 0..dim - 1 {
                    g[(i + 1, j + 1)] = gs[(i, j)];
                }
            }
            g
        }
    }
}

/// Evaluates the metric with inverse and determinant; fails on non-finite
/// entries or a numerically degenerate matrix.
pub fn metric_at(spec: &MetricSpec, x: &[f64]) -> Result<MetricAt> {
    if x.len() != spec.dim {
        return Err(Error::InvalidSpec(format!(
            "point has {} coordinates, metric dimension is {}",
            x.len(),
            spec.dim
        )));
    }
    let g = metric_value(spec, x);
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("metric_at", format!("non-finite metric entry at {x:?}")));
    }
    let det = g.clone().lu().determinant();
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    if !det.is_finite() || det.abs() < 1e-13 * scale.powi(spec.dim as i32) {
        return Err(Error::numerical(
            "metric_at",
            format!("metric numerically degenerate at {x:?} (det = {det})"),
        ));
    }
    let g_inv = g.clone().try_inverse().ok_or_else(|| {
        Error::numerical("metric_at", format!("metric not invertible at {x:?}"))
    })?;
    Ok(MetricAt { point: x.to_vec(), g, g_inv, det })
}

/// Validates Lorentzian signature (exactly one negative eigenvalue) at `x`.
pub fn check_signature(spec: &MetricSpec, x: &[f64]) -> Result<()> {
    let g = metric_value(spec, x);
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSpec(format!("metric has non-finite entries at {x:?}")));
    }
    let eig = g.clone().symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut neg = 0;
    let mut pos = 0;
    for &l in eig.eigenvalues.iter() {
        if l.abs() <= 1e-12 * scale.max(1e-300) {
            return Err(Error::InvalidSpec(format!(
                "metric is degenerate at {x:?} (eigenvalue {l:.3e})"
            )));
        }
        if l < 0.0 {
            neg += 1;
        } else {
            pos += 1;
        }
    }
    if neg != 1 {
        return Err(Error::InvalidSpec(format!(
            "metric does not have Lorentzian signature at {x:?} ({neg} negative / {pos} positive eigenvalues)"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Foliated data access (values and entry derivatives)
// ---------------------------------------------------------------------------

/// Access to `(n², g_ij)` and their first/second coordinate derivatives for
/// every non-general metric kind. Everything includes the global `scale2`.
pub(crate) struct Fol<'a> {
    pub spec: &'a MetricSpec,
}

impl MetricSpec {
    /// Foliated accessor, `None` for general-form metrics.
    pub(crate) fn fol(&self) -> Option<Fol<'_>> {
        if self.is_foliated() {
            Some(Fol { spec: self })
        } else {
            None
        }
    }
}

impl Fol<'_> {
    fn n_sp(&self) -> usize {
        self.spec.dim - 1
    }

    /// `n²` (with global scale).
    pub fn lapse2(&self, x: &[f64]) -> f64 {
        let s = self.spec.scale2;
        match &self.spec.kind {
            MetricKind::Minkowski
            | MetricKind::FlatSpatialTorus { .. }
            | MetricKind::DeSitterSlicing { .. }
            | MetricKind::Flrw { .. } => s,
            MetricKind::Schwarzschild { mass } => s * (1.0 - 2.0 * mass / x[1]),
            MetricKind::Foliated { lapse, .. } => {
                let n = lapse.eval(x);
                s * n * n
            }
            MetricKind::General { .. } => unreachable!("general metrics have no foliation"),
        }
    }

    /// `∂_ax n²`.
    pub fn d_lapse2(&self, x: &[f64], ax: usize) -> f64 {
        let s = self.spec.scale2;
        match &self.spec.kind {
            MetricKind::Minkowski
            | MetricKind::FlatSpatialTorus { .. }
            | MetricKind::DeSitterSlicing { .. }
            | MetricKind::Flrw { .. } => 0.0,
            MetricKind::Schwarzschild { mass } => {
                if ax == 1 {
                    s * 2.0 * mass / (x[1] * x[1])
                } else {
                    0.0
                }
            }
            MetricKind::Foliated { lapse, .. } => {
                if lapse.is_independent_of(ax) {
                    return 0.0;
                }
                let mut f = |y: &[f64]| {
                    let n = lapse.eval(y);
                    s * n * n
                };
                numdiff::d1(&mut f, x, ax, numdiff::H1)
            }
            MetricKind::General { .. } => unreachable!(),
        }
    }

    /// `∂_ax ∂_bx n²`.
    pub fn dd_lapse2(&self, x: &[f64], ax: usize, bx: usize) -> f64 {
        let s = self.spec.scale2;
        match &self.spec.kind {
            MetricKind::Minkowski
            | MetricKind::FlatSpatialTorus { .. }
            | MetricKind::DeSitterSlicing { .. }
            | MetricKind::Flrw { .. } => 0.0,
            MetricKind::Schwarzschild { mass } => {
                if ax == 1 && bx == 1 {
                    -s * 4.0 * mass / (x[1] * x[1] * x[1])
                } else {
                    0.0
                }
            }
            MetricKind::Foliated { lapse, .. } => {
                if lapse.is_independent_of(ax) || lapse.is_independent_of(bx) {
                    return 0.0;
                }
                let mut f = |y: &[f64]| {
                    let n = lapse.eval(y);
                    s * n * n
                };
                numdiff::d2(&mut f, x, ax, bx, numdiff::H2)
            }
            MetricKind::General { .. } => unreachable!(),
        }
    }

    /// Scale factor derivatives for the expanding flat model (dominated by
    /// the expression path; exact zeros when `a` is constant).
    fn flrw_a(&self, x: &[f64], order: usize) -> f64 {
        let MetricKind::Flrw { a, .. } = &self.spec.kind else { unreachable!() };
        match order {
            0 => a.eval(x),
            1 => {
                if a.is_independent_of(0) {
                    0.0
                } else {
                    let mut f = |y: &[f64]| a.eval(y);
                    numdiff::d1(&mut f, x, 0, numdiff::H1)
                }
            }
            _ => {
                if a.is_independent_of(0) {
                    0.0
                } else {
                    let mut f = |y: &[f64]| a.eval(y);
                    numdiff::d2(&mut f, x, 0, 0, numdiff::H2)
                }
            }
        }
    }

    /// Spatial metric `g_ij` (indices 0-based spatial, chart axis = i+1).
    pub fn gsp(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.n_sp();
        let s = self.spec.scale2;
        let mut g = DMatrix::zeros(n, n);
        match &self.spec.kind {
            MetricKind::Minkowski | MetricKind::FlatSpatialTorus { .. } => {
                for i in 0..n {
                    g[(i, i)] = s;
                }
            }
            MetricKind::Schwarzschild { mass } => {
                let r = x[1];
                let u = 1.0 - 2.0 * mass / r;
                g[(0, 0)] = s / u;
                g[(1, 1)] = s * r * r;
                g[(2, 2)] = s * r * r * x[2].sin().powi(2);
            }
            MetricKind::DeSitterSlicing { k } => {
                let e = (2.0 * k.sqrt() * x[0]).exp();
                for i in 0..n {
                    g[(i, i)] = s * e;
                }
            }
            MetricKind::Flrw { .. } => {
                let a = self.flrw_a(x, 0);
                for i in 0..n {
                    g[(i, i)] = s * a * a;
                }
            }
            MetricKind::Foliated { spatial, .. } => {
                for i in 0..n {
                    for j in i..n {
                        let v = s * spatial.eval(i, j, x);
                        g[(i, j)] = v;
                        g[(j, i)] = v;
                    }
                }
            }
            MetricKind::General { .. } => unreachable!(),
        }
        g
    }

    /// `∂_ax g_ij` as a matrix.
    pub fn d_gsp(&self, x: &[f64], ax: usize) -> DMatrix<f64> {
        let n = self.n_sp();
        let s = self.spec.scale2;
        let mut d = DMatrix::zeros(n, n);
        match &self.spec.kind {
            MetricKind::Minkowski | MetricKind::FlatSpatialTorus { .. } => {}
            MetricKind::Schwarzschild { mass } => {
                let r = x[1];
                let u = 1.0 - 2.0 * mass / r;
                let du = 2.0 * mass / (r * r);
                match ax {
                    1 => {
                        d[(0, 0)] = -s * du / (u * u);
                        d[(1, 1)] = 2.0 * s * r;
                        d[(2, 2)] = 2.0 * s * r * x[2].sin().powi(2);
                    }
                    2 => {
                        d[(2, 2)] = s * r * r * (2.0 * x[2]).sin();
                    }
                    _ => {}
                }
            }
            MetricKind::DeSitterSlicing { k } => {
                if ax == 0 {
                    let h = k.sqrt();
                    let e = (2.0 * h * x[0]).exp();
                    for i in 0..n {
                        d[(i, i)] = s * 2.0 * h * e;
                    }
                }
            }
            MetricKind::Flrw { .. } => {
                if ax == 0 {
                    let a = self.flrw_a(x, 0);
                    let ad = self.flrw_a(x, 1);
                    for i in 0..n {
                        d[(i, i)] = s * 2.0 * a * ad;
                    }
                }
            }
            MetricKind::Foliated { spatial, .. } => {
                for i in 0..n {
                    for j in i..n {
                        if let Some(e) = spatial.get(i, j) {
                            if !e.is_independent_of(ax) {
                                let mut f = |y: &[f64]| s * e.eval(y);
                                let v = numdiff::d1(&mut f, x, ax, numdiff::H1);
                                d[(i, j)] = v;
                                d[(j, i)] = v;
                            }
                        }
                    }
                }
            }
            MetricKind::General { .. } => unreachable!(),
        }
        d
    }

    /// `∂_ax ∂_bx g_ij` as a matrix.
    pub fn dd_gsp(&self, x: &[f64], ax: usize, bx: usize) -> DMatrix<f64> {
        let n = self.n_sp();
        let s = self.spec.scale2;
        let mut d = DMatrix::zeros(n, n);
        match &self.spec.kind {
            MetricKind::Minkowski | MetricKind::FlatSpatialTorus { .. } => {}
            MetricKind::Schwarzschild { mass } => {
                let r = x[1];
                let th = x[2];
                let u = 1.0 - 2.0 * mass / r;
                let du = 2.0 * mass / (r * r);
                let ddu = -4.0 * mass / (r * r * r);
                let (lo, hi) = (ax.min(bx), ax.max(bx));
                match (lo, hi) {
                    (1, 1) => {
                        d[(0, 0)] = s * (-ddu / (u * u) + 2.0 * du * du / (u * u * u));
                        d[(1, 1)] = 2.0 * s;
                        d[(2, 2)] = 2.0 * s * th.sin().powi(2);
                    }
                    (1, 2) => {
                        d[(2, 2)] = 2.0 * s * r * (2.0 * th).sin();
                    }
                    (2, 2) => {
                        d[(2, 2)] = 2.0 * s * r * r * (2.0 * th).cos();
                    }
                    _ => {}
                }
            }
            MetricKind::DeSitterSlicing { k } => {
                if ax == 0 && bx == 0 {
                    let h = k.sqrt();
                    let e = (2.0 * h * x[0]).exp();
                    for i in 0..n {
                        d[(i, i)] = s * 4.0 * k * e;
                    }
                }
            }
            MetricKind::Flrw { .. } => {
                if ax == 0 && bx == 0 {
                    let a = self.flrw_a(x, 0);
                    let ad = self.flrw_a(x, 1);
                    let add = self.flrw_a(x, 2);
                    for i in 0..n {
                        d[(i, i)] = s * 2.0 * (ad * ad + a * add);
                    }
                }
            }
            MetricKind::Foliated { spatial, .. } => {
                for i in 0..n {
                    for j in i..n {
                        if let Some(e) = spatial.get(i, j) {
                            if !(e.is_independent_of(ax) || e.is_independent_of(bx)) {
                                let mut f = |y: &[f64]| s * e.eval(y);
                                let v = numdiff::d2(&mut f, x, ax, bx, numdiff::H2);
                                d[(i, j)] = v;
                                d[(j, i)] = v;
                            }
                        }
                    }
                }
            }
            MetricKind::General { .. } => unreachable!(),
        }
        d
    }
}

/// Bundle of foliated data at a point with the signed time-time component
/// `f` (`-n²` for the Lorentzian metric, `+n²` for the reference metric).
pub(crate) struct FolData {
    pub dim: usize,
    pub f: f64,
    pub df: Vec<f64>,
    pub ddf: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    pub dg: Vec<DMatrix<f64>>,
    pub ddg: Vec<Vec<DMatrix<f64>>>,
}

pub(crate) fn fol_data(
    fol: &Fol<'_>,
    x: &[f64],
    time_sign: f64,
    with_second: bool,
) -> Result<FolData> {
    let dim = fol.spec.dim;
    let l2 = fol.lapse2(x);
    if !(l2.is_finite() && l2 > 0.0) {
        return Err(Error::numerical(
            "foliated metric",
            format!("lapse² = {l2} is not positive at {x:?}"),
        ));
    }
    let f = time_sign * l2;
    let df: Vec<f64> = (0..dim).map(|ax| time_sign * fol.d_lapse2(x, ax)).collect();
    let mut ddf = DMatrix::zeros(dim, dim);
    if with_second {
        for ax in 0..dim {
            for bx in ax..dim {
                let v = time_sign * fol.dd_lapse2(x, ax, bx);
                ddf[(ax, bx)] = v;
                ddf[(bx, ax)] = v;
            }
        }
    }
    let g = fol.gsp(x);
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical(
            "foliated metric",
            format!("non-finite spatial metric at {x:?}"),
        ));
    }
    let g_inv = g.clone().try_inverse().ok_or_else(|| {
        Error::numerical("foliated metric", format!("spatial metric degenerate at {x:?}"))
    })?;
    let dg: Vec<DMatrix<f64>> = (0..dim).map(|ax| fol.d_gsp(x, ax)).collect();
    let ddg: Vec<Vec<DMatrix<f64>>> = if with_second {
        (0..dim)
            .map(|ax| (0..dim).map(|bx| fol.dd_gsp(x, ax.min(bx), ax.max(bx))).collect())
            .collect()
    } else {
        Vec::new()
    };
    Ok(FolData { dim, f, df, ddf, g_inv, dg, ddg })
}

// ---------------------------------------------------------------------------
// Christoffel symbols
// ---------------------------------------------------------------------------

/// Connection coefficients `Γ^a_{bc}` at one point.
#[derive(Debug, Clone)]
pub struct ChristoffelAt {
    pub point: Vec<f64>,
    pub gamma: T3,
}

/// Closed-form Christoffel symbols of `f dt² + g_ij dx^i dx^j`.
pub(crate) fn christoffel_from_fol(d: &FolData) -> T3 {
    let dim = d.dim;
    let n = dim - 1;
    let mut gamma = T3::zeros(dim);
    let inv2f = 0.5 / d.f;
    // Γ^0_{00}, Γ^0_{0i}, Γ^0_{ij}
    gamma.set(0, 0, 0, d.df[0] * inv2f);
    for i in 0..n {
        let v = d.df[i + 1] * inv2f;
        gamma.set(0, 0, i + 1, v);
        gamma.set(0, i + 1, 0, v);
        for j in 0..n {
            gamma.set(0, i + 1, j + 1, -d.dg[0][(i, j)] * inv2f);
        }
    }
    // Γ^k_{00}, Γ^k_{0i}, Γ^k_{ij}
    for k in 0..n {
        let mut v00 = 0.0;
        for l in 0..n {
            v00 -= 0.5 * d.g_inv[(k, l)] * d.df[l + 1];
        }
        gamma.set(k + 1, 0, 0, v00);
        for i in 0..n {
            let mut v0i = 0.0;
            for l in 0..n {
                v0i += 0.5 * d.g_inv[(k, l)] * d.dg[0][(l, i)];
            }
            gamma.set(k + 1, 0, i + 1, v0i);
            gamma.set(k + 1, i + 1, 0, v0i);
            for j in i..n {
                let mut vij = 0.0;
                for l in 0..n {
                    vij += 0.5
                        * d.g_inv[(k, l)]
                        * (d.dg[i + 1][(l, j)] + d.dg[j + 1][(l, i)] - d.dg[l + 1][(i, j)]);
                }
                gamma.set(k + 1, i + 1, j + 1, vij);
                gamma.set(k + 1, j + 1, i + 1, vij);
            }
        }
    }
    gamma
}

/// Christoffel symbols of an arbitrary symmetric matrix field by central
/// differences of its entries (exact zeros for constant entries).
pub(crate) fn christoffel_of_field(
    field: &mut dyn FnMut(&[f64]) -> DMatrix<f64>,
    x: &[f64],
    dim: usize,
    h_scale: f64,
) -> Result<T3> {
    let g = field(x);
    let g_inv = g.clone().try_inverse().ok_or_else(|| {
        Error::numerical("christoffel (fd)", format!("metric degenerate at {x:?}"))
    })?;
    let mut dg: Vec<DMatrix<f64>> = Vec::with_capacity(dim);
    for ax in 0..dim {
        let h = numdiff::step(h_scale, x[ax]);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[ax] += h;
        xm[ax] -= h;
        let diff = (field(&xp) - field(&xm)) / (2.0 * h);
        dg.push(diff);
    }
    let mut gamma = T3::zeros(dim);
    for a in 0..dim {
        for b in 0..dim {
            for c in b..dim {
                let mut v = 0.0;
                for dx in 0..dim {
                    v += 0.5 * g_inv[(a, dx)] * (dg[b][(dx, c)] + dg[c][(dx, b)] - dg[dx][(b, c)]);
                }
                gamma.set(a, b, c, v);
                gamma.set(a, c, b, v);
            }
        }
    }
    Ok(gamma)
}

/// Connection coefficients at `x`: closed-form foliated path when available,
/// otherwise the finite-difference path.
pub fn christoffel_at(spec: &MetricSpec, x: &[f64]) -> Result<ChristoffelAt> {
    if x.len() != spec.dim {
        return Err(Error::InvalidSpec(format!(
            "point has {} coordinates, metric dimension is {}",
            x.len(),
            spec.dim
        )));
    }
    let gamma = match spec.fol() {
        Some(fol) => christoffel_from_fol(&fol_data(&fol, x, -1.0, false)?),
        None => {
            let mut field = |y: &[f64]| metric_value(spec, y);
            christoffel_of_field(&mut field, x, spec.dim, numdiff::H1)?
        }
    };
    if gamma.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("christoffel_at", format!("non-finite value at {x:?}")));
    }
    Ok(ChristoffelAt { point: x.to_vec(), gamma })
}

/// Finite-difference Christoffel symbols regardless of metric kind
/// (the independent route used by cross-checks).
pub fn christoffel_at_fd(spec: &MetricSpec, x: &[f64]) -> Result<ChristoffelAt> {
    let mut field = |y: &[f64]| metric_value(spec, y);
    let gamma = christoffel_of_field(&mut field, x, spec.dim, numdiff::H1)?;
    Ok(ChristoffelAt { point: x.to_vec(), gamma })
}

// ---------------------------------------------------------------------------
// Curvature
// ---------------------------------------------------------------------------

/// Curvature data at one point: lowered Riemann components `R_{αβγδ}`
/// (lowered slot third), Ricci, and scalar curvature.
#[derive(Debug, Clone)]
pub struct RiemannAt {
    pub point: Vec<f64>,
    pub riem: T4,
    pub ricci: DMatrix<f64>,
    pub scalar: f64,
}

/// Maximal violations of the algebraic Riemann symmetries, for diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct SymmetryResiduals {
    /// `R_{αβγδ} + R_{βαγδ}`
    pub antisym_first: f64,
    /// `R_{αβγδ} + R_{αβδγ}`
    pub antisym_second: f64,
    /// `R_{αβγδ} - R_{γδαβ}`
    pub pair: f64,
    /// First Bianchi cycle over the three non-lowered slots.
    pub bianchi: f64,
}

impl SymmetryResiduals {
    pub fn max(&self) -> f64 {
        self.antisym_first.max(self.antisym_second).max(self.pair).max(self.bianchi)
    }
}

pub fn symmetry_residuals(r: &RiemannAt) -> SymmetryResiduals {
    let dim = r.riem.dim;
    let t = &r.riem;
    let mut a1: f64 = 0.0;
    let mut a2: f64 = 0.0;
    let mut pr: f64 = 0.0;
    let mut bi: f64 = 0.0;
    for a in 0..dim {
        for b in 0..dim {
            for c in 0..dim {
                for d in 0..dim {
                    a1 = a1.max((t.get(a, b, c, d) + t.get(b, a, c, d)).abs());
                    a2 = a2.max((t.get(a, b, c, d) + t.get(a, b, d, c)).abs());
                    pr = pr.max((t.get(a, b, c, d) - t.get(c, d, a, b)).abs());
                    // Cyclic sum over the slots (a, b, d) with c lowered.
                    bi = bi.max(
                        (t.get(a, b, c, d) + t.get(b, d, c, a) + t.get(d, a, c, b)).abs(),
                    );
                }
            }
        }
    }
    SymmetryResiduals { antisym_first: a1, antisym_second: a2, pair: pr, bianchi: bi }
}

/// Assembles lowered curvature, Ricci, and scalar from `Γ`, `∂Γ`, and the
/// metric at a point.
fn assemble_curvature(
    x: &[f64],
    g: &DMatrix<f64>,
    g_inv: &DMatrix<f64>,
    gamma: &T3,
    dgamma: &[T3],
) -> RiemannAt {
    let dim = g.nrows();
    let mut up = T4::zeros(dim); // R^ζ_{αβδ} stored as (ζ, α, β, δ)
    for z in 0..dim {
        for a in 0..dim {
            for b in 0..dim {
                if a == b {
                    continue;
                }
                for d in 0..dim {
                    let mut v = dgamma[a].get(z, b, d) - dgamma[b].get(z, a, d);
                    for e in 0..dim {
                        v += gamma.get(z, a, e) * gamma.get(e, b, d)
                            - gamma.get(z, b, e) * gamma.get(e, a, d);
                    }
                    up.set(z, a, b, d, v);
                }
            }
        }
    }
    let mut riem = T4::zeros(dim);
    for a in 0..dim {
        for b in 0..dim {
            for c in 0..dim {
                for d in 0..dim {
                    let mut v = 0.0;
                    for z in 0..dim {
                        v += g[(c, z)] * up.get(z, a, b, d);
                    }
                    riem.set(a, b, c, d, v);
                }
            }
        }
    }
    let mut ricci = DMatrix::zeros(dim, dim);
    for b in 0..dim {
        for d in 0..dim {
            let mut v = 0.0;
            for a in 0..dim {
                v += up.get(a, a, b, d);
            }
            ricci[(b, d)] = v;
        }
    }
    // Symmetrize Ricci against numerical noise (it is symmetric exactly
    // for the analytic path and to rounding for the FD path).
    let ricci = (ricci.clone() + ricci.transpose()) * 0.5;
    let mut scalar = 0.0;
    for b in 0..dim {
        for d in 0..dim {
            scalar += g_inv[(b, d)] * ricci[(b, d)];
        }
    }
    RiemannAt { point: x.to_vec(), riem, ricci, scalar }
}

/// Christoffel symbols together with their analytic first coordinate
/// derivatives on the foliated path.
pub(crate) fn christoffel_and_grad_from_fol(d: &FolData) -> (T3, Vec<T3>) {
    let dim = d.dim;
    let n = dim - 1;
    let gamma = christoffel_from_fol(d);
    // ∂_μ g^{kl} = -g^{ka} (∂_μ g_{ab}) g^{bl}
    let dginv: Vec<DMatrix<f64>> =
        (0..dim).map(|mu| -(&d.g_inv * &d.dg[mu] * &d.g_inv)).collect();
    let mut out = Vec::with_capacity(dim);
    for mu in 0..dim {
        let mut dg = T3::zeros(dim);
        let f = d.f;
        let dfm = d.df[mu];
        let inv2f = 0.5 / f;
        // ∂_μ Γ^0_{00} = ∂_μ∂_0 f/(2f) - ∂_0 f ∂_μ f/(2f²)
        dg.set(0, 0, 0, d.ddf[(mu, 0)] * inv2f - d.df[0] * dfm * inv2f / f);
        for i in 0..n {
            let v = d.ddf[(mu, i + 1)] * inv2f - d.df[i + 1] * dfm * inv2f / f;
            dg.set(0, 0, i + 1, v);
            dg.set(0, i + 1, 0, v);
            for j in 0..n {
                let v = -d.ddg[mu][0][(i, j)] * inv2f + d.dg[0][(i, j)] * dfm * inv2f / f;
                dg.set(0, i + 1, j + 1, v);
            }
        }
        for k in 0..n {
            let mut v00 = 0.0;
            for l in 0..n {
                v00 -= 0.5
                    * (dginv[mu][(k, l)] * d.df[l + 1] + d.g_inv[(k, l)] * d.ddf[(mu, l + 1)]);
            }
            dg.set(k + 1, 0, 0, v00);
            for i in 0..n {
                let mut v0i = 0.0;
                for l in 0..n {
                    v0i += 0.5
                        * (dginv[mu][(k, l)] * d.dg[0][(l, i)]
                            + d.g_inv[(k, l)] * d.ddg[mu][0][(l, i)]);
                }
                dg.set(k + 1, 0, i + 1, v0i);
                dg.set(k + 1, i + 1, 0, v0i);
                for j in i..n {
                    let mut vij = 0.0;
                    for l in 0..n {
                        let first = dginv[mu][(k, l)]
                            * (d.dg[i + 1][(l, j)] + d.dg[j + 1][(l, i)] - d.dg[l + 1][(i, j)]);
                        let second = d.g_inv[(k, l)]
                            * (d.ddg[mu][i + 1][(l, j)] + d.ddg[mu][j + 1][(l, i)]
                                - d.ddg[mu][l + 1][(i, j)]);
                        vij += 0.5 * (first + second);
                    }
                    dg.set(k + 1, i + 1, j + 1, vij);
                    dg.set(k + 1, j + 1, i + 1, vij);
                }
            }
        }
        out.push(dg);
    }
    (gamma, out)
}

/// Curvature at `x`: analytic assembly on the foliated path, nested finite
/// differences on the general path.
pub fn riemann_at(spec: &MetricSpec, x: &[f64]) -> Result<RiemannAt> {
    let m = metric_at(spec, x)?;
    let r = match spec.fol() {
        Some(fol) => {
            let d = fol_data(&fol, x, -1.0, true)?;
            let (gamma, dgamma) = christoffel_and_grad_from_fol(&d);
            assemble_curvature(x, &m.g, &m.g_inv, &gamma, &dgamma)
        }
        None => riemann_at_fd(spec, x)?,
    };
    if r.riem.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("riemann_at", format!("non-finite value at {x:?}")));
    }
    Ok(r)
}

/// Curvature by finite differences of the finite-difference Christoffel
/// field; works for every metric kind (the independent cross-check route).
pub fn riemann_at_fd(spec: &MetricSpec, x: &[f64]) -> Result<RiemannAt> {
    let m = metric_at(spec, x)?;
    let dim = spec.dim;
    let gamma = christoffel_at_fd(spec, x)?.gamma;
    let mut dgamma = Vec::with_capacity(dim);
    for ax in 0..dim {
        let h = numdiff::step(numdiff::HN, x[ax]);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[ax] += h;
        xm[ax] -= h;
        let gp = christoffel_at_fd(spec, &xp)?.gamma;
        let gm = christoffel_at_fd(spec, &xm)?.gamma;
        let mut d = T3::zeros(dim);
        for i in 0..d.data.len() {
            d.data[i] = (gp.data[i] - gm.data[i]) / (2.0 * h);
        }
        dgamma.push(d);
    }
    Ok(assemble_curvature(x, &m.g, &m.g_inv, &gamma, &dgamma))
}

// ---------------------------------------------------------------------------
// Lie derivative along the normalized foliation normal
// ---------------------------------------------------------------------------

/// `(L_T g)_{αβ}` for the normalized foliation normal `T = n⁻¹ ∂_t` of a
/// foliated metric:
///
/// ```text
/// (L_T g)_00 = 0,   (L_T g)_0i = ∂_i n,   (L_T g)_ij = n⁻¹ ∂_t g_ij
/// ```
pub fn lie_derivative_t(spec: &MetricSpec, x: &[f64]) -> Result<DMatrix<f64>> {
    let fol = spec.fol().ok_or_else(|| {
        Error::Unsupported("lie_derivative_t requires a foliated metric".into())
    })?;
    let d = fol_data(&fol, x, -1.0, false)?;
    let n_lapse = (-d.f).sqrt();
    let dim = spec.dim;
    let mut lie = DMatrix::zeros(dim, dim);
    for i in 0..dim - 1 {
        // ∂_i n = ∂_i(n²) / (2n)
        let v = -d.df[i + 1] / (2.0 * n_lapse);
        lie[(0, i + 1)] = v;
        lie[(i + 1, 0)] = v;
        for j in 0..dim - 1 {
            lie[(i + 1, j + 1)] = d.dg[0][(i, j)] / n_lapse;
        }
    }
    Ok(lie)
}
