//! Embedded Runge–Kutta 4(5) integrator with dense output and region-exit
//! events.
//!
//! The classic Fehlberg tableau advances the 5th-order solution and controls
//! the step with the embedded 4th-order error estimate. Samples store the
//! state and its derivative, so solutions can be evaluated anywhere via
//! cubic Hermite interpolation. An `inside` predicate turns the integrator
//! into an event finder: when an accepted step lands outside the region, the
//! crossing is bisected on the dense solution and the integration stops at
//! the boundary.

/// Integration controls.
#[derive(Debug, Clone)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; estimated from the first derivative when `None`.
    pub h0: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-10, atol: 1e-12, h0: None, h_max: f64::INFINITY, max_steps: 400_000 }
    }
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        OdeOptions { rtol: tol, atol: tol * 1e-2, ..Default::default() }
    }
}

/// Why the integration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OdeStatus {
    /// Reached `t_end`.
    Complete,
    /// The `inside` predicate flipped; the final sample sits on the boundary.
    Event,
    /// Step budget exhausted.
    MaxSteps,
    /// Error control forced the step below the representable minimum.
    StepUnderflow,
    /// The right-hand side reported failure at the initial state.
    RhsFailure,
}

/// Dense solution: samples of `(t, y, y')` plus a termination status.
#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub ts: Vec<f64>,
    pub ys: Vec<Vec<f64>>,
    pub fs: Vec<Vec<f64>>,
    pub status: OdeStatus,
    pub steps_taken: usize,
}

impl OdeSolution {
    pub fn t_end(&self) -> f64 {
        *self.ts.last().unwrap()
    }

    pub fn y_end(&self) -> &[f64] {
        self.ys.last().unwrap()
    }

    /// Cubic Hermite evaluation; clamps outside the covered interval.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let n = self.ts.len();
        if n == 1 || t <= self.ts[0] {
            return self.ys[0].clone();
        }
        if t >= self.ts[n - 1] {
            return self.ys[n - 1].clone();
        }
        let k = match self.ts.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(i) => return self.ys[i].clone(),
            Err(i) => i - 1,
        };
        let (t0, t1) = (self.ts[k], self.ts[k + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (h00, h10, h01, h11) = hermite_basis(s);
        let mut out = vec![0.0; self.ys[k].len()];
        for i in 0..out.len() {
            out[i] = h00 * self.ys[k][i]
                + h10 * h * self.fs[k][i]
                + h01 * self.ys[k + 1][i]
                + h11 * h * self.fs[k + 1][i];
        }
        out
    }
}

fn hermite_basis(s: f64) -> (f64, f64, f64, f64) {
    let s2 = s * s;
    let s3 = s2 * s;
    (
        2.0 * s3 - 3.0 * s2 + 1.0,
        s3 - 2.0 * s2 + s,
        -2.0 * s3 + 3.0 * s2,
        s3 - s2,
    )
}

// Fehlberg 4(5) tableau.
const A: [[f64; 5]; 5] = [
    [1.0 / 4.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 32.0, 9.0 / 32.0, 0.0, 0.0, 0.0],
    [1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0, 0.0, 0.0],
    [439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0, 0.0],
    [-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0],
];
const C: [f64; 6] = [0.0, 1.0 / 4.0, 3.0 / 8.0, 12.0 / 13.0, 1.0, 1.0 / 2.0];
const B5: [f64; 6] =
    [16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0, -9.0 / 50.0, 2.0 / 55.0];
const B4: [f64; 6] = [25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -1.0 / 5.0, 0.0];

/// Integrates `y' = rhs(t, y)` from `t0` to `t_end > t0`.
///
/// `rhs` fills `dy` and returns `false` when the state is outside its domain
/// of definition (the step is then retried smaller). `inside` is the event
/// predicate: integration stops at the boundary where it first turns false.
pub fn integrate(
    rhs: &mut dyn FnMut(f64, &[f64], &mut [f64]) -> bool,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    opts: &OdeOptions,
    inside: &mut dyn FnMut(f64, &[f64]) -> bool,
) -> OdeSolution {
    assert!(t_end > t0, "integrate requires t_end > t0");
    let dim = y0.len();
    let mut f0 = vec![0.0; dim];
    if !rhs(t0, y0, &mut f0) {
        return OdeSolution {
            ts: vec![t0],
            ys: vec![y0.to_vec()],
            fs: vec![f0],
            status: OdeStatus::RhsFailure,
            steps_taken: 0,
        };
    }

    if !inside(t0, y0) {
        return OdeSolution {
            ts: vec![t0],
            ys: vec![y0.to_vec()],
            fs: vec![f0],
            status: OdeStatus::Event,
            steps_taken: 0,
        };
    }

    let span = t_end - t0;
    let mut h = opts.h0.unwrap_or_else(|| {
        let ynorm = y0.iter().map(|v| v * v).sum::<f64>().sqrt();
        let fnorm = f0.iter().map(|v| v * v).sum::<f64>().sqrt();
        (0.01 * (1.0 + ynorm) / (1.0 + fnorm)).min(span / 10.0)
    });
    h = h.min(opts.h_max).min(span);

    let mut ts = vec![t0];
    let mut ys = vec![y0.to_vec()];
    let mut fs = vec![f0.clone()];
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut f = f0;
    let mut steps = 0usize;

    let mut k = vec![vec![0.0; dim]; 6];
    let mut ytmp = vec![0.0; dim];
    let mut y5 = vec![0.0; dim];

    let status = 'outer: loop {
        if t >= t_end - 1e-14 * span.abs() {
            break OdeStatus::Complete;
        }
        if steps >= opts.max_steps {
            break OdeStatus::MaxSteps;
        }
        h = h.min(t_end - t);
        let h_floor = 1e-14 * (t.abs().max(1.0));
        if h < h_floor {
            break OdeStatus::StepUnderflow;
        }

        // Stages.
        k[0].copy_from_slice(&f);
        let mut stage_ok = true;
        for s in 1..6 {
            for i in 0..dim {
                let mut acc = 0.0;
                for j in 0..s {
                    acc += A[s - 1][j] * k[j][i];
                }
                ytmp[i] = y[i] + h * acc;
            }
            if !rhs(t + C[s] * h, &ytmp, &mut k[s]) {
                stage_ok = false;
                break;
            }
        }
        if !stage_ok {
            h *= 0.5;
            steps += 1;
            continue;
        }

        // 5th-order solution and embedded error.
        let mut err_sq = 0.0;
        for i in 0..dim {
            let mut acc5 = 0.0;
            let mut acc4 = 0.0;
            for s in 0..6 {
                acc5 += B5[s] * k[s][i];
                acc4 += B4[s] * k[s][i];
            }
            y5[i] = y[i] + h * acc5;
            let e = h * (acc5 - acc4);
            let scale = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
            err_sq += (e / scale) * (e / scale);
        }
        let err = (err_sq / dim as f64).sqrt();
        steps += 1;

        if err <= 1.0 || h <= h_floor * 2.0 {
            // Accept.
            let t_new = t + h;
            let mut f_new = vec![0.0; dim];
            if !rhs(t_new, &y5, &mut f_new) {
                // Landed outside the RHS domain: retry with smaller step.
                h *= 0.5;
                continue;
            }
            t = t_new;
            y.copy_from_slice(&y5);
            f = f_new;
            ts.push(t);
            ys.push(y.clone());
            fs.push(f.clone());

            if !inside(t, &y) {
                // Bisect the crossing on the dense segment just added.
                let sol_view = OdeSolution {
                    ts: ts.clone(),
                    ys: ys.clone(),
                    fs: fs.clone(),
                    status: OdeStatus::Event,
                    steps_taken: steps,
                };
                let mut lo = ts[ts.len() - 2];
                let mut hi = t;
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if inside(mid, &sol_view.eval(mid)) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-14 * (1.0 + hi.abs()) {
                        break;
                    }
                }
                let t_ev = lo;
                let y_ev = sol_view.eval(t_ev);
                let mut f_ev = vec![0.0; dim];
                if !rhs(t_ev, &y_ev, &mut f_ev) {
                    // Fall back to a dense-output slope.
                    let d = 1e-7 * (1.0 + t_ev.abs());
                    let ym = sol_view.eval(t_ev - d);
                    for i in 0..dim {
                        f_ev[i] = (y_ev[i] - ym[i]) / d;
                    }
                }
                // Replace the overshooting sample by the boundary sample.
                ts.pop();
                ys.pop();
                fs.pop();
                ts.push(t_ev);
                ys.push(y_ev);
                fs.push(f_ev);
                break 'outer OdeStatus::Event;
            }

            let grow = if err > 0.0 { 0.9 * err.powf(-0.2) } else { 5.0 };
            h = (h * grow.clamp(0.2, 5.0)).min(opts.h_max);
        } else {
            let shrink = (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            h *= shrink;
        }
    };

    OdeSolution { ts, ys, fs, status, steps_taken: steps }
}
