//! Deterministic direction lattices on unit spheres and one-dimensional
//! Gauss–Legendre quadrature.
//!
//! Direction sets drive minima/maxima over directions (conjugate-point and
//! loop searches) and surface quadrature (cone volumes), so they must be
//! reproducible run to run: everything here is seed-free and closed-form.
//!
//! - `S⁰`: the two points `±1`;
//! - `S¹`: equally spaced angles;
//! - `S²`: Fibonacci spiral;
//! - `S³`: uniform Hopf-coordinate map fed by a Kronecker sequence;
//! - higher spheres: a fixed-seed Gaussian normalized to the sphere.
//!
//! Weights are equal-area (`area / count`), which for these lattices gives
//! quadrature errors well below the geometric tolerances they feed.

use nalgebra::DMatrix;

/// Surface area of the unit sphere `S^{m-1} ⊂ R^m`.
pub fn sphere_area(m: usize) -> f64 {
    // 2 π^{m/2} / Γ(m/2), via Γ at integer and half-integer arguments.
    let half_m = 0.5 * m as f64;
    2.0 * std::f64::consts::PI.powf(half_m) / gamma_half(m)
}

/// Γ(m/2) for integer `m ≥ 1`.
fn gamma_half(m: usize) -> f64 {
    let mut val = if m % 2 == 0 { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut a = if m % 2 == 0 { 1.0 } else { 0.5 };
    while a < 0.5 * m as f64 - 1e-9 {
        val *= a;
        a += 1.0;
    }
    val
}

/// Unit directions with equal-area quadrature weights (summing to the
/// sphere area).
#[derive(Debug, Clone)]
pub struct DirectionSet {
    pub dirs: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl DirectionSet {
    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }
}

/// Deterministic, roughly uniform directions on `S^{m-1} ⊂ R^m`.
pub fn sphere_directions(m: usize, count: usize) -> DirectionSet {
    assert!(m >= 1, "sphere dimension must be at least 1");
    let dirs: Vec<Vec<f64>> = match m {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => {
            let n = count.max(2);
            (0..n)
                .map(|k| {
                    let a = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / n as f64;
                    vec![a.cos(), a.sin()]
                })
                .collect()
        }
        3 => fibonacci_sphere(count.max(2)),
        4 => hopf_lattice(count.max(2)),
        _ => gaussian_sphere(m, count.max(2)),
    };
    let w = sphere_area(m) / dirs.len() as f64;
    let weights = vec![w; dirs.len()];
    DirectionSet { dirs, weights }
}

/// Fibonacci spiral on S².
fn fibonacci_sphere(n: usize) -> Vec<Vec<f64>> {
    let golden = (1.0 + 5.0f64.sqrt()) / 2.0;
    (0..n)
        .map(|k| {
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = 2.0 * std::f64::consts::PI * (k as f64 / golden).fract();
            vec![r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

/// Uniform S³ lattice: the area-preserving Hopf-coordinate map applied to
/// a three-dimensional Kronecker (additive golden-like) sequence.
fn hopf_lattice(n: usize) -> Vec<Vec<f64>> {
    // Strides of the R₃ low-discrepancy sequence.
    let g = 1.2207440846057596; // real root of x⁴ = x + 1
    let a1 = 1.0 / g;
    let a2 = 1.0 / (g * g);
    let a3 = 1.0 / (g * g * g);
    let tau = 2.0 * std::f64::consts::PI;
    (0..n)
        .map(|k| {
            let kf = k as f64 + 0.5;
            let u = (kf * a1).fract();
            let v = (kf * a2).fract();
            let w = (kf * a3).fract();
            let su = u.sqrt();
            let cu = (1.0 - u).sqrt();
            vec![
                cu * (tau * v).sin(),
                cu * (tau * v).cos(),
                su * (tau * w).sin(),
                su * (tau * w).cos(),
            ]
        })
        .collect()
}

/// Fixed-seed Gaussian directions for spheres of dimension ≥ 4.
fn gaussian_sphere(m: usize, n: usize) -> Vec<Vec<f64>> {
    let mut state = 0x9e3779b97f4a7c15u64;
    let mut unit = move || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (((state >> 11) as f64) / ((1u64 << 53) as f64)).clamp(1e-300, 1.0)
    };
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let mut v = Vec::with_capacity(m);
        while v.len() < m {
            // Box–Muller.
            let u1 = unit();
            let u2 = unit();
            let r = (-2.0 * u1.ln()).sqrt();
            v.push(r * (2.0 * std::f64::consts::PI * u2).cos());
            if v.len() < m {
                v.push(r * (2.0 * std::f64::consts::PI * u2).sin());
            }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            out.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    out
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` (Golub–Welsch via the
/// symmetric Jacobi matrix).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = k as f64 / ((4 * k * k - 1) as f64).sqrt();
        j[(k - 1, k)] = b;
        j[(k, k - 1)] = b;
    }
    let eig = j.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let node = eig.eigenvalues[i];
            let w = 2.0 * eig.eigenvectors[(0, i)] * eig.eigenvectors[(0, i)];
            (node, w)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    (pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect())
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(a: f64, b: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|wi| wi * half).collect(),
    )
}
