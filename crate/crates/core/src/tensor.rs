//! Dense component holders for rank-3/4 tensors and variance-aware norms.
//!
//! Components are stored row-major over multi-indices. Norms against a
//! Riemannian reference metric contract every slot with the metric (lower
//! slots with the inverse, upper slots with the metric itself):
//!
//! ```text
//! |A|² = A_I A_J  Π_k  M^(k)[I_k, J_k],   M^(k) = m (upper slot) or m⁻¹ (lower slot)
//! ```

use nalgebra::DMatrix;

/// Index variance of one tensor slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variance {
    Up,
    Down,
}

/// Rank-3 components, e.g. connection coefficients `Γ^a_{bc}` stored as
/// `(a, b, c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct T3 {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl T3 {
    pub fn zeros(dim: usize) -> Self {
        T3 { dim, data: vec![0.0; dim * dim * dim] }
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[(a * self.dim + b) * self.dim + c]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, c: usize, v: f64) {
        self.data[(a * self.dim + b) * self.dim + c] = v;
    }

    #[inline]
    pub fn add(&mut self, a: usize, b: usize, c: usize, v: f64) {
        self.data[(a * self.dim + b) * self.dim + c] += v;
    }

    pub fn max_abs_diff(&self, other: &T3) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }
}

/// Rank-4 components, e.g. the lowered curvature tensor `R_{abcd}`.
#[derive(Debug, Clone, PartialEq)]
pub struct T4 {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl T4 {
    pub fn zeros(dim: usize) -> Self {
        T4 { dim, data: vec![0.0; dim * dim * dim * dim] }
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.data[((a * self.dim + b) * self.dim + c) * self.dim + d]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, c: usize, d: usize, v: f64) {
        self.data[((a * self.dim + b) * self.dim + c) * self.dim + d] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &T4) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }
}

/// General dense tensor of rank 1..=4 with explicit slot variances,
/// used wherever a norm against a reference metric is required.
#[derive(Debug, Clone)]
pub struct Tensor {
    pub dim: usize,
    pub variance: Vec<Variance>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(dim: usize, variance: Vec<Variance>, data: Vec<f64>) -> Self {
        assert!(!variance.is_empty() && variance.len() <= 4);
        assert_eq!(data.len(), dim.pow(variance.len() as u32));
        Tensor { dim, variance, data }
    }

    pub fn from_vector_up(v: &[f64]) -> Self {
        Tensor::new(v.len(), vec![Variance::Up], v.to_vec())
    }

    pub fn from_matrix_down(m: &DMatrix<f64>) -> Self {
        Tensor::new(m.nrows(), vec![Variance::Down; 2], m.as_slice().to_vec())
        // nalgebra stores column-major; for a *symmetric* matrix the
        // row/column order is immaterial. Asymmetric uses must go through
        // `new` with explicitly ordered data.
    }

    pub fn from_t3_connection(t: &T3) -> Self {
        // Γ^a_{bc}: one upper slot, two lower.
        Tensor::new(t.dim, vec![Variance::Up, Variance::Down, Variance::Down], t.data.clone())
    }

    pub fn from_t4_down(t: &T4) -> Self {
        Tensor::new(t.dim, vec![Variance::Down; 4], t.data.clone())
    }

    pub fn rank(&self) -> usize {
        self.variance.len()
    }

    /// Squared norm against the Riemannian metric `m` (with inverse
    /// `m_inv`): contracts slot pairs with `m` for upper slots and `m_inv`
    /// for lower slots. Computed by raising/lowering slot-by-slot and then
    /// taking the full contraction, which keeps the cost at
    /// `O(rank · dim^(rank+1))`.
    pub fn norm_sq_with(&self, m: &DMatrix<f64>, m_inv: &DMatrix<f64>) -> f64 {
        let rank = self.rank();
        let dim = self.dim;
        let mut partner = self.data.clone();
        for slot in 0..rank {
            let mat = match self.variance[slot] {
                Variance::Up => m,
                Variance::Down => m_inv,
            };
            partner = contract_slot(&partner, dim, rank, slot, mat);
        }
        self.data.iter().zip(&partner).map(|(a, b)| a * b).sum()
    }

    /// Norm; clamps tiny negative rounding of the squared norm to zero.
    pub fn norm_with(&self, m: &DMatrix<f64>, m_inv: &DMatrix<f64>) -> f64 {
        self.norm_sq_with(m, m_inv).max(0.0).sqrt()
    }
}

/// Applies `mat` to one slot: `B_{...j...} = Σ_i mat[j,i] A_{...i...}`.
fn contract_slot(data: &[f64], dim: usize, rank: usize, slot: usize, mat: &DMatrix<f64>) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    // Stride layout: index k has stride dim^(rank-1-k).
    let stride = dim.pow((rank - 1 - slot) as u32);
    let block = stride * dim; // span of the contracted slot
    for base in (0..data.len()).step_by(block) {
        for rest in 0..stride {
            for j in 0..dim {
                let mut acc = 0.0;
                for i in 0..dim {
                    acc += mat[(j, i)] * data[base + i * stride + rest];
                }
                out[base + j * stride + rest] = acc;
            }
        }
    }
    out
}
