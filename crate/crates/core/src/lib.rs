//! Numerical toolkit for Lorentzian geometry with an observer-induced
//! Riemannian reference metric.
//!
//! A spacetime is an `(n+1)`-dimensional manifold chart carrying a metric of
//! signature `(-,+,...,+)`. Given a future-directed unit timelike observer
//! vector `T` at a point (or a foliation normal field), the toolkit builds the
//! reference Riemannian metric
//!
//! ```text
//! g_T = g + 2 T♭ ⊗ T♭
//! ```
//!
//! and measures geometry in `g_T` norms: geodesics and parallel transport,
//! Jacobi fields and exponential-map Jacobians, conjugate radii, short
//! geodesic loops and injectivity-radius estimates, lower bounds produced by
//! quantitative theorems for foliated metrics, synchronous (Gaussian) charts
//! with convexity diagnostics, null-cone localization between coordinate
//! cones, null injectivity radii, and cone-volume comparison curves against
//! constant-curvature models.
//!
//! # Module map
//!
//! - [`expr`]: tiny arithmetic expression language for metric entries.
//! - [`config`]: text format describing metrics (builtin models, foliated
//!   `-n² dt² + g_ij dxdx`, or general symmetric component matrices).
//! - [`tensor`]: dense rank-3/rank-4 component holders and variance-aware
//!   norms.
//! - [`spacetime`]: metric evaluation, Christoffel symbols and curvature
//!   (closed-form foliated path and finite-difference general path), Lie
//!   derivative along the normalized foliation normal.
//! - [`frames`]: observers, orthonormal frames, the reference metric `g_T`,
//!   tensor norms, assumption-constant measurement, connection-gap checks.
//! - [`ode`]: embedded Runge–Kutta 4(5) integrator with dense output and
//!   region-exit events.
//! - [`geodesic`]: geodesic flow, parallel transport, exponential map and its
//!   two-point inverse, radial norm profiles.
//! - [`dirlattice`]: deterministic direction lattices and cap quadrature on
//!   unit spheres.
//! - [`jacobi`]: Jacobi fields along geodesics, exponential Jacobian
//!   determinant profiles, conjugate and null-conjugate radius searches.
//! - [`radius`]: short-loop detection, injectivity-radius reports, foliated
//!   and volume-based lower-bound chains, synchronous charts, convexity
//!   checks.
//! - [`cone`]: null-cone slope localization, cone graphs, null injectivity
//!   radius, cone volumes, model comparison curves, and the volume corollary.
//! - [`report`]: deterministic CSV/plot-data serialization helpers.

pub use nalgebra;

pub mod config;
pub mod cone;
pub mod dirlattice;
pub mod expr;
pub mod frames;
pub mod geodesic;
pub mod jacobi;
pub mod ode;
pub mod radius;
pub mod report;
pub mod spacetime;
pub mod tensor;

/// Crate-wide error type.
///
/// Parse errors carry 1-based line/column positions into the offending
/// document; numeric errors describe which quantity failed and where.
#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum Error {
    /// Lexical or grammatical error in an expression or config document.
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    /// Structurally valid input that violates a semantic requirement
    /// (wrong signature, non-positive lapse, dimension mismatch, ...).
    #[error("invalid metric specification: {0}")]
    InvalidSpec(String),
    /// A numerical routine could not produce a meaningful result.
    #[error("numerical failure in {context}: {msg}")]
    Numerical { context: String, msg: String },
    /// The request is outside what the given metric supports
    /// (e.g. foliation-only operations on a general metric).
    #[error("unsupported operation: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn numerical(context: &str, msg: impl Into<String>) -> Self {
        Error::Numerical { context: context.to_string(), msg: msg.into() }
    }
}

/// Convenient result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// A chart point, `coords[0]` being the time coordinate for foliated metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

impl std::fmt::Display for Point {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl From<&[f64]> for Point {
    fn from(c: &[f64]) -> Self {
        Point { coords: c.to_vec() }
    }
}
