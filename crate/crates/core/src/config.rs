//! Metric specification documents.
//!
//! A spec is a small INI-style text document:
//!
//! ```text
//! # exterior region of a static spherically symmetric black hole
//! [model]
//! kind = schwarzschild
//! mass = 1.0
//!
//! [domain]
//! x1 = 2.2 40.0
//! ```
//!
//! Sections: `[model]`, `[lapse]`, `[spatial]`, `[metric]`, `[domain]`.
//! `#` starts a comment anywhere on a line. Values run to end of line.
//!
//! `[model] kind` selects one of the builtin models
//! (`minkowski`, `schwarzschild`, `desitter_slicing`, `flrw`,
//! `flat_spatial_torus`) or a user-defined form:
//!
//! - `kind = foliated`: `[lapse] n = <expr>` together with `[spatial]
//!   gij = <expr>` (1-based spatial indices, `i <= j`, missing off-diagonal
//!   entries are zero) describe `g = -n² dt² + g_ij dx^i dx^j`.
//! - `kind = general`: `[metric] gAB = <expr>` (0-based indices, `A <= B`)
//!   gives an arbitrary symmetric component matrix.
//!
//! Optional `[model]` keys: `dim` (chart dimension, default 4, supported
//! 2..=6) and `scale` (a positive constant multiplying every metric
//! component; scaling by `λ²` stretches all geometric radii by `λ`).
//!
//! `[domain]` bounds the chart box per axis (`t = -5 5`, `x1 = 2.2 40`) or
//! declares a periodic identification (`x2 = periodic 6.283185307179586`);
//! unbounded axes default to ±1e6. Periodic identifications also come from
//! the builtin models (`flat_spatial_torus` spatial axes, the azimuthal
//! angle of `schwarzschild`); coordinates on periodic axes live on the
//! covering line and comparisons reduce modulo the period.
//!
//! Parsing validates more than syntax: the lapse and any `flrw` scale factor
//! must be positive at deterministic probe points of the domain box, and the
//! metric must have Lorentzian signature (one negative, `dim-1` positive
//! eigenvalues) there. All syntax errors carry 1-based line/column positions.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::expr::{parse_expr_at, Expr};
use crate::{Error, Result};

/// Default half-width of the chart box on axes the document leaves unbounded.
pub const UNBOUNDED: f64 = 1.0e6;

/// Symmetric matrix of expressions with upper-triangular storage.
/// `None` entries are structural zeros, which downstream derivative code
/// exploits to return exact zeros.
#[derive(Debug, Clone)]
pub struct SymExprs {
    pub n: usize,
    entries: Vec<Option<(Expr, String)>>,
}

impl SymExprs {
    pub fn new(n: usize) -> Self {
        SymExprs { n, entries: vec![None; n * (n + 1) / 2] }
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        // Row-major upper triangle.
        i * self.n - i * (i + 1) / 2 + j
    }

    pub fn set(&mut self, i: usize, j: usize, e: Expr, src: String) {
        let s = self.slot(i, j);
        self.entries[s] = Some((e, src));
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&Expr> {
        self.entries[self.slot(i, j)].as_ref().map(|(e, _)| e)
    }

    pub fn source(&self, i: usize, j: usize) -> Option<&str> {
        self.entries[self.slot(i, j)].as_ref().map(|(_, s)| s.as_str())
    }

    pub fn eval(&self, i: usize, j: usize, coords: &[f64]) -> f64 {
        match self.get(i, j) {
            Some(e) => e.eval(coords),
            None => 0.0,
        }
    }
}

/// The metric content of a spec.
#[derive(Debug, Clone)]
pub enum MetricKind {
    /// Flat metric `diag(-1, 1, ..., 1)`.
    Minkowski,
    /// Static exterior chart `(t, r, θ, φ)` with lapse `n² = 1 - 2m/r`,
    /// spatial metric `diag(1/n², r², r² sin²θ)`.
    Schwarzschild { mass: f64 },
    /// Expanding slicing `g = -dt² + e^{2√k t} δ_ij dx^i dx^j` of the
    /// constant-curvature `k > 0` model.
    DeSitterSlicing { k: f64 },
    /// Spatially flat expanding model `g = -dt² + a(t)² δ_ij dx^i dx^j`.
    Flrw { a: Expr, a_src: String },
    /// Flat metric with every spatial axis identified modulo `period`.
    FlatSpatialTorus { period: f64 },
    /// User foliated form `g = -n² dt² + g_ij dx^i dx^j`.
    Foliated { lapse: Expr, lapse_src: String, spatial: SymExprs },
    /// User general symmetric component matrix.
    General { comps: SymExprs },
}

impl MetricKind {
    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::Minkowski => "minkowski",
            MetricKind::Schwarzschild { .. } => "schwarzschild",
            MetricKind::DeSitterSlicing { .. } => "desitter_slicing",
            MetricKind::Flrw { .. } => "flrw",
            MetricKind::FlatSpatialTorus { .. } => "flat_spatial_torus",
            MetricKind::Foliated { .. } => "foliated",
            MetricKind::General { .. } => "general",
        }
    }
}

/// A fully validated metric specification: the object every geometric
/// routine in this crate consumes.
#[derive(Debug, Clone)]
pub struct MetricSpec {
    /// Chart dimension `n+1` (coordinate 0 is `t`).
    pub dim: usize,
    pub kind: MetricKind,
    /// Per-axis chart box `[lo, hi]`.
    pub chart: Vec<[f64; 2]>,
    /// Period of each axis, when the model identifies it.
    pub periods: Vec<Option<f64>>,
    /// Constant factor multiplying every metric component (default 1).
    pub scale2: f64,
}

impl MetricSpec {
    fn base(dim: usize, kind: MetricKind) -> Self {
        MetricSpec {
            dim,
            kind,
            chart: vec![[-UNBOUNDED, UNBOUNDED]; dim],
            periods: vec![None; dim],
            scale2: 1.0,
        }
    }

    pub fn minkowski(dim: usize) -> Self {
        Self::base(dim, MetricKind::Minkowski)
    }

    pub fn schwarzschild(mass: f64) -> Self {
        let mut s = Self::base(4, MetricKind::Schwarzschild { mass });
        s.chart[1] = [2.2 * mass, 40.0 * mass];
        s.chart[2] = [0.1, std::f64::consts::PI - 0.1];
        s.chart[3] = [-UNBOUNDED, UNBOUNDED];
        s.periods[3] = Some(2.0 * std::f64::consts::PI);
        s
    }

    pub fn desitter_slicing(k: f64, dim: usize) -> Self {
        let mut s = Self::base(dim, MetricKind::DeSitterSlicing { k });
        s.chart[0] = [-3.0, 3.0];
        for ax in 1..dim {
            s.chart[ax] = [-20.0, 20.0];
        }
        s
    }

    pub fn flrw(a_src: &str, dim: usize) -> Result<Self> {
        let a = parse_expr_at(a_src, dim, 1, 1)?;
        for ax in 1..dim {
            if !a.is_independent_of(ax) {
                return Err(Error::InvalidSpec(format!(
                    "flrw scale factor must depend on t only, found x{ax}"
                )));
            }
        }
        let mut s = Self::base(dim, MetricKind::Flrw { a, a_src: a_src.to_string() });
        s.chart[0] = [-3.0, 3.0];
        Ok(s)
    }

    pub fn flat_spatial_torus(period: f64, dim: usize) -> Self {
        let mut s = Self::base(dim, MetricKind::FlatSpatialTorus { period });
        for ax in 1..dim {
            s.periods[ax] = Some(period);
        }
        s
    }

    /// Replaces the chart box of one axis.
    pub fn with_axis_bounds(mut self, axis: usize, lo: f64, hi: f64) -> Self {
        self.chart[axis] = [lo, hi];
        self
    }

    /// Multiplies the metric by the constant `scale2` (= λ²).
    pub fn with_scale(mut self, scale2: f64) -> Self {
        self.scale2 = scale2;
        self
    }

    /// True when the point lies inside the chart box; periodic axes are
    /// always inside (their coordinate lives on the covering line).
    pub fn chart_contains(&self, x: &[f64]) -> bool {
        x.iter().enumerate().all(|(ax, &c)| {
            self.periods[ax].is_some() || (c >= self.chart[ax][0] && c <= self.chart[ax][1])
        })
    }

    /// Signed distance-to-exit along the most violated axis (positive inside).
    pub fn chart_margin(&self, x: &[f64]) -> f64 {
        let mut m = f64::INFINITY;
        for (ax, &c) in x.iter().enumerate() {
            if self.periods[ax].is_some() {
                continue;
            }
            m = m.min(c - self.chart[ax][0]).min(self.chart[ax][1] - c);
        }
        m
    }

    /// Reduces a coordinate difference modulo the periodic lattice, mapping
    /// each periodic component into `[-L/2, L/2)`.
    pub fn reduce_delta(&self, dx: &mut [f64]) {
        for (ax, d) in dx.iter_mut().enumerate() {
            if let Some(l) = self.periods[ax] {
                *d -= l * (*d / l).round();
            }
        }
    }

    /// Difference `a - b` reduced modulo any periodic identifications.
    pub fn chart_delta(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        self.reduce_delta(&mut d);
        d
    }

    /// True for metrics given (or builtin-defined) in foliated form.
    pub fn is_foliated(&self) -> bool {
        !matches!(self.kind, MetricKind::General { .. })
    }

    /// Human-readable one-line description.
    pub fn describe(&self) -> String {
        let mut s = format!("{} (dim {}", self.kind.name(), self.dim);
        match &self.kind {
            MetricKind::Schwarzschild { mass } => {
                let _ = write!(s, ", mass {mass}");
            }
            MetricKind::DeSitterSlicing { k } => {
                let _ = write!(s, ", k {k}");
            }
            MetricKind::Flrw { a_src, .. } => {
                let _ = write!(s, ", a(t) = {a_src}");
            }
            MetricKind::FlatSpatialTorus { period } => {
                let _ = write!(s, ", period {period}");
            }
            _ => {}
        }
        if self.scale2 != 1.0 {
            let _ = write!(s, ", scale {}", self.scale2);
        }
        s.push(')');
        s
    }

    /// Writes the builtin models in foliated-expression form, so that a
    /// round trip through the document parser reproduces the same metric
    /// values (periodic identifications are chart-level structure and are
    /// not expressible as component expressions; the torus round-trips to
    /// plain flat components on the covering chart).
    pub fn as_expression_document(&self) -> Option<String> {
        let mut doc = String::from("[model]\nkind = foliated\n");
        let _ = writeln!(doc, "dim = {}", self.dim);
        if self.scale2 != 1.0 {
            let _ = writeln!(doc, "scale = {:.17e}", self.scale2);
        }
        doc.push_str("\n[lapse]\n");
        match &self.kind {
            MetricKind::Minkowski | MetricKind::FlatSpatialTorus { .. } => {
                doc.push_str("n = 1\n\n[spatial]\n");
                for i in 1..self.dim {
                    let _ = writeln!(doc, "g{i}{i} = 1");
                }
            }
            MetricKind::Schwarzschild { mass } => {
                let rs = format!("{:.17e}", 2.0 * mass);
                let _ = writeln!(doc, "n = sqrt(1 - {rs}/x1)");
                doc.push_str("\n[spatial]\n");
                let _ = writeln!(doc, "g11 = 1/(1 - {rs}/x1)");
                let _ = writeln!(doc, "g22 = x1^2");
                let _ = writeln!(doc, "g33 = x1^2 * sin(x2)^2");
            }
            MetricKind::DeSitterSlicing { k } => {
                doc.push_str("n = 1\n\n[spatial]\n");
                let two_h = format!("{:.17e}", 2.0 * k.sqrt());
                for i in 1..self.dim {
                    let _ = writeln!(doc, "g{i}{i} = exp({two_h}*t)");
                }
            }
            MetricKind::Flrw { a_src, .. } => {
                doc.push_str("n = 1\n\n[spatial]\n");
                for i in 1..self.dim {
                    let _ = writeln!(doc, "g{i}{i} = ({a_src})^2");
                }
            }
            MetricKind::Foliated { .. } | MetricKind::General { .. } => return None,
        }
        doc.push_str("\n[domain]\n");
        let axis_names: Vec<String> =
            (0..self.dim).map(|ax| if ax == 0 { "t".into() } else { format!("x{ax}") }).collect();
        for ax in 0..self.dim {
            if self.chart[ax][0] != -UNBOUNDED || self.chart[ax][1] != UNBOUNDED {
                let _ = writeln!(
                    doc,
                    "{} = {:.17e} {:.17e}",
                    axis_names[ax], self.chart[ax][0], self.chart[ax][1]
                );
            }
        }
        Some(doc)
    }

    /// Deterministic probe points spread over the chart box (unbounded axes
    /// are probed in a window around the origin). Used for validation and
    /// by domain-supremum measurements.
    pub fn probe_points(&self, count: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(count);
        // Kronecker sequence with per-axis irrational strides.
        let alphas = kronecker_alphas(self.dim);
        for k in 0..count {
            let mut p = Vec::with_capacity(self.dim);
            for ax in 0..self.dim {
                let [mut lo, mut hi] = self.chart[ax];
                if lo <= -UNBOUNDED {
                    lo = -3.0;
                }
                if hi >= UNBOUNDED {
                    hi = 3.0;
                }
                if lo > hi {
                    std::mem::swap(&mut lo, &mut hi);
                }
                let u = ((k as f64 + 0.5) * alphas[ax]).fract();
                // Stay slightly inside the box so boundary-degenerate
                // entries (horizon-like) are not evaluated exactly at edge.
                p.push(lo + (0.02 + 0.96 * u) * (hi - lo));
            }
            out.push(p);
        }
        out
    }

    /// Dense one-dimensional sweeps along each chart axis through a few base
    /// points, reaching much closer to the box edges than [`probe_points`]
    /// does (inset 0.2% instead of 2%). Supremum measurements combine both
    /// sets: the Kronecker lattice covers the bulk, the sweeps catch thin
    /// boundary layers (e.g. near-horizon shells) where the lattice is
    /// sparse.
    ///
    /// [`probe_points`]: MetricSpec::probe_points
    pub fn axis_sweep_points(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let bases = self.probe_points(3);
        let mut out = Vec::with_capacity(bases.len() * self.dim * per_axis);
        for base in &bases {
            for ax in 0..self.dim {
                let [mut lo, mut hi] = self.chart[ax];
                if lo <= -UNBOUNDED {
                    lo = -3.0;
                }
                if hi >= UNBOUNDED {
                    hi = 3.0;
                }
                if lo > hi {
                    std::mem::swap(&mut lo, &mut hi);
                }
                for j in 0..per_axis {
                    let u = (j as f64 + 0.5) / per_axis as f64;
                    // Chebyshev-style clustering toward both box edges.
                    let v = 0.5 * (1.0 - (std::f64::consts::PI * u).cos());
                    let mut p = base.clone();
                    p[ax] = lo + (0.002 + 0.996 * v) * (hi - lo);
                    out.push(p);
                }
            }
        }
        out
    }
}

/// Per-axis irrational strides for low-discrepancy sequences (powers of the
/// reciprocal plastic-like constant; any fixed irrationals work).
pub(crate) fn kronecker_alphas(dim: usize) -> Vec<f64> {
    // Generalized golden ratios: x^(d+1) = x + 1 root for d = dim.
    let mut x = 1.5f64;
    let d = dim as f64;
    for _ in 0..64 {
        x = (1.0 + x).powf(1.0 / (d + 1.0));
    }
    (1..=dim).map(|j| (1.0 / x.powi(j as i32)).fract()).collect()
}

// ---------------------------------------------------------------------------
// Document parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct RawValue {
    text: String,
    line: usize,
    col: usize, // 1-based column where the value text starts
}

#[derive(Debug, Default)]
struct RawDoc {
    // section -> key -> value
    sections: HashMap<String, HashMap<String, RawValue>>,
    // insertion order of (section, key) for deterministic diagnostics
    order: Vec<(String, String)>,
    section_lines: HashMap<String, usize>,
}

fn perr(line: usize, col: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, col, msg: msg.into() }
}

const SECTIONS: [&str; 5] = ["model", "lapse", "spatial", "metric", "domain"];

fn scan_document(src: &str) -> Result<RawDoc> {
    let mut doc = RawDoc::default();
    let mut current: Option<String> = None;
    for (lineno0, raw_line) in src.lines().enumerate() {
        let line = lineno0 + 1;
        let content = match raw_line.find('#') {
            Some(p) => &raw_line[..p],
            None => raw_line,
        };
        if content.trim().is_empty() {
            continue;
        }
        let first_col = content.len() - content.trim_start().len() + 1;
        let trimmed = content.trim();
        if let Some(rest) = trimmed.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                return Err(perr(line, first_col, "section header missing ']'"));
            };
            let name = name.trim().to_string();
            if !SECTIONS.contains(&name.as_str()) {
                return Err(perr(
                    line,
                    first_col,
                    format!("unknown section '[{name}]' (expected one of [model], [lapse], [spatial], [metric], [domain])"),
                ));
            }
            if doc.sections.contains_key(&name) {
                return Err(perr(line, first_col, format!("duplicate section '[{name}]'")));
            }
            doc.sections.insert(name.clone(), HashMap::new());
            doc.section_lines.insert(name.clone(), line);
            current = Some(name);
            continue;
        }
        let Some(section) = &current else {
            return Err(perr(line, first_col, "content before any section header"));
        };
        let Some(eq) = content.find('=') else {
            return Err(perr(line, first_col, "expected 'key = value'"));
        };
        let key_text = &content[..eq];
        let key = key_text.trim().to_string();
        if key.is_empty() {
            return Err(perr(line, first_col, "empty key before '='"));
        }
        if !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(perr(line, first_col, format!("malformed key '{key}'")));
        }
        let value_raw = &content[eq + 1..];
        let lead_ws = value_raw.len() - value_raw.trim_start().len();
        let value_col = eq + 1 + lead_ws + 1; // 1-based col of value start
        let value = value_raw.trim().to_string();
        if value.is_empty() {
            return Err(perr(line, value_col, format!("missing value for key '{key}'")));
        }
        let sect = doc.sections.get_mut(section).unwrap();
        if sect.contains_key(&key) {
            return Err(perr(line, first_col, format!("duplicate key '{key}' in [{section}]")));
        }
        sect.insert(key.clone(), RawValue { text: value, line, col: value_col });
        doc.order.push((section.clone(), key.clone()));
    }
    Ok(doc)
}

fn parse_f64(v: &RawValue, what: &str) -> Result<f64> {
    v.text.parse::<f64>().map_err(|_| {
        perr(v.line, v.col, format!("{what} must be a number, found '{}'", v.text))
    })
}

fn parse_two_f64(v: &RawValue, what: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = v.text.split_whitespace().collect();
    if parts.len() != 2 {
        return Err(perr(
            v.line,
            v.col,
            format!("{what} must be two numbers 'lo hi', found '{}'", v.text),
        ));
    }
    let lo = parts[0]
        .parse::<f64>()
        .map_err(|_| perr(v.line, v.col, format!("malformed number '{}'", parts[0])))?;
    let hi = parts[1]
        .parse::<f64>()
        .map_err(|_| perr(v.line, v.col, format!("malformed number '{}'", parts[1])))?;
    if !(lo < hi) {
        return Err(perr(v.line, v.col, format!("{what}: need lo < hi, found {lo} >= {hi}")));
    }
    Ok((lo, hi))
}

struct SectionView<'a> {
    name: &'a str,
    map: &'a HashMap<String, RawValue>,
    line: usize,
}

impl<'a> SectionView<'a> {
    fn get(&self, key: &str) -> Option<&'a RawValue> {
        self.map.get(key)
    }

    fn require(&self, key: &str) -> Result<&'a RawValue> {
        self.map.get(key).ok_or_else(|| {
            perr(self.line, 1, format!("section [{}] is missing required key '{key}'", self.name))
        })
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for (k, v) in self.map {
            if !allowed.contains(&k.as_str()) {
                return Err(perr(
                    v.line,
                    v.col,
                    format!("unknown key '{k}' in [{}] (allowed: {})", self.name, allowed.join(", ")),
                ));
            }
        }
        Ok(())
    }
}

fn get_section<'a>(doc: &'a RawDoc, name: &str) -> Option<SectionView<'a>> {
    let name = SECTIONS.iter().find(|s| **s == name).copied()?;
    doc.sections.get(name).map(|map| SectionView {
        name,
        map,
        line: *doc.section_lines.get(name).unwrap_or(&1),
    })
}

/// Parses a spec key of the form `g<i><j>` with single-digit indices.
fn metric_indices(key: &str, lo: usize, hi: usize, v: &RawValue) -> Result<(usize, usize)> {
    let digits: Vec<char> = key.chars().skip(1).collect();
    if key.starts_with('g') && digits.len() == 2 && digits.iter().all(|c| c.is_ascii_digit()) {
        let i = digits[0].to_digit(10).unwrap() as usize;
        let j = digits[1].to_digit(10).unwrap() as usize;
        if i < lo || j < lo || i > hi || j > hi {
            return Err(perr(
                v.line,
                v.col,
                format!("component '{key}' out of range (indices must lie in {lo}..={hi})"),
            ));
        }
        if i > j {
            return Err(perr(
                v.line,
                v.col,
                format!("component '{key}': the matrix is symmetric, specify g{j}{i} instead"),
            ));
        }
        return Ok((i, j));
    }
    Err(perr(v.line, v.col, format!("unknown key '{key}' (expected g<i><j>)")))
}

/// Largest index mentioned in `g<i><j>` keys. For foliated specs (1-based
/// spatial indices) this is the spatial dimension `n` and the full
/// dimension is `n + 1`; for general specs (0-based) the dimension is the
/// largest index plus one. Both callers therefore add 1.
fn infer_dim_from_components(map: &HashMap<String, RawValue>) -> Option<usize> {
    let mut max_idx = 0usize;
    let mut any = false;
    for key in map.keys() {
        let digits: Vec<char> = key.chars().skip(1).collect();
        if key.starts_with('g') && digits.len() == 2 && digits.iter().all(|c| c.is_ascii_digit()) {
            any = true;
            max_idx = max_idx
                .max(digits[0].to_digit(10).unwrap() as usize)
                .max(digits[1].to_digit(10).unwrap() as usize);
        }
    }
    if !any {
        return None;
    }
    Some(max_idx)
}

/// Parses and validates a metric specification document.
pub fn parse_metric_spec(src: &str) -> Result<MetricSpec> {
    let doc = scan_document(src)?;
    for name in doc.sections.keys() {
        debug_assert!(SECTIONS.contains(&name.as_str()));
    }

    let model = get_section(&doc, "model");
    let kind_name: String = match &model {
        Some(m) => match m.get("kind") {
            Some(v) => v.text.clone(),
            None => default_kind_name(&doc)?,
        },
        None => default_kind_name(&doc)?,
    };

    // Dimension: explicit key wins, else inferred from components, else 4.
    let explicit_dim = match &model {
        Some(m) => match m.get("dim") {
            Some(v) => {
                let d = parse_f64(v, "dim")?;
                if d.fract() != 0.0 || !(2.0..=6.0).contains(&d) {
                    return Err(perr(v.line, v.col, "dim must be an integer in 2..=6"));
                }
                Some(d as usize)
            }
            None => None,
        },
        None => None,
    };

    // Explicit dim wins; per-key range checks and missing-diagonal checks
    // below report better positions than a blanket conflict error would.
    let inferred_dim = match kind_name.as_str() {
        "foliated" => doc
            .sections
            .get("spatial")
            .and_then(infer_dim_from_components)
            .map(|n| n + 1),
        "general" => doc
            .sections
            .get("metric")
            .and_then(infer_dim_from_components)
            .map(|n| n + 1),
        _ => None,
    };
    let dim = explicit_dim.or(inferred_dim).unwrap_or(4);
    if !(2..=6).contains(&dim) {
        return Err(Error::InvalidSpec(format!("dimension {dim} outside supported range 2..=6")));
    }

    let mut spec = build_kind(&doc, &kind_name, dim)?;

    // Model-level scale.
    if let Some(m) = &model {
        let allowed: &[&str] = match kind_name.as_str() {
            "schwarzschild" => &["kind", "dim", "scale", "mass"],
            "desitter_slicing" => &["kind", "dim", "scale", "k"],
            "flrw" => &["kind", "dim", "scale", "a"],
            "flat_spatial_torus" => &["kind", "dim", "scale", "period"],
            _ => &["kind", "dim", "scale"],
        };
        m.check_keys(allowed)?;
        if let Some(v) = m.get("scale") {
            let s = parse_f64(v, "scale")?;
            if !(s.is_finite() && s > 0.0) {
                return Err(perr(v.line, v.col, "scale must be a positive number"));
            }
            spec.scale2 = s;
        }
    }

    // Domain box.
    if let Some(d) = get_section(&doc, "domain") {
        let names: Vec<String> =
            (0..dim).map(|ax| if ax == 0 { "t".into() } else { format!("x{ax}") }).collect();
        let allowed: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        d.check_keys(&allowed)?;
        for (ax, name) in names.iter().enumerate() {
            if let Some(v) = d.get(name) {
                // Either `lo hi` bounds or a periodic identification
                // `periodic L` (coordinate lives on the covering line,
                // differences are reduced modulo L).
                if let Some(rest) = v.text.trim().strip_prefix("periodic") {
                    let l: f64 = rest.trim().parse().map_err(|_| {
                        perr(v.line, v.col, format!("domain '{name}': expected 'periodic <L>'"))
                    })?;
                    if !(l.is_finite() && l > 0.0) {
                        return Err(perr(v.line, v.col, "period must be a positive number"));
                    }
                    spec.periods[ax] = Some(l);
                    spec.chart[ax] = [-0.5 * l, 0.5 * l];
                } else {
                    let (lo, hi) = parse_two_f64(v, &format!("domain bound '{name}'"))?;
                    spec.chart[ax] = [lo, hi];
                }
            }
        }
    }

    validate_semantics(&spec, &doc)?;
    Ok(spec)
}

fn default_kind_name(doc: &RawDoc) -> Result<String> {
    if doc.sections.contains_key("metric") {
        Ok("general".to_string())
    } else if doc.sections.contains_key("lapse") || doc.sections.contains_key("spatial") {
        Ok("foliated".to_string())
    } else {
        Err(perr(1, 1, "document does not specify a metric ([model] kind, [lapse]/[spatial], or [metric])"))
    }
}

fn build_kind(doc: &RawDoc, kind_name: &str, dim: usize) -> Result<MetricSpec> {
    let model = get_section(doc, "model");
    let forbid = |names: &[&str]| -> Result<()> {
        for n in names {
            if let Some(line) = doc.section_lines.get(*n) {
                return Err(perr(
                    *line,
                    1,
                    format!("section [{n}] is only valid for foliated/general metrics, not kind '{kind_name}'"),
                ));
            }
        }
        Ok(())
    };
    match kind_name {
        "minkowski" => {
            forbid(&["lapse", "spatial", "metric"])?;
            Ok(MetricSpec::minkowski(dim))
        }
        "schwarzschild" => {
            forbid(&["lapse", "spatial", "metric"])?;
            if dim != 4 {
                return Err(Error::InvalidSpec("schwarzschild requires dim = 4".into()));
            }
            let mass = match model.as_ref().and_then(|m| m.get("mass")) {
                Some(v) => {
                    let mass = parse_f64(v, "mass")?;
                    if !(mass.is_finite() && mass > 0.0) {
                        return Err(perr(v.line, v.col, "mass must be positive"));
                    }
                    mass
                }
                None => 1.0,
            };
            let mut s = MetricSpec::schwarzschild(mass);
            s.dim = dim;
            Ok(s)
        }
        "desitter_slicing" => {
            forbid(&["lapse", "spatial", "metric"])?;
            let k = match model.as_ref().and_then(|m| m.get("k")) {
                Some(v) => {
                    let k = parse_f64(v, "k")?;
                    if !(k.is_finite() && k > 0.0) {
                        return Err(perr(v.line, v.col, "curvature k must be positive"));
                    }
                    k
                }
                None => 1.0,
            };
            Ok(MetricSpec::desitter_slicing(k, dim))
        }
        "flrw" => {
            forbid(&["lapse", "spatial", "metric"])?;
            let v = model
                .as_ref()
                .ok_or_else(|| perr(1, 1, "flrw requires [model] a = <expression in t>"))?
                .require("a")?;
            let a = parse_expr_at(&v.text, dim, v.line, v.col)?;
            for ax in 1..dim {
                if !a.is_independent_of(ax) {
                    return Err(perr(
                        v.line,
                        v.col,
                        format!("flrw scale factor must depend on t only, found x{ax}"),
                    ));
                }
            }
            let mut s = MetricSpec::base(dim, MetricKind::Flrw { a, a_src: v.text.clone() });
            s.chart[0] = [-3.0, 3.0];
            Ok(s)
        }
        "flat_spatial_torus" => {
            forbid(&["lapse", "spatial", "metric"])?;
            let period = match model.as_ref().and_then(|m| m.get("period")) {
                Some(v) => {
                    let p = parse_f64(v, "period")?;
                    if !(p.is_finite() && p > 0.0) {
                        return Err(perr(v.line, v.col, "period must be positive"));
                    }
                    p
                }
                None => 1.0,
            };
            Ok(MetricSpec::flat_spatial_torus(period, dim))
        }
        "foliated" => {
            forbid(&["metric"])?;
            let lapse_sec = get_section(doc, "lapse")
                .ok_or_else(|| perr(1, 1, "foliated metric requires a [lapse] section"))?;
            lapse_sec.check_keys(&["n"])?;
            let lv = lapse_sec.require("n")?;
            let lapse = parse_expr_at(&lv.text, dim, lv.line, lv.col)?;
            let spatial_sec = get_section(doc, "spatial")
                .ok_or_else(|| perr(1, 1, "foliated metric requires a [spatial] section"))?;
            let n = dim - 1;
            let mut spatial = SymExprs::new(n);
            for (key, v) in spatial_sec.map {
                let (i, j) = metric_indices(key, 1, n, v)?;
                let e = parse_expr_at(&v.text, dim, v.line, v.col)?;
                spatial.set(i - 1, j - 1, e, v.text.clone());
            }
            for i in 1..=n {
                if spatial.get(i - 1, i - 1).is_none() {
                    return Err(perr(
                        spatial_sec.line,
                        1,
                        format!("[spatial] is missing diagonal component g{i}{i}"),
                    ));
                }
            }
            Ok(MetricSpec::base(
                dim,
                MetricKind::Foliated { lapse, lapse_src: lv.text.clone(), spatial },
            ))
        }
        "general" => {
            forbid(&["lapse", "spatial"])?;
            let metric_sec = get_section(doc, "metric")
                .ok_or_else(|| perr(1, 1, "general metric requires a [metric] section"))?;
            let mut comps = SymExprs::new(dim);
            for (key, v) in metric_sec.map {
                let (i, j) = metric_indices(key, 0, dim - 1, v)?;
                let e = parse_expr_at(&v.text, dim, v.line, v.col)?;
                comps.set(i, j, e, v.text.clone());
            }
            for i in 0..dim {
                if comps.get(i, i).is_none() {
                    return Err(perr(
                        metric_sec.line,
                        1,
                        format!("[metric] is missing diagonal component g{i}{i}"),
                    ));
                }
            }
            Ok(MetricSpec::base(dim, MetricKind::General { comps }))
        }
        other => {
            let pos = model
                .as_ref()
                .and_then(|m| m.get("kind"))
                .map(|v| (v.line, v.col))
                .unwrap_or((1, 1));
            Err(perr(
                pos.0,
                pos.1,
                format!(
                    "unknown model kind '{other}' (expected minkowski, schwarzschild, desitter_slicing, flrw, flat_spatial_torus, foliated, general)"
                ),
            ))
        }
    }
}

/// Positivity and signature checks at deterministic probe points.
fn validate_semantics(spec: &MetricSpec, doc: &RawDoc) -> Result<()> {
    let probes = spec.probe_points(16);

    // Lapse positivity (foliated user metrics) at the lapse key's position.
    if let MetricKind::Foliated { lapse, .. } = &spec.kind {
        let pos = doc
            .sections
            .get("lapse")
            .and_then(|m| m.get("n"))
            .map(|v| (v.line, v.col))
            .unwrap_or((1, 1));
        for p in &probes {
            let n = lapse.eval(p);
            if !(n.is_finite() && n > 0.0) {
                return Err(perr(
                    pos.0,
                    pos.1,
                    format!("lapse must be positive on the domain; n = {n} at {:?}", p),
                ));
            }
        }
    }
    if let MetricKind::Flrw { a, .. } = &spec.kind {
        let pos = doc
            .sections
            .get("model")
            .and_then(|m| m.get("a"))
            .map(|v| (v.line, v.col))
            .unwrap_or((1, 1));
        for p in &probes {
            let v = a.eval(p);
            if !(v.is_finite() && v > 0.0) {
                return Err(perr(
                    pos.0,
                    pos.1,
                    format!("scale factor must be positive on the domain; a = {v} at t = {}", p[0]),
                ));
            }
        }
    }

    // Lorentzian signature at every probe.
    for p in &probes {
        crate::spacetime::check_signature(spec, p)?;
    }
    Ok(())
}
