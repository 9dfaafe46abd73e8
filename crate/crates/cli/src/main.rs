//! Command-line driver for the lorentzkit toolkit.
//!
//! Six subcommands wrap the library: `describe` (metric, connection and
//! curvature tables), `geodesic` (flow with conservation diagnostics),
//! `radius` (injectivity-radius estimate against the guaranteed lower
//! bounds), `nullcone` (cone localization, graph, null radius), `volume`
//! (cone-volume comparison curve), and `verify` (the invariant suite).
//!
//! Exit codes: 0 on success, 1 on analysis failures (a check or bound
//! failed, or a numerical routine gave up), 2 on configuration errors
//! (unparseable metric document, bad flags). `LORENTZKIT_THREADS` bounds
//! the worker-thread count.

mod bundle;
mod commands;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lorentzkit::config::{parse_metric_spec, MetricSpec};
use lorentzkit::frames::{complete_frame, Observer, OrthoFrame};
use lorentzkit::ode::OdeOptions;

use bundle::{Bundle, OutFormat};

/// CLI failure split by exit code: configuration errors exit 2, analysis
/// failures exit 1.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Analysis(String),
}

impl From<lorentzkit::Error> for CliError {
    fn from(e: lorentzkit::Error) -> Self {
        match e {
            lorentzkit::Error::Parse { .. } | lorentzkit::Error::InvalidSpec(_) => {
                CliError::Config(e.to_string())
            }
            lorentzkit::Error::Unsupported(_) => CliError::Config(e.to_string()),
            lorentzkit::Error::Numerical { .. } => CliError::Analysis(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "lorentzkit",
    version,
    about = "Numerical Lorentzian geometry: geodesics, curvature, injectivity radii, null cones",
    after_help = "Environment: LORENTZKIT_THREADS bounds the worker-thread count."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate metric, connection, and curvature over probe points.
    Describe(DescribeArgs),
    /// Integrate one geodesic and report conservation diagnostics.
    Geodesic(GeodesicArgs),
    /// Estimate the injectivity radius and evaluate the guaranteed bounds.
    Radius(RadiusArgs),
    /// Localize the null cone, trace its graph, estimate the null radius.
    Nullcone(NullconeArgs),
    /// Cone-volume comparison curve against the constant-curvature model.
    Volume(VolumeArgs),
    /// Run the cross-check invariant suite over the builtin models.
    Verify(VerifyArgs),
}

/// Flags shared by the geometry commands.
#[derive(Args)]
struct CommonArgs {
    /// Metric document path (see README for the grammar).
    #[arg(long, value_name = "PATH", conflicts_with = "builtin")]
    spec: Option<PathBuf>,
    /// Builtin model: minkowski | schwarzschild | desitter | flrw | torus.
    #[arg(long, value_name = "NAME")]
    builtin: Option<String>,
    /// Observer point as comma-separated chart coordinates
    /// (default: center of the chart box).
    #[arg(long, value_name = "X0,X1,...", allow_hyphen_values = true)]
    point: Option<String>,
    /// Observer vector: "normal" for the foliation normal, or
    /// comma-separated chart components of a timelike vector.
    #[arg(long = "T", value_name = "COMPS|normal", default_value = "normal")]
    t_vec: String,
    /// Relative tolerance of the adaptive integrator.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Output directory for the report bundle.
    #[arg(long, value_name = "DIR", default_value = "reports")]
    out: PathBuf,
    /// Seed recorded in report headers; drives the Monte-Carlo volume
    /// cross-check when one is requested (all other sampling is
    /// deterministic).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Data-table format.
    #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
}

#[derive(Args)]
struct DescribeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of probe points for the survey table.
    #[arg(long, default_value_t = 16)]
    probes: usize,
}

#[derive(Args)]
struct GeodesicArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Initial direction as comma-separated frame components ξ^a
    /// (ξ^0 along the observer).
    #[arg(long, value_name = "XI0,XI1,...", allow_hyphen_values = true)]
    xi: String,
    /// Affine-parameter end.
    #[arg(long, default_value_t = 1.0)]
    smax: f64,
    /// Number of report rows along the geodesic.
    #[arg(long, default_value_t = 33)]
    samples: usize,
    /// Gate on the norm-drift and frame-orthonormality residuals; exceeding
    /// it is an analysis failure.
    #[arg(long, default_value_t = 1e-8)]
    check_tol: f64,
}

#[derive(Args)]
struct RadiusArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Reference scan radius.
    #[arg(long, default_value_t = 2.0)]
    rmax: f64,
    /// Number of scan directions.
    #[arg(long, default_value_t = 48)]
    grid: usize,
    /// Scale entering the volume-based lower bound.
    #[arg(long, default_value_t = 1.0)]
    r0: f64,
    /// Margin of the foliated lower-bound chain.
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
}

#[derive(Args)]
struct NullconeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Coordinate depth of the cone localization.
    #[arg(long, default_value_t = 1.0)]
    rmax: f64,
    /// Number of fan directions.
    #[arg(long, default_value_t = 32)]
    grid: usize,
    /// Chart scale entering the guaranteed null-radius bound
    /// (default: rmax/2).
    #[arg(long)]
    r0: Option<f64>,
}

#[derive(Args)]
struct VolumeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Reference radius of the cone truncation.
    #[arg(long, default_value_t = 1.0)]
    rmax: f64,
    /// Number of quadrature directions.
    #[arg(long, default_value_t = 48)]
    grid: usize,
    /// Curvature constant K2 of the comparison model (0 = flat model).
    #[arg(long, default_value_t = 1.0)]
    k2: f64,
    /// Half-angle of the solid cone cap (reference angle from the axis,
    /// at most pi/4).
    #[arg(long, default_value_t = 0.6)]
    half_angle: f64,
    /// Number of radii on the comparison curve.
    #[arg(long, default_value_t = 20)]
    radii: usize,
    /// Monte-Carlo sample count for the seeded reference-ball volume
    /// cross-check (0 = skip).
    #[arg(long, default_value_t = 0)]
    mc: usize,
}

#[derive(Args)]
struct VerifyArgs {
    /// Output directory for the report bundle.
    #[arg(long, value_name = "DIR", default_value = "reports")]
    out: PathBuf,
    /// Data-table format.
    #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
    /// Seed recorded in report headers.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Relative tolerance of the adaptive integrator.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Deliberately corrupt one oracle to demonstrate the suite catches it
    /// (supported: curvature-sign).
    #[arg(long, hide = true, value_name = "FAULT")]
    inject_fault: Option<String>,
}

/// A resolved geometry context: parsed metric, observer frame, integrator
/// options, and a label for report headers.
pub struct Context {
    pub spec: MetricSpec,
    pub observer: Observer,
    pub frame: OrthoFrame,
    pub opts: OdeOptions,
    pub label: String,
    pub point_label: String,
    pub t_label: String,
}

fn parse_f64_list(text: &str, what: &str, dim: usize) -> Result<Vec<f64>, CliError> {
    let vals: Result<Vec<f64>, _> =
        text.split(',').map(|c| c.trim().parse::<f64>()).collect();
    let vals =
        vals.map_err(|e| CliError::Config(format!("cannot parse {what} `{text}`: {e}")))?;
    if vals.len() != dim {
        return Err(CliError::Config(format!(
            "{what} has {} components, metric dimension is {dim}",
            vals.len()
        )));
    }
    Ok(vals)
}

/// Center of the chart box, with unbounded axes clamped to ±3.
fn chart_center(spec: &MetricSpec) -> Vec<f64> {
    spec.chart
        .iter()
        .map(|&[lo, hi]| {
            let lo = if lo <= -1e5 { -3.0 } else { lo };
            let hi = if hi >= 1e5 { 3.0 } else { hi };
            0.5 * (lo + hi)
        })
        .collect()
}

fn builtin_spec(name: &str) -> Result<MetricSpec, CliError> {
    match name {
        "minkowski" => Ok(MetricSpec::minkowski(4)),
        "schwarzschild" => Ok(MetricSpec::schwarzschild(1.0)),
        "desitter" => Ok(MetricSpec::desitter_slicing(1.0, 4)),
        "flrw" => Ok(MetricSpec::flrw("1 + 0.3*t^2", 4)?),
        "torus" => Ok(MetricSpec::flat_spatial_torus(2.0, 4)),
        other => Err(CliError::Config(format!(
            "unknown builtin `{other}` (expected minkowski, schwarzschild, desitter, flrw, or torus)"
        ))),
    }
}

fn resolve(common: &CommonArgs) -> Result<Context, CliError> {
    let (spec, label) = match (&common.spec, &common.builtin) {
        (Some(path), _) => {
            let src = std::fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read {}: {e}", path.display()))
            })?;
            let spec = parse_metric_spec(&src).map_err(|e| match e {
                lorentzkit::Error::Parse { line, col, msg } => CliError::Config(format!(
                    "{}:{line}:{col}: {msg}",
                    path.display()
                )),
                other => CliError::from(other),
            })?;
            let label = format!("{} ({})", path.display(), spec.kind.name());
            (spec, label)
        }
        (None, Some(name)) => {
            let spec = builtin_spec(name)?;
            (spec, format!("builtin {name}"))
        }
        (None, None) => {
            return Err(CliError::Config(
                "choose a metric with --spec PATH or --builtin NAME".into(),
            ))
        }
    };
    if !(common.tol > 0.0 && common.tol.is_finite()) {
        return Err(CliError::Config(format!("--tol must be positive, got {}", common.tol)));
    }

    let point = match &common.point {
        Some(text) => parse_f64_list(text, "--point", spec.dim)?,
        None => chart_center(&spec),
    };
    if !spec.chart_contains(&point) {
        return Err(CliError::Config(format!(
            "--point {point:?} lies outside the chart box"
        )));
    }

    let observer = if common.t_vec == "normal" {
        Observer::foliation_normal(&spec, &point).map_err(|e| CliError::Config(format!(
            "--T normal: {e}"
        )))?
    } else {
        let t = parse_f64_list(&common.t_vec, "--T", spec.dim)?;
        Observer::new(&spec, &point, &t)?
    };
    let frame = complete_frame(&spec, &observer)?;
    let opts = OdeOptions::with_tol(common.tol);

    let point_label = format!("{:?}", observer.point);
    let t_label = if common.t_vec == "normal" {
        "foliation-normal".to_string()
    } else {
        format!("{:?}", observer.t)
    };
    Ok(Context { spec, observer, frame, opts, label, point_label, t_label })
}

/// Seeds a bundle with the shared metadata lines.
fn bundle_for(command: &'static str, common: &CommonArgs, ctx: &Context) -> Bundle {
    let mut b = Bundle::new(command, &common.out, common.format, common.seed);
    b.meta("spec", ctx.label.clone());
    b.meta("dim", ctx.spec.dim.to_string());
    b.meta("point", ctx.point_label.clone());
    b.meta("T", ctx.t_label.clone());
    b.meta("tol", format!("{:e}", common.tol));
    b
}

fn init_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("LORENTZKIT_THREADS") {
        let n: usize = v.parse().map_err(|_| {
            CliError::Config(format!("LORENTZKIT_THREADS must be a positive integer, got `{v}`"))
        })?;
        if n == 0 {
            return Err(CliError::Config("LORENTZKIT_THREADS must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| {
            CliError::Config(format!("cannot configure thread pool: {e}"))
        })?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Describe(a) => {
            let ctx = resolve(&a.common)?;
            let bundle = bundle_for("describe", &a.common, &ctx);
            commands::describe(&ctx, a.probes, bundle)
        }
        Command::Geodesic(a) => {
            let ctx = resolve(&a.common)?;
            let bundle = bundle_for("geodesic", &a.common, &ctx);
            let xi = parse_f64_list(&a.xi, "--xi", ctx.spec.dim)?;
            if a.samples < 2 {
                return Err(CliError::Config("--samples must be at least 2".into()));
            }
            commands::geodesic(&ctx, &xi, a.smax, a.samples, a.check_tol, bundle)
        }
        Command::Radius(a) => {
            let ctx = resolve(&a.common)?;
            let bundle = bundle_for("radius", &a.common, &ctx);
            commands::radius(&ctx, a.rmax, a.grid, a.r0, a.eps, bundle)
        }
        Command::Nullcone(a) => {
            let ctx = resolve(&a.common)?;
            let bundle = bundle_for("nullcone", &a.common, &ctx);
            let r0 = a.r0.unwrap_or(0.5 * a.rmax);
            commands::nullcone(&ctx, a.rmax, a.grid, r0, bundle)
        }
        Command::Volume(a) => {
            let ctx = resolve(&a.common)?;
            let bundle = bundle_for("volume", &a.common, &ctx);
            let cfg = commands::VolumeConfig {
                rmax: a.rmax,
                grid: a.grid,
                k2: a.k2,
                half_angle: a.half_angle,
                radii: a.radii,
                mc: a.mc,
                seed: a.common.seed,
            };
            commands::volume(&ctx, &cfg, bundle)
        }
        Command::Verify(a) => {
            if !(a.tol > 0.0 && a.tol.is_finite()) {
                return Err(CliError::Config(format!("--tol must be positive, got {}", a.tol)));
            }
            let fault = match a.inject_fault.as_deref() {
                None => verify::Fault::None,
                Some("curvature-sign") => verify::Fault::CurvatureSign,
                Some(other) => {
                    return Err(CliError::Config(format!(
                        "unknown fault `{other}` (supported: curvature-sign)"
                    )))
                }
            };
            let bundle = Bundle::new("verify", &a.out, a.format, a.seed);
            verify::run_suite(a.tol, fault, bundle)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Analysis(msg)) => {
            eprintln!("analysis failure: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
    }
}
