//! Command-line front end.
//!
//! Every subcommand reads the same [`RunConfig`]: a JSON file given with
//! `--config`, overridden field by field by flags. Outputs carry a metadata
//! header with the tool version, a SHA-256 of the effective configuration
//! and the tolerances in force.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::convexity::{build_phi, default_s_max, DEFAULT_GRID};
use crate::curvature::profile_circle_curvature;
use crate::error::{Error, Result};
use crate::gap::{scan_gap, GapSummary};
use crate::metric::{ConformalFactor, MetricKind, MetricSpec};
use crate::profile::{self, ArcState, Mode, ProfileCurve, Truncation};
use crate::shooting::{self, CombinedSummary, ShootingResult, TORUS_BRACKET};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_TRUNCATED: i32 = 3;
pub const EXIT_GAP_VIOLATION: i32 = 4;
pub const EXIT_NO_ROOT: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "confgap",
    version,
    about = "CMC surfaces of revolution in conformally flat balls"
)]
pub struct Cli {
    /// JSON configuration file; flags override its fields.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// σ-positivity radius, σ and distance tables for a metric.
    MetricInfo(RunConfig),
    /// Integrate one profile curve.
    Integrate(RunConfig),
    /// Integrate a profile and scan it for the pinching condition.
    GapCheck(RunConfig),
    /// Tabulate the convexity potential Φ.
    PhiTable(RunConfig),
    /// Solve for the parameter where a profile meets a sphere orthogonally.
    FindFreeBoundary(RunConfig),
    /// Solve for the waist of the closed shrinker torus.
    FindTorus(RunConfig),
    /// Shrinker piece over [-ξ, ξ] with gap report and boundary curvature.
    Example(RunConfig),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::MetricInfo(_) => "metric-info",
            Command::Integrate(_) => "integrate",
            Command::GapCheck(_) => "gap-check",
            Command::PhiTable(_) => "phi-table",
            Command::FindFreeBoundary(_) => "find-free-boundary",
            Command::FindTorus(_) => "find-torus",
            Command::Example(_) => "example",
        }
    }

    fn config(&self) -> &RunConfig {
        match self {
            Command::MetricInfo(c)
            | Command::Integrate(c)
            | Command::GapCheck(c)
            | Command::PhiTable(c)
            | Command::FindFreeBoundary(c)
            | Command::FindTorus(c)
            | Command::Example(c) => c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Table,
}

/// Run configuration; also the schema of the `--config` file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Metric: euclidean, hyperbolic, spherical, gaussian, or a JSON spec such as
    /// '{"kind":"custom","poly":[0,-0.1]}'.
    #[arg(long, value_parser = parse_metric)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricSpec>,
    /// Waist radius x(0) (integrate, gap-check, find-free-boundary, example).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    /// Initial slope x'(0) in graph mode [default: 0].
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xp0: Option<f64>,
    /// Initial tangent angle in arclength mode [default: π/2, parallel to the axis].
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta0: Option<f64>,
    /// Conformal mean curvature H̄ [default: 0].
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hbar: Option<f64>,
    /// End parameter: t in graph mode (may be negative), arclength otherwise [default: 1].
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub span: Option<f64>,
    /// Profile parametrization [default: graph].
    #[arg(long, value_parser = parse_mode)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    /// Integrate t >= 0 only and mirror (gap-check, graph mode, x'(0) = 0).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symmetric: Option<bool>,
    /// Integration and root-finding tolerance [default: 1e-10].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Slack allowed in the pinching inequality [default: the integration tolerance].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap_tol: Option<f64>,
    /// Level the boundary curvature must reach to certify convexity (example) [default: tol].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    /// Euclidean radius at which to report the conformal distance (metric-info).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    /// Rows of the metric table, or nodes of the Φ table.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    /// Upper end of the Φ table [default: a((0.9 r_σ)^2)].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_max: Option<f64>,
    /// Dense samples per integration step in CSV output [default: 1].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples_per_step: Option<usize>,
    /// Search interval for the free boundary parameter [default: 0.5 2].
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search: Option<Vec<f64>>,
    /// Bracket for the torus waist [default: 0.3 0.6].
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bracket: Option<Vec<f64>>,
    /// Output format of the main report [default: json].
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    /// Write the main report here instead of stdout.
    #[arg(long, value_name = "PATH")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Also write the underlying samples (curve, gap samples, Φ rows) as CSV.
    #[arg(long, value_name = "PATH")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
}

fn parse_metric(s: &str) -> std::result::Result<MetricSpec, String> {
    let spec = match s {
        "euclidean" => MetricSpec::Euclidean,
        "hyperbolic" => MetricSpec::Hyperbolic,
        "spherical" => MetricSpec::Spherical,
        "gaussian" => MetricSpec::Gaussian,
        _ if s.trim_start().starts_with('{') => serde_json::from_str(s).map_err(|e| e.to_string())?,
        _ => return Err(format!("unknown metric `{s}`")),
    };
    ConformalFactor::try_from(spec.clone()).map_err(|e| e.to_string())?;
    Ok(spec)
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    match s {
        "graph" => Ok(Mode::Graph),
        "arclength" => Ok(Mode::Arclength),
        _ => Err(format!("unknown mode `{s}` (graph or arclength)")),
    }
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($f:ident),*) => {
        $(if $top.$f.is_some() { $base.$f = $top.$f.clone(); })*
    };
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::config("config", e.to_string()))
    }

    /// `self` with every field set in `flags` replaced.
    pub fn overlay(mut self, flags: &RunConfig) -> Self {
        overlay!(
            self,
            flags,
            metric,
            x0,
            xp0,
            theta0,
            hbar,
            span,
            mode,
            symmetric,
            tol,
            gap_tol,
            margin,
            r,
            grid,
            s_max,
            samples_per_step,
            search,
            bracket,
            format,
            output,
            data
        );
        self
    }

    /// SHA-256 of the canonical JSON of this configuration, ignoring where
    /// outputs are written.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        c.data = None;
        let json = serde_json::to_vec(&c).expect("configs serialize");
        hex::encode(Sha256::digest(json))
    }

    fn metric(&self) -> Result<ConformalFactor> {
        let spec = self
            .metric
            .clone()
            .ok_or_else(|| Error::config("metric", "a metric is required"))?;
        ConformalFactor::try_from(spec).map_err(|e| Error::config("metric", e.to_string()))
    }

    fn tol(&self) -> Result<f64> {
        let tol = self.tol.unwrap_or(profile::DEFAULT_TOL);
        if !(tol > 0.0 && tol <= 1e-2) {
            return Err(Error::config("tol", format!("must lie in (0, 1e-2], got {tol}")));
        }
        Ok(tol)
    }

    fn gap_tol(&self) -> Result<f64> {
        let tol = match self.gap_tol {
            Some(v) => v,
            None => self.tol()?,
        };
        if !(tol >= 0.0 && tol.is_finite()) {
            return Err(Error::config("gap_tol", format!("must be nonnegative, got {tol}")));
        }
        Ok(tol)
    }

    fn margin(&self) -> Result<f64> {
        let m = match self.margin {
            Some(v) => v,
            None => self.tol()?,
        };
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::config("margin", format!("must be positive, got {m}")));
        }
        Ok(m)
    }

    fn finite(&self, field: &str, v: Option<f64>, default: f64) -> Result<f64> {
        let v = v.unwrap_or(default);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::config(field, format!("must be finite, got {v}")))
        }
    }

    fn x0(&self, default: Option<f64>) -> Result<f64> {
        let x0 = self
            .x0
            .or(default)
            .ok_or_else(|| Error::config("x0", "a waist radius is required"))?;
        if !(x0 > 0.0 && x0.is_finite()) {
            return Err(Error::config("x0", format!("must be positive, got {x0}")));
        }
        Ok(x0)
    }

    fn pair(&self, field: &str, v: &Option<Vec<f64>>, default: (f64, f64)) -> Result<(f64, f64)> {
        match v.as_deref() {
            None => Ok(default),
            Some(&[lo, hi]) if lo.is_finite() && hi.is_finite() && lo < hi => Ok((lo, hi)),
            Some(other) => Err(Error::config(
                field,
                format!("expected two increasing numbers, got {other:?}"),
            )),
        }
    }

    fn format(&self, allowed: &[Format]) -> Result<Format> {
        let f = self.format.unwrap_or(Format::Json);
        if allowed.contains(&f) {
            Ok(f)
        } else {
            Err(Error::config(
                "format",
                format!("{f:?} output is not available for this command").to_lowercase(),
            ))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_sha256: String,
    pub config: RunConfig,
    pub tolerances: BTreeMap<&'static str, f64>,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    meta: &'a Meta,
    #[serde(flatten)]
    body: T,
}

#[derive(Serialize)]
struct ErrorBody {
    error: ErrorReport,
}

#[derive(Serialize)]
struct ErrorReport {
    kind: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<Vec<(f64, f64)>>,
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::Precondition(_) | Error::SingularAxis { .. } | Error::OutOfDomain { .. } => {
            EXIT_CONFIG
        }
        Error::ToleranceUnachievable { .. } => EXIT_TRUNCATED,
        Error::NoRoot { .. } => EXIT_NO_ROOT,
        _ => EXIT_FAILURE,
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::OutOfDomain { .. } => "out_of_domain",
        Error::SingularAxis { .. } => "singular_axis",
        Error::NonPositiveSigma { .. } => "non_positive_sigma",
        Error::ToleranceUnachievable { .. } => "tolerance_unachievable",
        Error::NoRoot { .. } => "no_root",
        Error::QuadratureFailed { .. } => "quadrature_failed",
        Error::OutOfTable { .. } => "out_of_table",
        Error::Precondition(_) => "precondition",
        Error::DegenerateCurve(_) => "degenerate_curve",
        Error::Config { .. } => "config",
        Error::Io(_) => "io",
    }
}

/// Formats with nine significant digits.
pub fn sig9(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.8e}");
    let mag: i32 = sci.rsplit('e').next().and_then(|e| e.parse().ok()).unwrap_or(0);
    if (-4..9).contains(&mag) {
        format!("{:.*}", (8 - mag).max(0) as usize, v)
    } else {
        sci
    }
}

struct Session {
    meta: Meta,
    config: RunConfig,
    out: Box<dyn Write>,
}

impl Session {
    fn emit<T: Serialize>(&mut self, body: T) -> Result<()> {
        let env = Envelope { meta: &self.meta, body };
        serde_json::to_writer_pretty(&mut self.out, &env)?;
        writeln!(self.out)?;
        Ok(())
    }

    fn header_lines(&self, w: &mut dyn Write) -> Result<()> {
        writeln!(w, "# tool={} version={}", self.meta.tool, self.meta.version)?;
        writeln!(w, "# command={}", self.meta.command)?;
        writeln!(w, "# config_sha256={}", self.meta.config_sha256)?;
        for (k, v) in &self.meta.tolerances {
            writeln!(w, "# {k}={v}")?;
        }
        Ok(())
    }

    fn data_file(&self) -> Result<Option<BufWriter<File>>> {
        let Some(path) = &self.config.data else {
            return Ok(None);
        };
        let mut w = BufWriter::new(File::create(path)?);
        self.header_lines(&mut w)?;
        Ok(Some(w))
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs a parsed command line. Errors before any output could be opened are
/// returned; later ones are written as a JSON error report.
pub fn execute(cli: &Cli) -> Result<i32> {
    let flags = cli.command.config();
    let config = match &cli.config {
        Some(p) => RunConfig::from_file(p)?.overlay(flags),
        None => flags.clone(),
    };
    let tolerances = tolerances_for(&cli.command, &config)?;
    let meta = Meta {
        tool: "confgap",
        version: env!("CARGO_PKG_VERSION"),
        command: cli.command.name(),
        config_sha256: config.hash(),
        config: config.clone(),
        tolerances,
    };
    let out: Box<dyn Write> = match &config.output {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    };
    let mut session = Session { meta, config, out };
    let result = match cli.command {
        Command::MetricInfo(_) => metric_info(&mut session),
        Command::Integrate(_) => integrate(&mut session),
        Command::GapCheck(_) => gap_check(&mut session),
        Command::PhiTable(_) => phi_table(&mut session),
        Command::FindFreeBoundary(_) => find_free_boundary(&mut session),
        Command::FindTorus(_) => find_torus(&mut session),
        Command::Example(_) => example(&mut session),
    };
    let code = match result {
        Ok(code) => code,
        Err(e @ Error::Config { .. }) => return Err(e),
        Err(e) => {
            let samples = match &e {
                Error::NoRoot { samples, .. } => Some(samples.clone()),
                _ => None,
            };
            session.emit(ErrorBody {
                error: ErrorReport {
                    kind: error_kind(&e),
                    message: e.to_string(),
                    samples,
                },
            })?;
            eprintln!("error: {e}");
            exit_code(&e)
        }
    };
    session.out.flush()?;
    Ok(code)
}

fn tolerances_for(cmd: &Command, c: &RunConfig) -> Result<BTreeMap<&'static str, f64>> {
    let mut m = BTreeMap::new();
    match cmd {
        Command::MetricInfo(_) | Command::PhiTable(_) => {}
        Command::GapCheck(_) => {
            m.insert("tol", c.tol()?);
            m.insert("gap_tol", c.gap_tol()?);
        }
        Command::Example(_) => {
            m.insert("tol", c.tol()?);
            m.insert("gap_tol", c.gap_tol()?);
            m.insert("margin", c.margin()?);
        }
        _ => {
            m.insert("tol", c.tol()?);
        }
    }
    Ok(m)
}

#[derive(Serialize)]
struct MetricRow {
    r: f64,
    sigma: f64,
    grad_sigma: f64,
    scale: f64,
    distance: f64,
}

#[derive(Serialize)]
struct MetricInfo {
    metric: MetricSpec,
    domain_limit: Option<f64>,
    sigma_positivity_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    distance: Option<Distance>,
    table: Vec<MetricRow>,
}

#[derive(Serialize)]
struct Distance {
    r: f64,
    distance: f64,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn metric_info(s: &mut Session) -> Result<i32> {
    let c = &s.config;
    let cf = c.metric()?;
    let format = c.format(&[Format::Json, Format::Csv, Format::Table])?;
    let rows = c.grid.unwrap_or(21);
    if rows < 2 {
        return Err(Error::config("grid", "needs at least two rows"));
    }
    let distance = match c.r {
        Some(r) => {
            let d = cf
                .conformal_distance(r)
                .map_err(|e| Error::config("r", e.to_string()))?;
            Some(Distance { r, distance: d })
        }
        None => None,
    };
    let positivity = cf.sigma_positivity_radius();
    let r_end = if cf.domain_limit().is_finite() {
        0.95 * cf.domain_limit()
    } else if positivity.is_finite() {
        positivity
    } else {
        4.0
    };
    let table = (0..rows)
        .map(|i| {
            let r = r_end * i as f64 / (rows - 1) as f64;
            let t = r * r;
            Ok(MetricRow {
                r,
                sigma: cf.sigma(t)?,
                grad_sigma: cf.grad_sigma_coefficient(t)?,
                scale: cf.scale(t),
                distance: cf.conformal_distance(r)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let info = MetricInfo {
        metric: cf.spec(),
        domain_limit: finite(cf.domain_limit()),
        sigma_positivity_radius: finite(positivity),
        distance,
        table,
    };
    match format {
        Format::Json => s.emit(info)?,
        Format::Csv => {
            let mut buf = Vec::new();
            s.header_lines(&mut buf)?;
            let mut w = csv::Writer::from_writer(&mut buf);
            for row in &info.table {
                w.serialize(row)?;
            }
            w.flush()?;
            drop(w);
            s.out.write_all(&buf)?;
        }
        Format::Table => {
            let out = &mut s.out;
            writeln!(out, "metric                  {}", cf.kind().name())?;
            writeln!(
                out,
                "sigma-positivity radius {}",
                info.sigma_positivity_radius.map_or("inf".into(), sig9)
            )?;
            if let Some(d) = &info.distance {
                writeln!(out, "distance to r = {}    {}", sig9(d.r), sig9(d.distance))?;
            }
            writeln!(
                out,
                "{:>16} {:>16} {:>16} {:>16} {:>16}",
                "r", "sigma", "grad_sigma", "scale", "distance"
            )?;
            for row in &info.table {
                writeln!(
                    out,
                    "{:>16} {:>16} {:>16} {:>16} {:>16}",
                    sig9(row.r),
                    sig9(row.sigma),
                    sig9(row.grad_sigma),
                    sig9(row.scale),
                    sig9(row.distance)
                )?;
            }
        }
    }
    Ok(EXIT_OK)
}

struct CurveRequest {
    cf: ConformalFactor,
    hbar: f64,
    tol: f64,
    mode: Mode,
    x0: f64,
    start: f64,
    span: f64,
    symmetric: bool,
}

fn curve_request(c: &RunConfig) -> Result<CurveRequest> {
    let cf = c.metric()?;
    let mode = c.mode.unwrap_or(Mode::Graph);
    let symmetric = c.symmetric.unwrap_or(false);
    let start = match mode {
        Mode::Graph => c.finite("xp0", c.xp0, 0.0)?,
        Mode::Arclength => c.finite("theta0", c.theta0, std::f64::consts::FRAC_PI_2)?,
    };
    let span = c.finite("span", c.span, 1.0)?;
    if span == 0.0 {
        return Err(Error::config("span", "must be nonzero"));
    }
    if mode == Mode::Arclength && span < 0.0 {
        return Err(Error::config("span", "arclength must be positive"));
    }
    if symmetric && (mode != Mode::Graph || start != 0.0 || span < 0.0) {
        return Err(Error::config(
            "symmetric",
            "mirroring needs graph mode, x'(0) = 0 and a positive span",
        ));
    }
    Ok(CurveRequest {
        x0: c.x0(None)?,
        hbar: c.finite("hbar", c.hbar, 0.0)?,
        tol: c.tol()?,
        cf,
        mode,
        start,
        span,
        symmetric,
    })
}

fn build_curve(req: &CurveRequest) -> Result<ProfileCurve> {
    let curve = match req.mode {
        Mode::Graph => profile::integrate(&req.cf, req.hbar, req.x0, req.start, req.span, req.tol)?,
        Mode::Arclength => {
            let start = ArcState {
                s: 0.0,
                x: req.x0,
                z: 0.0,
                theta: req.start,
            };
            profile::integrate_arclength(&req.cf, req.hbar, start, req.span, req.tol)?
        }
    };
    if req.symmetric {
        curve.mirrored_even()
    } else {
        Ok(curve)
    }
}

/// Latitude-circle curvature at a curve end, seen from each side.
#[derive(Serialize)]
struct LatitudeCurvature {
    param: f64,
    /// As the boundary of the part with smaller t.
    smaller_t_side: f64,
    /// As the boundary of the part with larger t.
    larger_t_side: f64,
}

#[derive(Serialize)]
struct CurveInfo {
    mode: Mode,
    metric: MetricSpec,
    hbar: f64,
    steps: usize,
    param_range: (f64, f64),
    completed: bool,
    truncation: Option<Truncation>,
    start: profile::ProfileRow,
    end: profile::ProfileRow,
    latitude_curvature: Vec<LatitudeCurvature>,
    /// max |x - x0 cosh(t / x0)| for a Euclidean minimal catenoid run.
    catenoid_self_check: Option<f64>,
}

fn curve_info(req: &CurveRequest, curve: &ProfileCurve) -> Result<CurveInfo> {
    let (a, b) = curve.endpoints();
    let mut latitude_curvature = Vec::new();
    for p in [a, b] {
        if let Some(g) = curve.eval(p)?.as_graph() {
            if let Ok(f) = profile_circle_curvature(&req.cf, g) {
                latitude_curvature.push(LatitudeCurvature {
                    param: p,
                    smaller_t_side: f,
                    larger_t_side: -f,
                });
            }
        }
    }
    let catenoid =
        req.cf.kind() == MetricKind::Euclidean && req.hbar == 0.0 && req.mode == Mode::Graph && req.start == 0.0;
    let catenoid_self_check = catenoid.then(|| {
        curve
            .samples(8)
            .iter()
            .map(|st| (st.x() - req.x0 * (st.param() / req.x0).cosh()).abs())
            .fold(0.0, f64::max)
    });
    Ok(CurveInfo {
        mode: curve.mode(),
        metric: curve.metric().spec(),
        hbar: curve.hbar(),
        steps: curve.steps(),
        param_range: curve.param_range(),
        completed: curve.truncation().is_none(),
        truncation: curve.truncation(),
        start: (&curve.first()).into(),
        end: (&curve.last()).into(),
        latitude_curvature,
        catenoid_self_check,
    })
}

fn write_curve_csv(s: &Session, w: &mut dyn Write, curve: &ProfileCurve) -> Result<()> {
    let per = s.config.samples_per_step.unwrap_or(1).max(1);
    let mut out = csv::Writer::from_writer(w);
    for st in curve.samples(per) {
        out.serialize(profile::ProfileRow::from(&st))?;
    }
    out.flush()?;
    Ok(())
}

fn truncation_code(curve: &ProfileCurve) -> i32 {
    if curve.truncation().is_some() {
        EXIT_TRUNCATED
    } else {
        EXIT_OK
    }
}

fn integrate(s: &mut Session) -> Result<i32> {
    let format = s.config.format(&[Format::Json, Format::Csv])?;
    let req = curve_request(&s.config)?;
    let curve = build_curve(&req)?;
    if let Some(mut w) = s.data_file()? {
        write_curve_csv(s, &mut w, &curve)?;
        w.flush()?;
    }
    match format {
        Format::Csv => {
            let mut buf = Vec::new();
            s.header_lines(&mut buf)?;
            write_curve_csv(s, &mut buf, &curve)?;
            s.out.write_all(&buf)?;
        }
        _ => {
            let info = curve_info(&req, &curve)?;
            s.emit(info)?;
        }
    }
    Ok(truncation_code(&curve))
}

#[derive(Serialize)]
struct GapCheck {
    curve: CurveInfo,
    gap: GapSummary,
}

fn gap_check(s: &mut Session) -> Result<i32> {
    let format = s.config.format(&[Format::Json, Format::Csv])?;
    let req = curve_request(&s.config)?;
    let gap_tol = s.config.gap_tol()?;
    let curve = build_curve(&req)?;
    let report = scan_gap(&curve, gap_tol)?;
    if let Some(mut w) = s.data_file()? {
        report.write_csv(&mut w)?;
        w.flush()?;
    }
    match format {
        Format::Csv => {
            let mut buf = Vec::new();
            s.header_lines(&mut buf)?;
            report.write_csv(&mut buf)?;
            s.out.write_all(&buf)?;
        }
        _ => {
            let body = GapCheck {
                curve: curve_info(&req, &curve)?,
                gap: report.summary(),
            };
            s.emit(body)?;
        }
    }
    Ok(if curve.truncation().is_some() {
        EXIT_TRUNCATED
    } else if report.holds() {
        EXIT_OK
    } else {
        EXIT_GAP_VIOLATION
    })
}

#[derive(Serialize)]
struct PhiSummary {
    metric: MetricSpec,
    s_max: f64,
    grid: usize,
    phi_at_s_max: f64,
    min_dphi: f64,
    max_dphi: f64,
    rows: Vec<crate::convexity::PhiRow>,
}

fn phi_table(s: &mut Session) -> Result<i32> {
    let format = s.config.format(&[Format::Json, Format::Csv])?;
    let cf = s.config.metric()?;
    let s_max = match s.config.s_max {
        Some(v) => v,
        None => default_s_max(&cf),
    };
    let grid = s.config.grid.unwrap_or(DEFAULT_GRID);
    let table = build_phi(&cf, s_max, grid).map_err(|e| match e {
        Error::Precondition(m) => Error::config(if grid < 2 { "grid" } else { "s_max" }, m),
        other => other,
    })?;
    if let Some(mut w) = s.data_file()? {
        table.write_csv(&mut w)?;
        w.flush()?;
    }
    match format {
        Format::Csv => {
            let mut buf = Vec::new();
            s.header_lines(&mut buf)?;
            table.write_csv(&mut buf)?;
            s.out.write_all(&buf)?;
        }
        _ => {
            let body = PhiSummary {
                metric: cf.spec(),
                s_max: table.s_max(),
                grid: table.s_grid.len(),
                phi_at_s_max: *table.phi.last().expect("nonempty"),
                min_dphi: table.dphi.iter().copied().fold(f64::INFINITY, f64::min),
                max_dphi: table.dphi.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                rows: table.rows(),
            };
            s.emit(body)?;
        }
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct Solution<'a, T: Serialize> {
    solution: &'a ShootingResult,
    #[serde(flatten)]
    extra: T,
}

fn write_shooting_data(s: &Session, res: &ShootingResult) -> Result<()> {
    if let Some(mut w) = s.data_file()? {
        write_curve_csv(s, &mut w, &res.curve)?;
        w.flush()?;
    }
    Ok(())
}

#[derive(Serialize)]
struct FreeBoundaryExtra {
    x0: f64,
    hbar: f64,
    search: (f64, f64),
}

fn find_free_boundary(s: &mut Session) -> Result<i32> {
    s.config.format(&[Format::Json])?;
    let c = &s.config;
    let cf = c.metric()?;
    let x0 = c.x0(None)?;
    let hbar = c.finite("hbar", c.hbar, 0.0)?;
    let search = c.pair("search", &c.search, (0.5, 2.0))?;
    let tol = c.tol()?;
    let res = shooting::free_boundary_param(&cf, hbar, x0, search, tol)?;
    write_shooting_data(s, &res)?;
    s.emit(Solution {
        solution: &res,
        extra: FreeBoundaryExtra { x0, hbar, search },
    })?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct TorusExtra {
    x1: f64,
    x2: Option<f64>,
    /// The interval (7/16 - 3/98, 7/16 + 3/98) known to contain the waist.
    reference_interval: (f64, f64),
    in_reference_interval: bool,
}

fn find_torus(s: &mut Session) -> Result<i32> {
    s.config.format(&[Format::Json])?;
    let c = &s.config;
    let bracket = c.pair("bracket", &c.bracket, TORUS_BRACKET)?;
    let tol = c.tol()?;
    let res = shooting::angenent_waist(bracket, tol)?;
    write_shooting_data(s, &res)?;
    let reference = (7.0 / 16.0 - 3.0 / 98.0, 7.0 / 16.0 + 3.0 / 98.0);
    let x1 = res.parameter;
    let extra = TorusExtra {
        x1,
        x2: res.far_intercept,
        reference_interval: reference,
        in_reference_interval: reference.0 < x1 && x1 < reference.1,
    };
    s.emit(Solution { solution: &res, extra })?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ExampleBody {
    example: CombinedSummary,
    holds: bool,
    boundary_convex: bool,
}

fn example(s: &mut Session) -> Result<i32> {
    s.config.format(&[Format::Json])?;
    let c = &s.config;
    if let Some(m) = &c.metric {
        if *m != MetricSpec::Gaussian {
            return Err(Error::config("metric", "the example lives in the gaussian metric"));
        }
    }
    let x0 = c.x0(Some(0.45))?;
    let tol = c.tol()?;
    let gap_tol = c.gap_tol()?;
    let margin = c.margin()?;
    let mut ex = shooting::combined_example_with(x0, tol, margin)?;
    if gap_tol != tol {
        ex.report = scan_gap(&ex.curve, gap_tol)?;
    }
    if let Some(mut w) = s.data_file()? {
        ex.report.write_csv(&mut w)?;
        w.flush()?;
    }
    let holds = ex.report.holds();
    let boundary_convex = ex.boundary_curvature > 0.0;
    s.emit(ExampleBody {
        example: ex.summary(),
        holds,
        boundary_convex,
    })?;
    Ok(if holds { EXIT_OK } else { EXIT_GAP_VIOLATION })
}
