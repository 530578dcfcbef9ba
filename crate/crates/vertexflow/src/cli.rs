//! The `vertexflow` command line: experiment configs, subcommands and output writers.
//!
//! Every subcommand returns an exit code: `0` on success, `1` when a check fails or a
//! computation cannot be completed, `2` when the input is rejected. Rejections print a
//! JSON object with a JSON-pointer into the offending document on stderr.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64 as C64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{json, Map, Value};

use crate::error::Error;
use crate::hecke::{kappa_all, Permutation};
use crate::lattice::{DualPoint, ModelParams, SkewDomain, UpLeftPath};
use crate::qmoments::{beta_moment, qmoment_higher_spin_kappa, MomentQuery, MomentResult, QuadOptions};
use crate::sampler::{
    polymer_mean, sample_batch, simulate_beta_polymer, BatchParams, HigherSpinSampler, ModelKind, Plan, PolymerParams, QHahnParams, QHahnSampler, Sc6vSampler,
};
use crate::verify::{run_suite, MomentModel, Suite, SuiteOptions};

// ---------------------------------------------------------------------------
// Failures and exit codes
// ---------------------------------------------------------------------------

/// Why a subcommand stopped.
#[derive(Debug)]
pub enum Failure {
    /// Rejected input, located by a JSON pointer into `source`.
    Config { source: String, pointer: String, message: String },
    /// Bad flag combination.
    Usage(String),
    /// A check ran and did not pass. The report has already been written.
    Check(String),
    /// A computation or I/O step failed.
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config { .. } | Failure::Usage(_) => 2,
            Failure::Check(_) | Failure::Runtime(_) => 1,
        }
    }

    fn config(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Failure::Config { source: String::new(), pointer: pointer.into(), message: message.into() }
    }

    fn in_source(self, source: &Path) -> Self {
        match self {
            Failure::Config { pointer, message, .. } => Failure::Config { source: source.display().to_string(), pointer, message },
            other => other,
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Failure::Config { source, pointer, message } => {
                json!({ "error": "config", "source": source, "pointer": pointer, "message": message })
            }
            Failure::Usage(m) => json!({ "error": "usage", "message": m }),
            Failure::Check(m) => json!({ "error": "check_failed", "message": m }),
            Failure::Runtime(m) => json!({ "error": "runtime", "message": m }),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { pointer, message } => Failure::config(pointer, message),
            Error::InvalidParameters(_) | Error::ParameterRange { .. } => Failure::config("/params", e.to_string()),
            Error::NonMonotoneColoring { .. } => Failure::config("/domain/coloring", e.to_string()),
            Error::PathMismatch(_) | Error::NotBelow { .. } => Failure::config("/domain", e.to_string()),
            Error::PointOutsideDomain { .. } | Error::Constraint(_) | Error::NonMonotoneMap(_) => Failure::config("/queries", e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Re-anchors a library error raised while handling `/queries/{i}`.
fn at_query(i: usize) -> impl Fn(Error) -> Failure {
    move |e| match e {
        Error::PointOutsideDomain { .. } | Error::Constraint(_) | Error::Unsupported(_) => Failure::config(format!("/queries/{i}"), e.to_string()),
        other => other.into(),
    }
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

/// Model families the command line can drive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
pub enum ModelName {
    #[serde(rename = "sc6v")]
    #[value(name = "sc6v")]
    Sc6v,
    #[serde(rename = "hs")]
    #[value(name = "hs")]
    HigherSpin,
    #[serde(rename = "qhahn")]
    #[value(name = "qhahn")]
    QHahn,
    #[serde(rename = "beta")]
    #[value(name = "beta")]
    Beta,
}

impl ModelName {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelName::Sc6v => "sc6v",
            ModelName::HigherSpin => "hs",
            ModelName::QHahn => "qhahn",
            ModelName::Beta => "beta",
        }
    }
}

/// A skew domain given by its two boundary words and the coloring of `Q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub lower: String,
    pub upper: String,
    pub coloring: Vec<u32>,
}

/// Observation window of a quadrant model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub rows: usize,
    pub cols: usize,
}

/// Extent of a Beta-polymer simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolymerSpec {
    pub t_max: usize,
    #[serde(default = "default_delays")]
    pub delays: Vec<usize>,
}

fn default_delays() -> Vec<usize> {
    vec![1]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSpec {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// `0` lets the thread pool decide.
    #[serde(default)]
    pub workers: usize,
}

fn default_samples() -> usize {
    10_000
}

impl Default for SamplingSpec {
    fn default() -> Self {
        SamplingSpec { samples: default_samples(), seed: 0, workers: 0 }
    }
}

/// The JSON document passed with `--config`. `params` is interpreted according to `model`:
/// [`ModelParams`] for `sc6v` and `hs`, [`QHahnParams`] for `qhahn`, [`PolymerParams`] for `beta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelName,
    pub params: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<WindowSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polymer: Option<PolymerSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub queries: Vec<MomentQuery>,
    #[serde(default)]
    pub sampling: SamplingSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<QuadOptions>,
}

/// A validated experiment, ready to sample or integrate.
#[derive(Clone, Debug)]
pub enum Experiment {
    Sc6v { domain: Arc<SkewDomain>, params: ModelParams },
    HigherSpin { params: ModelParams, rows: usize, cols: usize },
    QHahn { params: QHahnParams, rows: usize, cols: usize },
    Beta { params: PolymerParams, t_max: usize, delays: Vec<usize> },
}

fn escape_token(s: &str) -> String {
    s.replace('~', "~0").replace('/', "~1")
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", escape_token(key))),
            Segment::Enum { variant } => out.push_str(&format!("/{}", escape_token(variant))),
            Segment::Unknown => {}
        }
    }
    out
}

/// Deserializes `text`, reporting the location of the first error as a JSON pointer.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> CliResult<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| Failure::config(pointer_of(e.path()), e.inner().to_string()))
}

fn parse_value<T: DeserializeOwned>(value: &Value, prefix: &str) -> CliResult<T> {
    serde_path_to_error::deserialize(value).map_err(|e| Failure::config(format!("{prefix}{}", pointer_of(e.path())), e.inner().to_string()))
}

fn read_file(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::Config { source: path.display().to_string(), pointer: String::new(), message: e.to_string() })
}

fn check_q(q: f64) -> CliResult<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(Failure::config("/params/q", format!("q = {q} is not in (0,1)")))
    }
}

fn check_rapidities(p: &ModelParams, rows: usize, cols: usize, spins: bool) -> CliResult<()> {
    check_q(p.q)?;
    for (name, list, need) in [("row_rapidities", &p.row_rapidities, rows), ("col_rapidities", &p.col_rapidities, cols)] {
        if list.len() < need {
            return Err(Failure::config(format!("/params/{name}"), format!("need at least {need} entries, got {}", list.len())));
        }
        if let Some(i) = list.iter().position(|v| *v == 0.0 || !v.is_finite()) {
            return Err(Failure::config(format!("/params/{name}/{i}"), "rapidities must be finite and nonzero"));
        }
    }
    if spins && p.col_spins.len() < cols {
        return Err(Failure::config("/params/col_spins", format!("need at least {cols} column spins, got {}", p.col_spins.len())));
    }
    check_levels(&p.boundary_levels)
}

fn check_levels(levels: &[u32]) -> CliResult<()> {
    match levels.windows(2).position(|w| w[0] > w[1]) {
        Some(i) => Err(Failure::config(format!("/params/boundary_levels/{}", i + 1), "boundary levels must be nondecreasing")),
        None => Ok(()),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        parse_json(text)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        Self::from_json(&read_file(path)?).map_err(|f| f.in_source(path))
    }

    pub fn to_json(&self) -> String {
        to_json_string(self, true)
    }

    /// The observation window, falling back to the smallest one containing every query point.
    fn window_or_queries(&self) -> CliResult<WindowSpec> {
        if let Some(w) = self.window {
            return Ok(w);
        }
        let fit = |f: fn(&DualPoint) -> f64| self.queries.iter().flat_map(|q| q.points.iter()).map(|p| (f(p) + 0.5).ceil().max(0.0) as usize).max();
        match (fit(DualPoint::beta), fit(DualPoint::alpha)) {
            (Some(rows), Some(cols)) => Ok(WindowSpec { rows: rows.max(1), cols: cols.max(1) }),
            _ => Err(Failure::config("/window", "a window is required when there are no queries")),
        }
    }

    /// Parses `params` for the declared model and checks every field against the model.
    pub fn resolve(&self) -> CliResult<Experiment> {
        let exp = match self.model {
            ModelName::Sc6v => {
                let params: ModelParams = parse_value(&self.params, "/params")?;
                let spec = self.domain.as_ref().ok_or_else(|| Failure::config("/domain", "model sc6v needs a domain"))?;
                let lower = UpLeftPath::from_word(&spec.lower).map_err(|e| Failure::config("/domain/lower", e.to_string()))?;
                let upper = UpLeftPath::from_word(&spec.upper).map_err(|e| Failure::config("/domain/upper", e.to_string()))?;
                if spec.coloring.len() != lower.len() {
                    return Err(Failure::config("/domain/coloring", format!("expected {} colors, one per step of the lower path", lower.len())));
                }
                let domain = SkewDomain::new(lower, upper, spec.coloring.clone()).map_err(|e| match e {
                    Error::NonMonotoneColoring { .. } => Failure::config("/domain/coloring", e.to_string()),
                    Error::PathMismatch(_) | Error::NotBelow { .. } => Failure::config("/domain/upper", e.to_string()),
                    other => other.into(),
                })?;
                check_rapidities(&params, domain.rows(), domain.cols(), false)?;
                Experiment::Sc6v { domain: Arc::new(domain), params }
            }
            ModelName::HigherSpin => {
                let params: ModelParams = parse_value(&self.params, "/params")?;
                let w = self.window_or_queries()?;
                check_rapidities(&params, w.rows, w.cols, true)?;
                Experiment::HigherSpin { params, rows: w.rows, cols: w.cols }
            }
            ModelName::QHahn => {
                let params: QHahnParams = parse_value(&self.params, "/params")?;
                check_q(params.q)?;
                check_levels(&params.boundary_levels)?;
                params.validate().map_err(|e| Failure::config("/params", e.to_string()))?;
                let w = self.window_or_queries()?;
                Experiment::QHahn { params, rows: w.rows, cols: w.cols }
            }
            ModelName::Beta => {
                let params: PolymerParams = parse_value(&self.params, "/params")?;
                params.validate().map_err(|e| Failure::config("/params", e.to_string()))?;
                let spec = match &self.polymer {
                    Some(p) => p.clone(),
                    None => {
                        let t_max = self.queries.iter().flat_map(|q| q.points.iter()).map(|p| (p.beta() + 0.5).round() as usize).max();
                        PolymerSpec { t_max: t_max.ok_or_else(|| Failure::config("/polymer", "model beta needs t_max"))?, delays: default_delays() }
                    }
                };
                if spec.t_max == 0 {
                    return Err(Failure::config("/polymer/t_max", "t_max must be positive"));
                }
                if spec.delays.is_empty() {
                    return Err(Failure::config("/polymer/delays", "at least one delay is required"));
                }
                Experiment::Beta { params, t_max: spec.t_max, delays: spec.delays }
            }
        };
        if self.sampling.samples == 0 {
            return Err(Failure::config("/sampling/samples", "samples must be positive"));
        }
        validate_queries(&self.queries, &exp, "/queries")?;
        Ok(exp)
    }
}

/// Shape checks that do not depend on the formula.
fn validate_queries(queries: &[MomentQuery], exp: &Experiment, prefix: &str) -> CliResult<()> {
    let domain = match exp {
        Experiment::Sc6v { domain, .. } => Some(domain.clone()),
        _ => None,
    };
    for (i, q) in queries.iter().enumerate() {
        let at = |field: &str| format!("{prefix}/{i}/{field}");
        let k = q.points.len();
        if k == 0 {
            return Err(Failure::config(at("points"), "at least one point is required"));
        }
        if q.colors.len() != k {
            return Err(Failure::config(at("colors"), format!("expected {k} colors, got {}", q.colors.len())));
        }
        if q.pi.k() != k {
            return Err(Failure::config(at("pi"), format!("expected a permutation of {k} letters, got {}", q.pi.k())));
        }
        if let Some(j) = q.colors.windows(2).position(|w| w[0] > w[1]) {
            return Err(Failure::config(format!("{}/{}", at("colors"), j + 1), "colors must be nondecreasing"));
        }
        if let Some(d) = &domain {
            if let Some(j) = q.points.iter().position(|p| !d.contains_point(p)) {
                return Err(Failure::config(format!("{}/{j}", at("points")), "point lies outside the domain"));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

/// `v` with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        String::new()
    }
}

/// Compact JSON with 17 significant digits for every float.
#[derive(Default)]
pub struct SigFormatter;

impl Formatter for SigFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(fmt_f64(v).as_bytes())
    }
}

/// Indented JSON with 17 significant digits for every float.
pub struct SigPrettyFormatter(PrettyFormatter<'static>);

impl Default for SigPrettyFormatter {
    fn default() -> Self {
        SigPrettyFormatter(PrettyFormatter::new())
    }
}

impl Formatter for SigPrettyFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(fmt_f64(v).as_bytes())
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

fn write_json<T: Serialize + ?Sized, W: Write>(w: W, value: &T, pretty: bool) -> io::Result<()> {
    let res = if pretty {
        value.serialize(&mut serde_json::Serializer::with_formatter(w, SigPrettyFormatter::default()))
    } else {
        value.serialize(&mut serde_json::Serializer::with_formatter(w, SigFormatter))
    };
    res.map_err(io::Error::other)
}

/// Serializes with 17 significant digits per float.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T, pretty: bool) -> String {
    let mut buf = Vec::new();
    write_json(&mut buf, value, pretty).expect("serialization into memory");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutFormat {
    Json,
    Jsonl,
    Csv,
}

impl OutFormat {
    pub fn for_path(path: Option<&Path>) -> Self {
        match path.and_then(|p| p.extension()).and_then(|e| e.to_str()) {
            Some("csv") => OutFormat::Csv,
            Some("jsonl") | Some("ndjson") => OutFormat::Jsonl,
            _ => OutFormat::Json,
        }
    }
}

fn open_out(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Box::new(BufWriter::new(File::create(p).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?))
        }
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

/// A command result: a JSON document plus a flat table for JSONL and CSV.
pub struct Output {
    pub document: Value,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Map<String, Value>>,
}

fn csv_cell(v: Option<&Value>) -> String {
    match v {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => u.to_string(),
            (None, Some(i)) => i.to_string(),
            _ => fmt_f64(n.as_f64().unwrap_or(f64::NAN)),
        },
        Some(other) => to_json_string(other, false),
    }
}

impl Output {
    pub fn write(&self, path: Option<&Path>) -> CliResult<()> {
        let mut w = open_out(path)?;
        match OutFormat::for_path(path) {
            OutFormat::Json => {
                write_json(&mut w, &self.document, true)?;
                writeln!(w)?;
            }
            OutFormat::Jsonl => {
                for row in &self.rows {
                    write_json(&mut w, row, false)?;
                    writeln!(w)?;
                }
            }
            OutFormat::Csv => {
                let mut cw = csv::Writer::from_writer(w);
                cw.write_record(&self.columns).map_err(|e| Failure::Runtime(e.to_string()))?;
                for row in &self.rows {
                    cw.write_record(self.columns.iter().map(|c| csv_cell(row.get(*c)))).map_err(|e| Failure::Runtime(e.to_string()))?;
                }
                cw.flush()?;
                return Ok(());
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn row(pairs: Vec<(&str, Value)>) -> Map<String, Value> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

#[derive(Parser, Debug)]
#[command(name = "vertexflow", version, about = "Sampling and exact q-moments of stochastic colored vertex models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by the subcommands.
#[derive(Args, Debug, Clone, Default)]
pub struct RunFlags {
    /// Random seed; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte Carlo sample count; overrides the config.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Worker threads, 0 for all cores.
    #[arg(long, env = "VERTEXFLOW_WORKERS")]
    pub workers: Option<usize>,
    /// Output file; the extension selects JSON, JSONL or CSV. Defaults to JSON on stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Numerical tolerance (quadrature target for `moment`, check bound for `verify`).
    #[arg(long)]
    pub tolerance: Option<f64>,
}

/// Which exact formula `moment` evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Formula {
    /// Pick the formula that matches the config's model.
    Auto,
    /// Colored six-vertex model on a skew domain.
    #[value(name = "6.1", alias = "skew")]
    Skew,
    /// Higher-spin model, colored height functions.
    #[value(name = "8.1", alias = "higher-spin")]
    HigherSpin,
    /// Higher-spin model through the kappa expansion.
    #[value(name = "hs-kappa", alias = "kappa-form")]
    HigherSpinKappa,
    /// Higher-spin model, shifted product observable.
    #[value(name = "8.4", alias = "shifted")]
    Shifted,
    /// Colored q-Hahn model on the quadrant.
    #[value(name = "8.5", alias = "qhahn")]
    QHahn,
    /// Delayed Beta-polymer partition functions.
    #[value(name = "9.2", alias = "beta")]
    Beta,
}

impl Formula {
    fn model(self) -> Option<ModelName> {
        match self {
            Formula::Auto => None,
            Formula::Skew => Some(ModelName::Sc6v),
            Formula::HigherSpin | Formula::HigherSpinKappa | Formula::Shifted => Some(ModelName::HigherSpin),
            Formula::QHahn => Some(ModelName::QHahn),
            Formula::Beta => Some(ModelName::Beta),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Formula::Auto => "auto",
            Formula::Skew => "skew",
            Formula::HigherSpin => "higher_spin",
            Formula::HigherSpinKappa => "higher_spin_kappa",
            Formula::Shifted => "shifted",
            Formula::QHahn => "qhahn",
            Formula::Beta => "beta",
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Draw configurations (or polymer environments) and write one per line.
    Sample {
        #[arg(long, value_enum)]
        model: Option<ModelName>,
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Evaluate exact q-moments, optionally with Monte Carlo estimates alongside.
    Moment {
        #[arg(long, value_enum, default_value = "auto")]
        theorem: Formula,
        #[arg(long)]
        config: PathBuf,
        /// Queries as a JSON array, a single query, or an object with a `queries` field.
        #[arg(long)]
        query: Option<PathBuf>,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Run a verification suite and write the report.
    Verify {
        #[arg(long, default_value = "all")]
        suite: Suite,
        /// Random trials per algebraic check.
        #[arg(long)]
        trials: Option<usize>,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Print the coefficients kappa_pi^rho(w).
    Kappa {
        /// One-based images of pi, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        pi: Vec<usize>,
        /// Points as `re` or `re:im`, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        w: Vec<String>,
        #[arg(long)]
        q: f64,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Tabulate E Z_(k)^(m,t) for the Beta polymer by Monte Carlo and by the integral formula.
    Polymer {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        t_max: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        delays: Option<Vec<usize>>,
        #[command(flatten)]
        run: RunFlags,
    },
}

/// Parses `args` (program name first), runs the subcommand and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(summary) => {
            eprintln!("{summary}");
            0
        }
        Err(f) => {
            eprintln!("{}", to_json_string(&f.to_json(), false));
            f.exit_code()
        }
    }
}

/// Runs one subcommand and returns its summary line.
pub fn execute(command: Command) -> CliResult<String> {
    match command {
        Command::Sample { model, config, run } => cmd_sample(model, &config, &run),
        Command::Moment { theorem, config, query, run } => cmd_moment(theorem, &config, query.as_deref(), &run),
        Command::Verify { suite, trials, run } => cmd_verify(suite, trials, &run),
        Command::Kappa { pi, w, q, run } => cmd_kappa(&pi, &w, q, &run),
        Command::Polymer { config, sigma, rho, t_max, delays, run } => cmd_polymer(config.as_deref(), sigma, rho, t_max, delays, &run),
    }
}

fn plan_for(cfg: &SamplingSpec, run: &RunFlags) -> Plan {
    Plan::new(run.seed.unwrap_or(cfg.seed), run.samples.unwrap_or(cfg.samples)).with_workers(run.workers.unwrap_or(cfg.workers))
}

fn quad_for(cfg: &ExperimentConfig, run: &RunFlags) -> QuadOptions {
    let mut quad = cfg.quadrature.unwrap_or_default();
    if let Some(t) = run.tolerance {
        quad.tol = t;
    }
    if let Some(w) = run.workers {
        quad.workers = w;
    }
    quad
}

fn cmd_sample(model: Option<ModelName>, config: &Path, run: &RunFlags) -> CliResult<String> {
    let cfg = ExperimentConfig::load(config)?;
    if let Some(m) = model.filter(|m| *m != cfg.model) {
        return Err(Failure::Config {
            source: config.display().to_string(),
            pointer: "/model".into(),
            message: format!("--model {} does not match the config model {}", m.as_str(), cfg.model.as_str()),
        });
    }
    let exp = cfg.resolve().map_err(|f| f.in_source(config))?;
    let plan = plan_for(&cfg.sampling, run);
    let format = OutFormat::for_path(run.out.as_deref());
    if format == OutFormat::Csv {
        return Err(Failure::Usage("sample writes JSON or JSONL, not CSV".into()));
    }
    let mut w = open_out(run.out.as_deref())?;
    let count = plan.count;
    let pretty = format == OutFormat::Json;
    if let Experiment::Beta { params, t_max, delays } = &exp {
        let samples = simulate_beta_polymer(*params, *t_max, delays, &plan)?;
        if pretty {
            write_json(&mut w, &json!({ "model": "beta", "seed": plan.seed, "params": params, "samples": samples }), true)?;
            writeln!(w)?;
        } else {
            for s in &samples {
                write_json(&mut w, s, false)?;
                writeln!(w)?;
            }
        }
    } else {
        let batch = match &exp {
            Experiment::Sc6v { domain, params } => {
                sample_batch(&Sc6vSampler::new(domain.clone(), params)?, &plan, BatchParams::Model(params.clone()), ModelKind::Sc6vSkew)?
            }
            Experiment::HigherSpin { params, rows, cols } => {
                sample_batch(&HigherSpinSampler::new(params, *rows, *cols)?, &plan, BatchParams::Model(params.clone()), ModelKind::HigherSpinQuadrant)?
            }
            Experiment::QHahn { params, rows, cols } => {
                sample_batch(&QHahnSampler::new(params, *rows, *cols)?, &plan, BatchParams::QHahn(params.clone()), ModelKind::QhahnQuadrant)?
            }
            Experiment::Beta { .. } => unreachable!("handled above"),
        };
        let records: Vec<_> = batch.configs.iter().map(|c| c.to_record()).collect();
        if pretty {
            let doc = json!({ "model": batch.model_kind, "seed": batch.seed, "params": batch.params, "configs": records });
            write_json(&mut w, &doc, true)?;
            writeln!(w)?;
        } else {
            for r in &records {
                write_json(&mut w, r, false)?;
                writeln!(w)?;
            }
        }
    }
    w.flush()?;
    Ok(format!("sample: model {} wrote {count} samples (seed {})", cfg.model.as_str(), plan.seed))
}

/// Queries from a standalone file: an array, one query, or `{"queries": [...]}`. The second
/// value is the JSON-pointer prefix under which query `i` appears, with `{}` for the index.
fn load_queries(path: &Path) -> CliResult<(Vec<MomentQuery>, &'static str)> {
    let text = read_file(path)?;
    let value: Value = parse_json(&text).map_err(|f| f.in_source(path))?;
    let parsed = match &value {
        Value::Array(_) => parse_value(&value, "").map(|q| (q, "/{}")),
        Value::Object(m) if m.contains_key("queries") => parse_value(&m["queries"], "/queries").map(|q| (q, "/queries/{}")),
        _ => parse_value(&value, "").map(|q| (vec![q], "")),
    };
    parsed.map_err(|f| f.in_source(path))
}

/// Rewrites a `/queries/{i}...` pointer into the layout of the document the queries came from.
fn relocate(pointer: &str, layout: &str) -> String {
    let Some(rest) = pointer.strip_prefix("/queries/") else { return pointer.to_string() };
    let (index, tail) = rest.split_once('/').map_or((rest, ""), |(i, t)| (i, t));
    let head = layout.replace("{}", index);
    if tail.is_empty() {
        head
    } else {
        format!("{head}/{tail}")
    }
}

fn moment_model(exp: &Experiment, formula: Formula) -> MomentModel {
    match exp.clone() {
        Experiment::Sc6v { domain, params } => MomentModel::Skew { domain, params },
        Experiment::HigherSpin { params, rows, cols } if formula == Formula::Shifted => MomentModel::Shifted { params, rows, cols },
        Experiment::HigherSpin { params, rows, cols } => MomentModel::HigherSpin { params, rows, cols },
        Experiment::QHahn { params, rows, cols } => MomentModel::QHahn { params, rows, cols },
        Experiment::Beta { params, .. } => MomentModel::Polymer { params },
    }
}

fn cmd_moment(formula: Formula, config: &Path, query: Option<&Path>, run: &RunFlags) -> CliResult<String> {
    let cfg = ExperimentConfig::load(config)?;
    let exp = cfg.resolve().map_err(|f| f.in_source(config))?;
    if let Some(m) = formula.model().filter(|m| *m != cfg.model) {
        return Err(Failure::Config {
            source: config.display().to_string(),
            pointer: "/model".into(),
            message: format!("formula {} applies to model {}, not {}", formula.name(), m.as_str(), cfg.model.as_str()),
        });
    }
    let formula = match formula {
        Formula::Auto => match cfg.model {
            ModelName::Sc6v => Formula::Skew,
            ModelName::HigherSpin => Formula::HigherSpin,
            ModelName::QHahn => Formula::QHahn,
            ModelName::Beta => Formula::Beta,
        },
        f => f,
    };
    let (queries, source, layout) = match query {
        Some(p) => {
            let (q, layout) = load_queries(p)?;
            validate_queries(&q, &exp, "/queries").map_err(|f| match f {
                Failure::Config { pointer, message, .. } => Failure::Config { source: p.display().to_string(), pointer: relocate(&pointer, layout), message },
                other => other,
            })?;
            (q, p.to_path_buf(), layout)
        }
        None => (cfg.queries.clone(), config.to_path_buf(), "/queries/{}"),
    };
    if queries.is_empty() {
        return Err(Failure::Config { source: source.display().to_string(), pointer: "/queries".into(), message: "no queries given".into() });
    }
    let quad = quad_for(&cfg, run);
    let model = moment_model(&exp, formula);
    let mut exact = Vec::with_capacity(queries.len());
    for (i, q) in queries.iter().enumerate() {
        let value: MomentResult = match (&exp, formula) {
            (Experiment::HigherSpin { params, .. }, Formula::HigherSpinKappa) => qmoment_higher_spin_kappa(params, q, &quad),
            (Experiment::Beta { params, .. }, _) => beta_moment(params, q, &quad),
            _ => model.exact(q, &quad),
        }
        .map_err(|e| match at_query(i)(e) {
            Failure::Config { pointer, message, .. } => Failure::Config { source: source.display().to_string(), pointer: relocate(&pointer, layout), message },
            other => other,
        })?;
        exact.push(value);
    }

    let columns = vec!["id", "method", "value_re", "value_im", "err_est", "samples", "nodes"];
    let mut rows: Vec<Map<String, Value>> = exact
        .iter()
        .enumerate()
        .map(|(i, v)| {
            row(vec![
                ("id", json!(i)),
                ("method", json!("exact")),
                ("value_re", json!(v.value.re)),
                ("value_im", json!(v.value.im)),
                ("err_est", json!(v.error)),
                ("samples", json!(0)),
                ("nodes", json!(v.nodes)),
            ])
        })
        .collect();

    // Monte Carlo only when asked for on the command line.
    let mut failures = Vec::new();
    let mut plan_seed = None;
    if let Some(n) = run.samples {
        let plan = Plan::new(run.seed.unwrap_or(cfg.sampling.seed), n).with_workers(run.workers.unwrap_or(cfg.sampling.workers));
        plan_seed = Some(plan.seed);
        let acc = model.monte_carlo(&queries, &plan)?;
        for (i, v) in exact.iter().enumerate() {
            let (mean, se) = (acc.mean(i), acc.std_err(i));
            let z = (mean - v.value.re).abs() / se.max(1e-300);
            let ok = (mean - v.value.re).abs() <= 4.0 * se + 10.0 * v.error + 1e-12;
            if !ok {
                failures.push(format!("query {i}: mc {mean} ± {se} vs exact {}", v.value.re));
            }
            rows.push(row(vec![
                ("id", json!(i)),
                ("method", json!("monte_carlo")),
                ("value_re", json!(mean)),
                ("value_im", json!(0.0)),
                ("err_est", json!(se)),
                ("samples", json!(n)),
                ("nodes", Value::Null),
                ("z", json!(z)),
                ("consistent", json!(ok)),
            ]));
        }
    }
    let document = json!({
        "model": cfg.model,
        "formula": formula.name(),
        "seed": plan_seed,
        "queries": queries,
        "results": rows,
    });
    Output { document, columns, rows }.write(run.out.as_deref())?;
    if !failures.is_empty() {
        return Err(Failure::Check(failures.join("; ")));
    }
    Ok(format!("moment: {} queries with the {} formula", queries.len(), formula.name()))
}

fn cmd_verify(suite: Suite, trials: Option<usize>, run: &RunFlags) -> CliResult<String> {
    let mut opts = SuiteOptions::default();
    if let Some(s) = run.seed {
        opts.seed = s;
    }
    if let Some(n) = run.samples {
        opts.samples = n;
    }
    if let Some(t) = trials {
        opts.trials = t;
    }
    if let Some(w) = run.workers {
        opts.workers = w;
        opts.quad.workers = w;
    }
    opts.tolerance = run.tolerance;
    let reports = run_suite(suite, &opts)?;
    for r in &reports {
        eprintln!("{:<44} {:?} err {:.3e} tol {:.1e}", r.name, r.status, r.max_abs_error, r.tolerance);
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed()).map(|r| r.name.as_str()).collect();
    let columns = vec!["name", "status", "max_abs_error", "tolerance", "cases", "seed", "details"];
    let rows = reports.iter().map(|r| serde_json::to_value(r).ok().and_then(|v| v.as_object().cloned()).unwrap_or_default()).collect();
    let document = json!({
        "suite": format!("{suite:?}").to_lowercase(),
        "seed": opts.seed,
        "samples": opts.samples,
        "trials": opts.trials,
        "passed": failed.is_empty(),
        "checks": reports,
    });
    Output { document, columns, rows }.write(run.out.as_deref())?;
    if failed.is_empty() {
        Ok(format!("verify: {} checks passed", reports.len()))
    } else {
        Err(Failure::Check(format!("{} of {} checks failed: {}", failed.len(), reports.len(), failed.join(", "))))
    }
}

fn parse_point(s: &str) -> std::result::Result<C64, String> {
    let parse = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("bad number {t:?}: {e}"));
    match s.split_once(':') {
        Some((re, im)) => Ok(C64::new(parse(re)?, parse(im)?)),
        None => Ok(C64::new(parse(s)?, 0.0)),
    }
}

fn cmd_kappa(pi: &[usize], w: &[String], q: f64, run: &RunFlags) -> CliResult<String> {
    let pi = Permutation::from_images(pi).map_err(|e| Failure::Usage(format!("--pi: {e}")))?;
    let w: Vec<C64> = w.iter().map(|s| parse_point(s)).collect::<std::result::Result<_, _>>().map_err(|e| Failure::Usage(format!("--w: {e}")))?;
    if w.len() != pi.k() {
        return Err(Failure::Usage(format!("--w has {} points but pi has {} letters", w.len(), pi.k())));
    }
    let coefs = kappa_all(&pi, &w, q)?;
    let sorted: BTreeMap<Vec<usize>, C64> = coefs.into_iter().map(|(rho, v)| (rho.images(), v)).collect();
    let columns = vec!["rho", "re", "im"];
    let rows: Vec<Map<String, Value>> = sorted
        .iter()
        .map(|(rho, v)| {
            let label = rho.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ");
            row(vec![("rho", json!(label)), ("re", json!(v.re)), ("im", json!(v.im))])
        })
        .collect();
    let document = json!({
        "pi": pi,
        "q": q,
        "w": w.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
        "kappa": sorted.iter().map(|(rho, v)| json!({ "rho": rho, "re": v.re, "im": v.im })).collect::<Vec<_>>(),
    });
    Output { document, columns, rows }.write(run.out.as_deref())?;
    Ok(format!("kappa: {} nonzero coefficients", sorted.len()))
}

#[allow(clippy::too_many_arguments)]
fn cmd_polymer(
    config: Option<&Path>,
    sigma: Option<f64>,
    rho: Option<f64>,
    t_max: Option<usize>,
    delays: Option<Vec<usize>>,
    run: &RunFlags,
) -> CliResult<String> {
    let (mut params, mut spec, sampling, mut quad) = match config {
        Some(path) => {
            let cfg = ExperimentConfig::load(path)?;
            if cfg.model != ModelName::Beta {
                return Err(Failure::Config { source: path.display().to_string(), pointer: "/model".into(), message: "polymer needs model beta".into() });
            }
            let quad = quad_for(&cfg, run);
            match cfg.resolve().map_err(|f| f.in_source(path))? {
                Experiment::Beta { params, t_max, delays } => (params, PolymerSpec { t_max, delays }, cfg.sampling, quad),
                _ => unreachable!("model checked above"),
            }
        }
        None => {
            let (Some(sigma), Some(rho), Some(t)) = (sigma, rho, t_max) else {
                return Err(Failure::Usage("polymer needs --config or all of --sigma, --rho and --t-max".into()));
            };
            (PolymerParams { sigma, rho }, PolymerSpec { t_max: t, delays: default_delays() }, SamplingSpec::default(), QuadOptions::default())
        }
    };
    if let Some(s) = sigma {
        params.sigma = s;
    }
    if let Some(r) = rho {
        params.rho = r;
    }
    if let Some(t) = t_max {
        spec.t_max = t;
    }
    if let Some(d) = delays {
        spec.delays = d;
    }
    if let Some(t) = run.tolerance {
        quad.tol = t;
    }
    params.validate()?;
    let plan = plan_for(&sampling, run);
    let cells: Vec<(usize, usize, usize)> =
        spec.delays.iter().enumerate().flat_map(|(d, &k)| (k + 1..=spec.t_max).flat_map(move |t| (1..=t - k).map(move |m| (d, m, t)))).collect();
    let acc = polymer_mean(params, spec.t_max, &spec.delays, &plan, cells.len(), |s, out| {
        for (o, &(d, m, t)) in out.iter_mut().zip(&cells) {
            *o = s.get(d, m, t).unwrap_or(f64::NAN);
        }
    })?;
    let columns = vec!["delay", "m", "t", "mc_mean", "mc_std_err", "exact", "exact_err"];
    let rows: Vec<Map<String, Value>> = cells
        .iter()
        .enumerate()
        .map(|(i, &(d, m, t))| {
            let k = spec.delays[d];
            let query = MomentQuery { points: vec![DualPoint::new(m as f64 - 0.5, t as f64 - 0.5)], colors: vec![k as u32], pi: Permutation::identity(1) };
            let exact = beta_moment(&params, &query, &quad).ok();
            row(vec![
                ("delay", json!(k)),
                ("m", json!(m)),
                ("t", json!(t)),
                ("mc_mean", json!(acc.mean(i))),
                ("mc_std_err", json!(acc.std_err(i))),
                ("exact", json!(exact.as_ref().map(|v| v.value.re))),
                ("exact_err", json!(exact.as_ref().map(|v| v.error))),
            ])
        })
        .collect();
    let document = json!({
        "params": params,
        "t_max": spec.t_max,
        "delays": spec.delays,
        "samples": plan.count,
        "seed": plan.seed,
        "table": rows,
    });
    Output { document, columns, rows }.write(run.out.as_deref())?;
    Ok(format!("polymer: {} cells from {} samples (seed {})", cells.len(), plan.count, plan.seed))
}
