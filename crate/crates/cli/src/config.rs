//! Run configuration: command-line flags layered over an optional `key = value` file.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gausscap::asymptotic::{EnvKind, DEFAULT_QUAD_PANELS};
use gausscap::{Algorithm, ApproxOrder};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Parser)]
#[command(name = "gausscap", version, about = "Classical capacity lower bounds of lossy Gaussian channels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One use of the memoryless squeezed-thermal channel.
    Memoryless(PointArgs),
    /// Nearest-neighbor memory channel in the limit of infinitely many uses.
    Memory(PointArgs),
    /// Finite block of `n` uses solved by water filling.
    Finite(PointArgs),
    /// One row per point of a grid along one parameter.
    Sweep(SweepArgs),
    /// Runs the acceptance battery.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Params {
    /// Transmissivity in (0, 1).
    #[arg(long)]
    pub eta: Option<f64>,
    /// Mean input photons per use.
    #[arg(long = "N")]
    pub n_photons: Option<f64>,
    /// Thermal photons of the environment.
    #[arg(long = "N-env")]
    pub n_env: Option<f64>,
    /// Environment squeezing.
    #[arg(long, allow_hyphen_values = true)]
    pub s: Option<f64>,
    /// Mean environment photons; maximizes over (N_env, s) at this value.
    #[arg(long = "M-env")]
    pub m_env: Option<f64>,
    /// Number of channel uses (finite).
    #[arg(long)]
    pub n: Option<usize>,
    /// exact, zeroth or first.
    #[arg(long)]
    pub order: Option<ApproxOrder>,
    /// Quadrature panels (memory).
    #[arg(long = "quad-points")]
    pub quad_points: Option<usize>,
    /// Searches the optimal environment squeezing in [0, s_max] (memoryless).
    #[arg(long = "s-max")]
    pub s_max: Option<f64>,
    /// Environment model for finite: memoryless or nearest-neighbor.
    #[arg(long)]
    pub model: Option<EnvKind>,
    /// static or dynamic (finite).
    #[arg(long)]
    pub algorithm: Option<Algorithm>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// `key = value` file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file (stdout when absent).
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Args)]
pub struct PointArgs {
    #[command(flatten)]
    pub params: Params,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Solver to sweep: memoryless, memory or finite.
    #[arg(long = "command")]
    pub target: Option<String>,
    #[arg(long)]
    pub axis: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub start: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub stop: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[command(flatten)]
    pub params: Params,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Run a single criterion (1-9).
    #[arg(long)]
    pub criterion: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Memoryless,
    Memory,
    Finite,
}

impl Solver {
    pub fn as_str(self) -> &'static str {
        match self {
            Solver::Memoryless => "memoryless",
            Solver::Memory => "memory",
            Solver::Finite => "finite",
        }
    }
}

impl FromStr for Solver {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "memoryless" => Ok(Solver::Memoryless),
            "memory" => Ok(Solver::Memory),
            "finite" => Ok(Solver::Finite),
            other => err(format!("unknown sweep command '{other}' (expected memoryless, memory or finite)")),
        }
    }
}

pub const AXES: [&str; 7] = ["eta", "N", "N_env", "s", "M_env", "n", "s_max"];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub name: String,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl SweepAxis {
    pub fn values(&self) -> Vec<f64> {
        let h = (self.stop - self.start) / (self.steps - 1) as f64;
        (0..self.steps).map(|k| self.start + h * k as f64).collect()
    }
}

/// Fully resolved parameters of one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub eta: f64,
    pub n_photons: f64,
    pub n_env: f64,
    pub s: f64,
    pub m_env: Option<f64>,
    pub n: usize,
    pub order: ApproxOrder,
    pub quad_points: usize,
    pub s_max: Option<f64>,
    pub model: EnvKind,
    pub algorithm: Algorithm,
    /// Whether `N_env` or `s` were set explicitly.
    pub env_given: bool,
}

impl Point {
    /// Sets the sweep parameter `name` to `value`.
    pub fn with(&self, name: &str, value: f64) -> Result<Point, ConfigError> {
        let mut p = self.clone();
        match name {
            "eta" => p.eta = value,
            "N" => p.n_photons = value,
            "N_env" => {
                p.n_env = value;
                p.env_given = true;
            }
            "s" => {
                p.s = value;
                p.env_given = true;
            }
            "M_env" => p.m_env = Some(value),
            "s_max" => p.s_max = Some(value),
            "n" => {
                if !(value >= 1.0) {
                    return err(format!("n = {value} must be >= 1"));
                }
                p.n = value.round() as usize;
            }
            other => return err(format!("unknown axis '{other}'")),
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Job {
    Point(Solver, Point),
    Sweep(Solver, Point, SweepAxis),
    Verify(Option<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub job: Job,
    pub output: Option<PathBuf>,
    pub format: Format,
}

/// Parses a `key = value` file; `#` starts a comment.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return err(format!("line {}: expected key = value", lineno + 1));
        };
        let key = k.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return err(format!("line {}: unknown key '{}'", lineno + 1, k.trim()));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

const KEYS: [&str; 18] = [
    "eta", "N", "N_env", "s", "M_env", "n", "order", "quad_points", "s_max", "model", "algorithm", "command",
    "axis", "start", "stop", "steps", "output", "format",
];

fn parse<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    match map.get(key) {
        None => Ok(None),
        Some(v) => v.parse().map(Some).map_err(|e| ConfigError(format!("{key} = {v}: {e}"))),
    }
}

fn file_params(map: &BTreeMap<String, String>) -> Result<Params, ConfigError> {
    Ok(Params {
        eta: parse(map, "eta")?,
        n_photons: parse(map, "N")?,
        n_env: parse(map, "N_env")?,
        s: parse(map, "s")?,
        m_env: parse(map, "M_env")?,
        n: parse(map, "n")?,
        order: parse(map, "order")?,
        quad_points: parse(map, "quad_points")?,
        s_max: parse(map, "s_max")?,
        model: parse(map, "model")?,
        algorithm: parse(map, "algorithm")?,
    })
}

fn file_common(map: &BTreeMap<String, String>) -> Result<Common, ConfigError> {
    let format = match map.get("format").map(String::as_str) {
        None => None,
        Some("csv") => Some(Format::Csv),
        Some("json") => Some(Format::Json),
        Some(other) => return err(format!("format = {other}: expected csv or json")),
    };
    Ok(Common { config: None, output: map.get("output").map(PathBuf::from), format })
}

impl Params {
    /// Fields set here win over `other`.
    fn or(self, other: Params) -> Params {
        Params {
            eta: self.eta.or(other.eta),
            n_photons: self.n_photons.or(other.n_photons),
            n_env: self.n_env.or(other.n_env),
            s: self.s.or(other.s),
            m_env: self.m_env.or(other.m_env),
            n: self.n.or(other.n),
            order: self.order.or(other.order),
            quad_points: self.quad_points.or(other.quad_points),
            s_max: self.s_max.or(other.s_max),
            model: self.model.or(other.model),
            algorithm: self.algorithm.or(other.algorithm),
        }
    }

    fn resolve(self, solver: Solver, axis: Option<&str>) -> Result<Point, ConfigError> {
        let swept = |name: &str| axis == Some(name);
        let need = |v: Option<f64>, name: &str| match v {
            Some(x) => Ok(x),
            None if swept(name) => Ok(f64::NAN),
            None => err(format!("missing parameter {name}")),
        };
        let n = match (solver, self.n) {
            (Solver::Finite, None) if !swept("n") => return err("missing parameter n"),
            (_, n) => n.unwrap_or(1),
        };
        if n == 0 {
            return err("n must be >= 1");
        }
        let quad_points = self.quad_points.unwrap_or(DEFAULT_QUAD_PANELS);
        if quad_points == 0 {
            return err("quad_points must be >= 1");
        }
        Ok(Point {
            eta: need(self.eta, "eta")?,
            n_photons: need(self.n_photons, "N")?,
            n_env: self.n_env.unwrap_or(0.0),
            s: self.s.unwrap_or(0.0),
            m_env: self.m_env,
            n,
            order: self.order.unwrap_or_default(),
            quad_points,
            s_max: self.s_max,
            model: self.model.unwrap_or(match solver {
                Solver::Memoryless => EnvKind::Memoryless,
                _ => EnvKind::NearestNeighbor,
            }),
            algorithm: self.algorithm.unwrap_or_default(),
            env_given: self.n_env.is_some() || self.s.is_some(),
        })
    }
}

/// Checks the combination of options that only make sense for some solvers.
pub fn check_point(solver: Solver, p: &Point) -> Result<(), ConfigError> {
    if p.m_env.is_some() && p.env_given {
        return err("M_env fixes the environment; do not also give N_env or s");
    }
    if p.m_env.is_some() && solver == Solver::Finite {
        return err("M_env is supported by memoryless and memory only");
    }
    if p.s_max.is_some() {
        if solver != Solver::Memoryless {
            return err("s_max is supported by memoryless only");
        }
        if p.m_env.is_some() || p.s != 0.0 {
            return err("s_max searches s; do not also give s or M_env");
        }
    }
    Ok(())
}

fn common_of(flags: Common) -> Result<(Common, BTreeMap<String, String>), ConfigError> {
    let map = match &flags.config {
        Some(path) => read_config_file(path)?,
        None => BTreeMap::new(),
    };
    let file = file_common(&map)?;
    let merged = Common {
        config: flags.config,
        output: flags.output.or(file.output),
        format: flags.format.or(file.format),
    };
    Ok((merged, map))
}

fn format_for(common: &Common) -> Format {
    common.format.unwrap_or_else(|| match &common.output {
        Some(p) if p.extension().is_some_and(|e| e == "json") => Format::Json,
        _ => Format::Csv,
    })
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<RunConfig, ConfigError> {
        let name = cli.command_name();
        let (common, job) = match cli.command {
            Command::Verify(v) => {
                let (common, map) = common_of(v.common)?;
                if let Some(k) = map.keys().find(|k| !["output", "format"].contains(&k.as_str())) {
                    return err(format!("key '{k}' does not apply to verify"));
                }
                if let Some(c) = v.criterion {
                    if !(1..=gausscap::verify::CRITERIA).contains(&c) {
                        return err(format!("criterion {c} out of range 1-{}", gausscap::verify::CRITERIA));
                    }
                }
                (common, Job::Verify(v.criterion))
            }
            Command::Sweep(a) => {
                let (common, map) = common_of(a.common)?;
                let target = a.target.or_else(|| map.get("command").cloned());
                let Some(target) = target else { return err("sweep needs --command") };
                let solver: Solver = target.parse()?;
                let axis = a.axis.or_else(|| map.get("axis").cloned());
                let Some(axis) = axis else { return err("sweep needs --axis") };
                let axis = axis.replace('-', "_");
                if !AXES.contains(&axis.as_str()) {
                    return err(format!("unknown axis '{axis}' (expected one of {})", AXES.join(", ")));
                }
                let start = a.start.or(parse(&map, "start")?);
                let stop = a.stop.or(parse(&map, "stop")?);
                let steps = a.steps.or(parse(&map, "steps")?);
                let (Some(start), Some(stop), Some(steps)) = (start, stop, steps) else {
                    return err("sweep needs --start, --stop and --steps");
                };
                if steps < 2 {
                    return err(format!("steps = {steps}: need at least 2"));
                }
                if !start.is_finite() || !stop.is_finite() {
                    return err("sweep range must be finite");
                }
                let point = a.params.or(file_params(&map)?).resolve(solver, Some(&axis))?;
                let sweep = SweepAxis { name: axis, start, stop, steps };
                for v in [start, stop] {
                    check_point(solver, &point.with(&sweep.name, v)?)?;
                }
                (common, Job::Sweep(solver, point, sweep))
            }
            Command::Memoryless(a) | Command::Memory(a) | Command::Finite(a) => {
                let solver = match name {
                    "memoryless" => Solver::Memoryless,
                    "memory" => Solver::Memory,
                    _ => Solver::Finite,
                };
                let (common, map) = common_of(a.common)?;
                if let Some(c) = map.get("command") {
                    if c != solver.as_str() {
                        return err(format!("config is for '{c}', not '{}'", solver.as_str()));
                    }
                }
                if let Some(k) = ["axis", "start", "stop", "steps"].iter().find(|k| map.contains_key(**k)) {
                    return err(format!("key '{k}' only applies to sweep"));
                }
                let point = a.params.or(file_params(&map)?).resolve(solver, None)?;
                check_point(solver, &point)?;
                (common, Job::Point(solver, point))
            }
        };
        Ok(RunConfig { format: format_for(&common), output: common.output, job })
    }
}

impl Cli {
    fn command_name(&self) -> &'static str {
        match self.command {
            Command::Memoryless(_) => "memoryless",
            Command::Memory(_) => "memory",
            Command::Finite(_) => "finite",
            Command::Sweep(_) => "sweep",
            Command::Verify(_) => "verify",
        }
    }
}
