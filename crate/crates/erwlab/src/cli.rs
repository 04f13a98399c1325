//! Command execution layer: run configuration, the text formats (grid
//! specs, step-law specs, CSV schemas, JSON reports), and the dispatcher
//! the `erwlab` binary wraps.
//!
//! Everything written here is deterministic for a fixed seed: floats are
//! serialized in shortest round-trip form, report assembly is keyed by
//! replica/grid index, and the rayon pool size never affects file bytes.
//! Exit code classes: 0 success, 2 configuration, 3 resource budget,
//! 4 numerical floor.

use crate::exact::{
    build_coeffs, dp_distribution, exact_statistic_dist, ExactError, DP_BUDGET,
};
use crate::experiments::{
    lil_scan, rate_fit, superdiffusive_diagnostic, ExperimentError, RateMode, RateReport,
};
use crate::metrics::{Metric, MetricsError};
use crate::process::{
    geometric_checkpoints, simulate_collapsed, simulate_literal, Normalization, ProcessError,
    SimulatorKind, StepLaw, WalkParams,
};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const ENV_THREADS: &str = "ERWLAB_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("resource budget: {0}")]
    Budget(String),
    #[error("numerical floor: {0}")]
    Floor(String),
    #[error("io on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Budget(_) => 3,
            CliError::Floor(_) => 4,
        }
    }
}

impl From<ExactError> for CliError {
    fn from(e: ExactError) -> Self {
        match e {
            ExactError::DpBudget { .. } => CliError::Budget(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<ProcessError> for CliError {
    fn from(e: ProcessError) -> Self {
        match e {
            ProcessError::Exact(ExactError::DpBudget { .. }) => CliError::Budget(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e.exit_class() {
            3 => CliError::Budget(e.to_string()),
            4 => CliError::Floor(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Exact,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    Kolmogorov,
    Wr,
    Zeta1,
    Zeta2,
}

/// The full description of one run. Parses from and serializes to JSON
/// losslessly; the same shape is accepted through `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub out: PathBuf,
    #[serde(flatten)]
    pub command: CommandConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum CommandConfig {
    Simulate {
        p: f64,
        q: f64,
        steps: String,
        n: u64,
        seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        checkpoints: Option<String>,
        simulator: SimulatorKind,
        format: OutputFormat,
    },
    ExactCoeffs {
        p: f64,
        n: u64,
        format: OutputFormat,
    },
    ExactDist {
        p: f64,
        q: f64,
        n: u64,
        format: OutputFormat,
    },
    ExactMoments {
        p: f64,
        q: f64,
        n: u64,
        format: OutputFormat,
    },
    Distance {
        p: f64,
        q: f64,
        steps: String,
        metric: MetricName,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r: Option<f64>,
        mode: RunMode,
        n: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        m: Option<u64>,
        seed: u64,
        alpha: f64,
    },
    Rates {
        p: f64,
        q: f64,
        steps: String,
        metric: MetricName,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rho: Option<f64>,
        mode: RunMode,
        grid: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        m: Option<u64>,
        seed: u64,
    },
    Lil {
        p: f64,
        q: f64,
        steps: String,
        n_max: u64,
        trajectories: u64,
        seed: u64,
        burn_in: u64,
    },
    Superdiffusive {
        p: f64,
        q: f64,
        steps: String,
        n: u64,
        m: u64,
        seed: u64,
    },
}

impl RunConfig {
    pub fn from_json_str(s: &str) -> Result<RunConfig, CliError> {
        serde_json::from_str(s).map_err(|e| CliError::Config(format!("config parse: {e}")))
    }

    pub fn from_json_bytes(b: &[u8]) -> Result<RunConfig, CliError> {
        serde_json::from_slice(b).map_err(|e| CliError::Config(format!("config parse: {e}")))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

// ---------------------------------------------------------------------------
// Text-format parsers
// ---------------------------------------------------------------------------

/// Geometric grid spec `start:stop:x<factor>`, e.g. `64:16384:x2` for the
/// powers of two from 64 to 16384. Points are round(start * factor^k),
/// deduplicated, while they stay at or below stop.
pub fn parse_grid(spec: &str) -> Result<Vec<u64>, CliError> {
    let bad = |msg: &str| CliError::Config(format!("grid spec '{spec}': {msg}"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad("expected start:stop:x<factor>"));
    }
    let start: u64 = parts[0]
        .parse()
        .map_err(|_| bad("start must be a positive integer"))?;
    let stop: u64 = parts[1]
        .parse()
        .map_err(|_| bad("stop must be a positive integer"))?;
    let factor: f64 = parts[2]
        .strip_prefix('x')
        .ok_or_else(|| bad("factor must be written as x<factor>"))?
        .parse()
        .map_err(|_| bad("factor must be a number"))?;
    if start == 0 {
        return Err(bad("start must be at least 1"));
    }
    if stop < start {
        return Err(bad("stop must be >= start"));
    }
    if !(factor.is_finite() && factor > 1.0) {
        return Err(bad("factor must be finite and > 1"));
    }
    let mut out = Vec::new();
    let mut k = 0i32;
    loop {
        let v = (start as f64 * factor.powi(k)).round();
        if !v.is_finite() || v > stop as f64 {
            break;
        }
        let v = v as u64;
        if out.last() != Some(&v) {
            out.push(v);
        }
        if out.len() > 100_000 {
            return Err(bad("grid would exceed 100000 points"));
        }
        k += 1;
    }
    if out.is_empty() {
        return Err(bad("grid is empty"));
    }
    Ok(out)
}

/// Step-law spec:
///   `constant` | `exponential` | `lognormal:<sigma>` |
///   `twopoint:<a>,<b>,<w>` | `pareto:<alpha>`
/// Raw parameters; the law is normalized to mean one on construction.
pub fn parse_step_spec(spec: &str) -> Result<StepLaw, CliError> {
    let bad = |msg: String| CliError::Config(format!("step spec '{spec}': {msg}"));
    let (kind, args) = match spec.split_once(':') {
        Some((k, a)) => (k, Some(a)),
        None => (spec, None),
    };
    let no_args = |law: StepLaw| -> Result<StepLaw, CliError> {
        if args.is_some() {
            Err(bad("takes no parameters".into()))
        } else {
            Ok(law)
        }
    };
    let one_f64 = || -> Result<f64, CliError> {
        args.ok_or_else(|| bad("missing parameter".into()))?
            .parse()
            .map_err(|_| bad("parameter must be a number".into()))
    };
    match kind {
        "constant" => no_args(StepLaw::constant()),
        "exponential" => no_args(StepLaw::exponential()),
        "lognormal" => StepLaw::log_normal(one_f64()?).map_err(|e| bad(e.to_string())),
        "pareto" => StepLaw::pareto(one_f64()?).map_err(|e| bad(e.to_string())),
        "twopoint" => {
            let args = args.ok_or_else(|| bad("missing parameters".into()))?;
            let fields: Vec<&str> = args.split(',').collect();
            if fields.len() != 3 {
                return Err(bad("expected a,b,w".into()));
            }
            let mut nums = [0.0f64; 3];
            for (slot, f) in nums.iter_mut().zip(&fields) {
                *slot = f
                    .parse()
                    .map_err(|_| bad(format!("'{f}' is not a number")))?;
            }
            StepLaw::two_point(nums[0], nums[1], nums[2]).map_err(|e| bad(e.to_string()))
        }
        other => Err(bad(format!(
            "unknown kind '{other}' (constant, exponential, lognormal, twopoint, pareto)"
        ))),
    }
}

pub fn resolve_metric(name: MetricName, r: Option<f64>) -> Result<Metric, CliError> {
    match name {
        MetricName::Kolmogorov | MetricName::Zeta1 | MetricName::Zeta2 => {
            if r.is_some() {
                return Err(CliError::Config(
                    "--r only applies to the wr metric".into(),
                ));
            }
            Ok(match name {
                MetricName::Kolmogorov => Metric::Kolmogorov,
                MetricName::Zeta1 => Metric::Zeta1,
                _ => Metric::Zeta2,
            })
        }
        MetricName::Wr => {
            let r = r.ok_or_else(|| CliError::Config("metric wr requires --r".into()))?;
            if r.is_finite() && r > 0.0 && r <= 2.0 {
                Ok(Metric::Wasserstein { r })
            } else {
                Err(CliError::Config(format!(
                    "wasserstein order r must lie in (0, 2], got {r}"
                )))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// CSV schemas
// ---------------------------------------------------------------------------

fn parse_csv<T>(
    text: &str,
    header: &str,
    fields: usize,
    mut row: impl FnMut(&[&str]) -> Option<T>,
) -> Result<Vec<T>, CliError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == header => {}
        _ => return Err(CliError::Config(format!("expected header '{header}'"))),
    }
    let mut out = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != fields {
            return Err(CliError::Config(format!(
                "row {}: expected {fields} fields, got {}",
                idx + 2,
                cols.len()
            )));
        }
        match row(&cols) {
            Some(v) => out.push(v),
            None => {
                return Err(CliError::Config(format!("row {}: malformed values", idx + 2)))
            }
        }
    }
    Ok(out)
}

fn parse_finite(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub n: u64,
    pub t: i64,
    pub s: f64,
    pub h: f64,
}

pub const TRAJECTORY_HEADER: &str = "n,T,S,H";

pub fn write_trajectory_csv(rows: &[TrajectoryRow]) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.n, r.t, r.s, r.h));
    }
    out
}

pub fn parse_trajectory_csv(text: &str) -> Result<Vec<TrajectoryRow>, CliError> {
    parse_csv(text, TRAJECTORY_HEADER, 4, |c| {
        Some(TrajectoryRow {
            n: c[0].parse().ok()?,
            t: c[1].parse().ok()?,
            s: parse_finite(c[2])?,
            h: parse_finite(c[3])?,
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoeffsRow {
    pub n: u64,
    pub gamma: f64,
    pub a: f64,
    pub v: f64,
}

pub const COEFFS_HEADER: &str = "n,gamma,a,v";

pub fn write_coeffs_csv(rows: &[CoeffsRow]) -> String {
    let mut out = String::from(COEFFS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.n, r.gamma, r.a, r.v));
    }
    out
}

pub fn parse_coeffs_csv(text: &str) -> Result<Vec<CoeffsRow>, CliError> {
    parse_csv(text, COEFFS_HEADER, 4, |c| {
        Some(CoeffsRow {
            n: c[0].parse().ok()?,
            gamma: parse_finite(c[1])?,
            a: parse_finite(c[2])?,
            v: parse_finite(c[3])?,
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistRow {
    pub t: i64,
    pub prob: f64,
}

pub const DIST_HEADER: &str = "t,prob";

pub fn write_dist_csv(rows: &[DistRow]) -> String {
    let mut out = String::from(DIST_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{}\n", r.t, r.prob));
    }
    out
}

pub fn parse_dist_csv(text: &str) -> Result<Vec<DistRow>, CliError> {
    parse_csv(text, DIST_HEADER, 2, |c| {
        Some(DistRow {
            t: c[0].parse().ok()?,
            prob: parse_finite(c[1])?,
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentsRow {
    pub n: u64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub var_m: f64,
}

pub const MOMENTS_HEADER: &str = "n,m1,m2,m3,varM";

pub fn write_moments_csv(rows: &[MomentsRow]) -> String {
    let mut out = String::from(MOMENTS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{},{},{},{}\n", r.n, r.m1, r.m2, r.m3, r.var_m));
    }
    out
}

pub fn parse_moments_csv(text: &str) -> Result<Vec<MomentsRow>, CliError> {
    parse_csv(text, MOMENTS_HEADER, 5, |c| {
        Some(MomentsRow {
            n: c[0].parse().ok()?,
            m1: parse_finite(c[1])?,
            m2: parse_finite(c[2])?,
            m3: parse_finite(c[3])?,
            var_m: parse_finite(c[4])?,
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateGridRow {
    pub n: u64,
    pub distance: f64,
    pub band: Option<(f64, f64)>,
}

pub const RATE_GRID_HEADER: &str = "n,distance,band_lo,band_hi";

pub fn write_rate_grid_csv(rows: &[RateGridRow]) -> String {
    let mut out = String::from(RATE_GRID_HEADER);
    out.push('\n');
    for r in rows {
        match r.band {
            Some((lo, hi)) => out.push_str(&format!("{},{},{},{}\n", r.n, r.distance, lo, hi)),
            None => out.push_str(&format!("{},{},,\n", r.n, r.distance)),
        }
    }
    out
}

pub fn parse_rate_grid_csv(text: &str) -> Result<Vec<RateGridRow>, CliError> {
    parse_csv(text, RATE_GRID_HEADER, 4, |c| {
        let band = match (c[2], c[3]) {
            ("", "") => None,
            (lo, hi) => Some((parse_finite(lo)?, parse_finite(hi)?)),
        };
        Some(RateGridRow {
            n: c[0].parse().ok()?,
            distance: parse_finite(c[1])?,
            band,
        })
    })
}

// ---------------------------------------------------------------------------
// Report files
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct ParamsFile<'a> {
    p: f64,
    q: f64,
    steps: &'a str,
}

#[derive(Debug, Serialize)]
struct DistanceFile<'a> {
    metric: MetricName,
    #[serde(skip_serializing_if = "Option::is_none")]
    r: Option<f64>,
    value: f64,
    band: Option<(f64, f64)>,
    n: u64,
    m: Option<u64>,
    params: ParamsFile<'a>,
    mode: RunMode,
    mean_shift: Option<f64>,
}

#[derive(Debug, Serialize)]
struct RatesFile<'a> {
    metric: Metric,
    p: f64,
    q: f64,
    sigma2: f64,
    steps: &'a str,
    mode: crate::experiments::RateMode,
    seed: u64,
    fitted_slope: Option<f64>,
    fitted_stderr: Option<f64>,
    theory_exponent: f64,
    theory_logarithmic: bool,
    theory_rate_terms: &'a str,
    dropped: usize,
    grid: &'a [crate::experiments::GridPoint],
}

impl<'a> RatesFile<'a> {
    fn new(report: &'a RateReport, steps: &'a str, seed: u64) -> Self {
        RatesFile {
            metric: report.metric,
            p: report.p,
            q: report.q,
            sigma2: report.sigma2,
            steps,
            mode: report.mode,
            seed,
            fitted_slope: report.fitted.map(|f| f.slope),
            fitted_stderr: report.fitted.map(|f| f.stderr),
            theory_exponent: report.theory.exponent,
            theory_logarithmic: report.theory.logarithmic,
            theory_rate_terms: &report.theory.rate_terms,
            dropped: report.dropped,
            grid: &report.grid,
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn companion_csv_path(out: &Path) -> PathBuf {
    let with_csv = out.with_extension("csv");
    if with_csv == out {
        let mut name = out.as_os_str().to_owned();
        name.push(".grid.csv");
        PathBuf::from(name)
    } else {
        with_csv
    }
}

fn json_line(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

fn thread_count(config: &RunConfig) -> Result<Option<usize>, CliError> {
    if let Some(t) = config.threads {
        return Ok(Some(t));
    }
    match std::env::var(ENV_THREADS) {
        Ok(s) => s
            .parse::<usize>()
            .map(Some)
            .map_err(|_| CliError::Config(format!("{ENV_THREADS} must be an integer, got '{s}'"))),
        Err(_) => Ok(None),
    }
}

/// Runs one configured command, writing its report file(s). Internal
/// parallelism is confined to a local rayon pool sized by `threads` (or the
/// `ERWLAB_THREADS` variable, or all cores); the pool size never changes the
/// output bytes.
pub fn execute(config: &RunConfig) -> Result<(), CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = thread_count(config)? {
        if t == 0 {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_command(config))
}

fn run_command(config: &RunConfig) -> Result<(), CliError> {
    let out = &config.out;
    match &config.command {
        CommandConfig::Simulate {
            p,
            q,
            steps,
            n,
            seed,
            checkpoints,
            simulator,
            format,
        } => {
            let params = WalkParams::new(*p, *q, parse_step_spec(steps)?)?;
            let cps = match checkpoints {
                Some(spec) => parse_grid(spec)?,
                None => geometric_checkpoints(*n),
            };
            let traj = match simulator {
                SimulatorKind::Literal => simulate_literal(&params, *n, *seed, &cps)?,
                SimulatorKind::Collapsed => simulate_collapsed(&params, *n, *seed, &cps)?,
            };
            let rows: Vec<TrajectoryRow> = traj
                .checkpoints
                .iter()
                .map(|c| TrajectoryRow {
                    n: c.n,
                    t: c.t,
                    s: c.s,
                    h: c.h,
                })
                .collect();
            match format {
                OutputFormat::Csv => write_file(out, &write_trajectory_csv(&rows)),
                OutputFormat::Json => write_file(out, &json_line(&traj.checkpoints)),
            }
        }

        CommandConfig::ExactCoeffs { p, n, format } => {
            let coeffs = build_coeffs(*p, *n as usize)?;
            let rows: Vec<CoeffsRow> = (1..=*n as usize)
                .map(|k| CoeffsRow {
                    n: k as u64,
                    gamma: coeffs.gamma(k),
                    a: coeffs.a(k),
                    v: coeffs.v(k),
                })
                .collect();
            match format {
                OutputFormat::Csv => write_file(out, &write_coeffs_csv(&rows)),
                OutputFormat::Json => write_file(out, &json_line(&rows_to_json(&rows))),
            }
        }

        CommandConfig::ExactDist { p, q, n, format } => {
            let dist = dp_distribution(*p, *q, *n as usize)?;
            let rows: Vec<DistRow> = dist
                .points()
                .map(|(t, prob)| DistRow { t, prob })
                .collect();
            match format {
                OutputFormat::Csv => write_file(out, &write_dist_csv(&rows)),
                OutputFormat::Json => write_file(out, &json_line(&dist_rows_to_json(&rows))),
            }
        }

        CommandConfig::ExactMoments { p, q, n, format } => {
            let table = crate::exact::moment_recursions(*p, *q, *n as usize)?;
            let coeffs = build_coeffs(*p, *n as usize)?;
            let rows: Vec<MomentsRow> = (1..=*n as usize)
                .map(|k| {
                    let row = MomentsRow {
                        n: k as u64,
                        m1: table.m1(k),
                        m2: table.m2(k),
                        m3: table.m3(k),
                        var_m: table.var_m(k),
                    };
                    assert!(
                        row.var_m <= coeffs.v(k) + 1e-12,
                        "martingale variance exceeds v at n = {k}"
                    );
                    row
                })
                .collect();
            match format {
                OutputFormat::Csv => write_file(out, &write_moments_csv(&rows)),
                OutputFormat::Json => write_file(out, &json_line(&moments_rows_to_json(&rows))),
            }
        }

        CommandConfig::Distance {
            p,
            q,
            steps,
            metric,
            r,
            mode,
            n,
            m,
            seed,
            alpha,
        } => {
            let params = WalkParams::new(*p, *q, parse_step_spec(steps)?)?;
            let met = resolve_metric(*metric, *r)?;
            let alpha = *alpha;
            let (value, band, mean_shift, m_used) = match mode {
                RunMode::Exact => {
                    if !params.step_law().is_constant() {
                        return Err(CliError::Config(
                            "exact mode requires constant steps (sigma^2 = 0)".into(),
                        ));
                    }
                    if *n as usize > DP_BUDGET {
                        return Err(ExactError::DpBudget {
                            n: *n as usize,
                            budget: DP_BUDGET,
                        }
                        .into());
                    }
                    let coeffs = build_coeffs(*p, *n as usize)?;
                    let dist = exact_statistic_dist(*p, *q, *n as usize, &coeffs)?;
                    let value = match met {
                        Metric::Kolmogorov => crate::metrics::kolmogorov_to_normal(&dist),
                        Metric::Wasserstein { r } => {
                            crate::metrics::wasserstein_to_normal(&dist, r)?
                        }
                        Metric::Zeta1 => crate::metrics::zeta1_to_normal(&dist)?,
                        Metric::Zeta2 => crate::metrics::zeta2_to_normal(&dist)?,
                    };
                    (value, None, None, None)
                }
                RunMode::Mc => {
                    let m = m.unwrap_or(100_000);
                    let sample = crate::process::sample_statistic(
                        &params,
                        *n,
                        m,
                        *seed,
                        Normalization::CltCentered,
                    )?;
                    let ecdf = sample.ecdf();
                    let (value, band, shift) = match met {
                        Metric::Kolmogorov => {
                            let rep =
                                crate::metrics::kolmogorov_sample_report(&ecdf, alpha, "mc")?;
                            (rep.value, rep.band, None)
                        }
                        Metric::Wasserstein { r } => (
                            crate::metrics::wasserstein_to_normal(&ecdf.to_discrete(), r)?,
                            None,
                            None,
                        ),
                        Metric::Zeta1 => {
                            (crate::metrics::zeta1_to_normal(&ecdf.to_discrete())?, None, None)
                        }
                        Metric::Zeta2 => {
                            let rep = crate::metrics::zeta2_sample_recentred(&ecdf, "mc")?;
                            (rep.value, None, rep.mean_shift)
                        }
                    };
                    (value, band, shift, Some(m))
                }
            };
            let file = DistanceFile {
                metric: *metric,
                r: *r,
                value,
                band,
                n: *n,
                m: m_used,
                params: ParamsFile {
                    p: *p,
                    q: *q,
                    steps,
                },
                mode: *mode,
                mean_shift,
            };
            write_file(out, &json_line(&file))
        }

        CommandConfig::Rates {
            p,
            q,
            steps,
            metric,
            r,
            rho,
            mode,
            grid,
            m,
            seed,
        } => {
            let params = WalkParams::new(*p, *q, parse_step_spec(steps)?)?;
            let met = resolve_metric(*metric, *r)?;
            let n_grid = parse_grid(grid)?;
            let mode = match mode {
                RunMode::Exact => RateMode::Exact,
                RunMode::Mc => RateMode::MonteCarlo {
                    m: m.unwrap_or(100_000),
                },
            };
            let report = rate_fit(&params, met, &n_grid, mode, *seed, *rho)?;
            let rows: Vec<RateGridRow> = report
                .grid
                .iter()
                .map(|gp| RateGridRow {
                    n: gp.n,
                    distance: gp.distance,
                    band: gp.band,
                })
                .collect();
            write_file(out, &json_line(&RatesFile::new(&report, steps, *seed)))?;
            write_file(&companion_csv_path(out), &write_rate_grid_csv(&rows))
        }

        CommandConfig::Lil {
            p,
            q,
            steps,
            n_max,
            trajectories,
            seed,
            burn_in,
        } => {
            let params = WalkParams::new(*p, *q, parse_step_spec(steps)?)?;
            let report = lil_scan(&params, *n_max, *trajectories, *seed, *burn_in)?;
            #[derive(Serialize)]
            struct LilFile<'a> {
                steps: &'a str,
                seed: u64,
                #[serde(flatten)]
                report: &'a crate::experiments::LilReport,
            }
            write_file(out, &json_line(&LilFile {
                steps,
                seed: *seed,
                report: &report,
            }))?;
            let mut csv = String::from("trajectory,max_statistic\n");
            for (i, v) in report.maxima.iter().enumerate() {
                csv.push_str(&format!("{i},{v}\n"));
            }
            write_file(&companion_csv_path(out), &csv)
        }

        CommandConfig::Superdiffusive {
            p,
            q,
            steps,
            n,
            m,
            seed,
        } => {
            let params = WalkParams::new(*p, *q, parse_step_spec(steps)?)?;
            let report = superdiffusive_diagnostic(&params, *n, *m, *seed)?;
            #[derive(Serialize)]
            struct SuperFile<'a> {
                steps: &'a str,
                seed: u64,
                #[serde(flatten)]
                report: &'a crate::experiments::SuperdiffusiveReport,
            }
            write_file(out, &json_line(&SuperFile {
                steps,
                seed: *seed,
                report: &report,
            }))?;
            let mut csv = String::from("k,median_abs_increment\n");
            for (k, v) in report.martingale_increments {
                csv.push_str(&format!("{k},{v}\n"));
            }
            write_file(&companion_csv_path(out), &csv)
        }
    }
}

// JSON mirrors for the CSV row types, so --format json emits named fields.
fn rows_to_json(rows: &[CoeffsRow]) -> Vec<serde_json::Value> {
    rows.iter()
        .map(|r| serde_json::json!({"n": r.n, "gamma": r.gamma, "a": r.a, "v": r.v}))
        .collect()
}

fn dist_rows_to_json(rows: &[DistRow]) -> Vec<serde_json::Value> {
    rows.iter()
        .map(|r| serde_json::json!({"t": r.t, "prob": r.prob}))
        .collect()
}

fn moments_rows_to_json(rows: &[MomentsRow]) -> Vec<serde_json::Value> {
    rows.iter()
        .map(|r|

            serde_json::json!({"n": r.n, "m1": r.m1, "m2": r.m2, "m3": r.m3, "varM": r.var_m}))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grid_spec_powers_of_two() {
        let g = parse_grid("64:16384:x2").unwrap();
        assert_eq!(g, vec![64, 128, 256, 512, 1024, 2048, 4096, 8192, 16384]);
    }

    #[test]
    fn grid_spec_fractional_factor() {
        let g = parse_grid("10:100:x1.5").unwrap();
        assert_eq!(g.first(), Some(&10));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(*g.last().unwrap() <= 100);
    }

    #[test]
    fn grid_spec_rejects_malformed_input() {
        for bad in [
            "", "64", "64:128", "0:10:x2", "10:5:x2", "10:20:2", "10:20:x1", "10:20:x0.5",
            "a:b:xc", "10:20:xinf", "1:9223372036854775807:x1.0000001",
        ] {
            assert!(parse_grid(bad).is_err(), "accepted '{bad}'");
        }
    }

    #[test]
    fn step_specs_parse() {
        assert_eq!(parse_step_spec("constant").unwrap(), StepLaw::constant());
        assert_eq!(
            parse_step_spec("exponential").unwrap(),
            StepLaw::exponential()
        );
        assert!(matches!(
            parse_step_spec("lognormal:0.5").unwrap(),
            StepLaw::LogNormal { .. }
        ));
        assert!(matches!(
            parse_step_spec("twopoint:1,3,0.5").unwrap(),
            StepLaw::TwoPoint { .. }
        ));
        assert!(matches!(
            parse_step_spec("pareto:3.5").unwrap(),
            StepLaw::Pareto { .. }
        ));
        for bad in [
            "", "gauss", "constant:1", "exponential:2", "lognormal", "lognormal:-1",
            "twopoint:1,2", "twopoint:1,2,3,4", "twopoint:0,2,0.5", "pareto:2",
            "pareto:abc",
        ] {
            assert!(parse_step_spec(bad).is_err(), "accepted '{bad}'");
        }
    }

    #[test]
    fn metric_resolution() {
        assert_eq!(
            resolve_metric(MetricName::Kolmogorov, None).unwrap(),
            Metric::Kolmogorov
        );
        assert!(resolve_metric(MetricName::Kolmogorov, Some(1.0)).is_err());
        assert!(resolve_metric(MetricName::Wr, None).is_err());
        assert!(resolve_metric(MetricName::Wr, Some(3.0)).is_err());
        assert_eq!(
            resolve_metric(MetricName::Wr, Some(1.5)).unwrap(),
            Metric::Wasserstein { r: 1.5 }
        );
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = RunConfig {
            threads: Some(4),
            out: PathBuf::from("out/rates.json"),
            command: CommandConfig::Rates {
                p: 0.5,
                q: 0.5,
                steps: "constant".into(),
                metric: MetricName::Kolmogorov,
                r: None,
                rho: None,
                mode: RunMode::Exact,
                grid: "64:16384:x2".into(),
                m: None,
                seed: 7,
            },
        };
        let json = cfg.to_json_string();
        let back = RunConfig::from_json_str(&json).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn config_rejects_garbage() {
        assert!(RunConfig::from_json_str("").is_err());
        assert!(RunConfig::from_json_str("{}").is_err());
        assert!(RunConfig::from_json_str("{\"command\":\"warp\"}").is_err());
    }

    #[test]
    fn csv_headers_are_bit_specified() {
        assert_eq!(TRAJECTORY_HEADER, "n,T,S,H");
        assert_eq!(COEFFS_HEADER, "n,gamma,a,v");
        assert_eq!(DIST_HEADER, "t,prob");
        assert_eq!(MOMENTS_HEADER, "n,m1,m2,m3,varM");
    }

    #[test]
    fn csv_parsers_reject_malformed_text() {
        assert!(parse_trajectory_csv("").is_err());
        assert!(parse_trajectory_csv("wrong,header\n").is_err());
        assert!(parse_trajectory_csv("n,T,S,H\n1,2\n").is_err());
        assert!(parse_trajectory_csv("n,T,S,H\n1,1,inf,0\n").is_err());
        assert!(parse_dist_csv("t,prob\n0,NaN\n").is_err());
        assert!(parse_rate_grid_csv("n,distance,band_lo,band_hi\n4,0.5,1,\n").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn trajectory_csv_round_trip(
            rows in proptest::collection::vec(
                (1u64..1_000_000, -1000i64..1000, -1e9f64..1e9, -1e9f64..1e9),
                0..40,
            )
        ) {
            let rows: Vec<TrajectoryRow> = rows
                .into_iter()
                .map(|(n, t, s, h)| TrajectoryRow { n, t, s, h })
                .collect();
            let text = write_trajectory_csv(&rows);
            let back = parse_trajectory_csv(&text).unwrap();
            prop_assert_eq!(rows, back);
        }

        #[test]
        fn moments_csv_round_trip(
            rows in proptest::collection::vec(
                (1u64..100_000, -1e12f64..1e12, 0f64..1e12, -1e12f64..1e12, 0f64..1e6),
                0..40,
            )
        ) {
            let rows: Vec<MomentsRow> = rows
                .into_iter()
                .map(|(n, m1, m2, m3, var_m)| MomentsRow { n, m1, m2, m3, var_m })
                .collect();
            let text = write_moments_csv(&rows);
            prop_assert_eq!(rows, parse_moments_csv(&text).unwrap());
        }

        #[test]
        fn rate_grid_cs_round_trip(
            rows in proptest::collection::vec(
                (1u64..1_000_000, 0f64..2.0, proptest::option::of((0f64..1.0, 1f64..2.0))),
                0..20,
            )
        ) {
            let rows: Vec<RateGridRow> = rows
                .into_iter()
                .map(|(n, distance, band)| RateGridRow { n, distance, band })
                .collect();
            let text = write_rate_grid_csv(&rows);
            prop_assert_eq!(rows, parse_rate_grid_csv(&text).unwrap());
        }

        #[test]
        fn coeffs_and_dist_csv_round_trip(
            coeffs in proptest::collection::vec(
                (1u64..1_000_000, 0.5f64..2.0, 0f64..1.0, 0f64..1e6), 0..30),
            dist in proptest::collection::vec((-100i64..100, 0f64..1.0), 0..30),
        ) {
            let coeffs: Vec<CoeffsRow> = coeffs
                .into_iter()
                .map(|(n, gamma, a, v)| CoeffsRow { n, gamma, a, v })
                .collect();
            prop_assert_eq!(
                coeffs.clone(),
                parse_coeffs_csv(&write_coeffs_csv(&coeffs)).unwrap()
            );
            let dist: Vec<DistRow> = dist
                .into_iter()
                .map(|(t, prob)| DistRow { t, prob })
                .collect();
            prop_assert_eq!(dist.clone(), parse_dist_csv(&write_dist_csv(&dist)).unwrap());
        }
    }
}
