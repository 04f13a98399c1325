//! erwlab: simulate the elephant random walk with random step sizes, compute
//! its exact lattice law and normalizing coefficients, measure distances to
//! the standard normal, and fit convergence rates.
//!
//! Exit codes: 0 success, 2 configuration error, 3 resource budget exceeded,
//! 4 numerical floor reached.

use clap::{Args, Parser, Subcommand, ValueEnum};
use erwlab::cli::{
    execute, CliError, CommandConfig, MetricName, OutputFormat, RunConfig, RunMode,
};
use erwlab::process::SimulatorKind;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "erwlab",
    version,
    about = "Elephant random walk laboratory: simulators, exact oracles, normal-distance metrics and rate experiments",
    after_help = "Step law specs: constant | exponential | lognormal:<sigma> | twopoint:<a>,<b>,<w> | pareto:<alpha> \
                  (raw parameters; every law is normalized to mean 1).\n\
                  Grid specs: start:stop:x<factor>, e.g. 64:16384:x2."
)]
struct Cli {
    /// Worker threads (default: all cores; env ERWLAB_THREADS as fallback)
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Run the RunConfig JSON in FILE instead of a subcommand
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SimulatorArg {
    Collapsed,
    Literal,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Kolmogorov,
    Wr,
    Zeta1,
    Zeta2,
}

impl From<MetricArg> for MetricName {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Kolmogorov => MetricName::Kolmogorov,
            MetricArg::Wr => MetricName::Wr,
            MetricArg::Zeta1 => MetricName::Zeta1,
            MetricArg::Zeta2 => MetricName::Zeta2,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Mc,
}

impl From<ModeArg> for RunMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exact => RunMode::Exact,
            ModeArg::Mc => RunMode::Mc,
        }
    }
}

#[derive(Args)]
struct ModelArgs {
    /// Memory parameter, in (0, 1]
    #[arg(long)]
    p: f64,
    /// First-step probability, in (0, 1]
    #[arg(long, default_value_t = 0.5)]
    q: f64,
    /// Step-size law spec
    #[arg(long, default_value = "constant")]
    steps: String,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one trajectory and write its checkpoints (CSV: n,T,S,H)
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        /// Number of steps
        #[arg(long)]
        n: u64,
        /// RNG seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Checkpoint grid spec (default: geometric grid 2^(k/2) up to n)
        #[arg(long)]
        checkpoints: Option<String>,
        /// Which simulator to run
        #[arg(long, value_enum, default_value_t = SimulatorArg::Collapsed)]
        simulator: SimulatorArg,
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
        /// Output path
        #[arg(long, default_value = "trajectory.csv")]
        out: PathBuf,
    },

    /// Exact deterministic tables (coefficients, lattice law, moments)
    Exact {
        #[command(subcommand)]
        what: ExactCommand,
    },

    /// Distance of the normalized statistic to the standard normal
    Distance {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum)]
        metric: MetricArg,
        /// Wasserstein order (wr metric only), in (0, 2]
        #[arg(long)]
        r: Option<f64>,
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Walk length
        #[arg(long)]
        n: u64,
        /// Replicas (mc mode; default 100000)
        #[arg(long)]
        m: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Confidence level for the DKW band
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
        #[arg(long, default_value = "distance.json")]
        out: PathBuf,
    },

    /// Distances on an n grid with a log-log slope fit (JSON + companion CSV)
    Rates {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum)]
        metric: MetricArg,
        #[arg(long)]
        r: Option<f64>,
        /// Moment order rho for the positive-variance rate comparison
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// n grid spec, e.g. 64:16384:x2
        #[arg(long)]
        grid: String,
        /// Replicas per grid point (mc mode; default 100000)
        #[arg(long)]
        m: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "rates.json")]
        out: PathBuf,
    },

    /// Iterated-logarithm envelope scan over many trajectories
    Lil {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1_000_000)]
        n_max: u64,
        #[arg(long, default_value_t = 100)]
        trajectories: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Smallest n entering the per-trajectory maximum
        #[arg(long, default_value_t = 1000)]
        burn_in: u64,
        #[arg(long, default_value = "lil.json")]
        out: PathBuf,
    },

    /// Non-normality diagnostics for the superdiffusive limit proxy
    Superdiffusive {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 100_000)]
        n: u64,
        #[arg(long, default_value_t = 10_000)]
        m: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "superdiffusive.json")]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum ExactCommand {
    /// gamma_n, a_n, v_n table (CSV: n,gamma,a,v)
    Coeffs {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        n: u64,
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
        #[arg(long, default_value = "coeffs.csv")]
        out: PathBuf,
    },
    /// Exact lattice law of the position (CSV: t,prob)
    Dist {
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 0.5)]
        q: f64,
        #[arg(long)]
        n: u64,
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
        #[arg(long, default_value = "distribution.csv")]
        out: PathBuf,
    },
    /// Exact moments and martingale variance (CSV: n,m1,m2,m3,varM)
    Moments {
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 0.5)]
        q: f64,
        #[arg(long)]
        n: u64,
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
        #[arg(long, default_value = "moments.csv")]
        out: PathBuf,
    },
}

fn to_run_config(cli: Cli) -> Result<RunConfig, CliError> {
    if let Some(path) = cli.config {
        if cli.command.is_some() {
            return Err(CliError::Config(
                "--config and a subcommand are mutually exclusive".into(),
            ));
        }
        let bytes = std::fs::read(&path).map_err(|source| CliError::Io { path, source })?;
        let mut cfg = RunConfig::from_json_bytes(&bytes)?;
        if cli.threads.is_some() {
            cfg.threads = cli.threads;
        }
        return Ok(cfg);
    }
    let command = cli
        .command
        .ok_or_else(|| CliError::Config("a subcommand or --config is required".into()))?;
    let (out, command) = match command {
        Command::Simulate {
            model,
            n,
            seed,
            checkpoints,
            simulator,
            format,
            out,
        } => (
            out,
            CommandConfig::Simulate {
                p: model.p,
                q: model.q,
                steps: model.steps,
                n,
                seed,
                checkpoints,
                simulator: match simulator {
                    SimulatorArg::Collapsed => SimulatorKind::Collapsed,
                    SimulatorArg::Literal => SimulatorKind::Literal,
                },
                format: format.into(),
            },
        ),
        Command::Exact { what } => match what {
            ExactCommand::Coeffs { p, n, format, out } => (
                out,
                CommandConfig::ExactCoeffs {
                    p,
                    n,
                    format: format.into(),
                },
            ),
            ExactCommand::Dist { p, q, n, format, out } => (
                out,
                CommandConfig::ExactDist {
                    p,
                    q,
                    n,
                    format: format.into(),
                },
            ),
            ExactCommand::Moments { p, q, n, format, out } => (
                out,
                CommandConfig::ExactMoments {
                    p,
                    q,
                    n,
                    format: format.into(),
                },
            ),
        },
        Command::Distance {
            model,
            metric,
            r,
            mode,
            n,
            m,
            seed,
            alpha,
            out,
        } => (
            out,
            CommandConfig::Distance {
                p: model.p,
                q: model.q,
                steps: model.steps,
                metric: metric.into(),
                r,
                mode: mode.into(),
                n,
                m,
                seed,
                alpha,
            },
        ),
        Command::Rates {
            model,
            metric,
            r,
            rho,
            mode,
            grid,
            m,
            seed,
            out,
        } => (
            out,
            CommandConfig::Rates {
                p: model.p,
                q: model.q,
                steps: model.steps,
                metric: metric.into(),
                r,
                rho,
                mode: mode.into(),
                grid,
                m,
                seed,
            },
        ),
        Command::Lil {
            model,
            n_max,
            trajectories,
            seed,
            burn_in,
            out,
        } => (
            out,
            CommandConfig::Lil {
                p: model.p,
                q: model.q,
                steps: model.steps,
                n_max,
                trajectories,
                seed,
                burn_in,
            },
        ),
        Command::Superdiffusive {
            model,
            n,
            m,
            seed,
            out,
        } => (
            out,
            CommandConfig::Superdiffusive {
                p: model.p,
                q: model.q,
                steps: model.steps,
                n,
                m,
                seed,
            },
        ),
    };
    Ok(RunConfig {
        threads: cli.threads,
        out,
        command,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = to_run_config(cli).and_then(|cfg| execute(&cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("erwlab: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
