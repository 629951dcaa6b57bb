mod commands;
mod table;

use clap::{Args, Parser, Subcommand, ValueEnum};
use classplan::{Error, Scenario};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Test-set sizing, power planning and learning-curve simulation for
/// classifier validation.
#[derive(Debug, Clone, Parser, Serialize, Deserialize)]
#[command(name = "classplan", version, about)]
pub struct Cli {
    #[command(flatten)]
    pub globals: Globals,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct Globals {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "CLASSPLAN_THREADS")]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write results here instead of standard output.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Decimals for proportions and other reals.
    #[arg(long, global = true, default_value_t = 4)]
    pub precision: usize,
    /// Manifest path; defaults to `<output>.manifest.json` when `--output` is set.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct IntervalArgs {
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// central, hpd, equal-tailed or clopper-pearson.
    #[arg(long, default_value = "central")]
    pub method: String,
    #[arg(long, default_value_t = 1.0)]
    pub prior_a: f64,
    #[arg(long, default_value_t = 1.0)]
    pub prior_b: f64,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Credible interval for an observed proportion.
    Ci {
        /// Successes; may be fractional.
        #[arg(long)]
        k: f64,
        /// Trials.
        #[arg(long)]
        n: f64,
        #[command(flatten)]
        interval: IntervalArgs,
    },
    /// Test cases needed for an interval no wider than `--width`.
    Ntest {
        /// Expected proportion; omit for the worst case 0.5.
        #[arg(long)]
        p_hat: Option<f64>,
        #[arg(long)]
        width: f64,
        #[arg(long, default_value_t = classplan::binom_ci::DEFAULT_NTEST_CAP)]
        cap: u64,
        #[command(flatten)]
        interval: IntervalArgs,
    },
    /// Intervals over a grid of proportions and test sizes.
    CiTable {
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 0.75, 0.9, 0.95, 0.975, 1.0])]
        p_hat: Vec<f64>,
        /// Test sizes: `first:last` (inclusive) or a comma list.
        #[arg(long, default_value = "1:500")]
        n: String,
        #[command(flatten)]
        interval: IntervalArgs,
    },
    /// Normal-approximation power of the two-proportion test.
    Power {
        #[arg(long)]
        p1: f64,
        #[arg(long)]
        p2: f64,
        #[arg(long)]
        n1: f64,
        #[arg(long)]
        n2: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Monte Carlo power of the two-proportion test.
    PowerSim {
        #[arg(long)]
        p1: f64,
        #[arg(long)]
        p2: f64,
        #[arg(long)]
        n1: f64,
        #[arg(long)]
        n2: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 100_000)]
        reps: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Sample size for comparing two proportions.
    Samsize {
        #[arg(long)]
        p1: f64,
        #[arg(long)]
        p2: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 0.8)]
        power: f64,
        /// Share of the total in group 1.
        #[arg(long, default_value_t = 0.5)]
        fraction: f64,
    },
    /// Test cases for a new model when the old one was tested on `--n-old`.
    NNew {
        #[arg(long)]
        p_old: f64,
        #[arg(long)]
        n_old: u64,
        #[arg(long)]
        p_new: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 0.8)]
        power: f64,
    },
    /// Draw a labelled Gaussian dataset.
    Simulate {
        #[arg(long, value_enum, default_value_t = ProblemKind::Simplex)]
        problem: ProblemKind,
        #[arg(long, default_value_t = 5)]
        classes: usize,
        #[arg(long, default_value_t = 20)]
        dim: usize,
        #[arg(long, default_value_t = 3.25)]
        separation: f64,
        /// Give every class its own random covariance.
        #[arg(long)]
        random_cov: bool,
        #[arg(long)]
        n_per_class: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write the compact binary format (requires `--output`).
        #[arg(long)]
        binary: bool,
    },
    /// Run a learning-curve scenario from a TOML or JSON file.
    LearningCurve { config: PathBuf },
    /// Rerun the command recorded in a manifest.
    Replay { manifest: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Simplex,
    Mimic,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub globals: Globals,
    pub command: Command,
    /// Resolved scenario of a learning-curve run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

/// Usage problems, numeric infeasibility and I/O map to distinct exit codes.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Infeasible { .. }
        | Error::CapExceeded { .. }
        | Error::NoConvergence { .. }
        | Error::Singular(_)
        | Error::UndefinedMetric(_)
        | Error::MissingClassInFold { .. } => 2,
        Error::Io(_) | Error::Csv(_) => 3,
        _ => 1,
    }
}

pub fn manifest_path(globals: &Globals) -> Option<PathBuf> {
    globals.manifest.clone().or_else(|| {
        globals.output.as_ref().map(|o| {
            let mut name = o.as_os_str().to_owned();
            name.push(".manifest.json");
            PathBuf::from(name)
        })
    })
}

/// The reader went away, e.g. `| head`.
fn is_broken_pipe(e: &Error) -> bool {
    let kind = match e {
        Error::Io(e) => Some(e.kind()),
        Error::Csv(e) => match e.kind() {
            csv::ErrorKind::Io(e) => Some(e.kind()),
            _ => None,
        },
        Error::Json(e) => e.io_error_kind(),
        _ => None,
    };
    kind == Some(std::io::ErrorKind::BrokenPipe)
}

fn read_manifest(path: &Path) -> classplan::Result<Manifest> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.globals.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match &cli.command {
        Command::Replay { manifest } => read_manifest(manifest).and_then(|m| {
            let mut globals = m.globals.clone();
            if cli.globals.output.is_some() {
                globals.output = cli.globals.output.clone();
                globals.manifest = cli.globals.manifest.clone();
            }
            commands::run(&globals, &m.command, m.scenario)
        }),
        command => commands::run(&cli.globals, command, None),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
