//! `rpm-monitor` command-line front end.
//!
//! Every invocation reads a single JSON config (`--config PATH`). Exit codes:
//! 0 ok, 2 validation, 3 convergence, 4 IO.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asymptotic;
use crate::bench::{self, SweepParam, SweepSpec};
use crate::model::{ModelParams, State, Tier};
use crate::policy::{self, Policy, PolicyClass};
use crate::sim;
use crate::solver::{self, SolveResult, SolverError};

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "rpm-monitor",
    version,
    about = "Optimal two-tier patient monitoring policies"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for output artifacts.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Value iteration for the optimal policy.
    Solve,
    /// Asymptotic closed forms and sufficient conditions.
    Check,
    /// Monte Carlo value estimate under a policy.
    Simulate,
    /// One-parameter sweep of the optimal policy class.
    Sweep,
    /// Solver values against the asymptotic approximation.
    Compare,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Check => "check",
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
            Command::Compare => "compare",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Convergence(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Convergence(_) => EXIT_CONVERGENCE,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::NotConverged(_) => CliError::Convergence(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<sim::SimError> for CliError {
    fn from(e: sim::SimError) -> Self {
        match e {
            sim::SimError::Io(_) | sim::SimError::Csv(_) => CliError::Io(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<bench::BenchError> for CliError {
    fn from(e: bench::BenchError) -> Self {
        match e {
            bench::BenchError::Io(_) | bench::BenchError::Csv(_) => CliError::Io(e.to_string()),
            bench::BenchError::Solver(s) => s.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Policy selector for `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicySpec {
    Optimal,
    Ordinary,
    Intensive,
    Threshold(usize),
    TwoThreshold(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub start: State,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_policy")]
    pub policy: PolicySpec,
}

fn default_n() -> usize {
    10_000
}

fn default_policy() -> PolicySpec {
    PolicySpec::Optimal
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub free: SweepParam,
    #[serde(default)]
    pub grid: Option<Vec<f64>>,
    #[serde(default)]
    pub range: Option<GridRange>,
    #[serde(default)]
    pub annotate_boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub simulate: Option<SimulateConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

fn default_epsilon() -> f64 {
    solver::DEFAULT_EPSILON
}

fn default_max_iter() -> usize {
    solver::DEFAULT_MAX_ITER
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| CliError::Validation(format!("config {}: {}", e.path(), e.inner())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn validate(&self) -> Result<(), CliError> {
        let report = self.model.validate();
        if !report.is_ok() {
            let msgs: Vec<String> = report
                .violations
                .iter()
                .map(|v| format!("model.{}: {}", v.field, v.message))
                .collect();
            return Err(CliError::Validation(msgs.join("\n")));
        }
        if !(self.epsilon > 0.0) {
            return Err(CliError::Validation("epsilon: must be > 0".into()));
        }
        if self.max_iter < 1 {
            return Err(CliError::Validation("max_iter: must be ≥ 1".into()));
        }
        if let Some(s) = &self.simulate {
            if s.start.h > self.model.h_max {
                return Err(CliError::Validation(format!(
                    "simulate.start.h: {} exceeds H = {}",
                    s.start.h, self.model.h_max
                )));
            }
        }
        if let Some(s) = &self.sweep {
            if s.grid.is_some() == s.range.is_some() {
                return Err(CliError::Validation(
                    "sweep: give exactly one of grid or range".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec, CliError> {
        let s = self
            .sweep
            .as_ref()
            .ok_or_else(|| CliError::Validation("sweep: missing section".into()))?;
        let grid = match (&s.grid, &s.range) {
            (Some(g), _) => g.clone(),
            (None, Some(r)) => bench::linear_grid(r.start, r.stop, r.step),
            (None, None) => Vec::new(),
        };
        Ok(SweepSpec {
            base: self.model,
            free: s.free,
            grid,
            annotate_boundary: s.annotate_boundary,
        })
    }
}

#[derive(Debug, Serialize)]
struct SolveReport<'a> {
    model: &'a ModelParams,
    policy_class: PolicyClass,
    result: &'a SolveResult,
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn write_artifact(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn value_table(r: &SolveResult) -> String {
    let mut s = String::from("h    ");
    for h in 0..r.values.ordinary.len() {
        s.push_str(&format!("{h:>12}"));
    }
    for tier in Tier::ALL {
        s.push_str(&format!("\nV({}) ", tier));
        for v in r.values.row(tier) {
            s.push_str(&format!("{v:>12.6}"));
        }
    }
    s.push('\n');
    s
}

fn resolve_policy(cfg: &RunConfig, spec: &PolicySpec) -> Result<Policy, CliError> {
    let h = cfg.model.h_max;
    let bad = |e: policy::PolicyError| CliError::Validation(format!("simulate.policy: {e}"));
    Ok(match spec {
        PolicySpec::Optimal => solver::value_iteration(&cfg.model, cfg.epsilon, cfg.max_iter)?.policy,
        PolicySpec::Ordinary => policy::make_constant(h, Tier::Ordinary),
        PolicySpec::Intensive => policy::make_constant(h, Tier::Intensive),
        PolicySpec::Threshold(h_bar) => policy::make_threshold(h, *h_bar).map_err(bad)?,
        PolicySpec::TwoThreshold(lo, hi) => policy::make_two_threshold(h, *lo, *hi).map_err(bad)?,
    })
}

fn wants(format: Option<Format>, f: Format) -> bool {
    format.is_none() || format == Some(f)
}

/// Runs one command, writing human-readable output to `stdout` and the run
/// header to `stderr`.
pub fn run(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Validation("--config PATH is required".into()))?;
    let cfg = RunConfig::load(path)?;
    let seed = cli
        .seed
        .or_else(|| cfg.simulate.as_ref().map(|s| s.seed))
        .unwrap_or(0);
    if !cli.quiet {
        writeln!(
            stderr,
            "{} {} command={} seed={} generator={}",
            env!("CARGO_PKG_NAME"),
            env!("CARGO_PKG_VERSION"),
            cli.command.name(),
            seed,
            sim::GENERATOR_ID
        )?;
    }
    let json = cli.format == Some(Format::Json);

    match cli.command {
        Command::Solve => {
            let r = solver::value_iteration(&cfg.model, cfg.epsilon, cfg.max_iter)?;
            let report = SolveReport {
                model: &cfg.model,
                policy_class: r.policy.classify(),
                result: &r,
            };
            let text = to_json(&report);
            if json {
                stdout.write_all(text.as_bytes())?;
            } else {
                writeln!(stdout, "policy class: {}", report.policy_class)?;
                writeln!(stdout, "{}", r.policy)?;
                stdout.write_all(value_table(&r).as_bytes())?;
                writeln!(
                    stdout,
                    "iterations: {}  residual: {:e}",
                    r.iterations, r.final_residual
                )?;
            }
            if let Some(dir) = &cli.out {
                write_artifact(dir, "solve.json", text.as_bytes())?;
            }
        }
        Command::Check => {
            let report = asymptotic::report(&cfg.model).map_err(|e| CliError::Validation(e.to_string()))?;
            let text = to_json(&report);
            if json {
                stdout.write_all(text.as_bytes())?;
            } else {
                stdout.write_all(report.table().as_bytes())?;
            }
            if let Some(dir) = &cli.out {
                write_artifact(dir, "check.json", text.as_bytes())?;
            }
        }
        Command::Simulate => {
            let sc = cfg
                .simulate
                .clone()
                .ok_or_else(|| CliError::Validation("simulate: missing section".into()))?;
            let pol = resolve_policy(&cfg, &sc.policy)?;
            let est = sim::estimate_value(&cfg.model, &pol, sc.start, sc.n, seed)?;
            let text = to_json(&est);
            if json {
                stdout.write_all(text.as_bytes())?;
            } else {
                writeln!(
                    stdout,
                    "V({}) ≈ {} ± {} (n = {}, seed = {})",
                    sc.start, est.mean, est.stderr, est.n, est.seed
                )?;
            }
            if let Some(dir) = &cli.out {
                write_artifact(dir, "estimate.json", text.as_bytes())?;
                let tr = sim::simulate(
                    &cfg.model,
                    &pol,
                    sc.start,
                    seed,
                    sim::value_horizon(cfg.model.gamma),
                )?;
                let mut buf = Vec::new();
                tr.write_csv(&mut buf)?;
                write_artifact(dir, "trajectory.csv", &buf)?;
            }
        }
        Command::Sweep => {
            let spec = cfg.sweep_spec()?;
            let out = bench::run_sweep(&spec)?;
            let mut csv_buf = Vec::new();
            out.write_csv(&mut csv_buf)?;
            if json {
                stdout.write_all(to_json(&out).as_bytes())?;
            } else {
                stdout.write_all(&csv_buf)?;
                if !out.boundary.is_empty() {
                    let b: Vec<String> = out.boundary.iter().map(|x| format!("{x:.6}")).collect();
                    writeln!(stdout, "# closed-form boundary: {}", b.join(", "))?;
                }
            }
            if let Some(dir) = &cli.out {
                if wants(cli.format, Format::Csv) {
                    write_artifact(dir, "sweep.csv", &csv_buf)?;
                }
                if wants(cli.format, Format::Svg) {
                    write_artifact(dir, "sweep.svg", out.to_svg(cfg.model.h_max).as_bytes())?;
                }
                if cli.format == Some(Format::Json) {
                    write_artifact(dir, "sweep.json", to_json(&out).as_bytes())?;
                }
            }
        }
        Command::Compare => {
            let rows = bench::value_comparison(&cfg.model)?;
            let mut csv_buf = Vec::new();
            bench::write_comparison_csv(&rows, &mut csv_buf)?;
            if json {
                stdout.write_all(to_json(&rows).as_bytes())?;
            } else {
                writeln!(stdout, "{:>4} {:>14} {:>14}", "h", "v_numeric", "v_asymptotic")?;
                for r in &rows {
                    writeln!(
                        stdout,
                        "{:>4} {:>14.6} {:>14.6}",
                        r.h, r.v_numeric, r.v_asymptotic
                    )?;
                }
                writeln!(stdout, "max relative gap: {:.6}", bench::max_relative_gap(&rows))?;
            }
            if let Some(dir) = &cli.out {
                if cli.format == Some(Format::Json) {
                    write_artifact(dir, "compare.json", to_json(&rows).as_bytes())?;
                } else {
                    write_artifact(dir, "compare.csv", &csv_buf)?;
                }
            }
        }
    }
    Ok(())
}

/// Parses process arguments, runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { 0 };
        }
    };
    let stdout = io::stdout();
    let stderr = io::stderr();
    match run(&cli, &mut stdout.lock(), &mut stderr.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
