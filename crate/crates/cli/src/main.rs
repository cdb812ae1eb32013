use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cip_core::experiments::{
    competition_run, delay_scan, export_delay_scan, export_results, impulse_response_sweep, write_trajectory,
    ExportFormat,
};
use cip_core::learning::{learn_table, reachable_slice, save_table};
use cip_core::validation::{invariant_suite, trajectory, SuiteOptions};
use cip_core::RunConfig;

/// Coupled inverted pendula wrestling: learn classifier tables, simulate and run experiments.
#[derive(Debug, Parser)]
#[command(name = "cip", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (overrides the configured output path).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Per-axis grid resolution for `learn` and `validate`.
    #[arg(long, global = true)]
    resolution: Option<u32>,
    /// Classifier delay of agent 1, s. For `delay-scan`, scan only this delay.
    #[arg(long, global = true)]
    delay: Option<f64>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Run twice and fail unless both runs produce identical output.
    #[arg(long, global = true)]
    seed_check: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Learn a classifier table and save it.
    Learn,
    /// Simulate one trajectory; prints the outcome, optionally writes the trajectory CSV.
    Simulate,
    /// Impulse-response sweep with the configured controllers.
    Sweep,
    /// Repeat the sweep over classifier delays of agent 1.
    DelayScan,
    /// Both agents carry controllers; disturbances on either side.
    Compete,
    /// Export a 2-D slice of a table as CSV.
    Slice,
    /// Run the invariant suite.
    Validate,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] cip_core::ConfigError),
    #[error(transparent)]
    Learning(#[from] cip_core::LearningError),
    #[error(transparent)]
    Experiment(#[from] cip_core::experiments::ExperimentError),
    #[error(transparent)]
    Validation(#[from] cip_core::validation::ValidationError),
    #[error(transparent)]
    Simulation(#[from] cip_core::dynamics::SimError),
    #[error("{path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("{0}")]
    Failed(String),
}

/// What a command produces: files to write and text for stdout.
#[derive(Debug, Default, PartialEq)]
struct Output {
    files: Vec<(PathBuf, Vec<u8>)>,
    stdout: Vec<u8>,
    /// Set when the command ran but its checks did not pass.
    failure: Option<String>,
}

fn format_of(path: &Path) -> ExportFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => ExportFormat::Json,
        _ => ExportFormat::Csv,
    }
}

impl Cli {
    fn out_or(&self, configured: &Option<PathBuf>) -> Option<PathBuf> {
        self.out.clone().or_else(|| configured.clone())
    }

    fn load_config(&self) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(d) = self.delay {
            if let Some(a) = c.controllers.agent1.as_mut() {
                a.tau_d = d;
            }
            c.delays = vec![d];
        }
        c.validate()?;
        Ok(c)
    }

    fn run(&self, c: &RunConfig) -> Result<Output, CliError> {
        let mut out = Output::default();
        match self.command {
            Command::Learn => {
                let path = self
                    .out_or(&c.outputs.table)
                    .ok_or_else(|| CliError::Failed("learn needs --out or outputs.table".into()))?;
                let report = learn_table(&c.learn_spec(self.resolution)?, &c.params, self.jobs)?;
                let mut bytes = Vec::new();
                save_table(&report.table, &mut bytes)?;
                out.files.push((path, bytes));
                writeln!(
                    out.stdout,
                    "cells {} histogram {:?} unconverged {} infeasible {} failed {}",
                    report.table.grid().cell_count(),
                    report.table.histogram(),
                    report.unconverged,
                    report.infeasible,
                    report.failed
                )
                .expect("writing to memory");
            }
            Command::Simulate => {
                let (samples, o) = trajectory(&c.params, c.initial_state()?, c.simulate_stack()?, &c.settings)?;
                if let Some(path) = self.out_or(&c.outputs.trajectory) {
                    let mut bytes = Vec::new();
                    write_trajectory(&samples, &mut bytes)?;
                    out.files.push((path, bytes));
                }
                let summary = serde_json::json!({
                    "nu": o.nu.value(),
                    "label": cip_core::dynamics::WinLossMatrix::label(o.nu),
                    "converged_at": o.converged_at,
                    "elapsed": o.elapsed,
                    "fired": o.fired,
                    "final_state": o.final_state.to_array(),
                });
                writeln!(out.stdout, "{summary}").expect("writing to memory");
            }
            Command::Sweep | Command::Compete => {
                let config = c.sweep_config()?;
                let r = if matches!(self.command, Command::Compete) {
                    competition_run(&c.params, &config, self.jobs)?
                } else {
                    impulse_response_sweep(&c.params, &config, self.jobs)?
                };
                let path = self.out_or(&c.outputs.results);
                let mut bytes = Vec::new();
                export_results(&r, path.as_deref().map_or(ExportFormat::Csv, format_of), &mut bytes)?;
                for s in &r.aggregates.scores {
                    let e = s.e.value().map_or("undefined (no controller fired)".to_string(), |e| format!("{e:.6}"));
                    writeln!(
                        out.stdout,
                        "agent {}: n_total {} n0 {} n_j {} E {e}",
                        s.agent.index() + 1,
                        r.aggregates.n_q_total,
                        r.aggregates.n0,
                        s.n_j
                    )
                    .expect("writing to memory");
                }
                match path {
                    Some(p) => out.files.push((p, bytes)),
                    None => out.stdout.extend(bytes),
                }
            }
            Command::DelayScan => {
                let scan = delay_scan(&c.params, &c.sweep_config()?, &c.delay_grid(), self.jobs)?;
                let path = self.out_or(&c.outputs.results);
                let mut bytes = Vec::new();
                export_delay_scan(&scan, path.as_deref().map_or(ExportFormat::Csv, format_of), &mut bytes)?;
                match scan.best() {
                    Some((tau, e)) => writeln!(out.stdout, "best tau_d {tau} E {e:.6}"),
                    None => writeln!(out.stdout, "E undefined at every delay (no controller fired)"),
                }
                .expect("writing to memory");
                match path {
                    Some(p) => out.files.push((p, bytes)),
                    None => out.stdout.extend(bytes),
                }
            }
            Command::Slice => {
                let table = c.slice_table()?;
                let slice = reachable_slice(&table, &c.slice_plane(table.grid().dim()))?;
                let mut bytes = Vec::new();
                slice.write_csv(&mut bytes)?;
                match self.out_or(&c.outputs.slice) {
                    Some(p) => out.files.push((p, bytes)),
                    None => out.stdout.extend(bytes),
                }
            }
            Command::Validate => {
                let mut opts = SuiteOptions { settings: c.settings, jobs: self.jobs, ..SuiteOptions::default() };
                if let Some(m) = self.resolution {
                    opts.resolution = m;
                }
                let checks = invariant_suite(&c.params, &opts)?;
                let mut report = Vec::new();
                for k in &checks {
                    writeln!(report, "{} {}: {}", if k.passed { "PASS" } else { "FAIL" }, k.name, k.detail)
                        .expect("writing to memory");
                }
                let failed = checks.iter().filter(|k| !k.passed).count();
                if failed > 0 {
                    out.failure = Some(format!("{failed} of {} checks failed", checks.len()));
                }
                match self.out.clone() {
                    Some(p) => out.files.push((p, report)),
                    None => out.stdout.extend(report),
                }
            }
        }
        Ok(out)
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let config = cli.load_config()?;
    let out = cli.run(&config)?;
    if cli.seed_check {
        let again = cli.run(&config)?;
        if again != out {
            return Err(CliError::Failed("seed check failed: the two runs produced different output".into()));
        }
        eprintln!("seed check passed: two runs produced identical output");
    }
    for (path, bytes) in &out.files {
        let write_err = |source| CliError::Write { path: path.display().to_string(), source };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(write_err)?;
        }
        std::fs::write(path, bytes).map_err(write_err)?;
        log::info!("wrote {}", path.display());
    }
    std::io::stdout()
        .write_all(&out.stdout)
        .map_err(|source| CliError::Write { path: "<stdout>".into(), source })?;
    match out.failure {
        Some(msg) => Err(CliError::Failed(msg)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
