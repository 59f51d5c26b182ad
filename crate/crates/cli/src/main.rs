//! `double-shrink`: batch front end for simulation grids, single-dataset
//! fits, bootstrap prediction-error evaluation and theory checks.

mod fit;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use double_shrink::config::{self, Command, FitMethod, OutputFormat, Overrides, RunConfig, ECHO_FILE};
use double_shrink::evaluation::{bootstrap_rpe, load_csv, CsvOptions};
use double_shrink::simulation::run_grid;
use double_shrink::theory::run_conformance;
use double_shrink::Error;

const EXIT_INPUT: u8 = 2;
const EXIT_RUN: u8 = 3;

#[derive(Parser)]
#[command(
    name = "double-shrink",
    version,
    about = "Double-shrinkage estimation for sparse linear regression"
)]
struct Cli {
    /// Worker threads for replications and bootstrap draws.
    #[arg(long, global = true, env = "DOUBLE_SHRINK_WORKERS")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a Monte Carlo grid over Delta.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Fit one estimator to a CSV dataset.
    Fit {
        /// CSV file with a header row; defaults to `data.path` of the config.
        data: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        method: Option<FitMethod>,
        #[arg(long)]
        response_column: Option<String>,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Bootstrap prediction error of every estimator on a CSV dataset.
    Evaluate {
        /// CSV file with a header row; defaults to `data.path` of the config.
        data: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        response_column: Option<String>,
        /// Tune lambdas once per draw instead of inside every fold.
        #[arg(long)]
        fast: bool,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Orthonormal-design conformance checks.
    TheoryCheck {
        #[command(flatten)]
        run: RunArgs,
    },
    /// List shipped presets, or print one as a config file.
    Presets { name: Option<String> },
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Shipped preset name (see `double-shrink presets`).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolverFlags {
    #[arg(long)]
    standardize: bool,
    #[arg(long)]
    no_intercept: bool,
}

/// A failed command: the exit code and the structured error report.
struct Failure {
    code: u8,
    report: ErrorReport,
}

#[derive(Serialize)]
struct ErrorReport {
    kind: String,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    key: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cells: Option<Vec<Cell>>,
}

#[derive(Serialize)]
struct Cell {
    line: usize,
    column: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_input_error() { EXIT_INPUT } else { EXIT_RUN };
        let key = match &e {
            Error::Config { key, .. } => Some(key.clone()),
            _ => None,
        };
        let cells = match &e {
            Error::MissingValues { cells } => Some(
                cells
                    .iter()
                    .map(|(line, column)| Cell {
                        line: *line,
                        column: column.clone(),
                    })
                    .collect(),
            ),
            _ => None,
        };
        Failure {
            code,
            report: ErrorReport {
                kind: e.kind().into(),
                message: e.to_string(),
                key,
                cells,
            },
        }
    }
}

impl Failure {
    fn new(code: u8, kind: &str, message: String) -> Self {
        Failure {
            code,
            report: ErrorReport {
                kind: kind.into(),
                message,
                key: None,
                cells: None,
            },
        }
    }

    fn emit(&self) {
        #[derive(Serialize)]
        struct Wrapper<'a> {
            error: &'a ErrorReport,
            exit_code: u8,
        }
        let json = serde_json::to_string(&Wrapper {
            error: &self.report,
            exit_code: self.code,
        })
        .expect("error report serializes");
        eprintln!("{json}");
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            let message = e
                .to_string()
                .lines()
                .next()
                .unwrap_or_default()
                .trim_start_matches("error: ")
                .to_string();
            Failure::new(EXIT_INPUT, "usage", message).emit();
            return ExitCode::from(EXIT_INPUT);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            f.emit();
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> CmdResult {
    if let Some(workers) = cli.workers {
        if workers == 0 {
            return Err(Failure::new(EXIT_INPUT, "usage", "--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| Failure::new(EXIT_RUN, "thread_pool", e.to_string()))?;
    }
    match cli.command {
        Cmd::Simulate { run, solver } => {
            let overrides = overrides(&run, &solver);
            simulate(&load_config(&run)?, &overrides)
        }
        Cmd::Fit {
            data,
            run,
            method,
            response_column,
            solver,
        } => {
            let overrides = Overrides {
                method,
                data_path: data,
                response_column,
                ..overrides(&run, &solver)
            };
            let config = load_config(&run)?.effective(Command::Fit, &overrides)?;
            let data = load_data(&config)?;
            let out = prepare_output(&config)?;
            let report = fit::run(&data, &config)?;
            write(&out, "fit.json", &to_json(&report)?)
        }
        Cmd::Evaluate {
            data,
            run,
            response_column,
            fast,
            solver,
        } => {
            let overrides = Overrides {
                data_path: data,
                response_column,
                fast,
                ..overrides(&run, &solver)
            };
            evaluate(&load_config(&run)?, &overrides)
        }
        Cmd::TheoryCheck { run } => {
            let overrides = overrides(
                &run,
                &SolverFlags {
                    standardize: false,
                    no_intercept: false,
                },
            );
            theory_check(&load_config(&run)?, &overrides)
        }
        Cmd::Presets { name } => presets(name.as_deref()),
    }
}

fn overrides(run: &RunArgs, solver: &SolverFlags) -> Overrides {
    Overrides {
        seed: run.seed,
        output_dir: run.out.clone(),
        standardize: solver.standardize,
        no_intercept: solver.no_intercept,
        ..Overrides::default()
    }
}

fn load_config(run: &RunArgs) -> std::result::Result<RunConfig, Failure> {
    match (&run.config, &run.preset) {
        (Some(path), _) => Ok(RunConfig::load(path)?),
        (None, Some(name)) => config::preset(name).ok_or_else(|| {
            Failure::new(
                EXIT_INPUT,
                "config",
                format!("unknown preset '{name}', see `double-shrink presets`"),
            )
        }),
        (None, None) => Ok(RunConfig::default()),
    }
}

/// Creates the output directory and writes the config echo.
fn prepare_output(config: &RunConfig) -> std::result::Result<PathBuf, Failure> {
    let out = config.output_dir();
    fs::create_dir_all(&out).map_err(|e| output_error(&out, e))?;
    write(&out, ECHO_FILE, &config.to_toml()?)?;
    Ok(out)
}

fn output_error(path: &Path, e: std::io::Error) -> Failure {
    Failure::new(EXIT_RUN, "output", format!("cannot write {}: {e}", path.display()))
}

fn write(dir: &Path, name: &str, contents: &str) -> CmdResult {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| output_error(&path, e))
}

fn to_json<T: Serialize>(value: &T) -> std::result::Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(value).map_err(Error::from)?;
    s.push('\n');
    Ok(s)
}

fn load_data(config: &RunConfig) -> std::result::Result<double_shrink::solvers::Dataset, Failure> {
    let data = config.data.clone().unwrap_or_default();
    let path = data.path.ok_or_else(|| {
        Failure::new(
            EXIT_INPUT,
            "usage",
            "no dataset given: pass a CSV path or set data.path in the config".into(),
        )
    })?;
    let options = CsvOptions {
        delimiter: data.delimiter,
    };
    Ok(load_csv(&path, &data.response_column, &options)?)
}

fn simulate(config: &RunConfig, overrides: &Overrides) -> CmdResult {
    let config = config.effective(Command::Simulate, overrides)?;
    let out = prepare_output(&config)?;
    let sim = config.simulation.as_ref().expect("effective config has its section");
    let start = Instant::now();
    let report = run_grid(sim)?;
    eprintln!(
        "simulate: {} Delta values x {} replications in {:.1}s",
        sim.delta_grid.len(),
        sim.replications,
        start.elapsed().as_secs_f64()
    );
    if config.wants(OutputFormat::Csv) {
        write(&out, "rmse.csv", &report.rmse_csv()?)?;
        write(&out, "tpfp.csv", &report.tpfp_csv()?)?;
        write(&out, "selection.csv", &report.selection_csv()?)?;
    }
    if config.wants(OutputFormat::Json) {
        write(&out, "report.json", &with_newline(report.to_json()?))?;
    }
    if config.wants(OutputFormat::Table) {
        write(&out, "table.txt", &report.render_table())?;
    }
    Ok(())
}

fn evaluate(config: &RunConfig, overrides: &Overrides) -> CmdResult {
    let config = config.effective(Command::Evaluate, overrides)?;
    let data = load_data(&config)?;
    let out = prepare_output(&config)?;
    let boot = config.bootstrap.as_ref().expect("effective config has its section");
    let start = Instant::now();
    let report = bootstrap_rpe(&data, boot)?;
    eprintln!(
        "evaluate: {} draws on n = {}, p = {} in {:.1}s",
        report.draws_used,
        report.n,
        report.p,
        start.elapsed().as_secs_f64()
    );
    if config.wants(OutputFormat::Json) {
        write(&out, "report.json", &with_newline(report.to_json()?))?;
    }
    if config.wants(OutputFormat::Csv) {
        write(&out, "pe_draws.csv", &report.draws_csv()?)?;
    }
    if config.wants(OutputFormat::Table) {
        write(&out, "table.txt", &report.render_table())?;
    }
    Ok(())
}

fn theory_check(config: &RunConfig, overrides: &Overrides) -> CmdResult {
    let config = config.effective(Command::TheoryCheck, overrides)?;
    let out = prepare_output(&config)?;
    let theory = config.theory.as_ref().expect("effective config has its section");
    let start = Instant::now();
    let report = run_conformance(theory)?;
    eprintln!("theory-check: {:.1}s", start.elapsed().as_secs_f64());
    write(&out, "theory.json", &with_newline(report.to_json()?))?;
    if !report.passed {
        return Err(Failure::new(
            EXIT_RUN,
            "conformance_failed",
            format!(
                "conformance checks failed ({} difference-bound violations); see theory.json",
                report.bound_violations()
            ),
        ));
    }
    Ok(())
}

fn presets(name: Option<&str>) -> CmdResult {
    match name {
        None => {
            for name in config::preset_names() {
                println!("{name}");
            }
            Ok(())
        }
        Some(name) => {
            let preset = config::preset(name)
                .ok_or_else(|| Failure::new(EXIT_INPUT, "config", format!("unknown preset '{name}'")))?;
            print!("{}", preset.to_toml()?);
            Ok(())
        }
    }
}

fn with_newline(mut s: String) -> String {
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}
