//! Run configuration files, shipped presets and the config echo written
//! next to every run's outputs.
//!
//! A config is a TOML file with optional top-level `seed`, `output_dir` and
//! `formats` keys and one section per command: `[simulation]`,
//! `[bootstrap]`, `[fit]`, `[theory]` plus `[data]` for dataset input.
//! Unknown keys are rejected with the dotted path of the offending key.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::BootstrapConfig;
use crate::pipeline::{Estimator, PipelineOptions};
use crate::simulation::{SimulationConfig, LAMBDA1_GRID, LAMBDA2_GRID};
use crate::theory::{AlphaTrendConfig, OrthoSpec, TheoryConfig};

pub const DEFAULT_OUTPUT_DIR: &str = "double-shrink-out";
pub const ECHO_FILE: &str = "config.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    Table,
}

impl OutputFormat {
    pub const ALL: [OutputFormat; 3] = [OutputFormat::Csv, OutputFormat::Json, OutputFormat::Table];
}

/// Estimator requested from the `fit` command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitMethod {
    #[serde(rename = "lasso")]
    Lasso,
    #[serde(rename = "alasso")]
    Alasso,
    #[serde(rename = "ridge")]
    Ridge,
    S,
    PS,
    FS1,
    FS2,
    FS3,
}

impl FitMethod {
    pub const ALL: [FitMethod; 8] = [
        FitMethod::Lasso,
        FitMethod::Alasso,
        FitMethod::Ridge,
        FitMethod::S,
        FitMethod::PS,
        FitMethod::FS1,
        FitMethod::FS2,
        FitMethod::FS3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FitMethod::Lasso => "lasso",
            FitMethod::Alasso => "alasso",
            FitMethod::Ridge => "ridge",
            FitMethod::S => "S",
            FitMethod::PS => "PS",
            FitMethod::FS1 => "FS1",
            FitMethod::FS2 => "FS2",
            FitMethod::FS3 => "FS3",
        }
    }

    /// Pipeline estimator backing this method; `None` for ridge.
    pub fn estimator(self) -> Option<Estimator> {
        match self {
            FitMethod::Lasso => Some(Estimator::LASSO),
            FitMethod::Alasso => Some(Estimator::ALASSO),
            FitMethod::Ridge => None,
            FitMethod::S => Some(Estimator::S),
            FitMethod::PS => Some(Estimator::PS),
            FitMethod::FS1 => Some(Estimator::FS1),
            FitMethod::FS2 => Some(Estimator::FS2),
            FitMethod::FS3 => Some(Estimator::FS3),
        }
    }
}

impl fmt::Display for FitMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FitMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FitMethod::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<&str> = FitMethod::ALL.iter().map(|m| m.name()).collect();
                Error::InvalidArgument(format!("unknown method '{s}', expected one of {}", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub method: FitMethod,
    /// Seed of the cross-validation folds.
    pub seed: u64,
    pub pipeline: PipelineOptions,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            method: FitMethod::FS3,
            seed: 2017,
            pipeline: PipelineOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub response_column: String,
    pub delimiter: char,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            path: None,
            response_column: "y".into(),
            delimiter: ',',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Fit,
    Evaluate,
    TheoryCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Fit => "fit",
            Command::Evaluate => "evaluate",
            Command::TheoryCheck => "theory-check",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub formats: Option<Vec<OutputFormat>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<DataConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theory: Option<TheoryConfig>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub data_path: Option<PathBuf>,
    pub response_column: Option<String>,
    pub method: Option<FitMethod>,
    pub fast: bool,
    pub standardize: bool,
    pub no_intercept: bool,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| syntax_error(text, &e))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            let inner = e.into_inner();
            Error::Config {
                key: if key == "." { String::new() } else { key },
                message: inner.message().trim().to_string(),
            }
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config {
            key: String::new(),
            message: e.to_string(),
        })
    }

    /// Every value the command will use, with overrides applied and the
    /// sections of other commands dropped.
    ///
    /// Seed precedence: command line, then top-level `seed`, then the
    /// section's own seed.
    pub fn effective(&self, command: Command, overrides: &Overrides) -> Result<RunConfig> {
        let seed_override = overrides.seed.or(self.seed);
        let mut out = RunConfig {
            seed: None,
            output_dir: Some(
                overrides
                    .output_dir
                    .clone()
                    .or_else(|| self.output_dir.clone())
                    .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
            ),
            formats: Some(self.formats()),
            ..RunConfig::default()
        };
        let with_data = || {
            let mut data = self.data.clone().unwrap_or_default();
            if let Some(path) = &overrides.data_path {
                data.path = Some(path.clone());
            }
            if let Some(col) = &overrides.response_column {
                data.response_column = col.clone();
            }
            data
        };
        let seed = match command {
            Command::Simulate => {
                let mut sim = self.simulation.clone().unwrap_or_default();
                if let Some(s) = seed_override {
                    sim.seed = s;
                }
                apply_solver_flags(&mut sim.pipeline, overrides);
                sim.validate()?;
                let seed = sim.seed;
                out.simulation = Some(sim);
                seed
            }
            Command::Fit => {
                let mut fit = self.fit.clone().unwrap_or_default();
                if let Some(s) = seed_override {
                    fit.seed = s;
                }
                if let Some(m) = overrides.method {
                    fit.method = m;
                }
                apply_solver_flags(&mut fit.pipeline, overrides);
                fit.pipeline.validate()?;
                let seed = fit.seed;
                out.fit = Some(fit);
                out.data = Some(with_data());
                seed
            }
            Command::Evaluate => {
                let mut boot = self.bootstrap.clone().unwrap_or_default();
                if let Some(s) = seed_override {
                    boot.seed = s;
                }
                boot.fast |= overrides.fast;
                boot.standardize |= overrides.standardize;
                if overrides.no_intercept {
                    boot.intercept = false;
                }
                boot.pipeline.solver.intercept = boot.intercept;
                boot.pipeline.solver.standardize = boot.standardize;
                boot.validate()?;
                let seed = boot.seed;
                out.bootstrap = Some(boot);
                out.data = Some(with_data());
                seed
            }
            Command::TheoryCheck => {
                let mut theory = self.theory.clone().unwrap_or_default();
                if let Some(s) = seed_override {
                    theory.seed = s;
                }
                theory.validate()?;
                let seed = theory.seed;
                out.theory = Some(theory);
                seed
            }
        };
        out.seed = Some(seed);
        Ok(out)
    }

    pub fn formats(&self) -> Vec<OutputFormat> {
        let mut f = self.formats.clone().unwrap_or_else(|| OutputFormat::ALL.to_vec());
        f.sort();
        f.dedup();
        f
    }

    pub fn wants(&self, format: OutputFormat) -> bool {
        self.formats().contains(&format)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
    }
}

fn apply_solver_flags(pipeline: &mut PipelineOptions, overrides: &Overrides) {
    if overrides.standardize {
        pipeline.solver.standardize = true;
    }
    if overrides.no_intercept {
        pipeline.solver.intercept = false;
    }
}

fn syntax_error(text: &str, e: &toml::de::Error) -> Error {
    let location = e.span().map(|span| {
        let before = &text[..span.start.min(text.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        format!(" at line {line}, column {column}")
    });
    Error::Config {
        key: String::new(),
        message: format!("{}{}", e.message().trim(), location.unwrap_or_default()),
    }
}

/// Names of every shipped preset, in listing order.
pub fn preset_names() -> Vec<String> {
    let mut names = Vec::new();
    for table in 1..=6 {
        for p2 in [4, 8, 16] {
            names.push(format!("table{table}-p2-{p2}"));
        }
    }
    for extra in [
        "table1-cell",
        "lambda1-grid",
        "lambda2-grid",
        "smoke",
        "eye",
        "riboflavin",
        "evaluate-smoke",
        "theory",
        "theory-smoke",
    ] {
        names.push(extra.into());
    }
    names
}

/// Simulation settings of one table cell: tables 1 to 3 use `Lambda = 1`,
/// tables 4 to 6 `Lambda = 2`; within each triple `p3` is 200, 400, 800.
pub fn table_cell(table: usize, p2: usize) -> Option<SimulationConfig> {
    if !(1..=6).contains(&table) || ![4, 8, 16].contains(&p2) {
        return None;
    }
    let (strong, grid) = if table <= 3 {
        (1.0, LAMBDA1_GRID.to_vec())
    } else {
        (2.0, LAMBDA2_GRID.to_vec())
    };
    Some(SimulationConfig {
        p2,
        p3: [200, 400, 800][(table - 1) % 3],
        strong,
        delta_grid: grid,
        ..SimulationConfig::default()
    })
}

fn real_data_protocol() -> BootstrapConfig {
    BootstrapConfig {
        draws: 1000,
        folds: 5,
        intercept: true,
        standardize: false,
        ..BootstrapConfig::default()
    }
}

pub fn preset(name: &str) -> Option<RunConfig> {
    let sim = |s: SimulationConfig| RunConfig {
        simulation: Some(s),
        ..RunConfig::default()
    };
    if let Some(rest) = name.strip_prefix("table") {
        if let Some((t, p2)) = rest.split_once("-p2-") {
            let cell = table_cell(t.parse().ok()?, p2.parse().ok()?)?;
            return Some(sim(cell));
        }
    }
    let config = match name {
        "table1-cell" | "lambda1-grid" => sim(table_cell(1, 4)?),
        "lambda2-grid" => sim(table_cell(4, 4)?),
        "smoke" => sim(SimulationConfig {
            n: 60,
            p2: 4,
            p3: 30,
            replications: 4,
            delta_grid: vec![0.0, 0.8],
            ..SimulationConfig::default()
        }),
        "eye" | "riboflavin" => RunConfig {
            bootstrap: Some(real_data_protocol()),
            data: Some(DataConfig::default()),
            ..RunConfig::default()
        },
        "evaluate-smoke" => RunConfig {
            bootstrap: Some(BootstrapConfig {
                draws: 5,
                ..real_data_protocol()
            }),
            data: Some(DataConfig::default()),
            ..RunConfig::default()
        },
        "theory" => RunConfig {
            theory: Some(TheoryConfig::default()),
            ..RunConfig::default()
        },
        "theory-smoke" => RunConfig {
            theory: Some(TheoryConfig {
                instance: OrthoSpec {
                    n: 60,
                    ..OrthoSpec::default()
                },
                oracle_instances: 5,
                bound_instances: 50,
                dominance_instances: 20,
                grid_points: 201,
                alpha_trend: AlphaTrendConfig {
                    ns: vec![40, 160],
                    replications: 20,
                    ..AlphaTrendConfig::default()
                },
                risk_replications: 50,
                ..TheoryConfig::default()
            }),
            ..RunConfig::default()
        },
        _ => return None,
    };
    Some(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_reports_its_path() {
        let err = RunConfig::from_toml_str("[simulation]\nn = 50\nrepetitions = 3\n").unwrap_err();
        match err {
            Error::Config { key, message } => {
                assert_eq!(key, "simulation.repetitions", "{message}");
                assert!(message.contains("repetitions"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let err = RunConfig::from_toml_str("[simulation.pipeline.solver]\ntolerance = \"x\"\n").unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "simulation.pipeline.solver.tolerance"));
    }

    #[test]
    fn syntax_error_has_location() {
        let err = RunConfig::from_toml_str("seed = 1\n[simulation\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn named_delta_grid() {
        let c = RunConfig::from_toml_str("[simulation]\ndelta_grid = \"lambda2-grid\"\n").unwrap();
        assert_eq!(c.simulation.unwrap().delta_grid, LAMBDA2_GRID.to_vec());
        let c = RunConfig::from_toml_str("[simulation]\ndelta_grid = [0, 0.5]\n").unwrap();
        assert_eq!(c.simulation.unwrap().delta_grid, vec![0.0, 0.5]);
        assert!(RunConfig::from_toml_str("[simulation]\ndelta_grid = \"lambda3-grid\"\n").is_err());
    }

    #[test]
    fn every_preset_round_trips_through_toml() {
        for name in preset_names() {
            let config = preset(&name).unwrap_or_else(|| panic!("{name}"));
            let text = config.to_toml().unwrap();
            assert_eq!(RunConfig::from_toml_str(&text).unwrap(), config, "{name}");
        }
        assert!(preset("table7-p2-4").is_none());
        assert!(preset("table1-p2-5").is_none());
    }

    #[test]
    fn table_cells() {
        let c = table_cell(5, 8).unwrap();
        assert_eq!((c.strong, c.p2, c.p3), (2.0, 8, 400));
        assert_eq!(c.delta_grid, LAMBDA2_GRID.to_vec());
        let c = table_cell(3, 16).unwrap();
        assert_eq!((c.strong, c.p3), (1.0, 800));
        assert_eq!(preset("table1-cell"), preset("table1-p2-4"));
    }

    #[test]
    fn seed_precedence_and_section_selection() {
        let mut c = preset("smoke").unwrap();
        c.seed = Some(5);
        let eff = c.effective(Command::Simulate, &Overrides::default()).unwrap();
        assert_eq!(eff.simulation.as_ref().unwrap().seed, 5);
        assert_eq!(eff.seed, Some(5));
        let o = Overrides {
            seed: Some(9),
            ..Overrides::default()
        };
        assert_eq!(c.effective(Command::Simulate, &o).unwrap().simulation.unwrap().seed, 9);
        let eff = c.effective(Command::TheoryCheck, &o).unwrap();
        assert!(eff.simulation.is_none());
        assert_eq!(eff.theory.unwrap().seed, 9);
    }

    #[test]
    fn evaluate_flags() {
        let o = Overrides {
            fast: true,
            no_intercept: true,
            response_column: Some("target".into()),
            ..Overrides::default()
        };
        let eff = preset("eye").unwrap().effective(Command::Evaluate, &o).unwrap();
        let b = eff.bootstrap.unwrap();
        assert!(b.fast && !b.intercept && !b.pipeline.solver.intercept);
        assert_eq!(eff.data.unwrap().response_column, "target");
    }

    #[test]
    fn fit_method_names() {
        for m in FitMethod::ALL {
            assert_eq!(m.name().parse::<FitMethod>().unwrap(), m);
        }
        assert_eq!("fs3".parse::<FitMethod>().unwrap(), FitMethod::FS3);
        assert!("ols".parse::<FitMethod>().is_err());
    }
}
