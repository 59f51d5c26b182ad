//! Real-data evaluation: CSV ingestion, bootstrap resampling and k-fold
//! prediction error of every estimator relative to the LASSO.

use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::pairwise_mean;
use crate::pipeline::{fit_pipeline, fit_pipeline_fixed, Estimator, LinearPredictor, PipelineOptions};
use crate::simulation::rng::keyed;
use crate::solvers::{fold_assignment, Dataset};

const DRAW_TAG: &[u8; 8] = b"dsboot01";
const PE_FOLD_TAG: &[u8; 8] = b"dspefo01";
const TUNE_TAG: &[u8; 8] = b"dstune01";

/// Cell values read as missing.
const MISSING: [&str; 5] = ["", "NA", "NaN", "nan", "."];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvOptions {
    pub delimiter: char,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self { delimiter: ',' }
    }
}

/// Reads a headed CSV file; every column other than `response_column` is a
/// predictor named by its header.
pub fn load_csv(path: impl AsRef<Path>, response_column: &str, options: &CsvOptions) -> Result<Dataset> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, response_column, options)
}

pub fn read_csv(reader: impl Read, response_column: &str, options: &CsvOptions) -> Result<Dataset> {
    if !options.delimiter.is_ascii() {
        return Err(Error::InvalidArgument(
            "CSV delimiter must be an ASCII character".into(),
        ));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(options.delimiter as u8)
        .has_headers(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let response = header
        .iter()
        .position(|h| h == response_column)
        .ok_or_else(|| Error::InvalidDataset(format!("response column '{response_column}' not found in header")))?;
    let mut values: Vec<f64> = Vec::new();
    let mut y: Vec<f64> = Vec::new();
    let mut missing = Vec::new();
    let mut rows = 0usize;
    for record in rdr.records() {
        let record = record?;
        // header is line 1
        let line = record.position().map_or(rows + 2, |p| p.line() as usize);
        if record.len() != header.len() {
            return Err(Error::Parse {
                line,
                column: String::new(),
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            let v = if MISSING.contains(&cell) {
                missing.push((line, header[c].clone()));
                f64::NAN
            } else {
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => v,
                    _ => {
                        return Err(Error::Parse {
                            line,
                            column: header[c].clone(),
                            message: format!("'{cell}' is not a finite number"),
                        })
                    }
                }
            };
            if c == response {
                y.push(v);
            } else {
                values.push(v);
            }
        }
        rows += 1;
    }
    if !missing.is_empty() {
        return Err(Error::MissingValues { cells: missing });
    }
    let p = header.len() - 1;
    let x = DMatrix::from_row_slice(rows, p, &values);
    let names = header
        .iter()
        .enumerate()
        .filter(|&(c, _)| c != response)
        .map(|(_, h)| h.clone())
        .collect();
    Dataset::new(x, DVector::from_vec(y))?.with_names(names)
}

/// Mean over folds of the held-out mean squared error of every predictor the
/// procedure returns. `fit` sees only the training rows of each fold.
pub fn cv_prediction_error<F>(data: &Dataset, folds: usize, seed: u64, fit: F) -> Result<Vec<f64>>
where
    F: Fn(&Dataset, usize) -> Result<Vec<LinearPredictor>>,
{
    if folds < 2 || folds > data.n() {
        return Err(Error::InvalidArgument(format!(
            "{folds} folds requested for {} observations",
            data.n()
        )));
    }
    let fold = fold_assignment(data.n(), folds, seed);
    let mut per_fold: Vec<Vec<f64>> = Vec::with_capacity(folds);
    for k in 0..folds {
        let train: Vec<usize> = (0..data.n()).filter(|&i| fold[i] != k).collect();
        let test: Vec<usize> = (0..data.n()).filter(|&i| fold[i] == k).collect();
        let test = data.rows(&test);
        let predictors = fit(&data.rows(&train), k)?;
        per_fold.push(
            predictors
                .iter()
                .map(|pred| (test.y() - pred.predict(test.x())).norm_squared() / test.n() as f64)
                .collect(),
        );
    }
    let m = per_fold[0].len();
    Ok((0..m)
        .map(|e| pairwise_mean(&per_fold.iter().map(|f| f[e]).collect::<Vec<_>>()))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    /// Number of bootstrap draws.
    #[serde(alias = "B")]
    pub draws: usize,
    pub folds: usize,
    pub seed: u64,
    pub intercept: bool,
    pub standardize: bool,
    /// Tune lambdas once per draw and refit folds at those lambdas.
    pub fast: bool,
    /// Keep the per-draw prediction errors in the report.
    pub retain_draws: bool,
    pub pipeline: PipelineOptions,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            draws: 1000,
            folds: 5,
            seed: 2017,
            intercept: true,
            standardize: false,
            fast: false,
            retain_draws: true,
            pipeline: PipelineOptions::default(),
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.draws < 1 {
            return Err(Error::Config {
                key: "bootstrap.draws".into(),
                message: "need at least one draw".into(),
            });
        }
        if self.folds < 2 {
            return Err(Error::Config {
                key: "bootstrap.folds".into(),
                message: "need at least 2 folds".into(),
            });
        }
        self.pipeline.validate()
    }

    /// Pipeline options with this config's intercept and standardize flags.
    pub fn effective_pipeline(&self) -> PipelineOptions {
        let mut p = self.pipeline.clone();
        p.solver.intercept = self.intercept;
        p.solver.standardize = self.standardize;
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorPe {
    pub estimator: Estimator,
    pub mean_pe: f64,
    pub rpe: f64,
    /// Mean number of selected predictors over draws.
    pub mean_selected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DrawOutcome {
    pub draw: usize,
    /// Prediction error per estimator, in `Estimator::ALL` order.
    pub pe: Vec<f64>,
    /// Predictors selected on the whole resample, in `Estimator::ALL` order.
    pub selected: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapReport {
    pub config: BootstrapConfig,
    pub n: usize,
    pub p: usize,
    pub draws_used: usize,
    pub failures: usize,
    pub estimators: Vec<EstimatorPe>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub draws: Option<Vec<DrawOutcome>>,
    pub notes: Vec<String>,
}

impl BootstrapReport {
    pub fn estimator(&self, e: Estimator) -> &EstimatorPe {
        &self.estimators[e.index()]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Long-format per-draw prediction errors: `draw,method,pe`.
    pub fn draws_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["draw", "method", "pe"])?;
        for d in self.draws.iter().flatten() {
            for (e, pe) in Estimator::ALL.iter().zip(&d.pe) {
                w.write_record([d.draw.to_string(), e.name().to_string(), format!("{pe:e}")])?;
            }
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is UTF-8"))
    }

    pub fn render_table(&self) -> String {
        let mut out = String::from("Method      PE    RPE  selected\n");
        for e in &self.estimators {
            out.push_str(&format!(
                "{:<6} {:>9.3} {:>6.3} {:>9.3}\n",
                e.estimator.name(),
                e.mean_pe,
                e.rpe,
                e.mean_selected
            ));
        }
        out
    }
}

fn derived_seed(seed: u64, draw: usize, tag: &[u8; 8]) -> u64 {
    use rand::RngCore;
    keyed(seed, draw as u64, 0.0, tag).next_u64()
}

/// Row indices of one bootstrap draw (n rows sampled with replacement).
pub fn resample_indices(n: usize, seed: u64, draw: usize) -> Vec<usize> {
    let mut rng = keyed(seed, draw as u64, 0.0, DRAW_TAG);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

fn run_draw(data: &Dataset, config: &BootstrapConfig, draw: usize) -> Result<DrawOutcome> {
    let sample = data.rows(&resample_indices(data.n(), config.seed, draw));
    let pipeline = config.effective_pipeline();
    let tune_seed = derived_seed(config.seed, draw, TUNE_TAG);
    let pe_seed = derived_seed(config.seed, draw, PE_FOLD_TAG);
    let whole = fit_pipeline(&sample, &pipeline, tune_seed)?;
    let selected = whole.predictors().iter().map(|p| p.active_set().len()).collect();
    let pe = if config.fast {
        let tuning = whole.tuning();
        cv_prediction_error(&sample, config.folds, pe_seed, |train, _| {
            Ok(fit_pipeline_fixed(train, &pipeline, &tuning)?.predictors())
        })?
    } else {
        cv_prediction_error(&sample, config.folds, pe_seed, |train, k| {
            Ok(fit_pipeline(train, &pipeline, tune_seed.wrapping_add(k as u64 + 1))?.predictors())
        })?
    };
    Ok(DrawOutcome { draw, pe, selected })
}

/// Bootstrap estimate of the k-fold prediction error of every estimator and
/// its ratio to the LASSO (RPE > 1 favours the estimator).
pub fn bootstrap_rpe(data: &Dataset, config: &BootstrapConfig) -> Result<BootstrapReport> {
    config.validate()?;
    let results: Vec<(usize, Result<DrawOutcome>)> = (0..config.draws)
        .into_par_iter()
        .map(|b| (b, run_draw(data, config, b)))
        .collect();
    let mut ok = Vec::with_capacity(results.len());
    let mut first_reason = None;
    for (b, r) in results {
        match r {
            Ok(o) => ok.push(o),
            Err(e) => {
                first_reason.get_or_insert_with(|| format!("draw {b}: {e}"));
            }
        }
    }
    let failures = config.draws - ok.len();
    if failures * 10 > config.draws || ok.is_empty() {
        return Err(Error::TooManyFailures {
            failed: failures,
            total: config.draws,
            first_reason: first_reason.unwrap_or_default(),
        });
    }

    let var_y = {
        let y = data.y();
        let m = y.mean();
        y.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (y.len() - 1) as f64
    };
    let floor = 1e-6 * var_y;
    let mean_of = |f: &dyn Fn(&DrawOutcome) -> f64| pairwise_mean(&ok.iter().map(f).collect::<Vec<_>>());
    let mean_pe: Vec<f64> = (0..Estimator::ALL.len()).map(|e| mean_of(&|d| d.pe[e])).collect();
    if let Some(e) = Estimator::ALL.iter().find(|e| !(mean_pe[e.index()] > floor)) {
        return Err(Error::DegeneratePredictionError {
            estimator: e.name().to_string(),
        });
    }
    let base = mean_pe[Estimator::LASSO.index()];
    let estimators = Estimator::ALL
        .iter()
        .map(|&e| {
            let i = e.index();
            EstimatorPe {
                estimator: e,
                mean_pe: mean_pe[i],
                rpe: if e == Estimator::LASSO { 1.0 } else { base / mean_pe[i] },
                mean_selected: mean_of(&|d| d.selected[i] as f64),
            }
        })
        .collect();
    let mut notes = vec![
        format!(
            "{} bootstrap draws of n = {} rows with replacement",
            config.draws,
            data.n()
        ),
        format!(
            "PE is the {}-fold CV mean squared prediction error, averaged over folds then draws",
            config.folds
        ),
        if config.fast {
            "lambdas tuned once per draw; each fold refit at those lambdas".into()
        } else {
            "whole pipeline, including lambda selection, refit inside every training fold".into()
        },
    ];
    if failures > 0 {
        notes.push(format!(
            "{failures} draws failed and were excluded; first: {}",
            first_reason.unwrap_or_default()
        ));
    }
    Ok(BootstrapReport {
        config: config.clone(),
        n: data.n(),
        p: data.p(),
        draws_used: ok.len(),
        failures,
        estimators,
        draws: config.retain_draws.then_some(ok),
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_named_predictors() {
        let csv = "a,y,b\n1,2,3\n4,5,6\n7,8,9.5\n";
        let d = read_csv(csv.as_bytes(), "y", &CsvOptions::default()).unwrap();
        assert_eq!((d.n(), d.p()), (3, 2));
        assert_eq!(d.names().unwrap(), &["a".to_string(), "b".to_string()]);
        assert_eq!(d.y().as_slice(), &[2.0, 5.0, 8.0]);
        assert_eq!(d.x()[(2, 1)], 9.5);
    }

    #[test]
    fn lists_every_missing_cell() {
        let csv = "a,b,y\n1,,3\n4,5,NA\n7,8,9\n";
        match read_csv(csv.as_bytes(), "y", &CsvOptions::default()) {
            Err(Error::MissingValues { cells }) => {
                assert_eq!(cells, vec![(2, "b".to_string()), (3, "y".to_string())]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn reports_parse_location() {
        let csv = "a,b,y\n1,2,3\n4,oops,6\n";
        match read_csv(csv.as_bytes(), "y", &CsvOptions::default()) {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(column, "b");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_response_column() {
        let csv = "a,b\n1,2\n3,4\n";
        assert!(matches!(
            read_csv(csv.as_bytes(), "y", &CsvOptions::default()),
            Err(Error::InvalidDataset(_))
        ));
    }

    #[test]
    fn resampling_is_reproducible() {
        let a = resample_indices(50, 3, 7);
        assert_eq!(a, resample_indices(50, 3, 7));
        assert_ne!(a, resample_indices(50, 3, 8));
        assert!(a.iter().all(|&i| i < 50));
    }

    #[test]
    fn config_validation() {
        let mut c = BootstrapConfig::default();
        assert!(c.validate().is_ok());
        c.draws = 0;
        assert!(c.validate().is_err());
        let c = BootstrapConfig {
            folds: 1,
            ..BootstrapConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
