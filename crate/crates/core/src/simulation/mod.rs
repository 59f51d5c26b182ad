//! Monte Carlo replication grid: data from the sparse linear model with
//! `x_ij = xi1^2 + xi2` (both standard normal), `N(0, 1)` noise and
//! `beta = (Lambda 1_p1, Delta 1_p2, 0_p3)`, scored by the relative MSE of the
//! strong block against the LASSO baseline, TP/FP counts and selection
//! frequencies.

mod report;
pub mod rng;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use report::{CellReport, EstimatorSummary, SelectionFrequency, SimulationReport};

use crate::error::{Error, Result};
use crate::pipeline::{fit_pipeline, Estimator, PipelineOptions};
use crate::solvers::{kkt_residual, Dataset, SolverOptions};

/// Delta grid used with `Lambda = 1`.
pub const LAMBDA1_GRID: [f64; 5] = [0.0, 0.2, 0.4, 0.6, 0.8];
/// Delta grid used with `Lambda = 2`.
pub const LAMBDA2_GRID: [f64; 6] = [0.0, 0.2, 0.4, 0.8, 1.2, 1.6];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub n: usize,
    pub p1: usize,
    pub p2: usize,
    pub p3: usize,
    /// Magnitude of every strong coefficient (`Lambda`).
    pub strong: f64,
    /// Explicit values or a grid name (`lambda1-grid`, `lambda2-grid`).
    #[serde(deserialize_with = "named_grid")]
    pub delta_grid: Vec<f64>,
    pub replications: usize,
    pub seed: u64,
    pub pipeline: PipelineOptions,
}

/// Delta grid by preset name.
pub fn delta_grid(name: &str) -> Option<Vec<f64>> {
    match name {
        "lambda1-grid" => Some(LAMBDA1_GRID.to_vec()),
        "lambda2-grid" => Some(LAMBDA2_GRID.to_vec()),
        _ => None,
    }
}

fn named_grid<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Grid {
        Values(Vec<f64>),
        Name(String),
    }
    match Grid::deserialize(d)? {
        Grid::Values(v) => Ok(v),
        Grid::Name(name) => delta_grid(&name).ok_or_else(|| {
            serde::de::Error::custom(format!(
                "unknown grid '{name}', expected a list or one of lambda1-grid, lambda2-grid"
            ))
        }),
    }
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n: 150,
            p1: 4,
            p2: 4,
            p3: 200,
            strong: 1.0,
            delta_grid: LAMBDA1_GRID.to_vec(),
            replications: 250,
            seed: 2017,
            pipeline: PipelineOptions {
                solver: SolverOptions {
                    intercept: false,
                    ..SolverOptions::default()
                },
                ..PipelineOptions::default()
            },
        }
    }
}

impl SimulationConfig {
    pub fn p(&self) -> usize {
        self.p1 + self.p2 + self.p3
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: &str| {
            Err(Error::Config {
                key: key.into(),
                message: message.into(),
            })
        };
        if self.n < 2 {
            return bad("simulation.n", "need at least 2 observations");
        }
        if self.p1 == 0 {
            return bad("simulation.p1", "need at least one strong coefficient");
        }
        if self.p1 + self.p2 > self.n {
            return bad("simulation.p2", "p1 + p2 must not exceed n");
        }
        if self.replications < 2 {
            return bad("simulation.replications", "need at least 2 replications");
        }
        if self.delta_grid.is_empty() {
            return bad("simulation.delta_grid", "must not be empty");
        }
        if self.delta_grid.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return bad("simulation.delta_grid", "entries must be finite and nonnegative");
        }
        if self.delta_grid.windows(2).any(|w| w[0] > w[1]) {
            return bad("simulation.delta_grid", "must be sorted ascending");
        }
        if !(self.strong.is_finite() && self.strong > 0.0) {
            return bad("simulation.strong", "must be positive");
        }
        self.pipeline.validate()
    }

    /// `(Lambda 1_p1, Delta 1_p2, 0_p3)`.
    pub fn beta_true(&self, delta: f64) -> Vec<f64> {
        let mut beta = vec![0.0; self.p()];
        beta[..self.p1].fill(self.strong);
        beta[self.p1..self.p1 + self.p2].fill(delta);
        beta
    }
}

/// One replication's data; fully determined by `(seed, replication, delta)`.
pub fn gen_dataset(config: &SimulationConfig, replication: usize, delta: f64) -> (Dataset, Vec<f64>) {
    let (n, p) = (config.n, config.p());
    let mut rng = rng::data_rng(config.seed, replication as u64, delta);
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            x[(i, j)] = a * a + b;
        }
    }
    let beta = config.beta_true(delta);
    let mut y = &x * DVector::from_column_slice(&beta);
    for yi in y.iter_mut() {
        let e: f64 = rng.sample(StandardNormal);
        *yi += e;
    }
    let data = Dataset::new(x, y).expect("simulated data is finite");
    (data, beta)
}

/// Squared error of the first `p1` coordinates against the true strong block.
///
/// Strong indices missing from an estimator's support are scored as 0.
pub fn estimator_mse_against_truth(estimate: &[f64], beta_true: &[f64], p1: usize) -> f64 {
    estimate[..p1]
        .iter()
        .zip(&beta_true[..p1])
        .map(|(e, b)| (e - b) * (e - b))
        .sum()
}

/// Per-replication scores for every estimator (indexed as `Estimator::ALL`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationOutcome {
    pub replication: usize,
    pub sq_errors: Vec<f64>,
    pub true_positives: Vec<usize>,
    pub false_positives: Vec<usize>,
    pub supports: Vec<Vec<usize>>,
    pub lasso_kkt: f64,
    pub lasso_converged: bool,
    pub fallback: bool,
}

pub fn run_replication(config: &SimulationConfig, replication: usize, delta: f64) -> Result<ReplicationOutcome> {
    let (data, beta) = gen_dataset(config, replication, delta);
    let seed = rng::fold_seed(config.seed, replication as u64, delta);
    let fit = fit_pipeline(&data, &config.pipeline, seed)?;
    let truly_nonzero = |j: usize| beta[j] != 0.0;

    let mut out = ReplicationOutcome {
        replication,
        sq_errors: Vec::with_capacity(Estimator::ALL.len()),
        true_positives: Vec::with_capacity(Estimator::ALL.len()),
        false_positives: Vec::with_capacity(Estimator::ALL.len()),
        supports: Vec::with_capacity(Estimator::ALL.len()),
        lasso_kkt: kkt_residual(&data, &fit.lasso, &vec![1.0; data.p()], &config.pipeline.solver),
        lasso_converged: fit.lasso.converged,
        fallback: fit.shrinkage.wn.is_none(),
    };
    for est in Estimator::ALL {
        let pred = fit.predictor(est);
        let support = pred.active_set();
        let tp = support.iter().filter(|&&j| truly_nonzero(j)).count();
        out.sq_errors
            .push(estimator_mse_against_truth(&pred.coefficients, &beta, config.p1));
        out.true_positives.push(tp);
        out.false_positives.push(support.len() - tp);
        out.supports.push(support);
    }
    Ok(out)
}

/// Replications of one Delta, in index order. Failures are kept as errors.
pub fn run_cell(config: &SimulationConfig, delta: f64) -> Vec<(usize, Result<ReplicationOutcome>)> {
    (0..config.replications)
        .into_par_iter()
        .map(|r| (r, run_replication(config, r, delta)))
        .collect()
}

pub fn run_grid(config: &SimulationConfig) -> Result<SimulationReport> {
    config.validate()?;
    let mut cells = Vec::with_capacity(config.delta_grid.len());
    for &delta in &config.delta_grid {
        let results = run_cell(config, delta);
        let mut ok = Vec::with_capacity(results.len());
        let mut reasons: BTreeMap<String, usize> = BTreeMap::new();
        let mut first_reason = None;
        for (r, res) in results {
            match res {
                Ok(o) => ok.push(o),
                Err(e) => {
                    first_reason.get_or_insert_with(|| format!("replication {r}: {e}"));
                    *reasons.entry(e.kind().to_string()).or_default() += 1;
                }
            }
        }
        let failed = config.replications - ok.len();
        if failed * 10 > config.replications {
            return Err(Error::TooManyFailures {
                failed,
                total: config.replications,
                first_reason: first_reason.unwrap_or_default(),
            });
        }
        cells.push(CellReport::aggregate(config, delta, &ok, failed, reasons));
    }
    Ok(SimulationReport {
        config: config.clone(),
        cells,
        notes: vec![
            format!(
                "intercept {} in all simulation fits",
                if config.pipeline.solver.intercept {
                    "enabled"
                } else {
                    "disabled"
                }
            ),
            "MSE is the squared coefficient error on the true strong block, averaged over replications".into(),
            "RMSE = MSE(LASSO) / MSE(estimator)".into(),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimulationConfig {
        SimulationConfig {
            n: 40,
            p3: 20,
            replications: 3,
            delta_grid: vec![0.0],
            ..SimulationConfig::default()
        }
    }

    #[test]
    fn beta_layout() {
        let c = small();
        let b = c.beta_true(0.5);
        assert_eq!(b.len(), 28);
        assert_eq!(&b[..4], &[1.0; 4]);
        assert_eq!(&b[4..8], &[0.5; 4]);
        assert!(b[8..].iter().all(|v| *v == 0.0));
        assert_eq!(c.beta_true(0.0).iter().filter(|v| **v != 0.0).count(), 4);
    }

    #[test]
    fn dataset_is_deterministic() {
        let c = small();
        let (a, ba) = gen_dataset(&c, 2, 0.2);
        let (b, bb) = gen_dataset(&c, 2, 0.2);
        assert_eq!(a, b);
        assert_eq!(ba, bb);
        let (d, _) = gen_dataset(&c, 3, 0.2);
        assert_ne!(a, d);
    }

    #[test]
    fn mse_against_truth_examples() {
        let beta = vec![1.0, 1.0, 0.5, 0.0];
        assert_eq!(estimator_mse_against_truth(&beta, &beta, 2), 0.0);
        assert_eq!(estimator_mse_against_truth(&[0.0; 4], &beta, 2), 2.0);
        let est = [1.5, 0.25, 9.0, 9.0];
        // one-line recomputation
        let direct = (1.5f64 - 1.0).powi(2) + (0.25f64 - 1.0).powi(2);
        assert_eq!(estimator_mse_against_truth(&est, &beta, 2), direct);
    }

    #[test]
    fn config_validation() {
        assert!(small().validate().is_ok());
        let mut c = small();
        c.delta_grid = vec![0.4, 0.2];
        assert!(c.validate().is_err());
        let mut c = small();
        c.replications = 1;
        assert!(c.validate().is_err());
        let mut c = small();
        c.p2 = 40;
        assert!(c.validate().is_err());
        let mut c = small();
        c.delta_grid.clear();
        assert!(c.validate().is_err());
    }
}
