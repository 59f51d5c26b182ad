use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::{ReplicationOutcome, SimulationConfig};
use crate::error::Result;
use crate::linalg::pairwise_mean;
use crate::pipeline::Estimator;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorSummary {
    pub estimator: Estimator,
    pub mse: f64,
    pub rmse: f64,
    /// Delta-method Monte Carlo standard error of `rmse`.
    pub rmse_se: f64,
    pub tp_mean: f64,
    pub fp_mean: f64,
    pub tp_pct: f64,
    pub fp_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionFrequency {
    pub estimator: Estimator,
    /// Fraction of replications selecting each predictor.
    pub frequency: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellReport {
    pub delta: f64,
    pub replications_used: usize,
    pub failures: usize,
    pub failure_reasons: BTreeMap<String, usize>,
    /// Replications where `p2 < 3` made every variant return the UF fit.
    pub fallbacks: usize,
    pub estimators: Vec<EstimatorSummary>,
    pub selection: Vec<SelectionFrequency>,
    pub max_lasso_kkt_residual: f64,
    pub unconverged_lasso_fits: usize,
}

impl CellReport {
    pub(crate) fn aggregate(
        config: &SimulationConfig,
        delta: f64,
        outcomes: &[ReplicationOutcome],
        failures: usize,
        failure_reasons: BTreeMap<String, usize>,
    ) -> Self {
        let m = outcomes.len();
        let p = config.p();
        let truth = config.beta_true(delta);
        let n_nonzero = truth.iter().filter(|b| **b != 0.0).count();
        let n_zero = p - n_nonzero;
        let pct = |v: f64, d: usize| if d == 0 { 0.0 } else { 100.0 * v / d as f64 };

        let column = |f: &dyn Fn(&ReplicationOutcome) -> f64| -> Vec<f64> { outcomes.iter().map(f).collect() };
        let base_idx = Estimator::LASSO.index();
        let base = column(&|o| o.sq_errors[base_idx]);
        let base_mse = pairwise_mean(&base);

        let estimators = Estimator::ALL
            .iter()
            .map(|&est| {
                let k = est.index();
                let errs = column(&|o| o.sq_errors[k]);
                let mse = pairwise_mean(&errs);
                let tp_mean = pairwise_mean(&column(&|o| o.true_positives[k] as f64));
                let fp_mean = pairwise_mean(&column(&|o| o.false_positives[k] as f64));
                EstimatorSummary {
                    estimator: est,
                    mse,
                    rmse: base_mse / mse,
                    rmse_se: ratio_se(&base, &errs),
                    tp_mean,
                    fp_mean,
                    tp_pct: pct(tp_mean, n_nonzero),
                    fp_pct: pct(fp_mean, n_zero),
                }
            })
            .collect();

        let selection = Estimator::ALL
            .iter()
            .map(|&est| {
                let k = est.index();
                let mut counts = vec![0usize; p];
                for o in outcomes {
                    for &j in &o.supports[k] {
                        counts[j] += 1;
                    }
                }
                SelectionFrequency {
                    estimator: est,
                    frequency: counts.iter().map(|&c| c as f64 / m as f64).collect(),
                }
            })
            .collect();

        Self {
            delta,
            replications_used: m,
            failures,
            failure_reasons,
            fallbacks: outcomes.iter().filter(|o| o.fallback).count(),
            estimators,
            selection,
            max_lasso_kkt_residual: outcomes.iter().map(|o| o.lasso_kkt).fold(0.0, f64::max),
            unconverged_lasso_fits: outcomes.iter().filter(|o| !o.lasso_converged).count(),
        }
    }

    pub fn summary(&self, estimator: Estimator) -> &EstimatorSummary {
        &self.estimators[estimator.index()]
    }
}

/// Standard error of `mean(a) / mean(b)` for paired samples (delta method).
fn ratio_se(a: &[f64], b: &[f64]) -> f64 {
    let m = a.len() as f64;
    if a.len() < 2 {
        return f64::NAN;
    }
    let ma = pairwise_mean(a);
    let mb = pairwise_mean(b);
    let va = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / (m - 1.0);
    let vb = b.iter().map(|x| (x - mb).powi(2)).sum::<f64>() / (m - 1.0);
    let cov = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (m - 1.0);
    let r = ma / mb;
    let var = (va - 2.0 * r * cov + r * r * vb) / (mb * mb * m);
    var.max(0.0).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub config: SimulationConfig,
    pub cells: Vec<CellReport>,
    pub notes: Vec<String>,
}

fn csv_string(header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| crate::Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

impl SimulationReport {
    pub fn cell(&self, delta: f64) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.delta == delta)
    }

    /// One row per Delta x estimator, full precision.
    pub fn rmse_csv(&self) -> Result<String> {
        let rows = self
            .cells
            .iter()
            .flat_map(|c| {
                c.estimators.iter().map(move |e| {
                    vec![
                        c.delta.to_string(),
                        e.estimator.to_string(),
                        e.mse.to_string(),
                        e.rmse.to_string(),
                        e.rmse_se.to_string(),
                        c.replications_used.to_string(),
                        c.failures.to_string(),
                        c.fallbacks.to_string(),
                    ]
                })
            })
            .collect();
        csv_string(
            &[
                "delta",
                "estimator",
                "mse",
                "rmse",
                "rmse_se",
                "replications",
                "failures",
                "fallbacks",
            ],
            rows,
        )
    }

    pub fn tpfp_csv(&self) -> Result<String> {
        let rows = self
            .cells
            .iter()
            .flat_map(|c| {
                c.estimators.iter().map(move |e| {
                    vec![
                        c.delta.to_string(),
                        e.estimator.to_string(),
                        e.tp_mean.to_string(),
                        e.fp_mean.to_string(),
                        e.tp_pct.to_string(),
                        e.fp_pct.to_string(),
                    ]
                })
            })
            .collect();
        csv_string(&["delta", "estimator", "tp_mean", "fp_mean", "tp_pct", "fp_pct"], rows)
    }

    /// Long format: predictor_index, method, delta, frequency (1-based index).
    pub fn selection_csv(&self) -> Result<String> {
        let mut rows = Vec::new();
        for c in &self.cells {
            for s in &c.selection {
                for (j, f) in s.frequency.iter().enumerate() {
                    rows.push(vec![
                        (j + 1).to_string(),
                        s.estimator.to_string(),
                        c.delta.to_string(),
                        f.to_string(),
                    ]);
                }
            }
        }
        csv_string(&["predictor_index", "method", "delta", "frequency"], rows)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// RMSE table rounded to three decimals.
    pub fn render_table(&self) -> String {
        let shown = [
            Estimator::ALASSO,
            Estimator::FS1,
            Estimator::FS3,
            Estimator::PS,
            Estimator::S,
            Estimator::FS2,
        ];
        let mut out = String::new();
        let _ = write!(out, "{:>7}", "Delta");
        for e in shown {
            let _ = write!(out, " {:>8}", e.name());
        }
        out.push('\n');
        for c in &self.cells {
            let _ = write!(out, "{:>7.3}", c.delta);
            for e in shown {
                let _ = write!(out, " {:>8.3}", c.summary(e).rmse);
            }
            out.push('\n');
        }
        out
    }
}
