//! K-fold cross-validation over a lambda path with the minimum and
//! one-standard-error selection rules.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cd::{check_alasso_inputs, fit_path, lambda_sequence, penalty_weights, Design};
use super::ridge;
use super::{active_indices, predict_linear, Dataset, FitResult, SolverOptions};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    #[serde(rename = "min")]
    Min,
    #[serde(rename = "1se")]
    OneSe,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvOptions {
    pub folds: usize,
    pub rule: Rule,
    pub seed: u64,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            folds: 10,
            rule: Rule::OneSe,
            seed: 0,
        }
    }
}

/// Which penalized estimator a cross-validation run tunes.
#[derive(Debug, Clone, Copy)]
pub enum Method<'a> {
    Lasso,
    /// Weighted L1 with weights `1/|pilot_j|^gamma`; zero pilots are excluded.
    Alasso {
        gamma: f64,
        pilot: &'a [f64],
    },
    Ridge,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvSelection {
    pub lambda_path: Vec<f64>,
    pub cv_mean: Vec<f64>,
    pub cv_se: Vec<f64>,
    pub lambda_min: f64,
    pub lambda_1se: f64,
    pub rule: Rule,
    /// Full-data fit at the lambda picked by `rule`.
    pub fit: FitResult,
}

impl CvSelection {
    pub fn selected_lambda(&self) -> f64 {
        match self.rule {
            Rule::Min => self.lambda_min,
            Rule::OneSe => self.lambda_1se,
        }
    }
}

/// Fold label for every observation: a seeded shuffle dealt round-robin.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    perm.shuffle(&mut rng);
    let mut fold = vec![0; n];
    for (i, &obs) in perm.iter().enumerate() {
        fold[obs] = i % folds;
    }
    fold
}

pub(crate) fn split(fold: &[usize], k: usize) -> (Vec<usize>, Vec<usize>) {
    let train = (0..fold.len()).filter(|&i| fold[i] != k).collect();
    let test = (0..fold.len()).filter(|&i| fold[i] == k).collect();
    (train, test)
}

struct FoldErrors {
    errors: Vec<f64>,
    size: usize,
}

fn test_mse(test: &Dataset, coef: &[f64], b0: f64) -> f64 {
    let pred = predict_linear(test.x(), coef, b0);
    (test.y() - pred).norm_squared() / test.n() as f64
}

pub fn cv_select(data: &Dataset, method: Method<'_>, cv: &CvOptions, opts: &SolverOptions) -> Result<CvSelection> {
    opts.validate()?;
    if cv.folds < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 folds, got {}",
            cv.folds
        )));
    }
    if cv.folds > data.n() {
        return Err(Error::InvalidArgument(format!(
            "{} folds requested for {} observations",
            cv.folds,
            data.n()
        )));
    }
    match method {
        Method::Lasso => l1_cv(data, (0..data.p()).collect(), vec![1.0; data.p()], None, cv, opts),
        Method::Alasso { gamma, pilot } => {
            check_alasso_inputs(data, gamma, pilot)?;
            let all = penalty_weights(pilot, gamma);
            let cols = active_indices(pilot);
            if cols.is_empty() {
                let mut fit = FitResult::null(data, 0.0, opts.intercept);
                fit.gamma = Some(gamma);
                fit.warnings
                    .push("pilot has no nonzero coefficients; returning the null fit".into());
                return Ok(CvSelection {
                    lambda_path: Vec::new(),
                    cv_mean: Vec::new(),
                    cv_se: Vec::new(),
                    lambda_min: 0.0,
                    lambda_1se: 0.0,
                    rule: cv.rule,
                    fit,
                });
            }
            let weights = cols.iter().map(|&j| all[j]).collect();
            l1_cv(data, cols, weights, Some(gamma), cv, opts)
        }
        Method::Ridge => ridge_cv(data, cv, opts),
    }
}

fn l1_cv(
    data: &Dataset,
    cols: Vec<usize>,
    weights: Vec<f64>,
    gamma: Option<f64>,
    cv: &CvOptions,
    opts: &SolverOptions,
) -> Result<CvSelection> {
    let design = Design::new(data, cols.clone(), opts);
    let lmax = design.lambda_max(&weights);
    if !(lmax > 0.0) {
        return Err(Error::InvalidArgument(
            "no included predictor is correlated with the response (lambda_max = 0)".into(),
        ));
    }
    let lambdas = lambda_sequence(lmax, opts);
    let full = fit_path(&design, &weights, &lambdas, opts);
    let len = full.len();

    let fold = fold_assignment(data.n(), cv.folds, cv.seed);
    let per_fold: Vec<FoldErrors> = (0..cv.folds)
        .into_par_iter()
        .map(|k| {
            let (train_idx, test_idx) = split(&fold, k);
            let train = data.rows(&train_idx);
            let test = data.rows(&test_idx);
            let d = Design::new(&train, cols.clone(), opts);
            let path = fit_path(&d, &weights, &lambdas[..len], opts);
            let errors = path
                .iter()
                .map(|pt| {
                    let (coef, b0) = d.to_original(&pt.beta);
                    test_mse(&test, &coef, b0)
                })
                .collect();
            FoldErrors {
                errors,
                size: test_idx.len(),
            }
        })
        .collect();

    let usable = per_fold.iter().map(|f| f.errors.len()).fold(len, usize::min);
    let (cv_mean, cv_se) = aggregate(&per_fold, usable, data.n());
    let path = lambdas[..usable].to_vec();
    let (i_min, i_1se) = select_indices(&cv_mean, &cv_se);
    let chosen = match cv.rule {
        Rule::Min => i_min,
        Rule::OneSe => i_1se,
    };
    let pt = &full[chosen];
    let mut fit = design.to_fit(&pt.beta, path[chosen]);
    fit.gamma = gamma;
    fit.iterations = pt.sweeps;
    fit.converged = pt.converged;
    if !pt.converged {
        fit.warnings.push(format!(
            "coordinate descent did not converge within {} sweeps",
            opts.max_sweeps
        ));
    }
    Ok(CvSelection {
        lambda_min: path[i_min],
        lambda_1se: path[i_1se],
        lambda_path: path,
        cv_mean,
        cv_se,
        rule: cv.rule,
        fit,
    })
}

/// Fold-size weighted mean and standard error of the fold errors.
fn aggregate(per_fold: &[FoldErrors], len: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
    let nf = n as f64;
    let k = per_fold.len() as f64;
    let mut mean = Vec::with_capacity(len);
    let mut se = Vec::with_capacity(len);
    for m in 0..len {
        let cvm: f64 = per_fold.iter().map(|f| f.size as f64 * f.errors[m]).sum::<f64>() / nf;
        let var: f64 = per_fold
            .iter()
            .map(|f| f.size as f64 * (f.errors[m] - cvm).powi(2))
            .sum::<f64>()
            / nf;
        mean.push(cvm);
        se.push((var / (k - 1.0)).sqrt());
    }
    (mean, se)
}

/// Index of the minimum (first on ties, i.e. largest lambda) and of the
/// largest lambda whose mean error is within one standard error of it.
fn select_indices(cv_mean: &[f64], cv_se: &[f64]) -> (usize, usize) {
    let mut i_min = 0;
    for (m, &v) in cv_mean.iter().enumerate() {
        if v < cv_mean[i_min] {
            i_min = m;
        }
    }
    let bound = cv_mean[i_min] + cv_se[i_min];
    let i_1se = cv_mean.iter().position(|&v| v <= bound).unwrap_or(i_min);
    (i_min, i_1se)
}

fn ridge_cv(data: &Dataset, cv: &CvOptions, opts: &SolverOptions) -> Result<CvSelection> {
    let lambdas = ridge::lambda_grid(data, opts);
    let fold = fold_assignment(data.n(), cv.folds, cv.seed);
    let per_fold: Vec<FoldErrors> = (0..cv.folds)
        .into_par_iter()
        .map(|k| {
            let (train_idx, test_idx) = split(&fold, k);
            let train = data.rows(&train_idx);
            let test = data.rows(&test_idx);
            let errors = ridge::path(&train, &lambdas, opts)
                .into_iter()
                .map(|(coef, b0)| test_mse(&test, &coef, b0))
                .collect();
            FoldErrors {
                errors,
                size: test_idx.len(),
            }
        })
        .collect();
    let (cv_mean, cv_se) = aggregate(&per_fold, lambdas.len(), data.n());
    let (i_min, i_1se) = select_indices(&cv_mean, &cv_se);
    let chosen = match cv.rule {
        Rule::Min => i_min,
        Rule::OneSe => i_1se,
    };
    let fit = ridge::fit_ridge(data, lambdas[chosen], opts)?;
    Ok(CvSelection {
        lambda_min: lambdas[i_min],
        lambda_1se: lambdas[i_1se],
        lambda_path: lambdas,
        cv_mean,
        cv_se,
        rule: cv.rule,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_are_balanced_and_seeded() {
        let a = fold_assignment(23, 5, 7);
        let b = fold_assignment(23, 5, 7);
        assert_eq!(a, b);
        let mut counts = [0usize; 5];
        a.iter().for_each(|&f| counts[f] += 1);
        assert_eq!(counts.iter().sum::<usize>(), 23);
        assert!(counts.iter().all(|&c| c == 4 || c == 5));
        assert_ne!(a, fold_assignment(23, 5, 8));
    }

    #[test]
    fn one_se_index_not_smaller_lambda() {
        let mean = [5.0, 3.0, 2.1, 2.0, 2.05];
        let se = [0.1, 0.1, 0.1, 0.2, 0.1];
        let (i_min, i_1se) = select_indices(&mean, &se);
        assert_eq!(i_min, 3);
        assert_eq!(i_1se, 2);
    }

    #[test]
    fn aggregate_weights_by_fold_size() {
        let folds = vec![
            FoldErrors {
                errors: vec![1.0],
                size: 1,
            },
            FoldErrors {
                errors: vec![4.0],
                size: 3,
            },
        ];
        let (m, s) = aggregate(&folds, 1, 4);
        assert!((m[0] - 3.25).abs() < 1e-12);
        // weighted variance (1*5.0625 + 3*0.5625)/4 = 1.6875, / (K-1) = 1.6875
        assert!((s[0] - 1.6875f64.sqrt()).abs() < 1e-12);
    }
}
