//! Penalized least-squares solvers: LASSO, adaptive LASSO and ridge, with
//! log-spaced lambda paths and K-fold cross-validation.
//!
//! All penalized objectives use the unscaled residual sum of squares,
//!
//! ```text
//! sum_i (y_i - b0 - x_i' beta)^2 + lambda * sum_j w_j |beta_j|
//! ```
//!
//! so a coordinate update soft-thresholds `x_j' r` at `lambda * w_j / 2` and
//! `lambda_max = 2 max_j |x_j' (y - ybar)| / w_j`.

mod cd;
mod cv;
mod ridge;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cd::{fit_alasso, fit_lasso, kkt_residual, lambda_max, objective, penalty_weights};
pub use cv::{cv_select, fold_assignment, CvOptions, CvSelection, Method, Rule};
pub use ridge::fit_ridge;

/// Design matrix and response. Rows are observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::InvalidDataset(format!(
                "design has {} rows but response has {} entries",
                x.nrows(),
                y.len()
            )));
        }
        if x.nrows() < 2 {
            return Err(Error::InvalidDataset("need at least 2 observations".into()));
        }
        if x.ncols() < 1 {
            return Err(Error::InvalidDataset("need at least 1 predictor".into()));
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            let (i, j) = (pos % x.nrows(), pos / x.nrows());
            return Err(Error::InvalidDataset(format!(
                "non-finite design entry at row {i}, column {j}"
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!("non-finite response at row {i}")));
        }
        Ok(Self { x, y, names: None })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p() {
            return Err(Error::InvalidDataset(format!(
                "{} feature names for {} predictors",
                names.len(),
                self.p()
            )));
        }
        let mut sorted: Vec<&String> = names.iter().collect();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidDataset(format!("duplicate feature name '{}'", w[0])));
        }
        self.names = Some(names);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    /// Feature label, falling back to `x{j+1}` for unnamed datasets.
    pub fn name(&self, j: usize) -> String {
        match &self.names {
            Some(names) => names[j].clone(),
            None => format!("x{}", j + 1),
        }
    }

    /// New dataset made of the given rows (repeats allowed, as in bootstrap draws).
    pub fn rows(&self, idx: &[usize]) -> Dataset {
        let x = DMatrix::from_fn(idx.len(), self.p(), |i, j| self.x[(idx[i], j)]);
        let y = DVector::from_fn(idx.len(), |i, _| self.y[idx[i]]);
        Dataset {
            x,
            y,
            names: self.names.clone(),
        }
    }

    /// Column means of the design and the response mean.
    pub fn means(&self) -> (Vec<f64>, f64) {
        let n = self.n() as f64;
        let xm = (0..self.p()).map(|j| self.x.column(j).sum() / n).collect();
        (xm, self.y.sum() / n)
    }

    /// Copy with every column and the response centered at zero.
    pub fn centered(&self) -> Dataset {
        let (xm, ym) = self.means();
        let x = DMatrix::from_fn(self.n(), self.p(), |i, j| self.x[(i, j)] - xm[j]);
        let y = self.y.map(|v| v - ym);
        Dataset {
            x,
            y,
            names: self.names.clone(),
        }
    }
}

/// Tuning knobs shared by every coordinate-descent fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Stop when the largest coefficient change in a sweep is below this.
    pub tolerance: f64,
    pub max_sweeps: usize,
    pub standardize: bool,
    pub intercept: bool,
    pub path_length: usize,
    /// Smallest lambda on the path as a fraction of `lambda_max`.
    pub path_ratio: f64,
    /// Truncate a path once the explained deviance saturates.
    pub early_stop: bool,
    /// Record the penalized objective after every sweep.
    pub trace_objective: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-7,
            max_sweeps: 10_000,
            standardize: false,
            intercept: true,
            path_length: 100,
            path_ratio: 1e-4,
            early_stop: true,
            trace_objective: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidArgument("max_sweeps must be at least 1".into()));
        }
        if self.path_length < 2 {
            return Err(Error::InvalidArgument("path_length must be at least 2".into()));
        }
        if !(self.path_ratio > 0.0 && self.path_ratio < 1.0) {
            return Err(Error::InvalidArgument("path_ratio must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn with_intercept(mut self, intercept: bool) -> Self {
        self.intercept = intercept;
        self
    }
}

/// Output of a single penalized fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// Indices of nonzero coefficients, ascending.
    pub active_set: Vec<usize>,
    pub lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective_trace: Option<Vec<f64>>,
}

impl FitResult {
    pub(crate) fn from_coefficients(coefficients: Vec<f64>, intercept: f64, lambda: f64) -> Self {
        let active_set = active_indices(&coefficients);
        Self {
            coefficients,
            intercept,
            active_set,
            lambda,
            gamma: None,
            iterations: 0,
            converged: true,
            warnings: Vec::new(),
            objective_trace: None,
        }
    }

    /// All-zero fit; the intercept is the response mean when requested.
    pub fn null(data: &Dataset, lambda: f64, intercept: bool) -> Self {
        let b0 = if intercept { data.y().mean() } else { 0.0 };
        Self::from_coefficients(vec![0.0; data.p()], b0, lambda)
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        predict_linear(x, &self.coefficients, self.intercept)
    }
}

pub(crate) fn active_indices(coefficients: &[f64]) -> Vec<usize> {
    coefficients
        .iter()
        .enumerate()
        .filter(|(_, &b)| b != 0.0)
        .map(|(j, _)| j)
        .collect()
}

/// `x * beta + b0`, skipping zero coefficients.
pub fn predict_linear(x: &DMatrix<f64>, beta: &[f64], b0: f64) -> DVector<f64> {
    let mut out = DVector::from_element(x.nrows(), b0);
    for (j, &b) in beta.iter().enumerate() {
        if b != 0.0 {
            out.axpy(b, &x.column(j), 1.0);
        }
    }
    out
}

/// `sgn(z) * max(|z| - t, 0)`.
pub fn soft_threshold(z: f64, t: f64) -> Result<f64> {
    if !z.is_finite() || !t.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "soft_threshold needs finite inputs, got z = {z}, t = {t}"
        )));
    }
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "threshold must be nonnegative, got {t}"
        )));
    }
    Ok(soft(z, t))
}

#[inline]
pub(crate) fn soft(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(3.0, 1.0).unwrap(), 2.0);
        assert_eq!(soft_threshold(-0.5, 0.5).unwrap(), 0.0);
        for z in [-7.25, -1e-9, 0.0, 3.5, 1e12] {
            assert_eq!(soft_threshold(z, 0.0).unwrap(), z);
        }
        assert_eq!(soft_threshold(-3.0, 1.0).unwrap(), -2.0);
    }

    #[test]
    fn soft_threshold_rejects_bad_input() {
        assert!(soft_threshold(f64::NAN, 1.0).is_err());
        assert!(soft_threshold(1.0, f64::INFINITY).is_err());
        assert!(soft_threshold(1.0, -0.1).is_err());
    }

    #[test]
    fn dataset_validation() {
        let x = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        assert!(Dataset::new(x.clone(), DVector::from_vec(vec![1.0])).is_err());
        assert!(Dataset::new(x.clone(), DVector::from_vec(vec![1.0, f64::NAN])).is_err());
        let one_row = DMatrix::from_row_slice(1, 1, &[1.0]);
        assert!(Dataset::new(one_row, DVector::from_vec(vec![1.0])).is_err());
        let d = Dataset::new(x, DVector::from_vec(vec![1.0, 2.0])).unwrap();
        assert!(d.clone().with_names(vec!["a".into(), "b".into()]).is_err());
        assert_eq!(d.name(0), "x1");
        let named = d.with_names(vec!["gene".into()]).unwrap();
        assert_eq!(named.name(0), "gene");
    }

    #[test]
    fn duplicate_names_rejected() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let d = Dataset::new(x, DVector::from_vec(vec![1.0, 2.0])).unwrap();
        assert!(d.with_names(vec!["a".into(), "a".into()]).is_err());
    }

    #[test]
    fn rows_and_centering() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 2.0, 1.0, 3.0, 5.0]);
        let d = Dataset::new(x, DVector::from_vec(vec![1.0, 2.0, 6.0])).unwrap();
        let r = d.rows(&[2, 2, 0]);
        assert_eq!(r.y().as_slice(), &[6.0, 6.0, 1.0]);
        assert_eq!(r.x()[(1, 1)], 5.0);
        let c = d.centered();
        assert!(c.y().sum().abs() < 1e-12);
        assert!(c.x().column(1).sum().abs() < 1e-12);
    }
}
