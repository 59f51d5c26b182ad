//! The estimation procedure shared by the simulation, the bootstrap harness
//! and the CLI: cross-validated LASSO, a pilot fit, cross-validated adaptive
//! LASSO on the pilot weights, then every double-shrinkage variant.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shrinkage::{double_shrink, DoubleShrinkage, ShrinkageOptions, Variant, WnScaling};
use crate::solvers::{cv_select, fit_alasso, fit_lasso, CvOptions, Dataset, FitResult, Method, SolverOptions};

/// Every estimator compared by the reports, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Estimator {
    LASSO,
    ALASSO,
    S,
    PS,
    FS1,
    FS2,
    FS3,
}

impl Estimator {
    pub const ALL: [Estimator; 7] = [
        Estimator::LASSO,
        Estimator::ALASSO,
        Estimator::S,
        Estimator::PS,
        Estimator::FS1,
        Estimator::FS2,
        Estimator::FS3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::LASSO => "LASSO",
            Estimator::ALASSO => "ALASSO",
            Estimator::S => "S",
            Estimator::PS => "PS",
            Estimator::FS1 => "FS1",
            Estimator::FS2 => "FS2",
            Estimator::FS3 => "FS3",
        }
    }

    pub fn variant(self) -> Option<Variant> {
        match self {
            Estimator::S => Some(Variant::S),
            Estimator::PS => Some(Variant::PS),
            Estimator::FS1 => Some(Variant::FS1),
            Estimator::FS2 => Some(Variant::FS2),
            Estimator::FS3 => Some(Variant::FS3),
            Estimator::LASSO | Estimator::ALASSO => None,
        }
    }

    pub fn index(self) -> usize {
        Estimator::ALL.iter().position(|&e| e == self).expect("listed")
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown estimator '{s}'")))
    }
}

/// Source of the adaptive-LASSO weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pilot {
    /// Cross-validated LASSO fit (selection rule of `cv.rule`).
    #[default]
    Lasso,
    /// Cross-validated ridge fit.
    Ridge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineOptions {
    pub solver: SolverOptions,
    pub cv: CvOptions,
    pub gamma: f64,
    pub pilot: Pilot,
    pub wn_scaling: WnScaling,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            cv: CvOptions::default(),
            gamma: 1.0,
            pilot: Pilot::Lasso,
            wn_scaling: WnScaling::Wald,
        }
    }
}

impl PipelineOptions {
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if self.cv.folds < 2 {
            return Err(Error::Config {
                key: "cv.folds".into(),
                message: "need at least 2 folds".into(),
            });
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config {
                key: "gamma".into(),
                message: "must be positive".into(),
            });
        }
        Ok(())
    }

    fn shrinkage(&self) -> ShrinkageOptions {
        ShrinkageOptions {
            wn_scaling: self.wn_scaling,
            intercept: self.solver.intercept,
        }
    }
}

/// Coefficients and intercept of one estimator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearPredictor {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

impl LinearPredictor {
    pub fn predict(&self, x: &nalgebra::DMatrix<f64>) -> nalgebra::DVector<f64> {
        crate::solvers::predict_linear(x, &self.coefficients, self.intercept)
    }

    pub fn active_set(&self) -> Vec<usize> {
        crate::solvers::active_indices(&self.coefficients)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineFit {
    pub lasso: FitResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ridge_pilot: Option<FitResult>,
    pub alasso: FitResult,
    pub shrinkage: DoubleShrinkage,
}

impl PipelineFit {
    pub fn predictor(&self, estimator: Estimator) -> LinearPredictor {
        match estimator.variant() {
            None => {
                let fit = if estimator == Estimator::LASSO {
                    &self.lasso
                } else {
                    &self.alasso
                };
                LinearPredictor {
                    coefficients: fit.coefficients.clone(),
                    intercept: fit.intercept,
                }
            }
            Some(v) => {
                let fit = self.shrinkage.fit(v);
                LinearPredictor {
                    coefficients: fit.full_beta.clone(),
                    intercept: fit.intercept,
                }
            }
        }
    }

    pub fn predictors(&self) -> Vec<LinearPredictor> {
        Estimator::ALL.iter().map(|&e| self.predictor(e)).collect()
    }

    /// Tuning parameters chosen on this data, reusable for fixed-lambda refits.
    pub fn tuning(&self) -> Tuning {
        Tuning {
            lasso_lambda: self.lasso.lambda,
            alasso_lambda: self.alasso.lambda,
            pilot_lambda: self.ridge_pilot.as_ref().map(|f| f.lambda),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tuning {
    pub lasso_lambda: f64,
    pub alasso_lambda: f64,
    pub pilot_lambda: Option<f64>,
}

/// Cross-validated LASSO and adaptive LASSO on shared folds, then shrinkage.
pub fn fit_pipeline(data: &Dataset, opts: &PipelineOptions, seed: u64) -> Result<PipelineFit> {
    let cv = CvOptions { seed, ..opts.cv };
    let lasso = cv_select(data, Method::Lasso, &cv, &opts.solver)?.fit;
    let ridge_pilot = match opts.pilot {
        Pilot::Lasso => None,
        Pilot::Ridge => Some(cv_select(data, Method::Ridge, &cv, &opts.solver)?.fit),
    };
    let pilot = ridge_pilot.as_ref().unwrap_or(&lasso);
    let method = Method::Alasso {
        gamma: opts.gamma,
        pilot: &pilot.coefficients,
    };
    let alasso = cv_select(data, method, &cv, &opts.solver)?.fit;
    let shrinkage = double_shrink(data, &lasso, &alasso, &opts.shrinkage())?;
    Ok(PipelineFit {
        lasso,
        ridge_pilot,
        alasso,
        shrinkage,
    })
}

/// Same procedure with lambdas fixed in advance (no inner cross-validation).
pub fn fit_pipeline_fixed(data: &Dataset, opts: &PipelineOptions, tuning: &Tuning) -> Result<PipelineFit> {
    let lasso = fit_lasso(data, tuning.lasso_lambda, &opts.solver)?;
    let ridge_pilot = match (opts.pilot, tuning.pilot_lambda) {
        (Pilot::Ridge, Some(l)) => Some(crate::solvers::fit_ridge(data, l, &opts.solver)?),
        _ => None,
    };
    let pilot = ridge_pilot.as_ref().unwrap_or(&lasso);
    let alasso = fit_alasso(data, tuning.alasso_lambda, opts.gamma, pilot, &opts.solver)?;
    let shrinkage = double_shrink(data, &lasso, &alasso, &opts.shrinkage())?;
    Ok(PipelineFit {
        lasso,
        ridge_pilot,
        alasso,
        shrinkage,
    })
}
