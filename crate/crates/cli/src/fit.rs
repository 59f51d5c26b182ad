//! The `fit` command: one estimator on one dataset.

use serde::Serialize;

use double_shrink::config::{FitMethod, RunConfig};
use double_shrink::pipeline::{fit_pipeline, Pilot};
use double_shrink::solvers::{cv_select, CvOptions, Dataset, FitResult, Method};
use double_shrink::Result;

#[derive(Debug, Serialize)]
pub struct FitReport {
    pub method: FitMethod,
    pub n: usize,
    pub p: usize,
    pub response_column: String,
    pub lambda: Lambdas,
    pub intercept: f64,
    pub selected_count: usize,
    pub selected: Vec<Selected>,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    pub shrinkage: Option<ShrinkageSummary>,
    /// Set when the method fell back to another estimate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Default, Serialize)]
pub struct Lambdas {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lasso: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alasso: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ridge: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct Selected {
    pub index: usize,
    pub name: String,
    pub coefficient: f64,
}

#[derive(Debug, Serialize)]
pub struct ShrinkageSummary {
    pub s1: Vec<String>,
    pub s2: Vec<String>,
    pub p1: usize,
    pub p2: usize,
    pub p3: usize,
    pub wn: Option<f64>,
    pub factor: Option<f64>,
    pub sigma2_hat: f64,
}

fn selected(data: &Dataset, coefficients: &[f64]) -> Vec<Selected> {
    coefficients
        .iter()
        .enumerate()
        .filter(|(_, &b)| b != 0.0)
        .map(|(j, &b)| Selected {
            index: j,
            name: data.name(j),
            coefficient: b,
        })
        .collect()
}

fn names(data: &Dataset, idx: &[usize]) -> Vec<String> {
    idx.iter().map(|&j| data.name(j)).collect()
}

pub fn run(data: &Dataset, config: &RunConfig) -> Result<FitReport> {
    let fit_config = config.fit.as_ref().expect("effective config has a fit section");
    let response_column = config
        .data
        .as_ref()
        .map(|d| d.response_column.clone())
        .unwrap_or_default();
    let opts = &fit_config.pipeline;
    let cv = CvOptions {
        seed: fit_config.seed,
        ..opts.cv
    };
    let solver = &opts.solver;
    let report = |lambda: Lambdas, coefficients: &[f64], intercept: f64, warnings: Vec<String>| {
        let sel = selected(data, coefficients);
        FitReport {
            method: fit_config.method,
            n: data.n(),
            p: data.p(),
            response_column: response_column.clone(),
            lambda,
            intercept,
            selected_count: sel.len(),
            selected: sel,
            shrinkage: None,
            warning: None,
            warnings,
        }
    };
    let single = |f: &FitResult, lambda: Lambdas| report(lambda, &f.coefficients, f.intercept, f.warnings.clone());

    match fit_config.method {
        FitMethod::Lasso => {
            let f = cv_select(data, Method::Lasso, &cv, solver)?.fit;
            Ok(single(
                &f,
                Lambdas {
                    lasso: Some(f.lambda),
                    ..Lambdas::default()
                },
            ))
        }
        FitMethod::Ridge => {
            let f = cv_select(data, Method::Ridge, &cv, solver)?.fit;
            Ok(single(
                &f,
                Lambdas {
                    ridge: Some(f.lambda),
                    ..Lambdas::default()
                },
            ))
        }
        FitMethod::Alasso => {
            let lasso = cv_select(data, Method::Lasso, &cv, solver)?.fit;
            let ridge = match opts.pilot {
                Pilot::Lasso => None,
                Pilot::Ridge => Some(cv_select(data, Method::Ridge, &cv, solver)?.fit),
            };
            let pilot = ridge.as_ref().unwrap_or(&lasso);
            let method = Method::Alasso {
                gamma: opts.gamma,
                pilot: &pilot.coefficients,
            };
            let f = cv_select(data, method, &cv, solver)?.fit;
            Ok(single(
                &f,
                Lambdas {
                    lasso: Some(lasso.lambda),
                    alasso: Some(f.lambda),
                    ridge: ridge.map(|r| r.lambda),
                },
            ))
        }
        method => {
            let estimator = method.estimator().expect("shrinkage methods map to an estimator");
            let variant = estimator.variant().expect("shrinkage estimator");
            let fit = fit_pipeline(data, opts, fit_config.seed)?;
            let sh = &fit.shrinkage;
            let chosen = sh.fit(variant);
            let mut warnings = fit.lasso.warnings.clone();
            warnings.extend(fit.alasso.warnings.iter().cloned());
            warnings.extend(sh.warnings.iter().cloned());
            let mut out = report(
                Lambdas {
                    lasso: Some(fit.lasso.lambda),
                    alasso: Some(fit.alasso.lambda),
                    ridge: fit.ridge_pilot.as_ref().map(|r| r.lambda),
                },
                &chosen.full_beta,
                chosen.intercept,
                warnings,
            );
            out.shrinkage = Some(ShrinkageSummary {
                s1: names(data, &sh.partition.s1),
                s2: names(data, &sh.partition.s2),
                p1: sh.partition.p1(),
                p2: sh.partition.p2(),
                p3: sh.partition.p3(),
                wn: chosen.wn,
                factor: chosen.factor,
                sigma2_hat: sh.sigma2_hat,
            });
            out.warning = chosen.fallback.clone();
            Ok(out)
        }
    }
}
