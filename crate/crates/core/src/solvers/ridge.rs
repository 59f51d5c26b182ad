use nalgebra::DVector;

use super::cd::Design;
use super::{Dataset, FitResult, SolverOptions};
use crate::error::{Error, Result};
use crate::linalg::spd_solve;

/// Ridge fit minimizing `||y - b0 - X beta||^2 + lambda ||beta||^2`.
///
/// Solves the `p x p` normal equations when `p <= n` and the `n x n` dual
/// system `beta = X'(XX' + lambda I)^{-1} y` otherwise.
pub fn fit_ridge(data: &Dataset, lambda: f64, opts: &SolverOptions) -> Result<FitResult> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "ridge needs a positive finite lambda, got {lambda}"
        )));
    }
    let design = Design::new(data, (0..data.p()).collect(), opts);
    let x = design.matrix();
    let y = design.response();
    let beta = if data.p() <= data.n() {
        let mut gram = x.transpose() * &x;
        gram.iter_mut().step_by(data.p() + 1).for_each(|d| *d += lambda);
        spd_solve(&gram, &(x.transpose() * &y), 0.0)
    } else {
        let mut gram = &x * x.transpose();
        gram.iter_mut().step_by(data.n() + 1).for_each(|d| *d += lambda);
        spd_solve(&gram, &y, 0.0).map(|a| x.transpose() * a)
    }
    .ok_or_else(|| Error::InvalidArgument("ridge system is not positive definite".into()))?;
    let (coefficients, intercept) = design.to_original(beta.as_slice());
    let mut fit = FitResult::from_coefficients(coefficients, intercept, lambda);
    fit.active_set = (0..data.p()).collect();
    Ok(fit)
}

/// Eigen-decomposition of the smaller Gram matrix of the working design:
/// `X'X` when `p <= n`, `XX'` otherwise. Eigenvalues are the squared
/// singular values.
struct Spectrum {
    design: Design,
    eigenvalues: Vec<f64>,
    /// Coordinates of the ridge solution in the eigenbasis before scaling.
    basis: nalgebra::DMatrix<f64>,
    proj: DVector<f64>,
}

fn spectrum(data: &Dataset, opts: &SolverOptions) -> Spectrum {
    let design = Design::new(data, (0..data.p()).collect(), opts);
    let x = design.matrix();
    let y = design.response();
    let (eigenvalues, basis, proj) = if data.p() <= data.n() {
        let eig = (x.transpose() * &x).symmetric_eigen();
        let xty = x.transpose() * &y;
        let proj = eig.eigenvectors.transpose() * xty;
        (eig.eigenvalues, eig.eigenvectors, proj)
    } else {
        let eig = (&x * x.transpose()).symmetric_eigen();
        let proj = eig.eigenvectors.transpose() * &y;
        let basis = x.transpose() * &eig.eigenvectors;
        (eig.eigenvalues, basis, proj)
    };
    Spectrum {
        design,
        eigenvalues: eigenvalues.iter().map(|v| v.max(0.0)).collect(),
        basis,
        proj,
    }
}

/// Decreasing grid spanning `100 s_max^2` down by `path_ratio`.
pub(crate) fn lambda_grid(data: &Dataset, opts: &SolverOptions) -> Vec<f64> {
    let top = 100.0 * spectrum(data, opts).eigenvalues.iter().cloned().fold(0.0, f64::max);
    let len = opts.path_length;
    let log_ratio = opts.path_ratio.ln();
    (0..len)
        .map(|m| top * (log_ratio * m as f64 / (len - 1) as f64).exp())
        .collect()
}

/// Ridge coefficients for every lambda from one eigen-decomposition.
pub(crate) fn path(data: &Dataset, lambdas: &[f64], opts: &SolverOptions) -> Vec<(Vec<f64>, f64)> {
    let sp = spectrum(data, opts);
    lambdas
        .iter()
        .map(|&lambda| {
            let scaled = DVector::from_fn(sp.proj.len(), |i, _| sp.proj[i] / (sp.eigenvalues[i] + lambda));
            let beta: DVector<f64> = &sp.basis * scaled;
            sp.design.to_original(beta.as_slice())
        })
        .collect()
}
