//! Cyclic coordinate descent for (weighted) L1-penalized least squares.
//!
//! The solver keeps a working set seeded by the sequential strong rule and
//! cycles over it until the largest coefficient change drops below the
//! tolerance; a full gradient pass then either certifies the KKT conditions
//! or grows the working set and resumes.

use nalgebra::DVector;

use super::{active_indices, predict_linear, soft, Dataset, FitResult, SolverOptions};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, spd_solve};

/// Included columns of a dataset, centered (when fitting an intercept) and
/// optionally scaled to unit mean square, stored column-major.
pub(crate) struct Design {
    n: usize,
    p: usize,
    cols: Vec<usize>,
    x: Vec<f64>,
    sq_norms: Vec<f64>,
    means: Vec<f64>,
    scales: Vec<f64>,
    y: Vec<f64>,
    y_mean: f64,
}

impl Design {
    pub(crate) fn new(data: &Dataset, cols: Vec<usize>, opts: &SolverOptions) -> Self {
        let n = data.n();
        let nf = n as f64;
        let mut x = Vec::with_capacity(n * cols.len());
        let mut sq_norms = Vec::with_capacity(cols.len());
        let mut means = Vec::with_capacity(cols.len());
        let mut scales = Vec::with_capacity(cols.len());
        for &j in &cols {
            let col = data.x().column(j);
            let mean = if opts.intercept { col.sum() / nf } else { 0.0 };
            let start = x.len();
            x.extend(col.iter().map(|v| v - mean));
            let mut scale = 1.0;
            if opts.standardize {
                let ms = dot(&x[start..], &x[start..]) / nf;
                if ms > 0.0 {
                    scale = ms.sqrt();
                    x[start..].iter_mut().for_each(|v| *v /= scale);
                }
            }
            sq_norms.push(dot(&x[start..], &x[start..]));
            means.push(mean);
            scales.push(scale);
        }
        let y_mean = if opts.intercept { data.y().mean() } else { 0.0 };
        let y = data.y().iter().map(|v| v - y_mean).collect();
        Self {
            n,
            p: data.p(),
            cols,
            x,
            sq_norms,
            means,
            scales,
            y,
            y_mean,
        }
    }

    pub(crate) fn k(&self) -> usize {
        self.cols.len()
    }

    pub(crate) fn matrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_column_slice(self.n, self.k(), &self.x)
    }

    pub(crate) fn response(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.y)
    }

    #[inline]
    fn col(&self, j: usize) -> &[f64] {
        &self.x[j * self.n..(j + 1) * self.n]
    }

    /// Smallest lambda at which every included coefficient is zero.
    pub(crate) fn lambda_max(&self, weights: &[f64]) -> f64 {
        (0..self.k())
            .filter(|&j| self.sq_norms[j] > 0.0)
            .map(|j| 2.0 * dot(self.col(j), &self.y).abs() / weights[j])
            .fold(0.0, f64::max)
    }

    /// Residual sum of squares of the empty model in working coordinates.
    pub(crate) fn null_rss(&self) -> f64 {
        dot(&self.y, &self.y)
    }

    /// Maps working-scale coefficients back to the original parameterization.
    pub(crate) fn to_original(&self, beta: &[f64]) -> (Vec<f64>, f64) {
        let mut coef = vec![0.0; self.p];
        let mut b0 = self.y_mean;
        for (k, &j) in self.cols.iter().enumerate() {
            if beta[k] != 0.0 {
                let c = beta[k] / self.scales[k];
                coef[j] = c;
                b0 -= self.means[k] * c;
            }
        }
        (coef, b0)
    }

    pub(crate) fn to_fit(&self, beta: &[f64], lambda: f64) -> FitResult {
        let (coef, b0) = self.to_original(beta);
        FitResult::from_coefficients(coef, b0, lambda)
    }
}

/// Inner sweeps on a fixed nonzero set between exact face solves.
const NEWTON_EVERY: usize = 32;

pub(crate) struct PointOutcome {
    pub sweeps: usize,
    pub converged: bool,
    pub trace: Option<Vec<f64>>,
}

/// Coordinate-descent state carried along a lambda path (warm starts).
///
/// Inner sweeps run in covariance mode: the Gram matrix of the working set
/// is cached and the partial gradients `x_j' r` of working columns are
/// updated in place. The residual is rebuilt exactly at every full pass.
pub(crate) struct CdSolver<'a> {
    design: &'a Design,
    weights: &'a [f64],
    opts: &'a SolverOptions,
    xty: Vec<f64>,
    beta: Vec<f64>,
    resid: Vec<f64>,
    grad: Vec<f64>,
    slot: Vec<Option<usize>>,
    work: Vec<usize>,
    gram: Vec<Vec<f64>>,
    wgrad: Vec<f64>,
}

impl<'a> CdSolver<'a> {
    pub(crate) fn new(design: &'a Design, weights: &'a [f64], opts: &'a SolverOptions) -> Self {
        let k = design.k();
        let resid = design.y.clone();
        let xty: Vec<f64> = (0..k).map(|j| dot(design.col(j), &resid)).collect();
        Self {
            design,
            weights,
            opts,
            grad: xty.clone(),
            xty,
            beta: vec![0.0; k],
            resid,
            slot: vec![None; k],
            work: Vec::new(),
            gram: Vec::new(),
            wgrad: Vec::new(),
        }
    }

    pub(crate) fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub(crate) fn rss(&self) -> f64 {
        dot(&self.resid, &self.resid)
    }

    fn rebuild_resid(&mut self) {
        self.resid.copy_from_slice(&self.design.y);
        for j in 0..self.design.k() {
            if self.beta[j] != 0.0 {
                axpy(-self.beta[j], self.design.col(j), &mut self.resid);
            }
        }
    }

    fn objective(&mut self, lambda: f64) -> f64 {
        self.rebuild_resid();
        let pen: f64 = self
            .beta
            .iter()
            .zip(self.weights)
            .map(|(b, w)| if *b == 0.0 { 0.0 } else { w * b.abs() })
            .sum();
        self.rss() + lambda * pen
    }

    fn add_to_work(&mut self, j: usize) {
        if self.slot[j].is_some() {
            return;
        }
        let col = self.design.col(j);
        let mut row = Vec::with_capacity(self.work.len() + 1);
        for (q, &i) in self.work.iter().enumerate() {
            let v = dot(col, self.design.col(i));
            self.gram[q].push(v);
            row.push(v);
        }
        row.push(self.design.sq_norms[j]);
        let g = self.xty[j]
            - self.work.iter().zip(&row).map(|(&i, v)| v * self.beta[i]).sum::<f64>()
            - row[self.work.len()] * self.beta[j];
        self.slot[j] = Some(self.work.len());
        self.work.push(j);
        self.gram.push(row);
        self.wgrad.push(g);
    }

    fn update(&mut self, pos: usize, delta: f64) {
        for (g, v) in self.wgrad.iter_mut().zip(&self.gram[pos]) {
            *g -= delta * v;
        }
    }

    /// One pass over the working-set positions in `set`; returns the largest
    /// coefficient change.
    fn sweep(&mut self, lambda: f64, set: &[usize]) -> f64 {
        let mut max_change = 0.0f64;
        for &pos in set {
            let j = self.work[pos];
            let sq = self.design.sq_norms[j];
            let old = self.beta[j];
            let z = self.wgrad[pos] + sq * old;
            let new = soft(z, 0.5 * lambda * self.weights[j]) / sq;
            if new != old {
                self.beta[j] = new;
                self.update(pos, new - old);
                max_change = max_change.max((new - old).abs());
            }
        }
        max_change
    }

    /// Exact minimizer over the face fixed by the current signs of the
    /// working positions in `set`; kept only if every sign survives.
    fn newton_step(&mut self, lambda: f64, set: &[usize]) -> bool {
        let a = set.len();
        if a == 0 || a >= self.design.n {
            return false;
        }
        let gram = nalgebra::DMatrix::from_fn(a, a, |r, c| self.gram[set[r]][set[c]]);
        let rhs = DVector::from_fn(a, |r, _| {
            let j = self.work[set[r]];
            self.xty[j] - 0.5 * lambda * self.weights[j] * self.beta[j].signum()
        });
        let Some(sol) = spd_solve(&gram, &rhs, 1e-12) else {
            return false;
        };
        let keeps_signs = set.iter().zip(sol.iter()).all(|(&pos, v)| {
            let b = self.beta[self.work[pos]];
            v.is_finite() && *v != 0.0 && v.signum() == b.signum()
        });
        if !keeps_signs {
            return false;
        }
        for (r, &pos) in set.iter().enumerate() {
            let j = self.work[pos];
            let delta = sol[r] - self.beta[j];
            if delta != 0.0 {
                self.beta[j] = sol[r];
                self.update(pos, delta);
            }
        }
        true
    }

    /// Solves at `lambda`, warm-started from the current state.
    ///
    /// `prev_lambda` is the previous point of the path and drives the strong
    /// rule screen `|x_j' r| >= w_j (2 lambda - prev_lambda) / 2`.
    pub(crate) fn solve(&mut self, lambda: f64, prev_lambda: f64) -> PointOutcome {
        let k = self.design.k();
        let cutoff = 2.0 * lambda - prev_lambda;
        for j in 0..k {
            if self.design.sq_norms[j] > 0.0
                && (self.beta[j] != 0.0 || self.grad[j].abs() >= 0.5 * self.weights[j] * cutoff)
            {
                self.add_to_work(j);
            }
        }
        let mut trace = self.opts.trace_objective.then(Vec::new);
        let mut sweeps = 0usize;
        let mut all: Vec<usize> = (0..self.work.len()).collect();
        let mut nonzero = Vec::new();
        loop {
            let mut nonzero_only = false;
            let mut inner = 0usize;
            loop {
                if sweeps >= self.opts.max_sweeps {
                    self.rebuild_resid();
                    return PointOutcome {
                        sweeps,
                        converged: false,
                        trace,
                    };
                }
                sweeps += 1;
                let change = if nonzero_only {
                    self.sweep(lambda, &nonzero)
                } else {
                    self.sweep(lambda, &all)
                };
                if let Some(t) = trace.as_mut() {
                    t.push(self.objective(lambda));
                }
                if change < self.opts.tolerance {
                    if !nonzero_only {
                        break;
                    }
                    nonzero_only = false;
                } else if !nonzero_only {
                    nonzero.clear();
                    nonzero.extend(all.iter().copied().filter(|&pos| self.beta[self.work[pos]] != 0.0));
                    nonzero_only = true;
                    inner = 0;
                } else {
                    inner += 1;
                    if inner.is_multiple_of(NEWTON_EVERY) {
                        nonzero.retain(|&pos| self.beta[self.work[pos]] != 0.0);
                        if self.newton_step(lambda, &nonzero) {
                            if let Some(t) = trace.as_mut() {
                                t.push(self.objective(lambda));
                            }
                        }
                    }
                }
            }
            self.rebuild_resid();
            let mut added = false;
            let mut max_move = 0.0f64;
            for j in 0..k {
                let sq = self.design.sq_norms[j];
                if sq == 0.0 {
                    continue;
                }
                let g = dot(self.design.col(j), &self.resid);
                self.grad[j] = g;
                let target = soft(g + sq * self.beta[j], 0.5 * lambda * self.weights[j]) / sq;
                max_move = max_move.max((target - self.beta[j]).abs());
                match self.slot[j] {
                    Some(pos) => self.wgrad[pos] = g,
                    None if target != 0.0 => {
                        self.add_to_work(j);
                        added = true;
                    }
                    None => {}
                }
            }
            if !added && max_move < self.opts.tolerance {
                return PointOutcome {
                    sweeps,
                    converged: true,
                    trace,
                };
            }
            all = (0..self.work.len()).collect();
        }
    }
}

pub(crate) struct PathPoint {
    pub beta: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

/// Warm-started fits along a decreasing lambda sequence.
///
/// With `early_stop`, the path is cut once at least five points are fitted
/// and the explained deviance either exceeds 0.999 or stops improving
/// (relative gain below 1e-5).
pub(crate) fn fit_path(design: &Design, weights: &[f64], lambdas: &[f64], opts: &SolverOptions) -> Vec<PathPoint> {
    let mut solver = CdSolver::new(design, weights, opts);
    let null = design.null_rss();
    let mut prev = design.lambda_max(weights).max(lambdas.first().copied().unwrap_or(0.0));
    let mut out = Vec::with_capacity(lambdas.len());
    let mut prev_dev = 0.0;
    for (m, &lambda) in lambdas.iter().enumerate() {
        let outcome = solver.solve(lambda, prev);
        prev = lambda;
        out.push(PathPoint {
            beta: solver.beta().to_vec(),
            sweeps: outcome.sweeps,
            converged: outcome.converged,
        });
        if opts.early_stop && null > 0.0 {
            let dev = 1.0 - solver.rss() / null;
            if m + 1 >= 5 && (dev >= 0.999 || dev - prev_dev < 1e-5 * dev) {
                break;
            }
            prev_dev = dev;
        }
    }
    out
}

/// Log-spaced decreasing sequence from `lambda_max` to `lambda_max * ratio`.
pub(crate) fn lambda_sequence(lambda_max: f64, opts: &SolverOptions) -> Vec<f64> {
    let len = opts.path_length;
    let log_ratio = opts.path_ratio.ln();
    (0..len)
        .map(|m| lambda_max * (log_ratio * m as f64 / (len - 1) as f64).exp())
        .collect()
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be a nonnegative finite number, got {lambda}"
        )));
    }
    Ok(())
}

fn single_fit(design: &Design, weights: &[f64], lambda: f64, opts: &SolverOptions) -> FitResult {
    let mut solver = CdSolver::new(design, weights, opts);
    let prev = design.lambda_max(weights).max(lambda);
    let outcome = solver.solve(lambda, prev);
    let mut fit = design.to_fit(solver.beta(), lambda);
    fit.iterations = outcome.sweeps;
    fit.converged = outcome.converged;
    fit.objective_trace = outcome.trace;
    if !outcome.converged {
        fit.warnings.push(format!(
            "coordinate descent did not converge within {} sweeps",
            opts.max_sweeps
        ));
    }
    fit
}

/// LASSO fit at a single lambda.
pub fn fit_lasso(data: &Dataset, lambda: f64, opts: &SolverOptions) -> Result<FitResult> {
    check_lambda(lambda)?;
    opts.validate()?;
    let design = Design::new(data, (0..data.p()).collect(), opts);
    let weights = vec![1.0; design.k()];
    Ok(single_fit(&design, &weights, lambda, opts))
}

/// Adaptive-LASSO penalty weights `1 / |pilot_j|^gamma`; zero pilots map to
/// an infinite weight (the column is excluded).
pub fn penalty_weights(pilot: &[f64], gamma: f64) -> Vec<f64> {
    pilot
        .iter()
        .map(|b| if *b == 0.0 { f64::INFINITY } else { b.abs().powf(-gamma) })
        .collect()
}

pub(crate) fn check_alasso_inputs(data: &Dataset, gamma: f64, pilot: &[f64]) -> Result<()> {
    if pilot.len() != data.p() {
        return Err(Error::InvalidArgument(format!(
            "pilot has {} coefficients, dataset has {} predictors",
            pilot.len(),
            data.p()
        )));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    if pilot.iter().any(|b| !b.is_finite()) {
        return Err(Error::InvalidArgument("pilot has non-finite coefficients".into()));
    }
    Ok(())
}

/// Adaptive-LASSO fit: weighted L1 penalty with weights from a pilot fit.
pub fn fit_alasso(
    data: &Dataset,
    lambda: f64,
    gamma: f64,
    pilot: &FitResult,
    opts: &SolverOptions,
) -> Result<FitResult> {
    check_lambda(lambda)?;
    opts.validate()?;
    check_alasso_inputs(data, gamma, &pilot.coefficients)?;
    let all = penalty_weights(&pilot.coefficients, gamma);
    let cols = active_indices(&pilot.coefficients);
    let mut fit = if cols.is_empty() {
        let mut null = FitResult::null(data, lambda, opts.intercept);
        null.warnings
            .push("pilot has no nonzero coefficients; returning the null fit".into());
        null
    } else {
        let weights: Vec<f64> = cols.iter().map(|&j| all[j]).collect();
        let design = Design::new(data, cols, opts);
        single_fit(&design, &weights, lambda, opts)
    };
    fit.gamma = Some(gamma);
    Ok(fit)
}

/// Column scale used by the penalty (1 unless standardizing).
fn column_scale(data: &Dataset, j: usize, opts: &SolverOptions) -> f64 {
    if !opts.standardize {
        return 1.0;
    }
    let col = data.x().column(j);
    let n = data.n() as f64;
    let mean = if opts.intercept { col.sum() / n } else { 0.0 };
    let ms = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if ms > 0.0 {
        ms.sqrt()
    } else {
        1.0
    }
}

/// `lambda_max` for the given penalty weights (`INFINITY` excludes a column).
pub fn lambda_max(data: &Dataset, weights: &[f64], opts: &SolverOptions) -> f64 {
    let cols: Vec<usize> = (0..data.p()).filter(|&j| weights[j].is_finite()).collect();
    let w: Vec<f64> = cols.iter().map(|&j| weights[j]).collect();
    Design::new(data, cols, opts).lambda_max(&w)
}

/// Penalized objective of `fit` on the original data.
pub fn objective(data: &Dataset, fit: &FitResult, weights: &[f64], opts: &SolverOptions) -> f64 {
    let r = data.y() - predict_linear(data.x(), &fit.coefficients, fit.intercept);
    let pen: f64 = (0..data.p())
        .filter(|&j| fit.coefficients[j] != 0.0)
        .map(|j| weights[j] * column_scale(data, j, opts) * fit.coefficients[j].abs())
        .sum();
    r.norm_squared() + fit.lambda * pen
}

/// Largest violation of the stationarity conditions, per observation.
///
/// For active `j` this is `|x_j' r - (lambda w_j / 2) sgn(beta_j)| / n`, for
/// inactive `j` it is `max(|x_j' r| - lambda w_j / 2, 0) / n`; the intercept
/// contributes `|sum r| / n`.
#[allow(clippy::needless_range_loop)]
pub fn kkt_residual(data: &Dataset, fit: &FitResult, weights: &[f64], opts: &SolverOptions) -> f64 {
    let n = data.n() as f64;
    let r: DVector<f64> = data.y() - predict_linear(data.x(), &fit.coefficients, fit.intercept);
    let mut worst = if opts.intercept { r.sum().abs() / n } else { 0.0 };
    for j in 0..data.p() {
        let b = fit.coefficients[j];
        if !weights[j].is_finite() {
            if b != 0.0 {
                return f64::INFINITY;
            }
            continue;
        }
        let g = data.x().column(j).dot(&r);
        let t = 0.5 * fit.lambda * weights[j] * column_scale(data, j, opts);
        let v = if b != 0.0 {
            (g - t * b.signum()).abs()
        } else {
            (g.abs() - t).max(0.0)
        };
        worst = worst.max(v / n);
    }
    worst
}
