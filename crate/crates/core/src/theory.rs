//! Conformance checks on orthonormal designs (`n^{-1} X'X = I`).
//!
//! Under orthonormality the LASSO and adaptive LASSO are coordinatewise
//! thresholds of the least-squares estimate `b_j = n^{-1} x_j' y`:
//! `OF_j = sgn(b_j)(|b_j| - lambda/2)^+` and
//! `UF_j = sgn(b_j)(|b_j| - lambda / (2 |b_j|^gamma))^+`.
//! Here `lambda` is on the scale of those thresholds; the solvers minimize
//! `||y - X beta||^2 + lambda' sum w_j |beta_j|`, which matches at
//! `lambda' = n lambda`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::pairwise_mean;
use crate::shrinkage::{compute_wn, residual_variance, SupportPartition, Variant, WnScaling};
use crate::simulation::rng::keyed;
use crate::solvers::{fit_alasso, fit_lasso, soft, Dataset, FitResult, SolverOptions};

const ORACLE_TAG: &[u8; 8] = b"thoracle";
const BOUND_TAG: &[u8; 8] = b"thbound1";
const DOMINANCE_TAG: &[u8; 8] = b"thdomin1";
const ALPHA_TAG: &[u8; 8] = b"thalpha1";
const RISK_TAG: &[u8; 8] = b"thrisk01";

/// Largest tolerated entry of `|n^{-1} X'X - I|`.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// Recipe for random orthonormal instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrthoSpec {
    pub n: usize,
    pub p1: usize,
    pub p2: usize,
    pub p3: usize,
    /// Number of nonzero strong coefficients (the first `p_o` of `p1`).
    pub p_o: usize,
    pub strong: f64,
    pub delta: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub gamma: f64,
}

impl Default for OrthoSpec {
    fn default() -> Self {
        Self {
            n: 200,
            p1: 4,
            p2: 8,
            p3: 20,
            p_o: 4,
            strong: 2.0,
            delta: 0.0,
            sigma: 1.0,
            lambda: 1.0,
            gamma: 1.0,
        }
    }
}

impl OrthoSpec {
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
        if self.p1 == 0 || self.p() > self.n {
            return bad("instance.n", "need p1 >= 1 and p1 + p2 + p3 <= n");
        }
        if self.p_o > self.p1 {
            return bad("instance.p_o", "p_o cannot exceed p1");
        }
        if !(self.lambda > 0.0 && self.lambda < 2.0) {
            return bad("instance.lambda", "lambda must lie in (0, 2)");
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad("instance.gamma", "gamma must be positive");
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad("instance.sigma", "sigma must be nonnegative");
        }
        Ok(())
    }

    pub fn beta_true(&self) -> Vec<f64> {
        let mut beta = vec![0.0; self.p()];
        beta[..self.p_o].fill(self.strong);
        beta[self.p1..self.p1 + self.p2].fill(self.delta);
        beta
    }
}

/// One orthonormal regression problem with known truth.
#[derive(Debug, Clone)]
pub struct OrthoInstance {
    pub n: usize,
    pub p1: usize,
    pub p2: usize,
    pub p_o: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub beta: Vec<f64>,
    /// `n^{-1} X'y`.
    pub lse: Vec<f64>,
    /// `(OF - beta)'D / D'D` over the first `p_o` coordinates, `D = OF - UF`;
    /// `None` when `D = 0`.
    pub alpha: Option<f64>,
}

/// `sqrt(n) Q` for the thin QR factor `Q` of an `n x p` Gaussian matrix.
pub fn orthonormal_design<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q() * (n as f64).sqrt()
}

/// `max |n^{-1} X'X - I|`.
pub fn orthonormality_error(x: &DMatrix<f64>) -> f64 {
    let n = x.nrows() as f64;
    let g = x.transpose() * x / n;
    let mut worst = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// `sgn(b)(|b| - lambda/2)^+`.
pub fn of_coordinate(b: f64, lambda: f64) -> f64 {
    soft(b, 0.5 * lambda)
}

/// `sgn(b)(|b| - lambda / (2|b|^gamma))^+`, with `0` at `b = 0`.
pub fn uf_coordinate(b: f64, lambda: f64, gamma: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        soft(b, 0.5 * lambda / b.abs().powf(gamma))
    }
}

impl OrthoInstance {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        x: DMatrix<f64>,
        y: DVector<f64>,
        beta: Vec<f64>,
        p1: usize,
        p2: usize,
        p_o: usize,
        lambda: f64,
        gamma: f64,
    ) -> Result<Self> {
        let (n, p) = x.shape();
        if y.len() != n || beta.len() != p || p > n || p1 + p2 > p || p_o > p1 {
            return Err(Error::InvalidArgument(
                "inconsistent orthonormal instance shapes".into(),
            ));
        }
        let err = orthonormality_error(&x);
        if !(err <= ORTHONORMAL_TOL) {
            return Err(Error::InvalidArgument(format!(
                "design is not orthonormal: max |X'X/n - I| = {err:e}"
            )));
        }
        if !(lambda > 0.0 && lambda < 2.0) {
            return Err(Error::InvalidArgument(format!(
                "lambda must lie in (0, 2), got {lambda}"
            )));
        }
        let lse: Vec<f64> = (x.transpose() * &y / n as f64).iter().copied().collect();
        let mut inst = Self {
            n,
            p1,
            p2,
            p_o,
            lambda,
            gamma,
            x,
            y,
            beta,
            lse,
            alpha: None,
        };
        inst.alpha = inst.compute_alpha();
        Ok(inst)
    }

    pub fn generate<R: Rng + ?Sized>(spec: &OrthoSpec, rng: &mut R) -> Result<Self> {
        Self::generate_with_beta(spec, spec.beta_true(), rng)
    }

    /// Like `generate`, but the first `p_o` coefficients are drawn with
    /// uniform magnitude in `(0, 3)` and random signs.
    pub fn generate_random_strong<R: Rng + ?Sized>(spec: &OrthoSpec, rng: &mut R) -> Result<Self> {
        let mut beta = spec.beta_true();
        for b in beta.iter_mut().take(spec.p_o) {
            let m: f64 = rng.random_range(0.0..3.0);
            *b = if rng.random::<bool>() { m } else { -m };
        }
        Self::generate_with_beta(spec, beta, rng)
    }

    fn generate_with_beta<R: Rng + ?Sized>(spec: &OrthoSpec, beta: Vec<f64>, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let x = orthonormal_design(spec.n, spec.p(), rng);
        let noise = DVector::from_fn(spec.n, |_, _| spec.sigma * rng.sample::<f64, _>(StandardNormal));
        let y = &x * DVector::from_column_slice(&beta) + noise;
        Self::new(x, y, beta, spec.p1, spec.p2, spec.p_o, spec.lambda, spec.gamma)
    }

    pub fn p(&self) -> usize {
        self.beta.len()
    }

    fn compute_alpha(&self) -> Option<f64> {
        let (mut num, mut den) = (0.0, 0.0);
        for j in 0..self.p_o {
            let of = of_coordinate(self.lse[j], self.lambda);
            let d = of - uf_coordinate(self.lse[j], self.lambda, self.gamma);
            num += (of - self.beta[j]) * d;
            den += d * d;
        }
        (den > 0.0).then(|| num / den)
    }

    pub fn dataset(&self) -> Dataset {
        Dataset::new(self.x.clone(), self.y.clone()).expect("orthonormal instance is a valid dataset")
    }
}

/// Closed-form OF and UF estimates for every coordinate.
pub fn closed_form_fits(inst: &OrthoInstance) -> (Vec<f64>, Vec<f64>) {
    let of = inst.lse.iter().map(|&b| of_coordinate(b, inst.lambda)).collect();
    let uf = inst
        .lse
        .iter()
        .map(|&b| uf_coordinate(b, inst.lambda, inst.gamma))
        .collect();
    (of, uf)
}

/// The same two estimates from the coordinate-descent solvers (no
/// intercept, least-squares pilot for the adaptive weights).
pub fn solver_fits(inst: &OrthoInstance) -> Result<(Vec<f64>, Vec<f64>)> {
    let data = inst.dataset();
    let opts = SolverOptions::default().with_intercept(false);
    let lambda = inst.n as f64 * inst.lambda;
    let lasso = fit_lasso(&data, lambda, &opts)?;
    let pilot = FitResult::from_coefficients(inst.lse.clone(), 0.0, 0.0);
    let alasso = fit_alasso(&data, lambda, inst.gamma, &pilot, &opts)?;
    Ok((lasso.coefficients, alasso.coefficients))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundViolation {
    pub coordinate: usize,
    /// `"bound"` for `sgn(b) D >= 1 - lambda/2`, `"formula"` when `D`
    /// disagrees with `(lambda/2) sgn(b)(1/|b| - 1)` although both
    /// thresholds are inactive.
    pub kind: String,
    pub lse: f64,
    pub d: f64,
    pub expected: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DifferenceBoundReport {
    pub checked: usize,
    /// Coordinates with `|b| <= lambda/2` (precondition fails).
    pub skipped: Vec<usize>,
    /// Checked coordinates where UF is thresholded to zero, so `D = OF` and
    /// the closed-form difference does not apply (the bound still does).
    pub uf_zero: Vec<usize>,
    pub violations: Vec<BoundViolation>,
}

/// Checks `D_j = OF_j - UF_j` for the first `p_o` coordinates (`gamma = 1`
/// closed forms).
pub fn check_difference_bound(inst: &OrthoInstance) -> DifferenceBoundReport {
    let lambda = inst.lambda;
    let mut report = DifferenceBoundReport::default();
    for j in 0..inst.p_o {
        let b = inst.lse[j];
        if !(b.abs() > 0.5 * lambda) {
            report.skipped.push(j);
            continue;
        }
        report.checked += 1;
        let d = of_coordinate(b, lambda) - uf_coordinate(b, lambda, 1.0);
        let bound = 1.0 - 0.5 * lambda;
        if !(b.signum() * d < bound) {
            report.violations.push(BoundViolation {
                coordinate: j,
                kind: "bound".into(),
                lse: b,
                d,
                expected: bound,
            });
        }
        if b * b > 0.5 * lambda {
            let formula = 0.5 * lambda * b.signum() * (1.0 / b.abs() - 1.0);
            if (d - formula).abs() > 1e-12 * (1.0 + b.abs()) {
                report.violations.push(BoundViolation {
                    coordinate: j,
                    kind: "formula".into(),
                    lse: b,
                    d,
                    expected: formula,
                });
            }
        } else {
            report.uf_zero.push(j);
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceCheck {
    pub variant: Variant,
    pub wn: f64,
    pub p2: usize,
    /// `r(W_n) / W_n`.
    pub ratio: f64,
    /// `2 alpha / (p2 - 2)`.
    pub threshold: f64,
    pub alpha: f64,
    pub holds: bool,
    /// `sum_{j <= p_o} sgn(b_j)`, logged only.
    pub sign_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum DominanceOutcome {
    Checked(DominanceCheck),
    Skipped { reason: String },
}

/// `W_n` of the instance with `S1` = first `p1`, `S2` = next `p2` indices,
/// `sigma2` from the closed-form UF residual (Wald scaling).
pub fn instance_wn(inst: &OrthoInstance) -> Result<f64> {
    let p = inst.p();
    let partition = SupportPartition {
        s1: (0..inst.p1).collect(),
        s2: (inst.p1..inst.p1 + inst.p2).collect(),
        s3: (inst.p1 + inst.p2..p).collect(),
        warnings: Vec::new(),
    };
    let data = inst.dataset();
    let (_, uf) = closed_form_fits(inst);
    let sigma2 = residual_variance(&data, &partition, &uf[..inst.p1])?;
    Ok(compute_wn(&data, &partition, sigma2, WnScaling::Wald)?.0)
}

/// Whether `r(W_n)/W_n < 2 alpha / (p2 - 2)` on this instance.
pub fn check_dominance_condition(inst: &OrthoInstance, variant: Variant) -> Result<DominanceOutcome> {
    if inst.p2 < 3 {
        return Err(Error::InsufficientWeakSet { p2: inst.p2 });
    }
    let skipped = |reason: &str| Ok(DominanceOutcome::Skipped { reason: reason.into() });
    let Some(alpha) = inst.alpha else {
        return skipped("D = 0, alpha undefined");
    };
    let wn = instance_wn(inst)?;
    if wn == 0.0 {
        return skipped("W_n = 0");
    }
    let ratio = match variant {
        Variant::PS => 1.0 / wn,
        v => v.r(wn) / wn,
    };
    let threshold = 2.0 * alpha / (inst.p2 - 2) as f64;
    let sign_sum = inst.lse[..inst.p_o].iter().map(|b| b.signum()).sum();
    Ok(DominanceOutcome::Checked(DominanceCheck {
        variant,
        wn,
        p2: inst.p2,
        ratio,
        threshold,
        alpha,
        holds: ratio < threshold,
        sign_sum,
    }))
}

/// `points` log-spaced values from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Grid points where `r(w)/w` increases; empty when non-increasing.
pub fn ratio_increases(variant: Variant, grid: &[f64]) -> Vec<f64> {
    grid.windows(2)
        .filter(|w| variant.r(w[1]) / w[1] > variant.r(w[0]) / w[0])
        .map(|w| w[1])
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlphaTrendConfig {
    pub ns: Vec<usize>,
    pub replications: usize,
    pub gamma: f64,
    pub strong: f64,
    pub p_o: usize,
}

impl Default for AlphaTrendConfig {
    fn default() -> Self {
        Self {
            ns: vec![50, 200, 800],
            replications: 400,
            gamma: 2.0,
            strong: 2.0,
            p_o: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheoryConfig {
    pub seed: u64,
    pub instance: OrthoSpec,
    pub oracle_instances: usize,
    pub oracle_tol: f64,
    pub bound_instances: usize,
    pub bound_lambdas: Vec<f64>,
    pub dominance_instances: usize,
    pub grid_points: usize,
    pub alpha_trend: AlphaTrendConfig,
    pub risk_replications: usize,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        Self {
            seed: 2017,
            instance: OrthoSpec::default(),
            oracle_instances: 100,
            oracle_tol: 1e-6,
            bound_instances: 1000,
            bound_lambdas: vec![0.5, 1.0, 1.5],
            dominance_instances: 200,
            grid_points: 2001,
            alpha_trend: AlphaTrendConfig::default(),
            risk_replications: 1000,
        }
    }
}

impl TheoryConfig {
    pub fn validate(&self) -> Result<()> {
        self.instance.validate()?;
        for &l in &self.bound_lambdas {
            if !(l > 0.0 && l < 2.0) {
                return Err(Error::Config {
                    key: "theory.bound_lambdas".into(),
                    message: format!("{l} is outside (0, 2)"),
                });
            }
        }
        if self.grid_points < 2 {
            return Err(Error::Config {
                key: "theory.grid_points".into(),
                message: "need at least 2 grid points".into(),
            });
        }
        if self.alpha_trend.ns.iter().any(|&n| n < self.alpha_trend.p_o.max(1)) {
            return Err(Error::Config {
                key: "theory.alpha_trend.ns".into(),
                message: "every n must be at least p_o".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSummary {
    pub instances: usize,
    pub max_abs_diff_lasso: f64,
    pub max_abs_diff_alasso: f64,
    pub max_orthonormality_error: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundSummary {
    pub lambda: f64,
    pub instances: usize,
    pub checked: usize,
    pub skipped: usize,
    pub uf_zero: usize,
    pub violations: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub first_violations: Vec<BoundViolation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceSummary {
    pub variant: Variant,
    pub checked: usize,
    pub skipped: usize,
    pub holds_frequency: f64,
    pub negative_sign_sum_frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicitySummary {
    pub variant: Variant,
    pub grid_points: usize,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaPoint {
    pub n: usize,
    pub lambda: f64,
    pub used: usize,
    pub mean_abs_deviation: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaTrend {
    pub points: Vec<AlphaPoint>,
    /// Each step down in `mean |alpha - 1|` or within two standard errors.
    pub decreasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskDifference {
    pub variant: Variant,
    /// Mean of `||FS - beta1||^2 - ||OF - beta1||^2`.
    pub mean: f64,
    pub se: f64,
    pub negative: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConformanceReport {
    pub config: TheoryConfig,
    pub oracle: OracleSummary,
    pub difference_bound: Vec<BoundSummary>,
    pub dominance: Vec<DominanceSummary>,
    pub monotonicity: Vec<MonotonicitySummary>,
    pub alpha_trend: AlphaTrend,
    pub risk: Vec<RiskDifference>,
    /// Oracle agreement, zero bound violations and zero monotonicity
    /// violations.
    pub passed: bool,
}

impl ConformanceReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn bound_violations(&self) -> usize {
        self.difference_bound.iter().map(|b| b.violations).sum()
    }
}

fn instance_rng(seed: u64, index: usize, salt: f64, tag: &[u8; 8]) -> rand_chacha::ChaCha20Rng {
    keyed(seed, index as u64, salt, tag)
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let m = pairwise_mean(values);
    if values.len() < 2 {
        return (m, f64::NAN);
    }
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64;
    (m, (var / values.len() as f64).sqrt())
}

/// Solver-versus-closed-form agreement on `count` random instances.
pub fn oracle_sweep(spec: &OrthoSpec, count: usize, seed: u64, tol: f64) -> Result<OracleSummary> {
    let rows: Vec<Result<(f64, f64, f64)>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = instance_rng(seed, i, spec.lambda, ORACLE_TAG);
            let inst = OrthoInstance::generate_random_strong(spec, &mut rng)?;
            let (of, uf) = closed_form_fits(&inst);
            let (lasso, alasso) = solver_fits(&inst)?;
            let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            Ok((diff(&of, &lasso), diff(&uf, &alasso), orthonormality_error(&inst.x)))
        })
        .collect();
    let mut out = OracleSummary {
        instances: count,
        max_abs_diff_lasso: 0.0,
        max_abs_diff_alasso: 0.0,
        max_orthonormality_error: 0.0,
        failures: 0,
    };
    for row in rows {
        let (l, a, o) = row?;
        out.max_abs_diff_lasso = out.max_abs_diff_lasso.max(l);
        out.max_abs_diff_alasso = out.max_abs_diff_alasso.max(a);
        out.max_orthonormality_error = out.max_orthonormality_error.max(o);
        if !(l <= tol && a <= tol) {
            out.failures += 1;
        }
    }
    Ok(out)
}

/// Difference-bound checks on `count` random instances at `lambda`.
pub fn bound_sweep(spec: &OrthoSpec, count: usize, seed: u64, lambda: f64) -> Result<BoundSummary> {
    let spec = OrthoSpec {
        lambda,
        gamma: 1.0,
        ..spec.clone()
    };
    let reports: Vec<Result<DifferenceBoundReport>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = instance_rng(seed, i, lambda, BOUND_TAG);
            Ok(check_difference_bound(&OrthoInstance::generate_random_strong(
                &spec, &mut rng,
            )?))
        })
        .collect();
    let mut out = BoundSummary {
        lambda,
        instances: count,
        checked: 0,
        skipped: 0,
        uf_zero: 0,
        violations: 0,
        first_violations: Vec::new(),
    };
    for r in reports {
        let r = r?;
        out.checked += r.checked;
        out.skipped += r.skipped.len();
        out.uf_zero += r.uf_zero.len();
        out.violations += r.violations.len();
        for v in r.violations {
            if out.first_violations.len() < 10 {
                out.first_violations.push(v);
            }
        }
    }
    Ok(out)
}

/// Frequency with which the dominance condition holds per variant.
pub fn dominance_sweep(spec: &OrthoSpec, count: usize, seed: u64) -> Result<Vec<DominanceSummary>> {
    let outcomes: Vec<Result<Vec<DominanceOutcome>>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = instance_rng(seed, i, spec.lambda, DOMINANCE_TAG);
            let inst = OrthoInstance::generate(spec, &mut rng)?;
            Variant::ALL
                .iter()
                .map(|&v| check_dominance_condition(&inst, v))
                .collect()
        })
        .collect();
    let outcomes: Vec<Vec<DominanceOutcome>> = outcomes.into_iter().collect::<Result<_>>()?;
    Ok(Variant::ALL
        .iter()
        .enumerate()
        .map(|(k, &variant)| {
            let checked: Vec<&DominanceCheck> = outcomes
                .iter()
                .filter_map(|o| match &o[k] {
                    DominanceOutcome::Checked(c) => Some(c),
                    DominanceOutcome::Skipped { .. } => None,
                })
                .collect();
            let m = checked.len().max(1) as f64;
            DominanceSummary {
                variant,
                checked: checked.len(),
                skipped: count - checked.len(),
                holds_frequency: checked.iter().filter(|c| c.holds).count() as f64 / m,
                negative_sign_sum_frequency: checked.iter().filter(|c| c.sign_sum < 0.0).count() as f64 / m,
            }
        })
        .collect())
}

/// `mean |alpha - 1|` over growing `n` with solver penalty `n^{1/4}`
/// (threshold-scale `lambda = n^{-3/4}`).
pub fn alpha_trend(cfg: &AlphaTrendConfig, seed: u64) -> Result<AlphaTrend> {
    let mut points = Vec::with_capacity(cfg.ns.len());
    for &n in &cfg.ns {
        let lambda = (n as f64).powf(0.25) / n as f64;
        let spec = OrthoSpec {
            n,
            p1: cfg.p_o,
            p2: 0,
            p3: 0,
            p_o: cfg.p_o,
            strong: cfg.strong,
            delta: 0.0,
            sigma: 1.0,
            lambda,
            gamma: cfg.gamma,
        };
        let alphas: Vec<Option<f64>> = (0..cfg.replications)
            .into_par_iter()
            .map(|i| {
                let mut rng = instance_rng(seed, i, n as f64, ALPHA_TAG);
                OrthoInstance::generate(&spec, &mut rng).map(|inst| inst.alpha)
            })
            .collect::<Result<_>>()?;
        let dev: Vec<f64> = alphas.iter().flatten().map(|a| (a - 1.0).abs()).collect();
        let (m, se) = mean_se(&dev);
        points.push(AlphaPoint {
            n,
            lambda,
            used: dev.len(),
            mean_abs_deviation: m,
            se,
        });
    }
    let decreasing = points.windows(2).all(|w| {
        let slack = 2.0 * (w[0].se * w[0].se + w[1].se * w[1].se).sqrt();
        w[1].mean_abs_deviation <= w[0].mean_abs_deviation + slack
    });
    Ok(AlphaTrend { points, decreasing })
}

/// Monte Carlo risk difference `R(FS) - R(OF)` on the strong block at
/// `Delta = 0`, for the bounded-r variants.
pub fn risk_difference(spec: &OrthoSpec, replications: usize, seed: u64) -> Result<Vec<RiskDifference>> {
    let spec = OrthoSpec {
        delta: 0.0,
        ..spec.clone()
    };
    let variants = [Variant::FS1, Variant::FS3, Variant::PS];
    let rows: Vec<Vec<f64>> = (0..replications)
        .into_par_iter()
        .map(|i| {
            let mut rng = instance_rng(seed, i, spec.lambda, RISK_TAG);
            let inst = OrthoInstance::generate(&spec, &mut rng)?;
            let (of, uf) = closed_form_fits(&inst);
            let wn = instance_wn(&inst)?;
            let b1 = &inst.beta[..inst.p1];
            let loss = |est: &[f64]| est.iter().zip(b1).map(|(e, b)| (e - b) * (e - b)).sum::<f64>();
            let of_loss = loss(&of[..inst.p1]);
            variants
                .iter()
                .map(|&v| {
                    let factor = crate::shrinkage::shrink_factor(v, wn, inst.p2)?;
                    let fs: Vec<f64> = (0..inst.p1).map(|j| uf[j] + (of[j] - uf[j]) * factor).collect();
                    Ok(loss(&fs) - of_loss)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(variants
        .iter()
        .enumerate()
        .map(|(k, &variant)| {
            let (mean, se) = mean_se(&rows.iter().map(|r| r[k]).collect::<Vec<_>>());
            RiskDifference {
                variant,
                mean,
                se,
                negative: mean + 2.0 * se < 0.0,
            }
        })
        .collect())
}

/// Every check of this module under one configuration.
pub fn run_conformance(config: &TheoryConfig) -> Result<ConformanceReport> {
    config.validate()?;
    let oracle = oracle_sweep(
        &config.instance,
        config.oracle_instances,
        config.seed,
        config.oracle_tol,
    )?;
    let difference_bound = config
        .bound_lambdas
        .iter()
        .map(|&l| bound_sweep(&config.instance, config.bound_instances, config.seed, l))
        .collect::<Result<Vec<_>>>()?;
    let dominance = if config.instance.p2 >= 3 {
        dominance_sweep(&config.instance, config.dominance_instances, config.seed)?
    } else {
        Vec::new()
    };
    let grid = log_grid(1e-6, 1e6, config.grid_points);
    let monotonicity = [Variant::FS1, Variant::FS3]
        .iter()
        .map(|&variant| MonotonicitySummary {
            variant,
            grid_points: grid.len(),
            violations: ratio_increases(variant, &grid).len(),
        })
        .collect::<Vec<_>>();
    let alpha_trend = alpha_trend(&config.alpha_trend, config.seed)?;
    let risk = if config.instance.p2 >= 3 {
        risk_difference(&config.instance, config.risk_replications, config.seed)?
    } else {
        Vec::new()
    };
    let passed = oracle.failures == 0
        && difference_bound.iter().all(|b| b.violations == 0)
        && monotonicity.iter().all(|m| m.violations == 0);
    Ok(ConformanceReport {
        config: config.clone(),
        oracle,
        difference_bound,
        dominance,
        monotonicity,
        alpha_trend,
        risk,
        passed,
    })
}
