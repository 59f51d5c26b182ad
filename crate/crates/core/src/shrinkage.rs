//! Support partitioning, the weight statistic `W_n`, and the family of
//! double-shrunken estimators
//!
//! ```text
//! beta1 = beta1_UF + (beta1_OF - beta1_UF) * (1 - (p2 - 2) r(W_n) / W_n)
//! ```
//!
//! with `r(x) = 1` (S), `x / (1 + x)` (FS1), `exp(-x^2)` (FS2) and
//! `arctan(x)` (FS3), plus the positive-part rule
//! `PS: factor = max(0, 1 - (p2 - 2) / W_n)`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{has_full_column_rank, select_columns, spd_solve};
use crate::solvers::{Dataset, FitResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    S,
    PS,
    FS1,
    FS2,
    FS3,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::S, Variant::PS, Variant::FS1, Variant::FS2, Variant::FS3];

    pub fn name(self) -> &'static str {
        match self {
            Variant::S => "S",
            Variant::PS => "PS",
            Variant::FS1 => "FS1",
            Variant::FS2 => "FS2",
            Variant::FS3 => "FS3",
        }
    }

    /// The bounded function `r`; PS uses the S choice `r = 1` before clamping.
    pub fn r(self, w: f64) -> f64 {
        match self {
            Variant::S | Variant::PS => 1.0,
            Variant::FS1 => w / (1.0 + w),
            Variant::FS2 => (-w * w).exp(),
            Variant::FS3 => w.atan(),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown shrinkage variant '{s}'")))
    }
}

/// Disjoint index sets: strong (`s1`), weak-moderate (`s2`), discarded (`s3`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SupportPartition {
    pub s1: Vec<usize>,
    pub s2: Vec<usize>,
    pub s3: Vec<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl SupportPartition {
    pub fn p1(&self) -> usize {
        self.s1.len()
    }

    pub fn p2(&self) -> usize {
        self.s2.len()
    }

    pub fn p3(&self) -> usize {
        self.s3.len()
    }
}

/// `s1` = adaptive-LASSO active set, `s2` = LASSO active set minus `s1`,
/// `s3` = everything else.
pub fn partition_supports(lasso: &FitResult, alasso: &FitResult, p: usize) -> Result<SupportPartition> {
    if lasso.coefficients.len() != p || alasso.coefficients.len() != p {
        return Err(Error::InvalidArgument(format!(
            "fits must have {p} coefficients (got {} and {})",
            lasso.coefficients.len(),
            alasso.coefficients.len()
        )));
    }
    let mut label = vec![3u8; p];
    for &j in &lasso.active_set {
        label[j] = 2;
    }
    let mut warnings = Vec::new();
    for &j in &alasso.active_set {
        if label[j] != 2 {
            warnings.push(format!(
                "index {j} is active in the adaptive LASSO but not in the LASSO; kept in S1 with OF coefficient 0"
            ));
        }
        label[j] = 1;
    }
    let pick = |l: u8| (0..p).filter(|&j| label[j] == l).collect::<Vec<_>>();
    let partition = SupportPartition {
        s1: pick(1),
        s2: pick(2),
        s3: pick(3),
        warnings,
    };
    if partition.s1.is_empty() {
        return Err(Error::NoStrongSignals);
    }
    Ok(partition)
}

/// `||y - X_S1 beta1_uf||^2 / (n - 1)`.
pub fn residual_variance(data: &Dataset, partition: &SupportPartition, beta1_uf: &[f64]) -> Result<f64> {
    if beta1_uf.len() != partition.p1() {
        return Err(Error::InvalidArgument(format!(
            "beta1_uf has {} entries, S1 has {}",
            beta1_uf.len(),
            partition.p1()
        )));
    }
    let mut r = data.y().clone();
    for (k, &j) in partition.s1.iter().enumerate() {
        r.axpy(-beta1_uf[k], &data.x().column(j), 1.0);
    }
    let rss = r.norm_squared();
    if rss == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    Ok(rss / (data.n() - 1) as f64)
}

/// Normalization of the weight statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum WnScaling {
    /// `beta2' (X2' M1 X2) beta2 / sigma2`, the Wald statistic for `beta2 = 0`.
    #[default]
    #[serde(rename = "wald")]
    Wald,
    /// The Wald statistic multiplied by `n`.
    #[serde(rename = "n-scaled")]
    NScaled,
}

/// Restricted least-squares estimate of the weak block and the weight
/// statistic `W_n`, where `M1 = I - X1 (X1'X1)^{-1} X1'`,
/// `beta2 = (X2' M1 X2)^{-1} X2' M1 y` and `W_n` is its quadratic form in
/// `X2' M1 X2` over `sigma2`.
pub fn compute_wn(
    data: &Dataset,
    partition: &SupportPartition,
    sigma2_hat: f64,
    scaling: WnScaling,
) -> Result<(f64, Vec<f64>)> {
    if !(sigma2_hat > 0.0 && sigma2_hat.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "sigma2_hat must be positive, got {sigma2_hat}"
        )));
    }
    if partition.p2() == 0 {
        return Ok((0.0, Vec::new()));
    }
    if partition.p1() + partition.p2() > data.n() {
        return Err(Error::SingularDesign {
            block: "[X_S1 X_S2] (p1 + p2 > n)",
        });
    }
    let x1 = select_columns(data.x(), &partition.s1);
    if !has_full_column_rank(&x1, 1e-10) {
        return Err(Error::SingularDesign { block: "X_S1'X_S1" });
    }
    let q = x1.qr().q();
    let x2 = select_columns(data.x(), &partition.s2);
    // M1 X2 = X2 - Q Q' X2
    let z2 = &x2 - &q * (q.transpose() * &x2);
    let gram = z2.transpose() * &z2;
    let rhs = z2.transpose() * data.y();
    let beta2: DVector<f64> = spd_solve(&gram, &rhs, 1e-12).ok_or(Error::SingularDesign { block: "X_S2'M1X_S2" })?;
    let quad = (&z2 * &beta2).norm_squared();
    let mut wn = quad / sigma2_hat;
    if scaling == WnScaling::NScaled {
        wn *= data.n() as f64;
    }
    Ok((wn, beta2.as_slice().to_vec()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShrinkageInputs {
    pub beta1_uf: Vec<f64>,
    pub beta1_of: Vec<f64>,
    pub wn: f64,
    pub sigma2_hat: f64,
    pub beta2_lse: Vec<f64>,
}

/// `1 - (p2 - 2) r(W_n) / W_n` for the variant (clamped at 0 for PS).
pub fn shrink_factor(variant: Variant, wn: f64, p2: usize) -> Result<f64> {
    if p2 < 3 {
        return Err(Error::InsufficientWeakSet { p2 });
    }
    if !(wn >= 0.0) || wn.is_infinite() {
        return Err(Error::InvalidArgument(format!(
            "W_n must be finite and nonnegative, got {wn}"
        )));
    }
    let k = (p2 - 2) as f64;
    let factor = match variant {
        Variant::PS => {
            if wn == 0.0 {
                0.0
            } else {
                (1.0 - k / wn).max(0.0)
            }
        }
        Variant::FS1 => 1.0 - k / (1.0 + wn),
        Variant::S | Variant::FS2 | Variant::FS3 => {
            if wn == 0.0 {
                return Err(Error::UnboundedShrinkFactor {
                    variant: variant.name().into(),
                });
            }
            1.0 - k * variant.r(wn) / wn
        }
    };
    Ok(factor)
}

/// A double-shrunken estimate of the strong block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShrinkageFit {
    pub variant: Variant,
    /// `None` when the weak set is too small and the UF estimate is returned.
    pub factor: Option<f64>,
    pub wn: Option<f64>,
    pub beta1: Vec<f64>,
    /// `beta1` embedded at `s1`, zero elsewhere.
    pub full_beta: Vec<f64>,
    pub intercept: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fallback: Option<String>,
}

impl ShrinkageFit {
    pub fn active_set(&self) -> Vec<usize> {
        crate::solvers::active_indices(&self.full_beta)
    }
}

fn embed(beta1: &[f64], partition: &SupportPartition, p: usize) -> Vec<f64> {
    let mut full = vec![0.0; p];
    for (k, &j) in partition.s1.iter().enumerate() {
        full[j] = beta1[k];
    }
    full
}

/// `beta1_UF + (beta1_OF - beta1_UF) * factor`.
pub fn shrink(
    inputs: &ShrinkageInputs,
    variant: Variant,
    partition: &SupportPartition,
    p: usize,
) -> Result<ShrinkageFit> {
    if inputs.beta1_uf.len() != partition.p1() || inputs.beta1_of.len() != partition.p1() {
        return Err(Error::InvalidArgument("UF/OF estimates must have p1 entries".into()));
    }
    let factor = shrink_factor(variant, inputs.wn, partition.p2())?;
    let beta1: Vec<f64> = inputs
        .beta1_uf
        .iter()
        .zip(&inputs.beta1_of)
        .map(|(uf, of)| uf + (of - uf) * factor)
        .collect();
    Ok(ShrinkageFit {
        variant,
        factor: Some(factor),
        wn: Some(inputs.wn),
        full_beta: embed(&beta1, partition, p),
        beta1,
        intercept: 0.0,
        fallback: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShrinkageOptions {
    pub wn_scaling: WnScaling,
    /// Work on centered data and report intercepts.
    pub intercept: bool,
}

impl Default for ShrinkageOptions {
    fn default() -> Self {
        Self {
            wn_scaling: WnScaling::Wald,
            intercept: true,
        }
    }
}

/// All shrinkage variants built from one LASSO / adaptive-LASSO pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoubleShrinkage {
    pub partition: SupportPartition,
    pub sigma2_hat: f64,
    pub wn: Option<f64>,
    pub beta2_lse: Vec<f64>,
    pub beta1_uf: Vec<f64>,
    pub beta1_of: Vec<f64>,
    /// One entry per variant, in `Variant::ALL` order.
    pub fits: Vec<ShrinkageFit>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl DoubleShrinkage {
    pub fn fit(&self, variant: Variant) -> &ShrinkageFit {
        self.fits
            .iter()
            .find(|f| f.variant == variant)
            .expect("every variant is present")
    }
}

/// Partition, estimate `sigma2` and `W_n`, and shrink with every variant.
///
/// When `p2 < 3` each variant falls back to the UF estimate with
/// `factor = None` and a recorded reason.
pub fn double_shrink(
    data: &Dataset,
    lasso: &FitResult,
    alasso: &FitResult,
    opts: &ShrinkageOptions,
) -> Result<DoubleShrinkage> {
    let p = data.p();
    let partition = partition_supports(lasso, alasso, p)?;
    let work = if opts.intercept { data.centered() } else { data.clone() };
    let beta1_uf: Vec<f64> = partition.s1.iter().map(|&j| alasso.coefficients[j]).collect();
    let beta1_of: Vec<f64> = partition.s1.iter().map(|&j| lasso.coefficients[j]).collect();
    let sigma2_hat = residual_variance(&work, &partition, &beta1_uf)?;
    let mut warnings = partition.warnings.clone();

    let p2 = partition.p2();
    let (wn, beta2_lse) = if p2 >= 3 {
        let (wn, b2) = compute_wn(&work, &partition, sigma2_hat, opts.wn_scaling)?;
        (Some(wn), b2)
    } else {
        warnings.push(format!("p2 = {p2} < 3: every variant returns the UF estimate"));
        (None, Vec::new())
    };

    let (x_means, y_mean) = data.means();
    let intercept_for = |beta1: &[f64]| {
        if opts.intercept {
            y_mean
                - partition
                    .s1
                    .iter()
                    .zip(beta1)
                    .map(|(&j, b)| x_means[j] * b)
                    .sum::<f64>()
        } else {
            0.0
        }
    };

    let mut fits = Vec::with_capacity(Variant::ALL.len());
    for variant in Variant::ALL {
        let mut fit = match wn {
            Some(wn) => {
                let inputs = ShrinkageInputs {
                    beta1_uf: beta1_uf.clone(),
                    beta1_of: beta1_of.clone(),
                    wn,
                    sigma2_hat,
                    beta2_lse: beta2_lse.clone(),
                };
                shrink(&inputs, variant, &partition, p)?
            }
            None => ShrinkageFit {
                variant,
                factor: None,
                wn: None,
                full_beta: embed(&beta1_uf, &partition, p),
                beta1: beta1_uf.clone(),
                intercept: 0.0,
                fallback: Some(format!("insufficient weak set (p2 = {p2} < 3); UF estimate returned")),
            },
        };
        fit.intercept = intercept_for(&fit.beta1);
        fits.push(fit);
    }

    Ok(DoubleShrinkage {
        partition,
        sigma2_hat,
        wn,
        beta2_lse,
        beta1_uf,
        beta1_of,
        fits,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn fit_with_support(p: usize, support: &[usize]) -> FitResult {
        let mut coef = vec![0.0; p];
        for &j in support {
            coef[j] = 1.0 + j as f64;
        }
        FitResult::from_coefficients(coef, 0.0, 1.0)
    }

    #[test]
    fn partition_example() {
        // 1-based {1,2,3,4,7,9} and {1,2,3,4} with p = 10
        let lasso = fit_with_support(10, &[0, 1, 2, 3, 6, 8]);
        let alasso = fit_with_support(10, &[0, 1, 2, 3]);
        let part = partition_supports(&lasso, &alasso, 10).unwrap();
        assert_eq!(part.s1, vec![0, 1, 2, 3]);
        assert_eq!(part.s2, vec![6, 8]);
        assert_eq!(part.s3, vec![4, 5, 7, 9]);
        assert_eq!(part.p1() + part.p2() + part.p3(), 10);
        assert!(part.warnings.is_empty());
    }

    #[test]
    fn identical_supports_leave_s2_empty() {
        let f = fit_with_support(6, &[1, 4]);
        let part = partition_supports(&f, &f, 6).unwrap();
        assert!(part.s2.is_empty());
    }

    #[test]
    fn eye_like_counts() {
        let lasso = fit_with_support(200, &(0..24).collect::<Vec<_>>());
        let alasso = fit_with_support(200, &(0..11).collect::<Vec<_>>());
        let part = partition_supports(&lasso, &alasso, 200).unwrap();
        assert_eq!(part.p1(), 11);
        assert!(part.p2() >= 13);
    }

    #[test]
    fn empty_strong_set_is_an_error() {
        let lasso = fit_with_support(5, &[0, 1]);
        let alasso = fit_with_support(5, &[]);
        assert!(matches!(
            partition_supports(&lasso, &alasso, 5),
            Err(Error::NoStrongSignals)
        ));
    }

    #[test]
    fn alasso_only_member_stays_in_s1_with_warning() {
        let lasso = fit_with_support(5, &[0, 1]);
        let alasso = fit_with_support(5, &[0, 3]);
        let part = partition_supports(&lasso, &alasso, 5).unwrap();
        assert_eq!(part.s1, vec![0, 3]);
        assert_eq!(part.s2, vec![1]);
        assert_eq!(part.warnings.len(), 1);
    }

    #[test]
    fn residual_variance_examples() {
        let x = DMatrix::zeros(3, 1);
        let data = Dataset::new(x, DVector::from_vec(vec![1.0, 2.0, 3.0])).unwrap();
        let part = SupportPartition {
            s1: vec![0],
            s2: vec![],
            s3: vec![],
            warnings: vec![],
        };
        assert_eq!(residual_variance(&data, &part, &[4.2]).unwrap(), 7.0);

        let x = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
        let data = Dataset::new(x, DVector::from_vec(vec![2.0, 4.0, 6.0])).unwrap();
        assert!(matches!(
            residual_variance(&data, &part, &[2.0]),
            Err(Error::DegenerateVariance)
        ));
        assert!(residual_variance(&data, &part, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn factor_examples() {
        assert_eq!(shrink_factor(Variant::FS1, 1.0, 4).unwrap(), 0.0);
        assert_eq!(shrink_factor(Variant::PS, 2.0, 4).unwrap(), 0.0);
        assert_eq!(shrink_factor(Variant::PS, 1.5, 4).unwrap(), 0.0);
        assert_eq!(shrink_factor(Variant::PS, 0.0, 4).unwrap(), 0.0);
        assert_eq!(shrink_factor(Variant::FS1, 0.0, 5).unwrap(), -2.0);
        assert!((shrink_factor(Variant::S, 4.0, 6).unwrap() - 0.0).abs() < 1e-15);
        let big = 1e9;
        let f3 = shrink_factor(Variant::FS3, big, 5).unwrap();
        assert!((f3 - (1.0 - 3.0 * std::f64::consts::FRAC_PI_2 / big)).abs() < 1e-15);
    }

    #[test]
    fn factor_errors() {
        assert!(matches!(
            shrink_factor(Variant::FS3, 1.0, 2),
            Err(Error::InsufficientWeakSet { p2: 2 })
        ));
        for v in [Variant::S, Variant::FS2, Variant::FS3] {
            assert!(matches!(
                shrink_factor(v, 0.0, 4),
                Err(Error::UnboundedShrinkFactor { .. })
            ));
        }
        assert!(shrink_factor(Variant::S, f64::NAN, 4).is_err());
    }

    #[test]
    fn equal_uf_of_is_fixed_point() {
        let part = SupportPartition {
            s1: vec![0, 2],
            s2: vec![1, 3, 4],
            s3: vec![],
            warnings: vec![],
        };
        for variant in Variant::ALL {
            for wn in [0.3, 1.0, 40.0] {
                let inputs = ShrinkageInputs {
                    beta1_uf: vec![1.5, -0.25],
                    beta1_of: vec![1.5, -0.25],
                    wn,
                    sigma2_hat: 1.0,
                    beta2_lse: vec![0.0; 3],
                };
                let fit = shrink(&inputs, variant, &part, 5).unwrap();
                assert_eq!(fit.beta1, vec![1.5, -0.25]);
                assert_eq!(fit.full_beta, vec![1.5, 0.0, -0.25, 0.0, 0.0]);
            }
        }
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert_eq!("fs3".parse::<Variant>().unwrap(), Variant::FS3);
        assert!("FS4".parse::<Variant>().is_err());
    }

    #[test]
    fn wn_zero_when_y_orthogonal() {
        // columns: e1-ish strong, three weak, y orthogonal to all of them
        let x = DMatrix::from_row_slice(
            6,
            4,
            &[
                1.0, 0.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, 0.0, //
                0.0, 0.0, 1.0, 0.0, //
                0.0, 0.0, 0.0, 1.0, //
                0.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 0.0,
            ],
        );
        let y = DVector::from_vec(vec![0.0, 0.0, 0.0, 0.0, 1.0, -2.0]);
        let data = Dataset::new(x, y).unwrap();
        let part = SupportPartition {
            s1: vec![0],
            s2: vec![1, 2, 3],
            s3: vec![],
            warnings: vec![],
        };
        let (wn, b2) = compute_wn(&data, &part, 1.0, WnScaling::Wald).unwrap();
        assert_eq!(wn, 0.0);
        assert!(b2.iter().all(|b| *b == 0.0));
    }

    #[test]
    fn singular_blocks_are_named() {
        let x = DMatrix::from_fn(8, 4, |i, j| {
            if j == 1 {
                i as f64 * 2.0
            } else {
                (i * (j + 1)) as f64 % 5.0 + i as f64
            }
        });
        let mut x2 = x.clone();
        x2.set_column(3, &x.column(2).clone_owned());
        let y = DVector::from_fn(8, |i, _| (i as f64).sin());
        let data = Dataset::new(x2, y).unwrap();
        let part = SupportPartition {
            s1: vec![0],
            s2: vec![1, 2, 3],
            s3: vec![],
            warnings: vec![],
        };
        assert!(matches!(
            compute_wn(&data, &part, 1.0, WnScaling::Wald),
            Err(Error::SingularDesign { block: "X_S2'M1X_S2" })
        ));
        let part = SupportPartition {
            s1: vec![2, 3],
            s2: vec![0, 1],
            s3: vec![],
            warnings: vec![],
        };
        assert!(matches!(
            compute_wn(&data, &part, 1.0, WnScaling::Wald),
            Err(Error::SingularDesign { block: "X_S1'X_S1" })
        ));
    }
}
