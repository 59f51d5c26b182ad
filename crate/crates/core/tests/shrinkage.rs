use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use double_shrink::shrinkage::{
    compute_wn, partition_supports, residual_variance, shrink, shrink_factor, ShrinkageInputs, SupportPartition,
    Variant, WnScaling,
};
use double_shrink::solvers::{Dataset, FitResult};
use double_shrink::Error;

fn fit_with_support(p: usize, support: &[usize]) -> FitResult {
    let x = DMatrix::from_element(2, p, 1.0);
    let data = Dataset::new(x, DVector::from_vec(vec![0.0, 1.0])).unwrap();
    let mut fit = FitResult::null(&data, 1.0, false);
    for &j in support {
        fit.coefficients[j] = 1.0 + j as f64;
    }
    fit.active_set = support.to_vec();
    fit
}

fn partition(s1: Vec<usize>, s2: Vec<usize>, p: usize) -> SupportPartition {
    let s3 = (0..p).filter(|j| !s1.contains(j) && !s2.contains(j)).collect();
    SupportPartition {
        s1,
        s2,
        s3,
        warnings: Vec::new(),
    }
}

fn gaussian_matrix(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0) + rng.random_range(-1.0..1.0))
}

#[test]
fn partition_examples() {
    // 1-based {1,2,3,4,7,9} and {1,2,3,4} with p = 10
    let lasso = fit_with_support(10, &[0, 1, 2, 3, 6, 8]);
    let alasso = fit_with_support(10, &[0, 1, 2, 3]);
    let part = partition_supports(&lasso, &alasso, 10).unwrap();
    assert_eq!(part.s1, vec![0, 1, 2, 3]);
    assert_eq!(part.s2, vec![6, 8]);
    assert_eq!(part.s3, vec![4, 5, 7, 9]);

    let same = partition_supports(&alasso, &alasso, 10).unwrap();
    assert!(same.s2.is_empty());

    let empty = fit_with_support(10, &[]);
    assert!(matches!(
        partition_supports(&lasso, &empty, 10),
        Err(Error::NoStrongSignals)
    ));
}

#[test]
fn alasso_index_missing_from_lasso_stays_strong() {
    let lasso = fit_with_support(6, &[0, 2]);
    let alasso = fit_with_support(6, &[0, 4]);
    let part = partition_supports(&lasso, &alasso, 6).unwrap();
    assert_eq!(part.s1, vec![0, 4]);
    assert_eq!(part.s2, vec![2]);
    assert!(!part.warnings.is_empty());
}

#[test]
fn residual_variance_examples() {
    let x = DMatrix::from_row_slice(3, 2, &[0.0, 1.0, 0.0, 2.0, 0.0, -1.0]);
    let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
    let data = Dataset::new(x, y).unwrap();
    let part = partition(vec![0], vec![], 2);
    assert_eq!(residual_variance(&data, &part, &[4.2]).unwrap(), 7.0);

    let x = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
    let exact = Dataset::new(x, DVector::from_vec(vec![2.0, 4.0, 6.0])).unwrap();
    let part = partition(vec![0], vec![], 1);
    assert!(matches!(
        residual_variance(&exact, &part, &[2.0]),
        Err(Error::DegenerateVariance)
    ));
}

#[test]
fn residual_variance_matches_dense_computation() {
    let x = gaussian_matrix(20, 4, 3);
    let y = DVector::from_fn(20, |i, _| (i as f64).sqrt());
    let data = Dataset::new(x.clone(), y.clone()).unwrap();
    let part = partition(vec![1, 3], vec![0], 4);
    let b = [0.4, -1.1];
    let mut rss = 0.0;
    for i in 0..20 {
        let r = y[i] - x[(i, 1)] * b[0] - x[(i, 3)] * b[1];
        rss += r * r;
    }
    let got = residual_variance(&data, &part, &b).unwrap();
    assert!((got - rss / 19.0).abs() < 1e-12 * rss);
}

#[test]
fn wn_is_zero_for_orthogonal_response() {
    let x = gaussian_matrix(12, 5, 8);
    // y = component of a random vector orthogonal to every column.
    let v = DVector::from_fn(12, |i, _| ((i * 7 + 3) % 5) as f64 - 2.0);
    let q = x.clone().qr().q();
    let y = &v - &q * (q.transpose() * &v);
    let data = Dataset::new(x, y).unwrap();
    let part = partition(vec![0, 1], vec![2, 3, 4], 5);
    let (wn, b2) = compute_wn(&data, &part, 1.0, WnScaling::Wald).unwrap();
    assert!(wn.abs() < 1e-20);
    assert!(b2.iter().all(|b| b.abs() < 1e-10));
}

#[test]
fn wn_on_orthonormal_design() {
    let n = 30;
    let x = gaussian_matrix(n, 6, 2).qr().q() * (n as f64).sqrt();
    let y = DVector::from_fn(n, |i, _| (i as f64 * 0.37).cos() * 2.0);
    let data = Dataset::new(x.clone(), y.clone()).unwrap();
    let part = partition(vec![0, 1], vec![2, 3, 4], 6);
    let sigma2 = 1.7;
    let (wn, b2) = compute_wn(&data, &part, sigma2, WnScaling::Wald).unwrap();
    let lse: Vec<f64> = (2..5).map(|j| x.column(j).dot(&y) / n as f64).collect();
    for k in 0..3 {
        assert!((b2[k] - lse[k]).abs() < 1e-10);
    }
    let expect = n as f64 * lse.iter().map(|b| b * b).sum::<f64>() / sigma2;
    assert!((wn - expect).abs() < 1e-9 * expect);
    let (scaled, _) = compute_wn(&data, &part, sigma2, WnScaling::NScaled).unwrap();
    assert!((scaled - n as f64 * wn).abs() < 1e-9 * scaled);
}

#[test]
fn wn_matches_explicit_projector() {
    let x = gaussian_matrix(30, 5, 17);
    let y = DVector::from_fn(30, |i, _| (i as f64 * 0.21).sin() + x[(i, 3)]);
    let data = Dataset::new(x.clone(), y.clone()).unwrap();
    let part = partition(vec![0, 1], vec![2, 3, 4], 5);
    let sigma2 = 0.8;
    let (wn, b2) = compute_wn(&data, &part, sigma2, WnScaling::Wald).unwrap();

    let x1 = x.columns(0, 2).clone_owned();
    let x2 = x.columns(2, 3).clone_owned();
    let inv = (x1.transpose() * &x1).try_inverse().unwrap();
    let m1 = DMatrix::identity(30, 30) - &x1 * inv * x1.transpose();
    let a = x2.transpose() * &m1 * &x2;
    let beta2 = a.clone().try_inverse().unwrap() * x2.transpose() * &m1 * &y;
    let expect = (beta2.transpose() * &a * &beta2)[(0, 0)] / sigma2;
    for k in 0..3 {
        assert!((b2[k] - beta2[k]).abs() < 1e-10);
    }
    assert!((wn - expect).abs() < 1e-9 * expect);
}

#[test]
fn shrink_examples() {
    let part = partition(vec![0, 1], vec![2, 3, 4, 5], 7);
    let same = ShrinkageInputs {
        beta1_uf: vec![1.5, -0.5],
        beta1_of: vec![1.5, -0.5],
        wn: 3.3,
        sigma2_hat: 1.0,
        beta2_lse: vec![],
    };
    for v in Variant::ALL {
        assert_eq!(shrink(&same, v, &part, 7).unwrap().beta1, vec![1.5, -0.5]);
    }

    let inputs = ShrinkageInputs {
        beta1_uf: vec![1.0, 2.0],
        beta1_of: vec![3.0, 1.0],
        wn: 1.0,
        ..same.clone()
    };
    let fs1 = shrink(&inputs, Variant::FS1, &part, 7).unwrap();
    assert_eq!(fs1.factor, Some(0.0));
    assert_eq!(fs1.beta1, vec![1.0, 2.0]);
    assert_eq!(fs1.full_beta, vec![1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0]);

    let big = 1e12;
    let f3 = shrink_factor(Variant::FS3, big, 4).unwrap();
    assert!((f3 - (1.0 - 2.0 * std::f64::consts::FRAC_PI_2 / big)).abs() < 1e-15);

    assert_eq!(shrink_factor(Variant::PS, 2.0, 4).unwrap(), 0.0);
    assert_eq!(shrink_factor(Variant::PS, 1.0, 4).unwrap(), 0.0);
    assert!(matches!(
        shrink_factor(Variant::S, 5.0, 2),
        Err(Error::InsufficientWeakSet { p2: 2 })
    ));
    assert!(matches!(
        shrink_factor(Variant::FS3, 0.0, 5),
        Err(Error::UnboundedShrinkFactor { .. })
    ));
}

#[test]
fn r_is_bounded_on_log_grid() {
    let grid: Vec<f64> = (0..=1600).map(|i| 10f64.powf(-8.0 + i as f64 * 0.01)).collect();
    for &w in &grid {
        let r1 = Variant::FS1.r(w);
        let r2 = Variant::FS2.r(w);
        let r3 = Variant::FS3.r(w);
        assert!((0.0..1.0).contains(&r1));
        assert!(r2 > 0.0 || w > 25.0, "FS2 underflows only far out");
        assert!(r2 <= 1.0);
        assert!((0.0..std::f64::consts::FRAC_PI_2).contains(&r3));
    }
    // Below w ~ 1e-8 atan(w)/w is 1 up to rounding; allow a few ulps.
    for v in [Variant::FS1, Variant::FS3] {
        for pair in grid.windows(2) {
            let (a, b) = (v.r(pair[0]) / pair[0], v.r(pair[1]) / pair[1]);
            assert!(b <= a * (1.0 + 4.0 * f64::EPSILON), "{v} at {}", pair[1]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn variants_lie_on_the_uf_of_line(
        uf in prop::collection::vec(-10.0f64..10.0, 1..6),
        shift in prop::collection::vec(-10.0f64..10.0, 6),
        wn in 1e-6f64..1e6,
        p2 in 3usize..40,
    ) {
        let p1 = uf.len();
        let of: Vec<f64> = uf.iter().zip(&shift).map(|(u, s)| u + s).collect();
        let p = p1 + p2;
        let part = partition((0..p1).collect(), (p1..p).collect(), p);
        let inputs = ShrinkageInputs {
            beta1_uf: uf.clone(),
            beta1_of: of.clone(),
            wn,
            sigma2_hat: 1.0,
            beta2_lse: vec![0.0; p2],
        };
        let k = (p2 - 2) as f64;
        for v in Variant::ALL {
            let fit = shrink(&inputs, v, &part, p).unwrap();
            let factor = fit.factor.unwrap();
            let expect = match v {
                Variant::S => 1.0 - k / wn,
                Variant::PS => (1.0 - k / wn).max(0.0),
                Variant::FS1 => 1.0 - k * (wn / (1.0 + wn)) / wn,
                Variant::FS2 => 1.0 - k * (-wn * wn).exp() / wn,
                Variant::FS3 => 1.0 - k * wn.atan() / wn,
            };
            prop_assert!((factor - expect).abs() <= 1e-12 * expect.abs().max(1.0), "{} {} {}", v, factor, expect);
            if v == Variant::PS {
                prop_assert!((0.0..=1.0).contains(&factor));
            }
            for j in 0..p1 {
                let line = (1.0 - factor) * uf[j] + factor * of[j];
                prop_assert!((fit.beta1[j] - line).abs() <= 1e-9 * (1.0 + line.abs() + factor.abs() * shift[j].abs()));
            }
            if v == Variant::S || v == Variant::FS1 || v == Variant::FS3 {
                // factors differ from S only through r
                let s = shrink_factor(Variant::S, wn, p2).unwrap();
                prop_assert!(((1.0 - factor) / (1.0 - s) - v.r(wn)).abs() <= 1e-9 * v.r(wn).max(1.0));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wn_is_nonnegative(seed in 0u64..100_000, sigma2 in 0.01f64..10.0) {
        let x = gaussian_matrix(15, 6, seed);
        let y = gaussian_matrix(15, 1, seed + 1).column(0).clone_owned();
        let data = Dataset::new(x, y).unwrap();
        let part = partition(vec![0, 1], vec![2, 3, 4, 5], 6);
        let (wn, b2) = compute_wn(&data, &part, sigma2, WnScaling::Wald).unwrap();
        prop_assert!(wn >= 0.0);
        prop_assert_eq!(b2.len(), 4);
    }
}
