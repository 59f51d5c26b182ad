use double_shrink::pipeline::Estimator;
use double_shrink::simulation::{estimator_mse_against_truth, gen_dataset, run_grid, SimulationConfig};

fn small(replications: usize) -> SimulationConfig {
    SimulationConfig {
        n: 80,
        p3: 20,
        replications,
        delta_grid: vec![0.0, 0.8],
        ..SimulationConfig::default()
    }
}

#[test]
fn design_entries_have_chi_square_plus_normal_moments() {
    let config = SimulationConfig {
        n: 500,
        p3: 192,
        ..SimulationConfig::default()
    };
    let (data, _) = gen_dataset(&config, 0, 0.0);
    let xs: Vec<f64> = data.x().iter().copied().collect();
    let m = xs.len() as f64;
    assert_eq!(xs.len(), 100_000);
    let mean = xs.iter().sum::<f64>() / m;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    // x = a + b with a = xi^2 - 1: E(x-1)^4 = 60 + 6*2*1 + 3 = 75
    let se_mean = (3.0 / m).sqrt();
    let se_var = ((75.0 - 9.0) / m).sqrt();
    assert!((mean - 1.0).abs() < 3.0 * se_mean, "mean {mean}");
    assert!((var - 3.0).abs() < 3.0 * se_var, "var {var}");
}

#[test]
fn truth_and_replication_keys() {
    let config = small(2);
    let (a, beta) = gen_dataset(&config, 7, 0.0);
    assert_eq!(beta.iter().filter(|b| **b != 0.0).count(), config.p1);
    let (b, _) = gen_dataset(&config, 7, 0.0);
    assert_eq!(a, b);
    let (c, _) = gen_dataset(&config, 7, 0.2);
    assert_ne!(a.x(), c.x());
    let other_seed = SimulationConfig { seed: 1, ..config };
    let (d, _) = gen_dataset(&other_seed, 7, 0.0);
    assert_ne!(a.x(), d.x());
}

#[test]
fn mse_against_truth() {
    let truth = vec![1.0, 1.0, 1.0, 1.0, 0.5, 0.0];
    assert_eq!(estimator_mse_against_truth(&truth, &truth, 4), 0.0);
    assert_eq!(estimator_mse_against_truth(&[0.0; 6], &truth, 4), 4.0);
    let est = [0.9, 1.2, 0.0, 1.0, 3.0, 3.0];
    let direct: f64 = [0.1f64, 0.2, 1.0, 0.0].iter().map(|d| d * d).sum();
    assert!((estimator_mse_against_truth(&est, &truth, 4) - direct).abs() < 1e-15);
}

#[test]
fn grid_report_invariants() {
    let report = run_grid(&small(6)).unwrap();
    assert_eq!(report.cells.len(), 2);
    for cell in &report.cells {
        assert_eq!(cell.replications_used + cell.failures, 6);
        assert_eq!(cell.summary(Estimator::LASSO).rmse, 1.0);
        assert_eq!(cell.unconverged_lasso_fits, 0);
        assert!(cell.max_lasso_kkt_residual <= 1e-5);
        for est in [Estimator::LASSO, Estimator::ALASSO] {
            let freq = &cell.selection[est.index()].frequency;
            assert!(freq[..4].iter().all(|f| *f == 1.0), "{est} misses a strong signal");
        }
        for s in &cell.estimators {
            assert!(s.rmse.is_finite() && s.rmse > 0.0);
            assert!(s.tp_pct <= 100.0 && s.fp_pct <= 100.0);
        }
    }
    let csv = report.rmse_csv().unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * Estimator::ALL.len());
    let sel = report.selection_csv().unwrap();
    assert!(sel.starts_with("predictor_index,method,delta,frequency"));
}

#[test]
fn report_is_independent_of_thread_count() {
    let config = small(5);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_grid(&config).unwrap())
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one.to_json().unwrap(), four.to_json().unwrap());
    assert_eq!(one.rmse_csv().unwrap(), four.rmse_csv().unwrap());
}
