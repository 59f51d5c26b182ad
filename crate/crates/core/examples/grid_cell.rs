//! Runs one simulation cell and prints the RMSE table.
//!
//! `cargo run --release --example grid_cell -- [reps] [p2] [p3] [strong] [deltas,...] [key=value ...]`
//! where keys are `wn` (wald|n-scaled), `pilot` (lasso|ridge), `intercept`
//! (true|false), `early_stop` (true|false), `folds`, `gamma`, `seed`, `rule` (min|1se).

use std::time::Instant;

use double_shrink::pipeline::{Estimator, Pilot};
use double_shrink::shrinkage::WnScaling;
use double_shrink::simulation::{run_grid, SimulationConfig};
use double_shrink::solvers::Rule;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut config = SimulationConfig::default();
    let positional: Vec<&String> = args.iter().filter(|a| !a.contains('=')).collect();
    if let Some(r) = positional.first() {
        config.replications = r.parse().unwrap();
    }
    if let Some(v) = positional.get(1) {
        config.p2 = v.parse().unwrap();
    }
    if let Some(v) = positional.get(2) {
        config.p3 = v.parse().unwrap();
    }
    if let Some(v) = positional.get(3) {
        config.strong = v.parse().unwrap();
    }
    if let Some(v) = positional.get(4) {
        config.delta_grid = v.split(',').map(|d| d.parse().unwrap()).collect();
    }
    for kv in args.iter().filter(|a| a.contains('=')) {
        let (k, v) = kv.split_once('=').unwrap();
        match k {
            "wn" => {
                config.pipeline.wn_scaling = if v == "wald" {
                    WnScaling::Wald
                } else {
                    WnScaling::NScaled
                }
            }
            "pilot" => config.pipeline.pilot = if v == "ridge" { Pilot::Ridge } else { Pilot::Lasso },
            "intercept" => config.pipeline.solver.intercept = v.parse().unwrap(),
            "early_stop" => config.pipeline.solver.early_stop = v.parse().unwrap(),
            "folds" => config.pipeline.cv.folds = v.parse().unwrap(),
            "gamma" => config.pipeline.gamma = v.parse().unwrap(),
            "seed" => config.seed = v.parse().unwrap(),
            "rule" => config.pipeline.cv.rule = if v == "min" { Rule::Min } else { Rule::OneSe },
            _ => panic!("unknown key {k}"),
        }
    }
    let start = Instant::now();
    let report = run_grid(&config).expect("grid run");
    println!("{}", report.render_table());
    for c in &report.cells {
        let l = c.summary(Estimator::LASSO);
        let a = c.summary(Estimator::ALASSO);
        let f3 = c.summary(Estimator::FS3);
        println!(
            "delta {:.1}: TP/FP LASSO {:.2}/{:.2} ALASSO {:.2}/{:.2} FS3 {:.2}/{:.2}; fallbacks {} failures {} kkt {:.2e} mse(LASSO) {:.4}",
            c.delta, l.tp_mean, l.fp_mean, a.tp_mean, a.fp_mean, f3.tp_mean, f3.fp_mean, c.fallbacks, c.failures, c.max_lasso_kkt_residual, l.mse
        );
    }
    eprintln!("elapsed {:.1}s", start.elapsed().as_secs_f64());
}
