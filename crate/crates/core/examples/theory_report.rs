//! Prints the conformance report for the default theory configuration.

fn main() {
    let config = double_shrink::theory::TheoryConfig::default();
    let start = std::time::Instant::now();
    let report = double_shrink::theory::run_conformance(&config).expect("conformance run");
    println!("{}", report.to_json().expect("json"));
    eprintln!("elapsed {:.1}s", start.elapsed().as_secs_f64());
}
