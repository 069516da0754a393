// Monte Carlo RMSE against SINR for all methods at 20 dB SGNR.
//
// `cargo run --release --example sinr_sweep -- 50` runs 50 trials per point.

use llbcs::config::ExperimentConfig;
use llbcs::harness::run_sweep;

pub fn run_example() -> llbcs::Result<()> {
    run(2)
}

fn run(trials: usize) -> llbcs::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.run.trials = trials;
    let scenario = cfg.build_scenario()?;
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let result = run_sweep(&scenario, &cfg.sweep_plan(), workers)?;

    let cell = scenario.grid.resolution_s();
    println!(
        "{:>7} {:>7} {:>12} {:>12} {:>8}",
        "sinr", "method", "aggregate (s)", "rmse (s)", "hits"
    );
    for c in &result.cells {
        let hits = result
            .trials_for(c.sinr_db, c.method)
            .iter()
            .filter(|t| t.all_within(cell))
            .count();
        println!(
            "{:>7} {:>7} {:>12.3e} {:>12.3e} {:>5}/{}",
            c.sinr_db, c.method, c.rmse_eq28_s, c.rmse_std_s, hits, c.trials
        );
    }
    Ok(())
}

fn main() {
    let trials = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    if let Err(e) = run(trials) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
