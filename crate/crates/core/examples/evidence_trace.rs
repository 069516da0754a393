// Per-iteration LL-BCS trace on one noisy realization: relative change in
// the prior variances, both rate parameters and the EM objective.

use llbcs::config::ExperimentConfig;
use llbcs::solver::{ll_bcs_solve_traced, SolverOptions};

pub fn run_example() -> llbcs::Result<()> {
    let scenario = ExperimentConfig::default().build_scenario()?;
    let r = scenario.realize(11)?;
    let mut trace = Vec::new();
    let fit = ll_bcs_solve_traced(
        scenario.matrix.matrix(),
        &r.received,
        &SolverOptions::default(),
        &mut trace,
    )?;

    println!(
        "{:>4} {:>10} {:>10} {:>10} {:>14}",
        "iter", "epsilon", "lambda", "beta", "Q"
    );
    for t in &trace {
        println!(
            "{:>4} {:>10.3e} {:>10.4} {:>10.4} {:>14.4}",
            t.iteration, t.epsilon, t.lambda, t.beta, t.q
        );
    }
    println!(
        "converged: {} after {} iterations; true bins {:?}",
        fit.fit.converged,
        fit.fit.iterations,
        r.channel.grid_indices()
    );
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
