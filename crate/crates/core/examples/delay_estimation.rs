// One realization at -10 dB SINR, solved by every method on the same data.
// Prints the true delays, each method's picks and its strongest bins.

use llbcs::config::ExperimentConfig;
use llbcs::harness::pick_peak_indices;
use llbcs::Method;

pub fn run_example() -> llbcs::Result<()> {
    run(3)
}

fn run(seed: u64) -> llbcs::Result<()> {
    let scenario = ExperimentConfig::default().build_scenario()?;
    let r = scenario.realize(seed)?;
    println!("true bins {:?}", r.channel.grid_indices());
    for m in Method::ALL {
        let t = scenario.evaluate(m, &r)?;
        let v = t.spectrum.values();
        let mut order: Vec<usize> = (0..v.len()).collect();
        order.sort_by(|&a, &b| v[b].total_cmp(&v[a]));
        let top: Vec<String> = order[..6].iter().map(|&i| format!("{i}:{:.3}", v[i])).collect();
        println!(
            "{m:>7} picks {:?} ({} iterations)  strongest {}",
            pick_peak_indices(v, scenario.k)?,
            t.iterations,
            top.join(" ")
        );
    }
    Ok(())
}

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    if let Err(e) = run(seed) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
