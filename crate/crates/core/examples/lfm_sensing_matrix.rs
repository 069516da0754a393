// Builds the chirp and the delay dictionary, then prints their sizes and
// how strongly neighbouring delay columns overlap.

use llbcs::{build_sensing_matrix, generate_lfm, TimeGrid};

pub fn run_example() -> llbcs::Result<()> {
    let w = generate_lfm(6000.0, 7000.0, 0.05, 20_000.0)?;
    let grid = TimeGrid::new(2000.0, 0.02, w.sample_rate_hz())?;
    let a = build_sensing_matrix(&w, &grid)?;
    println!(
        "I={} N={} M={} d={} (resolution {} s)",
        w.len(),
        a.n_cols(),
        a.m_rows(),
        a.shift(),
        grid.resolution_s()
    );

    let m = a.matrix();
    let norm = m.column(0).norm();
    println!("column norm {norm:.4}");
    for lag in 1..=4 {
        let c = m.column(0).dot(&m.column(lag)) / (norm * m.column(lag).norm());
        println!("correlation with column {lag}: {c:+.4}");
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
