// Draws Gaussian plus impulsive mixture noise at 20 dB SGNR and -10 dB SINR
// and shows how spiky the received signal becomes.
//
// Pass a directory to also write `clean.csv` and `received.csv` there.

use llbcs::harness::peak_to_median;
use llbcs::noise::{excess_kurtosis, power};
use llbcs::rng::{stream_rng, Stream};
use llbcs::{
    build_sensing_matrix, compose_noise, generate_lfm, random_channel, sample_gmm_impulse, synthesize_clean, GmmSpec,
    NoiseConfig, TimeGrid,
};

pub fn run_example() -> llbcs::Result<()> {
    run(None)
}

fn run(out: Option<&std::path::Path>) -> llbcs::Result<()> {
    let gmm = GmmSpec::impulsive_default();
    let draws = sample_gmm_impulse(200_000, &gmm, &mut stream_rng(1, Stream::Impulse))?;
    println!(
        "mixture: variance {:.3} (analytic {:.3}), excess kurtosis {:.2}",
        power(&draws),
        gmm.variance(),
        excess_kurtosis(&draws)
    );

    let w = generate_lfm(6000.0, 7000.0, 0.05, 20_000.0)?;
    let grid = TimeGrid::new(2000.0, 0.02, w.sample_rate_hz())?;
    let a = build_sensing_matrix(&w, &grid)?;
    let seed = 7;
    let ch = random_channel(4, &grid, &mut stream_rng(seed, Stream::Channel))?;
    let clean = synthesize_clean(&a, &ch)?;
    let cfg = NoiseConfig {
        gmm,
        sgnr_db: 20.0,
        sinr_db: -10.0,
    };
    let noise = compose_noise(
        &clean,
        &cfg,
        &mut stream_rng(seed, Stream::Gaussian),
        &mut stream_rng(seed, Stream::Impulse),
    )?;
    let received = &clean + noise.total();
    println!("paths at bins {:?}", ch.grid_indices());
    println!("peak/median |clean|    = {:.1}", peak_to_median(&clean));
    println!("peak/median |received| = {:.1}", peak_to_median(&received));

    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        llbcs::io::write_index_value_file(dir.join("clean.csv"), clean.as_slice())?;
        llbcs::io::write_index_value_file(dir.join("received.csv"), received.as_slice())?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}

fn main() {
    let dir = std::env::args().nth(1).map(std::path::PathBuf::from);
    if let Err(e) = run(dir.as_deref()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
