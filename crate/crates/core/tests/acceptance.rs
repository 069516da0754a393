//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::time::Instant;

use llbcs::baseline::BaselineOptions;
use llbcs::config::ExperimentConfig;
use llbcs::harness::{rmse_of, run_sweep, Scenario, SweepPlan, SweepResult};
use llbcs::noise::{excess_kurtosis, power, GmmSpec, NoiseConfig};
use llbcs::rng::{stream_rng, trial_seed, Stream};
use llbcs::solver::{
    log_evidence_q, posterior_update, residual_moments, update_beta, update_gamma, update_lambda, update_tau,
    SolverState,
};
use llbcs::{sample_gmm_impulse, Method};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

const IDENTITY_TOL: f64 = 1e-10;
const GRADIENT_TOL: f64 = 1e-6;
const POSTERIOR_REL_TOL: f64 = 1e-8;
const GMM_VAR_REL_TOL: f64 = 0.05;
const GMM_ANALYTIC_VAR: f64 = 4.6;
const ONE_CELL_S: f64 = 0.5e-3;
const RELATION_REL_TOL: f64 = 1e-12;
const SWEEP_TRIALS: usize = 50;
const SWEEP_SINR_DB: [f64; 5] = [-20.0, -10.0, 0.0, 10.0, 20.0];
const SWEEP_SEED: u64 = 2024;

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: usize, name: &str, started: Instant, o: &Outcome) {
    println!(
        "criterion {id} ({name}): {} [{:.1} s] {}",
        if o.pass { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64(),
        o.detail
    );
}

fn central_diff(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-6 * x.abs().max(1e-3);
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    10f64.powf(rng.random_range(lo..hi))
}

fn random_instance(seed: u64, m: usize, n: usize) -> (DMatrix<f64>, DVector<f64>, DVector<f64>, DVector<f64>) {
    let mut rng = stream_rng(seed, Stream::Channel);
    let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
    let y = DVector::from_fn(m, |_, _| rng.random_range(-2.0..2.0));
    let g = DVector::from_fn(n, |_, _| log_uniform(&mut rng, -1.0, 0.5));
    let t = DVector::from_fn(m, |_, _| log_uniform(&mut rng, -1.0, 0.5));
    (a, y, g, t)
}

fn stationarity() -> Outcome {
    let mut rng = stream_rng(1, Stream::Gaussian);
    let mut worst_identity: f64 = 0.0;
    for _ in 0..1000 {
        let (lambda, c) = (log_uniform(&mut rng, -3.0, 3.0), log_uniform(&mut rng, -3.0, 3.0));
        let g = update_gamma(&DVector::from_element(1, c.sqrt()), &DVector::zeros(1), lambda, 0.0).unwrap()[0];
        worst_identity = worst_identity.max((lambda * g * g + g - c).abs());

        let (beta, r) = (log_uniform(&mut rng, -3.0, 3.0), log_uniform(&mut rng, -3.0, 3.0));
        let t = update_tau(&DVector::from_element(1, r), beta, 0.0).unwrap()[0];
        worst_identity = worst_identity.max((beta * t * t + t - r).abs());
    }

    let mut worst_grad: f64 = 0.0;
    for inst in 0..100u64 {
        let m = 4 + (inst % 9) as usize;
        let n = 2 + (inst % 5) as usize;
        let (a, y, g, t) = random_instance(100 + inst, m, n);
        let p = posterior_update(&a, &y, &g, &t).unwrap();
        let base = SolverState {
            mu: p.mu,
            sigma: p.sigma,
            gamma: g,
            tau: t,
            lambda: log_uniform(&mut rng, -1.0, 1.0),
            beta: log_uniform(&mut rng, -1.0, 1.0),
            iter: 0,
        };
        let q = |s: &SolverState| log_evidence_q(s, &a, &y).unwrap();

        let new_gamma = update_gamma(&base.mu, &base.sigma.diagonal(), base.lambda, 0.0).unwrap();
        for j in 0..n {
            let d = central_diff(
                |v| {
                    let mut s = base.clone();
                    s.gamma[j] = v;
                    q(&s)
                },
                new_gamma[j],
            );
            worst_grad = worst_grad.max(d.abs());
        }
        let lam = update_lambda(&base.gamma).unwrap();
        worst_grad = worst_grad.max(
            central_diff(
                |v| {
                    q(&SolverState {
                        lambda: v,
                        ..base.clone()
                    })
                },
                lam,
            )
            .abs(),
        );
        let beta = update_beta(&base.tau).unwrap();
        worst_grad = worst_grad.max(
            central_diff(
                |v| {
                    q(&SolverState {
                        beta: v,
                        ..base.clone()
                    })
                },
                beta,
            )
            .abs(),
        );
        let r = residual_moments(&a, &y, &base.mu, &base.sigma).unwrap();
        let new_tau = update_tau(&r, base.beta, 0.0).unwrap();
        for i in 0..m {
            let d = central_diff(
                |v| {
                    let mut s = base.clone();
                    s.tau[i] = v;
                    q(&s)
                },
                new_tau[i],
            );
            worst_grad = worst_grad.max(d.abs());
        }
    }
    Outcome {
        pass: worst_identity <= IDENTITY_TOL && worst_grad <= GRADIENT_TOL,
        detail: format!(
            "max quadratic residual {worst_identity:.2e} (tol {IDENTITY_TOL:.0e}), max |dQ| {worst_grad:.2e} (tol {GRADIENT_TOL:.0e})"
        ),
    }
}

fn posterior_oracle() -> Outcome {
    let mut rng = stream_rng(2, Stream::Channel);
    let mut worst: f64 = 0.0;
    for inst in 0..100u64 {
        let m = rng.random_range(1..=20);
        let n = rng.random_range(1..=8);
        let (a, y, g, t) = random_instance(1000 + inst, m, n);
        let p = posterior_update(&a, &y, &g, &t).unwrap();

        let w = DMatrix::from_diagonal(&t.map(|x| 1.0 / x));
        let precision = DMatrix::from_diagonal(&g.map(|x| 1.0 / x)) + a.transpose() * &w * &a;
        let sigma = precision.try_inverse().expect("oracle inversion");
        let mu = &sigma * a.transpose() * &w * &y;
        worst = worst
            .max((&p.sigma - &sigma).amax() / sigma.amax())
            .max((&p.mu - &mu).amax() / mu.amax().max(f64::MIN_POSITIVE));
    }
    Outcome {
        pass: worst <= POSTERIOR_REL_TOL,
        detail: format!("max relative deviation {worst:.2e} (tol {POSTERIOR_REL_TOL:.0e})"),
    }
}

fn noise_statistics() -> Outcome {
    let gmm = GmmSpec::new(vec![0.9, 0.07, 0.03], vec![1.0, 10.0, 100.0]).unwrap();
    let v = sample_gmm_impulse(1_000_000, &gmm, &mut stream_rng(3, Stream::Impulse)).unwrap();
    let var = power(&v) - (v.sum() / v.len() as f64).powi(2);
    let kurt = excess_kurtosis(&v);
    let rel = (var - GMM_ANALYTIC_VAR).abs() / GMM_ANALYTIC_VAR;
    Outcome {
        pass: rel <= GMM_VAR_REL_TOL && kurt > 0.0,
        detail: format!(
            "variance {var:.4} ({:.2}% off {GMM_ANALYTIC_VAR}), excess kurtosis {kurt:.2}",
            100.0 * rel
        ),
    }
}

fn scenario(noise: NoiseConfig) -> Scenario {
    let cfg = ExperimentConfig::default();
    Scenario::new(cfg.waveform().unwrap(), cfg.time_grid().unwrap(), 4, noise, cfg.solver).unwrap()
}

fn noiseless_recovery() -> Outcome {
    let s = scenario(NoiseConfig {
        gmm: GmmSpec::impulsive_default(),
        sgnr_db: 300.0,
        sinr_db: 300.0,
    });
    let mut misses = Vec::new();
    for t in 0..50 {
        let r = s.realize(trial_seed(4, 0, t)).unwrap();
        for m in Method::ALL {
            let res = s.evaluate(m, &r).unwrap();
            if res.est_delays_s != res.true_delays_s {
                misses.push(format!("{m}@{t}"));
            }
        }
    }
    Outcome {
        pass: misses.is_empty(),
        detail: if misses.is_empty() {
            "50 trials x 4 methods exact".into()
        } else {
            format!("mismatches: {}", misses.join(" "))
        },
    }
}

fn reference_sweep() -> SweepResult {
    let cfg = ExperimentConfig::default();
    let s = cfg.build_scenario().unwrap();
    let plan = SweepPlan {
        sinr_db: SWEEP_SINR_DB.to_vec(),
        methods: Method::ALL.to_vec(),
        trials: SWEEP_TRIALS,
        base_seed: SWEEP_SEED,
    };
    run_sweep(&s, &plan, 1).unwrap()
}

fn rmse_versus_sinr(sweep: &SweepResult) -> Outcome {
    let aggregate = |sinr: f64, m: Method| sweep.cell(sinr, m).unwrap().rmse_eq28_s;
    let conv = |sinr: f64, m: Method| sweep.cell(sinr, m).unwrap().rmse_std_s;
    let baselines = [Method::LBcs, Method::Bcs, Method::L1];

    let a = [-20.0, -10.0]
        .iter()
        .all(|&s| baselines.iter().all(|&m| aggregate(s, Method::LlBcs) < aggregate(s, m)));
    let b = Method::ALL
        .iter()
        .all(|&m| conv(20.0, m) <= ONE_CELL_S && aggregate(20.0, m) <= ONE_CELL_S);
    let c = Method::ALL.iter().all(|&m| {
        SWEEP_SINR_DB
            .windows(2)
            .all(|w| conv(w[1], m) <= conv(w[0], m) + ONE_CELL_S)
    });

    let mut table = String::new();
    for &sinr in &SWEEP_SINR_DB {
        let row: Vec<String> = Method::ALL
            .iter()
            .map(|&m| format!("{m}={:.2e}/{:.2e}", aggregate(sinr, m), conv(sinr, m)))
            .collect();
        table.push_str(&format!("\n    {sinr:>4} dB aggregate/rmse: {}", row.join(" ")));
    }
    Outcome {
        pass: a && b && c,
        detail: format!("(a) {a} (b) {b} (c) {c}{table}"),
    }
}

fn detection_rate(sweep: &SweepResult) -> Outcome {
    let hits = |m: Method| {
        sweep
            .trials_for(-10.0, m)
            .iter()
            .filter(|t| t.all_within(ONE_CELL_S))
            .count()
    };
    let ours = hits(Method::LlBcs);
    let others: Vec<(Method, usize)> = [Method::LBcs, Method::Bcs, Method::L1]
        .iter()
        .map(|&m| (m, hits(m)))
        .collect();
    let detail = std::iter::once(format!("ll-bcs {ours}/{SWEEP_TRIALS}"))
        .chain(others.iter().map(|(m, h)| format!("{m} {h}/{SWEEP_TRIALS}")))
        .collect::<Vec<_>>()
        .join(", ");
    Outcome {
        pass: others.iter().all(|&(_, h)| ours > h),
        detail: format!("all four paths within one cell at -10 dB: {detail}"),
    }
}

/// How the low-SINR ordering reacts to the automatic l1 weight.
fn l1_penalty_sensitivity(sweep: &SweepResult) {
    let cfg = ExperimentConfig::default();
    for scale in [0.5, 2.0] {
        let mut s = cfg.build_scenario().unwrap();
        s.options.l1 = BaselineOptions {
            l1_penalty_scale: scale,
            ..BaselineOptions::lasso()
        };
        let plan = SweepPlan {
            sinr_db: vec![-20.0, -10.0],
            methods: vec![Method::L1],
            trials: SWEEP_TRIALS,
            base_seed: SWEEP_SEED,
        };
        let r = run_sweep(&s, &plan, 1).unwrap();
        let line: Vec<String> = plan
            .sinr_db
            .iter()
            .enumerate()
            .map(|(i, &sinr)| {
                let ours = sweep.cell(sinr, Method::LlBcs).unwrap().rmse_eq28_s;
                format!("{sinr} dB l1 {:.2e} vs ll-bcs {ours:.2e}", r.cells[i].rmse_eq28_s)
            })
            .collect();
        println!("  note: l1 penalty scale {scale}: {}", line.join(", "));
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for (run, workers) in [(0, 1), (1, 8), (2, 8), (3, 1)] {
        let out = dir.path().join(format!("run{run}"));
        let list = SWEEP_SINR_DB.map(|v| v.to_string()).join(",");
        let args = [
            "llbcs",
            "sweep",
            "--trials",
            &SWEEP_TRIALS.to_string(),
            "--seed",
            &SWEEP_SEED.to_string(),
            "--sinr-list",
            &list,
            "--workers",
            &workers.to_string(),
            "--out",
            out.to_str().unwrap(),
        ];
        let code = llbcs::cli::run(args, &mut std::io::sink(), &mut std::io::stderr());
        assert_eq!(code, 0, "sweep run {run} failed");
        csvs.push(std::fs::read(out.join(format!("sweep-seed{SWEEP_SEED}/sweep.csv"))).unwrap());
    }
    let identical = csvs.windows(2).all(|w| w[0] == w[1]);
    Outcome {
        pass: identical,
        detail: format!(
            "4 runs (workers 1, 8, 8, 1), {} CSV bytes each, identical: {identical}",
            csvs[0].len()
        ),
    }
}

fn rmse_metric() -> Outcome {
    let one = rmse_of([([0.0005].as_slice(), [0.0].as_slice())]).unwrap();
    let two = rmse_of([([0.003, 0.004].as_slice(), [0.0, 0.0].as_slice())]).unwrap();
    let perfect = rmse_of([([0.001, 0.002].as_slice(), [0.001, 0.002].as_slice())]).unwrap();
    let hand =
        one.aggregate == 0.0005 && two.aggregate == 0.0025 && perfect.aggregate == 0.0 && perfect.conventional == 0.0;

    let mut rng = stream_rng(8, Stream::Gaussian);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let trials = rng.random_range(1..=30usize);
        let k = rng.random_range(1..=6usize);
        let data: Vec<(Vec<f64>, Vec<f64>)> = (0..trials)
            .map(|_| {
                let e = (0..k).map(|_| rng.random_range(0.0..0.02)).collect();
                let t = (0..k).map(|_| rng.random_range(0.0..0.02)).collect();
                (e, t)
            })
            .collect();
        let r = rmse_of(data.iter().map(|(e, t)| (e.as_slice(), t.as_slice()))).unwrap();
        let predicted = ((trials * k) as f64).sqrt() * r.aggregate;
        worst = worst.max((r.conventional - predicted).abs() / r.conventional);
    }
    Outcome {
        pass: hand && worst <= RELATION_REL_TOL,
        detail: format!(
            "hand values {} / {} / {} exact: {hand}; max relative gap in rmse = sqrt(MK) aggregate: {worst:.1e}",
            one.aggregate, two.aggregate, perfect.aggregate
        ),
    }
}

fn main() {
    let mut failed = Vec::new();
    let mut check = |id: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let started = Instant::now();
        let o = f();
        report(id, name, started, &o);
        if !o.pass {
            failed.push(id);
        }
    };

    check(1, "stationarity", &mut stationarity);
    check(2, "posterior oracle", &mut posterior_oracle);
    check(3, "noise statistics", &mut noise_statistics);
    check(4, "noiseless recovery", &mut noiseless_recovery);

    let started = Instant::now();
    let sweep = reference_sweep();
    println!(
        "  sweep: {SWEEP_TRIALS} trials x 5 SINR x 4 methods in {:.1} s",
        started.elapsed().as_secs_f64()
    );
    check(5, "RMSE versus SINR", &mut || rmse_versus_sinr(&sweep));
    l1_penalty_sensitivity(&sweep);
    check(6, "low-SINR detection rate", &mut || detection_rate(&sweep));
    check(7, "sweep determinism", &mut determinism);
    check(8, "RMSE normalization", &mut rmse_metric);

    if failed.is_empty() {
        println!("acceptance: all 8 criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
