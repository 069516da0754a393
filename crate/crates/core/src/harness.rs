//! Peak picking, RMSE and seeded Monte Carlo trials over SINR.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize};

use crate::baseline::{bcs_solve, l_bcs_solve, lasso_solve, BaselineOptions, Method};
use crate::error::{invalid, Error};
use crate::noise::{compose_noise, NoiseConfig, NoiseRealization};
use crate::rng::{stream_rng, trial_seed, Stream};
use crate::signal::{
    build_sensing_matrix, random_channel, synthesize_clean, SensingMatrix, SparseChannel, TimeGrid, Waveform,
};
use crate::solver::{ll_bcs_solve, DelaySpectrum, SolverOptions};
use crate::Result;

/// Solver settings for every method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodOptions {
    pub ll_bcs: SolverOptions,
    pub l_bcs: BaselineOptions,
    pub bcs: BaselineOptions,
    /// Omitted fields fall back to [`BaselineOptions::lasso`].
    #[serde(deserialize_with = "lasso_with_defaults")]
    pub l1: BaselineOptions,
}

fn lasso_with_defaults<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BaselineOptions, D::Error> {
    let mut merged = serde_json::to_value(BaselineOptions::lasso()).map_err(D::Error::custom)?;
    match (merged.as_object_mut(), serde_json::Value::deserialize(d)?) {
        (Some(base), serde_json::Value::Object(patch)) => base.extend(patch),
        _ => return Err(D::Error::custom("expected an object of l1 options")),
    }
    serde_json::from_value(merged).map_err(D::Error::custom)
}

impl Default for MethodOptions {
    fn default() -> Self {
        Self {
            ll_bcs: SolverOptions::default(),
            l_bcs: BaselineOptions::default(),
            bcs: BaselineOptions::default(),
            l1: BaselineOptions::lasso(),
        }
    }
}

impl MethodOptions {
    pub fn validate(&self) -> Result<()> {
        self.ll_bcs.validate()?;
        self.l_bcs.validate()?;
        self.bcs.validate()?;
        self.l1.validate()
    }
}

/// Runs `method` on `y` and returns its delay spectrum.
pub fn estimate(
    method: Method,
    a: &SensingMatrix,
    grid: &TimeGrid,
    y: &DVector<f64>,
    opts: &MethodOptions,
) -> Result<DelaySpectrum> {
    let a = a.matrix();
    let fit = match method {
        Method::LlBcs => ll_bcs_solve(a, y, &opts.ll_bcs)?.fit,
        Method::LBcs => l_bcs_solve(a, y, &opts.l_bcs)?.fit,
        Method::Bcs => bcs_solve(a, y, &opts.bcs)?.fit,
        Method::L1 => lasso_solve(a, y, &opts.l1)?.fit,
    };
    fit.into_spectrum(*grid)
}

/// Fixed parts of an experiment: waveform, grid, sensing matrix, path count, noise and solver settings.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub waveform: Waveform,
    pub grid: TimeGrid,
    pub matrix: SensingMatrix,
    pub k: usize,
    /// When set, every trial uses this channel instead of drawing one.
    pub pinned: Option<SparseChannel>,
    pub noise: NoiseConfig,
    pub options: MethodOptions,
}

/// One draw of channel and noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub seed: u64,
    pub channel: SparseChannel,
    pub clean: DVector<f64>,
    pub noise: NoiseRealization,
    pub received: DVector<f64>,
}

impl Scenario {
    pub fn new(
        waveform: Waveform,
        grid: TimeGrid,
        k: usize,
        noise: NoiseConfig,
        options: MethodOptions,
    ) -> Result<Self> {
        let matrix = build_sensing_matrix(&waveform, &grid)?;
        if k == 0 || k > grid.n_bins() {
            return Err(invalid(format!("number of paths {k} must be in 1..={}", grid.n_bins())));
        }
        noise.validate()?;
        options.validate()?;
        Ok(Self {
            waveform,
            grid,
            matrix,
            k,
            pinned: None,
            noise,
            options,
        })
    }

    pub fn with_pinned(mut self, grid_indices: Vec<usize>) -> Result<Self> {
        let ch = SparseChannel::unit(grid_indices, self.grid.n_bins())?;
        if ch.k() != self.k {
            return Err(invalid(format!(
                "pinned channel has {} paths but k = {}",
                ch.k(),
                self.k
            )));
        }
        self.pinned = Some(ch);
        Ok(self)
    }

    pub fn realize(&self, seed: u64) -> Result<Realization> {
        self.realize_with(&self.noise, seed)
    }

    /// Realization with an explicit noise setting; channel and noise come from
    /// separate streams of `seed`.
    pub fn realize_with(&self, noise: &NoiseConfig, seed: u64) -> Result<Realization> {
        let channel = match &self.pinned {
            Some(ch) => ch.clone(),
            None => random_channel(self.k, &self.grid, &mut stream_rng(seed, Stream::Channel))?,
        };
        let clean = synthesize_clean(&self.matrix, &channel)?;
        let noise = compose_noise(
            &clean,
            noise,
            &mut stream_rng(seed, Stream::Gaussian),
            &mut stream_rng(seed, Stream::Impulse),
        )?;
        let received = &clean + noise.total();
        Ok(Realization {
            seed,
            channel,
            clean,
            noise,
            received,
        })
    }

    pub fn estimate(&self, method: Method, y: &DVector<f64>) -> Result<DelaySpectrum> {
        estimate(method, &self.matrix, &self.grid, y, &self.options)
    }

    /// Solves one realization with `method` and picks `k` delays.
    pub fn evaluate(&self, method: Method, r: &Realization) -> Result<TrialResult> {
        let start = Instant::now();
        let spectrum = self.estimate(method, &r.received)?;
        let est_delays_s = pick_peaks(&spectrum, self.k)?;
        let wall_time_s = start.elapsed().as_secs_f64();
        Ok(TrialResult {
            method,
            true_delays_s: r.channel.delays_s(&self.grid),
            est_delays_s,
            seed: r.seed,
            converged: spectrum.converged(),
            iterations: spectrum.iterations_used(),
            spectrum,
            wall_time_s,
        })
    }
}

/// One method applied to one realization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub method: Method,
    pub true_delays_s: Vec<f64>,
    /// Ascending, one per path.
    pub est_delays_s: Vec<f64>,
    #[serde(skip)]
    pub spectrum: DelaySpectrum,
    pub seed: u64,
    pub converged: bool,
    pub iterations: usize,
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl TrialResult {
    /// Largest `|τ̂_k − τ_k|` after pairing both lists in ascending order.
    pub fn max_abs_error_s(&self) -> f64 {
        let (est, truth) = (sorted(&self.est_delays_s), sorted(&self.true_delays_s));
        est.iter().zip(&truth).map(|(e, t)| (e - t).abs()).fold(0.0, f64::max)
    }

    /// Every estimate lies within `tol_s` of its paired true delay.
    pub fn all_within(&self, tol_s: f64) -> bool {
        self.max_abs_error_s() <= tol_s * (1.0 + 1e-9)
    }
}

/// Runs one trial of `scenario` with the given seed.
pub fn run_trial(scenario: &Scenario, method: Method, seed: u64) -> Result<TrialResult> {
    let r = scenario.realize(seed)?;
    scenario.evaluate(method, &r)
}

/// A bin below this fraction of a neighbour is treated as that neighbour's skirt.
pub const SHOULDER_RATIO: f64 = 0.5;

fn is_peak(v: &[f64], i: usize) -> bool {
    let left = if i > 0 { v[i - 1] } else { f64::NEG_INFINITY };
    let right = if i + 1 < v.len() { v[i + 1] } else { f64::NEG_INFINITY };
    v[i] >= SHOULDER_RATIO * left.max(right)
}

/// Indices of the `k` strongest peaks, returned ascending.
///
/// A peak is a bin holding at least [`SHOULDER_RATIO`] of each neighbour's
/// value (edge bins compare against their one neighbour). Strict local maxima
/// always qualify; so do two comparable arrivals in adjacent bins, while the
/// skirt of a single lobe does not. Missing peaks are filled with the largest
/// remaining bins. Ties go to the lower index.
pub fn pick_peak_indices(values: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > values.len() {
        return Err(invalid(format!("cannot pick {k} peaks from {} bins", values.len())));
    }
    let by_value_desc = |a: &usize, b: &usize| values[*b].total_cmp(&values[*a]).then(a.cmp(b));
    let (mut peaks, mut rest): (Vec<usize>, Vec<usize>) = (0..values.len()).partition(|&i| is_peak(values, i));
    peaks.sort_by(by_value_desc);
    peaks.truncate(k);
    if peaks.len() < k {
        rest.sort_by(by_value_desc);
        peaks.extend(rest.into_iter().take(k - peaks.len()));
    }
    peaks.sort_unstable();
    Ok(peaks)
}

/// Delays (seconds, ascending) of the `k` dominant peaks of the spectrum.
pub fn pick_peaks(spectrum: &DelaySpectrum, k: usize) -> Result<Vec<f64>> {
    let grid = spectrum.grid();
    Ok(pick_peak_indices(spectrum.values(), k)?
        .into_iter()
        .map(|i| grid.delay_of(i))
        .collect())
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Delay error over `𝓜` trials of `K` paths each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rmse {
    /// `(1 / (𝓜 K)) sqrt(Σ_m Σ_k (τ̂ − τ)²)`, normalized outside the root.
    pub aggregate: f64,
    /// Conventional `sqrt(Σ_m Σ_k (τ̂ − τ)² / (𝓜 K))`.
    pub conventional: f64,
}

/// RMSE over pairs of (estimated, true) delay lists; each pair is sorted before matching.
pub fn rmse_of<'a, I>(pairs: I) -> Result<Rmse>
where
    I: IntoIterator<Item = (&'a [f64], &'a [f64])>,
{
    let mut k = None;
    let mut trials = 0usize;
    let mut sum_sq = 0.0;
    for (est, truth) in pairs {
        if est.len() != truth.len() || est.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "trial has {} estimates for {} true delays",
                est.len(),
                truth.len()
            )));
        }
        match k {
            None => k = Some(est.len()),
            Some(k) if k != est.len() => {
                return Err(Error::DimensionMismatch(format!(
                    "path count {} differs from {k}",
                    est.len()
                )));
            }
            _ => {}
        }
        sum_sq += sorted(est)
            .iter()
            .zip(sorted(truth))
            .map(|(e, t)| (e - t) * (e - t))
            .sum::<f64>();
        trials += 1;
    }
    let k = k.ok_or_else(|| invalid("RMSE needs at least one trial"))?;
    let count = (trials * k) as f64;
    Ok(Rmse {
        aggregate: sum_sq.sqrt() / count,
        conventional: (sum_sq / count).sqrt(),
    })
}

pub fn rmse(trials: &[TrialResult]) -> Result<Rmse> {
    rmse_of(
        trials
            .iter()
            .map(|t| (t.est_delays_s.as_slice(), t.true_delays_s.as_slice())),
    )
}

/// `max |v| / median |v|`, a spikiness statistic for received signals.
pub fn peak_to_median(v: &DVector<f64>) -> f64 {
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let n = mags.len();
    let median = if n % 2 == 1 {
        mags[n / 2]
    } else {
        0.5 * (mags[n / 2 - 1] + mags[n / 2])
    };
    mags[n - 1] / median
}

/// Settings of a sweep, recorded next to its results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub sinr_db: Vec<f64>,
    pub methods: Vec<Method>,
    pub trials: usize,
    pub base_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub sinr_db: f64,
    pub method: Method,
    pub rmse_eq28_s: f64,
    pub rmse_std_s: f64,
    pub trials: usize,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub sinr_index: usize,
    pub sinr_db: f64,
    pub trial_index: usize,
    #[serde(flatten)]
    pub result: TrialResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub plan: SweepPlan,
    pub sgnr_db: f64,
    pub k: usize,
    pub cells: Vec<SweepCell>,
    /// Ordered by SINR, then trial, then method.
    pub records: Vec<TrialRecord>,
    /// Full resolved experiment config, when the caller has one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl SweepResult {
    pub fn cell(&self, sinr_db: f64, method: Method) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.sinr_db == sinr_db && c.method == method)
    }

    pub fn trials_for(&self, sinr_db: f64, method: Method) -> Vec<&TrialResult> {
        self.records
            .iter()
            .filter(|r| r.sinr_db == sinr_db && r.result.method == method)
            .map(|r| &r.result)
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "sinr_db,method,rmse_eq28_s,rmse_std_s,trials,k")?;
        for c in &self.cells {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                c.sinr_db, c.method, c.rmse_eq28_s, c.rmse_std_s, c.trials, c.k
            )?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(BufWriter::new(File::create(path)?))
    }

    pub fn write_json_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }
}

/// Full factorial over (SINR, trial, method).
///
/// Trial `t` at SINR index `s` uses seed `trial_seed(base_seed, s, t)`; all
/// methods see the same realization. Results do not depend on `workers`.
pub fn run_sweep(scenario: &Scenario, plan: &SweepPlan, workers: usize) -> Result<SweepResult> {
    if plan.trials == 0 {
        return Err(invalid("a sweep needs at least one trial"));
    }
    if plan.sinr_db.is_empty() || plan.methods.is_empty() {
        return Err(invalid("a sweep needs at least one SINR value and one method"));
    }
    let jobs: Vec<(usize, usize)> = (0..plan.sinr_db.len())
        .flat_map(|s| (0..plan.trials).map(move |t| (s, t)))
        .collect();

    let run_job = |&(s, t): &(usize, usize)| -> Result<Vec<TrialRecord>> {
        let noise = NoiseConfig {
            sinr_db: plan.sinr_db[s],
            ..scenario.noise.clone()
        };
        let r = scenario.realize_with(&noise, trial_seed(plan.base_seed, s, t))?;
        plan.methods
            .iter()
            .map(|&m| {
                Ok(TrialRecord {
                    sinr_index: s,
                    sinr_db: plan.sinr_db[s],
                    trial_index: t,
                    result: scenario.evaluate(m, &r)?,
                })
            })
            .collect()
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?;
    let batches: Vec<Vec<TrialRecord>> = pool.install(|| jobs.par_iter().map(run_job).collect::<Result<_>>())?;
    let records: Vec<TrialRecord> = batches.into_iter().flatten().collect();

    let mut cells = Vec::with_capacity(plan.sinr_db.len() * plan.methods.len());
    for (s, &sinr) in plan.sinr_db.iter().enumerate() {
        for &m in &plan.methods {
            let err = rmse_of(
                records
                    .iter()
                    .filter(|r| r.sinr_index == s && r.result.method == m)
                    .map(|r| (r.result.est_delays_s.as_slice(), r.result.true_delays_s.as_slice())),
            )?;
            cells.push(SweepCell {
                sinr_db: sinr,
                method: m,
                rmse_eq28_s: err.aggregate,
                rmse_std_s: err.conventional,
                trials: plan.trials,
                k: scenario.k,
            });
        }
    }

    Ok(SweepResult {
        plan: plan.clone(),
        sgnr_db: scenario.noise.sgnr_db,
        k: scenario.k,
        cells,
        records,
        config: None,
    })
}
