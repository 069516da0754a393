//! Discrete multipath signal model.
//!
//! A real transmit waveform `s[n]` is convolved with a grid-sparse channel
//! `x` (one coefficient per delay bin). With `d = f_s / f_G` samples per delay
//! bin, the received samples are `y = A x + e`, where column `j` of the
//! sensing matrix `A` is the waveform shifted down by `j * d` rows.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error};
use crate::io::{write_index_value, write_index_value_file};
use crate::Result;

/// Relative tolerance when checking that `f_s / f_G` is an integer.
const RATIO_TOL: f64 = 1e-9;

/// Sampled real transmit signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate_hz: f64,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(invalid(format!("sample rate must be positive, got {sample_rate_hz}")));
        }
        if samples.is_empty() {
            return Err(invalid("waveform must have at least one sample"));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(invalid("waveform samples must be finite"));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    /// Number of samples `I`.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Signal duration `T_s = (I - 1) / f_s`.
    pub fn duration_s(&self) -> f64 {
        (self.samples.len() - 1) as f64 / self.sample_rate_hz
    }

    pub fn norm(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum::<f64>().sqrt()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_index_value(w, &self.samples)
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        write_index_value_file(path, &self.samples)
    }
}

/// Real linear chirp `cos(2π(f0 t + (f1 - f0) t² / (2T)))` sampled at `t = n / f_s`,
/// `n = 0..=round(T f_s)`.
pub fn generate_lfm(f_start_hz: f64, f_end_hz: f64, duration_s: f64, sample_rate_hz: f64) -> Result<Waveform> {
    if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
        return Err(invalid(format!("sample rate must be positive, got {sample_rate_hz}")));
    }
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(invalid(format!("duration must be positive, got {duration_s}")));
    }
    let nyquist = sample_rate_hz / 2.0;
    for (name, f) in [("start", f_start_hz), ("end", f_end_hz)] {
        if !(f > 0.0 && f < nyquist) {
            return Err(invalid(format!(
                "{name} frequency {f} Hz must lie in (0, {nyquist}) Hz"
            )));
        }
    }
    let len = (duration_s * sample_rate_hz).round() as usize + 1;
    let sweep = (f_end_hz - f_start_hz) / (2.0 * duration_s);
    let samples = (0..len)
        .map(|n| {
            let t = n as f64 / sample_rate_hz;
            (2.0 * PI * (f_start_hz * t + sweep * t * t)).cos()
        })
        .collect();
    Waveform::new(samples, sample_rate_hz)
}

/// Discrete delay search grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    grid_rate_hz: f64,
    tau_max_s: f64,
    n_bins: usize,
    shift: usize,
}

impl TimeGrid {
    /// Grid with resolution `1 / grid_rate_hz` covering `[0, tau_max_s)`.
    /// `sample_rate_hz / grid_rate_hz` must be an integer.
    pub fn new(grid_rate_hz: f64, tau_max_s: f64, sample_rate_hz: f64) -> Result<Self> {
        if !(grid_rate_hz > 0.0 && grid_rate_hz.is_finite()) {
            return Err(invalid(format!("grid rate must be positive, got {grid_rate_hz}")));
        }
        if !(tau_max_s > 0.0 && tau_max_s.is_finite()) {
            return Err(invalid(format!("tau_max must be positive, got {tau_max_s}")));
        }
        let shift = integer_ratio(sample_rate_hz, grid_rate_hz)?;
        let n_bins = (tau_max_s * grid_rate_hz).round() as usize;
        if n_bins == 0 {
            return Err(invalid("delay grid has no bins (tau_max * grid_rate rounds to 0)"));
        }
        Ok(Self {
            grid_rate_hz,
            tau_max_s,
            n_bins,
            shift,
        })
    }

    pub fn grid_rate_hz(&self) -> f64 {
        self.grid_rate_hz
    }

    pub fn tau_max_s(&self) -> f64 {
        self.tau_max_s
    }

    /// Number of delay bins `N`.
    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    /// Samples per delay bin `d`.
    pub fn shift(&self) -> usize {
        self.shift
    }

    pub fn delay_of(&self, index: usize) -> f64 {
        index as f64 / self.grid_rate_hz
    }

    /// Grid spacing in seconds.
    pub fn resolution_s(&self) -> f64 {
        1.0 / self.grid_rate_hz
    }
}

fn integer_ratio(sample_rate_hz: f64, grid_rate_hz: f64) -> Result<usize> {
    if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
        return Err(invalid(format!("sample rate must be positive, got {sample_rate_hz}")));
    }
    let ratio = sample_rate_hz / grid_rate_hz;
    let rounded = ratio.round();
    if rounded < 1.0 || (ratio - rounded).abs() > RATIO_TOL * ratio {
        return Err(invalid(format!(
            "sample rate / grid rate = {ratio} must be a positive integer \
             (only integer down-sampling of the delay grid is supported)"
        )));
    }
    Ok(rounded as usize)
}

/// Grid-indexed multipath channel: `K` nonzero taps of the length-`N` vector `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseChannel {
    grid_indices: Vec<usize>,
    amplitudes: Vec<f64>,
    n_bins: usize,
}

impl SparseChannel {
    pub fn new(grid_indices: Vec<usize>, amplitudes: Vec<f64>, n_bins: usize) -> Result<Self> {
        if grid_indices.len() != amplitudes.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} indices but {} amplitudes",
                grid_indices.len(),
                amplitudes.len()
            )));
        }
        if grid_indices.len() > n_bins {
            return Err(invalid(format!(
                "{} paths do not fit on {n_bins} delay bins",
                grid_indices.len()
            )));
        }
        if grid_indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("grid indices must be strictly increasing"));
        }
        if let Some(&last) = grid_indices.last() {
            if last >= n_bins {
                return Err(invalid(format!("grid index {last} out of range 0..{n_bins}")));
            }
        }
        if amplitudes.iter().any(|a| *a == 0.0 || !a.is_finite()) {
            return Err(invalid("path amplitudes must be finite and nonzero"));
        }
        Ok(Self {
            grid_indices,
            amplitudes,
            n_bins,
        })
    }

    /// Unit-amplitude paths at the given bins (sorted and validated).
    pub fn unit(mut grid_indices: Vec<usize>, n_bins: usize) -> Result<Self> {
        grid_indices.sort_unstable();
        let k = grid_indices.len();
        Self::new(grid_indices, vec![1.0; k], n_bins)
    }

    pub fn grid_indices(&self) -> &[usize] {
        &self.grid_indices
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    /// Number of paths `K`.
    pub fn k(&self) -> usize {
        self.grid_indices.len()
    }

    pub fn delays_s(&self, grid: &TimeGrid) -> Vec<f64> {
        self.grid_indices.iter().map(|&i| grid.delay_of(i)).collect()
    }

    pub fn dense(&self) -> DVector<f64> {
        let mut x = DVector::zeros(self.n_bins);
        for (&i, &a) in self.grid_indices.iter().zip(&self.amplitudes) {
            x[i] = a;
        }
        x
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        write_index_value_file(path, self.dense().as_slice())
    }
}

/// Banded convolution matrix: column `j` holds the waveform starting at row `j * shift`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix {
    entries: DMatrix<f64>,
    shift: usize,
}

impl SensingMatrix {
    /// Places `samples` at row offsets `0, shift, 2 shift, ...` in an
    /// `m_rows × n_cols` matrix. Every shifted copy must fit entirely.
    pub fn from_shifted(samples: &[f64], shift: usize, n_cols: usize, m_rows: usize) -> Result<Self> {
        if samples.is_empty() || shift == 0 || n_cols == 0 {
            return Err(invalid("sensing matrix needs samples, shift >= 1 and n_cols >= 1"));
        }
        let needed = samples.len() + (n_cols - 1) * shift;
        if m_rows < needed {
            return Err(Error::DimensionMismatch(format!(
                "{m_rows} rows cannot hold the last shifted copy (needs {needed})"
            )));
        }
        let mut entries = DMatrix::zeros(m_rows, n_cols);
        for j in 0..n_cols {
            let off = j * shift;
            entries.view_mut((off, j), (samples.len(), 1)).copy_from_slice(samples);
        }
        Ok(Self { entries, shift })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Number of rows `M`.
    pub fn m_rows(&self) -> usize {
        self.entries.nrows()
    }

    /// Number of columns `N`.
    pub fn n_cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn shift(&self) -> usize {
        self.shift
    }
}

/// Builds `A` with `M = round((T_s + tau_max) f_s)` rows and one column per delay bin.
pub fn build_sensing_matrix(w: &Waveform, grid: &TimeGrid) -> Result<SensingMatrix> {
    let shift = integer_ratio(w.sample_rate_hz(), grid.grid_rate_hz())?;
    if shift != grid.shift() {
        return Err(invalid(format!(
            "grid was built for {} samples per bin but the waveform implies {shift}",
            grid.shift()
        )));
    }
    let m_rows = ((w.duration_s() + grid.tau_max_s()) * w.sample_rate_hz()).round() as usize;
    SensingMatrix::from_shifted(w.samples(), shift, grid.n_bins(), m_rows)
}

/// `k` distinct bins drawn uniformly without replacement, unit amplitudes.
pub fn random_channel<R: Rng + ?Sized>(k: usize, grid: &TimeGrid, rng: &mut R) -> Result<SparseChannel> {
    let n = grid.n_bins();
    if k == 0 || k > n {
        return Err(invalid(format!("number of paths {k} must be in 1..={n}")));
    }
    let picked = rand::seq::index::sample(rng, n, k).into_vec();
    SparseChannel::unit(picked, n)
}

/// Noiseless received signal `A x`.
pub fn synthesize_clean(a: &SensingMatrix, ch: &SparseChannel) -> Result<DVector<f64>> {
    if ch.n_bins() != a.n_cols() {
        return Err(Error::DimensionMismatch(format!(
            "channel has {} bins but the sensing matrix has {} columns",
            ch.n_bins(),
            a.n_cols()
        )));
    }
    Ok(a.matrix() * ch.dense())
}
