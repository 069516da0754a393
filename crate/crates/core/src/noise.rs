//! Gaussian and Gaussian-mixture impulsive noise, scaled to a target SNR.
//!
//! SNR is measured against the mean square of the clean received signal over
//! all `M` samples; the same convention applies to SGNR (Gaussian part) and
//! SINR (impulsive part).

use nalgebra::DVector;
use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error};
use crate::Result;

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Zero-mean Gaussian mixture: component `i` has weight `weights[i]` and variance `variances[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmSpec {
    weights: Vec<f64>,
    variances: Vec<f64>,
}

impl GmmSpec {
    pub fn new(weights: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.len() != variances.len() {
            return Err(Error::DimensionMismatch(format!(
                "mixture needs matching non-empty weights and variances ({} vs {})",
                weights.len(),
                variances.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(invalid("mixture weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(invalid(format!("mixture weights sum to {total}, expected 1")));
        }
        if variances.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(invalid("mixture variances must be finite and positive"));
        }
        Ok(Self { weights, variances })
    }

    /// Three-component impulsive model: weights (0.9, 0.07, 0.03), variances (1, 10, 100).
    pub fn impulsive_default() -> Self {
        Self {
            weights: vec![0.9, 0.07, 0.03],
            variances: vec![1.0, 10.0, 100.0],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    /// `Σ π_i l_i`.
    pub fn variance(&self) -> f64 {
        self.weights.iter().zip(&self.variances).map(|(w, l)| w * l).sum()
    }
}

impl Default for GmmSpec {
    fn default() -> Self {
        Self::impulsive_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub gmm: GmmSpec,
    /// Signal to Gaussian noise ratio in dB.
    pub sgnr_db: f64,
    /// Signal to impulsive noise ratio in dB.
    pub sinr_db: f64,
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.sgnr_db.is_finite() || !self.sinr_db.is_finite() {
            return Err(invalid("SNR values must be finite"));
        }
        GmmSpec::new(self.gmm.weights.clone(), self.gmm.variances.clone()).map(|_| ())
    }
}

/// Mean square of `v`.
pub fn power(v: &DVector<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.norm_squared() / v.len() as f64
}

pub fn sample_gaussian<R: Rng + ?Sized>(m: usize, variance: f64, rng: &mut R) -> Result<DVector<f64>> {
    if m == 0 {
        return Err(invalid("sample count must be positive"));
    }
    if !(variance.is_finite() && variance >= 0.0) {
        return Err(invalid(format!("variance must be nonnegative, got {variance}")));
    }
    if variance == 0.0 {
        return Ok(DVector::zeros(m));
    }
    let sd = variance.sqrt();
    Ok(DVector::from_fn(m, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        sd * z
    }))
}

/// Mixture draws together with the selected component of each sample.
pub fn sample_gmm_labeled<R: Rng + ?Sized>(m: usize, gmm: &GmmSpec, rng: &mut R) -> Result<(Vec<usize>, DVector<f64>)> {
    if m == 0 {
        return Err(invalid("sample count must be positive"));
    }
    let gmm = GmmSpec::new(gmm.weights.clone(), gmm.variances.clone())?;
    let picker = WeightedIndex::new(&gmm.weights).map_err(|e| invalid(e.to_string()))?;
    let sds: Vec<f64> = gmm.variances.iter().map(|v| v.sqrt()).collect();
    let mut labels = Vec::with_capacity(m);
    let mut values = DVector::zeros(m);
    for v in values.iter_mut() {
        let c = picker.sample(rng);
        let z: f64 = StandardNormal.sample(rng);
        labels.push(c);
        *v = sds[c] * z;
    }
    Ok((labels, values))
}

/// Per-sample i.i.d. draws from the mixture.
pub fn sample_gmm_impulse<R: Rng + ?Sized>(m: usize, gmm: &GmmSpec, rng: &mut R) -> Result<DVector<f64>> {
    sample_gmm_labeled(m, gmm, rng).map(|(_, v)| v)
}

/// Rescales `noise` so that `10 log10(P_clean / P_noise) = target_snr_db`.
pub fn scale_to_snr(noise: &DVector<f64>, clean_signal: &DVector<f64>, target_snr_db: f64) -> Result<DVector<f64>> {
    if target_snr_db.is_nan() {
        return Err(invalid("target SNR is NaN"));
    }
    let ps = power(clean_signal);
    let pn = power(noise);
    if ps <= 0.0 || pn <= 0.0 {
        return Err(invalid("SNR scaling needs nonzero signal and noise power"));
    }
    let c = (ps / (pn * 10f64.powf(target_snr_db / 10.0))).sqrt();
    Ok(noise * c)
}

/// SNR in dB of `noise` relative to `clean_signal`.
pub fn snr_db(noise: &DVector<f64>, clean_signal: &DVector<f64>) -> f64 {
    10.0 * (power(clean_signal) / power(noise)).log10()
}

/// Gaussian and impulsive components of one noise realization.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRealization {
    pub gaussian: DVector<f64>,
    pub impulsive: DVector<f64>,
}

impl NoiseRealization {
    pub fn total(&self) -> DVector<f64> {
        &self.gaussian + &self.impulsive
    }
}

/// Gaussian part at `cfg.sgnr_db` plus impulsive part at `cfg.sinr_db`, each
/// drawn from its own stream so toggling one leaves the other unchanged.
pub fn compose_noise<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    clean_signal: &DVector<f64>,
    cfg: &NoiseConfig,
    gaussian_rng: &mut R1,
    impulse_rng: &mut R2,
) -> Result<NoiseRealization> {
    cfg.validate()?;
    let m = clean_signal.len();
    let g = sample_gaussian(m, 1.0, gaussian_rng)?;
    let i = sample_gmm_impulse(m, &cfg.gmm, impulse_rng)?;
    Ok(NoiseRealization {
        gaussian: scale_to_snr(&g, clean_signal, cfg.sgnr_db)?,
        impulsive: scale_to_snr(&i, clean_signal, cfg.sinr_db)?,
    })
}

/// Excess kurtosis `m4 / m2² - 3` of a sample (population moments).
pub fn excess_kurtosis(v: &DVector<f64>) -> f64 {
    let n = v.len() as f64;
    let mean = v.sum() / n;
    let (m2, m4) = v.iter().fold((0.0, 0.0), |(m2, m4), x| {
        let d = (x - mean) * (x - mean);
        (m2 + d, m4 + d * d)
    });
    let (m2, m4) = (m2 / n, m4 / n);
    m4 / (m2 * m2) - 3.0
}
