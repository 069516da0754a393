//! JSON experiment configuration.
//!
//! Every field has a default, so `{}` is a complete config describing the
//! reference setup: a 6 to 7 kHz chirp of 50 ms sampled at 20 kHz, a 2 kHz
//! delay grid up to 20 ms, four paths, and the three-component impulsive
//! mixture at 20 dB SGNR.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baseline::Method;
use crate::error::{config_err, Error};
use crate::harness::{MethodOptions, Scenario, SweepPlan};
use crate::noise::{GmmSpec, NoiseConfig};
use crate::signal::{build_sensing_matrix, generate_lfm, SparseChannel, TimeGrid, Waveform};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalConfig {
    pub f_start_hz: f64,
    pub f_end_hz: f64,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
}

impl Default for SignalConfig {
    fn default() -> Self {
        Self {
            f_start_hz: 6000.0,
            f_end_hz: 7000.0,
            duration_s: 0.05,
            sample_rate_hz: 20_000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub grid_rate_hz: f64,
    pub tau_max_s: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            grid_rate_hz: 2000.0,
            tau_max_s: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub k: usize,
    /// Fixed grid indices used for every trial instead of random draws.
    pub pinned_indices: Option<Vec<usize>>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            k: 4,
            pinned_indices: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub gmm_weights: Vec<f64>,
    pub gmm_variances: Vec<f64>,
    pub sgnr_db: f64,
    /// SINR for single runs.
    pub sinr_db: f64,
    /// SINR grid for sweeps.
    pub sinr_list_db: Vec<f64>,
}

impl Default for NoiseSection {
    fn default() -> Self {
        let gmm = GmmSpec::impulsive_default();
        Self {
            gmm_weights: gmm.weights().to_vec(),
            gmm_variances: gmm.variances().to_vec(),
            sgnr_db: 20.0,
            sinr_db: -10.0,
            sinr_list_db: vec![-20.0, -10.0, 0.0, 10.0, 20.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub methods: Vec<Method>,
    pub trials: usize,
    pub base_seed: u64,
    pub output_dir: String,
    /// Sweep worker threads; `None` uses the available parallelism.
    pub workers: Option<usize>,
    /// Write the LL-BCS iteration trace in `simulate`.
    pub trace: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            trials: 250,
            base_seed: 0,
            output_dir: "results".into(),
            workers: None,
            trace: false,
        }
    }
}

/// Quantities implied by a config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Derived {
    /// Waveform samples.
    pub i: usize,
    /// Delay bins.
    pub n: usize,
    /// Observation length.
    pub m: usize,
    /// Samples per delay bin.
    pub d: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub signal: SignalConfig,
    pub grid: GridConfig,
    pub channel: ChannelConfig,
    pub noise: NoiseSection,
    pub solver: MethodOptions,
    pub run: RunConfig,
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(path, format!("must be positive and finite, got {v}")))
    }
}

fn finite(path: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(config_err(path, format!("must be finite, got {v}")))
    }
}

fn at(path: &str) -> impl FnOnce(Error) -> Error + '_ {
    move |e| match e {
        Error::Config { .. } => e,
        other => config_err(path, other.to_string()),
    }
}

impl ExperimentConfig {
    /// Parses JSON; errors name the offending field path.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_err(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| config_err(path.display().to_string(), e.to_string()))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn waveform(&self) -> Result<Waveform> {
        let s = &self.signal;
        generate_lfm(s.f_start_hz, s.f_end_hz, s.duration_s, s.sample_rate_hz).map_err(at("signal"))
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.grid.grid_rate_hz, self.grid.tau_max_s, self.signal.sample_rate_hz)
            .map_err(at("grid.grid_rate_hz"))
    }

    pub fn gmm(&self) -> Result<GmmSpec> {
        GmmSpec::new(self.noise.gmm_weights.clone(), self.noise.gmm_variances.clone()).map_err(at("noise.gmm_weights"))
    }

    pub fn noise_config(&self) -> Result<NoiseConfig> {
        Ok(NoiseConfig {
            gmm: self.gmm()?,
            sgnr_db: self.noise.sgnr_db,
            sinr_db: self.noise.sinr_db,
        })
    }

    /// Checks every field, reporting the first failure with its path.
    pub fn validate(&self) -> Result<()> {
        let s = &self.signal;
        positive("signal.sample_rate_hz", s.sample_rate_hz)?;
        positive("signal.duration_s", s.duration_s)?;
        let nyquist = s.sample_rate_hz / 2.0;
        for (path, f) in [("signal.f_start_hz", s.f_start_hz), ("signal.f_end_hz", s.f_end_hz)] {
            positive(path, f)?;
            if f >= nyquist {
                return Err(config_err(
                    path,
                    format!("{f} Hz is not below the Nyquist frequency {nyquist} Hz"),
                ));
            }
        }
        positive("grid.grid_rate_hz", self.grid.grid_rate_hz)?;
        positive("grid.tau_max_s", self.grid.tau_max_s)?;
        let derived = self.derived()?;

        let c = &self.channel;
        if c.k == 0 || c.k > derived.n {
            return Err(config_err(
                "channel.k",
                format!("must be in 1..={}, got {}", derived.n, c.k),
            ));
        }
        if let Some(idx) = &c.pinned_indices {
            if idx.len() != c.k {
                return Err(config_err(
                    "channel.pinned_indices",
                    format!("has {} entries but channel.k = {}", idx.len(), c.k),
                ));
            }
            SparseChannel::unit(idx.clone(), derived.n).map_err(at("channel.pinned_indices"))?;
        }

        self.gmm()?;
        finite("noise.sgnr_db", self.noise.sgnr_db)?;
        finite("noise.sinr_db", self.noise.sinr_db)?;
        if self.noise.sinr_list_db.is_empty() {
            return Err(config_err("noise.sinr_list_db", "must not be empty"));
        }
        for (i, &v) in self.noise.sinr_list_db.iter().enumerate() {
            finite(&format!("noise.sinr_list_db[{i}]"), v)?;
        }

        self.solver.ll_bcs.validate().map_err(at("solver.ll_bcs"))?;
        self.solver.l_bcs.validate().map_err(at("solver.l_bcs"))?;
        self.solver.bcs.validate().map_err(at("solver.bcs"))?;
        self.solver.l1.validate().map_err(at("solver.l1"))?;

        let r = &self.run;
        if r.methods.is_empty() {
            return Err(config_err("run.methods", "must list at least one method"));
        }
        if r.trials == 0 {
            return Err(config_err("run.trials", "must be at least 1"));
        }
        if r.workers == Some(0) {
            return Err(config_err("run.workers", "must be at least 1"));
        }
        if r.output_dir.is_empty() {
            return Err(config_err("run.output_dir", "must not be empty"));
        }
        Ok(())
    }

    /// Waveform length, bin count, observation length and bin shift.
    pub fn derived(&self) -> Result<Derived> {
        let w = self.waveform()?;
        let grid = self.time_grid()?;
        let a = build_sensing_matrix(&w, &grid).map_err(at("grid.tau_max_s"))?;
        Ok(Derived {
            i: w.len(),
            n: grid.n_bins(),
            m: a.m_rows(),
            d: grid.shift(),
        })
    }

    /// Scenario at `noise.sinr_db`, with the pinned channel when one is set.
    pub fn build_scenario(&self) -> Result<Scenario> {
        self.validate()?;
        let scenario = Scenario::new(
            self.waveform()?,
            self.time_grid()?,
            self.channel.k,
            self.noise_config()?,
            self.solver,
        )?;
        match &self.channel.pinned_indices {
            Some(idx) => scenario.with_pinned(idx.clone()),
            None => Ok(scenario),
        }
    }

    pub fn sweep_plan(&self) -> SweepPlan {
        SweepPlan {
            sinr_db: self.noise.sinr_list_db.clone(),
            methods: self.run.methods.clone(),
            trials: self.run.trials,
            base_seed: self.run.base_seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_reference_setup() {
        let cfg = ExperimentConfig::from_json_str("{}").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(
            cfg.derived().unwrap(),
            Derived {
                i: 1001,
                n: 40,
                m: 1400,
                d: 10
            }
        );
        assert_eq!(cfg.noise.gmm_weights, vec![0.9, 0.07, 0.03]);
        assert_eq!(cfg.noise.gmm_variances, vec![1.0, 10.0, 100.0]);
        assert_eq!(cfg.channel.k, 4);
        assert_eq!(cfg.noise.sgnr_db, 20.0);
    }

    #[test]
    fn round_trips_through_json() {
        let mut cfg = ExperimentConfig::default();
        cfg.channel.pinned_indices = Some(vec![3, 9, 17, 30]);
        cfg.solver.l1.l1_penalty = Some(0.5);
        let back = ExperimentConfig::from_json_str(&cfg.to_json_pretty().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_l1_block_keeps_lasso_defaults() {
        let cfg = ExperimentConfig::from_json_str(r#"{"solver": {"l1": {"l1_penalty_scale": 2.0}}}"#).unwrap();
        let expected = crate::baseline::BaselineOptions {
            l1_penalty_scale: 2.0,
            ..crate::baseline::BaselineOptions::lasso()
        };
        assert_eq!(cfg.solver.l1, expected);
    }

    fn path_of(text: &str) -> String {
        match ExperimentConfig::from_json_str(text) {
            Err(Error::Config { path, .. }) => path,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn errors_carry_field_paths() {
        assert_eq!(path_of(r#"{"signal": {"duration_s": -1}}"#), "signal.duration_s");
        assert_eq!(path_of(r#"{"signal": {"f_end_hz": 12000}}"#), "signal.f_end_hz");
        assert_eq!(path_of(r#"{"channel": {"k": 41}}"#), "channel.k");
        assert_eq!(
            path_of(r#"{"channel": {"pinned_indices": [1, 2]}}"#),
            "channel.pinned_indices"
        );
        assert_eq!(
            path_of(r#"{"channel": {"pinned_indices": [1, 2, 2, 3]}}"#),
            "channel.pinned_indices"
        );
        assert_eq!(
            path_of(r#"{"noise": {"gmm_weights": [0.5, 0.2, 0.2]}}"#),
            "noise.gmm_weights"
        );
        assert_eq!(path_of(r#"{"solver": {"ll_bcs": {"eps_min": 0}}}"#), "solver.ll_bcs");
        assert_eq!(path_of(r#"{"run": {"trials": 0}}"#), "run.trials");
        assert_eq!(path_of(r#"{"run": {"methods": ["ll-bcs", "omp"]}}"#), "run.methods[1]");
        assert_eq!(path_of(r#"{"grid": {"typo": 1}}"#), "grid.typo");
    }

    #[test]
    fn non_integer_ratio_is_rejected() {
        let err = ExperimentConfig::from_json_str(r#"{"grid": {"grid_rate_hz": 3000}}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("grid.grid_rate_hz") && msg.contains("integer"), "{msg}");
    }

    #[test]
    fn scenario_uses_pinned_channel() {
        let mut cfg = ExperimentConfig::default();
        cfg.channel.pinned_indices = Some(vec![30, 2, 11, 20]);
        let s = cfg.build_scenario().unwrap();
        assert_eq!(s.pinned.unwrap().grid_indices(), &[2, 11, 20, 30]);
        assert_eq!(s.matrix.m_rows(), 1400);
    }
}
