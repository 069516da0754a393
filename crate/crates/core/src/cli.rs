//! Command-line front end: `simulate`, `sweep` and `validate`.
//!
//! Each run writes into a seed-named directory under the output root and
//! stores the fully resolved config next to its results, so
//! `--config <dir>/config.json` reproduces the run.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::baseline::Method;
use crate::config::ExperimentConfig;
use crate::harness::{peak_to_median, run_sweep};
use crate::io::write_index_value_file;
use crate::solver::{ll_bcs_solve_traced, write_trace_csv};
use crate::Result;

#[derive(Debug, Parser)]
#[command(name = "llbcs", version, about = "Multipath delay estimation under impulsive noise")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One realization, every requested method; writes signals, spectra and a summary.
    Simulate(Overrides),
    /// Monte Carlo RMSE over an SINR grid.
    Sweep(Overrides),
    /// Check a config and print I, N, M and d.
    Validate(Overrides),
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: crate::Error| e.to_string())
}

/// Command-line overrides, applied on top of the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON config; omitted fields take their defaults.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    #[arg(long, value_name = "N")]
    pub trials: Option<usize>,
    /// Comma-separated subset of ll-bcs,l-bcs,bcs,l1.
    #[arg(long, value_name = "LIST", value_delimiter = ',', value_parser = parse_method)]
    pub methods: Option<Vec<Method>>,
    #[arg(long, value_name = "F", allow_hyphen_values = true, conflicts_with = "sinr_list")]
    pub sinr_db: Option<f64>,
    #[arg(long, value_name = "F,F,...", value_delimiter = ',', allow_hyphen_values = true)]
    pub sinr_list: Option<Vec<f64>>,
    #[arg(long, value_name = "F", allow_hyphen_values = true)]
    pub sgnr_db: Option<f64>,
    /// Output root; each run writes a seed-named directory inside it.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
    /// Write the per-iteration LL-BCS trace.
    #[arg(long)]
    pub trace: bool,
}

impl Overrides {
    /// `--sinr-db` sets both the single-run SINR and a one-point sweep grid.
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(seed) = self.seed {
            cfg.run.base_seed = seed;
        }
        if let Some(t) = self.trials {
            cfg.run.trials = t;
        }
        if let Some(m) = &self.methods {
            cfg.run.methods = m.clone();
        }
        if let Some(s) = self.sinr_db {
            cfg.noise.sinr_db = s;
            cfg.noise.sinr_list_db = vec![s];
        }
        if let Some(list) = &self.sinr_list {
            cfg.noise.sinr_list_db = list.clone();
        }
        if let Some(s) = self.sgnr_db {
            cfg.noise.sgnr_db = s;
        }
        if let Some(out) = &self.out {
            cfg.run.output_dir = out.to_string_lossy().into_owned();
        }
        if let Some(w) = self.workers {
            cfg.run.workers = Some(w);
        }
        if self.trace {
            cfg.run.trace = true;
        }
    }
}

/// Config from `path`, or the defaults when no path is given.
pub fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::from_json_file(p),
        None => Ok(ExperimentConfig::default()),
    }
}

/// Loads, overrides and validates.
pub fn resolve(ov: &Overrides) -> Result<ExperimentConfig> {
    let mut cfg = load_config(ov.config.as_deref())?;
    ov.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

/// Where a command wrote its files and what it wants to warn about.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub dir: Option<PathBuf>,
    pub warnings: Vec<String>,
}

pub fn cmd_validate(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<Outcome> {
    let d = cfg.derived()?;
    writeln!(out, "config ok")?;
    writeln!(out, "I={} N={} M={} d={}", d.i, d.n, d.m, d.d)?;
    Ok(Outcome {
        dir: None,
        warnings: Vec::new(),
    })
}

#[derive(Debug, Serialize)]
struct MethodSummary {
    method: Method,
    est_delays_s: Vec<f64>,
    max_abs_error_s: f64,
    within_one_cell: bool,
    converged: bool,
    iterations: usize,
}

#[derive(Debug, Serialize)]
struct SimulateSummary {
    seed: u64,
    sgnr_db: f64,
    sinr_db: f64,
    k: usize,
    grid_resolution_s: f64,
    true_indices: Vec<usize>,
    true_delays_s: Vec<f64>,
    received_peak_to_median: f64,
    methods: Vec<MethodSummary>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn run_dir(cfg: &ExperimentConfig, kind: &str) -> Result<PathBuf> {
    let dir = Path::new(&cfg.run.output_dir).join(format!("{kind}-seed{}", cfg.run.base_seed));
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.json"), cfg.to_json_pretty()?)?;
    Ok(dir)
}

/// One shared realization at `noise.sinr_db`, solved by every requested method.
///
/// Writes `config.json`, `waveform.csv`, `channel.csv`, `clean.csv`,
/// `noise.csv`, `received.csv`, `spectrum_<method>.csv`, `summary.json` and,
/// with tracing on, `trace_ll-bcs.csv`.
pub fn cmd_simulate(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<Outcome> {
    let scenario = cfg.build_scenario()?;
    let seed = cfg.run.base_seed;
    let r = scenario.realize(seed)?;
    let dir = run_dir(cfg, "simulate")?;

    scenario.waveform.write_csv_file(dir.join("waveform.csv"))?;
    r.channel.write_csv_file(dir.join("channel.csv"))?;
    write_index_value_file(dir.join("clean.csv"), r.clean.as_slice())?;
    write_index_value_file(dir.join("noise.csv"), r.noise.total().as_slice())?;
    write_index_value_file(dir.join("received.csv"), r.received.as_slice())?;

    let cell = scenario.grid.resolution_s();
    let mut warnings = Vec::new();
    let mut methods = Vec::new();
    for &m in &cfg.run.methods {
        let t = scenario.evaluate(m, &r)?;
        t.spectrum.write_csv_file(dir.join(format!("spectrum_{m}.csv")))?;
        if !t.converged {
            warnings.push(format!(
                "{m} stopped after {} iterations without converging",
                t.iterations
            ));
        }
        writeln!(out, "{m:>7}: estimated delays {:?} s", t.est_delays_s)?;
        methods.push(MethodSummary {
            method: m,
            max_abs_error_s: t.max_abs_error_s(),
            within_one_cell: t.all_within(cell),
            est_delays_s: t.est_delays_s,
            converged: t.converged,
            iterations: t.iterations,
        });
    }
    if cfg.run.trace {
        let mut trace = Vec::new();
        ll_bcs_solve_traced(scenario.matrix.matrix(), &r.received, &cfg.solver.ll_bcs, &mut trace)?;
        write_trace_csv(
            std::io::BufWriter::new(fs::File::create(dir.join("trace_ll-bcs.csv"))?),
            &trace,
        )?;
    }

    let true_delays_s = r.channel.delays_s(&scenario.grid);
    writeln!(out, "   true: delays {true_delays_s:?} s")?;
    let summary = SimulateSummary {
        seed,
        sgnr_db: cfg.noise.sgnr_db,
        sinr_db: cfg.noise.sinr_db,
        k: scenario.k,
        grid_resolution_s: cell,
        true_indices: r.channel.grid_indices().to_vec(),
        true_delays_s,
        received_peak_to_median: peak_to_median(&r.received),
        methods,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    writeln!(out, "wrote {}", dir.display())?;
    Ok(Outcome {
        dir: Some(dir),
        warnings,
    })
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Monte Carlo sweep over `noise.sinr_list_db`; writes `config.json`,
/// `sweep.csv` and `sweep.json`.
pub fn cmd_sweep(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<Outcome> {
    let scenario = cfg.build_scenario()?;
    let plan = cfg.sweep_plan();
    let workers = cfg.run.workers.unwrap_or_else(default_workers);
    let mut result = run_sweep(&scenario, &plan, workers)?;
    result.config = Some(serde_json::to_value(cfg)?);

    let dir = run_dir(cfg, "sweep")?;
    result.write_csv_file(dir.join("sweep.csv"))?;
    result.write_json_file(dir.join("sweep.json"))?;

    let mut warnings = Vec::new();
    for &m in &plan.methods {
        let stalled = result
            .records
            .iter()
            .filter(|r| r.result.method == m && !r.result.converged)
            .count();
        if stalled > 0 {
            warnings.push(format!("{m}: {stalled} trials hit the iteration limit"));
        }
    }
    writeln!(
        out,
        "{:>8} {:>7} {:>14} {:>14}",
        "sinr_db", "method", "rmse_eq28_s", "rmse_std_s"
    )?;
    for c in &result.cells {
        writeln!(
            out,
            "{:>8} {:>7} {:>14.6e} {:>14.6e}",
            c.sinr_db, c.method, c.rmse_eq28_s, c.rmse_std_s
        )?;
    }
    writeln!(out, "wrote {}", dir.display())?;
    Ok(Outcome {
        dir: Some(dir),
        warnings,
    })
}

type CommandFn = fn(&ExperimentConfig, &mut dyn Write) -> Result<Outcome>;

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{rendered}")
            } else {
                write!(out, "{rendered}")
            };
            return code;
        }
    };
    let (ov, cmd): (&Overrides, CommandFn) = match &cli.command {
        Command::Simulate(ov) => (ov, cmd_simulate),
        Command::Sweep(ov) => (ov, cmd_sweep),
        Command::Validate(ov) => (ov, cmd_validate),
    };
    match resolve(ov).and_then(|cfg| cmd(&cfg, out)) {
        Ok(outcome) => {
            for w in outcome.warnings {
                let _ = writeln!(err, "warning: {w}");
            }
            0
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Overrides {
        match Cli::try_parse_from(std::iter::once("llbcs").chain(args.iter().copied()))
            .unwrap()
            .command
        {
            Command::Simulate(o) | Command::Sweep(o) | Command::Validate(o) => o,
        }
    }

    #[test]
    fn flags_map_onto_config() {
        let ov = parse(&[
            "sweep",
            "--seed",
            "7",
            "--trials",
            "3",
            "--methods",
            "ll-bcs,l1",
            "--sinr-list",
            "-20,-10",
            "--sgnr-db",
            "15",
            "--workers",
            "2",
            "--trace",
        ]);
        let mut cfg = ExperimentConfig::default();
        ov.apply(&mut cfg);
        assert_eq!(cfg.run.base_seed, 7);
        assert_eq!(cfg.run.trials, 3);
        assert_eq!(cfg.run.methods, vec![Method::LlBcs, Method::L1]);
        assert_eq!(cfg.noise.sinr_list_db, vec![-20.0, -10.0]);
        assert_eq!(cfg.noise.sgnr_db, 15.0);
        assert_eq!(cfg.run.workers, Some(2));
        assert!(cfg.run.trace);
    }

    #[test]
    fn single_sinr_sets_both_fields() {
        let mut cfg = ExperimentConfig::default();
        parse(&["simulate", "--sinr-db", "-5"]).apply(&mut cfg);
        assert_eq!(cfg.noise.sinr_db, -5.0);
        assert_eq!(cfg.noise.sinr_list_db, vec![-5.0]);
    }

    #[test]
    fn bad_flags_are_rejected() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        assert_ne!(run(["llbcs", "sweep", "--methods", "omp"], &mut out, &mut err), 0);
        assert_ne!(
            run(
                ["llbcs", "sweep", "--sinr-db", "1", "--sinr-list", "1,2"],
                &mut out,
                &mut err
            ),
            0
        );
        assert_ne!(run(["llbcs", "fly"], &mut out, &mut err), 0);
    }

    #[test]
    fn validate_prints_derived_sizes() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        assert_eq!(run(["llbcs", "validate"], &mut out, &mut err), 0);
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("I=1001 N=40 M=1400 d=10"), "{text}");
    }
}
