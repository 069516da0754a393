//! LL-BCS: sparse Bayesian learning with a Laplacian likelihood and a Laplacian prior.
//!
//! Both Laplacians are written as Gaussian scale mixtures with exponentially
//! distributed variances:
//!
//! ```text
//! y | x, τ ~ N(A x, diag(τ)),   τ_i ~ Gamma(1, β/2)
//! x | γ    ~ N(0, diag(γ)),     γ_j ~ Gamma(1, λ/2)
//! ```
//!
//! Conditioned on the variances the posterior of `x` is Gaussian, and EM over
//! `x` gives closed-form maximizers for `γ, λ, β, τ`. The converged `γ` is a
//! grid-based delay spectrum.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error};
use crate::signal::TimeGrid;
use crate::Result;

/// Gaussian posterior `N(mu, sigma)` of the sparse vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
}

/// Posterior moments and hyperparameters of one LL-BCS iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    /// Prior variances, one per delay bin.
    pub gamma: DVector<f64>,
    /// Noise variances, one per received sample.
    pub tau: DVector<f64>,
    /// Prior rate.
    pub lambda: f64,
    /// Noise rate.
    pub beta: f64,
    pub iter: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Stop once `‖γ_new − γ_old‖₁ / ‖γ_old‖₁` falls to this value.
    pub eps_min: f64,
    pub max_iter: usize,
    pub lambda_init: f64,
    pub beta_init: f64,
    /// Positivity floor applied to every `γ_j` and `τ_i`.
    pub gamma_floor: f64,
    pub tau_init: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            eps_min: 1e-3,
            max_iter: 1000,
            lambda_init: 0.1,
            beta_init: 0.1,
            gamma_floor: 1e-8,
            tau_init: 1.0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("eps_min", self.eps_min),
            ("lambda_init", self.lambda_init),
            ("beta_init", self.beta_init),
            ("gamma_floor", self.gamma_floor),
            ("tau_init", self.tau_init),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter must be at least 1"));
        }
        Ok(())
    }
}

/// Output of an iterative sparse solver before it is attached to a delay grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub values: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl Fit {
    pub fn into_spectrum(self, grid: TimeGrid) -> Result<DelaySpectrum> {
        DelaySpectrum::new(
            self.values.iter().copied().collect(),
            grid,
            self.iterations,
            self.converged,
        )
    }
}

/// Nonnegative score per delay bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelaySpectrum {
    values: Vec<f64>,
    grid: TimeGrid,
    iterations_used: usize,
    converged: bool,
}

impl DelaySpectrum {
    pub fn new(values: Vec<f64>, grid: TimeGrid, iterations_used: usize, converged: bool) -> Result<Self> {
        if values.len() != grid.n_bins() {
            return Err(Error::DimensionMismatch(format!(
                "spectrum has {} values for {} bins",
                values.len(),
                grid.n_bins()
            )));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("spectrum values must be finite and nonnegative"));
        }
        Ok(Self {
            values,
            grid,
            iterations_used,
            converged,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn iterations_used(&self) -> usize {
        self.iterations_used
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_index_value_file(path, &self.values)
    }
}

/// Result of [`ll_bcs_solve`]: the spectrum fit plus the final iteration state.
#[derive(Debug, Clone, PartialEq)]
pub struct LlBcsFit {
    pub fit: Fit,
    pub state: SolverState,
}

/// One row of the optional per-iteration trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub epsilon: f64,
    pub lambda: f64,
    pub beta: f64,
    pub q: f64,
}

pub fn write_trace_csv<W: Write>(mut w: W, trace: &[TraceRecord]) -> Result<()> {
    writeln!(w, "iteration,epsilon,lambda,beta,q")?;
    for r in trace {
        writeln!(w, "{},{},{},{},{}", r.iteration, r.epsilon, r.lambda, r.beta, r.q)?;
    }
    w.flush()?;
    Ok(())
}

fn check_dims(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::DimensionMismatch("sensing matrix is empty".into()));
    }
    if y.len() != a.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "observation has {} samples but the sensing matrix has {} rows",
            y.len(),
            a.nrows()
        )));
    }
    Ok(())
}

fn check_positive(name: &str, v: &DVector<f64>, len: usize) -> Result<()> {
    if v.len() != len {
        return Err(Error::DimensionMismatch(format!(
            "{name} has length {} but {len} expected",
            v.len()
        )));
    }
    if v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(invalid(format!("{name} must be strictly positive")));
    }
    Ok(())
}

/// Minimum-norm least-squares solution `A† y` through an SVD of `A`.
pub fn least_squares(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    check_dims(a, y)?;
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * a.nrows().max(a.ncols()) as f64 * f64::EPSILON;
    svd.solve(y, eps).map_err(|e| invalid(e.to_string()))
}

/// Gaussian posterior of `x` given prior variances `gamma` and noise variances `tau`:
///
/// ```text
/// Σ = (diag(γ)⁻¹ + Aᵀ diag(τ)⁻¹ A)⁻¹,   μ = Σ Aᵀ diag(τ)⁻¹ y
/// ```
pub fn posterior_update(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    gamma: &DVector<f64>,
    tau: &DVector<f64>,
) -> Result<Posterior> {
    check_dims(a, y)?;
    check_positive("gamma", gamma, a.ncols())?;
    check_positive("tau", tau, a.nrows())?;

    let w = tau.map(|t| 1.0 / t);
    let mut aw = a.clone();
    for mut col in aw.column_iter_mut() {
        col.component_mul_assign(&w);
    }
    let mut precision = a.tr_mul(&aw);
    for j in 0..gamma.len() {
        precision[(j, j)] += 1.0 / gamma[j];
    }
    let rhs = aw.tr_mul(y);
    let chol = precision
        .cholesky()
        .ok_or_else(|| Error::IllConditioned("posterior precision is not positive definite".into()))?;
    let mu = chol.solve(&rhs);
    let sigma = chol.inverse();
    let sigma = (&sigma + sigma.transpose()) * 0.5;
    Ok(Posterior { mu, sigma })
}

/// Positive root of `rate·v² + v = c`, written in the cancellation-free form
/// `2c / (1 + sqrt(1 + 4 rate c))`.
fn positive_root(rate: f64, c: f64) -> f64 {
    2.0 * c / (1.0 + (1.0 + 4.0 * rate * c).sqrt())
}

/// `γ_j = −1/(2λ) + sqrt(1/(4λ²) + (μ_j² + Σ_jj)/λ)`, floored at `floor`.
pub fn update_gamma(mu: &DVector<f64>, sigma_diag: &DVector<f64>, lambda: f64, floor: f64) -> Result<DVector<f64>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("lambda must be positive, got {lambda}")));
    }
    if mu.len() != sigma_diag.len() {
        return Err(Error::DimensionMismatch(
            "mu and sigma diagonal differ in length".into(),
        ));
    }
    if sigma_diag.iter().any(|s| *s < 0.0) {
        return Err(invalid("posterior variances must be nonnegative"));
    }
    Ok(DVector::from_fn(mu.len(), |j, _| {
        positive_root(lambda, mu[j] * mu[j] + sigma_diag[j]).max(floor)
    }))
}

/// `λ = N / Σ_j (γ_j / 2)`.
pub fn update_lambda(gamma: &DVector<f64>) -> Result<f64> {
    rate_from_variances("gamma", gamma)
}

/// `β = M / Σ_i (τ_i / 2)`.
pub fn update_beta(tau: &DVector<f64>) -> Result<f64> {
    rate_from_variances("tau", tau)
}

fn rate_from_variances(name: &str, v: &DVector<f64>) -> Result<f64> {
    if v.is_empty() {
        return Err(invalid(format!("{name} is empty")));
    }
    let sum = v.sum();
    if !(sum > 0.0 && sum.is_finite()) {
        return Err(invalid(format!("{name} must have a positive finite sum, got {sum}")));
    }
    Ok(2.0 * v.len() as f64 / sum)
}

/// Expected squared residual per sample under `x ~ N(μ, Σ)`:
/// `R_i = y_i² − 2 y_i [Aμ]_i + [A(Σ + μμᵀ)Aᵀ]_ii = (y_i − [Aμ]_i)² + a_iᵀ Σ a_i`.
pub fn residual_moments(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    check_dims(a, y)?;
    let n = a.ncols();
    if mu.len() != n || sigma.nrows() != n || sigma.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "posterior moments do not match {n} columns"
        )));
    }
    let fit = a * mu;
    let spread = (a * sigma).component_mul(a).column_sum();
    Ok(DVector::from_fn(y.len(), |i, _| {
        let r = y[i] - fit[i];
        (r * r + spread[i]).max(0.0)
    }))
}

/// `τ_i = −1/(2β) + sqrt(1/(4β²) + R_i/β)`, floored at `floor`.
pub fn update_tau(r: &DVector<f64>, beta: f64, floor: f64) -> Result<DVector<f64>> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(invalid(format!("beta must be positive, got {beta}")));
    }
    if r.iter().any(|x| *x < 0.0) {
        return Err(invalid("residual moments must be nonnegative"));
    }
    Ok(r.map(|ri| positive_root(beta, ri).max(floor)))
}

/// Expected complete-data log evidence `Q = E_x[ln p(y, τ, x, γ, β, λ)]`,
/// dropping additive constants that do not depend on any hyperparameter.
pub fn log_evidence_q(state: &SolverState, a: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64> {
    let (m, n) = (a.nrows(), a.ncols());
    check_positive("gamma", &state.gamma, n)?;
    check_positive("tau", &state.tau, m)?;
    if !(state.lambda > 0.0 && state.beta > 0.0) {
        return Err(invalid("lambda and beta must be positive"));
    }
    let r = residual_moments(a, y, &state.mu, &state.sigma)?;

    let prior: f64 = (0..n)
        .map(|j| {
            let g = state.gamma[j];
            let c = state.mu[j] * state.mu[j] + state.sigma[(j, j)];
            -0.5 * g.ln() - 0.5 * c / g
        })
        .sum();
    let likelihood: f64 = (0..m)
        .map(|i| {
            let t = state.tau[i];
            -0.5 * t.ln() - 0.5 * r[i] / t
        })
        .sum();
    let noise_hyper = m as f64 * (state.beta / 2.0).ln() - state.beta * state.tau.sum() / 2.0;
    let prior_hyper = n as f64 * (state.lambda / 2.0).ln() - state.lambda * state.gamma.sum() / 2.0;
    Ok(prior + likelihood + noise_hyper + prior_hyper)
}

pub(crate) fn relative_change(new: &DVector<f64>, old: &DVector<f64>) -> f64 {
    let denom = old.lp_norm(1);
    if denom == 0.0 {
        return f64::INFINITY;
    }
    (new - old).lp_norm(1) / denom
}

/// `|A† y|` floored elementwise, the starting prior variances for every Bayesian solver.
pub(crate) fn initial_gamma(a: &DMatrix<f64>, y: &DVector<f64>, floor: f64) -> Result<DVector<f64>> {
    Ok(least_squares(a, y)?.map(|v| v.abs().max(floor)))
}

/// Runs LL-BCS to convergence.
pub fn ll_bcs_solve(a: &DMatrix<f64>, y: &DVector<f64>, opts: &SolverOptions) -> Result<LlBcsFit> {
    run_ll_bcs(a, y, opts, None)
}

/// [`ll_bcs_solve`] that also records `(iteration, ε, λ, β, Q)` after every iteration.
pub fn ll_bcs_solve_traced(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    opts: &SolverOptions,
    trace: &mut Vec<TraceRecord>,
) -> Result<LlBcsFit> {
    run_ll_bcs(a, y, opts, Some(trace))
}

fn run_ll_bcs(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    opts: &SolverOptions,
    mut trace: Option<&mut Vec<TraceRecord>>,
) -> Result<LlBcsFit> {
    check_dims(a, y)?;
    opts.validate()?;
    let (m, n) = (a.nrows(), a.ncols());
    let floor = opts.gamma_floor;

    let mut state = SolverState {
        mu: DVector::zeros(n),
        sigma: DMatrix::zeros(n, n),
        gamma: initial_gamma(a, y, floor)?,
        tau: DVector::from_element(m, opts.tau_init.max(floor)),
        lambda: opts.lambda_init,
        beta: opts.beta_init,
        iter: 0,
    };
    let mut eps = f64::INFINITY;

    while eps > opts.eps_min && state.iter < opts.max_iter {
        let gamma_old = state.gamma.clone();
        let post = posterior_update(a, y, &state.gamma, &state.tau)?;
        state.gamma = update_gamma(&post.mu, &post.sigma.diagonal(), state.lambda, floor)?;
        state.lambda = update_lambda(&state.gamma)?;
        state.beta = update_beta(&state.tau)?;
        let r = residual_moments(a, y, &post.mu, &post.sigma)?;
        state.tau = update_tau(&r, state.beta, floor)?;
        state.mu = post.mu;
        state.sigma = post.sigma;
        state.iter += 1;
        eps = relative_change(&state.gamma, &gamma_old);

        if let Some(trace) = trace.as_deref_mut() {
            trace.push(TraceRecord {
                iteration: state.iter,
                epsilon: eps,
                lambda: state.lambda,
                beta: state.beta,
                q: log_evidence_q(&state, a, y)?,
            });
        }
    }

    Ok(LlBcsFit {
        fit: Fit {
            values: state.gamma.clone(),
            iterations: state.iter,
            converged: eps <= opts.eps_min,
        },
        state,
    })
}
