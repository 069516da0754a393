//! Comparison solvers sharing the delay-spectrum interface of LL-BCS.
//!
//! - `l1`: LASSO by monotone accelerated proximal gradient.
//! - `bcs`: sparse Bayesian learning with Gaussian prior and homoscedastic Gaussian noise.
//! - `l-bcs`: Laplacian prior (same `γ`, `λ` updates as LL-BCS) with homoscedastic Gaussian noise.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::solver::{
    initial_gamma, least_squares, posterior_update, relative_change, residual_moments, update_gamma, update_lambda,
    Fit, Posterior,
};
use crate::Result;

/// Estimation method identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "ll-bcs")]
    LlBcs,
    #[serde(rename = "l-bcs")]
    LBcs,
    #[serde(rename = "bcs")]
    Bcs,
    #[serde(rename = "l1")]
    L1,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::LlBcs, Method::LBcs, Method::Bcs, Method::L1];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::LlBcs => "ll-bcs",
            Method::LBcs => "l-bcs",
            Method::Bcs => "bcs",
            Method::L1 => "l1",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Method {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ll-bcs" => Ok(Method::LlBcs),
            "l-bcs" => Ok(Method::LBcs),
            "bcs" => Ok(Method::Bcs),
            "l1" => Ok(Method::L1),
            other => Err(invalid(format!(
                "unknown method `{other}` (expected ll-bcs, l-bcs, bcs or l1)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineOptions {
    /// Fixed l1 weight. `None` uses `σ̂ sqrt(2 ln N) max_j ‖a_j‖`, with `σ̂` the
    /// RMS least-squares residual.
    pub l1_penalty: Option<f64>,
    /// Multiplier on the automatic l1 weight.
    pub l1_penalty_scale: f64,
    pub eps_min: f64,
    pub max_iter: usize,
    pub gamma_floor: f64,
    /// Starting noise variance for `bcs` and `l-bcs`.
    pub noise_init: f64,
    /// Starting prior rate for `l-bcs`.
    pub lambda_init: f64,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        Self {
            l1_penalty: None,
            l1_penalty_scale: 1.0,
            eps_min: 1e-3,
            max_iter: 1000,
            gamma_floor: 1e-8,
            noise_init: 1.0,
            lambda_init: 0.1,
        }
    }
}

impl BaselineOptions {
    /// Defaults for the LASSO solver, which needs a tighter stopping rule.
    pub fn lasso() -> Self {
        Self {
            eps_min: 1e-6,
            max_iter: 5000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("l1_penalty_scale", self.l1_penalty_scale),
            ("eps_min", self.eps_min),
            ("gamma_floor", self.gamma_floor),
            ("noise_init", self.noise_init),
            ("lambda_init", self.lambda_init),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(p) = self.l1_penalty {
            if !(p > 0.0 && p.is_finite()) {
                return Err(invalid(format!("l1_penalty must be positive, got {p}")));
            }
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter must be at least 1"));
        }
        Ok(())
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    /// Spectrum `|x|`.
    pub fit: Fit,
    pub x: DVector<f64>,
    pub penalty: f64,
    /// Objective value after each iteration, starting with `x = 0`.
    pub objective: Vec<f64>,
}

/// Data-driven l1 weight `σ̂ sqrt(2 ln N) max_j ‖a_j‖`.
pub fn universal_penalty(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64> {
    let (m, n) = (a.nrows(), a.ncols());
    let x_ls = least_squares(a, y)?;
    let resid = y - a * x_ls;
    let dof = if m > n { m - n } else { m };
    let sigma = (resid.norm_squared() / dof as f64).sqrt();
    let col_norm = a.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    Ok(sigma * (2.0 * (n.max(2) as f64).ln()).sqrt() * col_norm)
}

/// Approximately minimizes `½‖y − A x‖₂² + penalty ‖x‖₁`.
///
/// Monotone FISTA: the accelerated prox step is only accepted when it does not
/// increase the objective, so the recorded objective never increases.
pub fn lasso_solve(a: &DMatrix<f64>, y: &DVector<f64>, opts: &BaselineOptions) -> Result<LassoFit> {
    opts.validate()?;
    if y.len() != a.nrows() {
        return Err(crate::Error::DimensionMismatch(format!(
            "observation has {} samples but the sensing matrix has {} rows",
            y.len(),
            a.nrows()
        )));
    }
    let n = a.ncols();
    let gram = a.tr_mul(a);
    let b = a.tr_mul(y);
    let yy = y.norm_squared();

    let penalty = match opts.l1_penalty {
        Some(p) => p,
        None => {
            let p = opts.l1_penalty_scale * universal_penalty(a, y)?;
            // Noiseless data would give a zero weight; keep it strictly positive.
            p.max(1e-9 * b.amax())
        }
    };

    let objective = |x: &DVector<f64>| 0.5 * (x.dot(&(&gram * x)) - 2.0 * b.dot(x) + yy) + penalty * x.lp_norm(1);

    let mut x = DVector::zeros(n);
    let mut history = vec![objective(&x)];
    if penalty <= 0.0 || b.amax() == 0.0 {
        return Ok(LassoFit {
            fit: Fit {
                values: x.abs(),
                iterations: 0,
                converged: true,
            },
            x,
            penalty,
            objective: history,
        });
    }

    let lipschitz = gram.clone().symmetric_eigenvalues().max();
    let step = 1.0 / lipschitz;
    let mut fx = history[0];
    let mut v = x.clone();
    let mut z_prev = x.clone();
    let mut t = 1.0f64;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iter {
        iterations += 1;
        let grad = &gram * &v - &b;
        let z = (&v - grad * step).map(|u| soft_threshold(u, penalty * step));
        let fz = objective(&z);
        let x_new = if fz <= fx { z.clone() } else { x.clone() };
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        v = &x_new + (&z - &x_new) * (t / t_new) + (&x_new - &x) * ((t - 1.0) / t_new);

        let change = (&z - &z_prev).lp_norm(1);
        let scale = z_prev.lp_norm(1);
        x = x_new;
        fx = fx.min(fz);
        t = t_new;
        history.push(fx);
        if change == 0.0 || (scale > 0.0 && change / scale < opts.eps_min) {
            converged = true;
            break;
        }
        z_prev = z;
    }

    Ok(LassoFit {
        fit: Fit {
            values: x.abs(),
            iterations,
            converged,
        },
        x,
        penalty,
        objective: history,
    })
}

/// Result of the homoscedastic sparse Bayesian solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct SblFit {
    pub fit: Fit,
    pub posterior: Posterior,
    /// Final noise variance `σ²`.
    pub noise_variance: f64,
}

/// Posterior under homoscedastic noise `Σ^y = σ² I`: the LL-BCS posterior with every `τ_i = σ²`.
pub fn homoscedastic_posterior(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    gamma: &DVector<f64>,
    noise_variance: f64,
) -> Result<Posterior> {
    posterior_update(a, y, gamma, &DVector::from_element(a.nrows(), noise_variance))
}

#[derive(Clone, Copy)]
enum PriorRule {
    Gaussian,
    Laplacian,
}

fn run_sbl(a: &DMatrix<f64>, y: &DVector<f64>, opts: &BaselineOptions, rule: PriorRule) -> Result<SblFit> {
    opts.validate()?;
    let floor = opts.gamma_floor;
    let mut gamma = initial_gamma(a, y, floor)?;
    let mut noise = opts.noise_init;
    let mut lambda = opts.lambda_init;
    let mut iterations = 0;
    let mut eps = f64::INFINITY;
    let mut posterior = None;

    while eps > opts.eps_min && iterations < opts.max_iter {
        let post = homoscedastic_posterior(a, y, &gamma, noise)?;
        let diag = post.sigma.diagonal();
        let new_gamma = match rule {
            PriorRule::Gaussian => DVector::from_fn(gamma.len(), |j, _| (post.mu[j] * post.mu[j] + diag[j]).max(floor)),
            PriorRule::Laplacian => {
                let g = update_gamma(&post.mu, &diag, lambda, floor)?;
                lambda = update_lambda(&g)?;
                g
            }
        };
        let r = residual_moments(a, y, &post.mu, &post.sigma)?;
        noise = (r.sum() / r.len() as f64).max(floor);
        eps = relative_change(&new_gamma, &gamma);
        gamma = new_gamma;
        iterations += 1;
        posterior = Some(post);
    }

    let posterior = match posterior {
        Some(p) => p,
        None => homoscedastic_posterior(a, y, &gamma, noise)?,
    };
    Ok(SblFit {
        fit: Fit {
            values: gamma,
            iterations,
            converged: eps <= opts.eps_min,
        },
        posterior,
        noise_variance: noise,
    })
}

/// Gaussian-prior SBL: `γ_j ← μ_j² + Σ_jj`, `σ² ← mean_i R_i`.
pub fn bcs_solve(a: &DMatrix<f64>, y: &DVector<f64>, opts: &BaselineOptions) -> Result<SblFit> {
    run_sbl(a, y, opts, PriorRule::Gaussian)
}

/// Laplacian-prior SBL with homoscedastic Gaussian noise.
pub fn l_bcs_solve(a: &DMatrix<f64>, y: &DVector<f64>, opts: &BaselineOptions) -> Result<SblFit> {
    run_sbl(a, y, opts, PriorRule::Laplacian)
}
