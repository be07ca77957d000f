//! Single-output Gaussian process regression with a squared-exponential ARD
//! kernel.

use log::warn;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, CholeskyFactor};
use crate::optimize::{coordinate_search, FitOptions};

/// Hyperparameters of a squared-exponential kernel with one lengthscale per
/// input dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelParams {
    pub signal_variance: f64,
    pub lengthscales: Vec<f64>,
}

impl KernelParams {
    pub fn new(signal_variance: f64, lengthscales: Vec<f64>) -> Result<Self> {
        let p = KernelParams {
            signal_variance,
            lengthscales,
        };
        p.validate()?;
        Ok(p)
    }

    /// Same lengthscale in every dimension.
    pub fn isotropic(signal_variance: f64, lengthscale: f64, dim: usize) -> Result<Self> {
        Self::new(signal_variance, vec![lengthscale; dim])
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.signal_variance > 0.0) || !self.signal_variance.is_finite() {
            return Err(Error::InvalidInput(format!(
                "signal variance must be positive, got {}",
                self.signal_variance
            )));
        }
        if self.lengthscales.is_empty() {
            return Err(Error::InvalidInput("kernel needs at least one lengthscale".into()));
        }
        if let Some(l) = self.lengthscales.iter().find(|&&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidInput(format!("lengthscale must be positive, got {l}")));
        }
        Ok(())
    }

    /// Kernel value without dimension checks.
    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for ((x, y), l) in a.iter().zip(b).zip(&self.lengthscales) {
            let d = (x - y) / l;
            s += d * d;
        }
        self.signal_variance * (-0.5 * s).exp()
    }

    fn to_log(&self) -> Vec<f64> {
        std::iter::once(self.signal_variance.ln())
            .chain(self.lengthscales.iter().map(|l| l.ln()))
            .collect()
    }

    fn from_log(v: &[f64]) -> Self {
        KernelParams {
            signal_variance: v[0].exp(),
            lengthscales: v[1..].iter().map(|x| x.exp()).collect(),
        }
    }
}

/// `σ² exp(-½ Σ_j ((x_j - x'_j) / ℓ_j)²)`.
pub fn se_kernel(x: &[f64], x_prime: &[f64], params: &KernelParams) -> Result<f64> {
    Error::check_dim(params.dim(), x.len())?;
    Error::check_dim(params.dim(), x_prime.len())?;
    Ok(params.eval(x, x_prime))
}

/// Exact GP posterior conditioned on a fixed training set.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    params: KernelParams,
    prior_mean: f64,
    noise_variance: f64,
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    factor: CholeskyFactor,
    alpha: Vec<f64>,
}

pub fn build_posterior(
    prior_mean: f64,
    params: &KernelParams,
    inputs: &[Vec<f64>],
    targets: &[f64],
    noise_variance: f64,
) -> Result<GpPosterior> {
    Error::check_dim(inputs.len(), targets.len())?;
    for x in inputs {
        Error::check_dim(params.dim(), x.len())?;
    }
    if !(noise_variance >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "noise variance must be nonnegative, got {noise_variance}"
        )));
    }
    let factor = factor_gram(params, inputs, noise_variance)?;
    let resid: Vec<f64> = targets.iter().map(|y| y - prior_mean).collect();
    let alpha = factor.solve(&resid);
    Ok(GpPosterior {
        params: params.clone(),
        prior_mean,
        noise_variance,
        inputs: inputs.to_vec(),
        targets: targets.to_vec(),
        factor,
        alpha,
    })
}

fn factor_gram(params: &KernelParams, inputs: &[Vec<f64>], noise: f64) -> Result<CholeskyFactor> {
    let gram: Vec<Vec<f64>> = inputs
        .iter()
        .enumerate()
        .map(|(i, a)| {
            (0..=i)
                .map(|j| params.eval(a, &inputs[j]) + if i == j { noise } else { 0.0 })
                .collect()
        })
        .collect();
    CholeskyFactor::factor(&gram, params.signal_variance)
}

impl GpPosterior {
    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn prior_mean(&self) -> f64 {
        self.prior_mean
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    /// Predictive mean and latent variance at `x`.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        Error::check_dim(self.params.dim(), x.len())?;
        let k: Vec<f64> = self.inputs.iter().map(|xi| self.params.eval(x, xi)).collect();
        let mean = self.prior_mean + dot(&k, &self.alpha);
        let v = self.factor.forward_solve(&k);
        let var = self.params.signal_variance - dot(&v, &v);
        let var = var.clamp(0.0, self.params.signal_variance + self.noise_variance);
        Ok((mean, var))
    }

    /// Log marginal likelihood of the training targets.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let resid: Vec<f64> = self.targets.iter().map(|y| y - self.prior_mean).collect();
        let n = resid.len() as f64;
        -0.5 * dot(&resid, &self.alpha)
            - 0.5 * self.factor.log_det()
            - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }
}

pub fn log_marginal_likelihood(
    params: &KernelParams,
    prior_mean: f64,
    inputs: &[Vec<f64>],
    targets: &[f64],
    noise_variance: f64,
) -> Result<f64> {
    if inputs.is_empty() {
        return Err(Error::InvalidInput(
            "log marginal likelihood needs at least one observation".into(),
        ));
    }
    Ok(build_posterior(prior_mean, params, inputs, targets, noise_variance)?.log_marginal_likelihood())
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: KernelParams,
    pub noise_variance: f64,
    pub log_likelihood: f64,
    /// Set when no candidate could be evaluated and `init` was returned as is.
    pub failed: bool,
}

/// Maximizes the log marginal likelihood over signal variance, lengthscales
/// and noise variance by multi-start coordinate search in log space.
pub fn fit_hyperparameters(
    inputs: &[Vec<f64>],
    targets: &[f64],
    prior_mean: f64,
    init: &KernelParams,
    noise_init: f64,
    opts: &FitOptions,
) -> Result<FitResult> {
    if inputs.len() < 2 {
        return Err(Error::InvalidInput("fitting needs at least two observations".into()));
    }
    init.validate()?;
    let (lo, hi) = (opts.lower.ln(), opts.upper.ln());
    let mut x0 = init.to_log();
    x0.push(noise_init.max(opts.lower).ln());

    let objective = |v: &[f64]| {
        let p = KernelParams::from_log(&v[..v.len() - 1]);
        log_marginal_likelihood(&p, prior_mean, inputs, targets, v[v.len() - 1].exp())
            .unwrap_or(f64::NEG_INFINITY)
    };
    let init_value = log_marginal_likelihood(init, prior_mean, inputs, targets, noise_init)
        .unwrap_or(f64::NEG_INFINITY);
    let res = coordinate_search(objective, &x0, lo, hi, opts);

    if !res.any_finite {
        warn!("hyperparameter fit: no evaluable candidate, keeping initial values");
        return Ok(FitResult {
            params: init.clone(),
            noise_variance: noise_init,
            log_likelihood: init_value,
            failed: true,
        });
    }
    if res.value < init_value {
        // init lies outside the search box and beats everything inside it
        return Ok(FitResult {
            params: init.clone(),
            noise_variance: noise_init,
            log_likelihood: init_value,
            failed: false,
        });
    }
    let n = res.point.len();
    Ok(FitResult {
        params: KernelParams::from_log(&res.point[..n - 1]),
        noise_variance: res.point[n - 1].exp(),
        log_likelihood: res.value,
        failed: false,
    })
}

/// Draws `f(X) ~ N(prior_mean, K + jitter I)`.
pub fn sample_prior(
    params: &KernelParams,
    prior_mean: f64,
    grid: &[Vec<f64>],
    seed: u64,
) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("prior sample needs at least one point".into()));
    }
    for x in grid {
        Error::check_dim(params.dim(), x.len())?;
    }
    let factor = factor_gram(params, grid, 0.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<f64> = (0..grid.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    Ok(factor.mul_vec(&z).into_iter().map(|v| v + prior_mean).collect())
}
