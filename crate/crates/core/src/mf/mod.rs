//! Joint multi-fidelity GP under the additive model `f_ℓ = f_m + ε_ℓ`.
//!
//! The target function `f_m` and every discrepancy `ε_ℓ` (`ℓ < m`) are
//! independent zero-mean GPs with squared-exponential kernels; the target
//! level carries no discrepancy. Observations at any level therefore inform
//! the posterior of `f_m`.

mod fit;
mod gain;
mod scorer;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::KernelParams;
use crate::history::{Action, History, Observation};
use crate::linalg::{dot, next_relative_jitter, CholeskyFactor};

pub use fit::{fit_joint, JointFit};
pub use gain::{cumulative_info_gain, info_gain, ReferenceSet};
pub use scorer::GainScorer;

/// Costs and observation-noise variances per fidelity level. The last level
/// is the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityConfig {
    pub costs: Vec<f64>,
    pub noise_variances: Vec<f64>,
}

impl FidelityConfig {
    pub fn new(costs: Vec<f64>, noise_variances: Vec<f64>) -> Result<Self> {
        let cfg = FidelityConfig {
            costs,
            noise_variances,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Noise-free configuration.
    pub fn noiseless(costs: Vec<f64>) -> Result<Self> {
        let m = costs.len();
        Self::new(costs, vec![0.0; m])
    }

    pub fn validate(&self) -> Result<()> {
        if self.costs.is_empty() {
            return Err(Error::InvalidInput("at least one fidelity level is required".into()));
        }
        Error::check_dim(self.costs.len(), self.noise_variances.len())?;
        if let Some(c) = self.costs.iter().find(|&&c| !(c > 0.0) || !c.is_finite()) {
            return Err(Error::InvalidInput(format!("costs must be positive, got {c}")));
        }
        if let Some(v) = self.noise_variances.iter().find(|&&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "noise variances must be nonnegative, got {v}"
            )));
        }
        let target = self.target_cost();
        if self.costs.iter().any(|&c| c > target) {
            warn!("target fidelity cost {target} is not the largest cost");
        }
        Ok(())
    }

    pub fn levels(&self) -> usize {
        self.costs.len()
    }

    pub fn target_level(&self) -> usize {
        self.costs.len() - 1
    }

    pub fn cost(&self, level: usize) -> f64 {
        self.costs[level]
    }

    pub fn target_cost(&self) -> f64 {
        self.costs[self.costs.len() - 1]
    }

    pub fn noise(&self, level: usize) -> f64 {
        self.noise_variances[level]
    }

    pub fn min_cost(&self) -> f64 {
        self.costs.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Kernel hyperparameters of the additive model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfHyperparams {
    pub target: KernelParams,
    pub prior_mean: f64,
    /// One kernel per low fidelity, `ε_1 … ε_{m-1}`.
    pub discrepancies: Vec<KernelParams>,
}

impl MfHyperparams {
    pub fn new(target: KernelParams, prior_mean: f64, discrepancies: Vec<KernelParams>) -> Result<Self> {
        let h = MfHyperparams {
            target,
            prior_mean,
            discrepancies,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn levels(&self) -> usize {
        self.discrepancies.len() + 1
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    /// Discrepancy kernels may have zero signal variance (`f_ℓ ≡ f_m`).
    pub fn validate(&self) -> Result<()> {
        self.target.validate()?;
        for eps in &self.discrepancies {
            Error::check_dim(self.target.dim(), eps.dim())?;
            if !(eps.signal_variance >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "discrepancy signal variance must be nonnegative, got {}",
                    eps.signal_variance
                )));
            }
            if eps.lengthscales.iter().any(|&l| !(l > 0.0)) {
                return Err(Error::InvalidInput("lengthscales must be positive".into()));
            }
        }
        if !self.prior_mean.is_finite() {
            return Err(Error::InvalidInput("prior mean must be finite".into()));
        }
        Ok(())
    }

    /// Noise-free covariance between the latent values of two actions.
    #[inline]
    pub fn signal_cov(&self, xa: &[f64], la: usize, xb: &[f64], lb: usize) -> f64 {
        let mut k = self.target.eval(xa, xb);
        if la == lb && la < self.discrepancies.len() {
            k += self.discrepancies[la].eval(xa, xb);
        }
        k
    }

    /// Scale used for jitter: the largest prior latent variance.
    pub fn jitter_scale(&self) -> f64 {
        self.target.signal_variance
            + self
                .discrepancies
                .iter()
                .map(|k| k.signal_variance)
                .fold(0.0, f64::max)
    }
}

/// Joint multi-fidelity GP conditioned on a set of observations, with a
/// cached Cholesky factor of the observation covariance.
#[derive(Debug, Clone)]
pub struct JointMfGp {
    hyper: MfHyperparams,
    config: FidelityConfig,
    observations: Vec<Observation>,
    factor: CholeskyFactor,
    whitened: Vec<f64>,
    alpha: Vec<f64>,
}

impl JointMfGp {
    /// Unconditioned prior.
    pub fn new(hyper: MfHyperparams, config: FidelityConfig) -> Result<Self> {
        hyper.validate()?;
        config.validate()?;
        Error::check_dim(config.levels(), hyper.levels())?;
        let factor = CholeskyFactor::empty(hyper.jitter_scale());
        Ok(JointMfGp {
            hyper,
            config,
            observations: Vec::new(),
            factor,
            whitened: Vec::new(),
            alpha: Vec::new(),
        })
    }

    /// Conditions on `observations` with one full factorization.
    pub fn with_observations(
        hyper: MfHyperparams,
        config: FidelityConfig,
        observations: &[Observation],
    ) -> Result<Self> {
        let mut model = Self::new(hyper, config)?;
        for o in observations {
            model.check_action(&o.action)?;
        }
        model.observations = observations.to_vec();
        model.refactor(0.0)?;
        Ok(model)
    }

    pub fn with_history(hyper: MfHyperparams, config: FidelityConfig, history: &History) -> Result<Self> {
        Self::with_observations(hyper, config, history.entries())
    }

    pub fn hyper(&self) -> &MfHyperparams {
        &self.hyper
    }

    pub fn config(&self) -> &FidelityConfig {
        &self.config
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn levels(&self) -> usize {
        self.config.levels()
    }

    pub fn target_level(&self) -> usize {
        self.config.target_level()
    }

    pub fn dim(&self) -> usize {
        self.hyper.dim()
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    pub fn check_action(&self, a: &Action) -> Result<()> {
        Error::check_dim(self.dim(), a.x.len())?;
        if a.level >= self.levels() {
            return Err(Error::InvalidInput(format!(
                "fidelity level {} out of range (m = {})",
                a.level + 1,
                self.levels()
            )));
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn signal_cov(&self, a: &Action, b: &Action) -> f64 {
        self.hyper.signal_cov(&a.x, a.level, &b.x, b.level)
    }

    /// Covariance between the observations of two actions. `same_query`
    /// adds the observation-noise variance (one query compared with itself).
    pub fn joint_cov(&self, a: &Action, b: &Action, same_query: bool) -> Result<f64> {
        self.check_action(a)?;
        self.check_action(b)?;
        let mut k = self.signal_cov(a, b);
        if same_query {
            k += self.config.noise(a.level);
        }
        Ok(k)
    }

    fn refactor(&mut self, start: f64) -> Result<()> {
        let obs = &self.observations;
        let gram: Vec<Vec<f64>> = obs
            .iter()
            .enumerate()
            .map(|(i, oi)| {
                (0..=i)
                    .map(|j| {
                        let k = self.signal_cov(&oi.action, &obs[j].action);
                        if i == j {
                            k + self.config.noise(oi.action.level)
                        } else {
                            k
                        }
                    })
                    .collect()
            })
            .collect();
        self.factor = CholeskyFactor::factor_from(&gram, self.hyper.jitter_scale(), start)?;
        let resid: Vec<f64> = obs.iter().map(|o| o.value - self.hyper.prior_mean).collect();
        self.whitened = self.factor.forward_solve(&resid);
        self.alpha = self.factor.backward_solve(&self.whitened);
        Ok(())
    }

    /// Appends one observation by extending the factor; falls back to a full
    /// refactorization with escalated jitter when the extension is not
    /// positive definite.
    pub fn condition_in_place(&mut self, obs: Observation) -> Result<()> {
        self.check_action(&obs.action)?;
        let cross: Vec<f64> = self
            .observations
            .iter()
            .map(|o| self.signal_cov(&obs.action, &o.action))
            .collect();
        let diag = self.signal_cov(&obs.action, &obs.action) + self.config.noise(obs.action.level);
        let resid = obs.value - self.hyper.prior_mean;
        match self.factor.extend(&cross, diag) {
            Ok(row) => {
                let n = cross.len();
                let w = (resid - dot(&row[..n], &self.whitened)) / row[n];
                self.whitened.push(w);
                self.observations.push(obs);
                self.alpha = self.factor.backward_solve(&self.whitened);
                Ok(())
            }
            Err(_) => {
                let next = next_relative_jitter(self.factor.relative_jitter()).ok_or(
                    Error::NotPositiveDefinite {
                        jitter: self.factor.jitter(),
                    },
                )?;
                self.observations.push(obs);
                let res = self.refactor(next);
                if res.is_err() {
                    self.observations.pop();
                }
                res
            }
        }
    }

    /// Returns a new snapshot conditioned additionally on `obs`.
    pub fn condition(&self, obs: Observation) -> Result<Self> {
        let mut next = self.clone();
        next.condition_in_place(obs)?;
        Ok(next)
    }

    /// Posterior mean and variance of the target function `f_m(x)` given every
    /// observation at every level.
    pub fn posterior_target(&self, x: &[f64]) -> Result<(f64, f64)> {
        Error::check_dim(self.dim(), x.len())?;
        let k: Vec<f64> = self
            .observations
            .iter()
            .map(|o| self.hyper.target.eval(x, &o.action.x))
            .collect();
        let mean = self.hyper.prior_mean + dot(&k, &self.alpha);
        let v = self.factor.forward_solve(&k);
        let sv = self.hyper.target.signal_variance;
        Ok((mean, (sv - dot(&v, &v)).clamp(0.0, sv)))
    }

    /// `Var(y_a | y_D)`, including the observation noise of `a`.
    pub fn observation_variance(&self, a: &Action) -> Result<f64> {
        self.check_action(a)?;
        let k: Vec<f64> = self
            .observations
            .iter()
            .map(|o| self.signal_cov(a, &o.action))
            .collect();
        let v = self.factor.forward_solve(&k);
        let latent = (self.signal_cov(a, a) - dot(&v, &v)).max(0.0);
        Ok(latent + self.config.noise(a.level))
    }

    /// Log marginal likelihood of the conditioning observations.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.observations.len() as f64;
        -0.5 * dot(&self.whitened, &self.whitened)
            - 0.5 * self.factor.log_det()
            - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }

    /// Same observations under new hyperparameters and noise (full refit).
    pub fn refit(&self, hyper: MfHyperparams, config: FidelityConfig) -> Result<Self> {
        Self::with_observations(hyper, config, &self.observations)
    }
}
