use log::warn;
use serde::{Deserialize, Serialize};

use super::Session;
use crate::error::Result;
use crate::gp::KernelParams;
use crate::history::Observation;
use crate::mf::{fit_joint, FidelityConfig, GainScorer, JointMfGp, MfHyperparams, ReferenceSet};
use crate::optimize::FitOptions;
use crate::problems::derive_seed;

/// Model and selection settings shared by the GP-based policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    /// Exploration threshold numerator; the threshold is
    /// `beta_scale / sqrt(remaining budget)`. Ignored by GP-UCB.
    pub beta_scale: f64,
    pub delta: f64,
    pub signal_variance: f64,
    /// Initial lengthscale as a fraction of the candidate box width.
    pub lengthscale: f64,
    pub discrepancy_variance: f64,
    pub noise_variance: f64,
    /// Completed rounds between hyperparameter refits; 0 disables refits
    /// after the one following initialization.
    pub retune_every: usize,
    pub fit: FitOptions,
    pub reference_limit: usize,
    /// Candidate count above which target selection maximizes UCB over the
    /// bounding box and projects to the nearest candidate.
    pub projection_threshold: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            beta_scale: 1.0,
            delta: 0.05,
            signal_variance: 1.0,
            lengthscale: 0.3,
            discrepancy_variance: 0.1,
            noise_variance: 1e-2,
            retune_every: 5,
            fit: FitOptions {
                restarts: 1,
                max_sweeps: 20,
                min_step: 0.05,
                max_evals: 150,
                ..FitOptions::default()
            },
            reference_limit: ReferenceSet::DEFAULT_LIMIT,
            projection_threshold: 4096,
        }
    }
}

/// A conditioned model together with its incremental scorer.
#[derive(Debug, Clone)]
pub struct ModelState {
    model: JointMfGp,
    scorer: GainScorer,
    reference: Option<ReferenceSet>,
    candidates: Vec<Vec<f64>>,
    fit: FitOptions,
    seed: u64,
    retunes: u64,
}

impl ModelState {
    /// Conditions `hyper` on `observations`. With a reference set the scorer
    /// covers every level, otherwise only the target posterior is tracked.
    pub fn new(
        hyper: MfHyperparams,
        config: FidelityConfig,
        candidates: &[Vec<f64>],
        reference: Option<ReferenceSet>,
        observations: &[Observation],
        fit: FitOptions,
        seed: u64,
    ) -> Result<Self> {
        let model = JointMfGp::with_observations(hyper, config, observations)?;
        let scorer = build_scorer(&model, candidates, reference.as_ref())?;
        Ok(ModelState {
            model,
            scorer,
            reference,
            candidates: candidates.to_vec(),
            fit,
            seed,
            retunes: 0,
        })
    }

    /// Initial model for a session's candidates and history.
    pub fn for_session(session: &Session, params: &ModelParams, multi_fidelity: bool, seed: u64) -> Result<Self> {
        let cands = session.candidates();
        let cfg = session.config();
        let d = cands[0].len();
        let widths: Vec<f64> = (0..d)
            .map(|j| {
                let (lo, hi) = cands
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| (lo.min(c[j]), hi.max(c[j])));
                if hi > lo {
                    hi - lo
                } else {
                    1.0
                }
            })
            .collect();
        let kernel = |sv: f64| -> Result<KernelParams> {
            KernelParams::new(sv, widths.iter().map(|w| params.lengthscale * w).collect())
        };
        let hyper = MfHyperparams::new(
            kernel(params.signal_variance)?,
            0.0,
            (0..cfg.levels() - 1)
                .map(|_| kernel(params.discrepancy_variance))
                .collect::<Result<_>>()?,
        )?;
        let config = FidelityConfig::new(cfg.costs.clone(), vec![params.noise_variance; cfg.levels()])?;
        let reference = if multi_fidelity {
            Some(ReferenceSet::from_candidates(cands, params.reference_limit, derive_seed(&[seed, 2]))?)
        } else {
            None
        };
        Self::new(
            hyper,
            config,
            cands,
            reference,
            session.history().entries(),
            params.fit.clone(),
            seed,
        )
    }

    pub fn model(&self) -> &JointMfGp {
        &self.model
    }

    pub fn scorer(&self) -> &GainScorer {
        &self.scorer
    }

    pub fn reference(&self) -> Option<&ReferenceSet> {
        self.reference.as_ref()
    }

    pub fn candidates(&self) -> &[Vec<f64>] {
        &self.candidates
    }

    pub fn observe(&mut self, obs: &Observation) -> Result<()> {
        self.model.condition_in_place(obs.clone())?;
        self.scorer.observe(obs)
    }

    /// Refits hyperparameters on all observations and rebuilds the model.
    /// Keeps the current model when fewer than two observations exist or the
    /// refit cannot be conditioned.
    pub fn retune(&mut self) -> Result<bool> {
        let obs = self.model.observations();
        if obs.len() < 2 {
            return Ok(false);
        }
        self.retunes += 1;
        let opts = FitOptions {
            seed: derive_seed(&[self.seed, 5, self.retunes]),
            ..self.fit.clone()
        };
        let fit = fit_joint(self.model.hyper(), self.model.config(), obs, &opts)?;
        let config = FidelityConfig::new(self.model.config().costs.clone(), fit.noise_variances)?;
        let rebuilt = JointMfGp::with_observations(fit.hyper, config, obs)
            .and_then(|m| build_scorer(&m, &self.candidates, self.reference.as_ref()).map(|s| (m, s)));
        match rebuilt {
            Ok((model, scorer)) => {
                self.model = model;
                self.scorer = scorer;
                Ok(true)
            }
            Err(e) => {
                warn!("keeping previous hyperparameters, refit model failed: {e}");
                Ok(false)
            }
        }
    }
}

fn build_scorer(model: &JointMfGp, candidates: &[Vec<f64>], reference: Option<&ReferenceSet>) -> Result<GainScorer> {
    match reference {
        Some(r) => GainScorer::new(model, candidates, r),
        None => GainScorer::target_only(model, candidates),
    }
}
