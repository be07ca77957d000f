//! Batched, incrementally updated information gains over a discrete action
//! set.
//!
//! Each tracker keeps the Cholesky factor of a growing conditioning set
//! together with the whitened cross-covariances `L⁻¹ K(cond, queries)`, so
//! appending one conditioning item costs `O(k² + k·q)` and refreshes the
//! posterior variance of every query.
//!
//! When the reference set is the whole candidate set (and every observation
//! sits on a candidate), conditioning on `f_m(X_ref)` pins the target part of
//! every observation exactly; what remains of a level-ℓ observation is the
//! discrepancy `ε_ℓ` plus noise, and the discrepancies are independent across
//! levels. The "covered" mode exploits this with one small tracker per low
//! level instead of a tracker over `[X_ref; D]`.

use std::collections::HashSet;

use super::gain::gain_from_variances;
use super::{FidelityConfig, JointMfGp, MfHyperparams, ReferenceSet};
use crate::error::{Error, Result};
use crate::history::Observation;
use crate::linalg::{next_relative_jitter, CholeskyFactor};

#[derive(Debug, Clone)]
struct Tracker {
    factor: CholeskyFactor,
    cross: Vec<Vec<f64>>,
    var: Vec<f64>,
    whitened: Vec<f64>,
}

impl Tracker {
    fn new(prior_var: Vec<f64>, scale: f64, rel_jitter: f64) -> Self {
        Tracker {
            factor: CholeskyFactor::empty_with_jitter(scale, rel_jitter),
            cross: Vec::new(),
            var: prior_var,
            whitened: Vec::new(),
        }
    }

    fn extend(&mut self, k_cond: &[f64], diag: f64, k_query: &[f64], resid: f64) -> Result<()> {
        let row = self.factor.extend(k_cond, diag)?;
        let n = k_cond.len();
        let (l, d) = (&row[..n], row[n]);
        let mut new = k_query.to_vec();
        for (li, ci) in l.iter().zip(&self.cross) {
            for (v, c) in new.iter_mut().zip(ci) {
                *v -= li * c;
            }
        }
        let w = (resid - l.iter().zip(&self.whitened).map(|(a, b)| a * b).sum::<f64>()) / d;
        for (v, var) in new.iter_mut().zip(self.var.iter_mut()) {
            *v /= d;
            *var -= *v * *v;
        }
        self.cross.push(new);
        self.whitened.push(w);
        Ok(())
    }

    fn mean_offset(&self, q: usize) -> f64 {
        self.cross.iter().zip(&self.whitened).map(|(c, w)| c[q] * w).sum()
    }
}

#[derive(Debug, Clone)]
enum RefSide {
    /// Variances only, no information gains.
    None,
    /// One discrepancy tracker per low level; queries are the candidates.
    Covered { eps: Vec<Tracker>, level_obs: Vec<Vec<usize>> },
    /// One tracker over `[f_m(X_ref); y_D]`; queries are all actions.
    General(Tracker),
}

/// Information gains and target posteriors for every `(candidate, level)`
/// action, kept in sync with a growing observation set.
#[derive(Debug, Clone)]
pub struct GainScorer {
    hyper: MfHyperparams,
    config: FidelityConfig,
    candidates: Vec<Vec<f64>>,
    levels: Vec<usize>,
    reference: Option<ReferenceSet>,
    candidate_keys: HashSet<Vec<u64>>,
    observations: Vec<Observation>,
    obs: Tracker,
    side: RefSide,
    rel_jitter: f64,
}

fn key(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

impl GainScorer {
    /// Scorer over all levels with information gains about `f_m(X_ref)`.
    pub fn new(model: &JointMfGp, candidates: &[Vec<f64>], reference: &ReferenceSet) -> Result<Self> {
        let levels = (0..model.levels()).collect();
        Self::build(model, candidates, levels, Some(reference.clone()))
    }

    /// Scorer tracking only the target posterior at the candidates.
    pub fn target_only(model: &JointMfGp, candidates: &[Vec<f64>]) -> Result<Self> {
        Self::build(model, candidates, vec![model.target_level()], None)
    }

    fn build(
        model: &JointMfGp,
        candidates: &[Vec<f64>],
        levels: Vec<usize>,
        reference: Option<ReferenceSet>,
    ) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::InvalidInput("candidate set must not be empty".into()));
        }
        for c in candidates {
            Error::check_dim(model.dim(), c.len())?;
        }
        let mut s = GainScorer {
            hyper: model.hyper().clone(),
            config: model.config().clone(),
            candidates: candidates.to_vec(),
            levels,
            reference,
            candidate_keys: candidates.iter().map(|c| key(c)).collect(),
            observations: Vec::new(),
            obs: Tracker::new(Vec::new(), 1.0, 0.0),
            side: RefSide::None,
            rel_jitter: model.factor().relative_jitter(),
        };
        s.rebuild(model.observations().to_vec())?;
        Ok(s)
    }

    fn covered_mode(&self, observations: &[Observation]) -> bool {
        let Some(reference) = &self.reference else {
            return false;
        };
        reference.len() == self.candidates.len()
            && reference.points().iter().zip(&self.candidates).all(|(r, c)| r == c)
            && observations.iter().all(|o| self.candidate_keys.contains(&key(&o.action.x)))
    }

    fn rebuild(&mut self, observations: Vec<Observation>) -> Result<()> {
        loop {
            match self.try_rebuild(&observations) {
                Ok(()) => return Ok(()),
                Err(Error::NotPositiveDefinite { jitter }) => {
                    log::debug!("scorer rebuild failed at jitter {jitter:e}, escalating");
                    self.rel_jitter = next_relative_jitter(self.rel_jitter).ok_or(Error::NotPositiveDefinite { jitter })?;
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn try_rebuild(&mut self, observations: &[Observation]) -> Result<()> {
        let scale = self.hyper.jitter_scale();
        let prior: Vec<f64> = self
            .query_iter()
            .map(|(c, l)| self.hyper.signal_cov(&self.candidates[c], l, &self.candidates[c], l))
            .collect();
        self.obs = Tracker::new(prior.clone(), scale, self.rel_jitter);
        self.observations.clear();
        self.side = if self.reference.is_none() {
            RefSide::None
        } else if self.covered_mode(observations) {
            let eps = self
                .hyper
                .discrepancies
                .iter()
                .map(|k| {
                    let pv = self.candidates.iter().map(|c| k.eval(c, c)).collect();
                    Tracker::new(pv, scale, self.rel_jitter)
                })
                .collect();
            RefSide::Covered {
                eps,
                level_obs: vec![Vec::new(); self.hyper.discrepancies.len()],
            }
        } else {
            let mut t = Tracker::new(prior, scale, self.rel_jitter);
            let reference = self.reference.as_ref().map(|r| r.points().to_vec()).unwrap_or_default();
            for (i, r) in reference.iter().enumerate() {
                let k_cond: Vec<f64> = reference[..i].iter().map(|p| self.hyper.target.eval(r, p)).collect();
                let k_query: Vec<f64> = self
                    .query_iter()
                    .map(|(c, _)| self.hyper.target.eval(r, &self.candidates[c]))
                    .collect();
                t.extend(&k_cond, self.hyper.target.signal_variance, &k_query, 0.0)?;
            }
            RefSide::General(t)
        };
        for o in observations {
            self.push(o.clone())?;
        }
        Ok(())
    }

    fn query_iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.candidates.len()).flat_map(move |c| self.levels.iter().map(move |&l| (c, l)))
    }

    fn query_index(&self, candidate: usize, level: usize) -> Option<usize> {
        let li = self.levels.iter().position(|&l| l == level)?;
        Some(candidate * self.levels.len() + li)
    }

    fn push(&mut self, o: Observation) -> Result<()> {
        let h = &self.hyper;
        let (x, lvl) = (&o.action.x, o.action.level);
        let noise = self.config.noise(lvl);
        let k_cond: Vec<f64> = self
            .observations
            .iter()
            .map(|p| h.signal_cov(x, lvl, &p.action.x, p.action.level))
            .collect();
        let diag = h.signal_cov(x, lvl, x, lvl) + noise;
        let k_query: Vec<f64> = self
            .query_iter()
            .map(|(c, l)| h.signal_cov(x, lvl, &self.candidates[c], l))
            .collect();
        self.obs.extend(&k_cond, diag, &k_query, o.value - h.prior_mean)?;

        match &mut self.side {
            RefSide::None => {}
            RefSide::Covered { eps, level_obs } => {
                if lvl < h.discrepancies.len() {
                    let kern = &h.discrepancies[lvl];
                    let k_cond: Vec<f64> = level_obs[lvl]
                        .iter()
                        .map(|&i| kern.eval(x, &self.observations[i].action.x))
                        .collect();
                    let k_query: Vec<f64> = self.candidates.iter().map(|c| kern.eval(x, c)).collect();
                    eps[lvl].extend(&k_cond, kern.signal_variance + noise, &k_query, 0.0)?;
                    level_obs[lvl].push(self.observations.len());
                }
            }
            RefSide::General(t) => {
                let reference = self.reference.as_ref().map(|r| r.points()).unwrap_or(&[]);
                let k_cond: Vec<f64> = reference
                    .iter()
                    .map(|r| h.target.eval(r, x))
                    .chain(k_cond.iter().copied())
                    .collect();
                t.extend(&k_cond, diag, &k_query, 0.0)?;
            }
        }
        self.observations.push(o);
        Ok(())
    }

    /// Conditions on one more observation. The observation must already be
    /// part of the model the scorer mirrors.
    pub fn observe(&mut self, o: &Observation) -> Result<()> {
        let leaves_cover = matches!(self.side, RefSide::Covered { .. })
            && !self.candidate_keys.contains(&key(&o.action.x));
        // a failed push may leave trackers partially extended; rebuilding
        // from the observation list resets all of them
        if !leaves_cover {
            match self.push(o.clone()) {
                Ok(()) => return Ok(()),
                Err(Error::NotPositiveDefinite { .. }) => {}
                Err(e) => return Err(e),
            }
            self.rel_jitter = next_relative_jitter(self.rel_jitter)
                .ok_or(Error::NotPositiveDefinite { jitter: self.obs.factor.jitter() })?;
        }
        let mut all = self.observations.clone();
        all.push(o.clone());
        self.rebuild(all)
    }

    pub fn candidates(&self) -> &[Vec<f64>] {
        &self.candidates
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Information gain of querying `candidate` at `level`.
    pub fn gain(&self, candidate: usize, level: usize) -> Result<f64> {
        let q = self
            .query_index(candidate, level)
            .ok_or_else(|| Error::InvalidInput(format!("level {} is not scored", level + 1)))?;
        let noise = self.config.noise(level);
        let prior = self.obs.var[q].max(0.0) + noise;
        let post = match &self.side {
            RefSide::None => {
                return Err(Error::InvalidInput("scorer has no reference set".into()));
            }
            RefSide::Covered { eps, .. } => {
                if level < eps.len() {
                    eps[level].var[candidate].max(0.0) + noise
                } else {
                    noise
                }
            }
            RefSide::General(t) => t.var[q].max(0.0) + noise,
        };
        Ok(gain_from_variances(prior, post))
    }

    /// Posterior mean and variance of `f_m` at every candidate.
    pub fn target_posterior(&self) -> (Vec<f64>, Vec<f64>) {
        let target = self.config.target_level();
        let sv = self.hyper.target.signal_variance;
        (0..self.candidates.len())
            .map(|c| {
                let q = self.query_index(c, target).expect("target level is always scored");
                (
                    self.hyper.prior_mean + self.obs.mean_offset(q),
                    self.obs.var[q].clamp(0.0, sv),
                )
            })
            .unzip()
    }
}
