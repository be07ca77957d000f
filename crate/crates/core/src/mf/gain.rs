//! Mutual information between observations and the target function.
//!
//! The target function is represented by its noiseless values on a finite
//! reference set, so `I(y_a; f_m | y_D) = ½ ln(Var(y_a | y_D) / Var(y_a | y_D, f_m(X_ref)))`.

use log::warn;
use rand::seq::index;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::JointMfGp;
use crate::error::{Error, Result};
use crate::history::Action;
use crate::linalg::{dot, CholeskyFactor};

/// Design points standing in for the target function in information-gain
/// computations.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSet {
    points: Vec<Vec<f64>>,
    /// Candidate rows the points were taken from, when known.
    indices: Option<Vec<usize>>,
}

impl ReferenceSet {
    pub const DEFAULT_LIMIT: usize = 512;

    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("reference set must not be empty".into()));
        }
        let d = points[0].len();
        for p in &points {
            Error::check_dim(d, p.len())?;
        }
        Ok(ReferenceSet {
            points,
            indices: None,
        })
    }

    /// All candidates when there are at most `limit`, otherwise a seeded
    /// uniform subsample of `limit` rows (kept in candidate order).
    pub fn from_candidates(candidates: &[Vec<f64>], limit: usize, seed: u64) -> Result<Self> {
        let n = candidates.len();
        let idx: Vec<usize> = if n <= limit {
            (0..n).collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut v = index::sample(&mut rng, n, limit.max(1)).into_vec();
            v.sort_unstable();
            v
        };
        let mut set = Self::new(idx.iter().map(|&i| candidates[i].clone()).collect())?;
        set.indices = Some(idx);
        Ok(set)
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn indices(&self) -> Option<&[usize]> {
        self.indices.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `½ ln(prior / post)` clamped at zero; a non-positive `post` yields `+∞`.
pub(crate) fn gain_from_variances(prior: f64, post: f64) -> f64 {
    if !(post > 0.0) {
        warn!("degenerate conditional variance {post}; treating gain as infinite");
        return f64::INFINITY;
    }
    (0.5 * (prior / post).ln()).max(0.0)
}

/// Factor of the joint covariance of `[f_m(X_ref); y_D]`.
pub(crate) fn reference_factor(model: &JointMfGp, reference: &ReferenceSet) -> Result<CholeskyFactor> {
    let items = reference_items(model, reference);
    let gram: Vec<Vec<f64>> = (0..items.len())
        .map(|i| (0..=i).map(|j| item_cov(model, &items[i], &items[j], i == j)).collect())
        .collect();
    CholeskyFactor::factor(&gram, model.hyper().jitter_scale())
}

#[derive(Clone, Copy)]
enum Item<'a> {
    /// Noiseless target-function value.
    Ref(&'a [f64]),
    /// Noisy observation of an action.
    Obs(&'a Action),
}

fn reference_items<'a>(model: &'a JointMfGp, reference: &'a ReferenceSet) -> Vec<Item<'a>> {
    reference
        .points()
        .iter()
        .map(|p| Item::Ref(p))
        .chain(model.observations().iter().map(|o| Item::Obs(&o.action)))
        .collect()
}

fn item_cov(model: &JointMfGp, a: &Item, b: &Item, same: bool) -> f64 {
    let h = model.hyper();
    match (a, b) {
        (Item::Ref(x), Item::Ref(y)) => h.target.eval(x, y),
        (Item::Ref(x), Item::Obs(o)) | (Item::Obs(o), Item::Ref(x)) => h.target.eval(x, &o.x),
        (Item::Obs(p), Item::Obs(q)) => {
            let k = model.signal_cov(p, q);
            if same {
                k + model.config().noise(p.level)
            } else {
                k
            }
        }
    }
}

fn check_reference(model: &JointMfGp, reference: &ReferenceSet) -> Result<()> {
    Error::check_dim(model.dim(), reference.points()[0].len())
}

/// Information gain of observing `a` about `f_m`, given the model's history.
pub fn info_gain(model: &JointMfGp, a: &Action, reference: &ReferenceSet) -> Result<f64> {
    model.check_action(a)?;
    check_reference(model, reference)?;
    let prior = model.observation_variance(a)?;

    let factor = reference_factor(model, reference)?;
    let items = reference_items(model, reference);
    let k: Vec<f64> = items
        .iter()
        .map(|it| item_cov(model, it, &Item::Obs(a), false))
        .collect();
    let v = factor.forward_solve(&k);
    let post = (model.signal_cov(a, a) - dot(&v, &v)).max(0.0) + model.config().noise(a.level);
    Ok(gain_from_variances(prior, post))
}

/// Joint information gain `I(y_L; f_m | y_D)` of a set of distinct queries,
/// computed from log-determinants of the two conditional covariances.
pub fn cumulative_info_gain(model: &JointMfGp, actions: &[Action], reference: &ReferenceSet) -> Result<f64> {
    if actions.is_empty() {
        return Ok(0.0);
    }
    for a in actions {
        model.check_action(a)?;
    }
    check_reference(model, reference)?;

    let given_history = conditional_cov(model, actions, model.factor(), |a| {
        model
            .observations()
            .iter()
            .map(|o| model.signal_cov(a, &o.action))
            .collect()
    });
    let ref_factor = reference_factor(model, reference)?;
    let items = reference_items(model, reference);
    let given_reference = conditional_cov(model, actions, &ref_factor, |a| {
        items
            .iter()
            .map(|it| item_cov(model, it, &Item::Obs(a), false))
            .collect()
    });

    let scale = model.hyper().jitter_scale();
    let prior = CholeskyFactor::factor(&given_history, scale)?;
    let post = match CholeskyFactor::factor(&given_reference, scale) {
        Ok(f) => f,
        Err(_) => {
            warn!("degenerate joint conditional covariance; treating gain as infinite");
            return Ok(f64::INFINITY);
        }
    };
    Ok((0.5 * (prior.log_det() - post.log_det())).max(0.0))
}

fn conditional_cov<F>(model: &JointMfGp, actions: &[Action], factor: &CholeskyFactor, cross: F) -> Vec<Vec<f64>>
where
    F: Fn(&Action) -> Vec<f64>,
{
    let whitened: Vec<Vec<f64>> = actions.iter().map(|a| factor.forward_solve(&cross(a))).collect();
    (0..actions.len())
        .map(|i| {
            (0..=i)
                .map(|j| {
                    let mut k = model.signal_cov(&actions[i], &actions[j]) - dot(&whitened[i], &whitened[j]);
                    if i == j {
                        k += model.config().noise(actions[i].level);
                    }
                    k
                })
                .collect()
        })
        .collect()
}
