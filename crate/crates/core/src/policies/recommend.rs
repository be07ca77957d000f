use serde::{Deserialize, Serialize};

use super::{ModelState, Session};

/// Final recommendation of a run, as candidate rows with utilities.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    /// Target-fidelity observation with the highest utility.
    pub best_observed: Option<(usize, f64)>,
    /// Candidate with the highest posterior mean of the target.
    pub posterior_best: Option<(usize, f64)>,
}

pub fn recommend(session: &Session, state: Option<&ModelState>) -> Recommendation {
    let target = session.config().target_level();
    let mut best_observed: Option<(usize, f64)> = None;
    for (obs, &row) in session.history().iter().zip(session.rows()) {
        if obs.action.level == target && best_observed.map_or(true, |(_, v)| obs.value > v) {
            best_observed = Some((row, obs.value));
        }
    }
    let posterior_best = state.and_then(|s| {
        let (means, _) = s.scorer().target_posterior();
        means
            .iter()
            .enumerate()
            .fold(None, |acc: Option<(usize, f64)>, (i, &m)| match acc {
                Some((_, b)) if b >= m => acc,
                _ => Some((i, m)),
            })
    });
    Recommendation {
        best_observed,
        posterior_best,
    }
}
