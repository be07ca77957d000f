use serde::{Deserialize, Serialize};

use super::{ModelState, Session};
use crate::error::Result;
use crate::history::Observation;

/// Relative margin below which two gain-per-cost ratios count as tied.
/// Symmetric candidates have analytically equal gains that the incremental
/// updates reproduce only up to roundoff.
const TIE_TOLERANCE: f64 = 1e-10;

/// Why a low-fidelity exploration phase ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// No action fits in the budget while leaving room for a target query.
    NoFeasibleAction,
    /// The best gain per cost was at the target fidelity.
    TargetBetter,
    /// Adding the best action would drop the cumulative gain per cost below
    /// the threshold.
    LowRatio,
}

#[derive(Debug, Clone)]
pub struct ExploreOutcome {
    pub observations: Vec<Observation>,
    pub stop: StopReason,
    pub threshold: f64,
    /// Information gain of the accepted actions about the target at the
    /// reference set.
    pub cumulative_gain: f64,
    pub cost: f64,
}

/// Greedily queries low-fidelity actions by information gain per unit cost
/// until the best action is at the target fidelity, no action is affordable,
/// or the accumulated gain per cost falls below `beta_scale / sqrt(B)` where
/// `B` is the budget remaining when the phase starts.
///
/// Every accepted action is queried and conditioned on before the next one is
/// chosen. Ties, up to a relative margin of `1e-10`, go to the lowest
/// candidate row, then the lowest level.
pub fn explore_lf(state: &mut ModelState, session: &mut Session, beta_scale: f64) -> Result<ExploreOutcome> {
    let budget = session.remaining();
    let threshold = if budget > 0.0 {
        beta_scale / budget.sqrt()
    } else {
        f64::INFINITY
    };
    let config = session.config().clone();
    let target = config.target_level();
    let target_cost = config.target_cost();
    let n = state.candidates().len();

    let mut out = ExploreOutcome {
        observations: Vec::new(),
        stop: StopReason::NoFeasibleAction,
        threshold,
        cumulative_gain: 0.0,
        cost: 0.0,
    };
    loop {
        let limit = budget - out.cost - target_cost;
        let mut best: Option<(usize, usize, f64, f64)> = None;
        for c in 0..n {
            for l in 0..config.levels() {
                let cost = config.cost(l);
                if cost > limit {
                    continue;
                }
                let g = state.scorer().gain(c, l)?;
                let ratio = g / cost;
                if ratio.is_nan() {
                    continue;
                }
                if best.map_or(true, |(_, _, _, r)| ratio > r + TIE_TOLERANCE * r.abs()) {
                    best = Some((c, l, g, ratio));
                }
            }
        }
        let Some((c, l, gain, _)) = best else {
            out.stop = StopReason::NoFeasibleAction;
            return Ok(out);
        };
        if l == target {
            out.stop = StopReason::TargetBetter;
            return Ok(out);
        }
        let cost = config.cost(l);
        if (out.cumulative_gain + gain) / (out.cost + cost) < threshold {
            out.stop = StopReason::LowRatio;
            return Ok(out);
        }
        let obs = session.query(c, l)?;
        state.observe(&obs)?;
        out.cumulative_gain += gain;
        out.cost += cost;
        out.observations.push(obs);
    }
}
