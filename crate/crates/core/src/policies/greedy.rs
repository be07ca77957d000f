use std::f64::consts::PI;

use super::acquisition::{bounding_box, maximize_acquisition_projected};
use super::explore::{explore_lf, StopReason};
use super::{ModelParams, ModelState, Session};
use crate::error::{Error, Result};

/// GP-UCB exploration weight `2 ln(|C| t² π² / (6δ))`.
pub fn ucb_beta(n_candidates: usize, t: usize, delta: f64) -> f64 {
    let t = t as f64;
    2.0 * (n_candidates as f64 * t * t * PI * PI / (6.0 * delta)).ln()
}

/// Index maximizing `μ + sqrt(β_t) σ`; ties go to the lowest index.
pub fn gp_ucb_select(means: &[f64], stds: &[f64], t: usize, delta: f64) -> Result<usize> {
    if means.is_empty() {
        return Err(Error::InvalidInput("no candidates to select from".into()));
    }
    Error::check_dim(means.len(), stds.len())?;
    if t == 0 {
        return Err(Error::InvalidInput("round index starts at 1".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(format!("delta must lie in (0, 1), got {delta}")));
    }
    let root = ucb_beta(means.len(), t, delta).max(0.0).sqrt();
    let mut best = (0, f64::NEG_INFINITY);
    for (i, (m, s)) in means.iter().zip(stds).enumerate() {
        let u = m + root * s.max(0.0);
        if u > best.1 {
            best = (i, u);
        }
    }
    Ok(best.0)
}

#[derive(Debug, Default)]
pub struct RoundsSummary {
    /// Completed target queries after initialization.
    pub rounds: usize,
    pub explore_stops: Vec<StopReason>,
    pub error: Option<Error>,
}

fn select_target(state: &ModelState, params: &ModelParams, t: usize) -> Result<usize> {
    let (means, vars) = state.scorer().target_posterior();
    let stds: Vec<f64> = vars.iter().map(|v| v.sqrt()).collect();
    let n = means.len();
    if n <= params.projection_threshold {
        return gp_ucb_select(&means, &stds, t, params.delta);
    }
    let root = ucb_beta(n, t, params.delta).max(0.0).sqrt();
    let mut order: Vec<usize> = (0..n).collect();
    let ucb = |i: usize| means[i] + root * stds[i];
    order.sort_by(|&a, &b| ucb(b).total_cmp(&ucb(a)));
    let starts: Vec<Vec<f64>> = order.iter().take(4).map(|&i| state.candidates()[i].clone()).collect();
    let model = state.model();
    let acq = |x: &[f64]| match model.posterior_target(x) {
        Ok((m, v)) => m + root * v.max(0.0).sqrt(),
        Err(_) => f64::NEG_INFINITY,
    };
    let bounds = bounding_box(state.candidates());
    Ok(maximize_acquisition_projected(acq, &bounds, state.candidates(), &starts)
        .filter(|&i| ucb(i) >= ucb(order[0]))
        .unwrap_or(order[0]))
}

fn run_rounds(session: &mut Session, state: &mut ModelState, params: &ModelParams, explore: bool) -> RoundsSummary {
    let mut summary = RoundsSummary::default();
    let target = session.config().target_level();
    let mut body = || -> Result<()> {
        state.retune()?;
        let mut t = 0;
        while session.can_afford(target) {
            if explore {
                let out = explore_lf(state, session, params.beta_scale)?;
                summary.explore_stops.push(out.stop);
            }
            t += 1;
            let row = select_target(state, params, t)?;
            let obs = session.query(row, target)?;
            state.observe(&obs)?;
            summary.rounds += 1;
            if params.retune_every > 0 && summary.rounds % params.retune_every == 0 {
                state.retune()?;
            }
        }
        Ok(())
    };
    if let Err(e) = body() {
        summary.error = Some(e);
    }
    summary
}

/// Alternates low-fidelity exploration with one GP-UCB query at the target
/// fidelity until the target cost no longer fits in the budget.
pub fn mf_mi_greedy(session: &mut Session, state: &mut ModelState, params: &ModelParams) -> RoundsSummary {
    run_rounds(session, state, params, true)
}

/// GP-UCB at the target fidelity only.
pub fn sf_gp_ucb(session: &mut Session, state: &mut ModelState, params: &ModelParams) -> RoundsSummary {
    run_rounds(session, state, params, false)
}
