//! Query policies over a discrete candidate set: MF-MI-Greedy, single-fidelity
//! GP-UCB, constriction PSO and random search.
//!
//! Every policy maximizes a utility. Oracles for minimization problems report
//! the negated objective.

mod acquisition;
mod explore;
mod greedy;
mod pso;
mod recommend;
mod state;

use log::debug;
use rand::seq::index;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::{Action, History, Observation};
use crate::mf::FidelityConfig;
use crate::problems::{derive_seed, DiscreteMfProblem, NoiseStream};

pub use acquisition::{maximize_acquisition_projected, nearest_candidate};
pub use explore::{explore_lf, ExploreOutcome, StopReason};
pub use greedy::{gp_ucb_select, mf_mi_greedy, sf_gp_ucb, ucb_beta, RoundsSummary};
pub use pso::{pso_maximize, pso_run, PsoParams, PsoResult};
pub use recommend::{recommend, Recommendation};
pub use state::{ModelParams, ModelState};

/// Source of noisy utilities at `(candidate row, level)`.
pub trait MfOracle {
    fn candidates(&self) -> &[Vec<f64>];
    fn config(&self) -> &FidelityConfig;
    fn evaluate(&mut self, candidate: usize, level: usize) -> Result<f64>;
}

/// Oracle backed by a tabulated problem. Values are reported in the
/// problem's standardized units with the sign flipped for minimization.
pub struct ProblemOracle<'a> {
    problem: &'a DiscreteMfProblem,
    noise: NoiseStream,
}

impl<'a> ProblemOracle<'a> {
    pub fn new(problem: &'a DiscreteMfProblem, noise_seed: u64) -> Self {
        ProblemOracle {
            problem,
            noise: NoiseStream::new(noise_seed),
        }
    }

    pub fn problem(&self) -> &DiscreteMfProblem {
        self.problem
    }
}

impl MfOracle for ProblemOracle<'_> {
    fn candidates(&self) -> &[Vec<f64>] {
        self.problem.candidates()
    }

    fn config(&self) -> &FidelityConfig {
        self.problem.config()
    }

    fn evaluate(&mut self, candidate: usize, level: usize) -> Result<f64> {
        let obs = self.problem.query_row(candidate, level, &mut self.noise)?;
        Ok(self.problem.sense().sign() * obs.value)
    }
}

/// Budget-enforcing wrapper around an oracle that records every query.
pub struct Session<'a> {
    oracle: &'a mut dyn MfOracle,
    budget: f64,
    history: History,
    rows: Vec<usize>,
}

impl<'a> Session<'a> {
    pub fn new(oracle: &'a mut dyn MfOracle, budget: f64) -> Result<Self> {
        if !(budget.is_finite() && budget >= 0.0) {
            return Err(Error::InvalidInput(format!("budget must be finite and nonnegative, got {budget}")));
        }
        Ok(Session {
            oracle,
            budget,
            history: History::new(),
            rows: Vec::new(),
        })
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn spent(&self) -> f64 {
        self.history.cumulative_cost()
    }

    pub fn remaining(&self) -> f64 {
        self.budget - self.spent()
    }

    pub fn config(&self) -> &FidelityConfig {
        self.oracle.config()
    }

    pub fn candidates(&self) -> &[Vec<f64>] {
        self.oracle.candidates()
    }

    pub fn can_afford(&self, level: usize) -> bool {
        self.spent() + self.config().cost(level) <= self.budget
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    /// Candidate row of every recorded observation.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn query(&mut self, candidate: usize, level: usize) -> Result<Observation> {
        let cfg = self.config();
        if level >= cfg.levels() {
            return Err(Error::InvalidInput(format!("fidelity level {} out of range", level + 1)));
        }
        let cost = cfg.cost(level);
        if self.spent() + cost > self.budget {
            return Err(Error::BudgetExceeded {
                cost,
                remaining: self.remaining(),
            });
        }
        let value = self.oracle.evaluate(candidate, level)?;
        if !value.is_finite() {
            return Err(Error::Oracle(format!(
                "non-finite value at candidate {candidate}, level {}",
                level + 1
            )));
        }
        let obs = Observation {
            action: Action::new(self.oracle.candidates()[candidate].clone(), level),
            value,
            cost_charged: cost,
        };
        debug!("query row {candidate} level {} -> {value:.6}", level + 1);
        self.history.push(obs.clone());
        self.rows.push(candidate);
        Ok(obs)
    }

    pub fn into_parts(self) -> (History, Vec<usize>) {
        (self.history, self.rows)
    }
}

/// Queries `count` distinct uniformly drawn candidates at `level` (with
/// replacement once the candidates run out), stopping early if the budget
/// runs short.
pub fn initialize(session: &mut Session, level: usize, count: usize, seed: u64) -> Result<Vec<Observation>> {
    let n = session.candidates().len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = index::sample(&mut rng, n, count.min(n)).into_vec();
    while rows.len() < count {
        rows.push(rng.gen_range(0..n));
    }
    let mut out = Vec::with_capacity(count);
    for row in rows {
        if !session.can_afford(level) {
            break;
        }
        out.push(session.query(row, level)?);
    }
    Ok(out)
}

/// Number of initialization queries at a level costing `cost`.
pub fn init_count(budget: f64, init_fraction: f64, cost: f64) -> usize {
    (init_fraction * budget / cost + 1e-9).floor().max(0.0) as usize
}

/// Target-fidelity queries at uniformly random candidates until the budget
/// runs out.
pub fn random_search(session: &mut Session, seed: u64) -> Result<()> {
    let target = session.config().target_level();
    let n = session.candidates().len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while session.can_afford(target) {
        let row = rng.gen_range(0..n);
        session.query(row, target)?;
    }
    Ok(())
}

/// A policy and its settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    MfMiGreedy(ModelParams),
    GpUcb(ModelParams),
    Pso(PsoParams),
    Random,
}

impl Method {
    pub fn default_label(&self) -> &'static str {
        match self {
            Method::MfMiGreedy(_) => "mf_mi_greedy",
            Method::GpUcb(_) => "gp_ucb",
            Method::Pso(_) => "pso",
            Method::Random => "random",
        }
    }

    /// Level and count of the initialization queries for a budget.
    pub fn init_plan(&self, config: &FidelityConfig, budget: f64, init_fraction: f64) -> (usize, usize) {
        match self {
            Method::MfMiGreedy(_) => (0, init_count(budget, init_fraction, config.cost(0))),
            Method::GpUcb(_) | Method::Random => (
                config.target_level(),
                init_count(budget, init_fraction, config.target_cost()),
            ),
            Method::Pso(_) => (config.target_level(), 0),
        }
    }
}

/// Result of one policy run. `error` holds the failure that ended the run
/// early, if any; the history up to that point is kept.
#[derive(Debug, Clone)]
pub struct PolicyRun {
    pub history: History,
    pub rows: Vec<usize>,
    pub init_len: usize,
    pub recommendation: Recommendation,
    pub explore_stops: Vec<StopReason>,
    pub error: Option<String>,
}

/// Runs initialization followed by the policy with a fresh session.
pub fn run_method(
    method: &Method,
    oracle: &mut dyn MfOracle,
    budget: f64,
    init_fraction: f64,
    seed: u64,
) -> Result<PolicyRun> {
    let (level, count) = method.init_plan(oracle.config(), budget, init_fraction);
    let mut session = Session::new(oracle, budget)?;
    let mut stops = Vec::new();
    let mut state = None;
    let outcome = (|| -> Result<()> {
        initialize(&mut session, level, count, derive_seed(&[seed, 1]))?;
        match method {
            Method::MfMiGreedy(p) => {
                let mut st = ModelState::for_session(&session, p, true, seed)?;
                let res = mf_mi_greedy(&mut session, &mut st, p);
                state = Some(st);
                stops = res.explore_stops;
                res.error.map_or(Ok(()), Err)
            }
            Method::GpUcb(p) => {
                let mut st = ModelState::for_session(&session, p, false, seed)?;
                let res = sf_gp_ucb(&mut session, &mut st, p);
                state = Some(st);
                res.error.map_or(Ok(()), Err)
            }
            Method::Pso(p) => pso_run(&mut session, p, derive_seed(&[seed, 3])),
            Method::Random => random_search(&mut session, derive_seed(&[seed, 4])),
        }
    })();
    let init_len = count.min(session.history().len());
    let recommendation = recommend(&session, state.as_ref());
    let (history, rows) = session.into_parts();
    Ok(PolicyRun {
        history,
        rows,
        init_len,
        recommendation,
        explore_stops: stops,
        error: outcome.err().map(|e| e.to_string()),
    })
}
