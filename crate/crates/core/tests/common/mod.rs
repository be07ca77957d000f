//! Dense reference computations used as independent oracles.
//!
//! Everything here builds full covariance matrices and uses LU-based
//! inverses and determinants from nalgebra, so no code is shared with the
//! incremental Cholesky route under test.

#![allow(dead_code)]

use mfbo::policies::StopReason;
use mfbo::{Action, FidelityConfig, KernelParams, MfHyperparams, Observation};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn se(a: &[f64], b: &[f64], sv: f64, ls: &[f64]) -> f64 {
    let r2: f64 = a.iter().zip(b).zip(ls).map(|((x, y), l)| ((x - y) / l).powi(2)).sum();
    sv * (-0.5 * r2).exp()
}

/// Covariance of the latent values `f_la(xa)` and `f_lb(xb)`.
pub fn latent_cov(h: &MfHyperparams, xa: &[f64], la: usize, xb: &[f64], lb: usize) -> f64 {
    let m = h.discrepancies.len();
    let mut k = se(xa, xb, h.target.signal_variance, &h.target.lengthscales);
    if la == lb && la < m {
        let e = &h.discrepancies[la];
        k += se(xa, xb, e.signal_variance, &e.lengthscales);
    }
    k
}

/// A random variable in the joint model: an observation or a latent target
/// value.
#[derive(Clone, Debug)]
pub enum Var {
    Obs(Action),
    Target(Vec<f64>),
}

pub fn cov(h: &MfHyperparams, noise: &[f64], a: &Var, b: &Var, same: bool) -> f64 {
    let m = h.discrepancies.len();
    let (xa, la) = match a {
        Var::Obs(act) => (&act.x, act.level),
        Var::Target(x) => (x, m),
    };
    let (xb, lb) = match b {
        Var::Obs(act) => (&act.x, act.level),
        Var::Target(x) => (x, m),
    };
    let mut k = latent_cov(h, xa, la, xb, lb);
    if same {
        if let Var::Obs(act) = a {
            k += noise[act.level];
        }
    }
    k
}

pub fn matrix(h: &MfHyperparams, noise: &[f64], vars: &[Var]) -> DMatrix<f64> {
    DMatrix::from_fn(vars.len(), vars.len(), |i, j| cov(h, noise, &vars[i], &vars[j], i == j))
}

pub fn cross(h: &MfHyperparams, noise: &[f64], a: &[Var], b: &[Var]) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| cov(h, noise, &a[i], &b[j], false))
}

fn obs_vars(obs: &[Observation]) -> Vec<Var> {
    obs.iter().map(|o| Var::Obs(o.action.clone())).collect()
}

/// Covariance of `vars` conditioned on the observations.
pub fn conditional(h: &MfHyperparams, noise: &[f64], obs: &[Observation], vars: &[Var]) -> DMatrix<f64> {
    let prior = matrix(h, noise, vars);
    if obs.is_empty() {
        return prior;
    }
    let d = obs_vars(obs);
    let kdd = matrix(h, noise, &d);
    let kvd = cross(h, noise, vars, &d);
    let inv = kdd.lu().try_inverse().expect("observation covariance is invertible");
    prior - &kvd * inv * kvd.transpose()
}

/// Posterior mean and variance of `f_m(x)`.
pub fn posterior_target(h: &MfHyperparams, noise: &[f64], obs: &[Observation], x: &[f64]) -> (f64, f64) {
    let t = [Var::Target(x.to_vec())];
    let prior_var = cov(h, noise, &t[0], &t[0], true);
    if obs.is_empty() {
        return (h.prior_mean, prior_var);
    }
    let d = obs_vars(obs);
    let kdd = matrix(h, noise, &d);
    let ktd = cross(h, noise, &t, &d);
    let r = DVector::from_iterator(obs.len(), obs.iter().map(|o| o.value - h.prior_mean));
    let lu = kdd.lu();
    let alpha = lu.solve(&r).expect("solvable");
    let v = lu.solve(&ktd.transpose()).expect("solvable");
    let mean = h.prior_mean + (&ktd * alpha)[0];
    let var = prior_var - (&ktd * v)[0];
    (mean, var)
}

pub fn log_marginal_likelihood(h: &MfHyperparams, noise: &[f64], obs: &[Observation]) -> f64 {
    let d = obs_vars(obs);
    let kdd = matrix(h, noise, &d);
    let r = DVector::from_iterator(obs.len(), obs.iter().map(|o| o.value - h.prior_mean));
    let lu = kdd.clone().lu();
    let alpha = lu.solve(&r).expect("solvable");
    let det = lu.determinant();
    -0.5 * r.dot(&alpha) - 0.5 * det.ln() - 0.5 * obs.len() as f64 * (2.0 * std::f64::consts::PI).ln()
}

/// Mutual information `I(y_L; f_m(X_ref) | y_D)` from dense determinants.
pub fn mutual_information(
    h: &MfHyperparams,
    noise: &[f64],
    obs: &[Observation],
    actions: &[Action],
    reference: &[Vec<f64>],
) -> f64 {
    if actions.is_empty() {
        return 0.0;
    }
    let l: Vec<Var> = actions.iter().map(|a| Var::Obs(a.clone())).collect();
    let r: Vec<Var> = reference.iter().map(|x| Var::Target(x.clone())).collect();
    let joint: Vec<Var> = l.iter().chain(&r).cloned().collect();
    let s = conditional(h, noise, obs, &joint);
    let nl = l.len();
    let nr = r.len();
    let sll = s.view((0, 0), (nl, nl)).clone_owned();
    let srr = s.view((nl, nl), (nr, nr)).clone_owned();
    0.5 * (sll.lu().determinant().ln() + srr.lu().determinant().ln() - s.lu().determinant().ln())
}

pub fn random_hyper(rng: &mut ChaCha8Rng, d: usize, m: usize) -> (MfHyperparams, Vec<f64>) {
    let kern = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
        KernelParams::new(
            rng.gen_range(lo..hi),
            (0..d).map(|_| rng.gen_range(0.3..1.5)).collect(),
        )
        .unwrap()
    };
    let target = kern(rng, 0.5, 2.0);
    let eps = (0..m - 1).map(|_| kern(rng, 0.05, 0.5)).collect();
    let hyper = MfHyperparams::new(target, rng.gen_range(-1.0..1.0), eps).unwrap();
    let noise = (0..m).map(|_| rng.gen_range(0.01..0.2)).collect();
    (hyper, noise)
}

pub fn random_point(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(0.0..1.0)).collect()
}

pub fn random_observations(rng: &mut ChaCha8Rng, d: usize, m: usize, n: usize) -> Vec<Observation> {
    (0..n)
        .map(|_| Observation {
            action: Action::new(random_point(rng, d), rng.gen_range(0..m)),
            value: rng.gen_range(-2.0..2.0),
            cost_charged: 1.0,
        })
        .collect()
}

pub fn config(costs: &[f64], noise: &[f64]) -> FidelityConfig {
    FidelityConfig::new(costs.to_vec(), noise.to_vec()).unwrap()
}

/// Reference greedy exploration: at every step enumerates all actions in
/// candidate-then-level order, scores each by dense mutual information per
/// cost and applies the three stopping rules. Accepted actions are observed
/// with their table value before the next step.
pub struct ExploreSimulation {
    pub actions: Vec<(usize, usize)>,
    pub stop: StopReason,
    pub gains: Vec<f64>,
}

const TIE_TOLERANCE: f64 = 1e-7;

#[allow(clippy::too_many_arguments)]
pub fn simulate_explore(
    h: &MfHyperparams,
    noise: &[f64],
    costs: &[f64],
    candidates: &[Vec<f64>],
    table: &[Vec<f64>],
    history: &[Observation],
    remaining: f64,
    beta_scale: f64,
) -> ExploreSimulation {
    let m = costs.len();
    let beta = beta_scale / remaining.sqrt();
    let mut obs = history.to_vec();
    let mut out = ExploreSimulation {
        actions: Vec::new(),
        stop: StopReason::NoFeasibleAction,
        gains: Vec::new(),
    };
    let mut spent = 0.0;
    let mut chosen: Vec<Action> = Vec::new();
    loop {
        let mut best: Option<(usize, usize, f64, f64)> = None;
        for (c, x) in candidates.iter().enumerate() {
            for (l, &cost) in costs.iter().enumerate() {
                if cost > remaining - spent - costs[m - 1] {
                    continue;
                }
                let g = mutual_information(h, noise, &obs, &[Action::new(x.clone(), l)], candidates);
                let ratio = g / cost;
                // dense determinants carry roundoff, so near-equal ratios count as ties
                if best.map_or(true, |b| ratio > b.3 + TIE_TOLERANCE * b.3.abs()) {
                    best = Some((c, l, g, ratio));
                }
            }
        }
        let Some((c, l, g, _)) = best else {
            out.stop = StopReason::NoFeasibleAction;
            return out;
        };
        if l == m - 1 {
            out.stop = StopReason::TargetBetter;
            return out;
        }
        let mut with = chosen.clone();
        with.push(Action::new(candidates[c].clone(), l));
        let cumulative = mutual_information(h, noise, history, &with, candidates);
        if cumulative / (spent + costs[l]) < beta {
            out.stop = StopReason::LowRatio;
            return out;
        }
        spent += costs[l];
        chosen = with;
        out.actions.push((c, l));
        out.gains.push(g);
        obs.push(Observation {
            action: Action::new(candidates[c].clone(), l),
            value: table[c][l],
            cost_charged: costs[l],
        });
    }
}

/// Noise-free lookup table oracle.
pub struct TableOracle {
    pub candidates: Vec<Vec<f64>>,
    pub config: FidelityConfig,
    pub table: Vec<Vec<f64>>,
    pub calls: usize,
}

impl TableOracle {
    pub fn new(candidates: Vec<Vec<f64>>, config: FidelityConfig, table: Vec<Vec<f64>>) -> Self {
        TableOracle {
            candidates,
            config,
            table,
            calls: 0,
        }
    }

    /// Uniform random candidates with values `g(x) + 0.1 (m - 1 - l)`.
    pub fn random(rng: &mut ChaCha8Rng, n: usize, d: usize, costs: &[f64]) -> Self {
        let m = costs.len();
        let candidates: Vec<Vec<f64>> = (0..n).map(|_| random_point(rng, d)).collect();
        let table = candidates
            .iter()
            .map(|x| {
                let g: f64 = x.iter().map(|v| (3.0 * v).sin()).sum();
                (0..m).map(|l| g + 0.1 * (m - 1 - l) as f64).collect()
            })
            .collect();
        let config = FidelityConfig::new(costs.to_vec(), vec![1e-3; m]).unwrap();
        Self::new(candidates, config, table)
    }
}

impl mfbo::policies::MfOracle for TableOracle {
    fn candidates(&self) -> &[Vec<f64>] {
        &self.candidates
    }

    fn config(&self) -> &FidelityConfig {
        &self.config
    }

    fn evaluate(&mut self, candidate: usize, level: usize) -> mfbo::Result<f64> {
        self.calls += 1;
        Ok(self.table[candidate][level])
    }
}

/// Largest condition number of the target kernel matrix on a reference set
/// for which double precision still pins mutual information down to 1e-6.
pub const MAX_REFERENCE_CONDITION: f64 = 1e8;

pub fn well_conditioned(h: &MfHyperparams, points: &[Vec<f64>]) -> bool {
    let vars: Vec<Var> = points.iter().map(|x| Var::Target(x.clone())).collect();
    let eig = matrix(h, &[], &vars).symmetric_eigenvalues();
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    lo > 0.0 && hi / lo <= MAX_REFERENCE_CONDITION
}

/// Random hyperparameters with `count` reference points whose target kernel
/// matrix is well conditioned. Points are redrawn a few times before the
/// hyperparameters themselves are redrawn.
pub fn conditioned_instance(
    rng: &mut ChaCha8Rng,
    d: usize,
    m: usize,
    count: usize,
) -> (MfHyperparams, Vec<f64>, Vec<Vec<f64>>) {
    loop {
        let (h, noise) = random_hyper(rng, d, m);
        for _ in 0..20 {
            let points: Vec<Vec<f64>> = (0..count).map(|_| random_point(rng, d)).collect();
            if well_conditioned(&h, &points) {
                return (h, noise, points);
            }
        }
    }
}

/// Like [`conditioned_instance`] with the reference set doubling as the
/// candidates of a table oracle.
pub fn conditioned_table(
    rng: &mut ChaCha8Rng,
    n: usize,
    d: usize,
    costs: &[f64],
) -> (MfHyperparams, Vec<f64>, TableOracle) {
    loop {
        let (h, noise) = random_hyper(rng, d, costs.len());
        for _ in 0..20 {
            let mut oracle = TableOracle::random(rng, n, d, costs);
            if well_conditioned(&h, &oracle.candidates) {
                oracle.config = config(costs, &noise);
                return (h, noise, oracle);
            }
        }
    }
}
