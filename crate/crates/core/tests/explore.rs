mod common;

use common::*;
use mfbo::policies::{explore_lf, ModelState, Session, StopReason};
use mfbo::{FitOptions, ReferenceSet};
use rand::Rng;

struct Instance {
    oracle: TableOracle,
    hyper: mfbo::MfHyperparams,
    noise: Vec<f64>,
    costs: Vec<f64>,
    budget: f64,
    beta_scale: f64,
    init: Vec<(usize, usize)>,
}

fn instance(seed: u64) -> Instance {
    let mut r = rng(seed);
    let d = r.gen_range(1..=2);
    let n = r.gen_range(2..=5);
    let costs = vec![1.0, r.gen_range(2.0..8.0)];
    let (hyper, noise, oracle) = conditioned_table(&mut r, n, d, &costs);
    let init = (0..r.gen_range(0..=2)).map(|_| (r.gen_range(0..n), r.gen_range(0..2))).collect();
    Instance {
        oracle,
        hyper,
        noise,
        budget: r.gen_range(12.0..40.0),
        beta_scale: r.gen_range(0.02..2.0),
        costs,
        init,
    }
}

fn state(inst: &Instance, session: &Session) -> ModelState {
    let cands = session.candidates().to_vec();
    ModelState::new(
        inst.hyper.clone(),
        inst.oracle.config.clone(),
        &cands,
        Some(ReferenceSet::new(cands.clone()).unwrap()),
        session.history().entries(),
        FitOptions::default(),
        0,
    )
    .unwrap()
}

#[test]
fn greedy_exploration_matches_brute_force_simulation() {
    let mut stops = [0usize; 3];
    for seed in 0..100 {
        let inst = instance(seed);
        let budget = inst.budget;
        let init = inst.init.clone();
        let (cands, table) = (inst.oracle.candidates.clone(), inst.oracle.table.clone());
        let mut orc = TableOracle::new(cands.clone(), inst.oracle.config.clone(), table.clone());
        let mut session = Session::new(&mut orc, budget).unwrap();
        for &(c, l) in &init {
            if session.can_afford(l) {
                session.query(c, l).unwrap();
            }
        }
        let mut st = state(&inst, &session);
        let history = session.history().entries().to_vec();
        let start = history.len();
        let remaining = session.remaining();
        let out = explore_lf(&mut st, &mut session, inst.beta_scale).unwrap();

        let sim = simulate_explore(
            &inst.hyper,
            &inst.noise,
            &inst.costs,
            &cands,
            &table,
            &history,
            remaining,
            inst.beta_scale,
        );
        let got: Vec<(usize, usize)> = session.rows()[start..]
            .iter()
            .zip(&session.history().entries()[start..])
            .map(|(&row, o)| (row, o.action.level))
            .collect();
        assert_eq!(got, sim.actions, "seed {seed}");
        assert_eq!(out.stop, sim.stop, "seed {seed}");
        let total: f64 = sim.gains.iter().sum();
        assert!((out.cumulative_gain - total).abs() < 1e-6, "seed {seed}");
        stops[out.stop as usize] += 1;
    }
    assert!(stops.iter().all(|&s| s > 0), "every stop reason should occur: {stops:?}");
}

#[test]
fn accepted_prefixes_keep_gain_per_cost_above_threshold() {
    for seed in 0..100 {
        let inst = instance(500 + seed);
        let mut orc = TableOracle::new(
            inst.oracle.candidates.clone(),
            inst.oracle.config.clone(),
            inst.oracle.table.clone(),
        );
        let mut session = Session::new(&mut orc, inst.budget).unwrap();
        for &(c, l) in &inst.init {
            if session.can_afford(l) {
                session.query(c, l).unwrap();
            }
        }
        let history = session.history().entries().to_vec();
        let remaining = session.remaining();
        let mut st = state(&inst, &session);
        let out = explore_lf(&mut st, &mut session, inst.beta_scale).unwrap();
        let threshold = inst.beta_scale / remaining.sqrt();
        assert!((out.threshold - threshold).abs() < 1e-12);
        for k in 1..=out.observations.len() {
            let actions: Vec<_> = out.observations[..k].iter().map(|o| o.action.clone()).collect();
            let cost: f64 = out.observations[..k].iter().map(|o| o.cost_charged).sum();
            let gain = mutual_information(&inst.hyper, &inst.noise, &history, &actions, &inst.oracle.candidates);
            assert!(gain / cost >= threshold - 1e-9, "seed {seed} prefix {k}");
        }
        assert!(out.observations.is_empty() || out.cost <= remaining - inst.costs[1] + 1e-12, "seed {seed}");
        assert!(out.observations.iter().all(|o| o.action.level == 0));
    }
}

#[test]
fn no_feasible_action_when_budget_cannot_cover_a_cheap_and_a_target_query() {
    let mut r = rng(7);
    let costs = [1.0, 4.0];
    let mut orc = TableOracle::random(&mut r, 4, 1, &costs);
    let cands = orc.candidates.clone();
    let (hyper, _) = random_hyper(&mut r, 1, 2);
    let cfg = orc.config.clone();
    let mut session = Session::new(&mut orc, 4.5).unwrap();
    let mut st = ModelState::new(
        hyper,
        cfg,
        &cands,
        Some(ReferenceSet::new(cands.clone()).unwrap()),
        &[],
        FitOptions::default(),
        0,
    )
    .unwrap();
    let out = explore_lf(&mut st, &mut session, 1.0).unwrap();
    assert_eq!(out.stop, StopReason::NoFeasibleAction);
    assert!(out.observations.is_empty());
    assert_eq!(session.spent(), 0.0);
}

#[test]
fn huge_threshold_accepts_nothing() {
    for seed in 0..20 {
        let inst = instance(900 + seed);
        let mut orc = TableOracle::new(
            inst.oracle.candidates.clone(),
            inst.oracle.config.clone(),
            inst.oracle.table.clone(),
        );
        let mut session = Session::new(&mut orc, inst.budget).unwrap();
        let mut st = state(&inst, &session);
        let out = explore_lf(&mut st, &mut session, 1e6).unwrap();
        assert!(out.observations.is_empty());
        assert_ne!(out.stop, StopReason::NoFeasibleAction);
        assert_eq!(session.spent(), 0.0);
    }
}
