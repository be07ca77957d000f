//! Shared inputs for the criterion benchmarks.

use mfbo::{Action, FidelityConfig, JointMfGp, KernelParams, MfHyperparams, Observation};

/// Points of a `side × side` grid on the unit square.
pub fn grid(side: usize) -> Vec<Vec<f64>> {
    let step = 1.0 / (side.max(2) - 1) as f64;
    (0..side)
        .flat_map(|i| (0..side).map(move |j| vec![i as f64 * step, j as f64 * step]))
        .collect()
}

/// Three-level additive model on the unit square.
pub fn model() -> JointMfGp {
    let k = |sv: f64, l: f64| KernelParams::new(sv, vec![l, l]).unwrap();
    let hyper = MfHyperparams::new(k(1.0, 0.3), 0.0, vec![k(0.1, 0.3), k(0.02, 0.3)]).unwrap();
    let config = FidelityConfig::new(vec![1.0, 2.25, 9.0], vec![1e-3; 3]).unwrap();
    JointMfGp::new(hyper, config).unwrap()
}

/// Deterministic observations cycling through candidates and levels.
pub fn observations(candidates: &[Vec<f64>], count: usize) -> Vec<Observation> {
    (0..count)
        .map(|i| {
            let x = candidates[(i * 7) % candidates.len()].clone();
            let value = (3.0 * x[0]).sin() + x[1] * x[1];
            Observation {
                action: Action::new(x, i % 3),
                value,
                cost_charged: 1.0,
            }
        })
        .collect()
}

/// [`model`] conditioned on `obs` in order.
pub fn conditioned_model(obs: &[Observation]) -> JointMfGp {
    let mut m = model();
    for o in obs {
        m.condition_in_place(o.clone()).unwrap();
    }
    m
}
