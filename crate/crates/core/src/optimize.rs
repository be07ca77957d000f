//! Derivative-free multi-start coordinate search in log-parameter space.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Settings for hyperparameter fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    /// Number of starts; the first always starts at the initial point.
    pub restarts: usize,
    pub max_sweeps: usize,
    /// Initial coordinate step in natural-log units.
    pub initial_step: f64,
    /// Search stops once the step falls below this.
    pub min_step: f64,
    /// Lower bound on every positive parameter.
    pub lower: f64,
    /// Upper bound on every positive parameter.
    pub upper: f64,
    /// Half-width (log units) of the box random restarts are drawn from.
    pub restart_spread: f64,
    /// Hard cap on objective evaluations per start.
    pub max_evals: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            restarts: 5,
            max_sweeps: 60,
            initial_step: 1.0,
            min_step: 1e-3,
            lower: 1e-3,
            upper: 1e3,
            restart_spread: 2.0,
            max_evals: 4000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    /// False when no evaluation (including at the start point) was finite.
    pub any_finite: bool,
}

/// Maximizes `f` over the box `[lo, hi]^p` (coordinates are log-parameters).
///
/// Non-finite values count as `-inf`. The returned value is never below
/// `f(x0)`.
pub fn coordinate_search<F>(mut f: F, x0: &[f64], lo: f64, hi: f64, opts: &FitOptions) -> SearchResult
where
    F: FnMut(&[f64]) -> f64,
{
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let clamp = |v: f64| v.clamp(lo, hi);
    let start: Vec<f64> = x0.iter().map(|&v| clamp(v)).collect();

    let mut evaluations = 0usize;
    let mut eval = |x: &[f64], evaluations: &mut usize| {
        *evaluations += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::NEG_INFINITY
        }
    };

    let f_start = eval(&start, &mut evaluations);
    let mut best = (start.clone(), f_start);
    let mut any_finite = f_start.is_finite();

    for restart in 0..opts.restarts.max(1) {
        let mut x: Vec<f64> = if restart == 0 {
            start.clone()
        } else {
            start
                .iter()
                .map(|&v| clamp(v + rng.gen_range(-opts.restart_spread..=opts.restart_spread)))
                .collect()
        };
        let budget_end = evaluations + opts.max_evals;
        let mut fx = if restart == 0 {
            f_start
        } else {
            eval(&x, &mut evaluations)
        };
        let mut step = opts.initial_step;
        let mut sweeps = 0;
        'search: while step >= opts.min_step && sweeps < opts.max_sweeps {
            sweeps += 1;
            let mut improved = false;
            for i in 0..x.len() {
                for dir in [1.0, -1.0] {
                    let mut mult = 1.0;
                    let mut moved = false;
                    loop {
                        if evaluations >= budget_end {
                            break 'search;
                        }
                        let cand = clamp(x[i] + dir * step * mult);
                        if cand == x[i] {
                            break;
                        }
                        let old = x[i];
                        x[i] = cand;
                        let fc = eval(&x, &mut evaluations);
                        if fc > fx {
                            fx = fc;
                            moved = true;
                            mult *= 2.0;
                        } else {
                            x[i] = old;
                            break;
                        }
                    }
                    if moved {
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        any_finite |= fx.is_finite();
        if fx > best.1 {
            best = (x, fx);
        }
    }

    SearchResult {
        point: best.0,
        value: best.1,
        evaluations,
        any_finite,
    }
}
