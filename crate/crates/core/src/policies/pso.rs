use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::acquisition::{bounding_box, nearest_candidate};
use super::Session;
use crate::error::{Error, Result};

/// Constriction-coefficient particle swarm settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsoParams {
    pub particles: usize,
    /// Swarm iterations; unlimited (until the budget runs out) when absent.
    pub iterations: Option<usize>,
    /// Constriction coefficient applied to the whole velocity update.
    pub chi: f64,
    /// Cognitive and social acceleration before constriction.
    pub phi: f64,
    /// Velocity limit as a fraction of each box width.
    pub velocity_fraction: f64,
}

impl Default for PsoParams {
    fn default() -> Self {
        PsoParams {
            particles: 10,
            iterations: None,
            chi: 0.7298,
            phi: 2.05,
            velocity_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PsoResult {
    pub best_position: Vec<f64>,
    pub best_value: f64,
    pub evaluations: usize,
    /// True when the objective asked to stop before all iterations ran.
    pub stopped_early: bool,
}

/// Maximizes `f` over a box with `particles × iterations` evaluations. The
/// objective returns `None` to end the search early.
///
/// Velocities follow `v ← χ(v + φ r₁ (p − x) + φ r₂ (g − x))`, are clamped
/// per coordinate and positions are clamped to the box.
pub fn pso_maximize<F>(mut f: F, bounds: &[(f64, f64)], params: &PsoParams, iterations: usize, seed: u64) -> Result<PsoResult>
where
    F: FnMut(&[f64]) -> Option<f64>,
{
    if params.particles == 0 {
        return Err(Error::InvalidInput("swarm needs at least one particle".into()));
    }
    if bounds.is_empty() || bounds.iter().any(|(lo, hi)| !(lo <= hi) || !lo.is_finite() || !hi.is_finite()) {
        return Err(Error::InvalidInput("invalid search box".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vmax: Vec<f64> = bounds.iter().map(|(lo, hi)| params.velocity_fraction * (hi - lo)).collect();
    let c = params.phi * params.chi;

    let mut x: Vec<Vec<f64>> = (0..params.particles)
        .map(|_| bounds.iter().map(|(lo, hi)| lo + rng.gen::<f64>() * (hi - lo)).collect())
        .collect();
    let mut v: Vec<Vec<f64>> = (0..params.particles)
        .map(|_| vmax.iter().map(|m| m * (2.0 * rng.gen::<f64>() - 1.0)).collect())
        .collect();
    let mut p = x.clone();
    let mut p_val = vec![f64::NEG_INFINITY; params.particles];
    let mut g = x[0].clone();
    let mut g_val = f64::NEG_INFINITY;
    let mut evaluations = 0;

    for it in 0..iterations {
        for i in 0..params.particles {
            if it > 0 {
                for j in 0..bounds.len() {
                    let (r1, r2): (f64, f64) = (rng.gen(), rng.gen());
                    let vel = params.chi * v[i][j] + c * r1 * (p[i][j] - x[i][j]) + c * r2 * (g[j] - x[i][j]);
                    v[i][j] = vel.clamp(-vmax[j], vmax[j]);
                    x[i][j] = (x[i][j] + v[i][j]).clamp(bounds[j].0, bounds[j].1);
                }
            }
            let Some(val) = f(&x[i]) else {
                return Ok(PsoResult {
                    best_position: g,
                    best_value: g_val,
                    evaluations,
                    stopped_early: true,
                });
            };
            evaluations += 1;
            if val > p_val[i] {
                p_val[i] = val;
                p[i] = x[i].clone();
            }
            if val > g_val {
                g_val = val;
                g = x[i].clone();
            }
        }
    }
    Ok(PsoResult {
        best_position: g,
        best_value: g_val,
        evaluations,
        stopped_early: false,
    })
}

/// Runs the swarm over the candidates' bounding box, querying the nearest
/// candidate at the target fidelity for every particle evaluation.
pub fn pso_run(session: &mut Session, params: &PsoParams, seed: u64) -> Result<()> {
    let target = session.config().target_level();
    let bounds = bounding_box(session.candidates());
    let mut failure = None;
    pso_maximize(
        |x| {
            if !session.can_afford(target) {
                return None;
            }
            let row = nearest_candidate(x, session.candidates())?;
            match session.query(row, target) {
                Ok(o) => Some(o.value),
                Err(e) => {
                    failure = Some(e);
                    None
                }
            }
        },
        &bounds,
        params,
        params.iterations.unwrap_or(usize::MAX),
        seed,
    )?;
    failure.map_or(Ok(()), Err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluation_count_and_bounds() {
        let bounds = [(-1.0, 2.0), (0.0, 0.5)];
        let params = PsoParams {
            particles: 4,
            ..PsoParams::default()
        };
        let mut seen = 0;
        let res = pso_maximize(
            |x| {
                seen += 1;
                assert!(x.iter().zip(&bounds).all(|(v, (lo, hi))| v >= lo && v <= hi));
                Some(-x[0] * x[0])
            },
            &bounds,
            &params,
            7,
            3,
        )
        .unwrap();
        assert_eq!(res.evaluations, 28);
        assert_eq!(seen, 28);
        assert!(!res.stopped_early);
    }

    #[test]
    fn single_particle_single_iteration() {
        let params = PsoParams {
            particles: 1,
            ..PsoParams::default()
        };
        let res = pso_maximize(|x| Some(x[0]), &[(0.0, 1.0)], &params, 1, 0).unwrap();
        assert_eq!(res.evaluations, 1);
        assert_eq!(res.best_value, res.best_position[0]);
    }

    #[test]
    fn stops_when_asked() {
        let mut left = 5;
        let res = pso_maximize(
            |x| {
                if left == 0 {
                    return None;
                }
                left -= 1;
                Some(x[0])
            },
            &[(0.0, 1.0)],
            &PsoParams::default(),
            usize::MAX,
            0,
        )
        .unwrap();
        assert_eq!(res.evaluations, 5);
        assert!(res.stopped_early);
    }
}
