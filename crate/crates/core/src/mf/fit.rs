use log::warn;

use super::{FidelityConfig, JointMfGp, MfHyperparams};
use crate::error::{Error, Result};
use crate::gp::KernelParams;
use crate::history::Observation;
use crate::optimize::{coordinate_search, FitOptions};

#[derive(Debug, Clone)]
pub struct JointFit {
    pub hyper: MfHyperparams,
    pub noise_variances: Vec<f64>,
    pub log_likelihood: f64,
    pub failed: bool,
}

/// Which parameters the data can inform: the target kernel always, a
/// discrepancy kernel or a noise level only when that level has observations.
struct Layout {
    dim: usize,
    eps_levels: Vec<usize>,
    noise_levels: Vec<usize>,
}

impl Layout {
    fn pack(&self, hyper: &MfHyperparams, noise: &[f64], floor: f64) -> Vec<f64> {
        let mut v = log_kernel(&hyper.target, floor);
        for &l in &self.eps_levels {
            v.extend(log_kernel(&hyper.discrepancies[l], floor));
        }
        v.extend(self.noise_levels.iter().map(|&l| noise[l].max(floor).ln()));
        v
    }

    fn unpack(&self, v: &[f64], base: &MfHyperparams, base_noise: &[f64]) -> (MfHyperparams, Vec<f64>) {
        let k = self.dim + 1;
        let mut hyper = base.clone();
        hyper.target = kernel_from_log(&v[..k]);
        for (i, &l) in self.eps_levels.iter().enumerate() {
            hyper.discrepancies[l] = kernel_from_log(&v[k * (i + 1)..k * (i + 2)]);
        }
        let off = k * (self.eps_levels.len() + 1);
        let mut noise = base_noise.to_vec();
        for (i, &l) in self.noise_levels.iter().enumerate() {
            noise[l] = v[off + i].exp();
        }
        (hyper, noise)
    }
}

fn log_kernel(k: &KernelParams, floor: f64) -> Vec<f64> {
    std::iter::once(k.signal_variance.max(floor).ln())
        .chain(k.lengthscales.iter().map(|l| l.ln()))
        .collect()
}

fn kernel_from_log(v: &[f64]) -> KernelParams {
    KernelParams {
        signal_variance: v[0].exp(),
        lengthscales: v[1..].iter().map(|x| x.exp()).collect(),
    }
}

/// Fits target and discrepancy kernels and per-level noise jointly by
/// maximizing the joint log marginal likelihood. The prior mean and costs are
/// kept fixed.
pub fn fit_joint(
    hyper: &MfHyperparams,
    config: &FidelityConfig,
    observations: &[Observation],
    opts: &FitOptions,
) -> Result<JointFit> {
    if observations.len() < 2 {
        return Err(Error::InvalidInput("fitting needs at least two observations".into()));
    }
    let m = config.levels();
    let layout = Layout {
        dim: hyper.dim(),
        eps_levels: (0..m - 1)
            .filter(|&l| observations.iter().any(|o| o.action.level == l))
            .collect(),
        noise_levels: (0..m)
            .filter(|&l| observations.iter().any(|o| o.action.level == l))
            .collect(),
    };

    let evaluate = |h: MfHyperparams, noise: Vec<f64>| -> f64 {
        let cfg = FidelityConfig {
            costs: config.costs.clone(),
            noise_variances: noise,
        };
        JointMfGp::with_observations(h, cfg, observations)
            .map(|g| g.log_marginal_likelihood())
            .unwrap_or(f64::NEG_INFINITY)
    };
    let init_value = evaluate(hyper.clone(), config.noise_variances.clone());

    let x0 = layout.pack(hyper, &config.noise_variances, opts.lower);
    let res = coordinate_search(
        |v| {
            let (h, n) = layout.unpack(v, hyper, &config.noise_variances);
            evaluate(h, n)
        },
        &x0,
        opts.lower.ln(),
        opts.upper.ln(),
        opts,
    );

    let keep_init = |failed| JointFit {
        hyper: hyper.clone(),
        noise_variances: config.noise_variances.clone(),
        log_likelihood: init_value,
        failed,
    };
    if !res.any_finite {
        warn!("joint hyperparameter fit: no evaluable candidate, keeping current values");
        return Ok(keep_init(true));
    }
    if res.value < init_value {
        return Ok(keep_init(false));
    }
    let (h, noise) = layout.unpack(&res.point, hyper, &config.noise_variances);
    Ok(JointFit {
        hyper: h,
        noise_variances: noise,
        log_likelihood: res.value,
        failed: false,
    })
}
