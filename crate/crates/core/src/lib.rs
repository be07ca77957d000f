//! Multi-fidelity Bayesian optimization.
//!
//! The crate provides an additive multi-fidelity Gaussian-process model, an
//! information-gain-per-cost exploration routine for cheap fidelities paired
//! with single-fidelity GP-UCB at the target fidelity, the usual baselines
//! (GP-UCB, constriction PSO, random search), discrete multi-fidelity problems
//! (tabular CSV or GP-sampled) and a seeded benchmark harness.

pub mod error;
pub mod gp;
pub mod harness;
pub mod history;
pub mod linalg;
pub mod mf;
pub mod optimize;
pub mod policies;
pub mod problems;

pub use error::{Error, Result};
pub use gp::{
    build_posterior, fit_hyperparameters, log_marginal_likelihood, sample_prior, se_kernel, FitResult,
    GpPosterior, KernelParams,
};
pub use harness::{
    aggregate, cost_grid, persist, run_experiment, AggregateCurve, ExperimentConfig, Manifest, ProblemSource, RunTrace,
};
pub use history::{Action, History, Observation};
pub use mf::{
    cumulative_info_gain, fit_joint, info_gain, FidelityConfig, GainScorer, JointFit, JointMfGp, MfHyperparams,
    ReferenceSet,
};
pub use optimize::FitOptions;
pub use policies::{Method, ModelParams, PsoParams};
pub use problems::{
    generate_synthetic, load_tabular, parse_tabular, save_tabular, tabular_shape, DiscreteMfProblem, NoiseStream, Sense,
    Standardization, SyntheticSpec,
};
