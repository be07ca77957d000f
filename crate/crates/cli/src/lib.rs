//! Subcommand implementations for the `mfbo` binary.
//!
//! Each command returns either a report (lines for standard output) or a
//! [`CliError`] carrying the exit code and a machine-readable category.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use mfbo::harness::{ExperimentOutput, GRID_POINTS};
use mfbo::{
    aggregate, cost_grid, generate_synthetic, load_tabular, persist, run_experiment, save_tabular, tabular_shape,
    ExperimentConfig, Sense, SyntheticSpec,
};

pub const EXIT_OK: i32 = 0;
/// Bad configuration or input data; nothing was run.
pub const EXIT_CONFIG: i32 = 1;
/// The experiment ran but at least one run failed, or outputs could not be
/// written.
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub category: String,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_CONFIG,
            category: "config".into(),
            message: message.into(),
        }
    }

    fn from_core(code: i32, e: mfbo::Error) -> Self {
        CliError {
            code,
            category: e.category().into(),
            message: e.to_string(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ERROR:{}: {}", self.category, self.message)
    }
}

impl std::error::Error for CliError {}

/// Reads a TOML experiment config. Relative dataset paths are resolved
/// against the config file's directory.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError {
        code: EXIT_CONFIG,
        category: "io".into(),
        message: format!("{}: {e}", path.display()),
    })?;
    let mut config: ExperimentConfig =
        toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {}", path.display(), e.message())))?;
    if let Some(dir) = path.parent() {
        config.resolve_paths(dir);
    }
    config.validate().map_err(|e| CliError::config(e.to_string()))?;
    Ok(config)
}

#[derive(Debug)]
pub struct RunReport {
    pub manifest_path: PathBuf,
    pub failed_runs: usize,
    pub lines: Vec<String>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        if self.failed_runs > 0 {
            EXIT_RUNTIME
        } else {
            EXIT_OK
        }
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

fn summary_lines(output: &ExperimentOutput, methods: &[String]) -> Vec<String> {
    methods
        .iter()
        .map(|m| {
            let runs: Vec<_> = output.traces.iter().filter(|t| &t.method == m).collect();
            let ok = runs.iter().filter(|t| !t.failed()).count();
            let regret = median(runs.iter().filter_map(|t| t.simple_regret).collect());
            format!(
                "{m}: {ok}/{} runs ok, median simple regret {}",
                runs.len(),
                regret.map_or("n/a".to_string(), |r| format!("{r:.6}"))
            )
        })
        .collect()
}

/// Runs the experiment described by `config_path` and writes all outputs
/// into `out_dir`.
pub fn cmd_run(
    config_path: &Path,
    out_dir: &Path,
    seed: Option<u64>,
    parallelism: usize,
) -> Result<RunReport, CliError> {
    let mut config = load_config(config_path)?;
    if let Some(s) = seed {
        config.base_seed = s;
    }
    let output = run_experiment(&config, parallelism.max(1)).map_err(|e| CliError::from_core(EXIT_CONFIG, e))?;
    let budget = output.budgets.iter().cloned().fold(0.0, f64::max);
    let curves = if output.traces.is_empty() {
        Vec::new()
    } else {
        aggregate(&output.traces, &cost_grid(budget, GRID_POINTS)).map_err(|e| CliError::from_core(EXIT_RUNTIME, e))?
    };
    let mut inputs = vec![config_path.to_path_buf()];
    inputs.extend(config.input_files());
    let manifest =
        persist(out_dir, &config, &output, &curves, &inputs).map_err(|e| CliError::from_core(EXIT_RUNTIME, e))?;
    let labels: Vec<String> = config.methods.iter().map(|m| m.default_label().to_string()).collect();
    let manifest_path = out_dir.join("manifest.json");
    let mut lines = vec![manifest_path.display().to_string()];
    lines.extend(summary_lines(&output, &labels));
    Ok(RunReport {
        manifest_path,
        failed_runs: manifest.failed_runs,
        lines,
    })
}

/// Samples a synthetic problem and writes it as a CSV table.
pub fn cmd_gen_synthetic(spec: &SyntheticSpec, out: &Path) -> Result<PathBuf, CliError> {
    let problem = generate_synthetic(spec).map_err(|e| CliError::from_core(EXIT_CONFIG, e))?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError {
            code: EXIT_CONFIG,
            category: "io".into(),
            message: format!("{}: {e}", dir.display()),
        })?;
    }
    save_tabular(&problem, out).map_err(|e| CliError::from_core(EXIT_CONFIG, e))?;
    Ok(out.to_path_buf())
}

/// Loads a dataset with the loader's full validation. Without costs, unit
/// costs matching the header are assumed.
pub fn cmd_validate(path: &Path, costs: Option<&[f64]>, sense: Sense) -> Result<String, CliError> {
    let fail = |e| CliError::from_core(EXIT_CONFIG, e);
    let costs = match costs {
        Some(c) => c.to_vec(),
        None => vec![1.0; tabular_shape(path).map_err(fail)?.1],
    };
    let p = load_tabular(path, &costs, sense).map_err(fail)?;
    Ok(format!(
        "{}: {} rows, {} design dims, {} fidelities",
        path.display(),
        p.len(),
        p.dim(),
        p.levels()
    ))
}
