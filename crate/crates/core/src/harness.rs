//! Seeded multi-repeat experiments: problem construction, policy runs,
//! best-so-far aggregation and on-disk persistence.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::history::History;
use crate::policies::{self, Method, ProblemOracle, Session, StopReason};
use crate::problems::{derive_seed, generate_synthetic, load_tabular, DiscreteMfProblem, Sense, SyntheticSpec};

/// Number of evenly spaced cost-grid points on `[0, Λ]`.
pub const GRID_POINTS: usize = 200;

const NOISE_STREAM: u64 = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSource {
    /// CSV table; values are standardized on load.
    Tabular {
        path: PathBuf,
        costs: Vec<f64>,
        sense: Sense,
        /// Observation-noise variance per level; noiseless when absent.
        #[serde(default)]
        noise_variances: Option<Vec<f64>>,
    },
    /// GP-sampled problem, redrawn for every repeat with seed
    /// `spec.seed + repeat`.
    Synthetic(SyntheticSpec),
}

fn default_multiplier() -> f64 {
    100.0
}

fn default_init_fraction() -> f64 {
    0.1
}

fn default_repeats() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSource,
    pub methods: Vec<Method>,
    /// Total budget as a multiple of the target-fidelity cost.
    #[serde(default = "default_multiplier")]
    pub budget_multiplier: f64,
    #[serde(default = "default_init_fraction")]
    pub init_fraction: f64,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub base_seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::InvalidInput("at least one method is required".into()));
        }
        let mut seen = HashSet::new();
        for m in &self.methods {
            if !seen.insert(m.default_label()) {
                return Err(Error::InvalidInput(format!("method `{}` listed twice", m.default_label())));
            }
        }
        if !(self.budget_multiplier.is_finite() && self.budget_multiplier > 0.0) {
            return Err(Error::InvalidInput("budget_multiplier must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.init_fraction) {
            return Err(Error::InvalidInput("init_fraction must lie in [0, 1)".into()));
        }
        if self.repeats == 0 {
            return Err(Error::InvalidInput("repeats must be at least 1".into()));
        }
        match &self.problem {
            ProblemSource::Synthetic(spec) => spec.validate(),
            ProblemSource::Tabular {
                costs, noise_variances, ..
            } => {
                let noise = noise_variances.clone().unwrap_or_else(|| vec![0.0; costs.len()]);
                crate::mf::FidelityConfig::new(costs.clone(), noise).map(|_| ())
            }
        }
    }

    /// Makes a relative tabular path relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let ProblemSource::Tabular { path, .. } = &mut self.problem {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }

    /// Input files whose checksums go into the manifest.
    pub fn input_files(&self) -> Vec<PathBuf> {
        match &self.problem {
            ProblemSource::Tabular { path, .. } => vec![path.clone()],
            ProblemSource::Synthetic(_) => Vec::new(),
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.repeats as u64).map(|r| self.base_seed.wrapping_add(r)).collect()
    }
}

/// Builds the problem for one repeat.
pub fn build_problem(source: &ProblemSource, repeat: usize) -> Result<DiscreteMfProblem> {
    match source {
        ProblemSource::Tabular {
            path,
            costs,
            sense,
            noise_variances,
        } => {
            let p = load_tabular(path, costs, *sense)?;
            match noise_variances {
                Some(nv) => p.with_config(crate::mf::FidelityConfig::new(costs.clone(), nv.clone())?),
                None => Ok(p),
            }
        }
        ProblemSource::Synthetic(spec) => generate_synthetic(&SyntheticSpec {
            seed: spec.seed.wrapping_add(repeat as u64),
            ..spec.clone()
        }),
    }
}

/// One oracle query as recorded in a trace. Values are in the problem's
/// original units and sense.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub row: usize,
    /// Zero-based fidelity level.
    pub level: usize,
    pub cost_charged: f64,
    pub cumulative_cost: f64,
    pub value: f64,
    /// Best target-fidelity value so far; absent before the first one.
    pub best_so_far: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationRecord {
    pub best_observed_row: Option<usize>,
    pub best_observed_value: Option<f64>,
    pub posterior_best_row: Option<usize>,
    pub posterior_best_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub method: String,
    pub seed: u64,
    pub events: Vec<TraceEvent>,
    pub init_len: usize,
    pub recommendation: RecommendationRecord,
    /// Gap between the best target value in the table and the table value
    /// at the best observed row, in original units (always nonnegative).
    pub simple_regret: Option<f64>,
    pub explore_stops: Vec<StopReason>,
    pub error: Option<String>,
}

impl RunTrace {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }

    /// `(cumulative cost, best so far)` at every event once a target-fidelity
    /// value exists.
    pub fn best_so_far_curve(&self) -> Vec<(f64, f64)> {
        self.events
            .iter()
            .filter_map(|e| e.best_so_far.map(|b| (e.cumulative_cost, b)))
            .collect()
    }

    pub fn total_cost(&self) -> f64 {
        self.events.last().map_or(0.0, |e| e.cumulative_cost)
    }

    /// Best-so-far value at `cost` by carrying the last value forward.
    pub fn value_at(&self, cost: f64) -> Option<f64> {
        let mut out = None;
        for e in &self.events {
            if e.cumulative_cost > cost {
                break;
            }
            if e.best_so_far.is_some() {
                out = e.best_so_far;
            }
        }
        out
    }
}

fn build_trace(
    method: &str,
    seed: u64,
    problem: &DiscreteMfProblem,
    run: &policies::PolicyRun,
) -> RunTrace {
    let sense = problem.sense();
    let target = problem.config().target_level();
    let raw = |utility: f64| problem.report_value(sense.sign() * utility);
    let mut best: Option<f64> = None;
    let mut cumulative = 0.0;
    let events = run
        .history
        .iter()
        .zip(&run.rows)
        .map(|(o, &row)| {
            cumulative += o.cost_charged;
            let value = raw(o.value);
            if o.action.level == target && best.map_or(true, |b| sense.is_better(value, b)) {
                best = Some(value);
            }
            TraceEvent {
                row,
                level: o.action.level,
                cost_charged: o.cost_charged,
                cumulative_cost: cumulative,
                value,
                best_so_far: best,
            }
        })
        .collect();
    let rec = &run.recommendation;
    let table_best = problem.best_target_value();
    let simple_regret = rec
        .best_observed
        .map(|(row, _)| (problem.report_value(table_best) - problem.report_value(problem.values()[row][target])).abs());
    RunTrace {
        method: method.to_string(),
        seed,
        events,
        init_len: run.init_len,
        recommendation: RecommendationRecord {
            best_observed_row: rec.best_observed.map(|r| r.0),
            best_observed_value: rec.best_observed.map(|r| raw(r.1)),
            posterior_best_row: rec.posterior_best.map(|r| r.0),
            posterior_best_mean: rec.posterior_best.map(|r| raw(r.1)),
        },
        simple_regret,
        explore_stops: run.explore_stops.clone(),
        error: run.error.clone(),
    }
}

/// Total budget `Λ = multiplier · c_m` for a problem.
pub fn total_budget(config: &ExperimentConfig, problem: &DiscreteMfProblem) -> f64 {
    config.budget_multiplier * problem.config().target_cost()
}

/// Initialization queries a method would make, as a standalone history.
pub fn initialize(
    method: &Method,
    budget: f64,
    init_fraction: f64,
    problem: &DiscreteMfProblem,
    seed: u64,
) -> Result<History> {
    let (level, count) = method.init_plan(problem.config(), budget, init_fraction);
    if count == 0 {
        warn!("no initialization query is affordable for {}", method.default_label());
    }
    let mut oracle = ProblemOracle::new(problem, derive_seed(&[seed, NOISE_STREAM]));
    let mut session = Session::new(&mut oracle, budget)?;
    policies::initialize(&mut session, level, count, derive_seed(&[seed, 1]))?;
    Ok(session.into_parts().0)
}

/// Runs one method on one problem with the given seed.
pub fn run_single(method: &Method, problem: &DiscreteMfProblem, budget: f64, init_fraction: f64, seed: u64) -> RunTrace {
    let mut oracle = ProblemOracle::new(problem, derive_seed(&[seed, NOISE_STREAM]));
    let label = method.default_label();
    match policies::run_method(method, &mut oracle, budget, init_fraction, seed) {
        Ok(run) => build_trace(label, seed, problem, &run),
        Err(e) => RunTrace {
            method: label.to_string(),
            seed,
            events: Vec::new(),
            init_len: 0,
            recommendation: RecommendationRecord {
                best_observed_row: None,
                best_observed_value: None,
                posterior_best_row: None,
                posterior_best_mean: None,
            },
            simple_regret: None,
            explore_stops: Vec::new(),
            error: Some(e.to_string()),
        },
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub traces: Vec<RunTrace>,
    /// Budget of each repeat (problems may differ between repeats).
    pub budgets: Vec<f64>,
    pub wall_clock_seconds: f64,
}

/// Runs every method on every repeat using at most `parallelism` threads.
/// Traces are ordered by method, then repeat, independent of scheduling.
pub fn run_experiment(config: &ExperimentConfig, parallelism: usize) -> Result<ExperimentOutput> {
    config.validate()?;
    let start = Instant::now();
    let problems: Vec<Arc<DiscreteMfProblem>> = match &config.problem {
        ProblemSource::Tabular { .. } => {
            let p = Arc::new(build_problem(&config.problem, 0)?);
            vec![p; config.repeats]
        }
        ProblemSource::Synthetic(_) => (0..config.repeats)
            .map(|r| build_problem(&config.problem, r).map(Arc::new))
            .collect::<Result<_>>()?,
    };
    let budgets: Vec<f64> = problems.iter().map(|p| total_budget(config, p)).collect();
    let seeds = config.seeds();
    let jobs: Vec<(usize, usize)> = (0..config.methods.len())
        .flat_map(|m| (0..config.repeats).map(move |r| (m, r)))
        .collect();
    let run = |&(m, r): &(usize, usize)| {
        let method = &config.methods[m];
        info!("running {} seed {}", method.default_label(), seeds[r]);
        run_single(method, &problems[r], budgets[r], config.init_fraction, seeds[r])
    };
    let traces = if parallelism <= 1 {
        jobs.iter().map(run).collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(parallelism)
            .build()
            .map_err(|e| Error::InvalidInput(format!("cannot build thread pool: {e}")))?
            .install(|| jobs.par_iter().map(run).collect())
    };
    Ok(ExperimentOutput {
        traces,
        budgets,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}

/// `points` evenly spaced costs on `[0, budget]`.
pub fn cost_grid(budget: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![budget],
        _ => (0..points)
            .map(|i| {
                if i + 1 == points {
                    budget
                } else {
                    budget * i as f64 / (points - 1) as f64
                }
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateCurve {
    pub method: String,
    pub cost: Vec<f64>,
    /// Mean best-so-far over runs that have a value at that cost.
    pub mean: Vec<Option<f64>>,
    /// Sample standard deviation over `sqrt(defined_count)`; needs two
    /// defined runs.
    pub stderr: Vec<Option<f64>>,
    pub defined_count: Vec<usize>,
}

/// Step-interpolates the best-so-far curve of every successful trace onto
/// `grid` and averages per method, in order of first appearance.
pub fn aggregate(traces: &[RunTrace], grid: &[f64]) -> Result<Vec<AggregateCurve>> {
    if traces.is_empty() {
        return Err(Error::InvalidInput("no traces to aggregate".into()));
    }
    let mut methods: Vec<&str> = Vec::new();
    for t in traces {
        if !methods.contains(&t.method.as_str()) {
            methods.push(&t.method);
        }
    }
    Ok(methods
        .into_iter()
        .map(|method| {
            let runs: Vec<&RunTrace> = traces.iter().filter(|t| t.method == method && !t.failed()).collect();
            let mut curve = AggregateCurve {
                method: method.to_string(),
                cost: grid.to_vec(),
                mean: Vec::with_capacity(grid.len()),
                stderr: Vec::with_capacity(grid.len()),
                defined_count: Vec::with_capacity(grid.len()),
            };
            for &g in grid {
                let vals: Vec<f64> = runs.iter().filter_map(|t| t.value_at(g)).collect();
                let n = vals.len();
                curve.defined_count.push(n);
                if n == 0 {
                    curve.mean.push(None);
                    curve.stderr.push(None);
                    continue;
                }
                let mean = vals.iter().sum::<f64>() / n as f64;
                curve.mean.push(Some(mean));
                curve.stderr.push((n >= 2).then(|| {
                    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                    var.sqrt() / (n as f64).sqrt()
                }));
            }
            curve
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileChecksum {
    pub path: PathBuf,
    pub sha256: String,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: String,
    pub seed: u64,
    pub status: RunStatus,
    pub error: Option<String>,
    pub trace_file: String,
    pub rows: Vec<usize>,
    pub init_len: usize,
    pub recommendation: RecommendationRecord,
    pub simple_regret: Option<f64>,
    pub explore_stops: Vec<StopReason>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub budgets: Vec<f64>,
    pub inputs: Vec<FileChecksum>,
    pub wall_clock_seconds: f64,
    pub failed_runs: usize,
    pub runs: Vec<RunRecord>,
    pub curve_files: Vec<String>,
}

fn trace_file_name(t: &RunTrace) -> String {
    format!("trace_{}_{}.csv", t.method, t.seed)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut wr = csv::Writer::from_writer(std::io::BufWriter::new(file));
    wr.write_record(header)?;
    for r in rows {
        wr.write_record(&r)?;
    }
    wr.flush().map_err(|e| Error::io(path, e))
}

const TRACE_HEADER: [&str; 6] = ["event_index", "level", "cost_charged", "cumulative_cost", "value", "best_so_far"];
const CURVE_HEADER: [&str; 4] = ["cost", "mean", "stderr", "defined_count"];

/// Writes trace and curve CSVs plus `manifest.json` into `out_dir`.
pub fn persist(
    out_dir: &Path,
    config: &ExperimentConfig,
    output: &ExperimentOutput,
    curves: &[AggregateCurve],
    inputs: &[PathBuf],
) -> Result<Manifest> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut runs = Vec::with_capacity(output.traces.len());
    for t in &output.traces {
        let name = trace_file_name(t);
        write_csv(
            &out_dir.join(&name),
            &TRACE_HEADER,
            t.events.iter().enumerate().map(|(i, e)| {
                vec![
                    i.to_string(),
                    (e.level + 1).to_string(),
                    e.cost_charged.to_string(),
                    e.cumulative_cost.to_string(),
                    e.value.to_string(),
                    fmt_opt(e.best_so_far),
                ]
            }),
        )?;
        runs.push(RunRecord {
            method: t.method.clone(),
            seed: t.seed,
            status: if t.failed() { RunStatus::Failed } else { RunStatus::Ok },
            error: t.error.clone(),
            trace_file: name,
            rows: t.events.iter().map(|e| e.row).collect(),
            init_len: t.init_len,
            recommendation: t.recommendation.clone(),
            simple_regret: t.simple_regret,
            explore_stops: t.explore_stops.clone(),
        });
    }
    let mut curve_files = Vec::with_capacity(curves.len());
    for c in curves {
        let name = format!("curve_{}.csv", c.method);
        write_csv(
            &out_dir.join(&name),
            &CURVE_HEADER,
            (0..c.cost.len()).map(|i| {
                vec![
                    c.cost[i].to_string(),
                    fmt_opt(c.mean[i]),
                    fmt_opt(c.stderr[i]),
                    c.defined_count[i].to_string(),
                ]
            }),
        )?;
        curve_files.push(name);
    }
    let manifest = Manifest {
        config: config.clone(),
        seeds: config.seeds(),
        budgets: output.budgets.clone(),
        inputs: inputs
            .iter()
            .map(|p| {
                Ok(FileChecksum {
                    path: p.clone(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<Result<_>>()?,
        wall_clock_seconds: output.wall_clock_seconds,
        failed_runs: output.traces.iter().filter(|t| t.failed()).count(),
        runs,
        curve_files,
    };
    let path = out_dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

fn parse_opt(s: &str, path: &Path, row: usize, column: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| Error::Parse {
        row,
        column: format!("{}:{column}", path.display()),
        message: format!("not a number: `{s}`"),
    })
}

fn read_csv(path: &Path, header: &[&str]) -> Result<Vec<Vec<String>>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(std::io::BufReader::new(file));
    let found: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if found != header {
        return Err(Error::Parse {
            row: 1,
            column: path.display().to_string(),
            message: format!("unexpected header {found:?}"),
        });
    }
    rdr.records()
        .map(|r| Ok(r?.iter().map(str::to_string).collect()))
        .collect()
}

fn need(v: Option<f64>, path: &Path, row: usize, column: &str) -> Result<f64> {
    v.ok_or_else(|| Error::Parse {
        row,
        column: format!("{}:{column}", path.display()),
        message: "missing value".into(),
    })
}

/// Reads back what [`persist`] wrote.
pub fn load(out_dir: &Path) -> Result<(Manifest, Vec<RunTrace>, Vec<AggregateCurve>)> {
    let mpath = out_dir.join("manifest.json");
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let mut traces = Vec::with_capacity(manifest.runs.len());
    for run in &manifest.runs {
        let path = out_dir.join(&run.trace_file);
        let rows = read_csv(&path, &TRACE_HEADER)?;
        Error::check_dim(run.rows.len(), rows.len())?;
        let mut events = Vec::with_capacity(rows.len());
        for (i, (r, &row)) in rows.iter().zip(&run.rows).enumerate() {
            let line = i + 2;
            let level: usize = r[1].parse().map_err(|_| Error::Parse {
                row: line,
                column: format!("{}:level", path.display()),
                message: format!("not a level: `{}`", r[1]),
            })?;
            events.push(TraceEvent {
                row,
                level: level.saturating_sub(1),
                cost_charged: need(parse_opt(&r[2], &path, line, "cost_charged")?, &path, line, "cost_charged")?,
                cumulative_cost: need(
                    parse_opt(&r[3], &path, line, "cumulative_cost")?,
                    &path,
                    line,
                    "cumulative_cost",
                )?,
                value: need(parse_opt(&r[4], &path, line, "value")?, &path, line, "value")?,
                best_so_far: parse_opt(&r[5], &path, line, "best_so_far")?,
            });
        }
        traces.push(RunTrace {
            method: run.method.clone(),
            seed: run.seed,
            events,
            init_len: run.init_len,
            recommendation: run.recommendation.clone(),
            simple_regret: run.simple_regret,
            explore_stops: run.explore_stops.clone(),
            error: run.error.clone(),
        });
    }
    let mut curves = Vec::with_capacity(manifest.curve_files.len());
    for name in &manifest.curve_files {
        let path = out_dir.join(name);
        let method = name
            .strip_prefix("curve_")
            .and_then(|s| s.strip_suffix(".csv"))
            .unwrap_or(name)
            .to_string();
        let mut c = AggregateCurve {
            method,
            cost: Vec::new(),
            mean: Vec::new(),
            stderr: Vec::new(),
            defined_count: Vec::new(),
        };
        for (i, r) in read_csv(&path, &CURVE_HEADER)?.iter().enumerate() {
            let line = i + 2;
            c.cost.push(need(parse_opt(&r[0], &path, line, "cost")?, &path, line, "cost")?);
            c.mean.push(parse_opt(&r[1], &path, line, "mean")?);
            c.stderr.push(parse_opt(&r[2], &path, line, "stderr")?);
            c.defined_count.push(r[3].parse().map_err(|_| Error::Parse {
                row: line,
                column: format!("{}:defined_count", path.display()),
                message: format!("not a count: `{}`", r[3]),
            })?);
        }
        curves.push(c);
    }
    Ok((manifest, traces, curves))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(method: &str, points: &[(f64, usize, f64)]) -> RunTrace {
        let mut best: Option<f64> = None;
        let mut cum = 0.0;
        let events = points
            .iter()
            .map(|&(cost, level, value)| {
                cum += cost;
                if level == 1 {
                    best = Some(best.map_or(value, |b: f64| b.max(value)));
                }
                TraceEvent {
                    row: 0,
                    level,
                    cost_charged: cost,
                    cumulative_cost: cum,
                    value,
                    best_so_far: best,
                }
            })
            .collect();
        RunTrace {
            method: method.into(),
            seed: 0,
            events,
            init_len: 0,
            recommendation: RecommendationRecord {
                best_observed_row: None,
                best_observed_value: None,
                posterior_best_row: None,
                posterior_best_mean: None,
            },
            simple_regret: None,
            explore_stops: Vec::new(),
            error: None,
        }
    }

    #[test]
    fn grid_has_exact_endpoints() {
        let g = cost_grid(900.0, GRID_POINTS);
        assert_eq!(g.len(), 200);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[199], 900.0);
    }

    #[test]
    fn aggregate_mean_and_stderr() {
        let a = trace("m", &[(1.0, 1, 1.0)]);
        let b = trace("m", &[(1.0, 1, 3.0)]);
        let c = aggregate(&[a, b], &[0.5, 1.0, 2.0]).unwrap();
        assert_eq!(c[0].mean, vec![None, Some(2.0), Some(2.0)]);
        assert!((c[0].stderr[1].unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(c[0].defined_count, vec![0, 2, 2]);
    }

    #[test]
    fn low_fidelity_events_never_define_the_curve() {
        let t = trace("m", &[(1.0, 0, 100.0), (3.0, 1, 2.0)]);
        assert_eq!(t.value_at(1.0), None);
        assert_eq!(t.value_at(4.0), Some(2.0));
        assert!(aggregate(&[], &[1.0]).is_err());
    }

    #[test]
    fn failed_runs_are_excluded() {
        let mut bad = trace("m", &[(1.0, 1, 10.0)]);
        bad.error = Some("boom".into());
        let good = trace("m", &[(1.0, 1, 1.0)]);
        let c = aggregate(&[bad, good], &[1.0]).unwrap();
        assert_eq!(c[0].mean, vec![Some(1.0)]);
    }
}
