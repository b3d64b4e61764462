//! Configuration-driven experiment runner: serializable experiment
//! descriptions, multi-replicate execution, geometric-mean and
//! exponential-moving-average post-processing, and CSV output with the full
//! configuration embedded in the header.

use crate::optim::{
    run_adam, run_full_gradient, run_saga, run_sgd, run_sglscv_variable, discretize_for_saga,
    memory_size_for_space, stable_memory_size, InitKind, OptimError, OptimizerTrace,
    SpaceSchedule, StepSchedule,
};
use crate::polybasis::{reference_rule, BasisContext, IndexSetKind, MultiIndexSet};
use crate::problems::{
    advdiff_5d, analytic_optimum, diffusion_1d, quadratic_toy, AdvDiffSpec, ControlProblem,
    DiffusionSpec, ProblemError,
};
use crate::sampling::{SamplingMeasure, SeedPolicy};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(String),
}

/// Test problem selection and parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    QuadraticToy {
        seed: u64,
    },
    Diffusion1d {
        a: f64,
        b: f64,
        beta: f64,
        mesh_n: usize,
    },
    AdvDiff5d {
        beta: f64,
        sigma: f64,
        mesh_n: usize,
    },
}

impl ProblemConfig {
    pub fn diffusion_default() -> Self {
        let spec = DiffusionSpec::default();
        ProblemConfig::Diffusion1d {
            a: spec.a,
            b: spec.b,
            beta: spec.beta,
            mesh_n: spec.mesh_n,
        }
    }

    pub fn advdiff_default() -> Self {
        let spec = AdvDiffSpec::default();
        ProblemConfig::AdvDiff5d {
            beta: spec.beta,
            sigma: spec.sigma,
            mesh_n: spec.mesh_n,
        }
    }

    fn build(&self) -> Result<BuiltProblem, BenchError> {
        match *self {
            ProblemConfig::QuadraticToy { seed } => Ok(BuiltProblem::Toy(quadratic_toy(seed))),
            ProblemConfig::Diffusion1d { a, b, beta, mesh_n } => Ok(BuiltProblem::Diffusion(
                diffusion_1d(DiffusionSpec { a, b, beta, mesh_n })?,
            )),
            ProblemConfig::AdvDiff5d { beta, sigma, mesh_n } => Ok(BuiltProblem::AdvDiff(
                advdiff_5d(AdvDiffSpec { beta, sigma, mesh_n })?,
            )),
        }
    }
}

enum BuiltProblem {
    Toy(crate::problems::QuadraticToy),
    Diffusion(crate::problems::Diffusion1d),
    AdvDiff(crate::problems::AdvDiff5d),
}

impl BuiltProblem {
    fn as_control(&self) -> &dyn ControlProblem {
        match self {
            BuiltProblem::Toy(p) => p,
            BuiltProblem::Diffusion(p) => p,
            BuiltProblem::AdvDiff(p) => p,
        }
    }

    fn index_kind(&self) -> IndexSetKind {
        match self {
            // One-parameter problems use graded polynomial spaces; the
            // five-parameter problem uses isotropic hyperbolic crosses.
            BuiltProblem::Toy(_) | BuiltProblem::Diffusion(_) => IndexSetKind::TotalDegree,
            BuiltProblem::AdvDiff(_) => IndexSetKind::HyperbolicCross,
        }
    }

    /// Maps a preset size parameter to the index-set constructor parameter:
    /// for one-dimensional spaces the parameter is the space dimension, for
    /// hyperbolic crosses it is the cross parameter itself.
    fn set_param(&self, size_param: usize) -> usize {
        match self {
            BuiltProblem::Toy(_) | BuiltProblem::Diffusion(_) => size_param.saturating_sub(1),
            BuiltProblem::AdvDiff(_) => size_param,
        }
    }
}

/// Memory-size rule for least-squares windows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum MemoryRule {
    /// Fixed count.
    Fixed { s: usize },
    /// Smallest size satisfying the sampling inequality at rate `r`.
    SamplingInequality { r: f64 },
    /// Concentration-calibrated size (see `stable_memory_size`).
    Concentration { safety: f64 },
    /// `ceil(mult * |set|) + add`.
    Proportional { mult: f64, add: usize },
}

impl MemoryRule {
    pub fn resolve(&self, ctx: &BasisContext, measure: SamplingMeasure) -> usize {
        let s = match *self {
            MemoryRule::Fixed { s } => s,
            MemoryRule::SamplingInequality { r } => memory_size_for_space(ctx, measure, r),
            MemoryRule::Concentration { safety } => stable_memory_size(ctx, measure, safety),
            MemoryRule::Proportional { mult, add } => {
                (mult * ctx.size() as f64).ceil() as usize + add
            }
        };
        s.max(ctx.size())
    }
}

/// Optimizer selection and parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerConfig {
    Sgd {
        schedule: StepSchedule,
    },
    Adam {
        tau: f64,
        beta1: f64,
        beta2: f64,
    },
    Saga {
        points_per_dim: usize,
        tau: f64,
    },
    FullGradient {
        points_per_dim: usize,
        tau: f64,
    },
    SglscvFixed {
        size_param: usize,
        measure: SamplingMeasure,
        step: StepSchedule,
        memory: MemoryRule,
    },
    SglscvVariable {
        size_params: Vec<usize>,
        min_gap: usize,
        measure: SamplingMeasure,
        step: StepSchedule,
        memory: MemoryRule,
    },
}

/// Where the reference solution for the error column comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceConfig {
    /// No reference; the error column is NaN.
    None,
    /// Closed-form optimum (quadratic toy, or the diffusion problem's
    /// analytic optimum, which is exact only up to discretization error).
    Analytic,
    /// Whitespace-separated floats read from a file.
    File { path: String },
    /// Deterministic full-gradient descent on a quadrature discretization,
    /// run to stationarity.
    FullGradientBootstrap {
        points_per_dim: usize,
        tau: f64,
        tol: f64,
        max_iterations: usize,
    },
}

/// Row-wise post-processing of replicate tables.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Aggregation {
    Raw,
    GeometricMean,
    Ema { lambda: f64 },
}

/// One experiment: a problem, an optimizer, replicates and post-processing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub problem: ProblemConfig,
    pub optimizer: OptimizerConfig,
    pub iterations: usize,
    pub replicates: usize,
    pub seed: u64,
    pub reference: ReferenceConfig,
    /// EMA smoothing constant applied to the aggregated error curve.
    pub ema: Option<f64>,
    /// Subsampling stride of the output rows (1 keeps every iteration).
    pub output_stride: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.iterations == 0 || self.replicates == 0 {
            return Err(BenchError::Config(
                "iterations and replicates must be positive".into(),
            ));
        }
        if self.output_stride == 0 {
            return Err(BenchError::Config("output_stride must be positive".into()));
        }
        if let Some(l) = self.ema {
            if !(0.0..=1.0).contains(&l) || l == 0.0 {
                return Err(BenchError::Config("ema lambda must lie in (0, 1]".into()));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        toml::from_str(text).map_err(|e| BenchError::Parse(e.to_string()))
    }
}

/// One output row; mirrors the CSV schema.
#[derive(Clone, Copy, Debug)]
pub struct ResultRow {
    pub iter: usize,
    pub grad_evals: f64,
    pub error: f64,
    pub objective: f64,
    pub m: usize,
    pub s: usize,
    pub tau: f64,
    pub cond_rate: f64,
}

/// Aggregated (or raw) result curve.
#[derive(Clone, Debug)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    pub aggregation: Aggregation,
}

impl ResultTable {
    fn from_trace(trace: &OptimizerTrace) -> ResultTable {
        ResultTable {
            rows: trace
                .rows
                .iter()
                .map(|r| ResultRow {
                    iter: r.iter,
                    grad_evals: r.grad_evals as f64,
                    error: r.error,
                    objective: r.objective,
                    m: r.m,
                    s: r.s,
                    tau: r.tau,
                    cond_rate: if r.conditioned { 1.0 } else { 0.0 },
                })
                .collect(),
            aggregation: Aggregation::Raw,
        }
    }

    pub fn final_error(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.error)
    }
}

/// Row-wise aggregation of aligned tables. Geometric mean combines
/// replicates; EMA smooths a single curve.
pub fn aggregate(tables: &[ResultTable], mode: Aggregation) -> Result<ResultTable, BenchError> {
    if tables.is_empty() {
        return Err(BenchError::Config("no tables to aggregate".into()));
    }
    let len = tables[0].rows.len();
    if tables.iter().any(|t| t.rows.len() != len) {
        return Err(BenchError::Config("iteration grids are not aligned".into()));
    }
    match mode {
        Aggregation::Raw => Ok(tables[0].clone()),
        Aggregation::GeometricMean => {
            let n = tables.len() as f64;
            let rows = (0..len)
                .map(|k| {
                    let mut log_error = 0.0;
                    let mut grad = 0.0;
                    let mut objective = 0.0;
                    let mut cond = 0.0;
                    for t in tables {
                        log_error += t.rows[k].error.max(1e-300).ln();
                        grad += t.rows[k].grad_evals;
                        objective += t.rows[k].objective;
                        cond += t.rows[k].cond_rate;
                    }
                    ResultRow {
                        error: (log_error / n).exp(),
                        grad_evals: grad / n,
                        objective: objective / n,
                        cond_rate: cond / n,
                        ..tables[0].rows[k]
                    }
                })
                .collect();
            Ok(ResultTable {
                rows,
                aggregation: Aggregation::GeometricMean,
            })
        }
        Aggregation::Ema { lambda } => {
            if tables.len() != 1 {
                return Err(BenchError::Config(
                    "EMA smoothing applies to a single table".into(),
                ));
            }
            if !(0.0..=1.0).contains(&lambda) || lambda == 0.0 {
                return Err(BenchError::Config("ema lambda must lie in (0, 1]".into()));
            }
            let mut rows = tables[0].rows.clone();
            let mut state = f64::NAN;
            for row in rows.iter_mut() {
                state = if state.is_nan() {
                    row.error
                } else {
                    (1.0 - lambda) * state + lambda * row.error
                };
                row.error = state;
            }
            Ok(ResultTable {
                rows,
                aggregation: Aggregation::Ema { lambda },
            })
        }
    }
}

fn read_reference_file(path: &str, dim: usize) -> Result<DVector<f64>, BenchError> {
    let text = std::fs::read_to_string(path)?;
    let values: Result<Vec<f64>, _> = text.split_whitespace().map(str::parse::<f64>).collect();
    let values = values.map_err(|e| BenchError::Parse(format!("reference file: {e}")))?;
    if values.len() != dim {
        return Err(BenchError::Config(format!(
            "reference file has {} values, control dimension is {dim}",
            values.len()
        )));
    }
    Ok(DVector::from_vec(values))
}

/// Resolves the reference control for the error column; the bootstrap also
/// returns its own descent trace so a matching full-gradient curve can be
/// reused instead of recomputed.
fn resolve_reference(
    config: &ExperimentConfig,
    built: &BuiltProblem,
) -> Result<(Option<DVector<f64>>, Option<OptimizerTrace>), BenchError> {
    let problem = built.as_control();
    match &config.reference {
        ReferenceConfig::None => Ok((None, None)),
        ReferenceConfig::Analytic => match built {
            BuiltProblem::Toy(p) => Ok((p.known_optimum(), None)),
            BuiltProblem::Diffusion(p) => {
                let (_, u) = analytic_optimum(p)?;
                Ok((Some(u), None))
            }
            BuiltProblem::AdvDiff(_) => Err(BenchError::Config(
                "the five-parameter problem has no analytic reference".into(),
            )),
        },
        ReferenceConfig::File { path } => {
            Ok((Some(read_reference_file(path, problem.control_dim())?), None))
        }
        ReferenceConfig::FullGradientBootstrap {
            points_per_dim,
            tau,
            tol,
            max_iterations,
        } => {
            let rule = reference_rule(problem.coords(), *points_per_dim)
                .map_err(|e| BenchError::Config(e.to_string()))?;
            let u0 = DVector::zeros(problem.control_dim());
            let trace =
                run_full_gradient(problem, &rule, *tau, &u0, *max_iterations, Some(*tol), None);
            Ok((Some(trace.final_control.clone()), Some(trace)))
        }
    }
}

fn run_replicate(
    config: &ExperimentConfig,
    built: &BuiltProblem,
    reference: Option<&DVector<f64>>,
    replicate: u64,
) -> Result<OptimizerTrace, BenchError> {
    let problem = built.as_control();
    let policy = SeedPolicy::new(config.seed);
    let u0 = DVector::zeros(problem.control_dim());
    let iters = config.iterations;
    let trace = match &config.optimizer {
        OptimizerConfig::Sgd { schedule } => {
            run_sgd(problem, schedule, &u0, iters, &policy, replicate, reference)
        }
        OptimizerConfig::Adam { tau, beta1, beta2 } => run_adam(
            problem, *tau, *beta1, *beta2, &u0, iters, &policy, replicate, reference,
        ),
        OptimizerConfig::Saga {
            points_per_dim,
            tau,
        } => {
            let fs = discretize_for_saga(problem, *points_per_dim)?;
            run_saga(&fs, *tau, &u0, iters, &policy, replicate, reference)
        }
        OptimizerConfig::FullGradient {
            points_per_dim,
            tau,
        } => {
            let rule = reference_rule(problem.coords(), *points_per_dim)
                .map_err(|e| BenchError::Config(e.to_string()))?;
            run_full_gradient(problem, &rule, *tau, &u0, iters, None, reference)
        }
        OptimizerConfig::SglscvFixed {
            size_param,
            measure,
            step,
            memory,
        } => {
            let set = MultiIndexSet::new(
                built.index_kind(),
                built.set_param(*size_param),
                problem.param_dim(),
            )
            .map_err(|e| BenchError::Config(e.to_string()))?;
            let ctx = BasisContext::new(set.clone(), problem.coords().to_vec());
            let s = memory.resolve(&ctx, *measure);
            let schedule = SpaceSchedule::fixed(set, *measure, s);
            run_sglscv_variable(
                problem,
                &schedule,
                step,
                &u0,
                iters,
                &policy,
                replicate,
                reference,
                InitKind::FrozenControl,
            )?
        }
        OptimizerConfig::SglscvVariable {
            size_params,
            min_gap,
            measure,
            step,
            memory,
        } => {
            let kind = built.index_kind();
            let params: Vec<usize> =
                size_params.iter().map(|&p| built.set_param(p)).collect();
            let schedule = SpaceSchedule::auto(
                kind,
                problem.param_dim(),
                &params,
                *measure,
                |m| {
                    // Resolve through a throwaway context of matching size.
                    m.max(
                        memory.resolve(
                            &BasisContext::new(
                                MultiIndexSet::new(IndexSetKind::TotalDegree, 0, 1).unwrap(),
                                vec![crate::polybasis::CoordinateMeasure::Uniform {
                                    lo: -1.0,
                                    hi: 1.0,
                                }],
                            ),
                            *measure,
                        ),
                    )
                },
                *min_gap,
            )?;
            run_sglscv_variable(
                problem,
                &schedule,
                step,
                &u0,
                iters,
                &policy,
                replicate,
                reference,
                InitKind::FrozenControl,
            )?
        }
    };
    Ok(trace)
}

/// Resolves the reference control for an experiment. Presets share
/// bootstraps across experiments with identical problem and reference
/// blocks, so this is public.
pub fn compute_reference(config: &ExperimentConfig) -> Result<Option<DVector<f64>>, BenchError> {
    let built = config.problem.build()?;
    let (reference, _) = resolve_reference(config, &built)?;
    Ok(reference)
}

/// Executes one experiment: all replicates (concurrently), aggregation, and
/// EMA post-processing.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultTable, BenchError> {
    config.validate()?;
    let built = config.problem.build()?;
    let (reference, _) = resolve_reference(config, &built)?;
    run_experiment_inner(config, &built, reference.as_ref())
}

/// Executes one experiment against a precomputed reference solution.
pub fn run_experiment_with_reference(
    config: &ExperimentConfig,
    reference: Option<&DVector<f64>>,
) -> Result<ResultTable, BenchError> {
    config.validate()?;
    let built = config.problem.build()?;
    run_experiment_inner(config, &built, reference)
}

fn run_experiment_inner(
    config: &ExperimentConfig,
    built: &BuiltProblem,
    reference: Option<&DVector<f64>>,
) -> Result<ResultTable, BenchError> {
    let tables: Vec<ResultTable> = if config.replicates == 1 {
        vec![ResultTable::from_trace(&run_replicate(
            config, built, reference, 0,
        )?)]
    } else {
        let mut results: Vec<Option<Result<ResultTable, BenchError>>> =
            (0..config.replicates).map(|_| None).collect();
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for rep in 0..config.replicates {
                handles.push((
                    rep,
                    scope.spawn(move || {
                        run_replicate(config, built, reference, rep as u64)
                            .map(|t| ResultTable::from_trace(&t))
                    }),
                ));
            }
            for (rep, handle) in handles {
                results[rep] = Some(handle.join().expect("replicate thread panicked"));
            }
        });
        results
            .into_iter()
            .map(|r| r.expect("replicate result"))
            .collect::<Result<Vec<_>, _>>()?
    };

    let mut table = if tables.len() == 1 {
        tables.into_iter().next().unwrap()
    } else {
        aggregate(&tables, Aggregation::GeometricMean)?
    };
    if let Some(lambda) = config.ema {
        table = aggregate(&[table], Aggregation::Ema { lambda })?;
    }
    if config.output_stride > 1 {
        table.rows = table
            .rows
            .iter()
            .copied()
            .filter(|r| r.iter % config.output_stride == 0)
            .collect();
    }
    Ok(table)
}

/// Runs every experiment of a preset, sharing reference solutions between
/// experiments with identical problem and reference blocks, and writes one
/// CSV per experiment into `out_dir`. Returns the written paths.
pub fn run_preset(
    preset: &Preset,
    out_dir: &Path,
    seed_override: Option<u64>,
    replicate_override: Option<usize>,
) -> Result<Vec<std::path::PathBuf>, BenchError> {
    let mut reference_cache: Vec<(String, Option<DVector<f64>>)> = Vec::new();
    let mut written = Vec::new();
    for experiment in &preset.experiments {
        let mut config = experiment.clone();
        if let Some(seed) = seed_override {
            config.seed = seed;
        }
        if let Some(reps) = replicate_override {
            config.replicates = reps;
        }
        let key = format!(
            "{}|{}",
            toml::to_string(&config.problem).expect("serializes"),
            toml::to_string(&config.reference).expect("serializes"),
        );
        let reference = match reference_cache.iter().find(|(k, _)| *k == key) {
            Some((_, r)) => r.clone(),
            None => {
                let r = compute_reference(&config)?;
                reference_cache.push((key, r.clone()));
                r
            }
        };
        let table = run_experiment_with_reference(&config, reference.as_ref())?;
        let path = out_dir.join(format!("{}.csv", config.name));
        write_csv(&path, &table, &config)?;
        written.push(path);
    }
    Ok(written)
}

/// Writes a result table as CSV with a `#`-prefixed header block embedding
/// the full serialized configuration; the write is atomic (temp file plus
/// rename).
pub fn write_csv(
    path: &Path,
    table: &ResultTable,
    config: &ExperimentConfig,
) -> Result<(), BenchError> {
    let mut text = String::new();
    for line in config.to_toml().lines() {
        text.push_str("# ");
        text.push_str(line);
        text.push('\n');
    }
    text.push_str(&format!("# seed = {}\n", config.seed));
    text.push_str("iter,grad_evals,error,objective,m,s,tau,cond_rate\n");
    for row in &table.rows {
        text.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e},{},{},{:.16e},{:.16e}\n",
            row.iter, row.grad_evals, row.error, row.objective, row.m, row.s, row.tau, row.cond_rate
        ));
    }
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension("csv.tmp");
    {
        let mut file = std::fs::File::create(&tmp)?;
        file.write_all(text.as_bytes())?;
        file.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// A named bundle of experiments reproducing one figure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preset {
    pub name: String,
    pub experiments: Vec<ExperimentConfig>,
}

/// The built-in experiment presets: `fig1`, `fig2`, `fig4`, `fig5`.
pub fn presets() -> Vec<Preset> {
    let diffusion_reference = ReferenceConfig::FullGradientBootstrap {
        points_per_dim: 50,
        tau: 40.0,
        tol: 1e-15,
        max_iterations: 200_000,
    };
    let advdiff_reference = ReferenceConfig::FullGradientBootstrap {
        points_per_dim: 5,
        tau: 100.0,
        tol: 1e-11,
        max_iterations: 120_000,
    };

    // Fixed-space steps tuned for m = 6, 16, 21.
    let fig1 = Preset {
        name: "fig1".into(),
        experiments: [(6usize, 0.1556), (16, 0.1252), (21, 0.1146)]
            .into_iter()
            .map(|(m, tau)| ExperimentConfig {
                name: format!("fig1_m{m}"),
                problem: ProblemConfig::diffusion_default(),
                optimizer: OptimizerConfig::SglscvFixed {
                    size_param: m,
                    measure: SamplingMeasure::Arcsine,
                    step: StepSchedule::Constant { tau },
                    memory: MemoryRule::Concentration { safety: 1.0 },
                },
                iterations: 20_000,
                replicates: 40,
                seed: 0x5161,
                reference: diffusion_reference.clone(),
                ema: None,
                output_stride: 1,
            })
            .collect(),
    };

    let variable_ladder: Vec<usize> = (1..=21).collect();
    let fig2 = Preset {
        name: "fig2".into(),
        experiments: vec![
            ExperimentConfig {
                name: "fig2_sgd".into(),
                problem: ProblemConfig::diffusion_default(),
                optimizer: OptimizerConfig::Sgd {
                    schedule: StepSchedule::RobbinsMonro { c0: 19.0, c1: 1e-3 },
                },
                iterations: 50_000,
                replicates: 40,
                seed: 0x5162,
                reference: diffusion_reference.clone(),
                ema: None,
                output_stride: 1,
            },
            ExperimentConfig {
                name: "fig2_adam".into(),
                problem: ProblemConfig::diffusion_default(),
                optimizer: OptimizerConfig::Adam {
                    tau: 0.01,
                    beta1: 0.9,
                    beta2: 0.99,
                },
                iterations: 50_000,
                replicates: 40,
                seed: 0x5162,
                reference: diffusion_reference.clone(),
                ema: None,
                output_stride: 1,
            },
            ExperimentConfig {
                name: "fig2_saga".into(),
                problem: ProblemConfig::diffusion_default(),
                optimizer: OptimizerConfig::Saga {
                    points_per_dim: 20,
                    tau: 0.0769,
                },
                iterations: 50_000,
                replicates: 40,
                seed: 0x5162,
                reference: diffusion_reference.clone(),
                ema: None,
                output_stride: 1,
            },
            ExperimentConfig {
                name: "fig2_sglscv_fixed_step".into(),
                problem: ProblemConfig::diffusion_default(),
                optimizer: OptimizerConfig::SglscvVariable {
                    size_params: variable_ladder.clone(),
                    min_gap: 300,
                    measure: SamplingMeasure::Arcsine,
                    step: StepSchedule::Constant { tau: 0.125 },
                    memory: MemoryRule::Concentration { safety: 1.0 },
                },
                iterations: 50_000,
                replicates: 40,
                seed: 0x5162,
                reference: diffusion_reference.clone(),
                ema: None,
                output_stride: 1,
            },
            ExperimentConfig {
                name: "fig2_sglscv_memory_step".into(),
                problem: ProblemConfig::diffusion_default(),
                optimizer: OptimizerConfig::SglscvVariable {
                    size_params: variable_ladder,
                    min_gap: 300,
                    measure: SamplingMeasure::Arcsine,
                    step: StepSchedule::MemoryLinked {
                        c0: 0.1165,
                        c1: 6.3433,
                    },
                    memory: MemoryRule::Concentration { safety: 1.0 },
                },
                iterations: 50_000,
                replicates: 40,
                seed: 0x5162,
                reference: diffusion_reference,
                ema: None,
                output_stride: 1,
            },
        ],
    };

    // Fixed-space steps tuned for the cross parameters 2, 5, 9.
    let fig4 = Preset {
        name: "fig4".into(),
        experiments: [(2usize, 100.0), (5, 50.0), (9, 40.0)]
            .into_iter()
            .map(|(m, tau)| ExperimentConfig {
                name: format!("fig4_m{m}"),
                problem: ProblemConfig::advdiff_default(),
                optimizer: OptimizerConfig::SglscvFixed {
                    size_param: m,
                    measure: SamplingMeasure::OptimalMixture,
                    step: StepSchedule::Constant { tau },
                    memory: MemoryRule::Concentration { safety: 1.0 },
                },
                iterations: 100_000,
                replicates: 1,
                seed: 0x5164,
                reference: advdiff_reference.clone(),
                ema: Some(0.01),
                output_stride: 10,
            })
            .collect(),
    };

    let fig5 = Preset {
        name: "fig5".into(),
        experiments: vec![
            ExperimentConfig {
                name: "fig5_saga5".into(),
                problem: ProblemConfig::advdiff_default(),
                optimizer: OptimizerConfig::Saga {
                    points_per_dim: 5,
                    tau: 100.0,
                },
                iterations: 100_000,
                replicates: 1,
                seed: 0x5165,
                reference: advdiff_reference.clone(),
                ema: Some(0.01),
                output_stride: 10,
            },
            ExperimentConfig {
                name: "fig5_saga8".into(),
                problem: ProblemConfig::advdiff_default(),
                optimizer: OptimizerConfig::Saga {
                    points_per_dim: 8,
                    tau: 100.0,
                },
                iterations: 100_000,
                replicates: 1,
                seed: 0x5165,
                reference: advdiff_reference.clone(),
                ema: Some(0.01),
                output_stride: 10,
            },
            ExperimentConfig {
                name: "fig5_sglscv_variable".into(),
                problem: ProblemConfig::advdiff_default(),
                optimizer: OptimizerConfig::SglscvVariable {
                    size_params: vec![2, 5, 8, 11, 14, 17],
                    min_gap: 1200,
                    measure: SamplingMeasure::OptimalMixture,
                    step: StepSchedule::MemoryLinked {
                        c0: 2.3e-4,
                        c1: 4.7e-3,
                    },
                    memory: MemoryRule::Concentration { safety: 1.0 },
                },
                iterations: 100_000,
                replicates: 1,
                seed: 0x5165,
                reference: advdiff_reference.clone(),
                ema: Some(0.01),
                output_stride: 10,
            },
            ExperimentConfig {
                name: "fig5_full_gradient".into(),
                problem: ProblemConfig::advdiff_default(),
                optimizer: OptimizerConfig::FullGradient {
                    points_per_dim: 5,
                    tau: 100.0,
                },
                iterations: 100_000,
                replicates: 1,
                seed: 0x5165,
                reference: advdiff_reference,
                ema: Some(0.01),
                output_stride: 10,
            },
        ],
    };

    vec![fig1, fig2, fig4, fig5]
}

pub fn preset_by_name(name: &str) -> Option<Preset> {
    presets().into_iter().find(|p| p.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_list_names() {
        let names: Vec<String> = presets().into_iter().map(|p| p.name).collect();
        assert_eq!(names, vec!["fig1", "fig2", "fig4", "fig5"]);
    }

    #[test]
    fn fig2_preset_contains_the_five_methods() {
        let fig2 = preset_by_name("fig2").unwrap();
        assert_eq!(fig2.experiments.len(), 5);
        assert!(matches!(
            fig2.experiments[0].optimizer,
            OptimizerConfig::Sgd {
                schedule: StepSchedule::RobbinsMonro { c0, c1 }
            } if c0 == 19.0 && c1 == 1e-3
        ));
        assert!(matches!(
            fig2.experiments[1].optimizer,
            OptimizerConfig::Adam { tau, beta1, beta2 } if tau == 0.01 && beta1 == 0.9 && beta2 == 0.99
        ));
        assert!(matches!(
            fig2.experiments[2].optimizer,
            OptimizerConfig::Saga { points_per_dim: 20, tau } if tau == 0.0769
        ));
        assert!(matches!(
            fig2.experiments[3].optimizer,
            OptimizerConfig::SglscvVariable {
                step: StepSchedule::Constant { tau },
                ..
            } if tau == 0.125
        ));
        assert!(matches!(
            fig2.experiments[4].optimizer,
            OptimizerConfig::SglscvVariable {
                step: StepSchedule::MemoryLinked { c0, c1 },
                ..
            } if c0 == 0.1165 && c1 == 6.3433
        ));
    }

    #[test]
    fn presets_round_trip_through_serialization() {
        for preset in presets() {
            let text = toml::to_string_pretty(&preset).unwrap();
            let back: Preset = toml::from_str(&text).unwrap();
            assert_eq!(preset, back);
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"
            name = "x"
            iterations = 10
            replicates = 1
            seed = 1
            output_stride = 1
            bogus = 3

            [problem]
            kind = "quadratic_toy"
            seed = 1

            [optimizer]
            kind = "adam"
            tau = 0.01
            beta1 = 0.9
            beta2 = 0.99

            [reference]
            source = "none"
        "#;
        assert!(ExperimentConfig::from_toml(text).is_err());
    }

    #[test]
    fn aggregate_geometric_mean_closed_forms() {
        let mk = |errors: Vec<f64>| ResultTable {
            rows: errors
                .into_iter()
                .enumerate()
                .map(|(k, e)| ResultRow {
                    iter: k,
                    grad_evals: k as f64 + 1.0,
                    error: e,
                    objective: 0.0,
                    m: 1,
                    s: 1,
                    tau: 0.1,
                    cond_rate: 1.0,
                })
                .collect(),
            aggregation: Aggregation::Raw,
        };
        let e = std::f64::consts::E;
        let a = mk(vec![e, 2.0]);
        let b = mk(vec![1.0 / e, 8.0]);
        let g = aggregate(&[a.clone(), b], Aggregation::GeometricMean).unwrap();
        assert!((g.rows[0].error - 1.0).abs() < 1e-12);
        assert!((g.rows[1].error - 4.0).abs() < 1e-12);
        // Geometric mean of identical replicates is the replicate.
        let same = aggregate(&[a.clone(), a.clone()], Aggregation::GeometricMean).unwrap();
        for (x, y) in same.rows.iter().zip(&a.rows) {
            assert!((x.error - y.error).abs() < 1e-14);
        }
        // Constant curves combine to the pointwise geometric mean.
        let c1 = mk(vec![2.0; 5]);
        let c2 = mk(vec![8.0; 5]);
        let gc = aggregate(&[c1, c2], Aggregation::GeometricMean).unwrap();
        for row in &gc.rows {
            assert!((row.error - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ema_unit_lambda_is_identity() {
        let table = ResultTable {
            rows: (0..10)
                .map(|k| ResultRow {
                    iter: k,
                    grad_evals: k as f64,
                    error: (k as f64 + 1.0).sin().abs() + 0.1,
                    objective: 0.0,
                    m: 0,
                    s: 0,
                    tau: 0.0,
                    cond_rate: 1.0,
                })
                .collect(),
            aggregation: Aggregation::Raw,
        };
        let smoothed = aggregate(&[table.clone()], Aggregation::Ema { lambda: 1.0 }).unwrap();
        for (a, b) in smoothed.rows.iter().zip(&table.rows) {
            assert_eq!(a.error, b.error);
        }
    }

    #[test]
    fn misaligned_grids_are_rejected() {
        let short = ResultTable {
            rows: vec![],
            aggregation: Aggregation::Raw,
        };
        let long = ResultTable {
            rows: vec![ResultRow {
                iter: 0,
                grad_evals: 1.0,
                error: 1.0,
                objective: 0.0,
                m: 0,
                s: 0,
                tau: 0.0,
                cond_rate: 1.0,
            }],
            aggregation: Aggregation::Raw,
        };
        assert!(aggregate(&[short, long], Aggregation::GeometricMean).is_err());
    }

    #[test]
    fn csv_round_trip_is_deterministic() {
        let config = ExperimentConfig {
            name: "unit".into(),
            problem: ProblemConfig::QuadraticToy { seed: 3 },
            optimizer: OptimizerConfig::Sgd {
                schedule: StepSchedule::Constant { tau: 0.05 },
            },
            iterations: 50,
            replicates: 1,
            seed: 9,
            reference: ReferenceConfig::Analytic,
            ema: None,
            output_stride: 1,
        };
        let table1 = run_experiment(&config).unwrap();
        let table2 = run_experiment(&config).unwrap();
        let dir = std::env::temp_dir().join("sglscv_csv_test");
        let p1 = dir.join("a.csv");
        let p2 = dir.join("b.csv");
        write_csv(&p1, &table1, &config).unwrap();
        write_csv(&p2, &table2, &config).unwrap();
        let t1 = std::fs::read_to_string(&p1).unwrap();
        let t2 = std::fs::read_to_string(&p2).unwrap();
        assert_eq!(t1, t2);
        assert!(t1.lines().any(|l| l == "iter,grad_evals,error,objective,m,s,tau,cond_rate"));
        assert!(t1.starts_with("# "));
        let _ = std::fs::remove_dir_all(&dir);
    }
}
