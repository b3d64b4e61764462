//! Optimizer suite: SGD, Adam, full gradient, SAGA over quadrature
//! discretizations, and stochastic gradient with least-squares control
//! variates on fixed or growing approximation spaces, plus schedules and
//! work accounting.

use crate::leastsq::{Memory, MemoryRecord, SpectralEstimator, WindowFitter};
use crate::polybasis::{
    reference_rule, BasisContext, CoordinateMeasure, IndexSetKind, MultiIndexSet, QuadratureRule,
};
use crate::problems::ControlProblem;
use crate::sampling::{
    resample_memory, weight, Sampler, SamplingError, SamplingMeasure, SeedPolicy, LANE_INDEX,
    LANE_INIT, LANE_SAMPLE,
};
use nalgebra::DVector;
use rand::distributions::{Distribution, WeightedIndex};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("quadrature grid of {size} nodes exceeds the {limit}-node budget")]
    GridTooLarge { size: usize, limit: usize },
    #[error("delta must satisfy delta < alpha^2 / (24 q L^2)")]
    StepBoundDomain,
    #[error(transparent)]
    Sampling(#[from] SamplingError),
}

/// Step-size rules.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StepSchedule {
    Constant { tau: f64 },
    /// `tau_k = 1 / (c0 + c1 k)`.
    RobbinsMonro { c0: f64, c1: f64 },
    /// `tau_k = tau (k+1)^(t-1)`.
    Power { tau: f64, t: f64 },
    /// `tau_k = 1 / (c0 m_k + c1)`, tied to the model-space size.
    MemoryLinked { c0: f64, c1: f64 },
}

impl StepSchedule {
    pub fn step(&self, k: usize, m: usize) -> f64 {
        match *self {
            StepSchedule::Constant { tau } => tau,
            StepSchedule::RobbinsMonro { c0, c1 } => 1.0 / (c0 + c1 * k as f64),
            StepSchedule::Power { tau, t } => tau * ((k + 1) as f64).powf(t - 1.0),
            StepSchedule::MemoryLinked { c0, c1 } => 1.0 / (c0 * m as f64 + c1),
        }
    }
}

/// One per-iteration record of an optimizer run.
#[derive(Clone, Copy, Debug)]
pub struct TraceRow {
    pub iter: usize,
    pub error: f64,
    pub objective: f64,
    pub grad_evals: u64,
    pub m: usize,
    pub s: usize,
    pub tau: f64,
    pub conditioned: bool,
}

/// Full history of a run plus its final iterate and bookkeeping counters.
#[derive(Clone, Debug)]
pub struct OptimizerTrace {
    pub rows: Vec<TraceRow>,
    pub final_control: DVector<f64>,
    pub resample_evals: u64,
    pub refactors: usize,
}

impl OptimizerTrace {
    pub fn iterations(&self) -> usize {
        self.rows.len()
    }

    pub fn final_grad_evals(&self) -> u64 {
        self.rows.last().map_or(0, |r| r.grad_evals)
    }
}

/// Cumulative gradient evaluations divided by iteration count.
pub fn work_ratio(trace: &OptimizerTrace) -> f64 {
    trace.final_grad_evals() as f64 / trace.iterations() as f64
}

fn error_to(problem: &dyn ControlProblem, u: &DVector<f64>, reference: Option<&DVector<f64>>) -> f64 {
    match reference {
        Some(r) => problem.norm(&(u - r)),
        None => f64::NAN,
    }
}

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

/// Robbins-Monro stochastic gradient descent with draws from the reference
/// measure; one gradient evaluation per iteration.
pub fn run_sgd(
    problem: &dyn ControlProblem,
    schedule: &StepSchedule,
    u0: &DVector<f64>,
    iterations: usize,
    policy: &SeedPolicy,
    replicate: u64,
    reference: Option<&DVector<f64>>,
) -> OptimizerTrace {
    let coords = problem.coords().to_vec();
    let mut u = u0.clone();
    let mut rows = Vec::with_capacity(iterations);
    let mut evals = 0u64;
    for k in 0..iterations {
        let mut rng = policy.rng(replicate, k as u64, LANE_SAMPLE);
        let y = crate::sampling::draw_reference_point(&coords, &mut rng);
        let (cost, grad) = problem.cost_and_gradient(&u, &y);
        evals += 1;
        let tau = schedule.step(k, 0);
        rows.push(TraceRow {
            iter: k,
            error: error_to(problem, &u, reference),
            objective: cost,
            grad_evals: evals,
            m: 0,
            s: 0,
            tau,
            conditioned: true,
        });
        u -= grad * tau;
    }
    OptimizerTrace {
        rows,
        final_control: u,
        resample_evals: 0,
        refactors: 0,
    }
}

/// Adam with bias-corrected first and second moments and elementwise steps.
#[allow(clippy::too_many_arguments)]
pub fn run_adam(
    problem: &dyn ControlProblem,
    tau: f64,
    beta1: f64,
    beta2: f64,
    u0: &DVector<f64>,
    iterations: usize,
    policy: &SeedPolicy,
    replicate: u64,
    reference: Option<&DVector<f64>>,
) -> OptimizerTrace {
    assert!((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2));
    let eps = 1e-8;
    let coords = problem.coords().to_vec();
    let mut u = u0.clone();
    let mut m1: DVector<f64> = DVector::zeros(u.len());
    let mut m2: DVector<f64> = DVector::zeros(u.len());
    let mut rows = Vec::with_capacity(iterations);
    let mut evals = 0u64;
    for k in 0..iterations {
        let mut rng = policy.rng(replicate, k as u64, LANE_SAMPLE);
        let y = crate::sampling::draw_reference_point(&coords, &mut rng);
        let (cost, grad) = problem.cost_and_gradient(&u, &y);
        evals += 1;
        rows.push(TraceRow {
            iter: k,
            error: error_to(problem, &u, reference),
            objective: cost,
            grad_evals: evals,
            m: 0,
            s: 0,
            tau,
            conditioned: true,
        });
        m1 = &m1 * beta1 + &grad * (1.0 - beta1);
        m2.zip_apply(&grad, |m, g| *m = beta2 * *m + (1.0 - beta2) * g * g);
        let c1 = 1.0 - beta1.powi(k as i32 + 1);
        let c2 = 1.0 - beta2.powi(k as i32 + 1);
        for i in 0..u.len() {
            u[i] -= tau * (m1[i] / c1) / ((m2[i] / c2).sqrt() + eps);
        }
    }
    OptimizerTrace {
        rows,
        final_control: u,
        resample_evals: 0,
        refactors: 0,
    }
}

/// Quadrature discretization of a problem into a weighted finite sum, for
/// finite-sum methods like SAGA. Node `i` carries probability weight
/// `omega_i` and the index-sampling law is `p_i = omega_i`, which folds the
/// importance correction into plain SAGA algebra.
pub struct FiniteSumProblem<'a> {
    pub problem: &'a dyn ControlProblem,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

const GRID_LIMIT: usize = 200_000;

pub fn discretize_for_saga(
    problem: &dyn ControlProblem,
    points_per_dim: usize,
) -> Result<FiniteSumProblem<'_>, OptimError> {
    let d = problem.param_dim();
    let size = points_per_dim
        .checked_pow(d as u32)
        .unwrap_or(usize::MAX);
    if size > GRID_LIMIT {
        return Err(OptimError::GridTooLarge {
            size,
            limit: GRID_LIMIT,
        });
    }
    let rule = reference_rule(problem.coords(), points_per_dim)
        .map_err(|e| OptimError::InvalidSchedule(e.to_string()))?;
    Ok(FiniteSumProblem {
        problem,
        nodes: rule.nodes,
        weights: rule.weights,
    })
}

impl<'a> FiniteSumProblem<'a> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn term_cost_and_gradient(&self, i: usize, u: &DVector<f64>) -> (f64, DVector<f64>) {
        self.problem.cost_and_gradient(u, &self.nodes[i])
    }

    /// Gradient of the discretized objective `J^s(u) = sum_i omega_i g(u, y_i)`.
    pub fn mean_gradient(&self, u: &DVector<f64>) -> DVector<f64> {
        let mut total = DVector::zeros(u.len());
        for (node, w) in self.nodes.iter().zip(&self.weights) {
            total += self.problem.gradient(u, node) * *w;
        }
        total
    }
}

/// SAGA on a quadrature-discretized finite sum, drawing indices with the
/// quadrature probabilities so the estimator is conditionally unbiased for
/// the discretized gradient.
#[allow(clippy::too_many_arguments)]
pub fn run_saga(
    finite_sum: &FiniteSumProblem<'_>,
    tau: f64,
    u0: &DVector<f64>,
    iterations: usize,
    policy: &SeedPolicy,
    replicate: u64,
    reference: Option<&DVector<f64>>,
) -> OptimizerTrace {
    let problem = finite_sum.problem;
    let n = finite_sum.len();
    let mut u = u0.clone();
    let mut evals = 0u64;
    // One stored gradient per summand, initialized at u0.
    let mut slots: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut average = DVector::zeros(u.len());
    for (node, w) in finite_sum.nodes.iter().zip(&finite_sum.weights) {
        let g = problem.gradient(&u, node);
        evals += 1;
        average += &g * *w;
        slots.push(g);
    }
    let index_law = WeightedIndex::new(&finite_sum.weights).expect("positive weights");
    let mut rows = Vec::with_capacity(iterations);
    for k in 0..iterations {
        let mut rng = policy.rng(replicate, k as u64, LANE_INDEX);
        let i = index_law.sample(&mut rng);
        let (cost, grad) = finite_sum.term_cost_and_gradient(i, &u);
        evals += 1;
        rows.push(TraceRow {
            iter: k,
            error: error_to(problem, &u, reference),
            objective: cost,
            grad_evals: evals,
            m: 0,
            s: n,
            tau,
            conditioned: true,
        });
        let direction = &grad - &slots[i] + &average;
        u -= direction * tau;
        average += (&grad - &slots[i]) * finite_sum.weights[i];
        slots[i] = grad;
    }
    OptimizerTrace {
        rows,
        final_control: u,
        resample_evals: 0,
        refactors: 0,
    }
}

/// Deterministic descent on the quadrature-discretized objective. The work
/// column counts one gradient evaluation per node per iteration. Stops early
/// once the gradient norm falls below `stop_tol`, when given.
#[allow(clippy::too_many_arguments)]
pub fn run_full_gradient(
    problem: &dyn ControlProblem,
    rule: &QuadratureRule,
    tau: f64,
    u0: &DVector<f64>,
    iterations: usize,
    stop_tol: Option<f64>,
    reference: Option<&DVector<f64>>,
) -> OptimizerTrace {
    let evaluators: Vec<_> = rule.nodes.iter().map(|y| problem.node_evaluator(y)).collect();
    let dim = u0.len();
    let mean_eval = |u: &DVector<f64>| -> (f64, DVector<f64>) {
        let mut objective = 0.0;
        let mut grad = DVector::zeros(dim);
        for (eval, w) in evaluators.iter().zip(&rule.weights) {
            let (c, g) = eval(u);
            objective += w * c;
            grad += g * *w;
        }
        (objective, grad)
    };
    // For quadratic costs the discretized objective is itself quadratic, so
    // the descent map can be probed once and applied in O(dim^2) per
    // iteration; the iterates coincide with literal re-summation up to
    // rounding, and the work column still counts one evaluation per node.
    let affine = if problem.gradient_is_affine() {
        let (j0, g0) = mean_eval(&DVector::zeros(dim));
        let mut hessian = nalgebra::DMatrix::zeros(dim, dim);
        for j in 0..dim {
            let mut probe = DVector::zeros(dim);
            probe[j] = 1.0;
            let (_, gj) = mean_eval(&probe);
            hessian.column_mut(j).copy_from(&(gj - &g0));
        }
        Some((j0, g0, hessian))
    } else {
        None
    };
    let mut u = u0.clone();
    let mut rows = Vec::with_capacity(iterations.min(1 << 20));
    let mut evals = 0u64;
    for k in 0..iterations {
        let (objective, grad) = match &affine {
            Some((j0, g0, hessian)) => {
                let hu = hessian * &u;
                let objective = j0 + g0.dot(&u) + 0.5 * u.dot(&hu);
                (objective, hu + g0)
            }
            None => mean_eval(&u),
        };
        evals += rule.len() as u64;
        rows.push(TraceRow {
            iter: k,
            error: error_to(problem, &u, reference),
            objective,
            grad_evals: evals,
            m: 0,
            s: rule.len(),
            tau,
            conditioned: true,
        });
        let grad_norm = problem.norm(&grad);
        u -= grad * tau;
        if let Some(tol) = stop_tol {
            if grad_norm <= tol {
                break;
            }
        }
    }
    OptimizerTrace {
        rows,
        final_control: u,
        resample_evals: 0,
        refactors: 0,
    }
}

// ---------------------------------------------------------------------------
// Sampling-inequality sizes and theoretical step bounds
// ---------------------------------------------------------------------------

fn uniformity(coords: &[CoordinateMeasure]) -> bool {
    coords.iter().all(|c| c.is_bounded())
}

/// Worst-case `K_{m,w}` of a (space, measure) pair: `m` for the optimal
/// mixture, `(4/pi)^d m` for tensorized arcsine, and the exact corner value
/// for the uniform reference measure.
pub fn sampling_bound(ctx: &BasisContext, measure: SamplingMeasure) -> f64 {
    let m = ctx.size() as f64;
    match measure {
        SamplingMeasure::OptimalMixture => m,
        SamplingMeasure::Arcsine => {
            assert!(uniformity(ctx.coords()), "arcsine needs bounded coordinates");
            (4.0 / std::f64::consts::PI).powi(ctx.dim() as i32) * m
        }
        SamplingMeasure::Reference => {
            assert!(
                uniformity(ctx.coords()),
                "K_{{m,w}} is unbounded for Gaussian reference sampling"
            );
            // Legendre squares peak at the domain corners simultaneously.
            ctx.set()
                .iter()
                .map(|nu| nu.0.iter().map(|&d| (2 * d + 1) as f64).product::<f64>())
                .sum()
        }
    }
}

/// Smallest memory size `s >= max(m, 3)` satisfying the sampling inequality
/// `K_{m,w} <= kappa s / log(s)` with `kappa = (1 - log 2) / (2 + 2r)`.
pub fn memory_size_for_space(ctx: &BasisContext, measure: SamplingMeasure, r: f64) -> usize {
    assert!(r > 0.0);
    let k_bound = sampling_bound(ctx, measure);
    let kappa = (1.0 - 2f64.ln()) / (2.0 + 2.0 * r);
    let mut s = ctx.size().max(3);
    while k_bound > kappa * s as f64 / (s as f64).ln() {
        s += 1;
    }
    s
}

/// Memory size at which `||G - I||_2 <= 1/2` holds with a comfortable
/// margin in practice: `ceil(safety * 16.5 * K_{m,w} * log(2m))`, calibrated
/// so the typical Gram deviation sits near 1/3. Smaller than the
/// sampling-inequality size by its log(s) factor, and the conditioned
/// estimator falls back to the zero model on the rare failures.
pub fn stable_memory_size(ctx: &BasisContext, measure: SamplingMeasure, safety: f64) -> usize {
    let k_bound = sampling_bound(ctx, measure);
    let m = ctx.size() as f64;
    let s = (safety * 16.5 * k_bound * (2.0 * m).ln()).ceil() as usize;
    s.max(ctx.size() + 2)
}

/// Admissible step bounds and contraction factor of the fixed-space theory:
/// the simple bound `alpha / (14 q L^2)`, the rate-certifying bound, and the
/// contraction factor `x`. `alpha` and `lipschitz` are caller-supplied
/// estimates; this is a diagnostic helper.
pub fn theory_step_bounds(
    alpha: f64,
    lipschitz: f64,
    q: f64,
    s: usize,
    delta: f64,
) -> Result<(f64, f64, f64), OptimError> {
    let ql2 = q * lipschitz * lipschitz;
    if delta <= 0.0 || delta >= alpha * alpha / (24.0 * ql2) {
        return Err(OptimError::StepBoundDomain);
    }
    let tau_simple = alpha / (14.0 * ql2);
    let a_term = (1.0 / (1.0 + s as f64 * delta)).powf(1.0 / s as f64);
    let rate_term = (alpha * alpha - 24.0 * ql2 * delta) / (4.0 * ql2);
    let tau_rate = alpha / (4.0 * ql2)
        * ((1.0 - a_term) / (1.0 + 6.0 * delta - a_term)).min(rate_term);
    let x = a_term.max(1.0 - rate_term);
    Ok((tau_simple, tau_rate, x))
}

// ---------------------------------------------------------------------------
// Approximation-space schedules
// ---------------------------------------------------------------------------

/// One epoch of the variable-space algorithm.
#[derive(Clone, Debug)]
pub struct EpochSpec {
    pub set: MultiIndexSet,
    pub measure: SamplingMeasure,
    /// First iteration of the epoch.
    pub start: usize,
    /// Memory (fit window) size throughout the epoch.
    pub memory: usize,
}

/// Decay regime assumed by the theory-driven schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayKind {
    Exponential,
    Algebraic,
}

/// Schedule with `s_k = ceil(s (k+1)^(1-t))` and the model dimension tied to
/// `s_k` through the sampling inequality; restricted to one-dimensional
/// parameter domains, where space dimension equals polynomial degree plus
/// one.
#[derive(Clone, Debug)]
pub struct TheorySchedule {
    pub kind: DecayKind,
    /// Memory growth coefficient `s` (algebraic case requires `s < 1`).
    pub s_coef: f64,
    /// Assumed decay rate `eta` of the projection error.
    pub eta: f64,
    /// Quasi-optimality constant of the sampling measure.
    pub c_mu: f64,
    pub measure: SamplingMeasure,
}

impl TheorySchedule {
    fn t(&self) -> f64 {
        match self.kind {
            DecayKind::Exponential => 1.0 / 3.0,
            DecayKind::Algebraic => 0.0,
        }
    }

    fn memory_at(&self, k: usize) -> usize {
        let s = (self.s_coef * ((k + 1) as f64).powf(1.0 - self.t())).ceil() as usize;
        s.max(1)
    }

    fn dim_at(&self, k: usize) -> usize {
        let s = self.memory_at(k) as f64;
        let m = match self.kind {
            DecayKind::Exponential => {
                0.5 * ((1.0 - 2f64.ln()) / (self.eta * self.c_mu)).sqrt() * s.sqrt()
            }
            DecayKind::Algebraic => {
                let kappa = (1.0 - 2f64.ln()) / (2.0 * (1.0 + 2.0 * self.eta));
                if s < 2.0 {
                    1.0
                } else {
                    kappa / self.c_mu * s / s.ln()
                }
            }
        };
        (m.floor() as usize).clamp(1, self.memory_at(k))
    }
}

/// Approximation-space plan of an SG-LSCV run.
#[derive(Clone, Debug)]
pub enum SpaceSchedule {
    Explicit(Vec<EpochSpec>),
    Theory(TheorySchedule),
}

impl SpaceSchedule {
    /// Single fixed space and memory.
    pub fn fixed(set: MultiIndexSet, measure: SamplingMeasure, memory: usize) -> SpaceSchedule {
        SpaceSchedule::Explicit(vec![EpochSpec {
            set,
            measure,
            start: 0,
            memory,
        }])
    }

    /// Experiment-driven schedule: spaces from a size-parameter ladder, one
    /// epoch per parameter, switching every `switch_every` iterations, with
    /// memory sizes from the supplied rule.
    #[allow(clippy::too_many_arguments)]
    pub fn stepped<F: Fn(usize) -> usize>(
        kind: IndexSetKind,
        dim: usize,
        params: &[usize],
        switch_every: usize,
        measure: SamplingMeasure,
        memory_rule: F,
    ) -> Result<SpaceSchedule, OptimError> {
        if params.is_empty() || switch_every == 0 {
            return Err(OptimError::InvalidSchedule(
                "need at least one space and a positive switch interval".into(),
            ));
        }
        let mut epochs = Vec::with_capacity(params.len());
        for (p, &param) in params.iter().enumerate() {
            let set = MultiIndexSet::new(kind, param, dim)
                .map_err(|e| OptimError::InvalidSchedule(e.to_string()))?;
            let memory = memory_rule(set.len()).max(set.len());
            epochs.push(EpochSpec {
                set,
                measure,
                start: p * switch_every,
                memory,
            });
        }
        Ok(SpaceSchedule::Explicit(epochs))
    }

    /// Like [`SpaceSchedule::stepped`] but with switch iterations derived
    /// from feasibility: each epoch starts as soon as enough data can have
    /// accumulated for its memory size, but no sooner than `min_gap`
    /// iterations after the previous switch.
    pub fn auto<F: Fn(usize) -> usize>(
        kind: IndexSetKind,
        dim: usize,
        params: &[usize],
        measure: SamplingMeasure,
        memory_rule: F,
        min_gap: usize,
    ) -> Result<SpaceSchedule, OptimError> {
        if params.is_empty() || min_gap == 0 {
            return Err(OptimError::InvalidSchedule(
                "need at least one space and a positive switch gap".into(),
            ));
        }
        let mut epochs: Vec<EpochSpec> = Vec::with_capacity(params.len());
        for &param in params {
            let set = MultiIndexSet::new(kind, param, dim)
                .map_err(|e| OptimError::InvalidSchedule(e.to_string()))?;
            let memory = memory_rule(set.len()).max(set.len());
            let start = match epochs.last() {
                None => 0,
                Some(prev) => (prev.start + min_gap)
                    .max(prev.start + memory.saturating_sub(prev.memory))
                    .max(memory.saturating_sub(epochs[0].memory)),
            };
            epochs.push(EpochSpec {
                set,
                measure,
                start,
                memory,
            });
        }
        Ok(SpaceSchedule::Explicit(epochs))
    }
}

/// Materialized per-iteration plan.
struct SchedulePlan {
    epochs: Vec<EpochSpec>,
    /// epoch index per iteration, length `iterations + 1`.
    epoch_of: Vec<usize>,
    /// fit-window size per iteration, length `iterations + 1`.
    active: Vec<usize>,
    /// records retained entering each iteration, length `iterations + 1`.
    retain: Vec<usize>,
}

fn validate_epochs(epochs: &[EpochSpec], param_dim: usize) -> Result<(), OptimError> {
    if epochs.is_empty() {
        return Err(OptimError::InvalidSchedule("no epochs".into()));
    }
    if epochs[0].start != 0 {
        return Err(OptimError::InvalidSchedule("first epoch must start at 0".into()));
    }
    for (p, e) in epochs.iter().enumerate() {
        if e.set.dim() != param_dim {
            return Err(OptimError::InvalidSchedule(format!(
                "epoch {p}: set dimension {} != parameter dimension {param_dim}",
                e.set.dim()
            )));
        }
        if e.memory < e.set.len() {
            return Err(OptimError::InvalidSchedule(format!(
                "epoch {p}: memory {} smaller than space dimension {}",
                e.memory,
                e.set.len()
            )));
        }
        if e.memory > e.start + epochs[0].memory {
            return Err(OptimError::InvalidSchedule(format!(
                "epoch {p}: memory {} not reachable by iteration {} with initial memory {}",
                e.memory, e.start, epochs[0].memory
            )));
        }
    }
    for p in 1..epochs.len() {
        if epochs[p].start <= epochs[p - 1].start {
            return Err(OptimError::InvalidSchedule(
                "switch iterations must increase strictly".into(),
            ));
        }
        if !epochs[p - 1].set.is_subset_of(&epochs[p].set) {
            return Err(OptimError::InvalidSchedule(format!(
                "epoch {p}: index sets are not nested"
            )));
        }
        if epochs[p].memory < epochs[p - 1].memory {
            return Err(OptimError::InvalidSchedule(
                "memory sizes must not shrink".into(),
            ));
        }
        let stretch = epochs[p].memory - epochs[p - 1].memory;
        if stretch > epochs[p].start - epochs[p - 1].start {
            return Err(OptimError::InvalidSchedule(format!(
                "epoch {p}: memory growth {stretch} exceeds the epoch length"
            )));
        }
    }
    Ok(())
}

impl SpaceSchedule {
    fn plan(
        &self,
        iterations: usize,
        param_dim: usize,
        problem_coords: &[CoordinateMeasure],
    ) -> Result<SchedulePlan, OptimError> {
        match self {
            SpaceSchedule::Explicit(epochs) => {
                validate_epochs(epochs, param_dim)?;
                let mut epoch_of = vec![0usize; iterations + 1];
                let mut active = vec![0usize; iterations + 1];
                let mut retain = vec![0usize; iterations + 1];
                for k in 0..=iterations {
                    let p = match epochs.binary_search_by(|e| e.start.cmp(&k)) {
                        Ok(p) => p,
                        Err(ins) => ins - 1,
                    };
                    epoch_of[k] = p;
                    active[k] = epochs[p].memory;
                    retain[k] = epochs[p].memory;
                    if p + 1 < epochs.len() {
                        let next = &epochs[p + 1];
                        let stretch = next.memory - epochs[p].memory;
                        let stretch_start = next.start - stretch;
                        if k >= stretch_start {
                            retain[k] = epochs[p].memory + (k - stretch_start);
                        }
                    }
                }
                Ok(SchedulePlan {
                    epochs: epochs.clone(),
                    epoch_of,
                    active,
                    retain,
                })
            }
            SpaceSchedule::Theory(theory) => {
                if param_dim != 1 {
                    return Err(OptimError::InvalidSchedule(
                        "theory schedules are defined for one-dimensional parameter domains"
                            .into(),
                    ));
                }
                if theory.kind == DecayKind::Algebraic && theory.s_coef >= 1.0 {
                    return Err(OptimError::InvalidSchedule(
                        "the algebraic schedule requires s < 1".into(),
                    ));
                }
                let _ = problem_coords;
                let mut epochs: Vec<EpochSpec> = Vec::new();
                let mut epoch_of = vec![0usize; iterations + 1];
                let mut active = vec![0usize; iterations + 1];
                let mut current_dim = 0usize;
                for k in 0..=iterations {
                    let dim = theory.dim_at(k);
                    let mem = theory.memory_at(k).max(dim);
                    if dim != current_dim {
                        let set = MultiIndexSet::new(IndexSetKind::TotalDegree, dim - 1, 1)
                            .expect("dimension one");
                        epochs.push(EpochSpec {
                            set,
                            measure: theory.measure,
                            start: k,
                            memory: mem,
                        });
                        current_dim = dim;
                    }
                    epoch_of[k] = epochs.len() - 1;
                    active[k] = mem;
                }
                let retain = active.clone();
                Ok(SchedulePlan {
                    epochs,
                    epoch_of,
                    active,
                    retain,
                })
            }
        }
    }
}

// ---------------------------------------------------------------------------
// SG-LSCV engine
// ---------------------------------------------------------------------------

/// How the initial memory is produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    /// Freeze the control at `u0` and draw the whole window i.i.d.
    FrozenControl,
    /// Run plain weighted SGD steps while filling the window.
    SgdWarmup,
}

/// Stochastic gradient with a least-squares control variate on a fixed
/// approximation space.
#[allow(clippy::too_many_arguments)]
pub fn run_sglscv_fixed(
    problem: &dyn ControlProblem,
    set: MultiIndexSet,
    measure: SamplingMeasure,
    step: &StepSchedule,
    memory: usize,
    u0: &DVector<f64>,
    iterations: usize,
    policy: &SeedPolicy,
    replicate: u64,
    reference: Option<&DVector<f64>>,
    init: InitKind,
) -> Result<OptimizerTrace, OptimError> {
    run_sglscv_variable(
        problem,
        &SpaceSchedule::fixed(set, measure, memory),
        step,
        u0,
        iterations,
        policy,
        replicate,
        reference,
        init,
    )
}

/// Stochastic gradient with least-squares control variates on a growing
/// approximation space, with extended memory ahead of each switch and
/// Bernoulli resampling when the sampling measure is space-dependent.
#[allow(clippy::too_many_arguments)]
pub fn run_sglscv_variable(
    problem: &dyn ControlProblem,
    schedule: &SpaceSchedule,
    step: &StepSchedule,
    u0: &DVector<f64>,
    iterations: usize,
    policy: &SeedPolicy,
    replicate: u64,
    reference: Option<&DVector<f64>>,
    init: InitKind,
) -> Result<OptimizerTrace, OptimError> {
    let coords = problem.coords().to_vec();
    let plan = schedule.plan(iterations, coords.len(), &coords)?;

    let mut epoch = 0usize;
    let mut ctx = BasisContext::new(plan.epochs[0].set.clone(), coords.clone());
    let mut measure = plan.epochs[0].measure;
    let mut sampler = Sampler::new(measure, &ctx)?;

    let mut u = u0.clone();
    let mut evals = 0u64;
    let mut resample_evals = 0u64;
    let mut refactors = 0usize;

    // Initial memory.
    let s0 = plan.active[0];
    let mut memory = Memory::new(s0);
    for j in 0..s0 {
        let mut rng = policy.rng(replicate, j as u64, LANE_INIT);
        let y = sampler.draw(&ctx, &mut rng)?;
        let grad = problem.gradient(&u, &y);
        evals += 1;
        if init == InitKind::SgdWarmup {
            let w = weight(measure, &ctx, &y);
            let tau = step.step(0, ctx.size());
            memory.push(MemoryRecord {
                point: y,
                grad: grad.clone(),
                control: u.clone(),
            });
            u -= grad * (tau * w);
        } else {
            memory.push(MemoryRecord {
                point: y,
                grad,
                control: u.clone(),
            });
        }
    }
    memory.set_active(s0);
    let mut fitter = WindowFitter::from_memory(&memory, &ctx, measure);
    let mut estimator = SpectralEstimator::new();

    let mut rows = Vec::with_capacity(iterations);
    let mut phi = DVector::zeros(ctx.size());

    for k in 0..iterations {
        // Space switch.
        if plan.epoch_of[k] != epoch {
            epoch = plan.epoch_of[k];
            let spec = &plan.epochs[epoch];
            let old_set = ctx.set().clone();
            let new_ctx = BasisContext::new(spec.set.clone(), coords.clone());
            memory.promote_all();
            debug_assert_eq!(memory.len(), spec.memory);
            if measure == SamplingMeasure::OptimalMixture {
                let fresh = resample_memory(
                    &mut memory,
                    &old_set,
                    &new_ctx,
                    |control, point| problem.gradient(control, point),
                    policy,
                    replicate,
                    k as u64,
                )?;
                evals += fresh as u64;
                resample_evals += fresh as u64;
            }
            ctx = new_ctx;
            measure = spec.measure;
            sampler = Sampler::new(measure, &ctx)?;
            fitter = WindowFitter::from_memory(&memory, &ctx, measure);
            estimator.reset();
            phi = DVector::zeros(ctx.size());
        }

        let m = ctx.size();
        let tau = step.step(k, m);

        // Draw, evaluate, fit, step.
        let mut rng = policy.rng(replicate, k as u64, LANE_SAMPLE);
        let y = sampler.draw(&ctx, &mut rng)?;
        let (cost, grad) = problem.cost_and_gradient(&u, &y);
        evals += 1;

        let conditioned =
            fitter.nrows() >= m && estimator.estimate(fitter.r(), fitter.nrows()) <= 0.5;
        let w = weight(measure, &ctx, &y);
        ctx.basis_eval_into(&y, &mut phi);
        let direction = if conditioned {
            // w (grad - v(y)) + E[v], arranged so the correction cancels
            // exactly when the model value matches its mean.
            let fit_at_y = fitter.fit_value(&phi);
            let fit_mean = fitter.fit_mean();
            let correction = fit_mean - fit_at_y * w;
            &grad * w + correction
        } else {
            &grad * w
        };

        rows.push(TraceRow {
            iter: k,
            error: error_to(problem, &u, reference),
            objective: cost,
            grad_evals: evals,
            m,
            s: fitter.nrows(),
            tau,
            conditioned,
        });

        let u_prev = u.clone();
        u -= direction * tau;

        // Memory and factor updates.
        memory.push(MemoryRecord {
            point: y,
            grad: grad.clone(),
            control: u_prev,
        });
        memory.set_active(memory.active() + 1);
        fitter.append(&phi, w, &grad);
        let rows_target = plan.active[k + 1];
        while fitter.nrows() > rows_target {
            if !fitter.delete_oldest() {
                refactors += 1;
            }
            memory.set_active(memory.active() - 1);
        }
        while memory.len() > plan.retain[k + 1] {
            memory.pop_oldest();
        }
    }

    Ok(OptimizerTrace {
        rows,
        final_control: u,
        resample_evals,
        refactors,
    })
}

/// The SG-LSCV update direction at a frozen state, for estimator-level
/// diagnostics: the memory, model, and control stay fixed while fresh
/// parameter draws stream through.
pub struct FrozenEstimator {
    ctx: BasisContext,
    measure: SamplingMeasure,
    state: WindowFitter,
    conditioned: bool,
}

impl FrozenEstimator {
    pub fn new(memory: &Memory, ctx: BasisContext, measure: SamplingMeasure) -> FrozenEstimator {
        let state = WindowFitter::from_memory(memory, &ctx, measure);
        let conditioned = state.nrows() >= ctx.size()
            && crate::leastsq::conditioning_check(&state.gram());
        FrozenEstimator {
            ctx,
            measure,
            state,
            conditioned,
        }
    }

    pub fn conditioned(&self) -> bool {
        self.conditioned
    }

    pub fn ctx(&self) -> &BasisContext {
        &self.ctx
    }

    /// Update direction for one fresh draw at control `u`.
    pub fn direction(
        &self,
        problem: &dyn ControlProblem,
        u: &DVector<f64>,
        y: &[f64],
    ) -> DVector<f64> {
        let grad = problem.gradient(u, y);
        let w = weight(self.measure, &self.ctx, y);
        if self.conditioned {
            let phi = self.ctx.basis_eval(y);
            let correction = self.state.fit_mean() - self.state.fit_value(&phi) * w;
            grad * w + correction
        } else {
            grad * w
        }
    }
}
