//! Fast invariant suites per module, for the CLI `check` command. Each
//! check returns a pass flag plus a one-line detail.

use crate::fem::{assemble, mass_matrix, BoundaryCondition, DirichletSystem, Mesh};
use crate::leastsq::{conditioning_check, gram_deviation, Memory, MemoryRecord, QrState};
use crate::optim::{memory_size_for_space, theory_step_bounds};
use crate::polybasis::{
    gauss_legendre, hermite_center_sum, BasisContext, CoordinateMeasure, IndexSetKind,
    MultiIndexSet,
};
use crate::problems::{
    advdiff_5d, diffusion_1d, finite_difference_check, quadratic_toy, ControlProblem,
};
use crate::sampling::{weight, Sampler, SamplingMeasure, SeedPolicy, LANE_INIT, LANE_SAMPLE};
use nalgebra::DVector;

pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed,
        detail,
    }
}

pub const MODULES: [&str; 6] = [
    "polybasis",
    "sampling",
    "leastsq",
    "fem",
    "problems",
    "optim",
];

/// Runs the invariant suite of one module.
pub fn module_checks(module: &str) -> Option<Vec<CheckResult>> {
    match module {
        "polybasis" => Some(polybasis_checks()),
        "sampling" => Some(sampling_checks()),
        "leastsq" => Some(leastsq_checks()),
        "fem" => Some(fem_checks()),
        "problems" => Some(problems_checks()),
        "optim" => Some(optim_checks()),
        _ => None,
    }
}

fn uniform_ctx(m_dim: usize) -> BasisContext {
    let set = MultiIndexSet::new(IndexSetKind::TotalDegree, m_dim - 1, 1).unwrap();
    BasisContext::new(set, vec![CoordinateMeasure::Uniform { lo: -1.0, hi: 1.0 }])
}

fn polybasis_checks() -> Vec<CheckResult> {
    let mut out = Vec::new();

    let set = MultiIndexSet::new(IndexSetKind::HyperbolicCross, 5, 5).unwrap();
    out.push(check(
        "hyperbolic cross cardinality (m=5, d=5)",
        set.len() == 56,
        format!("|set| = {}", set.len()),
    ));
    out.push(check(
        "downward closure",
        set.is_downward_closed(),
        "exhaustive predecessor membership".into(),
    ));

    let ctx = uniform_ctx(9);
    let rule = gauss_legendre(40, -1.0, 1.0).unwrap();
    let mut worst = 0.0f64;
    for a in 0..ctx.size() {
        for b in 0..ctx.size() {
            let ip = rule.integrate(|y| {
                let phi = ctx.basis_eval(y);
                phi[a] * phi[b]
            });
            let expect = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((ip - expect).abs());
        }
    }
    out.push(check(
        "orthonormality to degree 8",
        worst < 1e-10,
        format!("max deviation {worst:.2e}"),
    ));

    let r5 = gauss_legendre(5, -1.0, 1.0).unwrap();
    let exact9 = r5.integrate(|y| y[0].powi(9)).abs() < 1e-13;
    let fails10 = (r5.integrate(|y| y[0].powi(10)) - 1.0 / 11.0).abs() > 1e-6;
    out.push(check(
        "Gauss rule exactness boundary",
        exact9 && fails10,
        "degree 9 exact, degree 10 not".into(),
    ));

    let c = 2.0 * (2.0 * std::f64::consts::PI).sqrt() / std::f64::consts::E.powi(2);
    let bound_holds = (2..=200)
        .all(|m| hermite_center_sum(m) >= 1.0 + c * (((m - 1) as f64).sqrt() - 2.0));
    out.push(check(
        "Hermite center-sum lower bound (m <= 200)",
        bound_holds,
        "S_m(0) >= 1 + (2 sqrt(2 pi)/e^2)(sqrt(m-1) - 2)".into(),
    ));
    out
}

fn sampling_checks() -> Vec<CheckResult> {
    let mut out = Vec::new();
    let ctx = uniform_ctx(5);
    let policy = SeedPolicy::new(101);

    let w0 = weight(SamplingMeasure::Arcsine, &ctx, &[0.0]);
    out.push(check(
        "arcsine weight supremum",
        (w0 - std::f64::consts::FRAC_PI_2).abs() < 1e-12,
        format!("w(0) = {w0:.6}"),
    ));

    let m = ctx.size() as f64;
    let mut flat = true;
    for g in 0..1000 {
        let y = -0.999 + 1.998 * g as f64 / 999.0;
        let k = weight(SamplingMeasure::OptimalMixture, &ctx, &[y]) * ctx.squared_basis_sum(&[y]);
        if (k - m).abs() > 1e-10 {
            flat = false;
        }
    }
    out.push(check(
        "optimal measure flattens the Christoffel sum",
        flat,
        "k = m on a 1000-point grid".into(),
    ));

    for (name, measure) in [
        ("arcsine", SamplingMeasure::Arcsine),
        ("optimal mixture", SamplingMeasure::OptimalMixture),
    ] {
        let sampler = Sampler::new(measure, &ctx).unwrap();
        let n = 100_000usize;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for i in 0..n {
            let mut rng = policy.rng(0, i as u64, LANE_SAMPLE);
            let y = sampler.draw(&ctx, &mut rng).unwrap();
            let w = weight(measure, &ctx, &y);
            sum += w;
            sum_sq += w * w;
        }
        let mean = sum / n as f64;
        let se = (((sum_sq / n as f64 - mean * mean).max(0.0)) / n as f64).sqrt();
        out.push(check(
            &format!("unit weight mean under {name}"),
            (mean - 1.0).abs() <= 4.0 * se + 1e-12,
            format!("mean {mean:.6} (se {se:.1e})"),
        ));
    }
    out
}

fn leastsq_checks() -> Vec<CheckResult> {
    let mut out = Vec::new();
    let ctx = uniform_ctx(5);
    let s = memory_size_for_space(&ctx, SamplingMeasure::OptimalMixture, 1.0);
    let sampler = Sampler::new(SamplingMeasure::OptimalMixture, &ctx).unwrap();
    let policy = SeedPolicy::new(7);

    let mut memory = Memory::new(s);
    let coeffs: Vec<f64> = (0..ctx.size()).map(|j| 0.3 + 0.1 * j as f64).collect();
    for i in 0..s {
        let mut rng = policy.rng(0, i as u64, LANE_INIT);
        let p = sampler.draw(&ctx, &mut rng).unwrap();
        let phi = ctx.basis_eval(&p);
        let value: f64 = coeffs.iter().zip(phi.iter()).map(|(c, f)| c * f).sum();
        memory.push(MemoryRecord {
            point: p,
            grad: DVector::from_vec(vec![value]),
            control: DVector::zeros(1),
        });
    }
    let mut state = QrState::from_memory(&memory, &ctx, SamplingMeasure::OptimalMixture);
    out.push(check(
        "conditioning at the sampling-inequality size",
        conditioning_check(&state.gram()),
        format!("||G - I|| = {:.3}", gram_deviation(&state.gram())),
    ));
    let model =
        crate::leastsq::conditioned_fit(&memory, &ctx, SamplingMeasure::OptimalMixture, &state);
    let recovery = (0..ctx.size())
        .map(|j| (model.coeffs[(j, 0)] - coeffs[j]).abs())
        .fold(0.0f64, f64::max);
    out.push(check(
        "in-space recovery",
        model.conditioned && recovery < 1e-10,
        format!("max coefficient error {recovery:.2e}"),
    ));

    for step in 0..50u64 {
        let mut rng = policy.rng(1, step, 0);
        let p = sampler.draw(&ctx, &mut rng).unwrap();
        let phi = ctx.basis_eval(&p);
        let value: f64 = coeffs.iter().zip(phi.iter()).map(|(c, f)| c * f).sum();
        let w = weight(SamplingMeasure::OptimalMixture, &ctx, &p);
        let grad = DVector::from_vec(vec![value]);
        memory.push(MemoryRecord {
            point: p,
            grad: grad.clone(),
            control: DVector::zeros(1),
        });
        state.append_row(&phi, w, &grad);
        let evicted = memory.pop_oldest().unwrap();
        if !state.delete_oldest_row(&evicted.grad) {
            state = QrState::from_memory(&memory, &ctx, SamplingMeasure::OptimalMixture);
        }
    }
    out.push(check(
        "incremental QR residual after 50 updates",
        state.factor_residual() < 1e-9 && state.orthogonality_error() < 1e-9,
        format!(
            "residual {:.2e}, orthogonality {:.2e}",
            state.factor_residual(),
            state.orthogonality_error()
        ),
    ));
    out
}

fn fem_checks() -> Vec<CheckResult> {
    let mut out = Vec::new();
    let mesh = Mesh::unit_square(8).unwrap();
    let ones = DVector::from_element(mesh.node_count(), 1.0);
    let mass = mass_matrix(&mesh);
    let area = (ones.transpose() * &mass * &ones)[(0, 0)];
    out.push(check(
        "unit-square mass",
        (area - 1.0).abs() < 1e-12,
        format!("<1,1> = {area:.12}"),
    ));

    let op = assemble(&mesh, 1.0, None).unwrap();
    let rowsum = (&op.matrix * &ones).abs().max();
    out.push(check(
        "constants in the pure-Neumann kernel",
        rowsum < 1e-12,
        format!("max row sum {rowsum:.2e}"),
    ));

    let errors: Vec<f64> = [8usize, 16]
        .iter()
        .map(|&n| {
            let mesh = Mesh::unit_square(n).unwrap();
            let op = assemble(&mesh, 1.0, None).unwrap();
            let sys = DirichletSystem::new(&op, &mesh, BoundaryCondition::DirichletAll).unwrap();
            let m = mass_matrix(&mesh);
            let pi = std::f64::consts::PI;
            let f = mesh.interpolate(|x, y| 2.0 * pi * pi * (pi * x).sin() * (pi * y).sin());
            let z = sys.solve(&(&m * f));
            let exact = mesh.interpolate(|x, y| (pi * x).sin() * (pi * y).sin());
            let diff = &z - &exact;
            (diff.transpose() * m * diff)[(0, 0)].sqrt()
        })
        .collect();
    let slope = (errors[0] / errors[1]).log2();
    out.push(check(
        "manufactured-solution order",
        (slope - 2.0).abs() < 0.2,
        format!("observed order {slope:.3}"),
    ));
    out
}

fn problems_checks() -> Vec<CheckResult> {
    let mut out = Vec::new();
    let policy = SeedPolicy::new(33);

    let toy = quadratic_toy(1);
    let u_star = toy.optimum();
    let stationary = toy.mean_gradient(&u_star).norm();
    out.push(check(
        "toy optimum stationarity",
        stationary < 1e-10,
        format!("|grad J(u*)| = {stationary:.2e}"),
    ));

    let problems: Vec<(&str, Box<dyn ControlProblem>)> = vec![
        ("quadratic toy", Box::new(quadratic_toy(5))),
        ("diffusion", Box::new(diffusion_1d(Default::default()).unwrap())),
        ("advection-diffusion", Box::new(advdiff_5d(Default::default()).unwrap())),
    ];
    for (name, problem) in &problems {
        let dim = problem.control_dim();
        let mut worst = 0.0f64;
        for trial in 0..3u64 {
            let mut rng = policy.rng(trial, 0, 0);
            use rand::Rng;
            let u = DVector::from_fn(dim, |_, _| rng.gen::<f64>() - 0.5);
            let y: Vec<f64> = (0..problem.param_dim())
                .map(|_| match problem.coords()[0] {
                    CoordinateMeasure::Uniform { lo, hi } => lo + (hi - lo) * rng.gen::<f64>(),
                    CoordinateMeasure::Gaussian => rng.gen::<f64>(),
                })
                .collect();
            let dirs: Vec<DVector<f64>> = (0..3)
                .map(|_| {
                    let v = DVector::from_fn(dim, |_, _| rng.gen::<f64>() - 0.5);
                    let n = v.norm();
                    v / n
                })
                .collect();
            worst = worst.max(finite_difference_check(problem.as_ref(), &u, &y, &dirs, 1e-5));
        }
        out.push(check(
            &format!("{name} gradient vs finite differences"),
            worst < 1e-5,
            format!("max relative error {worst:.2e}"),
        ));
    }
    out
}

fn optim_checks() -> Vec<CheckResult> {
    let mut out = Vec::new();
    let ctx = uniform_ctx(1);
    let s = memory_size_for_space(&ctx, SamplingMeasure::OptimalMixture, 1.0);
    out.push(check(
        "sampling-inequality size (m=1, optimal, r=1)",
        s == 52,
        format!("s = {s}"),
    ));

    let bounds = theory_step_bounds(1.0, 1.0, 1.0, 100, 0.01);
    let passed = matches!(bounds, Ok((tau_simple, _, x))
        if (tau_simple - 1.0 / 14.0).abs() < 1e-14 && x > 0.0 && x < 1.0);
    out.push(check(
        "theory step bounds",
        passed,
        "tau_simple = alpha / (14 q L^2), x in (0,1)".into(),
    ));

    let toy = quadratic_toy(8);
    let fs = crate::optim::discretize_for_saga(&toy, 10).unwrap();
    let total: f64 = fs.weights.iter().sum();
    out.push(check(
        "quadrature weights sum to one",
        (total - 1.0).abs() < 1e-12,
        format!("sum = {total:.12}"),
    ));
    out
}
