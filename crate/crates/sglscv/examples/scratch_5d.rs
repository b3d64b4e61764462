use nalgebra::DVector;
use sglscv::optim::*;
use sglscv::polybasis::*;
use sglscv::problems::*;
use sglscv::sampling::*;

fn main() {
    let problem = advdiff_5d(AdvDiffSpec::default()).unwrap();
    let dim = problem.control_dim();
    let rule = reference_rule(problem.coords(), 5).unwrap();

    // Exact spectrum of the discretized mean Hessian via probing.
    let t0 = std::time::Instant::now();
    let evals: Vec<_> = rule.nodes.iter().map(|y| problem.node_evaluator(y)).collect();
    let mean_grad = |u: &DVector<f64>| -> DVector<f64> {
        let mut g = DVector::zeros(dim);
        for (e, w) in evals.iter().zip(&rule.weights) { g += e(u).1 * *w; }
        g
    };
    let g0 = mean_grad(&DVector::zeros(dim));
    let mut h = nalgebra::DMatrix::zeros(dim, dim);
    for j in 0..dim {
        let mut probe = DVector::zeros(dim);
        probe[j] = 1.0;
        h.column_mut(j).copy_from(&(mean_grad(&probe) - &g0));
    }
    let hsym = (&h + h.transpose()) * 0.5;
    let eig = hsym.symmetric_eigen();
    let lmax = eig.eigenvalues.max();
    let lmin = eig.eigenvalues.min();
    println!("H spectrum: [{lmin:.4e}, {lmax:.4e}], tau_max = {:.0}, probe {:?}", 2.0/lmax, t0.elapsed());
    println!("rate at tau=100: {:.3e}; at tau=9.85 (m=17 rule): {:.3e}", 2.0*lmin*100.0, 2.0*lmin*9.85);

    // Bootstrap via affine descent.
    let t0 = std::time::Instant::now();
    let boot = run_full_gradient(&problem, &rule, 100.0, &DVector::zeros(dim), 2_000_000, Some(1e-12), None);
    let u_ref = boot.final_control.clone();
    println!("bootstrap: {} iters, |u_ref| = {:.4e}, elapsed {:?}", boot.iterations(), u_ref.norm(), t0.elapsed());
    let e0 = u_ref.norm();
    println!("e0 (|0 - u_ref|): {e0:.4e}");

    // SAGA tau probe at 30k iterations.
    for tau in [50.0, 100.0, 200.0, 400.0] {
        let t0 = std::time::Instant::now();
        let fs = discretize_for_saga(&problem, 5).unwrap();
        let policy = SeedPolicy::new(0x5165);
        let tr = run_saga(&fs, tau, &DVector::zeros(dim), 30_000, &policy, 0, Some(&u_ref));
        // EMA final
        let lambda = 0.01;
        let mut ema = tr.rows[0].error;
        for r in &tr.rows { ema = (1.0 - lambda) * ema + lambda * r.error; }
        println!("saga5 tau={tau}: err@30k={:.4e} ema={:.4e} ({:?})",
                 tr.rows.last().unwrap().error, ema, t0.elapsed());
    }
}
