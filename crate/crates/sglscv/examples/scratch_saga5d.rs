use nalgebra::DVector;
use sglscv::optim::*;
use sglscv::polybasis::*;
use sglscv::problems::*;
use sglscv::sampling::*;

fn main() {
    let problem = advdiff_5d(AdvDiffSpec::default()).unwrap();
    let dim = problem.control_dim();
    let rule = reference_rule(problem.coords(), 5).unwrap();
    let boot = run_full_gradient(&problem, &rule, 100.0, &DVector::zeros(dim), 2_000_000, Some(1e-12), None);
    let u_ref = boot.final_control.clone();
    let iters = 100_000usize;
    let ema_final = |rows: &Vec<TraceRow>| {
        let mut ema = rows[0].error;
        for r in rows.iter() { ema = 0.99 * ema + 0.01 * r.error; }
        ema
    };
    for (pts, tau) in [(5usize, 300.0), (5, 400.0), (8, 100.0), (8, 200.0), (8, 400.0)] {
        let t0 = std::time::Instant::now();
        let fs = discretize_for_saga(&problem, pts).unwrap();
        let policy = SeedPolicy::new(0x5165);
        let tr = run_saga(&fs, tau, &DVector::zeros(dim), iters, &policy, 0, Some(&u_ref));
        println!("saga{pts} tau={tau}: final={:.4e} ema={:.4e} ({:?})",
                 tr.rows.last().unwrap().error, ema_final(&tr.rows), t0.elapsed());
    }
}
