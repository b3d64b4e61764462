use nalgebra::DVector;
use sglscv::optim::*;
use sglscv::polybasis::*;
use sglscv::problems::*;
use sglscv::sampling::*;

fn ema_final(rows: &[TraceRow], lambda: f64) -> f64 {
    let mut ema = rows[0].error;
    for r in rows { ema = (1.0 - lambda) * ema + lambda * r.error; }
    ema
}

fn main() {
    let problem = advdiff_5d(AdvDiffSpec::default()).unwrap();
    let dim = problem.control_dim();
    let rule = reference_rule(problem.coords(), 5).unwrap();
    let boot = run_full_gradient(&problem, &rule, 100.0, &DVector::zeros(dim), 2_000_000, Some(1e-12), None);
    let u_ref = boot.final_control.clone();
    println!("e0 = {:.4}", u_ref.norm());
    let iters = 100_000usize;

    // SAGA-5 at two taus.
    for tau in [100.0, 200.0] {
        let t0 = std::time::Instant::now();
        let fs = discretize_for_saga(&problem, 5).unwrap();
        let policy = SeedPolicy::new(0x5165);
        let tr = run_saga(&fs, tau, &DVector::zeros(dim), iters, &policy, 0, Some(&u_ref));
        println!("saga5 tau={tau}: final={:.4e} ema={:.4e} ({:?})",
                 tr.rows.last().unwrap().error, ema_final(&tr.rows, 0.01), t0.elapsed());
    }

    // Variable SG-LSCV per the draft preset.
    let t0 = std::time::Instant::now();
    let params = [2usize, 5, 8, 11, 14, 17];
    let sets: Vec<MultiIndexSet> = params.iter()
        .map(|&p| MultiIndexSet::new(IndexSetKind::HyperbolicCross, p, 5).unwrap()).collect();
    for s in &sets { print!("|L|={} ", s.len()); }
    println!();
    let schedule = SpaceSchedule::auto(IndexSetKind::HyperbolicCross, 5,
        &params, SamplingMeasure::OptimalMixture,
        |m| {
            ((16.5 * m as f64 * (2.0 * m as f64).ln()).ceil() as usize).max(m + 2)
        }, 1200).unwrap();
    let policy = SeedPolicy::new(0x5165);
    let tr = run_sglscv_variable(&problem, &schedule,
        &StepSchedule::MemoryLinked { c0: 2.3e-4, c1: 4.7e-3 },
        &DVector::zeros(dim), iters, &policy, 0, Some(&u_ref), InitKind::FrozenControl).unwrap();
    println!("variable: final={:.4e} ema={:.4e} cond_rate={:.3} evals={} refactors={} ({:?})",
             tr.rows.last().unwrap().error, ema_final(&tr.rows, 0.01),
             tr.rows.iter().filter(|r| r.conditioned).count() as f64 / iters as f64,
             tr.final_grad_evals(), tr.refactors, t0.elapsed());
    for k in [0usize, 5000, 20000, 40000, 60000, 80000, 99999] {
        println!("  k={k}: err {:.4e} m {} s {} tau {:.1}", tr.rows[k].error, tr.rows[k].m, tr.rows[k].s, tr.rows[k].tau);
    }
}
