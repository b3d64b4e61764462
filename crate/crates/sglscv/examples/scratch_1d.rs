use nalgebra::DVector;
use sglscv::optim::*;
use sglscv::polybasis::*;
use sglscv::problems::*;
use sglscv::sampling::*;

fn main() {
    let problem = diffusion_1d(DiffusionSpec::default()).unwrap();
    let (_, u_star) = analytic_optimum(&problem).unwrap();
    let u0 = DVector::zeros(problem.control_dim());

    // Criterion 1: bootstrap reference vs analytic optimum at n=8 and n=16.
    let t0 = std::time::Instant::now();
    let mut errs = Vec::new();
    for n in [8usize, 16] {
        let spec = DiffusionSpec { mesh_n: n, ..Default::default() };
        let p = diffusion_1d(spec).unwrap();
        let rule = gauss_legendre(50, -1.0, 1.0).unwrap();
        let trace = run_full_gradient(&p, &rule, 0.17, &DVector::zeros(p.control_dim()), 200_000, Some(1e-13), None);
        let (_, ustar_n) = analytic_optimum(&p).unwrap();
        let err = p.norm(&(&trace.final_control - &ustar_n));
        println!("n={n}: iters {}, |u_h - u*| = {err:.6e}", trace.iterations());
        errs.push(err);
    }
    println!("ratio = {:.3} (want [3.3, 4.7]), elapsed {:?}", errs[0] / errs[1], t0.elapsed());

    // Reference for the 1D criteria runs.
    let rule = gauss_legendre(50, -1.0, 1.0).unwrap();
    let boot = run_full_gradient(&problem, &rule, 0.17, &u0, 200_000, Some(1e-13), None);
    let u_ref = boot.final_control.clone();
    println!("bootstrap iters {}, |u_ref - u*_analytic| = {:.3e}, |u_ref| = {:.4}",
             boot.iterations(), problem.norm(&(&u_ref - &u_star)), problem.norm(&u_ref));

    // Criterion 2 shape: fig1 runs with 4 replicates, K = 20000.
    let policy = SeedPolicy::new(0x5161);
    for (m, tau) in [(6usize, 0.1556), (16, 0.1252), (21, 0.1146)] {
        let t0 = std::time::Instant::now();
        let set = MultiIndexSet::new(IndexSetKind::TotalDegree, m - 1, 1).unwrap();
        let ctx = BasisContext::new(set.clone(), problem.coords().to_vec());
        let s = stable_memory_size(&ctx, SamplingMeasure::Arcsine, 1.0);
        let reps = 4u64;
        let iters = 20_000usize;
        let mut logsum = vec![0.0f64; iters];
        let mut cond_frac = 0.0;
        for rep in 0..reps {
            let tr = run_sglscv_fixed(&problem, set.clone(), SamplingMeasure::Arcsine,
                &StepSchedule::Constant { tau }, s, &u0, iters, &policy, rep, Some(&u_ref),
                InitKind::FrozenControl).unwrap();
            for (k, r) in tr.rows.iter().enumerate() { logsum[k] += r.error.max(1e-300).ln(); }
            cond_frac += tr.rows.iter().filter(|r| r.conditioned).count() as f64 / iters as f64;
        }
        let gm: Vec<f64> = logsum.iter().map(|l| (l / reps as f64).exp()).collect();
        let plateau = gm[iters - 2000..].iter().product::<f64>().powf(1.0 / 2000.0);
        // crude decay rate: fit over early window where error > 10*plateau
        let e0 = gm[0];
        let cut = (plateau * 10.0).max(e0 * 1e-12);
        let end = gm.iter().position(|&e| e < cut).unwrap_or(iters);
        println!("m={m} s={s}: cond {:.3}, e0 {e0:.3e}, plateau {plateau:.3e}, decay-end k={end}, rate {:.3e}/iter, {:?}",
                 cond_frac / reps as f64, (e0 / cut).ln() / end as f64, t0.elapsed());
    }
}
