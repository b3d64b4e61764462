use nalgebra::DVector;
use sglscv::optim::*;
use sglscv::polybasis::*;
use sglscv::problems::*;
use sglscv::sampling::*;

fn main() {
    let problem = diffusion_1d(DiffusionSpec::default()).unwrap();
    let u0 = DVector::zeros(problem.control_dim());
    let rule = gauss_legendre(50, -1.0, 1.0).unwrap();
    let boot = run_full_gradient(&problem, &rule, 40.0, &u0, 200_000, Some(1e-15), None);
    let u_ref = boot.final_control.clone();
    let policy = SeedPolicy::new(0x5161);
    let iters = 20_000usize;
    let set = MultiIndexSet::new(IndexSetKind::TotalDegree, 15, 1).unwrap();
    let ctx = BasisContext::new(set.clone(), problem.coords().to_vec());
    let s = stable_memory_size(&ctx, SamplingMeasure::Arcsine, 1.0);
    let mut logsum = vec![0.0f64; iters];
    for rep in 0..10u64 {
        let tr = run_sglscv_fixed(&problem, set.clone(), SamplingMeasure::Arcsine,
            &StepSchedule::Constant { tau: 0.1252 }, s, &u0, iters, &policy, rep, Some(&u_ref),
            InitKind::FrozenControl).unwrap();
        for (k, r) in tr.rows.iter().enumerate() { logsum[k] += r.error.max(1e-300).ln(); }
    }
    let gm: Vec<f64> = logsum.iter().map(|l| (l / 10.0).exp()).collect();
    // local slope over 1000-iteration windows
    for w in (0..19).map(|i| i * 1000) {
        let a = gm[w];
        let b = gm[w + 999];
        println!("k in [{w},{}]: gm {a:.3e} -> {b:.3e}, local slope {:.3e}", w + 999, (b / a).ln() / 999.0);
    }
}
