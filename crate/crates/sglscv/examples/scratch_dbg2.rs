use nalgebra::DVector;
use sglscv::optim::*;
use sglscv::polybasis::*;
use sglscv::problems::*;
use sglscv::sampling::*;

fn main() {
    let problem = diffusion_1d(DiffusionSpec::default()).unwrap();
    let u0 = DVector::zeros(problem.control_dim());
    let rule = gauss_legendre(50, -1.0, 1.0).unwrap();
    let boot = run_full_gradient(&problem, &rule, 0.17, &u0, 200_000, Some(1e-13), None);
    let u_ref = boot.final_control.clone();

    let policy = SeedPolicy::new(0x5161);
    for (m, tau) in [(16usize, 0.1252), (21, 0.1146)] {
        let set = MultiIndexSet::new(IndexSetKind::TotalDegree, m - 1, 1).unwrap();
        let ctx = BasisContext::new(set.clone(), problem.coords().to_vec());
        let s = stable_memory_size(&ctx, SamplingMeasure::Arcsine, 1.0);
        let tr = run_sglscv_fixed(&problem, set, SamplingMeasure::Arcsine,
            &StepSchedule::Constant { tau }, s, &u0, 20_000, &policy, 0, Some(&u_ref),
            InitKind::FrozenControl).unwrap();
        println!("--- m={m} s={s}");
        for k in [0usize, 10, 100, 300, 600, 1000, 1500, 2500, 4000, 6000, 9000, 12000, 16000, 19999] {
            let r = &tr.rows[k];
            println!("k={k}: err {:.4e} cond {}", r.error, r.conditioned);
        }
        let minerr = tr.rows.iter().map(|r| r.error).fold(f64::INFINITY, f64::min);
        println!("min error {minerr:.4e}");
    }
}
