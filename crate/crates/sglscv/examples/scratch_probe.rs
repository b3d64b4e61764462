use nalgebra::DVector;
use sglscv::optim::*;
use sglscv::polybasis::*;
use sglscv::problems::*;
use sglscv::sampling::*;

fn main() {
    // Smoothness R^2 probe at several controls.
    let problem = diffusion_1d(DiffusionSpec::default()).unwrap();
    let rule = gauss_legendre(60, -1.0, 1.0).unwrap();
    let (_, u_star) = analytic_optimum(&problem).unwrap();
    for (name, u) in [
        ("zero", DVector::zeros(problem.control_dim())),
        ("ustar", u_star.clone()),
        ("half", &u_star * 0.5),
    ] {
        let grads: Vec<DVector<f64>> = rule.nodes.iter().map(|y| problem.gradient(&u, y)).collect();
        let total_sq: f64 = rule
            .weights
            .iter()
            .zip(&grads)
            .map(|(w, g)| w * (g.transpose() * problem.mass() * g)[(0, 0)])
            .sum();
        let mut captured = 0.0;
        let mut es = Vec::new();
        for m in 0..=15usize {
            let mut coeff = DVector::zeros(problem.control_dim());
            for ((node, w), g) in rule.nodes.iter().zip(&rule.weights).zip(&grads) {
                coeff += g * (*w * legendre_value(m, node[0]));
            }
            captured += (coeff.transpose() * problem.mass() * &coeff)[(0, 0)];
            if m >= 1 {
                es.push(((m + 1) as f64, (total_sq - captured).max(1e-300).sqrt()));
            }
        }
        println!("-- u = {name}: e_m = {:?}", es.iter().map(|p| p.1).collect::<Vec<_>>());
        // R^2 over full window and floor-trimmed window.
        for (label, pts) in [
            ("full", es.clone()),
            ("trim", es.iter().cloned().filter(|p| p.1 > es[0].1 * 1e-10).collect::<Vec<_>>()),
        ] {
            let n = pts.len() as f64;
            let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
            for (x, e) in &pts {
                let ly = e.ln();
                sx += x; sy += ly; sxx += x * x; sxy += x * ly;
            }
            let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
            let intercept = (sy - slope * sx) / n;
            let mean_y = sy / n;
            let (mut ss_res, mut ss_tot) = (0.0, 0.0);
            for (x, e) in &pts {
                let ly = e.ln();
                ss_res += (ly - (slope * x + intercept)).powi(2);
                ss_tot += (ly - mean_y).powi(2);
            }
            println!("   {label}: n={} slope={slope:.3} R2={:.5}", pts.len(), 1.0 - ss_res / ss_tot);
        }
    }

    // Adam probe.
    let toy = quadratic_toy(123);
    let policy = SeedPolicy::new(4);
    struct Det { t: DVector<f64>, c: Vec<CoordinateMeasure> }
    impl ControlProblem for Det {
        fn control_dim(&self) -> usize { 3 }
        fn coords(&self) -> &[CoordinateMeasure] { &self.c }
        fn cost_and_gradient(&self, u: &DVector<f64>, _y: &[f64]) -> (f64, DVector<f64>) {
            let d = u - &self.t;
            (0.5 * d.norm_squared(), d)
        }
        fn inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 { a.dot(b) }
    }
    let det = Det { t: DVector::from_vec(vec![1.0, -2.0, 0.5]), c: vec![CoordinateMeasure::Uniform { lo: -1.0, hi: 1.0 }] };
    let trace = run_adam(&det, 0.05, 0.9, 0.99, &DVector::zeros(3), 400, &policy, 0, None);
    let mut violations = 0;
    let mut first_viol = 0;
    for (i, pair) in trace.rows.windows(2).enumerate().skip(50) {
        if pair[1].objective > pair[0].objective + 1e-12 {
            violations += 1;
            if first_viol == 0 { first_viol = i; }
        }
    }
    println!("adam violations after burn-in: {violations}, first at {first_viol}, obj[50]={:.3e} obj[399]={:.3e}",
        trace.rows[50].objective, trace.rows[399].objective);
    let _ = toy;
}
