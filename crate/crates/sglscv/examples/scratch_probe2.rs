use nalgebra::DVector;
use sglscv::optim::*;
use sglscv::polybasis::*;
use sglscv::problems::*;
use sglscv::sampling::*;

fn r2_and_slope(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (x, e) in pts {
        let ly = e.ln();
        sx += x; sy += ly; sxx += x * x; sxy += x * ly;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let mean_y = sy / n;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for (x, e) in pts {
        let ly = e.ln();
        ss_res += (ly - (slope * x + intercept)).powi(2);
        ss_tot += (ly - mean_y).powi(2);
    }
    (slope, 1.0 - ss_res / ss_tot)
}

fn main() {
    let problem = diffusion_1d(DiffusionSpec::default()).unwrap();
    let rule = gauss_legendre(60, -1.0, 1.0).unwrap();
    let (cstar, u_star) = analytic_optimum(&problem).unwrap();
    println!("c* = {cstar}, |u*| = {}", problem.norm(&u_star));
    let grads: Vec<DVector<f64>> = rule.nodes.iter().map(|y| problem.gradient(&u_star, y)).collect();
    let total_sq: f64 = rule.weights.iter().zip(&grads)
        .map(|(w, g)| w * (g.transpose() * problem.mass() * g)[(0, 0)]).sum();
    let mut captured = 0.0;
    let mut es = Vec::new();
    for m in 0..=15usize {
        let mut coeff = DVector::zeros(problem.control_dim());
        for ((node, w), g) in rule.nodes.iter().zip(&rule.weights).zip(&grads) {
            coeff += g * (*w * legendre_value(m, node[0]));
        }
        captured += (coeff.transpose() * problem.mass() * &coeff)[(0, 0)];
        if m >= 1 { es.push(((m + 1) as f64, (total_sq - captured).max(1e-300).sqrt())); }
    }
    println!("e_m at u*: {:?}", es.iter().map(|p| p.1).collect::<Vec<_>>());
    let kept: Vec<(f64,f64)> = es.iter().cloned().filter(|p| p.1 > es[0].1 * 1e-6).collect();
    let tail: Vec<(f64,f64)> = kept.iter().cloned().skip(kept.len().saturating_sub(6)).collect();
    println!("full window: {:?}", r2_and_slope(&kept));
    println!("last-6 window: {:?}", r2_and_slope(&tail));

    // Adam variants.
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
    let policy = SeedPolicy::new(4);
    for (tau, iters) in [(0.05, 200usize), (0.02, 300), (0.01, 400)] {
        let trace = run_adam(&det, tau, 0.9, 0.99, &DVector::zeros(3), iters, &policy, 0, None);
        let mut violations = 0; let mut first = 0usize;
        for (i, pair) in trace.rows.windows(2).enumerate().skip(50) {
            if pair[1].objective > pair[0].objective + 1e-12 && pair[0].objective > 1e-8 {
                violations += 1; if first == 0 { first = i; }
            }
        }
        println!("adam tau={tau}: violations(obj>1e-8)={violations} first={first} final={:.2e}",
                 trace.rows.last().unwrap().objective);
    }

    // SAGA regression window probe.
    let toy = quadratic_toy(30);
    let fs = discretize_for_saga(&toy, 20).unwrap();
    let u0 = DVector::zeros(toy.control_dim());
    let mut u_ref = u0.clone();
    for _ in 0..20_000 { let g = fs.mean_gradient(&u_ref); u_ref -= g * 0.4; }
    let policy = SeedPolicy::new(15);
    let trace = run_saga(&fs, 0.12, &u0, 6000, &policy, 0, Some(&u_ref));
    for floor in [1e-12, 1e-10, 1e-9] {
        let pts: Vec<(f64, f64)> = trace.rows.iter()
            .filter(|r| r.iter >= 200 && r.iter % 50 == 0 && r.error > floor)
            .map(|r| (r.iter as f64 + 1.0, r.error)).collect();
        let n = pts.len() as f64;
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for (x, e) in &pts { let ly = e.ln(); sx += x; sy += ly; sxx += x*x; sxy += x*ly; }
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let intercept = (sy - slope * sx) / n;
        let mean_y = sy / n;
        let (mut ss_res, mut ss_tot) = (0.0, 0.0);
        for (x, e) in &pts { let ly = e.ln(); ss_res += (ly - (slope*x+intercept)).powi(2); ss_tot += (ly - mean_y).powi(2); }
        println!("saga floor={floor:.0e}: n={} slope={slope:.2e} R2={:.5} last_err={:.2e}",
                 pts.len(), 1.0 - ss_res/ss_tot, trace.rows.last().unwrap().error);
    }
}
