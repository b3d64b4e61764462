use nalgebra::DVector;
use sglscv::optim::*;
use sglscv::problems::*;
use sglscv::sampling::SeedPolicy;

fn main() {
    let toy = quadratic_toy(30);
    let fs = discretize_for_saga(&toy, 20).unwrap();
    let u0 = DVector::zeros(4);
    let mut u_ref = u0.clone();
    for _ in 0..20_000 { let g = fs.mean_gradient(&u_ref); u_ref -= g * 0.4; }
    let policy = SeedPolicy::new(15);
    let reps = 10u64;
    let iters = 6000usize;
    let mut logsum = vec![0.0f64; iters];
    for rep in 0..reps {
        let t = run_saga(&fs, 0.12, &u0, iters, &policy, rep, Some(&u_ref));
        for (k, r) in t.rows.iter().enumerate() { logsum[k] += r.error.max(1e-300).ln(); }
    }
    let gm: Vec<f64> = logsum.iter().map(|l| (l / reps as f64).exp()).collect();
    let pts: Vec<(f64, f64)> = (0..iters).step_by(10)
        .filter(|&k| k >= 100 && gm[k] > 1e-11)
        .map(|k| (k as f64, gm[k])).collect();
    let n = pts.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (x, e) in &pts { let ly = e.ln(); sx += x; sy += ly; sxx += x*x; sxy += x*ly; }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let mean_y = sy / n;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for (x, e) in &pts { let ly = e.ln(); ss_res += (ly - (slope*x+intercept)).powi(2); ss_tot += (ly - mean_y).powi(2); }
    println!("geomean over {reps} reps: n={} slope={slope:.3e} R2={:.5}", pts.len(), 1.0 - ss_res/ss_tot);
}
