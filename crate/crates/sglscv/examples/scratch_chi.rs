use sglscv::leastsq::{Memory, MemoryRecord};
use sglscv::polybasis::*;
use sglscv::sampling::*;
use nalgebra::DVector;

fn ctx_1d(m_dim: usize) -> BasisContext {
    let set = MultiIndexSet::new(IndexSetKind::TotalDegree, m_dim - 1, 1).unwrap();
    BasisContext::new(set, vec![CoordinateMeasure::Uniform { lo: -1.0, hi: 1.0 }])
}

fn ks_against(points: &mut Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = points.len();
    let mut stat = 0.0f64;
    for (i, y) in points.iter().enumerate() {
        let f = cdf(*y);
        stat = stat.max((f - i as f64 / n as f64).abs());
        stat = stat.max(((i + 1) as f64 / n as f64 - f).abs());
    }
    stat
}

fn main() {
    let policy = SeedPolicy::new(99);
    let ctx = ctx_1d(4);
    let sampler = Sampler::new(SamplingMeasure::OptimalMixture, &ctx).unwrap();
    let n = 100_000;
    let mut pts: Vec<f64> = (0..n)
        .map(|i| {
            let mut rng = policy.rng(0, i as u64, 3);
            sampler.draw_component(&ctx, &[1], &mut rng).unwrap()[0]
        })
        .collect();
    let stat = ks_against(&mut pts, |y| (y * y * y + 1.0) / 2.0);
    println!("phi_1^2 KS: {stat} (crit {})", 1.628 / (n as f64).sqrt());

    let quad = gauss_legendre(200, -1.0, 1.0).unwrap();
    let bins = 20usize;
    let mut pts: Vec<f64> = (0..n)
        .map(|i| {
            let mut rng = policy.rng(1, i as u64, 3);
            sampler.draw(&ctx, &mut rng).unwrap()[0]
        })
        .collect();
    let density = |y: f64| ctx.squared_basis_sum(&[y]) / ctx.size() as f64;
    let mut expected = vec![0.0f64; bins];
    for (node, w) in quad.nodes.iter().zip(&quad.weights) {
        let y = node[0];
        let b = (((y + 1.0) / 2.0) * bins as f64).min(bins as f64 - 1.0) as usize;
        expected[b] += w * density(y);
    }
    println!("expected sum: {}", expected.iter().sum::<f64>());
    let mut observed = vec![0.0f64; bins];
    for y in pts.drain(..) {
        let b = (((y + 1.0) / 2.0) * bins as f64).min(bins as f64 - 1.0) as usize;
        observed[b] += 1.0;
    }
    let mut chi2 = 0.0;
    for b in 0..bins {
        let e = expected[b] * n as f64;
        chi2 += (observed[b] - e).powi(2) / e;
    }
    println!("mixture draw chi2 (m=4): {chi2}");

    let old = ctx_1d(2);
    let new = ctx_1d(4);
    let n = 20_000usize;
    let sampler_old = Sampler::new(SamplingMeasure::OptimalMixture, &old).unwrap();
    let policy = SeedPolicy::new(13);
    let mut memory = Memory::new(n);
    for i in 0..n {
        let mut rng = policy.rng(0, i as u64, LANE_INIT);
        let point = sampler_old.draw(&old, &mut rng).unwrap();
        memory.push(MemoryRecord { point, grad: DVector::zeros(1), control: DVector::zeros(1) });
    }
    let density_old = |y: f64| old.squared_basis_sum(&[y]) / old.size() as f64;
    let mut expected_old = vec![0.0f64; bins];
    for (node, w) in quad.nodes.iter().zip(&quad.weights) {
        let y = node[0];
        let b = (((y + 1.0) / 2.0) * bins as f64).min(bins as f64 - 1.0) as usize;
        expected_old[b] += w * density_old(y);
    }
    let mut observed = vec![0.0f64; bins];
    for r in memory.iter_all() {
        let b = (((r.point[0] + 1.0) / 2.0) * bins as f64).min(bins as f64 - 1.0) as usize;
        observed[b] += 1.0;
    }
    let mut chi2 = 0.0;
    for b in 0..bins {
        let e = expected_old[b] * n as f64;
        chi2 += (observed[b] - e).powi(2) / e;
    }
    println!("old memory vs old density chi2: {chi2}");

    resample_memory(&mut memory, old.set(), &new, |_, _| DVector::zeros(1), &policy, 0, 1).unwrap();
    let mut observed = vec![0.0f64; bins];
    for r in memory.iter_all() {
        let b = (((r.point[0] + 1.0) / 2.0) * bins as f64).min(bins as f64 - 1.0) as usize;
        observed[b] += 1.0;
    }
    let mut expected_new = vec![0.0f64; bins];
    let density_new = |y: f64| new.squared_basis_sum(&[y]) / new.size() as f64;
    for (node, w) in quad.nodes.iter().zip(&quad.weights) {
        let y = node[0];
        let b = (((y + 1.0) / 2.0) * bins as f64).min(bins as f64 - 1.0) as usize;
        expected_new[b] += w * density_new(y);
    }
    let mut chi2 = 0.0;
    for b in 0..bins {
        let e = expected_new[b] * n as f64;
        let c = (observed[b] - e).powi(2) / e;
        println!("bin {b}: obs {} exp {e:.1} contrib {c:.2}", observed[b]);
        chi2 += c;
    }
    println!("resampled chi2: {chi2}");
}
