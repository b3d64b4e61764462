use nalgebra::DVector;
use sglscv::leastsq::*;
use sglscv::polybasis::*;
use sglscv::sampling::*;

fn main() {
    for m in [6usize, 16, 21, 56, 136] {
        let set = MultiIndexSet::new(IndexSetKind::TotalDegree, m - 1, 1).unwrap();
        let (set, d) = if m > 21 {
            // 5D hyperbolic-cross sizes 56 and 136.
            let p = if m == 56 { 5 } else { 9 };
            (MultiIndexSet::new(IndexSetKind::HyperbolicCross, p, 5).unwrap(), 5)
        } else {
            (set, 1)
        };
        let lo = if d == 5 { 0.0 } else { -1.0 };
        let hi = 1.0;
        let ctx = BasisContext::new(set, vec![CoordinateMeasure::Uniform { lo, hi }; d]);
        let m_real = ctx.size();
        let sampler = Sampler::new(SamplingMeasure::Arcsine, &ctx).unwrap();
        let policy = SeedPolicy::new(77);
        for mult in [2usize, 3, 4, 6, 8] {
            let s = mult * m_real + 10;
            let trials = 200;
            let mut fails = 0;
            let mut max_dev: f64 = 0.0;
            for t in 0..trials {
                let mut memory = Memory::new(s);
                for i in 0..s {
                    let mut rng = policy.rng((m_real * 1000 + t) as u64, i as u64, LANE_INIT);
                    let p = sampler.draw(&ctx, &mut rng).unwrap();
                    memory.push(MemoryRecord { point: p, grad: DVector::zeros(1), control: DVector::zeros(1) });
                }
                let state = QrState::from_memory(&memory, &ctx, SamplingMeasure::Arcsine);
                let dev = gram_deviation(&state.gram());
                max_dev = max_dev.max(dev);
                if dev > 0.5 { fails += 1; }
            }
            println!("m={m_real} d={d} s={s} (x{mult}): fails {fails}/{trials}, max dev {max_dev:.3}");
        }
    }
}
