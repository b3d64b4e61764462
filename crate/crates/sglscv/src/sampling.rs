//! Samplers and importance weights for the reference, arcsine, and optimal
//! mixture measures, plus the nested-space resampling primitive.
//!
//! All randomness flows through [`SeedPolicy`], which derives an independent
//! counter-based stream for every (replicate, iteration, draw) triple, so
//! trajectories are reproducible bit-for-bit regardless of call interleaving.

use crate::leastsq::Memory;
use crate::polybasis::{BasisContext, CoordinateMeasure, MultiIndexSet};
use nalgebra::DVector;
use rand::distributions::Bernoulli;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Draw lane for the per-iteration parameter sample.
pub const LANE_SAMPLE: u64 = 0;
/// Draw lane for initial-memory fills (indexed by slot).
pub const LANE_INIT: u64 = 1;
/// Draw lane for SAGA/finite-sum index draws.
pub const LANE_INDEX: u64 = 2;
/// First draw lane for resampling; slot j uses `LANE_RESAMPLE + j`.
pub const LANE_RESAMPLE: u64 = 16;

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("arcsine sampling requires bounded (uniform) coordinates")]
    UnboundedArcsine,
    #[error("rejection sampler exhausted {0} attempts; envelope is misconfigured")]
    EnvelopeExhausted(usize),
    #[error("old index set is not contained in the new index set")]
    NotNested,
}

/// Master seed plus the derivation rule mapping (replicate, iteration, draw)
/// to an independent RNG stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedPolicy {
    pub master: u64,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

impl SeedPolicy {
    pub fn new(master: u64) -> Self {
        SeedPolicy { master }
    }

    /// Stream for a given (replicate, iteration, draw index).
    pub fn rng(&self, replicate: u64, iteration: u64, draw: u64) -> ChaCha8Rng {
        let mut state = splitmix(self.master);
        state = splitmix(state ^ replicate.wrapping_mul(0xa076_1d64_78bd_642f));
        state = splitmix(state ^ iteration.wrapping_mul(0xe703_7ed1_a0b4_28db));
        state = splitmix(state ^ draw.wrapping_mul(0x8ebc_6af0_9c88_c6e3));
        ChaCha8Rng::seed_from_u64(state)
    }
}

/// Sampling measure for the parameter vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMeasure {
    /// The reference measure itself (importance weight 1).
    Reference,
    /// Tensorized arcsine measure on the bounded domain.
    Arcsine,
    /// The mixture `(1/m) sum_nu phi_nu^2 d rho` attached to the current
    /// index set.
    OptimalMixture,
}

/// Importance weight `w = d rho / d mu` at `y`.
pub fn weight(measure: SamplingMeasure, ctx: &BasisContext, y: &[f64]) -> f64 {
    match measure {
        SamplingMeasure::Reference => 1.0,
        SamplingMeasure::Arcsine => {
            let mut w = 1.0;
            for (i, cm) in ctx.coords().iter().enumerate() {
                assert!(cm.is_bounded(), "arcsine weight needs bounded coordinates");
                let t = cm.to_canonical(y[i]);
                w *= std::f64::consts::FRAC_PI_2 * (1.0 - t * t).max(0.0).sqrt();
            }
            w
        }
        SamplingMeasure::OptimalMixture => {
            let sum = ctx.squared_basis_sum(y);
            assert!(sum > 0.0, "basis values cannot all vanish when phi_0 = 1");
            ctx.size() as f64 / sum
        }
    }
}

const ENVELOPE_GRID: usize = 10_000;
const ENVELOPE_MARGIN: f64 = 1.05;
const GAUSS_PROPOSAL_SD: f64 = std::f64::consts::SQRT_2;
const GAUSS_GRID_HALF_WIDTH: f64 = 10.0;
const REJECTION_BUDGET: usize = 100_000;

fn gaussian_density(y: f64) -> f64 {
    (-0.5 * y * y).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn gauss_proposal_density(y: f64) -> f64 {
    let s = GAUSS_PROPOSAL_SD;
    (-0.5 * (y / s) * (y / s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
}

/// Sampler for one measure over one basis context. Rejection envelopes for
/// the mixture components are precomputed on dense grids at construction.
#[derive(Clone, Debug)]
pub struct Sampler {
    measure: SamplingMeasure,
    uniform_env: Vec<f64>,
    gauss_env: Vec<f64>,
}

impl Sampler {
    pub fn new(measure: SamplingMeasure, ctx: &BasisContext) -> Result<Self, SamplingError> {
        if measure == SamplingMeasure::Arcsine && !ctx.coords().iter().all(|c| c.is_bounded()) {
            return Err(SamplingError::UnboundedArcsine);
        }
        let mut uniform_env = Vec::new();
        let mut gauss_env = Vec::new();
        if measure == SamplingMeasure::OptimalMixture {
            let max_deg = ctx.set().max_degree();
            let has_uniform = ctx.coords().iter().any(|c| c.is_bounded());
            let has_gauss = ctx.coords().iter().any(|c| !c.is_bounded());
            if has_uniform {
                uniform_env = (0..=max_deg)
                    .map(|k| {
                        let mut best = 0.0f64;
                        for g in 0..=ENVELOPE_GRID {
                            let t = -1.0 + 2.0 * g as f64 / ENVELOPE_GRID as f64;
                            let v = crate::polybasis::legendre_value(k, t).powi(2);
                            best = best.max(v);
                        }
                        best * ENVELOPE_MARGIN
                    })
                    .collect();
            }
            if has_gauss {
                gauss_env = (0..=max_deg)
                    .map(|k| {
                        let mut best = 0.0f64;
                        for g in 0..=ENVELOPE_GRID {
                            let t = -GAUSS_GRID_HALF_WIDTH
                                + 2.0 * GAUSS_GRID_HALF_WIDTH * g as f64 / ENVELOPE_GRID as f64;
                            let ratio = crate::polybasis::hermite_value(k, t).powi(2)
                                * gaussian_density(t)
                                / gauss_proposal_density(t);
                            best = best.max(ratio);
                        }
                        best * ENVELOPE_MARGIN
                    })
                    .collect();
            }
        }
        Ok(Sampler {
            measure,
            uniform_env,
            gauss_env,
        })
    }

    pub fn measure(&self) -> SamplingMeasure {
        self.measure
    }

    /// Draws one point of the measure.
    pub fn draw<R: Rng>(&self, ctx: &BasisContext, rng: &mut R) -> Result<Vec<f64>, SamplingError> {
        match self.measure {
            SamplingMeasure::Reference => Ok(ctx
                .coords()
                .iter()
                .map(|cm| draw_reference(cm, rng))
                .collect()),
            SamplingMeasure::Arcsine => Ok(ctx
                .coords()
                .iter()
                .map(|cm| {
                    let u: f64 = rng.gen();
                    cm.from_canonical((std::f64::consts::PI * u).cos())
                })
                .collect()),
            SamplingMeasure::OptimalMixture => {
                let j = rng.gen_range(0..ctx.size());
                let nu = ctx.set().index(j).clone();
                self.draw_component(ctx, &nu.0, rng)
            }
        }
    }

    /// Draws from the single mixture component `phi_nu^2 d rho` by
    /// per-coordinate rejection.
    pub fn draw_component<R: Rng>(
        &self,
        ctx: &BasisContext,
        degrees: &[usize],
        rng: &mut R,
    ) -> Result<Vec<f64>, SamplingError> {
        degrees
            .iter()
            .zip(ctx.coords())
            .map(|(&deg, cm)| self.draw_univariate(cm, deg, rng))
            .collect()
    }

    fn draw_univariate<R: Rng>(
        &self,
        cm: &CoordinateMeasure,
        degree: usize,
        rng: &mut R,
    ) -> Result<f64, SamplingError> {
        if degree == 0 {
            return Ok(draw_reference(cm, rng));
        }
        match cm {
            CoordinateMeasure::Uniform { .. } => {
                let envelope = self.uniform_env[degree];
                for _ in 0..REJECTION_BUDGET {
                    let t: f64 = rng.gen_range(-1.0..1.0);
                    let u: f64 = rng.gen();
                    if u * envelope <= crate::polybasis::legendre_value(degree, t).powi(2) {
                        return Ok(cm.from_canonical(t));
                    }
                }
                Err(SamplingError::EnvelopeExhausted(REJECTION_BUDGET))
            }
            CoordinateMeasure::Gaussian => {
                let envelope = self.gauss_env[degree];
                for _ in 0..REJECTION_BUDGET {
                    let z: f64 = rng.sample(StandardNormal);
                    let t = GAUSS_PROPOSAL_SD * z;
                    let u: f64 = rng.gen();
                    let ratio = crate::polybasis::hermite_value(degree, t).powi(2)
                        * gaussian_density(t)
                        / gauss_proposal_density(t);
                    if u * envelope <= ratio {
                        return Ok(t);
                    }
                }
                Err(SamplingError::EnvelopeExhausted(REJECTION_BUDGET))
            }
        }
    }
}

fn draw_reference<R: Rng>(cm: &CoordinateMeasure, rng: &mut R) -> f64 {
    match *cm {
        CoordinateMeasure::Uniform { lo, hi } => lo + (hi - lo) * rng.gen::<f64>(),
        CoordinateMeasure::Gaussian => rng.sample(StandardNormal),
    }
}

/// One draw of the reference measure, coordinate by coordinate.
pub fn draw_reference_point<R: Rng>(coords: &[CoordinateMeasure], rng: &mut R) -> Vec<f64> {
    coords.iter().map(|cm| draw_reference(cm, rng)).collect()
}

/// Converts a memory sampled from the optimal measure of `old_set` into one
/// sampled from the optimal measure of `new_ctx.set()`. Each stored pair is
/// kept with probability `m_old / m_new`; otherwise a fresh point is drawn
/// from the complement mixture and the gradient is re-evaluated at the
/// pair's stored control. Returns the number of fresh gradient evaluations.
pub fn resample_memory<G>(
    memory: &mut Memory,
    old_set: &MultiIndexSet,
    new_ctx: &BasisContext,
    mut gradient: G,
    policy: &SeedPolicy,
    replicate: u64,
    iteration: u64,
) -> Result<usize, SamplingError>
where
    G: FnMut(&DVector<f64>, &[f64]) -> DVector<f64>,
{
    if !old_set.is_subset_of(new_ctx.set()) {
        return Err(SamplingError::NotNested);
    }
    let m_old = old_set.len();
    let m_new = new_ctx.set().len();
    if m_old == m_new {
        return Ok(0);
    }
    let complement = new_ctx.set().complement_of(old_set);
    let sampler = Sampler::new(SamplingMeasure::OptimalMixture, new_ctx)?;
    let keep = Bernoulli::new(m_old as f64 / m_new as f64).expect("valid probability");
    let mut fresh = 0usize;
    for (slot, record) in memory.iter_mut_all().enumerate() {
        let mut rng = policy.rng(replicate, iteration, LANE_RESAMPLE + slot as u64);
        if rng.sample(keep) {
            continue;
        }
        let pick = complement[rng.gen_range(0..complement.len())];
        let nu = new_ctx.set().index(pick).clone();
        let point = sampler.draw_component(new_ctx, &nu.0, &mut rng)?;
        record.grad = gradient(&record.control, &point);
        record.point = point;
        fresh += 1;
    }
    Ok(fresh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leastsq::MemoryRecord;
    use crate::polybasis::{gauss_legendre, IndexSetKind};

    fn ctx_1d(m_dim: usize) -> BasisContext {
        let set = MultiIndexSet::new(IndexSetKind::TotalDegree, m_dim - 1, 1).unwrap();
        BasisContext::new(set, vec![CoordinateMeasure::Uniform { lo: -1.0, hi: 1.0 }])
    }

    #[test]
    fn seed_policy_reproduces_streams() {
        let policy = SeedPolicy::new(42);
        let a: Vec<f64> = {
            let mut rng = policy.rng(3, 17, 2);
            (0..8).map(|_| rng.gen()).collect()
        };
        let b: Vec<f64> = {
            let mut rng = policy.rng(3, 17, 2);
            (0..8).map(|_| rng.gen()).collect()
        };
        assert_eq!(a, b);
        let c: Vec<f64> = {
            let mut rng = policy.rng(3, 18, 2);
            (0..8).map(|_| rng.gen()).collect()
        };
        assert_ne!(a, c);
    }

    #[test]
    fn arcsine_midpoint_maps_to_zero() {
        // U = 0.5 gives cos(pi/2).
        let y = (std::f64::consts::PI * 0.5).cos();
        assert!(y.abs() < 1e-15);
    }

    #[test]
    fn arcsine_draws_pass_kolmogorov_smirnov() {
        let ctx = ctx_1d(2);
        let sampler = Sampler::new(SamplingMeasure::Arcsine, &ctx).unwrap();
        let policy = SeedPolicy::new(7);
        let n = 100_000usize;
        let mut draws: Vec<f64> = (0..n)
            .map(|i| {
                let mut rng = policy.rng(0, i as u64, LANE_SAMPLE);
                sampler.draw(&ctx, &mut rng).unwrap()[0]
            })
            .collect();
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // CDF of the arcsine law on [-1, 1].
        let cdf = |y: f64| (2.0 / std::f64::consts::PI) * (((y + 1.0) / 2.0).sqrt()).asin();
        let mut stat = 0.0f64;
        for (i, y) in draws.iter().enumerate() {
            let f = cdf(*y);
            stat = stat.max((f - i as f64 / n as f64).abs());
            stat = stat.max(((i + 1) as f64 / n as f64 - f).abs());
        }
        // Two-sided critical value at level 0.01.
        let critical = 1.628 / (n as f64).sqrt();
        assert!(stat < critical, "KS statistic {stat} >= {critical}");
    }

    #[test]
    fn optimal_mixture_constant_space_is_reference() {
        let ctx = ctx_1d(1);
        let sampler = Sampler::new(SamplingMeasure::OptimalMixture, &ctx).unwrap();
        let policy = SeedPolicy::new(3);
        // With m = 1 the only component is phi_0^2 d rho = d rho.
        for i in 0..1000u64 {
            let mut rng = policy.rng(0, i, LANE_SAMPLE);
            let y = sampler.draw(&ctx, &mut rng).unwrap()[0];
            assert!((-1.0..=1.0).contains(&y));
            assert!((weight(SamplingMeasure::OptimalMixture, &ctx, &[y]) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn arcsine_weight_supremum_one_dimensional() {
        let ctx = ctx_1d(2);
        let w0 = weight(SamplingMeasure::Arcsine, &ctx, &[0.0]);
        assert!((w0 - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        for y in [-0.99, -0.5, 0.3, 0.97] {
            assert!(weight(SamplingMeasure::Arcsine, &ctx, &[y]) <= w0 + 1e-15);
        }
    }

    #[test]
    fn tensor_arcsine_weight_center_value() {
        let set = MultiIndexSet::new(IndexSetKind::HyperbolicCross, 2, 5).unwrap();
        let ctx = BasisContext::new(set, vec![CoordinateMeasure::Uniform { lo: 0.0, hi: 1.0 }; 5]);
        let w = weight(SamplingMeasure::Arcsine, &ctx, &[0.5; 5]);
        let expect = std::f64::consts::FRAC_PI_2.powi(5);
        assert!((w - expect).abs() < 1e-12, "{w} vs {expect}");
    }

    #[test]
    fn reference_weight_is_one() {
        let ctx = ctx_1d(4);
        for y in [-0.8, 0.0, 0.6] {
            assert_eq!(weight(SamplingMeasure::Reference, &ctx, &[y]), 1.0);
        }
    }

    #[test]
    fn weight_has_unit_mean_under_each_measure() {
        let policy = SeedPolicy::new(11);
        let n = 200_000usize;
        let cases: Vec<(BasisContext, SamplingMeasure)> = vec![
            (ctx_1d(3), SamplingMeasure::Arcsine),
            (ctx_1d(5), SamplingMeasure::OptimalMixture),
            (
                BasisContext::new(
                    MultiIndexSet::new(IndexSetKind::TotalDegree, 3, 1).unwrap(),
                    vec![CoordinateMeasure::Gaussian],
                ),
                SamplingMeasure::OptimalMixture,
            ),
        ];
        for (case_id, (ctx, measure)) in cases.iter().enumerate() {
            let sampler = Sampler::new(*measure, ctx).unwrap();
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for i in 0..n {
                let mut rng = policy.rng(case_id as u64, i as u64, LANE_SAMPLE);
                let y = sampler.draw(ctx, &mut rng).unwrap();
                let w = weight(*measure, ctx, &y);
                sum += w;
                sum_sq += w * w;
            }
            let mean = sum / n as f64;
            let var = (sum_sq / n as f64 - mean * mean).max(0.0);
            let se = (var / n as f64).sqrt();
            assert!(
                (mean - 1.0).abs() <= 4.0 * se + 1e-12,
                "case {case_id}: mean {mean}, se {se}"
            );
        }
    }

    #[test]
    fn optimal_mixture_flattens_christoffel() {
        let ctx = ctx_1d(6);
        let m = ctx.size() as f64;
        for g in 0..1000 {
            let y = -0.999 + 1.998 * g as f64 / 999.0;
            let k = crate::polybasis::christoffel_inverse(
                &ctx,
                |p| weight(SamplingMeasure::OptimalMixture, &ctx, p),
                &[y],
            );
            assert!((k - m).abs() < 1e-10, "y={y}: k={k}");
        }
    }

    #[test]
    fn christoffel_mass_matches_dimension() {
        let ctx = ctx_1d(4);
        let m = ctx.size() as f64;
        let policy = SeedPolicy::new(5);
        // Optimal measure: k is identically m, so the MC mean is exact.
        let sampler = Sampler::new(SamplingMeasure::OptimalMixture, &ctx).unwrap();
        let mut mean = 0.0;
        for i in 0..10_000u64 {
            let mut rng = policy.rng(0, i, LANE_SAMPLE);
            let y = sampler.draw(&ctx, &mut rng).unwrap();
            mean += crate::polybasis::christoffel_inverse(
                &ctx,
                |p| weight(SamplingMeasure::OptimalMixture, &ctx, p),
                &y,
            );
        }
        mean /= 10_000.0;
        assert!((mean - m).abs() < 1e-8);

        // Arcsine: Monte Carlo with a 4-sigma band.
        let sampler = Sampler::new(SamplingMeasure::Arcsine, &ctx).unwrap();
        let n = 1_000_000usize;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for i in 0..n {
            let mut rng = policy.rng(1, i as u64, LANE_SAMPLE);
            let y = sampler.draw(&ctx, &mut rng).unwrap();
            let k = crate::polybasis::christoffel_inverse(
                &ctx,
                |p| weight(SamplingMeasure::Arcsine, &ctx, p),
                &y,
            );
            sum += k;
            sum_sq += k * k;
        }
        let mc = sum / n as f64;
        let var = (sum_sq / n as f64 - mc * mc).max(0.0);
        let se = (var / n as f64).sqrt();
        assert!((mc - m).abs() <= 4.0 * se, "mc {mc}, m {m}, se {se}");
    }

    fn memory_from_points(points: Vec<f64>) -> Memory {
        let mut memory = Memory::new(points.len());
        for p in points {
            memory.push(MemoryRecord {
                point: vec![p],
                grad: DVector::zeros(1),
                control: DVector::zeros(1),
            });
        }
        memory
    }

    #[test]
    fn resample_identity_when_sets_match() {
        let ctx = ctx_1d(3);
        let mut memory = memory_from_points(vec![0.1, -0.4, 0.8]);
        let before: Vec<f64> = memory.iter_all().map(|r| r.point[0]).collect();
        let policy = SeedPolicy::new(1);
        let fresh = resample_memory(
            &mut memory,
            ctx.set(),
            &ctx,
            |_, _| DVector::zeros(1),
            &policy,
            0,
            0,
        )
        .unwrap();
        assert_eq!(fresh, 0);
        let after: Vec<f64> = memory.iter_all().map(|r| r.point[0]).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn resample_rejects_non_nested_sets() {
        let big = ctx_1d(4);
        let small = ctx_1d(2);
        let mut memory = memory_from_points(vec![0.0]);
        let policy = SeedPolicy::new(1);
        let err = resample_memory(
            &mut memory,
            big.set(),
            &small,
            |_, _| DVector::zeros(1),
            &policy,
            0,
            0,
        );
        assert!(matches!(err, Err(SamplingError::NotNested)));
    }

    #[test]
    fn resample_replacement_fraction_matches_bernoulli() {
        let old = ctx_1d(2);
        let new = ctx_1d(4);
        let n = 10_000usize;
        let sampler = Sampler::new(SamplingMeasure::OptimalMixture, &old).unwrap();
        let policy = SeedPolicy::new(9);
        let mut memory = Memory::new(n);
        for i in 0..n {
            let mut rng = policy.rng(0, i as u64, LANE_INIT);
            let point = sampler.draw(&old, &mut rng).unwrap();
            memory.push(MemoryRecord {
                point,
                grad: DVector::zeros(1),
                control: DVector::zeros(1),
            });
        }
        let fresh = resample_memory(
            &mut memory,
            old.set(),
            &new,
            |_, _| DVector::zeros(1),
            &policy,
            0,
            1,
        )
        .unwrap();
        assert_eq!(memory.len(), n);
        let expected = 1.0 - old.size() as f64 / new.size() as f64;
        let frac = fresh as f64 / n as f64;
        let se = (expected * (1.0 - expected) / n as f64).sqrt();
        assert!(
            (frac - expected).abs() <= 4.0 * se,
            "fraction {frac}, expected {expected}"
        );
    }

    #[test]
    fn resampled_points_match_new_density_chi_squared() {
        let old = ctx_1d(2);
        let new = ctx_1d(4);
        let n = 20_000usize;
        let sampler = Sampler::new(SamplingMeasure::OptimalMixture, &old).unwrap();
        let policy = SeedPolicy::new(13);
        let mut memory = Memory::new(n);
        for i in 0..n {
            let mut rng = policy.rng(0, i as u64, LANE_INIT);
            let point = sampler.draw(&old, &mut rng).unwrap();
            memory.push(MemoryRecord {
                point,
                grad: DVector::zeros(1),
                control: DVector::zeros(1),
            });
        }
        resample_memory(
            &mut memory,
            old.set(),
            &new,
            |_, _| DVector::zeros(1),
            &policy,
            0,
            1,
        )
        .unwrap();

        // Binned chi-squared test against the m = 4 mixture density, with
        // the expected bin masses integrated exactly bin by bin.
        let bins = 20usize;
        let density = |y: f64| {
            // (1/m) sum phi_j(y)^2 with respect to d rho = dy/2.
            new.squared_basis_sum(&[y]) / new.size() as f64
        };
        let mut expected = vec![0.0f64; bins];
        for (b, e) in expected.iter_mut().enumerate() {
            let lo = -1.0 + 2.0 * b as f64 / bins as f64;
            let hi = lo + 2.0 / bins as f64;
            let rule = gauss_legendre(10, lo, hi).unwrap();
            // Probability mass of the bin: rescale the expectation rule by
            // the bin's reference-measure mass (hi - lo) / 2.
            *e = rule.integrate(|y| density(y[0])) * (hi - lo) / 2.0;
        }
        let mut observed = vec![0.0f64; bins];
        for r in memory.iter_all() {
            let b = (((r.point[0] + 1.0) / 2.0) * bins as f64).min(bins as f64 - 1.0) as usize;
            observed[b] += 1.0;
        }
        let mut chi2 = 0.0;
        for b in 0..bins {
            let e = expected[b] * n as f64;
            chi2 += (observed[b] - e).powi(2) / e;
        }
        // 0.99 quantile of chi-squared with 19 degrees of freedom.
        assert!(chi2 < 36.19, "chi-squared {chi2}");
    }
}
