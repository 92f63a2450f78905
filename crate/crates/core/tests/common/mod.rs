#![allow(dead_code)]

use cefbounds::calibrate::{fit_spline, ReferenceCurve};
use cefbounds::censorlab::{censor, Truth};
use cefbounds::{validate, BinnedSample, Direction, DistributionSpec, OutcomeRange, ValidateOptions, Validated};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Partition count used by the numeric engine on the random suite. Bin
/// boundaries fall on multiples of the partition width so nothing is snapped.
pub const PARTITIONS: usize = 100;

#[derive(Debug, Clone)]
pub struct Instance {
    pub sample: BinnedSample<f64>,
    pub dist: DistributionSpec<f64>,
}

impl Instance {
    pub fn validated(&self) -> Validated<f64> {
        validate(&self.sample, &self.dist, ValidateOptions::default()).unwrap()
    }

    pub fn support(&self) -> (f64, f64) {
        self.sample.support()
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn boundaries(rng: &mut ChaCha8Rng, lo: f64, hi: f64, k: usize) -> Vec<f64> {
    // interior boundaries on whole partitions, at least 5 partitions apart
    loop {
        let mut cuts: Vec<usize> = (0..k - 1).map(|_| rng.random_range(5..=95)).collect();
        cuts.sort_unstable();
        let ok = cuts.windows(2).all(|w| w[1] - w[0] >= 5);
        if ok {
            let step = (hi - lo) / PARTITIONS as f64;
            let mut b = vec![lo];
            b.extend(cuts.iter().map(|&c| lo + step * c as f64));
            b.push(hi);
            return b;
        }
    }
}

pub fn distribution(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> DistributionSpec<f64> {
    if rng.random_bool(0.65) {
        return DistributionSpec::uniform(lo, hi);
    }
    let pieces = rng.random_range(2..=5);
    let mut xs: Vec<f64> = (0..pieces - 1).map(|_| rng.random_range(lo..hi)).collect();
    xs.sort_by(f64::total_cmp);
    let w: Vec<f64> = (0..pieces).map(|_| rng.random_range(0.2..1.0)).collect();
    let mut pts = vec![lo];
    pts.extend(xs);
    pts.push(hi);
    let total: f64 = pts.windows(2).zip(&w).map(|(p, w)| (p[1] - p[0]) * w).sum();
    let mut acc = 0.0;
    let mut cdf = vec![(lo, 0.0)];
    for (p, w) in pts.windows(2).zip(&w) {
        acc += (p[1] - p[0]) * w / total;
        cdf.push((p[1], acc));
    }
    cdf.last_mut().unwrap().1 = 1.0;
    DistributionSpec::gridded(cdf)
}

fn frame(rng: &mut ChaCha8Rng) -> (f64, f64, OutcomeRange<f64>, Direction) {
    let lo = rng.random_range(-20.0..20.0);
    let hi = lo + rng.random_range(5.0..100.0);
    let y_min = rng.random_range(-50.0..50.0);
    let y_max = y_min + rng.random_range(1.0..100.0);
    let dir = if rng.random_bool(0.5) {
        Direction::Increasing
    } else {
        Direction::Decreasing
    };
    (lo, hi, OutcomeRange::new(y_min, y_max).unwrap(), dir)
}

/// Monotone bin means drawn directly: sorted uniforms inside the range.
pub fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let (lo, hi, range, dir) = frame(rng);
    let k = rng.random_range(3..=5);
    let b = boundaries(rng, lo, hi, k);
    let mut means: Vec<f64> = (0..k).map(|_| rng.random_range(range.y_min..range.y_max)).collect();
    means.sort_by(f64::total_cmp);
    if dir == Direction::Decreasing {
        means.reverse();
    }
    Instance {
        sample: BinnedSample::new(b, means, dir, range),
        dist: distribution(rng, lo, hi),
    }
}

/// Bin means of a monotone quadratic truth, returned with its curvature
/// `|f''|` in raw units.
pub fn smooth_instance(rng: &mut ChaCha8Rng) -> (Instance, Truth<f64>, f64) {
    let (lo, hi, range, dir) = frame(rng);
    let k = rng.random_range(3..=5);
    let b = boundaries(rng, lo, hi, k);
    let w = range.width();
    // f(t) = a + beta t + gamma t^2 on t in [0, 1], monotone, inside the range
    let gamma = rng.random_range(-0.4..0.4) * w;
    let beta = rng.random_range(gamma.abs().max(-2.0 * gamma)..0.9 * w - gamma.max(0.0));
    let span = beta + gamma;
    let a = range.y_min + rng.random_range(0.0..1.0) * (w - span.max(beta)).max(0.0);
    let sign = if dir == Direction::Decreasing { -1.0 } else { 1.0 };
    let f = |x: f64| {
        let t = (x - lo) / (hi - lo);
        let v = beta * t + gamma * t * t;
        if sign > 0.0 {
            a + v
        } else {
            range.y_max - (a - range.y_min) - v
        }
    };
    let pts: Vec<(f64, f64)> = (0..=40)
        .map(|i| if i == 40 { hi } else { lo + (hi - lo) * i as f64 / 40.0 })
        .map(|x| (x, f(x)))
        .collect();
    let spline = fit_spline(&ReferenceCurve::with_default_knots(pts).unwrap()).unwrap();
    let truth = Truth::Spline(spline);
    let dist = distribution(rng, lo, hi);
    let sample = censor(&truth, &dist, &b, dir, range).unwrap();
    let curvature = 2.0 * gamma.abs() / ((hi - lo) * (hi - lo));
    (Instance { sample, dist }, truth, curvature)
}

/// Same data with bins `k` and `k + 1` pooled.
pub fn merge_bins(inst: &Instance, k: usize) -> Instance {
    let v = inst.validated();
    let s = &inst.sample;
    let (m0, m1) = (v.bin_masses[k], v.bin_masses[k + 1]);
    let pooled = (m0 * s.means[k] + m1 * s.means[k + 1]) / (m0 + m1);
    let mut boundaries = s.boundaries.clone();
    boundaries.remove(k + 1);
    let mut means = s.means.clone();
    means.splice(k..k + 2, [pooled]);
    Instance {
        sample: BinnedSample::new(boundaries, means, s.direction, s.range),
        dist: inst.dist.clone(),
    }
}

pub fn min(s: &[f64]) -> f64 {
    s.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn max(s: &[f64]) -> f64 {
    s.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}
