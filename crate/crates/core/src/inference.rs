//! Bootstrap confidence sets for bound endpoints.
//!
//! Replicate `i` draws from its own ChaCha8 stream (`seed`, stream `i`), so
//! results do not depend on thread count or scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{validate, BinnedSample, Direction, DistributionSpec, OutcomeRange, StatisticSpec, ValidateOptions};
use crate::error::{Error, Result, ValidationIssue};
use crate::numeric::{bound_stat, ConstraintSet, NumericOptions, StatBounds};
use crate::scalar::Real;

/// Identifies the random stream layout; bump when draws change.
pub const RNG_ALGORITHM: &str = "chacha8-stream-per-replicate-v1";

/// Summary statistics for one bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinSummary<T> {
    pub mean: T,
    pub sd: T,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum BootstrapData<T> {
    /// Individual observations as (bin index, outcome).
    Micro { rows: Vec<(usize, T)> },
    /// Per-bin mean, standard deviation and count.
    Counts { bins: Vec<BinSummary<T>> },
}

#[derive(Debug, Clone, Copy)]
pub struct BootstrapOptions {
    pub replicates: usize,
    pub seed: u64,
    pub alpha: f64,
    pub max_redraws: usize,
    pub max_failure_rate: f64,
    pub numeric: NumericOptions,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self {
            replicates: 1000,
            seed: 0,
            alpha: 0.05,
            max_redraws: 10,
            max_failure_rate: 0.01,
            numeric: NumericOptions::default(),
        }
    }
}

/// Inputs shared by the full-sample solve and every replicate.
#[derive(Debug, Clone)]
pub struct BootstrapProblem<T> {
    pub boundaries: Vec<T>,
    pub direction: Direction,
    pub range: OutcomeRange<T>,
    pub dist: DistributionSpec<T>,
    pub constraints: ConstraintSet<T>,
    pub spec: StatisticSpec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replicate<T> {
    pub index: usize,
    /// Draws used, including the accepted one.
    pub attempts: usize,
    /// `None` when every attempt failed.
    pub bounds: Option<(T, T)>,
    pub last_error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BootstrapResult<T> {
    pub point: StatBounds<T>,
    /// Outward quantiles of replicate endpoints, widened to contain `point`.
    pub confidence_set: (T, T),
    /// The raw order-statistic quantiles before widening.
    pub quantile_set: (T, T),
    pub alpha: f64,
    pub failures: usize,
    pub redraws: usize,
    pub replicates: Vec<Replicate<T>>,
}

/// Per-bin means of the observed data.
pub fn sample_means<T: Real>(data: &BootstrapData<T>, num_bins: usize) -> Result<Vec<T>> {
    match data {
        BootstrapData::Counts { bins } => Ok(bins.iter().map(|b| b.mean).collect()),
        BootstrapData::Micro { rows } => micro_means(rows.iter().copied(), num_bins),
    }
}

fn micro_means<T: Real>(rows: impl Iterator<Item = (usize, T)>, k: usize) -> Result<Vec<T>> {
    let mut sum = vec![T::zero(); k];
    let mut n = vec![0usize; k];
    for (b, y) in rows {
        sum[b] = sum[b] + y;
        n[b] += 1;
    }
    let empty: Vec<ValidationIssue> = n
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == 0)
        .map(|(i, _)| ValidationIssue::at(i, "bin has no observations"))
        .collect();
    if !empty.is_empty() {
        return Err(Error::Validation(empty));
    }
    Ok(sum.iter().zip(&n).map(|(&s, &c)| s / T::from(c).unwrap()).collect())
}

fn check_data<T: Real>(data: &BootstrapData<T>, k: usize, opts: &BootstrapOptions) -> Result<()> {
    let mut issues = Vec::new();
    if opts.replicates < 100 {
        issues.push(ValidationIssue::new(format!(
            "at least 100 bootstrap replicates are required, got {}",
            opts.replicates
        )));
    }
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        issues.push(ValidationIssue::new("alpha must lie in (0, 1)"));
    }
    match data {
        BootstrapData::Counts { bins } => {
            if bins.len() != k {
                issues.push(ValidationIssue::new(format!("{k} bins but {} summaries", bins.len())));
            }
            for (i, b) in bins.iter().enumerate() {
                if b.n == 0 {
                    issues.push(ValidationIssue::at(i, "bin count must be at least 1"));
                }
                if !(b.sd >= T::zero()) || !b.sd.is_finite() {
                    issues.push(ValidationIssue::at(i, "standard deviation must be finite and non-negative"));
                }
            }
        }
        BootstrapData::Micro { rows } => {
            for (i, &(b, y)) in rows.iter().enumerate() {
                if b >= k {
                    issues.push(ValidationIssue::at(i, format!("bin index {b} out of range")));
                }
                if !y.is_finite() {
                    issues.push(ValidationIssue::at(i, "non-finite outcome"));
                }
            }
        }
    }
    if issues.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(issues))
    }
}

fn solve<T: Real>(p: &BootstrapProblem<T>, means: Vec<T>, opts: NumericOptions) -> Result<StatBounds<T>> {
    let sample = BinnedSample::new(p.boundaries.clone(), means, p.direction, p.range);
    let v = validate(&sample, &p.dist, ValidateOptions::default())?;
    bound_stat(&v, p.constraints, &p.spec, opts)
}

fn draw<T: Real>(data: &BootstrapData<T>, k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<T>> {
    match data {
        BootstrapData::Counts { bins } => Ok(bins
            .iter()
            .map(|b| {
                let z: f64 = rng.sample(StandardNormal);
                b.mean + b.sd / T::from(b.n).unwrap().sqrt() * T::lit(z)
            })
            .collect()),
        BootstrapData::Micro { rows } => {
            let n = rows.len();
            micro_means((0..n).map(|_| rows[rng.random_range(0..n)]), k)
        }
    }
}

fn run_replicate<T: Real>(
    index: usize,
    p: &BootstrapProblem<T>,
    data: &BootstrapData<T>,
    opts: &BootstrapOptions,
) -> Result<Replicate<T>> {
    let k = p.boundaries.len() - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(index as u64);
    let mut last_error = None;
    for attempt in 1..=opts.max_redraws.max(1) {
        let outcome = draw(data, k, &mut rng).and_then(|m| solve(p, m, opts.numeric));
        match outcome {
            Ok(b) => {
                return Ok(Replicate {
                    index,
                    attempts: attempt,
                    bounds: Some((b.lower, b.upper)),
                    last_error: None,
                })
            }
            Err(e @ (Error::Validation(_) | Error::Infeasible(_))) => last_error = Some(e.to_string()),
            Err(e) => return Err(e),
        }
    }
    Ok(Replicate {
        index,
        attempts: opts.max_redraws.max(1),
        bounds: None,
        last_error,
    })
}

/// Lower and upper order-statistic quantiles, rounded outward.
pub fn outward_quantiles<T: Real>(lowers: &mut [T], uppers: &mut [T], alpha: f64) -> (T, T) {
    lowers.sort_by(|a, b| a.partial_cmp(b).unwrap());
    uppers.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = lowers.len();
    let last = (n - 1) as f64;
    let i_lo = ((last * alpha / 2.0).floor() as usize).min(n - 1);
    let i_hi = ((last * (1.0 - alpha / 2.0)).ceil() as usize).min(n - 1);
    (lowers[i_lo], uppers[i_hi])
}

/// Bootstrap confidence set for the bounds on `p.spec`.
pub fn bootstrap_bounds<T: Real>(
    p: &BootstrapProblem<T>,
    data: &BootstrapData<T>,
    opts: &BootstrapOptions,
) -> Result<BootstrapResult<T>> {
    let k = p.boundaries.len().saturating_sub(1);
    check_data(data, k, opts)?;
    let point = solve(p, sample_means(data, k)?, opts.numeric)?;

    let replicates = (0..opts.replicates)
        .into_par_iter()
        .map(|i| run_replicate(i, p, data, opts))
        .collect::<Result<Vec<_>>>()?;

    let failures = replicates.iter().filter(|r| r.bounds.is_none()).count();
    let redraws = replicates.iter().map(|r| r.attempts - 1).sum();
    if failures as f64 > opts.max_failure_rate * opts.replicates as f64 {
        let example = replicates
            .iter()
            .find_map(|r| r.last_error.clone())
            .unwrap_or_default();
        return Err(Error::BootstrapAborted(format!(
            "{failures} of {} replicates failed after {} draws each (first error: {example})",
            opts.replicates, opts.max_redraws
        )));
    }
    let (mut lowers, mut uppers): (Vec<T>, Vec<T>) = replicates.iter().filter_map(|r| r.bounds).unzip();
    let quantile_set = outward_quantiles(&mut lowers, &mut uppers, opts.alpha);
    let confidence_set = (quantile_set.0.min(point.lower), quantile_set.1.max(point.upper));
    Ok(BootstrapResult {
        point,
        confidence_set,
        quantile_set,
        alpha: opts.alpha,
        failures,
        redraws,
        replicates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(spec: StatisticSpec<f64>) -> BootstrapProblem<f64> {
        BootstrapProblem {
            boundaries: vec![0.0, 40.0, 70.0, 100.0],
            direction: Direction::Increasing,
            range: OutcomeRange::new(0.0, 100.0).unwrap(),
            dist: DistributionSpec::uniform(0.0, 100.0),
            constraints: ConstraintSet::monotone_only(),
            spec,
        }
    }

    fn counts(sd: f64) -> BootstrapData<f64> {
        let bin = |mean| BinSummary { mean, sd, n: 400 };
        BootstrapData::Counts {
            bins: vec![bin(30.0), bin(55.0), bin(72.0)],
        }
    }

    fn opts(seed: u64) -> BootstrapOptions {
        BootstrapOptions {
            replicates: 120,
            seed,
            numeric: NumericOptions {
                partitions: 40,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn zero_noise_reproduces_point_bounds() {
        let p = problem(StatisticSpec::IntervalMean { a: 0.0, b: 50.0 });
        let r = bootstrap_bounds(&p, &counts(0.0), &opts(1)).unwrap();
        assert_eq!(r.confidence_set, (r.point.lower, r.point.upper));
        assert_eq!(r.quantile_set, r.confidence_set);
        assert_eq!(r.failures, 0);
    }

    #[test]
    fn seeded_runs_repeat_and_contain_point() {
        let p = problem(StatisticSpec::IntervalMean { a: 0.0, b: 50.0 });
        let a = bootstrap_bounds(&p, &counts(20.0), &opts(7)).unwrap();
        let b = bootstrap_bounds(&p, &counts(20.0), &opts(7)).unwrap();
        assert_eq!(a.confidence_set, b.confidence_set);
        assert_eq!(a.replicates, b.replicates);
        assert!(a.confidence_set.0 <= a.point.lower && a.point.upper <= a.confidence_set.1);
        assert!(a.confidence_set.1 - a.confidence_set.0 > a.point.upper - a.point.lower);
        let c = bootstrap_bounds(&p, &counts(20.0), &opts(8)).unwrap();
        assert_ne!(a.replicates, c.replicates);
        // recompute the quantiles from the archive
        let (mut lo, mut hi): (Vec<f64>, Vec<f64>) = a.replicates.iter().filter_map(|r| r.bounds).unzip();
        assert_eq!(outward_quantiles(&mut lo, &mut hi, 0.05), a.quantile_set);
    }

    #[test]
    fn noisy_adjacent_bins_force_redraws_or_abort() {
        let p = problem(StatisticSpec::Point { x: 50.0 });
        let bin = |mean| BinSummary { mean, sd: 30.0, n: 4 };
        let close = BootstrapData::Counts {
            bins: vec![bin(50.0), bin(50.1), bin(50.2)],
        };
        let err = bootstrap_bounds(&p, &close, &opts(3)).unwrap_err();
        assert!(matches!(err, Error::BootstrapAborted(_)), "{err}");
        let moderate = BootstrapData::Counts {
            bins: vec![
                BinSummary { mean: 30.0, sd: 40.0, n: 16 },
                BinSummary { mean: 50.0, sd: 40.0, n: 16 },
                BinSummary { mean: 70.0, sd: 40.0, n: 16 },
            ],
        };
        let r = bootstrap_bounds(&p, &moderate, &opts(3)).unwrap();
        assert!(r.redraws > 0 && r.failures == 0);
    }

    #[test]
    fn microdata_resampling() {
        let p = problem(StatisticSpec::IntervalMean { a: 0.0, b: 40.0 });
        let mut rows = Vec::new();
        for i in 0..60 {
            let b = i % 3;
            rows.push((b, 20.0 + 25.0 * b as f64 + (i % 7) as f64));
        }
        let data = BootstrapData::Micro { rows };
        let means = sample_means(&data, 3).unwrap();
        let r = bootstrap_bounds(&p, &data, &opts(11)).unwrap();
        assert!(r.point.point_identified);
        assert!((r.point.lower - means[0]).abs() < 1e-12);
        assert!(r.confidence_set.0 < means[0] && r.confidence_set.1 > means[0]);
        assert!(bootstrap_bounds(&p, &data, &BootstrapOptions { replicates: 50, ..opts(1) }).is_err());
    }
}
