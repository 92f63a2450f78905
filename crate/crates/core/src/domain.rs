//! Domain types shared by every engine: outcome range, binned samples, the
//! known distribution of the conditioning variable, envelopes and statistic
//! specifications.
//!
//! All bound computations assume a weakly increasing CEF. Samples declared
//! decreasing are negated on ingest ([`BinnedSample::flipped`]) and results
//! are negated back on output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ValidationIssue};
use crate::scalar::Real;

/// Absolute bounds on the outcome, `y_min < y_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRange<T> {
    pub y_min: T,
    pub y_max: T,
}

impl<T: Real> OutcomeRange<T> {
    pub fn new(y_min: T, y_max: T) -> Result<Self> {
        let r = Self { y_min, y_max };
        r.check().map_err(Error::validation)?;
        Ok(r)
    }

    fn check(&self) -> std::result::Result<(), ValidationIssue> {
        if !self.y_min.is_finite() || !self.y_max.is_finite() {
            return Err(ValidationIssue::new("outcome range must be finite"));
        }
        if self.y_min >= self.y_max {
            return Err(ValidationIssue::new(format!(
                "outcome range requires y_min < y_max, got [{}, {}]",
                self.y_min, self.y_max
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn width(&self) -> T {
        self.y_max - self.y_min
    }

    #[inline]
    pub fn contains(&self, y: T) -> bool {
        y >= self.y_min && y <= self.y_max
    }

    #[inline]
    pub fn clamp(&self, y: T) -> T {
        y.max(self.y_min).min(self.y_max)
    }

    /// Maps `y` to `[0, 1]`.
    #[inline]
    pub fn normalize(&self, y: T) -> T {
        (y - self.y_min) / self.width()
    }

    #[inline]
    pub fn denormalize(&self, u: T) -> T {
        self.y_min + u * self.width()
    }

    /// Range of `-y`.
    pub fn negated(&self) -> Self {
        Self {
            y_min: -self.y_max,
            y_max: -self.y_min,
        }
    }
}

/// Declared orientation of the CEF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Increasing,
    Decreasing,
    None,
}

impl Direction {
    fn flipped(self) -> Self {
        match self {
            Direction::Increasing => Direction::Decreasing,
            Direction::Decreasing => Direction::Increasing,
            Direction::None => Direction::None,
        }
    }
}

/// Interval-censored data: `K` bins with boundaries `x_1 < ... < x_{K+1}` and
/// the observed mean outcome in each bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedSample<T> {
    pub boundaries: Vec<T>,
    pub means: Vec<T>,
    pub direction: Direction,
    pub range: OutcomeRange<T>,
}

impl<T: Real> BinnedSample<T> {
    pub fn new(
        boundaries: Vec<T>,
        means: Vec<T>,
        direction: Direction,
        range: OutcomeRange<T>,
    ) -> Self {
        Self {
            boundaries,
            means,
            direction,
            range,
        }
    }

    #[inline]
    pub fn num_bins(&self) -> usize {
        self.means.len()
    }

    pub fn support(&self) -> (T, T) {
        (self.boundaries[0], self.boundaries[self.boundaries.len() - 1])
    }

    /// Bin lower and upper boundary.
    #[inline]
    pub fn bin(&self, k: usize) -> (T, T) {
        (self.boundaries[k], self.boundaries[k + 1])
    }

    /// Negates every outcome. Applying it twice returns the original sample
    /// bit for bit.
    pub fn flipped(&self) -> Self {
        Self {
            boundaries: self.boundaries.clone(),
            means: self.means.iter().map(|&m| -m).collect(),
            direction: self.direction.flipped(),
            range: self.range.negated(),
        }
    }

    /// Index of the bin containing `x`. A boundary `x_k` belongs to bin `k`
    /// (lower boundary inclusive); the top of the support belongs to the last
    /// bin.
    pub fn bin_index(&self, x: T) -> Result<usize> {
        let (lo, hi) = self.support();
        if !(x >= lo && x <= hi) {
            return Err(Error::OutOfSupport {
                what: "x",
                value: x.to_f64_lossy(),
                lo: lo.to_f64_lossy(),
                hi: hi.to_f64_lossy(),
            });
        }
        let k = self.boundaries.partition_point(|&b| b <= x);
        Ok(k.saturating_sub(1).min(self.num_bins() - 1))
    }

    /// Mean of bin `k` with the conventions `r_0 = y_min`, `r_{K+1} = y_max`;
    /// `k` is offset by one so `padded_mean(0)` is `y_min`.
    #[inline]
    pub fn padded_mean(&self, k: usize) -> T {
        if k == 0 {
            self.range.y_min
        } else if k > self.num_bins() {
            self.range.y_max
        } else {
            self.means[k - 1]
        }
    }
}

/// Known distribution of the latent conditioning variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec<T> {
    Uniform { lo: T, hi: T },
    /// CDF table `(x, F(x))`, interpolated linearly (piecewise-constant density).
    Gridded { cdf: Vec<(T, T)> },
}

impl<T: Real> DistributionSpec<T> {
    pub fn uniform(lo: T, hi: T) -> Self {
        DistributionSpec::Uniform { lo, hi }
    }

    pub fn gridded(cdf: Vec<(T, T)>) -> Self {
        DistributionSpec::Gridded { cdf }
    }

    pub fn support(&self) -> (T, T) {
        match self {
            DistributionSpec::Uniform { lo, hi } => (*lo, *hi),
            DistributionSpec::Gridded { cdf } => (cdf[0].0, cdf[cdf.len() - 1].0),
        }
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self, DistributionSpec::Uniform { .. })
    }

    /// Problems with the specification itself. Rows index the CDF table.
    pub fn check(&self) -> Vec<ValidationIssue> {
        let mut issues = Vec::new();
        match self {
            DistributionSpec::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    issues.push(ValidationIssue::new(format!(
                        "uniform support requires finite lo < hi, got [{lo}, {hi}]"
                    )));
                }
            }
            DistributionSpec::Gridded { cdf } => {
                if cdf.len() < 2 {
                    issues.push(ValidationIssue::new("CDF grid needs at least two points"));
                    return issues;
                }
                for (i, &(x, f)) in cdf.iter().enumerate() {
                    if !x.is_finite() || !f.is_finite() {
                        issues.push(ValidationIssue::at(i, "non-finite CDF grid entry"));
                    }
                    if i > 0 {
                        let (px, pf) = cdf[i - 1];
                        if x <= px {
                            issues.push(ValidationIssue::at(
                                i,
                                format!("CDF grid x must be strictly increasing ({px} then {x})"),
                            ));
                        }
                        if f < pf {
                            issues.push(ValidationIssue::at(
                                i,
                                format!("CDF must be weakly increasing ({pf} then {f})"),
                            ));
                        }
                    }
                }
                let tol = T::lit(1e-12);
                if (cdf[0].1).abs() > tol {
                    issues.push(ValidationIssue::at(0, "CDF must start at 0"));
                }
                if (cdf[cdf.len() - 1].1 - T::one()).abs() > tol {
                    issues.push(ValidationIssue::at(cdf.len() - 1, "CDF must end at 1"));
                }
            }
        }
        issues
    }

    /// CDF at `x`, clamped to `[0, 1]` outside the support.
    pub fn cdf(&self, x: T) -> T {
        match self {
            DistributionSpec::Uniform { lo, hi } => {
                ((x - *lo) / (*hi - *lo)).max(T::zero()).min(T::one())
            }
            DistributionSpec::Gridded { cdf } => {
                if x <= cdf[0].0 {
                    return T::zero();
                }
                let last = cdf.len() - 1;
                if x >= cdf[last].0 {
                    return T::one();
                }
                let j = cdf.partition_point(|&(gx, _)| gx <= x);
                let (x0, f0) = cdf[j - 1];
                let (x1, f1) = cdf[j];
                f0 + (f1 - f0) * (x - x0) / (x1 - x0)
            }
        }
    }

    /// Probability mass of `[lo, hi]`. Errors when the interval leaves the
    /// support or is reversed.
    pub fn bin_mass(&self, lo: T, hi: T) -> Result<T> {
        let (s_lo, s_hi) = self.support();
        for (what, v) in [("lo", lo), ("hi", hi)] {
            if !(v >= s_lo && v <= s_hi) {
                return Err(Error::OutOfSupport {
                    what,
                    value: v.to_f64_lossy(),
                    lo: s_lo.to_f64_lossy(),
                    hi: s_hi.to_f64_lossy(),
                });
            }
        }
        if lo > hi {
            return Err(Error::invalid(format!("bin_mass needs lo <= hi, got [{lo}, {hi}]")));
        }
        Ok(self.mass_unchecked(lo, hi))
    }

    /// Mass of `[lo, hi]` without support checks.
    pub(crate) fn mass_unchecked(&self, lo: T, hi: T) -> T {
        match self {
            DistributionSpec::Uniform { lo: a, hi: b } => (hi - lo) / (*b - *a),
            DistributionSpec::Gridded { .. } => self.cdf(hi) - self.cdf(lo),
        }
    }

    /// Integral of `x` against the density over `[lo, hi]`. Exact for the
    /// piecewise-constant density of a gridded CDF.
    pub fn first_moment(&self, lo: T, hi: T) -> T {
        let seg = |a: T, b: T, dens: T| dens * (b * b - a * a) * T::half();
        match self {
            DistributionSpec::Uniform { lo: s, hi: e } => seg(lo, hi, T::one() / (*e - *s)),
            DistributionSpec::Gridded { cdf } => {
                let mut acc = T::zero();
                for w in cdf.windows(2) {
                    let (x0, f0) = w[0];
                    let (x1, f1) = w[1];
                    let a = x0.max(lo);
                    let b = x1.min(hi);
                    if b > a {
                        acc = acc + seg(a, b, (f1 - f0) / (x1 - x0));
                    }
                }
                acc
            }
        }
    }
}

/// Options that relax validation.
#[derive(Debug, Clone, Copy, Default)]
pub struct ValidateOptions {
    /// Accept bin means that violate the declared direction. The numeric
    /// engine then reports a positive minimum MSE instead of failing.
    pub allow_direction_violation: bool,
}

/// Inputs that passed validation, oriented so that the CEF is weakly
/// increasing when a direction was declared.
#[derive(Debug, Clone)]
pub struct Validated<T> {
    pub sample: BinnedSample<T>,
    pub dist: DistributionSpec<T>,
    /// Per-bin probability masses under `dist`.
    pub bin_masses: Vec<T>,
    /// True when the original sample was declared decreasing and has been
    /// negated.
    pub flipped: bool,
    /// True when the (oriented) means are not weakly increasing. Only possible
    /// with [`ValidateOptions::allow_direction_violation`].
    pub direction_violated: bool,
}

impl<T: Real> Validated<T> {
    /// Whether monotonicity is part of the model.
    pub fn monotone(&self) -> bool {
        self.sample.direction != Direction::None
    }

    /// Maps an interval computed in oriented units back to original units.
    pub fn restore_interval(&self, lo: T, hi: T) -> (T, T) {
        if self.flipped {
            (-hi, -lo)
        } else {
            (lo, hi)
        }
    }

    /// Maps a single value (e.g. a witness entry) back to original units.
    pub fn restore_value(&self, v: T) -> T {
        if self.flipped {
            -v
        } else {
            v
        }
    }

    /// Range in original units.
    pub fn original_range(&self) -> OutcomeRange<T> {
        if self.flipped {
            self.sample.range.negated()
        } else {
            self.sample.range
        }
    }
}

/// Validates a sample against a distribution and orients it.
///
/// Collects every problem rather than stopping at the first one.
pub fn validate<T: Real>(
    sample: &BinnedSample<T>,
    dist: &DistributionSpec<T>,
    opts: ValidateOptions,
) -> Result<Validated<T>> {
    let mut issues = Vec::new();
    if let Err(e) = sample.range.check() {
        issues.push(e);
    }
    let k = sample.means.len();
    if k == 0 {
        issues.push(ValidationIssue::new("sample needs at least one bin"));
    }
    if sample.boundaries.len() != k + 1 {
        issues.push(ValidationIssue::new(format!(
            "{} bins need {} boundaries, got {}",
            k,
            k + 1,
            sample.boundaries.len()
        )));
    }
    let dist_issues = dist.check();
    let dist_ok = dist_issues.is_empty();
    issues.extend(dist_issues);
    if !issues.is_empty() {
        return Err(Error::Validation(issues));
    }

    for (i, &b) in sample.boundaries.iter().enumerate() {
        if !b.is_finite() {
            issues.push(ValidationIssue::at(i, "non-finite bin boundary"));
        }
    }
    for (i, w) in sample.boundaries.windows(2).enumerate() {
        if w[1] == w[0] {
            issues.push(ValidationIssue::at(
                i,
                format!("zero-width bin [{}, {}]", w[0], w[1]),
            ));
        } else if w[1] < w[0] {
            issues.push(ValidationIssue::at(
                i,
                format!("bin boundaries must increase ({} then {})", w[0], w[1]),
            ));
        }
    }
    for (i, &m) in sample.means.iter().enumerate() {
        if !m.is_finite() || !sample.range.contains(m) {
            issues.push(ValidationIssue::at(
                i,
                format!(
                    "bin mean {} outside outcome range [{}, {}]",
                    m, sample.range.y_min, sample.range.y_max
                ),
            ));
        }
    }

    let (x_lo, x_hi) = sample.support();
    let (d_lo, d_hi) = dist.support();
    let stol = T::lit(1e-9) * (x_hi - x_lo).abs().max(T::min_positive_value());
    if dist_ok && ((x_lo - d_lo).abs() > stol || (x_hi - d_hi).abs() > stol) {
        issues.push(ValidationIssue::new(format!(
            "distribution support [{d_lo}, {d_hi}] does not match bin support [{x_lo}, {x_hi}]"
        )));
    }
    if !issues.is_empty() {
        return Err(Error::Validation(issues));
    }

    let bin_masses: Vec<T> = sample
        .boundaries
        .windows(2)
        .map(|w| dist.mass_unchecked(w[0].max(d_lo), w[1].min(d_hi)))
        .collect();
    for (i, &m) in bin_masses.iter().enumerate() {
        if !(m > T::zero()) {
            issues.push(ValidationIssue::at(i, "bin has zero probability mass"));
        }
    }

    let oriented = if sample.direction == Direction::Decreasing {
        sample.flipped()
    } else {
        sample.clone()
    };
    let order_tol = T::lit(1e-12) * sample.range.width();
    let mut direction_violated = false;
    if oriented.direction != Direction::None {
        for (i, w) in oriented.means.windows(2).enumerate() {
            if w[1] < w[0] - order_tol {
                direction_violated = true;
                if !opts.allow_direction_violation {
                    let word = if sample.direction == Direction::Decreasing {
                        "decreasing"
                    } else {
                        "increasing"
                    };
                    issues.push(ValidationIssue::at(
                        i + 1,
                        format!(
                            "bin means violate the declared {word} direction ({} then {})",
                            sample.means[i],
                            sample.means[i + 1]
                        ),
                    ));
                }
            }
        }
    }
    if !issues.is_empty() {
        return Err(Error::Validation(issues));
    }

    Ok(Validated {
        flipped: sample.direction == Direction::Decreasing,
        sample: oriented,
        dist: dist.clone(),
        bin_masses,
        direction_violated,
    })
}

/// Origin of an envelope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    Numeric,
}

/// Pointwise lower and upper bounds on `E(y | x)` over a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CefEnvelope<T> {
    pub grid: Vec<T>,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    pub provenance: Provenance,
    pub constraint_tag: String,
}

impl<T: Real> CefEnvelope<T> {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn widths(&self) -> Vec<T> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| u - l)
            .collect()
    }

    /// True when `self` lies inside `other` at every grid point, allowing
    /// `tol` of slack.
    pub fn is_within(&self, other: &CefEnvelope<T>, tol: T) -> bool {
        self.len() == other.len()
            && (0..self.len()).all(|i| {
                self.lower[i] >= other.lower[i] - tol && self.upper[i] <= other.upper[i] + tol
            })
    }

    pub(crate) fn restore(mut self, v: &Validated<T>) -> Self {
        if v.flipped {
            let lower: Vec<T> = self.upper.iter().map(|&u| -u).collect();
            let upper: Vec<T> = self.lower.iter().map(|&l| -l).collect();
            self.lower = lower;
            self.upper = upper;
        }
        self
    }
}

/// Candidate discretized CEF: one value per partition of equal width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCef<T> {
    pub values: Vec<T>,
    pub grid_spacing: T,
}

/// Functional of the CEF to bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StatisticSpec<T> {
    /// `E(y | x)`.
    Point { x: T },
    /// Mass-weighted mean of the CEF over `[a, b]`.
    IntervalMean { a: T, b: T },
    /// Slope of the mass-weighted least-squares line through the CEF.
    BestLinearSlope,
    /// Value at `x` of the mass-weighted least-squares line.
    BestLinearValue { x: T },
}

impl<T: Real> StatisticSpec<T> {
    /// Checks referenced points against the support.
    pub fn check(&self, support: (T, T)) -> Result<()> {
        let (lo, hi) = support;
        let inside = |what: &'static str, v: T| {
            if v >= lo && v <= hi {
                Ok(())
            } else {
                Err(Error::OutOfSupport {
                    what,
                    value: v.to_f64_lossy(),
                    lo: lo.to_f64_lossy(),
                    hi: hi.to_f64_lossy(),
                })
            }
        };
        match *self {
            StatisticSpec::Point { x } | StatisticSpec::BestLinearValue { x } => inside("x", x),
            StatisticSpec::IntervalMean { a, b } => {
                inside("a", a)?;
                inside("b", b)?;
                if a < b {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("interval mean needs a < b, got a={a}, b={b}")))
                }
            }
            StatisticSpec::BestLinearSlope => Ok(()),
        }
    }

    /// Parses `point:x`, `mu:a,b`, `slope` or `linear:x`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let nums = || -> Result<Vec<T>> {
            args.split(',')
                .map(|a| {
                    a.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .map(T::lit)
                        .ok_or_else(|| Error::invalid(format!("bad number {a:?} in statistic {s:?}")))
                })
                .collect()
        };
        let want = |n: usize| -> Result<Vec<T>> {
            let v = nums()?;
            if v.len() == n {
                Ok(v)
            } else {
                Err(Error::invalid(format!("statistic {s:?} needs {n} argument(s)")))
            }
        };
        match kind.trim() {
            "point" => Ok(StatisticSpec::Point { x: want(1)?[0] }),
            "mu" => {
                let v = want(2)?;
                Ok(StatisticSpec::IntervalMean { a: v[0], b: v[1] })
            }
            "slope" if args.is_empty() => Ok(StatisticSpec::BestLinearSlope),
            "linear" => Ok(StatisticSpec::BestLinearValue { x: want(1)?[0] }),
            _ => Err(Error::invalid(format!(
                "unknown statistic {s:?}; expected point:x, mu:a,b, slope or linear:x"
            ))),
        }
    }

    pub fn label(&self) -> String {
        match self {
            StatisticSpec::Point { x } => format!("point:{x}"),
            StatisticSpec::IntervalMean { a, b } => format!("mu:{a},{b}"),
            StatisticSpec::BestLinearSlope => "slope".to_string(),
            StatisticSpec::BestLinearValue { x } => format!("linear:{x}"),
        }
    }
}
