//! Simulation harness: censor a fully known CEF into bins, recover bounds
//! from the bin means, and check whether the bounds contain the truth.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibrate::{fit_spline, ReferenceCurve, Spline};
use crate::domain::{
    validate, BinnedSample, CefEnvelope, Direction, DistributionSpec, OutcomeRange, Provenance,
    StatisticSpec, ValidateOptions,
};
use crate::error::{Error, Result};
use crate::numeric::{ConstraintSet, NumericModel, NumericOptions};
use crate::scalar::Real;

const SIMPSON_PANELS: usize = 8;

/// A fully supported CEF.
#[derive(Debug, Clone)]
pub enum Truth<T> {
    Spline(Spline<T>),
    /// Piecewise linear through sorted `(x, y)` points.
    Linear(Vec<(T, T)>),
    /// Piecewise constant on `values.len()` equal cells of `[lo, hi]`.
    Grid { lo: T, hi: T, values: Vec<T> },
}

impl<T: Real> Truth<T> {
    pub fn support(&self) -> (T, T) {
        match self {
            Truth::Spline(s) => (s.lo, s.hi),
            Truth::Linear(p) => (p[0].0, p[p.len() - 1].0),
            Truth::Grid { lo, hi, .. } => (*lo, *hi),
        }
    }

    /// Value at `x`, clamped into the support.
    pub fn eval(&self, x: T) -> T {
        let (lo, hi) = self.support();
        let x = x.max(lo).min(hi);
        match self {
            Truth::Spline(s) => s.eval(x),
            Truth::Linear(p) => {
                let j = p.partition_point(|q| q.0 <= x).clamp(1, p.len() - 1);
                let (x0, y0) = p[j - 1];
                let (x1, y1) = p[j];
                y0 + (y1 - y0) * (x - x0) / (x1 - x0)
            }
            Truth::Grid { lo, hi, values } => {
                let n = values.len();
                let i = ((x - *lo) / (*hi - *lo) * T::from_usize(n).expect("len")).floor();
                values[i.to_usize().unwrap_or(0).min(n - 1)]
            }
        }
    }

    /// Points where the truth may lose smoothness.
    fn breakpoints(&self) -> Vec<T> {
        match self {
            Truth::Spline(s) => s.knots.clone(),
            Truth::Linear(p) => p.iter().map(|q| q.0).collect(),
            Truth::Grid { lo, hi, values } => {
                let n = T::from_usize(values.len()).expect("len");
                (1..values.len())
                    .map(|i| *lo + (*hi - *lo) * T::from_usize(i).expect("index") / n)
                    .collect()
            }
        }
    }

    /// Plain average over `[a, b]` by composite Simpson.
    fn simpson_mean(&self, a: T, b: T) -> T {
        let m = SIMPSON_PANELS * 2;
        let h = (b - a) / T::from_usize(m).expect("panels");
        let mut acc = self.eval(a) + self.eval(b);
        for i in 1..m {
            let w = if i % 2 == 1 { T::lit(4.0) } else { T::two() };
            acc = acc + w * self.eval(a + h * T::from_usize(i).expect("index"));
        }
        acc / T::lit((3 * m) as f64)
    }

    /// Mass-weighted mean over `[a, b]` and the mass of `[a, b]`.
    pub fn weighted_mean(&self, dist: &DistributionSpec<T>, a: T, b: T) -> (T, T) {
        let mut cuts = vec![a, b];
        cuts.extend(self.breakpoints().into_iter().filter(|&c| c > a && c < b));
        if let DistributionSpec::Gridded { cdf } = dist {
            cuts.extend(cdf.iter().map(|p| p.0).filter(|&c| c > a && c < b));
        }
        cuts.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
        cuts.dedup();
        let mut num = T::zero();
        let mut mass = T::zero();
        for w in cuts.windows(2) {
            let m = dist.cdf(w[1]) - dist.cdf(w[0]);
            if m > T::zero() {
                num = num + m * self.simpson_mean(w[0], w[1]);
                mass = mass + m;
            }
        }
        if mass > T::zero() {
            (num / mass, mass)
        } else {
            (self.simpson_mean(a, b), T::zero())
        }
    }

    /// Cell averages over `n` equal cells of `[lo, hi]`.
    pub fn resample(&self, dist: &DistributionSpec<T>, lo: T, hi: T, n: usize) -> Vec<T> {
        let d = (hi - lo) / T::from_usize(n).expect("n");
        (0..n)
            .map(|i| {
                let a = lo + d * T::from_usize(i).expect("i");
                let b = if i + 1 == n { hi } else { a + d };
                self.weighted_mean(dist, a, b).0
            })
            .collect()
    }
}

/// Interval-censors `truth`: each bin mean is the mass-weighted mean of the
/// truth over the bin.
pub fn censor<T: Real>(
    truth: &Truth<T>,
    dist: &DistributionSpec<T>,
    boundaries: &[T],
    direction: Direction,
    range: OutcomeRange<T>,
) -> Result<BinnedSample<T>> {
    if boundaries.len() < 2 {
        return Err(Error::invalid("censoring needs at least two boundaries"));
    }
    let (lo, hi) = truth.support();
    if boundaries[0] < lo || boundaries[boundaries.len() - 1] > hi {
        return Err(Error::invalid(format!(
            "boundaries [{}, {}] leave the truth's support [{lo}, {hi}]",
            boundaries[0],
            boundaries[boundaries.len() - 1]
        )));
    }
    let mut means = Vec::with_capacity(boundaries.len() - 1);
    for (k, w) in boundaries.windows(2).enumerate() {
        if w[1] <= w[0] {
            return Err(Error::invalid("boundaries must be strictly increasing"));
        }
        let (m, mass) = truth.weighted_mean(dist, w[0], w[1]);
        if mass <= T::zero() {
            return Err(Error::invalid(format!("bin {k} [{}, {}] is empty", w[0], w[1])));
        }
        means.push(m);
    }
    Ok(BinnedSample::new(boundaries.to_vec(), means, direction, range))
}

/// A grid point where the truth escapes the envelope.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation<T> {
    pub index: usize,
    pub x: T,
    pub truth: T,
    pub lower: T,
    pub upper: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport<T> {
    pub points: usize,
    pub covered: usize,
    pub flags: Vec<bool>,
    pub violations: Vec<Violation<T>>,
    pub tolerance: T,
}

impl<T: Real> CoverageReport<T> {
    pub fn fraction(&self) -> f64 {
        if self.points == 0 {
            1.0
        } else {
            self.covered as f64 / self.points as f64
        }
    }

    pub fn complete(&self) -> bool {
        self.covered == self.points
    }
}

/// Containment of `truth_values` (aligned with `envelope.grid`) in the
/// envelope, allowing `tol` of slack.
pub fn coverage_report<T: Real>(truth_values: &[T], envelope: &CefEnvelope<T>, tol: T) -> CoverageReport<T> {
    let mut flags = Vec::with_capacity(envelope.len());
    let mut violations = Vec::new();
    for (i, &t) in truth_values.iter().enumerate().take(envelope.len()) {
        let ok = t >= envelope.lower[i] - tol && t <= envelope.upper[i] + tol;
        if !ok {
            violations.push(Violation {
                index: i,
                x: envelope.grid[i],
                truth: t,
                lower: envelope.lower[i],
                upper: envelope.upper[i],
            });
        }
        flags.push(ok);
    }
    CoverageReport {
        points: flags.len(),
        covered: flags.iter().filter(|&&f| f).count(),
        flags,
        violations,
        tolerance: tol,
    }
}

/// The truth as the envelope sees it: cell averages for numeric envelopes
/// (one cell per grid point), point values for analytic ones.
pub fn truth_on_grid<T: Real>(truth: &Truth<T>, dist: &DistributionSpec<T>, envelope: &CefEnvelope<T>) -> Vec<T> {
    match envelope.provenance {
        Provenance::Analytic => envelope.grid.iter().map(|&x| truth.eval(x)).collect(),
        Provenance::Numeric => {
            let n = envelope.len();
            if n < 2 {
                return envelope.grid.iter().map(|&x| truth.eval(x)).collect();
            }
            let d = envelope.grid[1] - envelope.grid[0];
            let lo = envelope.grid[0] - d * T::half();
            let hi = envelope.grid[n - 1] + d * T::half();
            truth.resample(dist, lo, hi, n)
        }
    }
}

/// Curvature limit in a config file: a number or `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CurvatureLimit {
    Value(f64),
    Text(String),
}

impl CurvatureLimit {
    pub fn value(&self) -> Result<f64> {
        match self {
            CurvatureLimit::Value(v) if *v >= 0.0 => Ok(*v),
            CurvatureLimit::Text(s) if matches!(s.trim(), "inf" | "Inf" | "infinity") => Ok(f64::INFINITY),
            CurvatureLimit::Text(s) => s
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| *v >= 0.0)
                .ok_or_else(|| Error::invalid(format!("bad curvature limit {s:?}"))),
            CurvatureLimit::Value(v) => Err(Error::invalid(format!("bad curvature limit {v}"))),
        }
    }
}

/// Where the truth comes from. `csv` is resolved by the caller.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TruthConfig {
    #[serde(default)]
    pub points: Vec<[f64; 2]>,
    #[serde(default)]
    pub csv: Option<String>,
    /// Fit a cubic regression spline to the points and use it as the truth.
    #[serde(default)]
    pub spline: bool,
    #[serde(default)]
    pub knots: Option<Vec<f64>>,
}

impl TruthConfig {
    pub fn build(&self, points: Vec<(f64, f64)>) -> Result<Truth<f64>> {
        if self.spline {
            let curve = match &self.knots {
                Some(k) => ReferenceCurve::new(points, k.clone())?,
                None => ReferenceCurve::with_default_knots(points)?,
            };
            return Ok(Truth::Spline(fit_spline(&curve)?));
        }
        let mut p = points;
        if p.len() < 2 {
            return Err(Error::invalid("truth needs at least two points"));
        }
        p.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        if p.windows(2).any(|w| w[1].0 <= w[0].0) || p.iter().any(|q| !q.0.is_finite() || !q.1.is_finite()) {
            return Err(Error::invalid("truth points need distinct finite x values"));
        }
        Ok(Truth::Linear(p))
    }
}

fn default_direction() -> Direction {
    Direction::Increasing
}

fn default_partitions() -> usize {
    100
}

/// Recovery experiment: one truth, one censoring scheme, a sweep of
/// curvature limits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub truth: TruthConfig,
    /// Defaults to uniform on the truth's support.
    #[serde(default)]
    pub distribution: Option<DistributionSpec<f64>>,
    pub boundaries: Vec<f64>,
    #[serde(default = "default_direction")]
    pub direction: Direction,
    pub range: [f64; 2],
    pub curvatures: Vec<CurvatureLimit>,
    #[serde(default)]
    pub statistics: Vec<String>,
    #[serde(default = "default_partitions")]
    pub partitions: usize,
    #[serde(default)]
    pub output_dir: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StatCheck {
    pub label: String,
    pub lower: f64,
    pub upper: f64,
    pub truth: f64,
    pub contained: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentRun {
    pub curvature: f64,
    pub constraint_tag: String,
    pub min_mse: f64,
    pub envelope: CefEnvelope<f64>,
    pub truth: Vec<f64>,
    pub coverage: CoverageReport<f64>,
    pub statistics: Vec<StatCheck>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub sample: BinnedSample<f64>,
    pub runs: Vec<ExperimentRun>,
}

/// Relative slack (of the outcome range) allowed when checking containment.
pub const COVERAGE_TOL: f64 = 1e-9;

pub fn run_experiment(cfg: &ExperimentConfig, truth: &Truth<f64>) -> Result<ExperimentReport> {
    let range = OutcomeRange::new(cfg.range[0], cfg.range[1])?;
    let (lo, hi) = match cfg.boundaries.as_slice() {
        [first, .., last] => (*first, *last),
        _ => return Err(Error::invalid("experiment needs at least two boundaries")),
    };
    let dist = cfg
        .distribution
        .clone()
        .unwrap_or_else(|| DistributionSpec::uniform(lo, hi));
    let sample = censor(truth, &dist, &cfg.boundaries, cfg.direction, range)?;
    let v = validate(&sample, &dist, ValidateOptions::default())?;
    let specs = cfg
        .statistics
        .iter()
        .map(|s| StatisticSpec::<f64>::parse(s))
        .collect::<Result<Vec<_>>>()?;
    let limits = cfg
        .curvatures
        .iter()
        .map(CurvatureLimit::value)
        .collect::<Result<Vec<_>>>()?;
    let opts = NumericOptions {
        partitions: cfg.partitions,
        ..NumericOptions::default()
    };
    let monotone = cfg.direction != Direction::None;
    let runs = limits
        .par_iter()
        .map(|&c| -> Result<ExperimentRun> {
            let cs = ConstraintSet::new(monotone, c)?;
            let mut model = NumericModel::new(&v, cs, opts)?;
            let s1 = model.stage1()?;
            let envelope = model.envelope(&s1)?;
            let truth_vals = truth_on_grid(truth, &dist, &envelope);
            let tol = COVERAGE_TOL * range.width();
            let coverage = coverage_report(&truth_vals, &envelope, tol);
            let mut statistics = Vec::with_capacity(specs.len());
            let truth_gamma = crate::domain::GridCef {
                values: truth.resample(&dist, lo, hi, cfg.partitions),
                grid_spacing: model.grid().spacing,
            };
            for spec in &specs {
                let b = model.stage2(spec, &s1)?;
                let t = model.eval_stat(&truth_gamma, spec)?;
                statistics.push(StatCheck {
                    label: spec.label(),
                    lower: b.lower,
                    upper: b.upper,
                    truth: t,
                    contained: t >= b.lower - tol && t <= b.upper + tol,
                });
            }
            Ok(ExperimentRun {
                curvature: c,
                constraint_tag: cs.tag(),
                min_mse: s1.min_mse,
                envelope,
                truth: truth_vals,
                coverage,
                statistics,
                warnings: model.warnings().iter().map(ToString::to_string).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport { sample, runs })
}
