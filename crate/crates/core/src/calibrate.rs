//! Curvature calibration from a fully observed reference CEF.
//!
//! A least-squares cubic regression spline with fixed interior knots is fit
//! to the reference points. Its second derivative is piecewise linear, so the
//! largest `|f''|` is read off at the knots and the support ends.

use serde::Serialize;

use crate::error::{Error, Result, ValidationIssue};
use crate::linalg;
use crate::scalar::Real;

/// Multiple of the estimated curvature suggested as a working cap.
pub const SUGGESTED_MULTIPLE: f64 = 2.0;

/// Number of interior knots placed by [`default_knots`].
pub const DEFAULT_KNOT_COUNT: usize = 4;

/// Reference points `(x, y)` with interior knot locations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceCurve<T> {
    pub points: Vec<(T, T)>,
    pub knots: Vec<T>,
}

impl<T: Real> ReferenceCurve<T> {
    /// Sorts `points` by `x` and checks them against `knots`.
    pub fn new(mut points: Vec<(T, T)>, knots: Vec<T>) -> Result<Self> {
        let mut issues = Vec::new();
        for (i, &(x, y)) in points.iter().enumerate() {
            if !x.is_finite() || !y.is_finite() {
                issues.push(ValidationIssue::at(i, "non-finite reference point"));
            }
        }
        if points.len() < 2 {
            issues.push(ValidationIssue::new("reference curve needs at least two points"));
        }
        if !issues.is_empty() {
            return Err(Error::Validation(issues));
        }
        points.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
        let lo = points[0].0;
        let hi = points[points.len() - 1].0;
        for (j, &k) in knots.iter().enumerate() {
            if !(k > lo && k < hi) {
                issues.push(ValidationIssue::new(format!(
                    "knot {k} is not strictly inside the support [{lo}, {hi}]"
                )));
            }
            if j > 0 && k <= knots[j - 1] {
                issues.push(ValidationIssue::new("knots must be strictly increasing"));
            }
        }
        if issues.is_empty() {
            let mut edges = vec![lo];
            edges.extend(knots.iter().copied());
            edges.push(hi);
            for (s, w) in edges.windows(2).enumerate() {
                let last = s == edges.len() - 2;
                let count = points
                    .iter()
                    .filter(|p| p.0 >= w[0] && (p.0 < w[1] || (last && p.0 <= w[1])))
                    .count();
                if count < 2 {
                    issues.push(ValidationIssue::new(format!(
                        "spline segment [{}, {}] holds {count} point(s), needs at least 2",
                        w[0], w[1]
                    )));
                }
            }
        }
        if !issues.is_empty() {
            return Err(Error::Validation(issues));
        }
        Ok(Self { points, knots })
    }

    /// Uses [`default_knots`] for the interior knots.
    pub fn with_default_knots(points: Vec<(T, T)>) -> Result<Self> {
        let xs: Vec<T> = points.iter().map(|p| p.0).collect();
        let knots = default_knots(&xs, DEFAULT_KNOT_COUNT);
        Self::new(points, knots)
    }

    pub fn support(&self) -> (T, T) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }
}

/// `count` interior knots at equally spaced quantiles of `xs` (quintiles for
/// four knots), dropping duplicates.
pub fn default_knots<T: Real>(xs: &[T], count: usize) -> Vec<T> {
    let mut s: Vec<T> = xs.iter().copied().filter(|x| x.is_finite()).collect();
    if s.len() < 2 {
        return Vec::new();
    }
    s.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = s.len();
    let mut out: Vec<T> = Vec::with_capacity(count);
    for j in 1..=count {
        let p = j as f64 / (count + 1) as f64;
        let pos = p * (n - 1) as f64;
        let i = pos.floor() as usize;
        let frac = T::lit(pos - i as f64);
        let q = if i + 1 < n { s[i] + (s[i + 1] - s[i]) * frac } else { s[i] };
        if q > s[0] && q < s[n - 1] && out.last().is_none_or(|&l| q > l) {
            out.push(q);
        }
    }
    out
}

/// Cubic spline in truncated-power form on the rescaled variable
/// `t = (x - lo) / (hi - lo)`: `c0 + c1 t + c2 t^2 + c3 t^3 + Σ d_j (t - κ_j)_+^3`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spline<T> {
    pub lo: T,
    pub hi: T,
    pub knots: Vec<T>,
    pub coefficients: Vec<T>,
    /// `y - f(x)` at each reference point, in sorted order.
    pub residuals: Vec<T>,
}

impl<T: Real> Spline<T> {
    fn scale(&self) -> T {
        T::one() / (self.hi - self.lo)
    }

    fn t(&self, x: T) -> T {
        (x - self.lo) * self.scale()
    }

    fn scaled_knots(&self) -> impl Iterator<Item = T> + '_ {
        self.knots.iter().map(|&k| self.t(k))
    }

    pub fn eval(&self, x: T) -> T {
        let t = self.t(x);
        let c = &self.coefficients;
        let poly = c[0] + t * (c[1] + t * (c[2] + t * c[3]));
        self.scaled_knots()
            .zip(&c[4..])
            .fold(poly, |acc, (k, &d)| acc + d * (t - k).max(T::zero()).powi(3))
    }

    pub fn derivative(&self, x: T) -> T {
        let t = self.t(x);
        let c = &self.coefficients;
        let three = T::lit(3.0);
        let poly = c[1] + t * (T::two() * c[2] + three * t * c[3]);
        let d = self
            .scaled_knots()
            .zip(&c[4..])
            .fold(poly, |acc, (k, &d)| acc + three * d * (t - k).max(T::zero()).powi(2));
        d * self.scale()
    }

    pub fn second_derivative(&self, x: T) -> T {
        let t = self.t(x);
        let c = &self.coefficients;
        let six = T::lit(6.0);
        let poly = T::two() * c[2] + six * t * c[3];
        let d = self
            .scaled_knots()
            .zip(&c[4..])
            .fold(poly, |acc, (k, &d)| acc + six * d * (t - k).max(T::zero()));
        d * self.scale() * self.scale()
    }

    pub fn residual_sum_of_squares(&self) -> T {
        self.residuals.iter().map(|&r| r * r).sum()
    }
}

fn basis_row<T: Real>(t: T, knots: &[T]) -> Vec<T> {
    let mut row = vec![T::one(), t, t * t, t * t * t];
    row.extend(knots.iter().map(|&k| (t - k).max(T::zero()).powi(3)));
    row
}

/// Least-squares cubic regression spline with the curve's knots.
pub fn fit_spline<T: Real>(curve: &ReferenceCurve<T>) -> Result<Spline<T>> {
    let (lo, hi) = curve.support();
    let w = hi - lo;
    let knots_t: Vec<T> = curve.knots.iter().map(|&k| (k - lo) / w).collect();
    let cols = 4 + knots_t.len();
    let rows = curve.points.len();
    if rows < cols {
        return Err(Error::RankDeficient(format!(
            "{rows} points cannot determine {cols} spline coefficients"
        )));
    }
    let mut a = Vec::with_capacity(rows * cols);
    let mut b = Vec::with_capacity(rows);
    for &(x, y) in &curve.points {
        a.extend(basis_row((x - lo) / w, &knots_t));
        b.push(y);
    }
    let coefficients = linalg::lstsq(&a, &b, rows, cols).ok_or_else(|| {
        Error::RankDeficient("spline design matrix has dependent columns".into())
    })?;
    let mut spline = Spline {
        lo,
        hi,
        knots: curve.knots.clone(),
        coefficients,
        residuals: Vec::new(),
    };
    spline.residuals = curve.points.iter().map(|&(x, y)| y - spline.eval(x)).collect();
    Ok(spline)
}

/// Largest `|f''|` over the support and where it occurs.
pub fn max_curvature<T: Real>(spline: &Spline<T>) -> (T, T) {
    std::iter::once(spline.lo)
        .chain(spline.knots.iter().copied())
        .chain(std::iter::once(spline.hi))
        .map(|x| (spline.second_derivative(x).abs(), x))
        .fold((T::zero(), spline.lo), |best, cur| if cur.0 > best.0 { cur } else { best })
}

/// Calibration summary for a reference curve.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureEstimate<T> {
    pub max_curvature: T,
    pub at: T,
    /// [`SUGGESTED_MULTIPLE`] times `max_curvature`; advisory only.
    pub suggested_cap: T,
    pub spline: Spline<T>,
}

pub fn calibrate<T: Real>(curve: &ReferenceCurve<T>) -> Result<CurvatureEstimate<T>> {
    let spline = fit_spline(curve)?;
    let (c, at) = max_curvature(&spline);
    Ok(CurvatureEstimate {
        max_curvature: c,
        at,
        suggested_cap: c * T::lit(SUGGESTED_MULTIPLE),
        spline,
    })
}
