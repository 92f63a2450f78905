//! Two-stage bounds over a discretized CEF.
//!
//! Stage 1 finds the smallest bin-weighted MSE any shape-admissible grid CEF
//! can achieve. Because the MSE is strictly convex in the vector of bin means,
//! every minimizer shares the same bin means, so stage 2 optimizes a linear
//! statistic over the shape polytope intersected with narrow bands around
//! those means, which is a linear program.
//!
//! All optimization happens on outcomes rescaled to `[0, 1]`, oriented so the
//! CEF is increasing; results are mapped back to the caller's units.

mod grid;

use std::fmt;

pub use grid::{discretize, Discretization};

use crate::domain::{CefEnvelope, GridCef, Provenance, StatisticSpec, Validated};
use crate::error::{Error, Result};
use crate::lp::{LinearProgram, Simplex};
use crate::minnorm::min_norm_point;
use crate::scalar::Real;

/// Tuning of the numeric engine. Tolerances are in normalized outcome units
/// (the outcome range mapped to `[0, 1]`).
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct NumericOptions {
    /// Number of equal-width partitions of the support.
    pub partitions: usize,
    /// Stage-1 MSE at or below this counts as an exact fit.
    pub eps_mse: f64,
    /// Half-width of the bands around observed bin means after an exact fit.
    pub eps_bin: f64,
    /// Half-width of the bands around the fitted bin means when the stage-1
    /// MSE is positive.
    pub eps_fit: f64,
    /// Iteration budget of the stage-1 minimum-norm solver.
    pub max_iter: usize,
}

impl Default for NumericOptions {
    fn default() -> Self {
        Self {
            partitions: 100,
            eps_mse: 1e-12,
            eps_bin: 1e-9,
            eps_fit: 1e-12,
            max_iter: 2000,
        }
    }
}

/// Shape restrictions imposed on candidate CEFs.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ConstraintSet<T> {
    /// Weakly monotone in the sample's declared direction.
    pub monotone: bool,
    /// Cap on `|f''|` in outcome units per squared conditioning unit;
    /// infinity disables the constraint.
    pub curvature: T,
}

impl<T: Real> ConstraintSet<T> {
    pub fn new(monotone: bool, curvature: T) -> Result<Self> {
        if curvature.is_nan() || curvature < T::zero() {
            return Err(Error::invalid(format!(
                "curvature limit must be non-negative, got {curvature}"
            )));
        }
        Ok(Self {
            monotone,
            curvature,
        })
    }

    pub fn monotone_only() -> Self {
        Self {
            monotone: true,
            curvature: T::infinity(),
        }
    }

    pub fn has_curvature(&self) -> bool {
        self.curvature.is_finite()
    }

    /// No shape restriction at all: bounds are the outcome range.
    pub fn is_trivial(&self) -> bool {
        !self.monotone && !self.has_curvature()
    }

    pub fn tag(&self) -> String {
        match (self.monotone, self.has_curvature()) {
            (true, true) => format!("monotone, curvature<={}", self.curvature),
            (true, false) => "monotone".to_string(),
            (false, true) => format!("curvature<={}", self.curvature),
            (false, false) => "unconstrained".to_string(),
        }
    }
}

/// Conditions worth surfacing to the user that do not stop the computation.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NumericWarning {
    /// A bin boundary was moved to the nearest partition edge.
    BoundarySnapped { index: usize, from: f64, to: f64 },
    /// Neither monotonicity nor curvature is imposed.
    Unconstrained,
    /// The data cannot be fit exactly under the constraints.
    PositiveMse { min_mse: f64 },
}

impl fmt::Display for NumericWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NumericWarning::BoundarySnapped { index, from, to } => write!(
                f,
                "bin boundary {index} moved from {from} to partition edge {to} (distance {})",
                (from - to).abs()
            ),
            NumericWarning::Unconstrained => f.write_str(
                "no monotonicity or curvature constraint: bounds are the outcome range",
            ),
            NumericWarning::PositiveMse { min_mse } => write!(
                f,
                "constraints cannot reproduce the bin means exactly (minimum MSE {min_mse:.6e})"
            ),
        }
    }
}

/// Outcome of the MSE minimization.
#[derive(Debug, Clone, serde::Serialize)]
pub struct StageOneResult<T> {
    /// Minimum bin-weighted MSE in squared outcome units.
    pub min_mse: T,
    /// A shape-admissible grid CEF attaining `min_mse`.
    pub witness: GridCef<T>,
    /// Bin means of the witness (shared by every minimizer).
    pub fitted_means: Vec<T>,
    /// Minimum MSE in normalized units.
    pub min_mse_normalized: T,
    #[serde(skip)]
    fit: Vec<T>,
    #[serde(skip)]
    gamma: Vec<T>,
}

impl<T: Real> StageOneResult<T> {
    /// Whether the bin means are reproduced exactly (up to `eps_mse`).
    pub fn exact(&self, opts: &NumericOptions) -> bool {
        self.min_mse_normalized <= T::lit(opts.eps_mse)
    }
}

/// Sharp bounds on one statistic.
#[derive(Debug, Clone, serde::Serialize)]
pub struct StatBounds<T> {
    pub spec: StatisticSpec<T>,
    pub lower: T,
    pub upper: T,
    /// Grid CEFs attaining `lower` and `upper`.
    pub witnesses: (GridCef<T>, GridCef<T>),
    /// The statistic is a combination of bin means and needs no LP.
    pub point_identified: bool,
}

/// A discretized problem with its LP kept warm across solves.
#[derive(Debug, Clone)]
pub struct NumericModel<T> {
    v: Validated<T>,
    grid: Discretization<T>,
    constraints: ConstraintSet<T>,
    opts: NumericOptions,
    r: Vec<T>,
    rows: Vec<Vec<(usize, T)>>,
    band_rows: Vec<usize>,
    simplex: Simplex<T>,
    warnings: Vec<NumericWarning>,
}

impl<T: Real> NumericModel<T> {
    pub fn new(v: &Validated<T>, constraints: ConstraintSet<T>, opts: NumericOptions) -> Result<Self> {
        if constraints.monotone && !v.monotone() {
            return Err(Error::invalid(
                "monotone constraint requested but the sample declares no direction",
            ));
        }
        let grid = discretize(v, opts.partitions)?;
        let n = grid.len();
        let range = v.sample.range;
        let width = range.width();
        let r: Vec<T> = v.sample.means.iter().map(|&m| range.normalize(m)).collect();

        let mut lp = LinearProgram::new(n, T::zero(), T::one());
        if constraints.monotone {
            for i in 0..n - 1 {
                lp.add_row(vec![(i, -T::one()), (i + 1, T::one())], T::zero(), T::infinity());
            }
        }
        if constraints.has_curvature() && n >= 3 {
            let cap = constraints.curvature * grid.spacing * grid.spacing / width;
            for i in 1..n - 1 {
                let [a, b, c] = grid.curvature_row(i);
                lp.add_row(
                    vec![(i - 1, a), (i, b), (i + 1, c)],
                    -cap,
                    cap,
                );
            }
        }
        let rows: Vec<_> = (0..grid.num_bins()).map(|k| grid.bin_row(k)).collect();
        let band_rows = rows
            .iter()
            .map(|row| lp.add_row(row.clone(), T::neg_infinity(), T::infinity()))
            .collect();

        let mut warnings = Vec::new();
        for (index, &(from, to)) in grid.boundaries.iter().enumerate() {
            if from != to {
                warnings.push(NumericWarning::BoundarySnapped {
                    index,
                    from: from.to_f64_lossy(),
                    to: to.to_f64_lossy(),
                });
            }
        }
        if constraints.is_trivial() {
            warnings.push(NumericWarning::Unconstrained);
        }
        Ok(Self {
            v: v.clone(),
            simplex: Simplex::new(&lp),
            grid,
            constraints,
            opts,
            r,
            rows,
            band_rows,
            warnings,
        })
    }

    pub fn grid(&self) -> &Discretization<T> {
        &self.grid
    }

    pub fn constraints(&self) -> &ConstraintSet<T> {
        &self.constraints
    }

    pub fn options(&self) -> &NumericOptions {
        &self.opts
    }

    pub fn warnings(&self) -> &[NumericWarning] {
        &self.warnings
    }

    fn to_original(&self, u: &[T]) -> GridCef<T> {
        let range = self.v.sample.range;
        GridCef {
            values: u
                .iter()
                .map(|&x| self.v.restore_value(range.denormalize(x)))
                .collect(),
            grid_spacing: self.grid.spacing,
        }
    }

    /// Bin-weighted MSE of a grid CEF given in the caller's units.
    pub fn mse(&self, gamma: &GridCef<T>) -> T {
        let oriented: Vec<T> = gamma.values.iter().map(|&g| self.v.restore_value(g)).collect();
        let b = self.grid.bin_means(&oriented);
        b.iter()
            .zip(&self.v.sample.means)
            .zip(&self.grid.bin_masses)
            .map(|((&bk, &rk), &mk)| mk * (bk - rk) * (bk - rk))
            .sum()
    }

    /// Evaluates a statistic on a grid CEF given in the caller's units.
    pub fn eval_stat(&self, gamma: &GridCef<T>, spec: &StatisticSpec<T>) -> Result<T> {
        self.grid.eval_stat(&gamma.values, spec)
    }

    /// Minimizes the bin-weighted MSE over shape-admissible grid CEFs.
    pub fn stage1(&mut self) -> Result<StageOneResult<T>> {
        for &row in &self.band_rows {
            self.simplex.set_row_bounds(row, T::neg_infinity(), T::infinity());
        }
        let k = self.grid.num_bins();
        let n = self.grid.len();
        let sqrt_m: Vec<T> = self.grid.bin_masses.iter().map(|m| m.sqrt()).collect();
        let rows = &self.rows;
        let r = &self.r;
        let simplex = &mut self.simplex;
        let mut cost = vec![T::zero(); n];
        let res = min_norm_point(
            k,
            |d: &[T]| {
                cost.iter_mut().for_each(|c| *c = T::zero());
                for (kk, row) in rows.iter().enumerate() {
                    for &(i, a) in row {
                        cost[i] = d[kk] * sqrt_m[kk] * a;
                    }
                }
                simplex.set_objective(&cost);
                simplex.minimize()?;
                let gamma = simplex.primal().to_vec();
                let q = rows
                    .iter()
                    .enumerate()
                    .map(|(kk, row)| {
                        let b: T = row.iter().map(|&(i, a)| a * gamma[i]).sum();
                        sqrt_m[kk] * (b - r[kk])
                    })
                    .collect();
                Ok((q, gamma))
            },
            self.opts.max_iter,
        )?;
        let mut gamma = vec![T::zero(); n];
        for (w, g) in &res.atoms {
            for (x, &gi) in gamma.iter_mut().zip(g) {
                *x = *x + *w * gi;
            }
        }
        for g in gamma.iter_mut() {
            *g = g.max(T::zero()).min(T::one());
        }
        let fit = self.grid.bin_means(&gamma);
        let mse_norm: T = fit
            .iter()
            .zip(&self.r)
            .zip(&self.grid.bin_masses)
            .map(|((&b, &rk), &m)| m * (b - rk) * (b - rk))
            .sum();
        let range = self.v.sample.range;
        let width = range.width();
        let min_mse = mse_norm * width * width;
        self.warnings
            .retain(|w| !matches!(w, NumericWarning::PositiveMse { .. }));
        if mse_norm > T::lit(self.opts.eps_mse) {
            self.warnings.push(NumericWarning::PositiveMse {
                min_mse: min_mse.to_f64_lossy(),
            });
        }
        Ok(StageOneResult {
            min_mse,
            witness: self.to_original(&gamma),
            fitted_means: fit
                .iter()
                .map(|&b| self.v.restore_value(range.denormalize(b)))
                .collect(),
            min_mse_normalized: mse_norm,
            fit,
            gamma,
        })
    }

    /// Restricts the LP to the stage-1 argmin set and returns the bin means
    /// (oriented, in outcome units) the bands are centred on.
    fn prepare_stage2(&mut self, s1: &StageOneResult<T>) -> Result<Vec<T>> {
        if s1.gamma.len() != self.grid.len() || s1.fit.len() != self.rows.len() {
            return Err(Error::invalid("stage-1 result does not match this model"));
        }
        let zero = vec![T::zero(); self.grid.len()];
        if s1.exact(&self.opts) {
            let eps = T::lit(self.opts.eps_bin);
            for (k, &row) in self.band_rows.iter().enumerate() {
                self.simplex.set_row_bounds(row, self.r[k] - eps, self.r[k] + eps);
            }
            self.simplex.set_objective(&zero);
            match self.simplex.minimize() {
                Ok(_) => return Ok(self.v.sample.means.clone()),
                Err(e) if e.is_infeasible() => {}
                Err(e) => return Err(e),
            }
        }
        let eps = T::lit(self.opts.eps_fit);
        for (k, &row) in self.band_rows.iter().enumerate() {
            self.simplex.set_row_bounds(row, s1.fit[k] - eps, s1.fit[k] + eps);
        }
        self.simplex.set_objective(&zero);
        self.simplex.minimize()?;
        let range = self.v.sample.range;
        Ok(s1.fit.iter().map(|&b| range.denormalize(b)).collect())
    }

    /// Weights `λ` with `c = Σ λ_k a_k` when `c` lies in the span of the
    /// bin-mean rows.
    fn identified(&self, c: &[T]) -> Option<Vec<T>> {
        let scale = c.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
        let tol = T::lit(1e-12) * scale.max(T::min_positive_value());
        let mut covered = vec![false; c.len()];
        let mut lambda = Vec::with_capacity(self.rows.len());
        for row in &self.rows {
            let (num, den) = row.iter().fold((T::zero(), T::zero()), |(n, d), &(i, a)| {
                (n + c[i] * a, d + a * a)
            });
            let l = num / den;
            for &(i, a) in row {
                if (c[i] - l * a).abs() > tol {
                    return None;
                }
                covered[i] = true;
            }
            lambda.push(l);
        }
        if c.iter().zip(&covered).any(|(&ci, &cov)| !cov && ci.abs() > tol) {
            return None;
        }
        Some(lambda)
    }

    /// Bounds on the linear statistic with coefficients `c`, in oriented
    /// outcome units, once [`Self::prepare_stage2`] has run.
    fn bound_coefficients(
        &mut self,
        c: &[T],
        centres: &[T],
        s1: &StageOneResult<T>,
    ) -> Result<(T, Vec<T>, T, Vec<T>, bool)> {
        let range = self.v.sample.range;
        let total: T = c.iter().copied().sum();
        let to_raw = |u: T| range.y_min * total + range.width() * u;
        if let Some(lambda) = self.identified(c) {
            let val: T = lambda.iter().zip(centres).map(|(&l, &m)| l * m).sum();
            return Ok((val, s1.gamma.clone(), val, s1.gamma.clone(), true));
        }
        self.simplex.set_objective(c);
        let lo = self.simplex.minimize()?;
        let g_lo = self.simplex.primal().to_vec();
        let hi = self.simplex.maximize(c)?;
        let g_hi = self.simplex.primal().to_vec();
        Ok((to_raw(lo), g_lo, to_raw(hi), g_hi, false))
    }

    /// Sharp bounds on a statistic among CEFs that attain the stage-1 MSE.
    pub fn stage2(&mut self, spec: &StatisticSpec<T>, s1: &StageOneResult<T>) -> Result<StatBounds<T>> {
        let c = self.grid.stat_coefficients(spec)?;
        let centres = self.prepare_stage2(s1)?;
        let (lo, g_lo, hi, g_hi, point_identified) = self.bound_coefficients(&c, &centres, s1)?;
        let (lower, upper) = self.v.restore_interval(lo, hi.max(lo));
        let (w_lower, w_upper) = if self.v.flipped {
            (self.to_original(&g_hi), self.to_original(&g_lo))
        } else {
            (self.to_original(&g_lo), self.to_original(&g_hi))
        };
        Ok(StatBounds {
            spec: *spec,
            lower,
            upper,
            witnesses: (w_lower, w_upper),
            point_identified,
        })
    }

    /// Pointwise bounds on the CEF at every partition midpoint.
    pub fn envelope(&mut self, s1: &StageOneResult<T>) -> Result<CefEnvelope<T>> {
        let centres = self.prepare_stage2(s1)?;
        let n = self.grid.len();
        let range = self.v.sample.range;
        let mut lower = vec![T::zero(); n];
        let mut upper = vec![T::zero(); n];
        let mut open = Vec::new();
        let mut e = vec![T::zero(); n];
        for i in 0..n {
            e[i] = T::one();
            match self.identified(&e) {
                Some(lambda) => {
                    let val: T = lambda.iter().zip(&centres).map(|(&l, &m)| l * m).sum();
                    lower[i] = val;
                    upper[i] = val;
                }
                None => open.push(i),
            }
            e[i] = T::zero();
        }
        for &i in &open {
            e[i] = T::one();
            self.simplex.set_objective(&e);
            lower[i] = range.denormalize(self.simplex.minimize()?);
            e[i] = T::zero();
        }
        for &i in open.iter().rev() {
            e[i] = T::one();
            upper[i] = range.denormalize(self.simplex.maximize(&e)?);
            e[i] = T::zero();
        }
        for i in 0..n {
            upper[i] = upper[i].max(lower[i]);
        }
        let env = CefEnvelope {
            grid: self.grid.midpoints(),
            lower,
            upper,
            provenance: Provenance::Numeric,
            constraint_tag: self.constraints.tag(),
        };
        Ok(env.restore(&self.v))
    }
}

/// Discretizes `v` and minimizes the bin-weighted MSE.
pub fn stage1_min_mse<T: Real>(
    v: &Validated<T>,
    constraints: ConstraintSet<T>,
    opts: NumericOptions,
) -> Result<StageOneResult<T>> {
    NumericModel::new(v, constraints, opts)?.stage1()
}

/// Runs both stages for one statistic.
pub fn bound_stat<T: Real>(
    v: &Validated<T>,
    constraints: ConstraintSet<T>,
    spec: &StatisticSpec<T>,
    opts: NumericOptions,
) -> Result<StatBounds<T>> {
    let mut model = NumericModel::new(v, constraints, opts)?;
    let s1 = model.stage1()?;
    model.stage2(spec, &s1)
}

/// Runs both stages for the CEF at every partition midpoint.
pub fn cef_envelope_numeric<T: Real>(
    v: &Validated<T>,
    constraints: ConstraintSet<T>,
    opts: NumericOptions,
) -> Result<CefEnvelope<T>> {
    let mut model = NumericModel::new(v, constraints, opts)?;
    let s1 = model.stage1()?;
    model.envelope(&s1)
}
