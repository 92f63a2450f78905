//! Bounds when the outcome is interval-censored as well.
//!
//! Only the joint mass of (parent bin, child bin) is observed. Two extreme
//! placements of children inside each child bin bracket the conditional
//! means: independent of the parent (high mobility) or sorted by parent bin
//! (low mobility). Each scenario yields a binned sample; the reported bounds
//! are the union of the two scenarios' bounds.

use serde::Serialize;

use crate::domain::{validate, BinnedSample, Direction, DistributionSpec, OutcomeRange, StatisticSpec, ValidateOptions};
use crate::error::{Error, Result, ValidationIssue};
use crate::numeric::{ConstraintSet, NumericModel, NumericOptions, StatBounds};
use crate::scalar::Real;

/// Tolerance on mass totals and margins.
pub const BUDGET_TOL: f64 = 1e-9;

/// Joint probability of parent bin `k` and child bin `h`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionMatrix<T> {
    pub parent_boundaries: Vec<T>,
    pub child_boundaries: Vec<T>,
    /// `mass[k][h]`.
    pub mass: Vec<Vec<T>>,
}

impl<T: Real> TransitionMatrix<T> {
    /// Checks shape, signs, the total, and that column sums match the child
    /// bin widths (child ranks are uniform on the child support).
    pub fn new(parent_boundaries: Vec<T>, child_boundaries: Vec<T>, mass: Vec<Vec<T>>) -> Result<Self> {
        let mut issues = Vec::new();
        let k = parent_boundaries.len().saturating_sub(1);
        let h = child_boundaries.len().saturating_sub(1);
        if k == 0 || h == 0 {
            issues.push(ValidationIssue::new("need at least one parent and one child bin"));
        }
        for (name, b) in [("parent", &parent_boundaries), ("child", &child_boundaries)] {
            if b.windows(2).any(|w| !(w[1] > w[0])) || b.iter().any(|v| !v.is_finite()) {
                issues.push(ValidationIssue::new(format!("{name} boundaries must be finite and strictly increasing")));
            }
        }
        if mass.len() != k {
            issues.push(ValidationIssue::new(format!("{k} parent bins but {} mass rows", mass.len())));
        }
        for (r, row) in mass.iter().enumerate() {
            if row.len() != h {
                issues.push(ValidationIssue::at(r, format!("{h} child bins but {} entries", row.len())));
            }
            if row.iter().any(|m| !m.is_finite() || *m < T::zero()) {
                issues.push(ValidationIssue::at(r, "mass entries must be finite and non-negative"));
            }
        }
        if !issues.is_empty() {
            return Err(Error::Validation(issues));
        }
        let tm = Self {
            parent_boundaries,
            child_boundaries,
            mass,
        };
        let tol = T::lit(BUDGET_TOL);
        let total: T = tm.row_sums().into_iter().sum();
        if (total - T::one()).abs() > tol {
            issues.push(ValidationIssue::new(format!("joint mass sums to {total}, expected 1")));
        }
        let (c_lo, c_hi) = tm.child_support();
        for (j, &col) in tm.column_sums().iter().enumerate() {
            let expect = (tm.child_boundaries[j + 1] - tm.child_boundaries[j]) / (c_hi - c_lo);
            if (col - expect).abs() > tol {
                issues.push(ValidationIssue::new(format!(
                    "child bin {j} column sums to {col}, but its rank width implies {expect}"
                )));
            }
        }
        if issues.is_empty() {
            Ok(tm)
        } else {
            Err(Error::Validation(issues))
        }
    }

    pub fn num_parent_bins(&self) -> usize {
        self.mass.len()
    }

    pub fn num_child_bins(&self) -> usize {
        self.child_boundaries.len() - 1
    }

    pub fn child_support(&self) -> (T, T) {
        (self.child_boundaries[0], self.child_boundaries[self.child_boundaries.len() - 1])
    }

    pub fn row_sums(&self) -> Vec<T> {
        self.mass.iter().map(|r| r.iter().copied().sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<T> {
        (0..self.num_child_bins())
            .map(|h| self.mass.iter().map(|r| r[h]).sum())
            .collect()
    }

    /// Checks row sums against the parent bin masses under `dist`.
    pub fn check_parent_margins(&self, dist: &DistributionSpec<T>) -> Result<()> {
        let tol = T::lit(BUDGET_TOL);
        let mut issues = Vec::new();
        for (k, &row) in self.row_sums().iter().enumerate() {
            let expect = dist.bin_mass(self.parent_boundaries[k], self.parent_boundaries[k + 1])?;
            if (row - expect).abs() > tol {
                issues.push(ValidationIssue::at(
                    k,
                    format!("parent bin row sums to {row}, but the distribution gives it mass {expect}"),
                ));
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(issues))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    LowMobility,
    HighMobility,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioMeans<T> {
    pub scenario: Scenario,
    /// Expected child rank per parent bin.
    pub means: Vec<T>,
    /// Rank interval each parent bin occupies inside each child bin.
    pub sub_intervals: Vec<Vec<(T, T)>>,
}

/// Conditional mean child rank per parent bin under `scenario`.
pub fn scenario_means<T: Real>(tm: &TransitionMatrix<T>, scenario: Scenario) -> ScenarioMeans<T> {
    let k = tm.num_parent_bins();
    let h = tm.num_child_bins();
    let cols = tm.column_sums();
    let rows = tm.row_sums();
    let mut sub = vec![vec![(T::zero(), T::zero()); h]; k];
    for j in 0..h {
        let (c_lo, c_hi) = (tm.child_boundaries[j], tm.child_boundaries[j + 1]);
        let mut cum = T::zero();
        for (p, row) in tm.mass.iter().enumerate() {
            sub[p][j] = match scenario {
                Scenario::HighMobility => (c_lo, c_hi),
                Scenario::LowMobility if cols[j] > T::zero() => {
                    let a = c_lo + (c_hi - c_lo) * cum / cols[j];
                    cum = cum + row[j];
                    let b = if p + 1 == k { c_hi } else { c_lo + (c_hi - c_lo) * cum / cols[j] };
                    (a, b)
                }
                Scenario::LowMobility => (c_lo, c_lo),
            };
        }
    }
    let means = (0..k)
        .map(|p| {
            (0..h)
                .map(|j| tm.mass[p][j] * (sub[p][j].0 + sub[p][j].1) * T::half())
                .sum::<T>()
                / rows[p]
        })
        .collect();
    ScenarioMeans {
        scenario,
        means,
        sub_intervals: sub,
    }
}

/// A parent bin whose child-bin CDF lies above its predecessor's somewhere.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceViolation<T> {
    pub parent_bin: usize,
    pub child_boundary: usize,
    pub lower_bin_cdf: T,
    pub upper_bin_cdf: T,
}

/// Checks that each parent bin's child distribution first-order dominates the
/// one below it. Violations are reported, not corrected.
pub fn dominance_violations<T: Real>(tm: &TransitionMatrix<T>) -> Vec<DominanceViolation<T>> {
    let rows = tm.row_sums();
    let cdfs: Vec<Vec<T>> = tm
        .mass
        .iter()
        .zip(&rows)
        .map(|(r, &s)| {
            let mut acc = T::zero();
            r.iter()
                .map(|&m| {
                    acc = acc + m / s;
                    acc
                })
                .collect()
        })
        .collect();
    let tol = T::lit(BUDGET_TOL);
    let mut out = Vec::new();
    for k in 1..cdfs.len() {
        for j in 0..tm.num_child_bins().saturating_sub(1) {
            if cdfs[k][j] > cdfs[k - 1][j] + tol {
                out.push(DominanceViolation {
                    parent_bin: k,
                    child_boundary: j + 1,
                    lower_bin_cdf: cdfs[k - 1][j],
                    upper_bin_cdf: cdfs[k][j],
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioBounds<T> {
    pub scenario: Scenario,
    pub means: Vec<T>,
    pub min_mse: T,
    pub lower: T,
    pub upper: T,
    pub point_identified: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DoubleCensoredBounds<T> {
    pub lower: T,
    pub upper: T,
    pub lower_from: Scenario,
    pub upper_from: Scenario,
    pub scenarios: Vec<ScenarioBounds<T>>,
    pub dominance_violations: Vec<DominanceViolation<T>>,
}

/// Union over both scenarios of the numeric bounds on `spec`.
pub fn double_censored_stat_bounds<T: Real>(
    tm: &TransitionMatrix<T>,
    dist: &DistributionSpec<T>,
    constraints: ConstraintSet<T>,
    spec: &StatisticSpec<T>,
    opts: NumericOptions,
) -> Result<DoubleCensoredBounds<T>> {
    tm.check_parent_margins(dist)?;
    let (c_lo, c_hi) = tm.child_support();
    let range = OutcomeRange::new(c_lo, c_hi)?;
    let direction = if constraints.monotone {
        Direction::Increasing
    } else {
        Direction::None
    };
    let mut scenarios = Vec::with_capacity(2);
    for scenario in [Scenario::LowMobility, Scenario::HighMobility] {
        let sm = scenario_means(tm, scenario);
        let sample = BinnedSample::new(tm.parent_boundaries.clone(), sm.means.clone(), direction, range);
        let v = validate(&sample, dist, ValidateOptions { allow_direction_violation: true })?;
        let mut model = NumericModel::new(&v, constraints, opts)?;
        let s1 = model.stage1()?;
        let StatBounds {
            lower,
            upper,
            point_identified,
            ..
        } = model.stage2(spec, &s1)?;
        scenarios.push(ScenarioBounds {
            scenario,
            means: sm.means,
            min_mse: s1.min_mse,
            lower,
            upper,
            point_identified,
        });
    }
    let (lo_s, hi_s) = (&scenarios[0], &scenarios[1]);
    let (lower, lower_from) = if lo_s.lower <= hi_s.lower {
        (lo_s.lower, lo_s.scenario)
    } else {
        (hi_s.lower, hi_s.scenario)
    };
    let (upper, upper_from) = if lo_s.upper >= hi_s.upper {
        (lo_s.upper, lo_s.scenario)
    } else {
        (hi_s.upper, hi_s.scenario)
    };
    Ok(DoubleCensoredBounds {
        lower,
        upper,
        lower_from,
        upper_from,
        scenarios,
        dominance_violations: dominance_violations(tm),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two() -> TransitionMatrix<f64> {
        // Parent bins [0,50],[50,100]; bottom child bin holds 27% of children,
        // 55% of them from the lower parent bin.
        let m = vec![vec![0.27 * 0.55, 0.5 - 0.27 * 0.55], vec![0.27 * 0.45, 0.5 - 0.27 * 0.45]];
        TransitionMatrix::new(vec![0.0, 50.0, 100.0], vec![0.0, 27.0, 100.0], m).unwrap()
    }

    #[test]
    fn low_mobility_stacking() {
        let tm = two_by_two();
        let low = scenario_means(&tm, Scenario::LowMobility);
        assert!((low.sub_intervals[0][0].1 - 14.85).abs() < 1e-12);
        assert!((low.sub_intervals[1][0].0 - 14.85).abs() < 1e-12);
        assert_eq!(low.sub_intervals[1][0].1, 27.0);
        let high = scenario_means(&tm, Scenario::HighMobility);
        assert_eq!(high.sub_intervals[0][1], (27.0, 100.0));
        for s in [&low, &high] {
            let avg = 0.5 * s.means[0] + 0.5 * s.means[1];
            assert!((avg - 50.0).abs() < 1e-9);
        }
        assert!(low.means[0] <= high.means[0] && low.means[1] >= high.means[1]);
    }

    #[test]
    fn independence_budget_by_direct_summation() {
        let rows = [0.2, 0.3, 0.5];
        let cols = [0.1, 0.25, 0.4, 0.25];
        let cb = vec![0.0, 10.0, 35.0, 75.0, 100.0];
        let mass: Vec<Vec<f64>> = rows.iter().map(|r| cols.iter().map(|c| r * c).collect()).collect();
        let tm = TransitionMatrix::new(vec![0.0, 20.0, 50.0, 100.0], cb.clone(), mass).unwrap();
        let low = scenario_means(&tm, Scenario::LowMobility);
        let high = scenario_means(&tm, Scenario::HighMobility);
        assert!(low.means != high.means);
        // direct oracle: stacked sub-interval midpoints under independence
        for (p, &r) in rows.iter().enumerate() {
            let before: f64 = rows[..p].iter().sum();
            let expect: f64 = (0..4)
                .map(|j| {
                    let w = cb[j + 1] - cb[j];
                    cols[j] * (cb[j] + w * (before + r / 2.0))
                })
                .sum();
            assert!((low.means[p] - expect).abs() < 1e-12);
        }
        for s in [&low, &high] {
            let avg: f64 = rows.iter().zip(&s.means).map(|(r, m)| r * m).sum();
            assert!((avg - 50.0).abs() < 1e-9);
        }
        assert!(dominance_violations(&tm).is_empty());
    }

    #[test]
    fn rejects_incoherent_margins_and_reports_dominance() {
        let bad = TransitionMatrix::new(vec![0.0, 50.0, 100.0], vec![0.0, 27.0, 100.0], vec![vec![0.2, 0.3], vec![0.2, 0.3]]);
        let msg = bad.unwrap_err().to_string();
        assert!(msg.contains("column sums to 0.4"), "{msg}");
        let flipped = TransitionMatrix::new(
            vec![0.0, 50.0, 100.0],
            vec![0.0, 50.0, 100.0],
            vec![vec![0.1, 0.4], vec![0.4, 0.1]],
        )
        .unwrap();
        assert_eq!(dominance_violations(&flipped).len(), 1);
    }

    #[test]
    fn union_contains_both_scenarios() {
        let tm = two_by_two();
        let d = DistributionSpec::uniform(0.0, 100.0);
        let opts = NumericOptions { partitions: 50, ..Default::default() };
        let mu = StatisticSpec::IntervalMean { a: 0.0, b: 50.0 };
        let b = double_censored_stat_bounds(&tm, &d, ConstraintSet::monotone_only(), &mu, opts).unwrap();
        assert!(b.scenarios.iter().all(|s| s.point_identified));
        for s in &b.scenarios {
            assert!(b.lower <= s.lower && s.upper <= b.upper);
            assert!((s.lower - s.means[0]).abs() < 1e-12);
        }
        // One child bin: no outcome information beyond the stacking order.
        let single = TransitionMatrix::new(vec![0.0, 50.0, 100.0], vec![0.0, 100.0], vec![vec![0.5], vec![0.5]]).unwrap();
        let b = double_censored_stat_bounds(&single, &d, ConstraintSet::monotone_only(), &mu, opts).unwrap();
        assert_eq!(b.scenarios[1].means, vec![50.0, 50.0]);
        assert_eq!(b.scenarios[0].means, vec![25.0, 75.0]);
        assert!((b.lower - 25.0).abs() < 1e-12 && (b.upper - 50.0).abs() < 1e-12);
    }
}
