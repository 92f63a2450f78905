//! Bounded-variable primal simplex.
//!
//! Every row `lo <= a·x <= hi` gets a slack `s = a·x`, so the working system
//! is `A x - s = 0` with bounds on both structurals and slacks. The basis
//! inverse is kept dense and refreshed by Gauss-Jordan every
//! [`REINVERT_EVERY`] pivots. Pricing is Dantzig (largest reduced cost,
//! lowest index on ties) and falls back to Bland's rule after a run of
//! degenerate pivots. Both phases are deterministic.
//!
//! A [`Simplex`] keeps its basis between calls, so re-solving after changing
//! only the objective or a row's bounds starts from the previous vertex.

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;

const REINVERT_EVERY: usize = 64;
const BLAND_AFTER: usize = 50;

#[derive(Debug, Clone)]
pub struct LinearProgram<T> {
    col_lo: Vec<T>,
    col_hi: Vec<T>,
    rows: Vec<(Vec<(usize, T)>, T, T)>,
}

impl<T: Real> LinearProgram<T> {
    /// `n` structural variables, each bounded to `[lo, hi]`.
    pub fn new(n: usize, lo: T, hi: T) -> Self {
        Self {
            col_lo: vec![lo; n],
            col_hi: vec![hi; n],
            rows: Vec::new(),
        }
    }

    pub fn num_cols(&self) -> usize {
        self.col_lo.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn set_col_bounds(&mut self, j: usize, lo: T, hi: T) {
        self.col_lo[j] = lo;
        self.col_hi[j] = hi;
    }

    /// Adds `lo <= Σ coef·x <= hi`; either side may be infinite. Returns the
    /// row index.
    pub fn add_row(&mut self, coeffs: Vec<(usize, T)>, lo: T, hi: T) -> usize {
        debug_assert!(coeffs.iter().all(|&(j, _)| j < self.num_cols()));
        self.rows.push((coeffs, lo, hi));
        self.rows.len() - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    AtLower,
    AtUpper,
    Free,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SimplexStats {
    pub pivots: usize,
    pub bound_flips: usize,
    pub reinversions: usize,
}

#[derive(Debug, Clone)]
pub struct Simplex<T> {
    n_struct: usize,
    m: usize,
    cols: Vec<Vec<(usize, T)>>,
    lo: Vec<T>,
    hi: Vec<T>,
    x: Vec<T>,
    state: Vec<State>,
    basis: Vec<usize>,
    binv: Vec<T>,
    cost: Vec<T>,
    since_reinvert: usize,
    dirty: bool,
    pub stats: SimplexStats,
}

fn resting_state<T: Real>(lo: T, hi: T) -> (State, T) {
    if lo.is_finite() {
        (State::AtLower, lo)
    } else if hi.is_finite() {
        (State::AtUpper, hi)
    } else {
        (State::Free, T::zero())
    }
}

impl<T: Real> Simplex<T> {
    pub fn new(lp: &LinearProgram<T>) -> Self {
        let n_struct = lp.num_cols();
        let m = lp.num_rows();
        let mut cols: Vec<Vec<(usize, T)>> = vec![Vec::new(); n_struct + m];
        for (r, (coeffs, _, _)) in lp.rows.iter().enumerate() {
            for &(j, a) in coeffs {
                if a != T::zero() {
                    cols[j].push((r, a));
                }
            }
            cols[n_struct + r].push((r, -T::one()));
        }
        let mut lo = lp.col_lo.clone();
        let mut hi = lp.col_hi.clone();
        lo.extend(lp.rows.iter().map(|r| r.1));
        hi.extend(lp.rows.iter().map(|r| r.2));
        let n = n_struct + m;
        let mut x = vec![T::zero(); n];
        let mut state = vec![State::Basic; n];
        for j in 0..n_struct {
            let (s, v) = resting_state(lo[j], hi[j]);
            state[j] = s;
            x[j] = v;
        }
        let basis: Vec<usize> = (n_struct..n).collect();
        let mut binv = vec![T::zero(); m * m];
        for i in 0..m {
            binv[i * m + i] = -T::one();
        }
        let mut s = Self {
            n_struct,
            m,
            cols,
            lo,
            hi,
            x,
            state,
            basis,
            binv,
            cost: vec![T::zero(); n],
            since_reinvert: 0,
            dirty: true,
            stats: SimplexStats::default(),
        };
        s.recompute_primal();
        s
    }

    pub fn num_cols(&self) -> usize {
        self.n_struct
    }

    /// Replaces the objective; `c` covers the structural variables.
    pub fn set_objective(&mut self, c: &[T]) {
        assert_eq!(c.len(), self.n_struct, "objective length");
        self.cost[..self.n_struct].copy_from_slice(c);
    }

    /// Changes the bounds of row `r`. The current basis is kept.
    pub fn set_row_bounds(&mut self, r: usize, lo: T, hi: T) {
        let j = self.n_struct + r;
        self.lo[j] = lo;
        self.hi[j] = hi;
        if self.state[j] != State::Basic {
            let (s, v) = resting_state(lo, hi);
            let (s, v) = match self.state[j] {
                State::AtUpper if hi.is_finite() => (State::AtUpper, hi),
                _ => (s, v),
            };
            self.state[j] = s;
            self.x[j] = v;
            self.dirty = true;
        }
    }

    /// Structural part of the current primal point.
    pub fn primal(&self) -> &[T] {
        &self.x[..self.n_struct]
    }

    /// Objective value of the current primal point.
    pub fn objective(&self) -> T {
        (0..self.n_struct).map(|j| self.cost[j] * self.x[j]).sum()
    }

    /// Minimizes the current objective, starting from the current basis.
    /// Returns the optimal objective value.
    pub fn minimize(&mut self) -> Result<T> {
        for _ in 0..3 {
            if self.dirty {
                self.recompute_primal();
            }
            self.run(true)?;
            self.run(false)?;
            self.recompute_primal();
            if self.max_infeasibility() <= T::lit(T::FEAS_TOL * 10.0) {
                return Ok(self.objective());
            }
            self.reinvert();
        }
        Err(Error::NonConvergence(
            "simplex lost primal feasibility repeatedly".into(),
        ))
    }

    /// Maximizes `c·x`; returns the optimal value.
    pub fn maximize(&mut self, c: &[T]) -> Result<T> {
        let neg: Vec<T> = c.iter().map(|&v| -v).collect();
        self.set_objective(&neg);
        Ok(-self.minimize()?)
    }

    fn max_infeasibility(&self) -> T {
        self.basis
            .iter()
            .map(|&j| {
                let v = self.x[j];
                (self.lo[j] - v).max(v - self.hi[j]).max(T::zero())
            })
            .fold(T::zero(), T::max)
    }

    fn recompute_primal(&mut self) {
        let m = self.m;
        let mut rhs = vec![T::zero(); m];
        for (j, col) in self.cols.iter().enumerate() {
            if self.state[j] == State::Basic || self.x[j] == T::zero() {
                continue;
            }
            for &(r, a) in col {
                rhs[r] = rhs[r] - a * self.x[j];
            }
        }
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let v = row.iter().zip(&rhs).map(|(&b, &c)| b * c).sum();
            self.x[self.basis[i]] = v;
        }
        self.dirty = false;
    }

    fn reinvert(&mut self) {
        let m = self.m;
        self.stats.reinversions += 1;
        self.since_reinvert = 0;
        if m == 0 {
            return;
        }
        let mut b = vec![T::zero(); m * m];
        for (i, &j) in self.basis.iter().enumerate() {
            for &(r, a) in &self.cols[j] {
                b[r * m + i] = a;
            }
        }
        match linalg::invert(&b, m, T::lit(1e-14)) {
            Some(inv) => self.binv = inv,
            None => self.reset_to_slack_basis(),
        }
        self.recompute_primal();
    }

    fn reset_to_slack_basis(&mut self) {
        let m = self.m;
        for j in 0..self.n_struct {
            if self.state[j] == State::Basic {
                let (s, v) = resting_state(self.lo[j], self.hi[j]);
                let v = if s == State::Free { self.x[j] } else { v };
                self.state[j] = s;
                self.x[j] = v;
            }
        }
        for r in 0..m {
            self.state[self.n_struct + r] = State::Basic;
        }
        self.basis = (self.n_struct..self.n_struct + m).collect();
        self.binv = vec![T::zero(); m * m];
        for i in 0..m {
            self.binv[i * m + i] = -T::one();
        }
    }

    fn run(&mut self, phase1: bool) -> Result<()> {
        let m = self.m;
        let n = self.cols.len();
        let feas = T::lit(T::FEAS_TOL);
        let opt = T::lit(T::OPT_TOL);
        let piv_tol = T::lit(T::PIVOT_TOL);
        let max_iter = 50 * (n + m) + 10_000;
        let mut streak = 0usize;
        let mut cb = vec![T::zero(); m];
        let mut y = vec![T::zero(); m];
        let mut alpha = vec![T::zero(); m];

        for _ in 0..max_iter {
            if self.since_reinvert >= REINVERT_EVERY {
                self.reinvert();
            }
            let mut any = false;
            for (i, &j) in self.basis.iter().enumerate() {
                cb[i] = if phase1 {
                    let v = self.x[j];
                    if v < self.lo[j] - feas {
                        -T::one()
                    } else if v > self.hi[j] + feas {
                        T::one()
                    } else {
                        T::zero()
                    }
                } else {
                    self.cost[j]
                };
                any |= cb[i] != T::zero();
            }
            if phase1 && !any {
                return Ok(());
            }
            y.iter_mut().for_each(|v| *v = T::zero());
            for i in 0..m {
                let c = cb[i];
                if c == T::zero() {
                    continue;
                }
                let row = &self.binv[i * m..(i + 1) * m];
                for (yr, &b) in y.iter_mut().zip(row) {
                    *yr = *yr + c * b;
                }
            }

            let bland = streak > BLAND_AFTER;
            let mut enter: Option<(usize, T, T)> = None;
            for j in 0..n {
                let st = self.state[j];
                if st == State::Basic || self.lo[j] == self.hi[j] {
                    continue;
                }
                let cj = if phase1 { T::zero() } else { self.cost[j] };
                let d = self.cols[j]
                    .iter()
                    .fold(cj, |acc, &(r, a)| acc - y[r] * a);
                let (score, dir) = match st {
                    State::AtLower if d < -opt => (-d, T::one()),
                    State::AtUpper if d > opt => (d, -T::one()),
                    State::Free if d.abs() > opt => (d.abs(), -d.signum()),
                    _ => continue,
                };
                match enter {
                    None => enter = Some((j, score, dir)),
                    Some((_, best, _)) if !bland && score > best => enter = Some((j, score, dir)),
                    _ => {}
                }
                if bland {
                    break;
                }
            }
            let Some((q, _, dir)) = enter else {
                if phase1 {
                    return Err(Error::Infeasible(format!(
                        "no point satisfies the constraints (residual {:.3e})",
                        self.max_infeasibility().to_f64_lossy()
                    )));
                }
                return Ok(());
            };

            alpha.iter_mut().for_each(|v| *v = T::zero());
            for &(r, a) in &self.cols[q] {
                for i in 0..m {
                    alpha[i] = alpha[i] + self.binv[i * m + r] * a;
                }
            }

            // Effective bounds of each basic variable for this step.
            let bounds = |i: usize, x: &[T], lo: &[T], hi: &[T]| -> (T, T) {
                let j = self.basis[i];
                let v = x[j];
                if phase1 && v < lo[j] - feas {
                    (T::neg_infinity(), lo[j])
                } else if phase1 && v > hi[j] + feas {
                    (hi[j], T::infinity())
                } else {
                    (lo[j], hi[j])
                }
            };

            let mut theta_max = T::infinity();
            for i in 0..m {
                let delta = -dir * alpha[i];
                if delta.abs() <= piv_tol {
                    continue;
                }
                let (l, u) = bounds(i, &self.x, &self.lo, &self.hi);
                let v = self.x[self.basis[i]];
                let ratio = if delta > T::zero() {
                    (u + feas - v) / delta
                } else {
                    (l - feas - v) / delta
                };
                if ratio < theta_max {
                    theta_max = ratio;
                }
            }
            let range = self.hi[q] - self.lo[q];
            let mut leave: Option<(usize, T, T)> = None;
            if !(range.is_finite() && range <= theta_max) {
                for i in 0..m {
                    let delta = -dir * alpha[i];
                    if delta.abs() <= piv_tol {
                        continue;
                    }
                    let (l, u) = bounds(i, &self.x, &self.lo, &self.hi);
                    let v = self.x[self.basis[i]];
                    let target = if delta > T::zero() { u } else { l };
                    if !target.is_finite() {
                        continue;
                    }
                    let ratio = (target - v) / delta;
                    if ratio > theta_max {
                        continue;
                    }
                    let better = match leave {
                        None => true,
                        Some((li, _, _)) if bland => self.basis[i] < self.basis[li],
                        Some((li, _, _)) => delta.abs() > (dir * alpha[li]).abs(),
                    };
                    if better {
                        leave = Some((i, ratio.max(T::zero()), target));
                    }
                }
            }

            let step = match leave {
                Some((_, t, _)) => t,
                None if range.is_finite() => range,
                None => {
                    return Err(Error::NonConvergence("linear program is unbounded".into()));
                }
            };
            if step <= feas {
                streak += 1;
            } else {
                streak = 0;
            }
            if step != T::zero() {
                self.x[q] = self.x[q] + dir * step;
                for i in 0..m {
                    let j = self.basis[i];
                    self.x[j] = self.x[j] - dir * alpha[i] * step;
                }
            }
            match leave {
                None => {
                    self.stats.bound_flips += 1;
                    if dir > T::zero() {
                        self.state[q] = State::AtUpper;
                        self.x[q] = self.hi[q];
                    } else {
                        self.state[q] = State::AtLower;
                        self.x[q] = self.lo[q];
                    }
                }
                Some((r, _, target)) => {
                    let out = self.basis[r];
                    self.x[out] = target;
                    self.state[out] = if target == self.hi[out] && target != self.lo[out] {
                        State::AtUpper
                    } else {
                        State::AtLower
                    };
                    self.state[q] = State::Basic;
                    self.basis[r] = q;
                    let p = alpha[r];
                    for k in 0..m {
                        self.binv[r * m + k] = self.binv[r * m + k] / p;
                    }
                    for i in 0..m {
                        let f = alpha[i];
                        if i == r || f == T::zero() {
                            continue;
                        }
                        for k in 0..m {
                            let b = self.binv[r * m + k];
                            if b != T::zero() {
                                self.binv[i * m + k] = self.binv[i * m + k] - f * b;
                            }
                        }
                    }
                    self.stats.pivots += 1;
                    self.since_reinvert += 1;
                }
            }
        }
        Err(Error::NonConvergence(format!(
            "simplex exceeded {max_iter} iterations"
        )))
    }
}
