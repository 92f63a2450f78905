use std::ops::Range;

use crate::domain::{DistributionSpec, StatisticSpec, Validated};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Equal-width partition of the support with per-cell masses and the map from
/// cells to bins.
#[derive(Debug, Clone)]
pub struct Discretization<T> {
    pub lo: T,
    pub hi: T,
    pub spacing: T,
    /// Mass `w_i` of each cell under the conditioning distribution.
    pub masses: Vec<T>,
    /// Conditional mean of `x` within each cell (the midpoint under a
    /// uniform distribution or in an empty cell).
    pub centroids: Vec<T>,
    /// Bin index of each cell.
    pub bin_of: Vec<usize>,
    /// Cells belonging to each bin.
    pub bin_cells: Vec<Range<usize>>,
    /// Bin masses as seen by the grid (sums of cell masses).
    pub bin_masses: Vec<T>,
    /// Original and snapped position of every bin boundary.
    pub boundaries: Vec<(T, T)>,
    dist: DistributionSpec<T>,
}

/// Partitions the support of `v` into `n` equal cells. Interior bin
/// boundaries are moved to the nearest cell edge; the move is recorded in
/// [`Discretization::boundaries`].
pub fn discretize<T: Real>(v: &Validated<T>, n: usize) -> Result<Discretization<T>> {
    let k = v.sample.num_bins();
    if n < k {
        return Err(Error::invalid(format!(
            "{n} partitions cannot resolve {k} bins"
        )));
    }
    let (lo, hi) = v.sample.support();
    let nt = T::from_usize(n).expect("partition count");
    let spacing = (hi - lo) / nt;
    let edge = |i: usize| {
        if i == n {
            hi
        } else {
            lo + spacing * T::from_usize(i).expect("index")
        }
    };
    let mut edges = Vec::with_capacity(k + 1);
    let mut boundaries = Vec::with_capacity(k + 1);
    for (j, &b) in v.sample.boundaries.iter().enumerate() {
        let e = if j == 0 {
            0
        } else if j == k {
            n
        } else {
            ((b - lo) / spacing).round().to_usize().unwrap_or(0).min(n)
        };
        if let Some(&prev) = edges.last() {
            if e <= prev {
                return Err(Error::invalid(format!(
                    "bin {} ({} to {}) is narrower than one partition of width {}",
                    j - 1,
                    v.sample.boundaries[j - 1],
                    b,
                    spacing
                )));
            }
        }
        edges.push(e);
        boundaries.push((b, edge(e)));
    }
    let masses: Vec<T> = (0..n)
        .map(|i| cell_mass(&v.dist, edge(i), edge(i + 1)))
        .collect();
    let centroids: Vec<T> = (0..n)
        .map(|i| {
            let (a, b) = (edge(i), edge(i + 1));
            if v.dist.is_uniform() || masses[i] <= T::zero() {
                (a + b) * T::half()
            } else {
                v.dist.first_moment(a, b) / masses[i]
            }
        })
        .collect();
    let mut bin_of = vec![0; n];
    let mut bin_cells = Vec::with_capacity(k);
    let mut bin_masses = Vec::with_capacity(k);
    for b in 0..k {
        let cells = edges[b]..edges[b + 1];
        let m: T = masses[cells.clone()].iter().copied().sum();
        if m <= T::zero() {
            return Err(Error::invalid(format!(
                "bin {b} carries no mass after snapping to the partition"
            )));
        }
        for i in cells.clone() {
            bin_of[i] = b;
        }
        bin_cells.push(cells);
        bin_masses.push(m);
    }
    Ok(Discretization {
        lo,
        hi,
        spacing,
        masses,
        centroids,
        bin_of,
        bin_cells,
        bin_masses,
        boundaries,
        dist: v.dist.clone(),
    })
}

fn cell_mass<T: Real>(dist: &DistributionSpec<T>, a: T, b: T) -> T {
    let (s_lo, s_hi) = dist.support();
    let a = a.max(s_lo);
    let b = b.min(s_hi);
    if b > a {
        dist.mass_unchecked(a, b).max(T::zero())
    } else {
        T::zero()
    }
}

impl<T: Real> Discretization<T> {
    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn num_bins(&self) -> usize {
        self.bin_cells.len()
    }

    /// Left edge of cell `i` (`i == len()` gives the right end of the support).
    pub fn edge(&self, i: usize) -> T {
        if i == self.len() {
            self.hi
        } else {
            self.lo + self.spacing * T::from_usize(i).expect("index")
        }
    }

    pub fn midpoints(&self) -> Vec<T> {
        (0..self.len())
            .map(|i| (self.edge(i) + self.edge(i + 1)) * T::half())
            .collect()
    }

    /// Coefficients of the scaled second divided difference at cell `i`,
    /// taken at the centroids of cells `i - 1`, `i`, `i + 1` and multiplied by
    /// the squared spacing. Equals `(1, -2, 1)` on a uniform grid.
    pub fn curvature_row(&self, i: usize) -> [T; 3] {
        if self.dist.is_uniform() {
            return [T::one(), -T::two(), T::one()];
        }
        let t = &self.centroids;
        let (h0, h1) = (t[i] - t[i - 1], t[i + 1] - t[i]);
        let d2 = self.spacing * self.spacing * T::two();
        [d2 / (h0 * (h0 + h1)), -d2 / (h0 * h1), d2 / (h1 * (h0 + h1))]
    }

    /// Largest distance any boundary moved when snapped.
    pub fn max_snap(&self) -> T {
        self.boundaries
            .iter()
            .map(|&(b, s)| (b - s).abs())
            .fold(T::zero(), T::max)
    }

    /// Cell containing `x`; cells are closed on the left, the last one on
    /// both sides.
    pub fn cell_of(&self, x: T) -> usize {
        let i = ((x - self.lo) / self.spacing).floor().to_isize().unwrap_or(0);
        i.clamp(0, self.len() as isize - 1) as usize
    }

    /// Coefficients of the bin-mean operator for bin `k`: `w_i / mass_k`.
    pub fn bin_row(&self, k: usize) -> Vec<(usize, T)> {
        let m = self.bin_masses[k];
        self.bin_cells[k]
            .clone()
            .filter(|&i| self.masses[i] > T::zero())
            .map(|i| (i, self.masses[i] / m))
            .collect()
    }

    /// Bin means of a grid CEF.
    pub fn bin_means(&self, gamma: &[T]) -> Vec<T> {
        (0..self.num_bins())
            .map(|k| self.bin_row(k).iter().map(|&(i, a)| a * gamma[i]).sum())
            .collect()
    }

    /// Maps an original bin boundary onto its snapped edge so that interval
    /// statistics defined on boundaries stay aligned with the bins.
    fn align(&self, x: T) -> T {
        let tol = T::lit(1e-9) * (self.hi - self.lo);
        self.boundaries
            .iter()
            .find(|&&(b, _)| (b - x).abs() <= tol)
            .map_or(x, |&(_, s)| s)
    }

    /// Coefficient vector `c` with `m(γ) = Σ c_i γ_i`.
    pub fn stat_coefficients(&self, spec: &StatisticSpec<T>) -> Result<Vec<T>> {
        spec.check((self.lo, self.hi))?;
        let n = self.len();
        let mut c = vec![T::zero(); n];
        match *spec {
            StatisticSpec::Point { x } => c[self.cell_of(x)] = T::one(),
            StatisticSpec::IntervalMean { a, b } => {
                let a = self.align(a);
                let b = self.align(b);
                let mut total = T::zero();
                for (i, ci) in c.iter_mut().enumerate() {
                    let l = self.edge(i).max(a);
                    let h = self.edge(i + 1).min(b);
                    if h <= l {
                        continue;
                    }
                    let full = self.edge(i + 1) - self.edge(i);
                    let w = if (h - l) >= full {
                        self.masses[i]
                    } else {
                        cell_mass(&self.dist, l, h)
                    };
                    *ci = w;
                    total = total + w;
                }
                if total <= T::zero() {
                    return Err(Error::invalid(format!(
                        "interval [{a}, {b}] carries no probability mass"
                    )));
                }
                c.iter_mut().for_each(|v| *v = *v / total);
            }
            StatisticSpec::BestLinearSlope | StatisticSpec::BestLinearValue { .. } => {
                let (w, t, tbar, stt) = self.regression_moments();
                for i in 0..n {
                    c[i] = w[i] * (t[i] - tbar) / stt;
                }
                if let StatisticSpec::BestLinearValue { x } = *spec {
                    for i in 0..n {
                        c[i] = w[i] + (x - tbar) * c[i];
                    }
                }
            }
        }
        Ok(c)
    }

    /// Normalized weights, centroids, their weighted mean and weighted sum of
    /// squared deviations.
    fn regression_moments(&self) -> (Vec<T>, Vec<T>, T, T) {
        let total: T = self.masses.iter().copied().sum();
        let w: Vec<T> = self.masses.iter().map(|&m| m / total).collect();
        let t = self.centroids.clone();
        let tbar: T = w.iter().zip(&t).map(|(&wi, &ti)| wi * ti).sum();
        let stt: T = w
            .iter()
            .zip(&t)
            .map(|(&wi, &ti)| wi * (ti - tbar) * (ti - tbar))
            .sum();
        (w, t, tbar, stt)
    }

    /// Evaluates a statistic on a grid CEF.
    pub fn eval_stat(&self, gamma: &[T], spec: &StatisticSpec<T>) -> Result<T> {
        if gamma.len() != self.len() {
            return Err(Error::invalid(format!(
                "grid CEF has {} values, partition has {}",
                gamma.len(),
                self.len()
            )));
        }
        let c = self.stat_coefficients(spec)?;
        Ok(c.iter().zip(gamma).map(|(&a, &g)| a * g).sum())
    }
}
