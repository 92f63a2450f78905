//! Closed-form sharp bounds for a weakly monotone CEF when the distribution
//! of the interval-censored conditioning variable is known.
//!
//! Inside bin `k` the bounds switch regime at the crossover point `x_k*`:
//! below it the lower bound is the previous bin mean and the upper bound is
//! set by a CEF that sits at the previous mean up to `x` and is flat after;
//! above it the roles reverse. Every endpoint is attained by a two-step
//! witness (see [`bound_witnesses`]).
//!
//! Public functions take [`Validated`] inputs and report results in the
//! original outcome orientation.

use serde::Serialize;

use crate::domain::{CefEnvelope, Provenance, Validated};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Relative tolerance on `r_{k+1} - r_{k-1}` below which bin `k` is treated
/// as flat.
pub const TIE_TOL: f64 = 1e-10;
/// Bisection budget for crossover points under a gridded distribution.
pub const BISECTION_ITERS: usize = 80;
/// Bisection stops once the bracket is narrower than this fraction of the
/// support.
pub const BISECTION_WIDTH: f64 = 1e-12;
/// Distance (fraction of the support) within which `a` or `b` counts as a bin
/// boundary for point identification.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// Regime switch inside a bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Crossover<T> {
    /// `x_k*` together with the within-bin mass below it.
    At { x: T, mass_below: T },
    /// `r_{k+1} = r_{k-1}`: monotonicity forces the CEF to be flat on the bin.
    Degenerate,
}

impl<T: Real> Crossover<T> {
    pub fn point(&self) -> Option<T> {
        match self {
            Crossover::At { x, .. } => Some(*x),
            Crossover::Degenerate => None,
        }
    }
}

/// Crossover points for every bin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossoverTable<T> {
    pub points: Vec<Crossover<T>>,
}

/// Bounds on `E(y | x)` at a single point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointBounds<T> {
    pub lower: T,
    pub upper: T,
    /// Set when a formula value had to be clamped into the outcome range.
    pub clamped: bool,
}

/// Bounds on the interval mean over `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MuBounds<T> {
    pub a: T,
    pub b: T,
    pub lower: T,
    pub upper: T,
    pub point_identified: bool,
}

/// Analytic envelope plus the number of grid points where a clamp fired.
#[derive(Debug, Clone)]
pub struct AnalyticEnvelope<T> {
    pub envelope: CefEnvelope<T>,
    pub clamp_events: usize,
}

/// Piece of a step function on `[lo, hi]`. Zero-width pieces mark point
/// values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Piece<T> {
    pub lo: T,
    pub hi: T,
    pub value: T,
}

/// Feasible step CEF attaining a bound endpoint at `x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepWitness<T> {
    pub pieces: Vec<Piece<T>>,
    pub x: T,
    /// Index of the piece whose value is attained at `x`.
    pub target: usize,
}

impl<T: Real> StepWitness<T> {
    pub fn value_at_target(&self) -> T {
        self.pieces[self.target].value
    }

    /// Mass-weighted mean of the witness on each bin of `v`.
    pub fn bin_means(&self, v: &Validated<T>) -> Vec<T> {
        let b = &v.sample.boundaries;
        (0..v.sample.num_bins())
            .map(|k| {
                let (lo, hi) = (b[k], b[k + 1]);
                let mut acc = T::zero();
                for p in &self.pieces {
                    let s = p.lo.max(lo);
                    let e = p.hi.min(hi);
                    if e > s {
                        acc = acc + p.value * v.dist.mass_unchecked(s, e);
                    }
                }
                acc / v.bin_masses[k]
            })
            .collect()
    }

    /// True when piece values never decrease from left to right
    /// (`increasing`) or never increase (`!increasing`).
    pub fn is_monotone(&self, increasing: bool) -> bool {
        self.pieces.windows(2).all(|w| {
            if increasing {
                w[1].value >= w[0].value
            } else {
                w[1].value <= w[0].value
            }
        })
    }

    fn negate(mut self) -> Self {
        for p in &mut self.pieces {
            p.value = -p.value;
        }
        self
    }
}

struct Ctx<'a, T: Real> {
    v: &'a Validated<T>,
    tie: T,
}

impl<'a, T: Real> Ctx<'a, T> {
    fn new(v: &'a Validated<T>) -> Result<Self> {
        if !v.monotone() {
            return Err(Error::invalid(
                "analytic bounds need a declared monotone direction; \
                 use the numeric engine for curvature-only analysis",
            ));
        }
        if v.direction_violated {
            return Err(Error::invalid(
                "analytic bounds need bin means ordered in the declared direction",
            ));
        }
        Ok(Self {
            v,
            tie: T::lit(TIE_TOL) * v.sample.range.width(),
        })
    }

    /// `(r_{k-1}, r_k, r_{k+1})` for zero-based bin `k`.
    fn neighbours(&self, k: usize) -> (T, T, T) {
        let s = &self.v.sample;
        (s.padded_mean(k), s.padded_mean(k + 1), s.padded_mean(k + 2))
    }

    /// Share of bin `k`'s mass below `x`.
    fn mass_below(&self, k: usize, x: T) -> T {
        let lo = self.v.sample.boundaries[k];
        let g = self.v.dist.mass_unchecked(lo, x) / self.v.bin_masses[k];
        g.max(T::zero()).min(T::one())
    }

    fn crossover(&self, k: usize) -> Crossover<T> {
        let (prev, cur, next) = self.neighbours(k);
        let diff = next - prev;
        if diff < self.tie {
            return Crossover::Degenerate;
        }
        let (xl, xh) = self.v.sample.bin(k);
        let q = ((next - cur) / diff).max(T::zero()).min(T::one());
        let x = if self.v.dist.is_uniform() {
            let raw = (xh * next - (xh - xl) * cur - xl * prev) / diff;
            raw.max(xl).min(xh)
        } else {
            let (s_lo, s_hi) = self.v.sample.support();
            let stop = T::lit(BISECTION_WIDTH) * (s_hi - s_lo);
            let (mut lo, mut hi) = (xl, xh);
            for _ in 0..BISECTION_ITERS {
                if hi - lo < stop {
                    break;
                }
                let mid = (lo + hi) * T::half();
                if self.mass_below(k, mid) < q {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            (lo + hi) * T::half()
        };
        Crossover::At {
            x,
            mass_below: self.mass_below(k, x),
        }
    }

    /// Oriented bounds at `x`, bin index and crossover used.
    fn point_bounds(&self, x: T) -> Result<(PointBounds<T>, usize, Crossover<T>)> {
        let s = &self.v.sample;
        let k = s.bin_index(x)?;
        let (prev, cur, next) = self.neighbours(k);
        let cross = self.crossover(k);
        let (lower, upper) = match cross {
            Crossover::Degenerate => (cur, cur),
            Crossover::At { x: xs, .. } => {
                let g = self.mass_below(k, x);
                if x < xs {
                    let above = T::one() - g;
                    let upper = if above > T::zero() {
                        (cur - prev * g) / above
                    } else {
                        next
                    };
                    (prev, upper)
                } else {
                    let lower = if g > T::zero() {
                        (cur - next * (T::one() - g)) / g
                    } else {
                        prev
                    };
                    (lower, next)
                }
            }
        };
        // Formula values can only leave [r_{k-1}, r_{k+1}] through rounding;
        // anything larger is recorded as a clamp event.
        let range = s.range;
        let slack = T::lit(1e-9) * range.width();
        let mut clamped = false;
        let mut fix = |val: T, lo: T, hi: T| {
            if val < lo - slack || val > hi + slack {
                clamped = true;
            }
            val.max(lo).min(hi)
        };
        let lower = fix(lower, prev.max(range.y_min), next.min(range.y_max));
        let upper = fix(upper, prev.max(range.y_min), next.min(range.y_max));
        Ok((
            PointBounds {
                lower,
                upper,
                clamped,
            },
            k,
            cross,
        ))
    }
}

/// Manski-Tamer bounds `(r_{k-1}, r_{k+1})` for the bin containing `x`,
/// with `r_0 = y_min` and `r_{K+1} = y_max`. Valid without distributional
/// knowledge.
pub fn manski_tamer<T: Real>(v: &Validated<T>, x: T) -> Result<(T, T)> {
    let ctx = Ctx::new(v)?;
    let k = v.sample.bin_index(x)?;
    let (prev, _, next) = ctx.neighbours(k);
    Ok(v.restore_interval(prev, next))
}

/// Manski-Tamer envelope over a grid.
pub fn manski_tamer_envelope<T: Real>(v: &Validated<T>, grid: &[T]) -> Result<CefEnvelope<T>> {
    let mut lower = Vec::with_capacity(grid.len());
    let mut upper = Vec::with_capacity(grid.len());
    for &x in grid {
        let (l, u) = manski_tamer(v, x)?;
        lower.push(l);
        upper.push(u);
    }
    Ok(CefEnvelope {
        grid: grid.to_vec(),
        lower,
        upper,
        provenance: Provenance::Analytic,
        constraint_tag: "manski-tamer".to_string(),
    })
}

/// Crossover point of bin `k` (zero-based), in conditioning units. The
/// location does not depend on orientation.
pub fn crossover<T: Real>(v: &Validated<T>, k: usize) -> Result<Crossover<T>> {
    if k >= v.sample.num_bins() {
        return Err(Error::invalid(format!(
            "bin index {k} out of range for {} bins",
            v.sample.num_bins()
        )));
    }
    let ctx = Ctx::new(v)?;
    Ok(ctx.crossover(k))
}

pub fn crossover_table<T: Real>(v: &Validated<T>) -> Result<CrossoverTable<T>> {
    let ctx = Ctx::new(v)?;
    Ok(CrossoverTable {
        points: (0..v.sample.num_bins()).map(|k| ctx.crossover(k)).collect(),
    })
}

/// Sharp bounds on `E(y | x)` under monotonicity and the known distribution.
pub fn cef_bounds_analytic<T: Real>(v: &Validated<T>, x: T) -> Result<PointBounds<T>> {
    let ctx = Ctx::new(v)?;
    let (pb, _, _) = ctx.point_bounds(x)?;
    let (lower, upper) = v.restore_interval(pb.lower, pb.upper);
    Ok(PointBounds {
        lower,
        upper,
        clamped: pb.clamped,
    })
}

/// Maps [`cef_bounds_analytic`] over `grid`.
pub fn cef_envelope_analytic<T: Real>(
    v: &Validated<T>,
    grid: &[T],
) -> Result<AnalyticEnvelope<T>> {
    let ctx = Ctx::new(v)?;
    let mut lower = Vec::with_capacity(grid.len());
    let mut upper = Vec::with_capacity(grid.len());
    let mut clamp_events = 0;
    for &x in grid {
        let (pb, _, _) = ctx.point_bounds(x)?;
        clamp_events += usize::from(pb.clamped);
        lower.push(pb.lower);
        upper.push(pb.upper);
    }
    let envelope = CefEnvelope {
        grid: grid.to_vec(),
        lower,
        upper,
        provenance: Provenance::Analytic,
        constraint_tag: if v.dist.is_uniform() {
            "monotone, uniform distribution".to_string()
        } else {
            "monotone, gridded distribution".to_string()
        },
    }
    .restore(v);
    Ok(AnalyticEnvelope {
        envelope,
        clamp_events,
    })
}

/// Step CEFs attaining the lower and upper bound at `x`. Every bin other
/// than the one containing `x` is held at its mean.
pub fn bound_witnesses<T: Real>(
    v: &Validated<T>,
    x: T,
) -> Result<(StepWitness<T>, StepWitness<T>)> {
    let ctx = Ctx::new(v)?;
    let (pb, k, cross) = ctx.point_bounds(x)?;
    let (prev, cur, next) = ctx.neighbours(k);
    let s = &v.sample;
    let (xl, xh) = s.bin(k);

    let build = |inner: Vec<Piece<T>>, target_in_bin: usize| {
        let mut pieces = Vec::with_capacity(s.num_bins() + 2);
        for j in 0..k {
            let (lo, hi) = s.bin(j);
            pieces.push(Piece {
                lo,
                hi,
                value: s.means[j],
            });
        }
        let target = pieces.len() + target_in_bin;
        pieces.extend(inner);
        for j in k + 1..s.num_bins() {
            let (lo, hi) = s.bin(j);
            pieces.push(Piece {
                lo,
                hi,
                value: s.means[j],
            });
        }
        StepWitness { pieces, x, target }
    };
    let piece = |lo, hi, value| Piece { lo, hi, value };

    let (lw, uw) = match cross {
        Crossover::Degenerate => {
            let flat = vec![piece(xl, xh, cur)];
            (build(flat.clone(), 0), build(flat, 0))
        }
        Crossover::At { x: xs, .. } => {
            if x < xs {
                let lw = build(vec![piece(xl, xs, prev), piece(xs, xh, next)], 0);
                let uw = build(vec![piece(xl, x, prev), piece(x, xh, pb.upper)], 1);
                (lw, uw)
            } else {
                let lw = build(vec![piece(xl, x, pb.lower), piece(x, xh, next)], 0);
                let uw = build(vec![piece(xl, xs, prev), piece(xs, xh, next)], 1);
                (lw, uw)
            }
        }
    };
    Ok(if v.flipped {
        (uw.negate(), lw.negate())
    } else {
        (lw, uw)
    })
}

/// Sharp bounds on the mass-weighted mean of the CEF over `[a, b]`.
pub fn mu_bounds<T: Real>(v: &Validated<T>, a: T, b: T) -> Result<MuBounds<T>> {
    let ctx = Ctx::new(v)?;
    let s = &v.sample;
    if !(a < b) {
        return Err(Error::invalid(format!("interval mean needs a < b, got a={a}, b={b}")));
    }
    let h = s.bin_index(a)?;
    let k = s.bin_index(b)?;
    let dist = &v.dist;
    let total = dist.mass_unchecked(a, b);
    if !(total > T::zero()) {
        return Err(Error::invalid(format!("[{a}, {b}] carries no probability mass")));
    }

    let (s_lo, s_hi) = s.support();
    let btol = T::lit(BOUNDARY_TOL) * (s_hi - s_lo);
    let snap = |x: T| -> Option<usize> {
        s.boundaries
            .iter()
            .position(|&bd| (bd - x).abs() <= btol)
    };
    if let (Some(ia), Some(ib)) = (snap(a), snap(b)) {
        if ia < ib {
            let (num, den) = (ia..ib).fold((T::zero(), T::zero()), |(n, d), j| {
                (n + s.means[j] * v.bin_masses[j], d + v.bin_masses[j])
            });
            let val = num / den;
            let (lower, upper) = v.restore_interval(val, val);
            return Ok(MuBounds {
                a,
                b,
                lower,
                upper,
                point_identified: true,
            });
        }
    }

    let (lower, upper) = if h == k {
        let (at_b, _, _) = ctx.point_bounds(b)?;
        let (at_a, _, _) = ctx.point_bounds(a)?;
        (at_b.lower, at_a.upper)
    } else {
        let top_of_h = s.boundaries[h + 1];
        let bottom_of_k = s.boundaries[k];
        let m_head = dist.mass_unchecked(a, top_of_h);
        let m_tail = dist.mass_unchecked(bottom_of_k, b);
        let middle = (h + 1..k).fold(T::zero(), |acc, j| acc + s.means[j] * v.bin_masses[j]);
        let (at_b, _, _) = ctx.point_bounds(b)?;
        let (at_a, _, _) = ctx.point_bounds(a)?;
        let lower = (s.means[h] * m_head + middle + at_b.lower * m_tail) / total;
        let upper = (at_a.upper * m_head + middle + s.means[k] * m_tail) / total;
        (lower, upper)
    };
    let (lower, upper) = v.restore_interval(lower, upper.max(lower));
    Ok(MuBounds {
        a,
        b,
        lower,
        upper,
        point_identified: false,
    })
}
