//! Acceptance criteria. Runs as a plain binary and prints one line per
//! criterion; exits non-zero if any fails.

mod common;

use std::time::{Duration, Instant};

use cefbounds::analytic::{self, Crossover};
use cefbounds::calibrate::{fit_spline, max_curvature, ReferenceCurve};
use cefbounds::censorlab::{run_experiment, CurvatureLimit, ExperimentConfig, Truth, TruthConfig};
use cefbounds::doublecensor::{double_censored_stat_bounds, scenario_means, Scenario, TransitionMatrix};
use cefbounds::inference::{bootstrap_bounds, BinSummary, BootstrapData, BootstrapOptions, BootstrapProblem};
use cefbounds::{
    bound_stat, cef_envelope_numeric, validate, BinnedSample, ConstraintSet, Direction, DistributionSpec,
    NumericModel, NumericOptions, OutcomeRange, StatisticSpec, ValidateOptions, Validated,
};
use common::{max, merge_bins, min, random_instance, rng, smooth_instance, Instance, PARTITIONS};
use rand::Rng;
use rayon::prelude::*;

const SUITE_SIZE: usize = 200;
const SUITE_SEED: u64 = 20_240_517;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn opts() -> NumericOptions {
    NumericOptions {
        partitions: PARTITIONS,
        ..Default::default()
    }
}

fn suite() -> Vec<Instance> {
    let mut r = rng(SUITE_SEED);
    (0..SUITE_SIZE).map(|_| random_instance(&mut r)).collect()
}

fn smooth_suite() -> Vec<(Instance, Truth<f64>, f64)> {
    let mut r = rng(SUITE_SEED + 1);
    (0..SUITE_SIZE).map(|_| smooth_instance(&mut r)).collect()
}

fn within(t: Duration, limit: u64) -> Result<(), String> {
    ensure(t.as_secs_f64() < limit as f64, || format!("took {:.1}s, limit {limit}s", t.as_secs_f64()))
}

// Criterion 1 -------------------------------------------------------------

/// Exhaustive search over monotone step CEFs on a lattice: `cells[k]` cells in
/// bin `k`, values in `0..levels`, bin `k` summing to exactly `sums[k]`.
/// Returns the smallest and largest feasible level at `target`.
fn lattice_oracle(cells: &[usize], sums: &[usize], levels: usize, target: usize) -> Option<(usize, usize)> {
    let words = sums.iter().max().unwrap() / 64 + 1;
    let shl = |src: &[u64], by: usize, dst: &mut [u64]| {
        let (w, b) = (by / 64, by % 64);
        for i in (0..dst.len()).rev() {
            let hi = if i >= w { src[i - w] << b } else { 0 };
            let lo = if b > 0 && i > w { src[i - w - 1] >> (64 - b) } else { 0 };
            dst[i] = hi | lo;
        }
    };
    let feasible = |forced: usize| -> bool {
        // reach[l] = set of partial bin sums with the current cell at level l
        let mut reach = vec![vec![0u64; words]; levels];
        let mut cell = 0;
        let mut carry: Option<Vec<bool>> = None;
        for (k, &n) in cells.iter().enumerate() {
            for _ in 0..n {
                let mut next = vec![vec![0u64; words]; levels];
                let mut prefix = vec![0u64; words];
                let mut any = false;
                for l in 0..levels {
                    match (&carry, cell) {
                        (_, 0) => any = true,
                        (Some(c), _) => any |= c[l],
                        (None, _) => {
                            for (p, r) in prefix.iter_mut().zip(&reach[l]) {
                                *p |= r;
                            }
                        }
                    }
                    if cell == target && l != forced {
                        continue;
                    }
                    if carry.is_some() || cell == 0 {
                        if any {
                            next[l][l / 64] |= 1 << (l % 64);
                        }
                    } else {
                        shl(&prefix, l, &mut next[l]);
                    }
                }
                carry = None;
                reach = next;
                cell += 1;
            }
            let s = sums[k];
            let done: Vec<bool> = reach.iter().map(|r| r[s / 64] >> (s % 64) & 1 == 1).collect();
            if !done.iter().any(|&d| d) {
                return false;
            }
            carry = Some(done);
        }
        true
    };
    let ok: Vec<usize> = (0..levels).filter(|&l| feasible(l)).collect();
    Some((*ok.first()?, *ok.last()?))
}

fn criterion_1() -> Outcome {
    let t0 = Instant::now();
    let sample = BinnedSample::new(
        vec![0.0, 6.0, 10.0],
        vec![2.0, 8.0],
        Direction::Increasing,
        OutcomeRange::new(0.0, 10.0).unwrap(),
    );
    let v = validate(&sample, &DistributionSpec::uniform(0.0, 10.0), ValidateOptions::default()).map_err(|e| e.to_string())?;
    let cross = match analytic::crossover(&v, 0).map_err(|e| e.to_string())? {
        Crossover::At { x, .. } => x,
        Crossover::Degenerate => return Err("bin 1 crossover degenerate".into()),
    };
    let b = |x: f64| analytic::cef_bounds_analytic(&v, x).unwrap();
    let up3 = b(3.0).upper;
    let lo5 = b(5.0).lower;
    ensure((cross - 4.5).abs() < 1e-9, || format!("crossover {cross}"))?;
    ensure((up3 - 4.0).abs() < 1e-9, || format!("upper(3) = {up3}"))?;
    ensure((lo5 - 0.8).abs() < 1e-9, || format!("lower(5) = {lo5}"))?;

    // 0.05-wide cells, outcome levels 0, 0.5, ..., 10
    let (cell, step) = (0.05f64, 0.5f64);
    let cells = [120, 80];
    let sums = [(2.0 * 120.0 / step) as usize, (8.0 * 80.0 / step) as usize];
    let mut worst: f64 = 0.0;
    for x in [3.0, 4.5, 5.0] {
        let right = (x / cell).round() as usize;
        let (a, c) = (lattice_oracle(&cells, &sums, 21, right - 1), lattice_oracle(&cells, &sums, 21, right));
        let (a, c) = (a.ok_or("oracle infeasible")?, c.ok_or("oracle infeasible")?);
        let o_lo = a.0.min(c.0) as f64 * step;
        let o_hi = a.1.max(c.1) as f64 * step;
        let pb = b(x);
        let d = (pb.lower - o_lo).abs().max((pb.upper - o_hi).abs());
        worst = worst.max(d);
        ensure(d <= step + 1e-12, || format!("x={x}: analytic [{}, {}] vs lattice [{o_lo}, {o_hi}]", pb.lower, pb.upper))?;
    }
    within(t0.elapsed(), 10)?;
    Ok(format!(
        "crossover {cross}, upper(3) {up3}, lower(5) {lo5}; lattice gap <= {worst} ({:.2}s)",
        t0.elapsed().as_secs_f64()
    ))
}

// Criterion 2 -------------------------------------------------------------

fn eval_grid(v: &Validated<f64>) -> Vec<f64> {
    let (lo, hi) = v.sample.support();
    let mut g: Vec<f64> = (0..200).map(|i| lo + (hi - lo) * i as f64 / 200.0).collect();
    g.push(hi);
    let table = analytic::crossover_table(v).unwrap();
    g.extend(table.points.iter().filter_map(|c| c.point()));
    g
}

fn criterion_2(suite: &[Instance]) -> Outcome {
    let t0 = Instant::now();
    let checked: usize = suite
        .par_iter()
        .enumerate()
        .map(|(i, inst)| -> Result<usize, String> {
            let v = inst.validated();
            let grid = eval_grid(&v);
            let ana = analytic::cef_envelope_analytic(&v, &grid).map_err(|e| e.to_string())?.envelope;
            let mt = analytic::manski_tamer_envelope(&v, &grid).map_err(|e| e.to_string())?;
            let inc = inst.sample.direction == Direction::Increasing;
            for (j, &x) in grid.iter().enumerate() {
                ensure(ana.lower[j] >= mt.lower[j] - 1e-12 && ana.upper[j] <= mt.upper[j] + 1e-12, || {
                    format!("instance {i}, x={x}: [{}, {}] not inside Manski-Tamer [{}, {}]", ana.lower[j], ana.upper[j], mt.lower[j], mt.upper[j])
                })?;
                let (lw, uw) = analytic::bound_witnesses(&v, x).map_err(|e| e.to_string())?;
                for (w, target, name) in [(&lw, ana.lower[j], "lower"), (&uw, ana.upper[j], "upper")] {
                    let p = w.pieces[w.target];
                    ensure((w.value_at_target() - target).abs() < 1e-9 && p.lo <= x && x <= p.hi, || {
                        format!("instance {i}, x={x}: {name} witness value {} vs bound {target}", w.value_at_target())
                    })?;
                    let bm = w.bin_means(&v);
                    let gap = bm.iter().zip(&inst.sample.means).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    ensure(gap < 1e-9, || format!("instance {i}, x={x}: {name} witness misses bin means by {gap}"))?;
                    ensure(w.is_monotone(inc), || format!("instance {i}, x={x}: {name} witness not monotone"))?;
                    ensure(w.pieces.iter().all(|p| inst.sample.range.contains(p.value)), || {
                        format!("instance {i}, x={x}: {name} witness leaves outcome range")
                    })?;
                }
            }
            Ok(grid.len())
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .sum();
    within(t0.elapsed(), 60)?;
    Ok(format!(
        "{} instances, {checked} points, witnesses exact ({:.2}s)",
        suite.len(),
        t0.elapsed().as_secs_f64()
    ))
}

// Criterion 3 -------------------------------------------------------------

fn criterion_3(suite: &[Instance]) -> Outcome {
    let t0 = Instant::now();
    let worst = suite
        .par_iter()
        .enumerate()
        .map(|(i, inst)| -> Result<f64, String> {
            let v = inst.validated();
            let env = cef_envelope_numeric(&v, ConstraintSet::monotone_only(), opts()).map_err(|e| e.to_string())?;
            let (lo, hi) = inst.support();
            let d = (hi - lo) / PARTITIONS as f64;
            let mut worst: f64 = 0.0;
            for (j, &mid) in env.grid.iter().enumerate() {
                let xs: Vec<f64> = (0..=8).map(|q| (mid - d + d * q as f64 / 4.0).clamp(lo, hi)).collect();
                let ana = analytic::cef_envelope_analytic(&v, &xs).unwrap().envelope;
                let miss = |val: f64, s: &[f64]| (min(s) - val).max(val - max(s)).max(0.0);
                let m = miss(env.lower[j], &ana.lower).max(miss(env.upper[j], &ana.upper));
                worst = worst.max(m);
                ensure(m <= 1e-6, || {
                    format!("instance {i}, cell {j}: numeric [{}, {}] vs analytic lower {:?} upper {:?}", env.lower[j], env.upper[j], ana.lower, ana.upper)
                })?;
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(format!("{} instances, worst value miss {worst:.2e} ({:.2}s)", suite.len(), t0.elapsed().as_secs_f64()))
}

// Criterion 4 -------------------------------------------------------------

fn criterion_4(suite: &[Instance], smooth: &[(Instance, Truth<f64>, f64)]) -> Outcome {
    let cases: Vec<(&Instance, f64)> = suite
        .iter()
        .map(|i| (i, f64::INFINITY))
        .chain(smooth.iter().map(|(i, _, c)| (i, 1.5 * c)))
        .collect();
    let counts = cases
        .par_iter()
        .enumerate()
        .map(|(n, &(inst, c))| -> Result<(usize, usize, usize), String> {
            let v = inst.validated();
            let s = &inst.sample;
            let cs = ConstraintSet::new(true, c).map_err(|e| e.to_string())?;
            let mut model = NumericModel::new(&v, cs, opts()).map_err(|e| e.to_string())?;
            let s1 = model.stage1().map_err(|e| e.to_string())?;
            let mut checks = 0;
            for ia in 0..s.num_bins() {
                for ib in ia + 1..=s.num_bins() {
                    let (a, b) = (s.boundaries[ia], s.boundaries[ib]);
                    let num: f64 = (ia..ib).map(|k| v.bin_masses[k] * s.means[k]).sum();
                    let den: f64 = (ia..ib).map(|k| v.bin_masses[k]).sum();
                    let expect = num / den;
                    let tol = 1e-12 * expect.abs().max(1.0);
                    let spec = StatisticSpec::IntervalMean { a, b };
                    let nb = model.stage2(&spec, &s1).map_err(|e| e.to_string())?;
                    let ab = analytic::mu_bounds(&v, a, b).map_err(|e| e.to_string())?;
                    for (name, lo, hi) in [("numeric", nb.lower, nb.upper), ("analytic", ab.lower, ab.upper)] {
                        ensure((lo - expect).abs() <= tol && (hi - expect).abs() <= tol, || {
                            format!("case {n}, C={c}, mu over [{a}, {b}]: {name} [{lo}, {hi}] vs {expect}")
                        })?;
                    }
                    checks += 1;
                }
            }
            let uniform = usize::from(inst.dist.is_uniform());
            Ok((checks, uniform, 1 - uniform))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (checks, uni, grid) = counts.iter().fold((0, 0, 0), |a, c| (a.0 + c.0, a.1 + c.1, a.2 + c.2));
    ensure(uni > 0 && grid > 0, || "suite lacks a distribution type".into())?;
    Ok(format!("{checks} boundary intervals ({uni} uniform / {grid} gridded cases, C = inf and finite)"))
}

// Criterion 5 -------------------------------------------------------------

fn weighted_ols(x: &[f64], y: &[f64], w: &[f64]) -> (f64, f64) {
    let sw: f64 = w.iter().sum();
    let xm = x.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / sw;
    let ym = y.iter().zip(w).map(|(y, w)| y * w).sum::<f64>() / sw;
    let sxy: f64 = (0..x.len()).map(|i| w[i] * (x[i] - xm) * (y[i] - ym)).sum();
    let sxx: f64 = (0..x.len()).map(|i| w[i] * (x[i] - xm).powi(2)).sum();
    let slope = sxy / sxx;
    (ym - slope * xm, slope)
}

fn criterion_5(suite: &[Instance]) -> Outcome {
    let worst = suite
        .par_iter()
        .enumerate()
        .map(|(i, inst)| -> Result<(f64, bool), String> {
            let v = inst.validated();
            let s = &inst.sample;
            let xbar: Vec<f64> = (0..s.num_bins())
                .map(|k| {
                    let (a, b) = s.bin(k);
                    inst.dist.first_moment(a, b) / v.bin_masses[k]
                })
                .collect();
            let (icpt, slope) = weighted_ols(&xbar, &s.means, &v.bin_masses);
            let (lo, hi) = inst.support();
            // the outcome range also binds the fit; widen it when the line leaves it
            let (l0, l1) = (icpt + slope * lo, icpt + slope * hi);
            let widened = !(s.range.contains(l0) && s.range.contains(l1));
            let v = if widened {
                let pad = s.range.width();
                let range = OutcomeRange::new(s.range.y_min.min(l0.min(l1)) - pad, s.range.y_max.max(l0.max(l1)) + pad).unwrap();
                let wide = BinnedSample::new(s.boundaries.clone(), s.means.clone(), s.direction, range);
                validate(&wide, &inst.dist, ValidateOptions::default()).unwrap()
            } else {
                v
            };
            let mut worst: f64 = 0.0;
            for monotone in [false, true] {
                let cs = ConstraintSet::new(monotone, 0.0).unwrap();
                let mut m = NumericModel::new(&v, cs, opts()).map_err(|e| e.to_string())?;
                let s1 = m.stage1().map_err(|e| e.to_string())?;
                let mut check = |what: &str, got: f64, want: f64| {
                    worst = worst.max((got - want).abs());
                    ensure((got - want).abs() <= 1e-8, || format!("instance {i}, monotone={monotone}: {what} {got} vs OLS {want}"))
                };
                for k in 0..s.num_bins() {
                    check("fitted bin mean", s1.fitted_means[k], icpt + slope * xbar[k])?;
                }
                let sb = m.stage2(&StatisticSpec::BestLinearSlope, &s1).map_err(|e| e.to_string())?;
                check("slope lower", sb.lower, slope)?;
                check("slope upper", sb.upper, slope)?;
                let ib = m.stage2(&StatisticSpec::BestLinearValue { x: lo }, &s1).map_err(|e| e.to_string())?;
                check("intercept lower", ib.lower, icpt + slope * lo)?;
                check("intercept upper", ib.upper, icpt + slope * lo)?;
                let env = m.envelope(&s1).map_err(|e| e.to_string())?;
                let g = m.grid();
                for c in 0..g.len() {
                    let (a, b) = (g.edge(c), g.edge(c + 1));
                    let xc = inst.dist.first_moment(a, b) / g.masses[c];
                    check("envelope lower", env.lower[c], icpt + slope * xc)?;
                    check("envelope upper", env.upper[c], icpt + slope * xc)?;
                }
            }
            Ok((worst, widened))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let widened = worst.iter().filter(|w| w.1).count();
    let worst = worst.iter().map(|w| w.0).fold(0.0, f64::max);
    Ok(format!(
        "{} instances ({widened} with the outcome range widened past the OLS line), worst deviation {worst:.2e}",
        suite.len()
    ))
}

// Criterion 6 -------------------------------------------------------------

fn criterion_6() -> Outcome {
    let t0 = Instant::now();
    // mortality-like gradient: steep at the bottom, flattening out
    let pts: Vec<(f64, f64)> = (0..=100)
        .map(|i| {
            let x = i as f64;
            (x, 250.0 + 1500.0 * (-x / 22.0).exp() + 0.5 * (100.0 - x))
        })
        .collect();
    let spline = fit_spline(&ReferenceCurve::with_default_knots(pts).unwrap()).map_err(|e| e.to_string())?;
    let (cmax, at) = max_curvature(&spline);
    let fractions = [f64::INFINITY, 2.0, 1.0, 0.5, 0.25, 0.1, 0.0];
    let cfg = ExperimentConfig {
        truth: TruthConfig::default(),
        distribution: None,
        boundaries: vec![0.0, 39.0, 68.0, 100.0],
        direction: Direction::Decreasing,
        range: [0.0, 2500.0],
        curvatures: fractions.iter().map(|&f| CurvatureLimit::Value(f * cmax)).collect(),
        statistics: vec!["mu:0,39".into(), "mu:0,50".into()],
        partitions: 100,
        output_dir: None,
    };
    let truth = Truth::Spline(spline.clone());
    let report = run_experiment(&cfg, &truth).map_err(|e| e.to_string())?;
    ensure(
        report.sample.means.windows(2).all(|w| w[1] < w[0]),
        || "truth is not decreasing across bins".into(),
    )?;
    // cell averages by an independent midpoint rule
    let cell_avg = |a: f64, b: f64| (0..400).map(|j| spline.eval(a + (b - a) * (j as f64 + 0.5) / 400.0)).sum::<f64>() / 400.0;
    let mut lines = Vec::new();
    let mut detected_below = 0;
    for (run, &f) in report.runs.iter().zip(&fractions) {
        let cov = &run.coverage;
        for (j, &x) in run.envelope.grid.iter().enumerate() {
            let t = cell_avg(x - 0.5, x + 0.5);
            let margin = (run.envelope.lower[j] - t).max(t - run.envelope.upper[j]);
            if margin.abs() > 1e-6 {
                ensure(cov.flags[j] == (margin < 0.0), || format!("C={}: flag at x={x} disagrees with recomputed containment", run.curvature))?;
            }
        }
        lines.push(format!("{f}x: {}/{}", cov.covered, cov.points));
        if f >= 1.0 {
            let stats_ok = run.statistics.iter().all(|s| s.contained);
            ensure(cov.complete() && stats_ok, || format!("C={} >= max|f''| but coverage {}/{}", run.curvature, cov.covered, cov.points))?;
        } else if !cov.complete() {
            ensure(!cov.violations.is_empty(), || "failure without reported violations".into())?;
            detected_below += 1;
        }
    }
    ensure(detected_below > 0, || format!("no cap below max|f''| = {cmax} produced a reported containment failure"))?;
    within(t0.elapsed(), 120)?;
    Ok(format!(
        "max|f''| = {cmax:.4} at x={at}; containment by cap multiple {}; failures reported at {detected_below} of 4 caps below max",
        lines.join(", ")
    ))
}

// Criterion 7 -------------------------------------------------------------

fn criterion_7(suite: &[Instance], smooth: &[(Instance, Truth<f64>, f64)]) -> Outcome {
    let t0 = Instant::now();
    let tol = 1e-6;
    let nested = smooth
        .par_iter()
        .enumerate()
        .map(|(i, (inst, _, c))| -> Result<usize, String> {
            let v = inst.validated();
            let caps = [1.5 * c, 3.0 * c, f64::INFINITY];
            let envs = caps
                .iter()
                .map(|&cap| cef_envelope_numeric(&v, ConstraintSet::new(true, cap).unwrap(), opts()))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| e.to_string())?;
            for w in envs.windows(2) {
                ensure(w[0].is_within(&w[1], tol), || format!("smooth instance {i}: envelope for tighter cap escapes looser one"))?;
            }
            // pooled bins, finite cap
            let k = i % (inst.sample.num_bins() - 1);
            let merged = merge_bins(inst, k);
            let mv = merged.validated();
            let cs = ConstraintSet::new(true, caps[0]).unwrap();
            let me = cef_envelope_numeric(&mv, cs, opts()).map_err(|e| e.to_string())?;
            ensure(envs[0].is_within(&me, tol), || format!("smooth instance {i}: pooling bin {k} shrank the envelope"))?;
            let (lo, hi) = inst.support();
            let spec = StatisticSpec::IntervalMean { a: lo + 0.2 * (hi - lo), b: lo + 0.55 * (hi - lo) };
            let ob = bound_stat(&v, cs, &spec, opts()).map_err(|e| e.to_string())?;
            let mb = bound_stat(&mv, cs, &spec, opts()).map_err(|e| e.to_string())?;
            ensure(mb.lower <= ob.lower + tol && ob.upper <= mb.upper + tol, || {
                format!("smooth instance {i}: pooled mu [{}, {}] misses [{}, {}]", mb.lower, mb.upper, ob.lower, ob.upper)
            })?;
            Ok(envs.len())
        })
        .collect::<Result<Vec<_>, _>>()?
        .len();
    let merged = suite
        .par_iter()
        .enumerate()
        .map(|(i, inst)| -> Result<(), String> {
            let mut r = rng(SUITE_SEED + 2 + i as u64);
            let v = inst.validated();
            let k = r.random_range(0..inst.sample.num_bins() - 1);
            let mv = merge_bins(inst, k).validated();
            let grid = eval_grid(&v);
            let a = analytic::cef_envelope_analytic(&v, &grid).unwrap().envelope;
            let m = analytic::cef_envelope_analytic(&mv, &grid).unwrap().envelope;
            ensure(a.is_within(&m, 1e-9 * inst.sample.range.width()), || format!("instance {i}: pooling bins {k},{} shrank the analytic envelope", k + 1))?;
            let (lo, hi) = inst.support();
            for _ in 0..5 {
                let p: f64 = r.random_range(0.0..0.9);
                let q: f64 = r.random_range(p + 0.05..1.0);
                let (xa, xb) = (lo + p * (hi - lo), lo + q * (hi - lo));
                let ob = analytic::mu_bounds(&v, xa, xb).unwrap();
                let mb = analytic::mu_bounds(&mv, xa, xb).unwrap();
                ensure(mb.lower <= ob.lower + 1e-9 * inst.sample.range.width() && ob.upper <= mb.upper + 1e-9 * inst.sample.range.width(), || {
                    format!("instance {i}: pooled mu over [{xa}, {xb}] = [{}, {}] misses [{}, {}]", mb.lower, mb.upper, ob.lower, ob.upper)
                })?;
            }
            Ok(())
        })
        .collect::<Result<Vec<_>, _>>()?
        .len();
    Ok(format!(
        "{nested} curvature sweeps nested (caps 1.5c, 3c, inf) with pooled-bin checks; {merged} monotone pooled-bin checks ({:.2}s)",
        t0.elapsed().as_secs_f64()
    ))
}

// Criterion 8 -------------------------------------------------------------

fn criterion_8() -> Outcome {
    let m = vec![vec![0.27f64 * 0.55, 0.5 - 0.27 * 0.55], vec![0.27 * 0.45, 0.5 - 0.27 * 0.45]];
    let tm = TransitionMatrix::new(vec![0.0, 50.0, 100.0], vec![0.0, 27.0, 100.0], m).map_err(|e| e.to_string())?;
    let low = scenario_means(&tm, Scenario::LowMobility);
    let (a, b) = (low.sub_intervals[0][0], low.sub_intervals[1][0]);
    ensure((a.0 - 0.0).abs() < 1e-12 && (a.1 - 14.85).abs() < 1e-12, || format!("bottom parent sub-interval {a:?}"))?;
    ensure((b.0 - 14.85).abs() < 1e-12 && (b.1 - 27.0).abs() < 1e-12, || format!("top parent sub-interval {b:?}"))?;
    let mut budgets = Vec::new();
    for s in [Scenario::LowMobility, Scenario::HighMobility] {
        let sm = scenario_means(&tm, s);
        let avg = 0.5 * sm.means[0] + 0.5 * sm.means[1];
        budgets.push(avg);
        ensure((avg - 50.0).abs() < 1e-9, || format!("{s:?} means average to {avg}"))?;
    }
    let dist = DistributionSpec::uniform(0.0, 100.0);
    let mut out = Vec::new();
    for spec in [StatisticSpec::IntervalMean { a: 0.0, b: 50.0 }, StatisticSpec::BestLinearSlope] {
        let u = double_censored_stat_bounds(&tm, &dist, ConstraintSet::monotone_only(), &spec, opts()).map_err(|e| e.to_string())?;
        for s in &u.scenarios {
            ensure(u.lower <= s.lower && s.upper <= u.upper, || format!("union [{}, {}] misses {:?}", u.lower, u.upper, s.scenario))?;
        }
        out.push(format!("{} in [{:.4}, {:.4}]", spec.label(), u.lower, u.upper));
    }
    Ok(format!(
        "sub-intervals {a:?} / {b:?}; budgets {:?}; {}",
        budgets,
        out.join(", ")
    ))
}

// Criterion 9 -------------------------------------------------------------

fn count_dataset(inst: &Instance, r: &mut impl Rng) -> BootstrapData<f64> {
    let s = &inst.sample;
    let k = s.num_bins();
    let bins = (0..k)
        .map(|j| {
            let mut room = (s.means[j] - s.range.y_min).min(s.range.y_max - s.means[j]);
            if j > 0 {
                room = room.min((s.means[j] - s.means[j - 1]).abs());
            }
            if j + 1 < k {
                room = room.min((s.means[j + 1] - s.means[j]).abs());
            }
            let n = r.random_range(30..300usize);
            let se = room * r.random_range(0.0..0.3);
            BinSummary { mean: s.means[j], sd: se * (n as f64).sqrt(), n }
        })
        .collect();
    BootstrapData::Counts { bins }
}

fn problem(inst: &Instance, r: &mut impl Rng) -> BootstrapProblem<f64> {
    let (lo, hi) = inst.support();
    let p: f64 = r.random_range(0.0..0.8);
    BootstrapProblem {
        boundaries: inst.sample.boundaries.clone(),
        direction: inst.sample.direction,
        range: inst.sample.range,
        dist: inst.dist.clone(),
        constraints: ConstraintSet::monotone_only(),
        spec: StatisticSpec::IntervalMean { a: lo + p * (hi - lo), b: lo + (p + 0.2) * (hi - lo) },
    }
}

fn criterion_9(suite: &[Instance]) -> Outcome {
    let t0 = Instant::now();
    let bopts = |seed| BootstrapOptions {
        replicates: 100,
        seed,
        numeric: NumericOptions {
            partitions: 50,
            ..Default::default()
        },
        ..Default::default()
    };
    let mut r = rng(SUITE_SEED + 9);
    let cases: Vec<_> = suite.iter().take(50).map(|inst| (problem(inst, &mut r), count_dataset(inst, &mut r))).collect();

    let (p0, d0) = &cases[0];
    let x = bootstrap_bounds(p0, d0, &BootstrapOptions { replicates: 1000, ..bopts(7) }).map_err(|e| e.to_string())?;
    let y = bootstrap_bounds(p0, d0, &BootstrapOptions { replicates: 1000, ..bopts(7) }).map_err(|e| e.to_string())?;
    ensure(x.confidence_set.0.to_bits() == y.confidence_set.0.to_bits() && x.confidence_set.1.to_bits() == y.confidence_set.1.to_bits(), || {
        "seeded runs differ".into()
    })?;
    ensure(x.replicates == y.replicates, || "replicate archives differ".into())?;

    let mut redraws = 0;
    for (i, (p, d)) in cases.iter().enumerate() {
        let res = bootstrap_bounds(p, d, &bopts(i as u64)).map_err(|e| format!("dataset {i}: {e}"))?;
        redraws += res.redraws;
        ensure(res.confidence_set.0 <= res.point.lower && res.point.upper <= res.confidence_set.1, || {
            format!("dataset {i}: confidence set {:?} misses [{}, {}]", res.confidence_set, res.point.lower, res.point.upper)
        })?;
        if let BootstrapData::Counts { bins } = d {
            let still = BootstrapData::Counts {
                bins: bins.iter().map(|b| BinSummary { sd: 0.0, ..*b }).collect(),
            };
            let z = bootstrap_bounds(p, &still, &bopts(i as u64)).map_err(|e| format!("dataset {i}: {e}"))?;
            ensure(z.confidence_set == (z.point.lower, z.point.upper), || {
                format!("dataset {i}: sd = 0 gives {:?} vs point [{}, {}]", z.confidence_set, z.point.lower, z.point.upper)
            })?;
        }
    }
    Ok(format!(
        "B=1000 seed 7 bit-identical {:?}; 50 datasets contain point bounds, sd=0 exact ({redraws} redraws, {:.2}s)",
        x.confidence_set,
        t0.elapsed().as_secs_f64()
    ))
}

fn main() {
    let suite = suite();
    let smooth = smooth_suite();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("analytic bounds vs lattice oracle", Box::new(criterion_1)),
        ("refinement of Manski-Tamer and sharpness", Box::new(|| criterion_2(&suite))),
        ("numeric and analytic envelopes agree", Box::new(|| criterion_3(&suite))),
        ("interval means on boundaries identified", Box::new(|| criterion_4(&suite, &smooth))),
        ("zero curvature gives weighted OLS", Box::new(|| criterion_5(&suite))),
        ("containment simulation", Box::new(criterion_6)),
        ("nesting under tighter caps and pooled bins", Box::new(|| criterion_7(&suite, &smooth))),
        ("double censoring scenarios", Box::new(criterion_8)),
        ("bootstrap determinism and degeneracy", Box::new(|| criterion_9(&suite))),
    ];
    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {} [PASS] {name}: {detail}", n + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} [FAIL] {name}: {why}", n + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
