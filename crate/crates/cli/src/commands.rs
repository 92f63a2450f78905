use std::io::Write;
use std::path::{Path, PathBuf};

use cefbounds::analytic::{self, bound_witnesses, cef_envelope_analytic, mu_bounds};
use cefbounds::calibrate::{calibrate as fit_curvature, ReferenceCurve};
use cefbounds::censorlab::{run_experiment, ExperimentConfig};
use cefbounds::doublecensor::{double_censored_stat_bounds, dominance_violations, scenario_means, Scenario};
use cefbounds::inference::{bootstrap_bounds, BootstrapOptions, BootstrapProblem};
use cefbounds::{
    validate, BinnedSample, ConstraintSet, Direction, NumericModel, NumericOptions, OutcomeRange, StatisticSpec,
    ValidateOptions, Validated,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{CliError, Result};
use crate::format::{limit, num, to_json};
use crate::input::{read_distribution, read_points, read_sample, read_transition, InputKind, LoadedSample};
use crate::output::{coverage_csv, envelope_csv, table, write, Manifest, WitnessRows};
use crate::{BoundsArgs, CalibrateArgs, DoubleCensorArgs, Engine, ModelArgs, Monotone, SimulateArgs, StatArgs};

fn io_out(e: std::io::Error) -> CliError {
    CliError::io(Path::new("<stdout>"), e)
}

fn emit(out: &mut dyn Write, dest: Option<&Path>, text: &str) -> Result<()> {
    match dest {
        Some(p) => write(p, text),
        None => out.write_all(text.as_bytes()).map_err(io_out),
    }
}

fn direction(m: Monotone) -> Direction {
    match m {
        Monotone::Inc => Direction::Increasing,
        Monotone::Dec => Direction::Decreasing,
        Monotone::None => Direction::None,
    }
}

fn warn(msg: &str) {
    eprintln!("warning: {msg}");
}

/// Validated inputs plus the constraint set the flags describe.
struct Problem {
    sample: LoadedSample,
    v: Validated<f64>,
    constraints: ConstraintSet<f64>,
    opts: NumericOptions,
}

impl ModelArgs {
    fn check(&self) -> Result<()> {
        if self.grid < 3 {
            return Err(CliError::usage(format!("--grid needs at least 3 cells, got {}", self.grid)));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(CliError::usage(format!("--scale must be positive, got {}", self.scale)));
        }
        if self.engine == Engine::Analytic {
            if self.curvature.is_finite() {
                return Err(CliError::usage(
                    "the analytic engine has no curvature constraint; use --engine numeric with --curvature",
                ));
            }
            if self.monotone == Monotone::None {
                return Err(CliError::usage(
                    "the analytic engine needs --monotone inc or dec; use --engine numeric",
                ));
            }
        }
        Ok(())
    }

    fn load(&self, input: &Path) -> Result<Problem> {
        self.check()?;
        let sample = read_sample(input, self.input_kind)?;
        let dist = read_distribution(&self.dist, sample.support())?;
        let range = OutcomeRange::new(self.range.0, self.range.1)
            .map_err(|e| CliError::usage(format!("--range: {e}")))?;
        let binned = BinnedSample::new(
            sample.boundaries.clone(),
            sample.means.clone(),
            direction(self.monotone),
            range,
        );
        let opts = ValidateOptions {
            allow_direction_violation: self.allow_direction_violation,
        };
        let v = validate(&binned, &dist, opts).map_err(|e| sample.locate(e))?;
        if v.direction_violated && self.engine == Engine::Analytic {
            return Err(CliError::usage(
                "bin means break the declared direction; the analytic engine needs monotone means",
            ));
        }
        let constraints = ConstraintSet::new(self.monotone != Monotone::None, self.curvature)?;
        Ok(Problem {
            sample,
            v,
            constraints,
            opts: NumericOptions {
                partitions: self.grid,
                ..NumericOptions::default()
            },
        })
    }

    fn settings(&self) -> Value {
        json!({
            "dist": self.dist,
            "monotone": format!("{:?}", self.monotone).to_lowercase(),
            "curvature": limit(self.curvature),
            "grid": self.grid,
            "range": [self.range.0, self.range.1],
            "engine": self.engine,
            "input_kind": self.input_kind,
            "allow_direction_violation": self.allow_direction_violation,
            "strict": self.strict,
            "scale": self.scale,
        })
    }

    fn manifest(&self, command: &str, input: &Path, extra: Value, seed: Option<u64>) -> Result<Manifest> {
        let mut settings = self.settings();
        if let (Value::Object(s), Value::Object(e)) = (&mut settings, extra) {
            s.extend(e);
        }
        let mut m = Manifest::new(command, settings, seed);
        m.input(input)?;
        if self.dist != "uniform" {
            m.input(Path::new(&self.dist))?;
        }
        Ok(m)
    }
}

#[derive(Serialize)]
struct Constraints {
    direction: Direction,
    monotone: bool,
    curvature: Value,
    tag: String,
}

fn constraint_tags(p: &Problem, m: &ModelArgs) -> Constraints {
    Constraints {
        direction: direction(m.monotone),
        monotone: p.constraints.monotone,
        curvature: limit(p.constraints.curvature),
        tag: p.constraints.tag(),
    }
}

#[derive(Serialize)]
struct BoundsSummary {
    engine: Engine,
    constraints: Constraints,
    grid: usize,
    support: [f64; 2],
    range: [f64; 2],
    bins: usize,
    min_mse: Option<f64>,
    fitted_means: Option<Vec<f64>>,
    clamp_events: Option<usize>,
    warnings: Vec<String>,
    scale: f64,
}

fn strict_check(m: &ModelArgs, p: &Problem, min_mse: f64, exact: bool) -> Result<()> {
    if m.strict && !exact {
        return Err(CliError::Core(cefbounds::Error::Infeasible(format!(
            "no CEF satisfying {} reproduces the bin means (minimum MSE {})",
            p.constraints.tag(),
            num(min_mse)
        ))));
    }
    Ok(())
}

fn cell_midpoints(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let d = (hi - lo) / n as f64;
    (0..n).map(|i| lo + d * (i as f64 + 0.5)).collect()
}

pub fn bounds(a: &BoundsArgs, out: &mut dyn Write) -> Result<()> {
    let m = &a.model;
    let p = m.load(&a.input)?;
    let (lo, hi) = p.sample.support();
    let mut warnings = Vec::new();
    let (env, min_mse, fitted, clamps) = match m.engine {
        Engine::Analytic => {
            let ae = cef_envelope_analytic(&p.v, &cell_midpoints(lo, hi, m.grid))?;
            if ae.clamp_events > 0 {
                warnings.push(format!(
                    "bound formulas were clamped into the outcome range at {} grid points",
                    ae.clamp_events
                ));
            }
            (ae.envelope, None, None, Some(ae.clamp_events))
        }
        Engine::Numeric => {
            let mut model = NumericModel::new(&p.v, p.constraints, p.opts).map_err(|e| p.sample.locate(e))?;
            let s1 = model.stage1()?;
            strict_check(m, &p, s1.min_mse, s1.exact(&p.opts))?;
            let env = model.envelope(&s1)?;
            warnings.extend(model.warnings().iter().map(ToString::to_string));
            (env, Some(s1.min_mse), Some(s1.fitted_means.clone()), None)
        }
    };
    warnings.iter().for_each(|w| warn(w));

    let csv = envelope_csv(&env, m.scale);
    emit(out, a.output.as_deref(), &csv)?;
    let summary = BoundsSummary {
        engine: m.engine,
        constraints: constraint_tags(&p, m),
        grid: env.len(),
        support: [lo, hi],
        range: [m.range.0, m.range.1],
        bins: p.sample.means.len(),
        min_mse,
        fitted_means: fitted,
        clamp_events: clamps,
        warnings,
        scale: m.scale,
    };
    let summary_json = to_json(&summary);
    if let Some(path) = &a.summary {
        write(path, &summary_json)?;
    }
    if let Some(path) = &a.manifest {
        let mut man = m.manifest("bounds", &a.input, json!({}), None)?;
        man.output(a.output.as_deref().unwrap_or(Path::new("<stdout>")), &csv);
        if let Some(s) = &a.summary {
            man.output(s, &summary_json);
        }
        man.write(path)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct BootstrapSummary {
    replicates: usize,
    seed: u64,
    alpha: f64,
    rng: &'static str,
    quantile_set: [f64; 2],
    failures: usize,
    redraws: usize,
}

#[derive(Serialize)]
struct StatOutput {
    spec: String,
    statistic: StatisticSpec<f64>,
    engine: Engine,
    constraints: Constraints,
    lower: f64,
    upper: f64,
    point_identified: bool,
    min_mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    confidence_set: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bootstrap: Option<BootstrapSummary>,
    warnings: Vec<String>,
    scale: f64,
}

pub fn stat(a: &StatArgs, out: &mut dyn Write) -> Result<()> {
    let m = &a.model;
    let spec = StatisticSpec::<f64>::parse(&a.stat)?;
    if a.bootstrap.is_some() {
        if m.engine == Engine::Analytic {
            return Err(CliError::usage("bootstrap replicates run the numeric engine; drop --engine analytic"));
        }
        if m.input_kind == InputKind::Bins {
            return Err(CliError::usage(
                "--bootstrap resamples data; use --input-kind micro or counts",
            ));
        }
    }
    let p = m.load(&a.input)?;
    spec.check(p.sample.support())?;
    let (lo_x, _) = p.sample.support();
    let mut warnings = Vec::new();
    let mut witness = WitnessRows::new();
    let mut min_mse = None;
    let mut confidence_set = None;
    let mut boot = None;

    let (lower, upper, point_identified) = match (m.engine, spec) {
        (Engine::Analytic, StatisticSpec::Point { x }) => {
            let b = analytic::cef_bounds_analytic(&p.v, x)?;
            if b.clamped {
                warnings.push("bound formula was clamped into the outcome range".to_string());
            }
            let (lw, uw) = bound_witnesses(&p.v, x)?;
            for (side, w) in [("lower", lw), ("upper", uw)] {
                for piece in &w.pieces {
                    witness.piece(side, piece.lo, piece.hi, piece.value);
                }
            }
            (b.lower, b.upper, b.lower == b.upper)
        }
        (Engine::Analytic, StatisticSpec::IntervalMean { a: lo, b: hi }) => {
            if a.witness.is_some() {
                return Err(CliError::usage("witnesses for mu:a,b come from --engine numeric"));
            }
            let b = mu_bounds(&p.v, lo, hi)?;
            (b.lower, b.upper, b.point_identified)
        }
        (Engine::Analytic, _) => {
            return Err(CliError::usage(format!(
                "the analytic engine covers point:x and mu:a,b; use --engine numeric for {}",
                spec.label()
            )))
        }
        (Engine::Numeric, _) => {
            let mut model = NumericModel::new(&p.v, p.constraints, p.opts).map_err(|e| p.sample.locate(e))?;
            let s1 = model.stage1()?;
            strict_check(m, &p, s1.min_mse, s1.exact(&p.opts))?;
            let b = model.stage2(&spec, &s1)?;
            warnings.extend(model.warnings().iter().map(ToString::to_string));
            min_mse = Some(s1.min_mse);
            witness.grid("lower", lo_x, &b.witnesses.0);
            witness.grid("upper", lo_x, &b.witnesses.1);
            if let (Some(reps), Some(data)) = (a.bootstrap, &p.sample.data) {
                let problem = BootstrapProblem {
                    boundaries: p.sample.boundaries.clone(),
                    direction: direction(m.monotone),
                    range: p.v.original_range(),
                    dist: p.v.dist.clone(),
                    constraints: p.constraints,
                    spec,
                };
                let opts = BootstrapOptions {
                    replicates: reps,
                    seed: a.seed,
                    alpha: a.alpha,
                    numeric: p.opts,
                    ..BootstrapOptions::default()
                };
                let r = bootstrap_bounds(&problem, data, &opts)?;
                confidence_set = Some([r.confidence_set.0 * m.scale, r.confidence_set.1 * m.scale]);
                boot = Some(BootstrapSummary {
                    replicates: reps,
                    seed: a.seed,
                    alpha: a.alpha,
                    rng: cefbounds::inference::RNG_ALGORITHM,
                    quantile_set: [r.quantile_set.0 * m.scale, r.quantile_set.1 * m.scale],
                    failures: r.failures,
                    redraws: r.redraws,
                });
                if r.failures > 0 {
                    warnings.push(format!("{} bootstrap replicates failed and were dropped", r.failures));
                }
            }
            (b.lower, b.upper, b.point_identified)
        }
    };
    warnings.iter().for_each(|w| warn(w));

    let result = StatOutput {
        spec: spec.label(),
        statistic: spec,
        engine: m.engine,
        constraints: constraint_tags(&p, m),
        lower: lower * m.scale,
        upper: upper * m.scale,
        point_identified,
        min_mse,
        confidence_set,
        bootstrap: boot,
        warnings,
        scale: m.scale,
    };
    let text = to_json(&result);
    emit(out, a.output.as_deref(), &text)?;
    let witness_csv = witness.csv(m.scale);
    if let Some(path) = &a.witness {
        write(path, &witness_csv)?;
    }
    if let Some(path) = &a.manifest {
        let extra = json!({
            "stat": spec.label(),
            "bootstrap": a.bootstrap,
            "alpha": a.alpha,
        });
        let seed = a.bootstrap.map(|_| a.seed);
        let mut man = m.manifest("stat", &a.input, extra, seed)?;
        man.output(a.output.as_deref().unwrap_or(Path::new("<stdout>")), &text);
        if let Some(w) = &a.witness {
            man.output(w, &witness_csv);
        }
        man.write(path)?;
    }
    Ok(())
}

fn relative_to(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn simulate(a: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let text = std::fs::read_to_string(&a.config).map_err(|e| CliError::io(&a.config, e))?;
    let cfg: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::at(&a.config, Some(e.line() as u64), e.to_string()))?;
    let base = a.config.parent().unwrap_or(Path::new("")).to_path_buf();
    let out_dir = match (&a.out_dir, &cfg.output_dir) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => relative_to(&base, d),
        (None, None) => return Err(CliError::usage("set --out-dir or output_dir in the config")),
    };
    let mut settings = serde_json::to_value(&cfg).expect("config serializes");
    if let Value::Object(s) = &mut settings {
        s.remove("output_dir");
    }
    let mut man = Manifest::new("simulate", settings, None);
    man.input(&a.config)?;

    let points = match &cfg.truth.csv {
        Some(csv) => {
            let path = relative_to(&base, csv);
            man.input(&path)?;
            read_points(&path)?
        }
        None => cfg.truth.points.iter().map(|p| (p[0], p[1])).collect(),
    };
    let truth = cfg.truth.build(points)?;
    let report = run_experiment(&cfg, &truth)?;

    let mut summary = Vec::new();
    let mut stats = Vec::new();
    for (i, run) in report.runs.iter().enumerate() {
        let name = format!("envelope_{i:02}.csv");
        let csv = coverage_csv(&run.envelope, &run.truth, &run.coverage.flags);
        let path = out_dir.join(&name);
        write(&path, &csv)?;
        man.output(&path, &csv);
        summary.push(vec![
            num(run.curvature),
            run.constraint_tag.clone(),
            num(run.min_mse),
            run.coverage.points.to_string(),
            run.coverage.covered.to_string(),
            num(run.coverage.fraction()),
            u8::from(run.coverage.complete()).to_string(),
            name,
        ]);
        for s in &run.statistics {
            stats.push(vec![
                num(run.curvature),
                s.label.clone(),
                num(s.lower),
                num(s.upper),
                num(s.truth),
                u8::from(s.contained).to_string(),
            ]);
        }
        writeln!(
            out,
            "curvature {}: {}/{} grid points contained{}",
            num(run.curvature),
            run.coverage.covered,
            run.coverage.points,
            run.statistics
                .iter()
                .map(|s| format!(", {} {}", s.label, if s.contained { "contained" } else { "NOT contained" }))
                .collect::<String>()
        )
        .map_err(io_out)?;
        for w in &run.warnings {
            warn(w);
        }
    }
    let summary = table(
        &["curvature", "constraint", "min_mse", "points", "covered", "fraction", "complete", "envelope"],
        &summary,
    );
    let stats = table(&["curvature", "statistic", "lower", "upper", "truth", "contained"], &stats);
    for (name, body) in [("summary.csv", &summary), ("statistics.csv", &stats)] {
        let path = out_dir.join(name);
        write(&path, body)?;
        man.output(&path, body);
    }
    let sample = to_json(&report.sample);
    let path = out_dir.join("sample.json");
    write(&path, &sample)?;
    man.output(&path, &sample);
    man.write(&out_dir.join("manifest.json"))?;
    Ok(())
}

#[derive(Serialize)]
struct Calibration {
    max_curvature: f64,
    at: f64,
    suggested_cap: f64,
    knots: Vec<f64>,
    coefficients: Vec<f64>,
    residual_sum_of_squares: f64,
}

pub fn calibrate(a: &CalibrateArgs, out: &mut dyn Write) -> Result<()> {
    let points = read_points(&a.curve)?;
    let curve = match &a.knots {
        Some(k) => ReferenceCurve::new(points.clone(), k.clone())?,
        None => ReferenceCurve::with_default_knots(points.clone())?,
    };
    let est = fit_curvature(&curve)?;
    writeln!(
        out,
        "max |f''| = {} at x = {}\nsuggested curvature cap: {}",
        num(est.max_curvature),
        num(est.at),
        num(est.suggested_cap)
    )
    .map_err(io_out)?;
    let Some(dir) = &a.out_dir else {
        return Ok(());
    };
    let cal = Calibration {
        max_curvature: est.max_curvature,
        at: est.at,
        suggested_cap: est.suggested_cap,
        knots: est.spline.knots.clone(),
        coefficients: est.spline.coefficients.clone(),
        residual_sum_of_squares: est.spline.residual_sum_of_squares(),
    };
    let json_text = to_json(&cal);
    let mut fit = String::from("x,y,fitted,second_derivative\n");
    let mut sorted = points;
    sorted.sort_by(|p, q| p.0.total_cmp(&q.0));
    for (x, y) in sorted {
        let s = &est.spline;
        fit.push_str(&format!("{},{},{},{}\n", num(x), num(y), num(s.eval(x)), num(s.second_derivative(x))));
    }
    let mut man = Manifest::new("calibrate", json!({ "knots": a.knots }), None);
    man.input(&a.curve)?;
    for (name, body) in [("calibration.json", &json_text), ("fit.csv", &fit)] {
        let path = dir.join(name);
        write(&path, body)?;
        man.output(&path, body);
    }
    man.write(&dir.join("manifest.json"))?;
    Ok(())
}

#[derive(Serialize)]
struct ScenarioSummary {
    scenario: Scenario,
    means: Vec<f64>,
    sub_intervals: Vec<Vec<(f64, f64)>>,
}

#[derive(Serialize)]
struct DoubleCensorOutput {
    parent_boundaries: Vec<f64>,
    child_boundaries: Vec<f64>,
    constraints: Value,
    scenarios: Vec<ScenarioSummary>,
    dominance_violations: usize,
    statistics: Vec<Value>,
}

pub fn doublecensor(a: &DoubleCensorArgs, out: &mut dyn Write) -> Result<()> {
    if a.monotone == Monotone::Dec {
        return Err(CliError::usage("child ranks rise with parent ranks here; use --monotone inc or none"));
    }
    if a.grid < 3 {
        return Err(CliError::usage(format!("--grid needs at least 3 cells, got {}", a.grid)));
    }
    let tm = read_transition(&a.matrix)?;
    let support = (tm.parent_boundaries[0], tm.parent_boundaries[tm.num_parent_bins()]);
    let dist = read_distribution(&a.dist, support)?;
    tm.check_parent_margins(&dist)
        .map_err(|e| CliError::Input {
            path: a.matrix.clone(),
            issues: match e {
                cefbounds::Error::Validation(list) => list.into_iter().map(|i| (None, i.message)).collect(),
                other => vec![(None, other.to_string())],
            },
        })?;
    let constraints = ConstraintSet::new(a.monotone == Monotone::Inc, a.curvature)?;
    let opts = NumericOptions {
        partitions: a.grid,
        ..NumericOptions::default()
    };
    let violations = dominance_violations(&tm);
    if !violations.is_empty() {
        warn(&format!(
            "{} first-order dominance violations between adjacent parent bins",
            violations.len()
        ));
    }
    let mut statistics = Vec::with_capacity(a.stats.len());
    for s in &a.stats {
        let spec = StatisticSpec::<f64>::parse(s)?;
        let b = double_censored_stat_bounds(&tm, &dist, constraints, &spec, opts)?;
        let mut v = serde_json::to_value(&b).expect("bounds serialize");
        if let Value::Object(map) = &mut v {
            map.remove("dominance_violations");
            map.insert("spec".into(), Value::from(spec.label()));
        }
        statistics.push(v);
    }
    let scenarios = [Scenario::LowMobility, Scenario::HighMobility]
        .into_iter()
        .map(|sc| {
            let sm = scenario_means(&tm, sc);
            ScenarioSummary {
                scenario: sc,
                means: sm.means,
                sub_intervals: sm.sub_intervals,
            }
        })
        .collect();
    let result = DoubleCensorOutput {
        parent_boundaries: tm.parent_boundaries.clone(),
        child_boundaries: tm.child_boundaries.clone(),
        constraints: json!({
            "monotone": constraints.monotone,
            "curvature": limit(constraints.curvature),
            "tag": constraints.tag(),
        }),
        scenarios,
        dominance_violations: violations.len(),
        statistics,
    };
    let text = to_json(&result);
    out.write_all(text.as_bytes()).map_err(io_out)?;
    if let Some(dir) = &a.out_dir {
        let settings = json!({
            "stats": a.stats,
            "dist": a.dist,
            "monotone": a.monotone == Monotone::Inc,
            "curvature": limit(a.curvature),
            "grid": a.grid,
        });
        let mut man = Manifest::new("doublecensor", settings, None);
        man.input(&a.matrix)?;
        if a.dist != "uniform" {
            man.input(Path::new(&a.dist))?;
        }
        let path = dir.join("bounds.json");
        write(&path, &text)?;
        man.output(&path, &text);
        man.write(&dir.join("manifest.json"))?;
    }
    Ok(())
}
