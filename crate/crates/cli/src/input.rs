//! CSV ingestion. Every problem is reported with the file line it came from.

use std::path::{Path, PathBuf};

use cefbounds::doublecensor::TransitionMatrix;
use cefbounds::inference::{BinSummary, BootstrapData};
use cefbounds::{CefEnvelope, DistributionSpec, Provenance};

use crate::error::{CliError, Result};

type Issues = Vec<(Option<u64>, String)>;

/// Layout of the outcome file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    /// `bin_lo,bin_hi,mean[,count]`
    Bins,
    /// `bin_lo,bin_hi,y`, one row per observation
    Micro,
    /// `bin_lo,bin_hi,mean,sd,n`
    Counts,
}

struct Table {
    path: PathBuf,
    columns: Vec<String>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn read(path: &Path, required: &[&str], optional: &[&str]) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        let columns: Vec<String> = rdr
            .headers()
            .map_err(|e| csv_error(path, e))?
            .iter()
            .map(str::to_string)
            .collect();
        let missing: Vec<&str> = required
            .iter()
            .copied()
            .filter(|c| !columns.iter().any(|h| h == c))
            .collect();
        let unknown: Vec<&String> = columns
            .iter()
            .filter(|h| !required.contains(&h.as_str()) && !optional.contains(&h.as_str()))
            .collect();
        if !missing.is_empty() || !unknown.is_empty() {
            let mut want = required.join(",");
            for o in optional {
                want.push_str(&format!("[,{o}]"));
            }
            return Err(CliError::at(
                path,
                Some(1),
                format!("expected header {want}, got {}", columns.join(",")),
            ));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            rows.push((line, rec));
        }
        if rows.is_empty() {
            return Err(CliError::at(path, None, "no data rows"));
        }
        Ok(Self {
            path: path.to_path_buf(),
            columns,
            rows,
        })
    }

    fn has(&self, col: &str) -> bool {
        self.columns.iter().any(|c| c == col)
    }

    fn num(&self, row: usize, col: &str, issues: &mut Issues) -> f64 {
        let (line, rec) = &self.rows[row];
        let idx = self.columns.iter().position(|c| c == col).expect("column checked");
        let text = rec.get(idx).unwrap_or("");
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => v,
            _ => {
                issues.push((Some(*line), format!("column {col}: {text:?} is not a finite number")));
                f64::NAN
            }
        }
    }

    fn line(&self, row: usize) -> u64 {
        self.rows[row].0
    }

    fn fail(&self, issues: Issues) -> CliError {
        CliError::Input {
            path: self.path.clone(),
            issues,
        }
    }

    fn finish<T>(&self, issues: Issues, value: T) -> Result<T> {
        if issues.is_empty() {
            Ok(value)
        } else {
            Err(self.fail(issues))
        }
    }
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map(|p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        kind => CliError::at(path, line, format!("malformed CSV: {kind:?}")),
    }
}

fn count(v: f64, col: &str, line: u64, issues: &mut Issues) -> usize {
    if v.is_finite() && v >= 0.0 && v.fract() == 0.0 {
        v as usize
    } else {
        if v.is_finite() {
            issues.push((Some(line), format!("column {col}: {v} is not a non-negative integer")));
        }
        0
    }
}

/// Outcome data after aggregation to bins.
#[derive(Debug, Clone)]
pub struct LoadedSample {
    pub path: PathBuf,
    pub boundaries: Vec<f64>,
    pub means: Vec<f64>,
    /// File line that defines each bin.
    pub bin_lines: Vec<u64>,
    /// Resampling input, absent for `bins`.
    pub data: Option<BootstrapData<f64>>,
}

impl LoadedSample {
    pub fn support(&self) -> (f64, f64) {
        (self.boundaries[0], self.boundaries[self.boundaries.len() - 1])
    }

    /// Re-labels core validation issues with file lines.
    pub fn locate(&self, e: cefbounds::Error) -> CliError {
        match e {
            cefbounds::Error::Validation(issues) => CliError::Input {
                path: self.path.clone(),
                issues: issues
                    .into_iter()
                    .map(|i| {
                        let line = i
                            .row
                            .map(|r| self.bin_lines[r.min(self.bin_lines.len() - 1)]);
                        (line, i.message)
                    })
                    .collect(),
            },
            other => CliError::Core(other),
        }
    }
}

/// Bins as `(lo, hi, line)` must tile an interval in order.
fn check_tiling(bins: &[(f64, f64, u64)], issues: &mut Issues) {
    for (i, &(lo, hi, line)) in bins.iter().enumerate() {
        if !(lo < hi) && lo.is_finite() && hi.is_finite() {
            issues.push((Some(line), format!("bin_lo {lo} must be below bin_hi {hi}")));
        }
        if i > 0 {
            let prev = bins[i - 1].1;
            if lo != prev && lo.is_finite() && prev.is_finite() {
                issues.push((
                    Some(line),
                    format!("bin_lo {lo} does not continue from the previous bin_hi {prev}"),
                ));
            }
        }
    }
}

fn tiled_boundaries(bins: &[(f64, f64, u64)]) -> Vec<f64> {
    let mut b: Vec<f64> = bins.iter().map(|t| t.0).collect();
    b.push(bins[bins.len() - 1].1);
    b
}

pub fn read_sample(path: &Path, kind: InputKind) -> Result<LoadedSample> {
    match kind {
        InputKind::Bins => read_bins(path),
        InputKind::Micro => read_micro(path),
        InputKind::Counts => read_counts(path),
    }
}

fn read_bins(path: &Path) -> Result<LoadedSample> {
    let t = Table::read(path, &["bin_lo", "bin_hi", "mean"], &["count"])?;
    let mut issues = Issues::new();
    let mut bins = Vec::new();
    let mut means = Vec::new();
    for r in 0..t.rows.len() {
        bins.push((t.num(r, "bin_lo", &mut issues), t.num(r, "bin_hi", &mut issues), t.line(r)));
        means.push(t.num(r, "mean", &mut issues));
        if t.has("count") {
            let c = t.num(r, "count", &mut issues);
            count(c, "count", t.line(r), &mut issues);
        }
    }
    check_tiling(&bins, &mut issues);
    let sample = LoadedSample {
        path: path.to_path_buf(),
        boundaries: tiled_boundaries(&bins),
        means,
        bin_lines: bins.iter().map(|b| b.2).collect(),
        data: None,
    };
    t.finish(issues, sample)
}

fn read_counts(path: &Path) -> Result<LoadedSample> {
    let t = Table::read(path, &["bin_lo", "bin_hi", "mean", "sd", "n"], &[])?;
    let mut issues = Issues::new();
    let mut bins = Vec::new();
    let mut summaries = Vec::new();
    for r in 0..t.rows.len() {
        let line = t.line(r);
        bins.push((t.num(r, "bin_lo", &mut issues), t.num(r, "bin_hi", &mut issues), line));
        let mean = t.num(r, "mean", &mut issues);
        let sd = t.num(r, "sd", &mut issues);
        if sd < 0.0 {
            issues.push((Some(line), format!("column sd: {sd} is negative")));
        }
        let n = count(t.num(r, "n", &mut issues), "n", line, &mut issues);
        if n == 0 {
            issues.push((Some(line), "column n: need at least one observation".into()));
        }
        summaries.push(BinSummary { mean, sd, n });
    }
    check_tiling(&bins, &mut issues);
    let sample = LoadedSample {
        path: path.to_path_buf(),
        boundaries: tiled_boundaries(&bins),
        means: summaries.iter().map(|s| s.mean).collect(),
        bin_lines: bins.iter().map(|b| b.2).collect(),
        data: Some(BootstrapData::Counts { bins: summaries }),
    };
    t.finish(issues, sample)
}

fn read_micro(path: &Path) -> Result<LoadedSample> {
    let t = Table::read(path, &["bin_lo", "bin_hi", "y"], &[])?;
    let mut issues = Issues::new();
    let mut obs = Vec::with_capacity(t.rows.len());
    for r in 0..t.rows.len() {
        let lo = t.num(r, "bin_lo", &mut issues);
        let hi = t.num(r, "bin_hi", &mut issues);
        let y = t.num(r, "y", &mut issues);
        obs.push((lo, hi, y, t.line(r)));
    }
    if !issues.is_empty() {
        return Err(t.fail(issues));
    }
    // distinct bins in order of their lower edge, keeping the first line seen
    let mut bins: Vec<(f64, f64, u64)> = Vec::new();
    for &(lo, hi, _, line) in &obs {
        if !bins.iter().any(|b| b.0 == lo && b.1 == hi) {
            bins.push((lo, hi, line));
        }
    }
    bins.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    check_tiling(&bins, &mut issues);
    let mut sums = vec![(0.0, 0usize); bins.len()];
    let mut rows = Vec::with_capacity(obs.len());
    for &(lo, hi, y, _) in &obs {
        let k = bins.iter().position(|b| b.0 == lo && b.1 == hi).expect("bin collected");
        sums[k].0 += y;
        sums[k].1 += 1;
        rows.push((k, y));
    }
    let sample = LoadedSample {
        path: path.to_path_buf(),
        boundaries: tiled_boundaries(&bins),
        means: sums.iter().map(|&(s, n)| s / n as f64).collect(),
        bin_lines: bins.iter().map(|b| b.2).collect(),
        data: Some(BootstrapData::Micro { rows }),
    };
    t.finish(issues, sample)
}

/// `uniform` (on `support`) or the path of an `x,cdf` table.
pub fn read_distribution(arg: &str, support: (f64, f64)) -> Result<DistributionSpec<f64>> {
    if arg == "uniform" {
        return Ok(DistributionSpec::uniform(support.0, support.1));
    }
    let path = Path::new(arg);
    let t = Table::read(path, &["x", "cdf"], &[])?;
    let mut issues = Issues::new();
    let cdf: Vec<(f64, f64)> = (0..t.rows.len())
        .map(|r| (t.num(r, "x", &mut issues), t.num(r, "cdf", &mut issues)))
        .collect();
    if !issues.is_empty() {
        return Err(t.fail(issues));
    }
    let dist = DistributionSpec::gridded(cdf);
    let issues = dist
        .check()
        .into_iter()
        .map(|i| (i.row.map(|r| t.line(r)), i.message))
        .collect();
    t.finish(issues, dist)
}

/// `x,y` reference points.
pub fn read_points(path: &Path) -> Result<Vec<(f64, f64)>> {
    let t = Table::read(path, &["x", "y"], &[])?;
    let mut issues = Issues::new();
    let pts = (0..t.rows.len())
        .map(|r| (t.num(r, "x", &mut issues), t.num(r, "y", &mut issues)))
        .collect();
    t.finish(issues, pts)
}

/// An envelope CSV (`x,lower,upper`, optionally with a `truth` column).
pub fn read_envelope(path: &Path) -> Result<(CefEnvelope<f64>, Option<Vec<f64>>)> {
    let t = Table::read(path, &["x", "lower", "upper"], &["truth", "contained"])?;
    let mut issues = Issues::new();
    let n = t.rows.len();
    let mut env = CefEnvelope {
        grid: Vec::with_capacity(n),
        lower: Vec::with_capacity(n),
        upper: Vec::with_capacity(n),
        provenance: Provenance::Numeric,
        constraint_tag: String::new(),
    };
    let mut truth = t.has("truth").then(Vec::new);
    for r in 0..n {
        env.grid.push(t.num(r, "x", &mut issues));
        env.lower.push(t.num(r, "lower", &mut issues));
        env.upper.push(t.num(r, "upper", &mut issues));
        if let Some(tr) = truth.as_mut() {
            tr.push(t.num(r, "truth", &mut issues));
        }
    }
    t.finish(issues, (env, truth))
}

/// Joint parent/child bin masses. The first row holds the child boundaries
/// after an empty cell; each further row holds a parent boundary followed by
/// that parent bin's masses, and the last row holds only the top parent
/// boundary.
pub fn read_transition(path: &Path) -> Result<TransitionMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let cells: Vec<String> = rec.iter().map(str::to_string).collect();
        if cells.iter().all(String::is_empty) {
            continue;
        }
        records.push((line, cells));
    }
    let mut issues = Issues::new();
    let parse = |line: u64, s: &str, issues: &mut Issues| -> f64 {
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => v,
            _ => {
                issues.push((Some(line), format!("{s:?} is not a finite number")));
                f64::NAN
            }
        }
    };
    if records.len() < 3 {
        return Err(CliError::at(
            path,
            None,
            "need a child-boundary row, at least one parent row and a closing parent boundary",
        ));
    }
    let (head_line, head) = &records[0];
    let child: Vec<f64> = head
        .iter()
        .skip(1)
        .filter(|c| !c.is_empty())
        .map(|c| parse(*head_line, c, &mut issues))
        .collect();
    let h = child.len().saturating_sub(1);
    let mut parents = Vec::new();
    let mut mass = Vec::new();
    let mut lines = Vec::new();
    let last = records.len() - 1;
    for (i, (line, cells)) in records.iter().enumerate().skip(1) {
        let filled: Vec<&String> = cells.iter().skip(1).filter(|c| !c.is_empty()).collect();
        parents.push(parse(*line, &cells[0], &mut issues));
        if i == last {
            if !filled.is_empty() {
                issues.push((Some(*line), "the last row holds only the top parent boundary".into()));
            }
            break;
        }
        if filled.len() != h {
            issues.push((Some(*line), format!("expected {h} masses, found {}", filled.len())));
        }
        mass.push(filled.iter().map(|c| parse(*line, c, &mut issues)).collect());
        lines.push(*line);
    }
    if !issues.is_empty() {
        return Err(CliError::Input {
            path: path.to_path_buf(),
            issues,
        });
    }
    TransitionMatrix::new(parents, child, mass).map_err(|e| match e {
        cefbounds::Error::Validation(list) => CliError::Input {
            path: path.to_path_buf(),
            issues: list
                .into_iter()
                .map(|i| (i.row.and_then(|r| lines.get(r).copied()), i.message))
                .collect(),
        },
        other => CliError::Core(other),
    })
}
