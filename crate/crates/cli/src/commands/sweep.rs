use std::cmp::Ordering;
use std::io::Write;
use std::path::{Path, PathBuf};

use avparse::{EngineConfig, GroundTruth, MetricsReport, ScoreBundle, FORMAT_VERSION};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{emit, metric_cells, metric_header, parse_and_score, write_csv, write_json};
use crate::args::GlobalArgs;
use crate::corpus::labelled_corpus;
use crate::error::{CliError, CliResult};

/// Candidate values per hyperparameter and the report key to maximize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub alpha: Vec<f64>,
    pub tau0: Vec<f64>,
    pub tau_f: Vec<f64>,
    pub tau_r: Vec<f64>,
    pub lambda: Vec<f64>,
    pub objective: String,
}

impl SweepGrid {
    pub fn validate(&self) -> CliResult<()> {
        for (name, values) in self.lists() {
            if values.is_empty() {
                return Err(CliError::Invalid(format!("grid: {name} has no values")));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(CliError::Invalid(format!("grid: {name} has a non-finite value")));
            }
        }
        if !MetricsReport::KEYS.contains(&self.objective.as_str()) {
            return Err(CliError::Invalid(format!(
                "grid: unknown objective {:?} (one of {})",
                self.objective,
                MetricsReport::KEYS.join(", ")
            )));
        }
        Ok(())
    }

    fn lists(&self) -> [(&'static str, &[f64]); 5] {
        [
            ("alpha", &self.alpha),
            ("tau0", &self.tau0),
            ("tau_f", &self.tau_f),
            ("tau_r", &self.tau_r),
            ("lambda", &self.lambda),
        ]
    }

    /// Every combination as `[alpha, tau0, tau_f, tau_r, lambda]`.
    pub fn combinations(&self) -> Vec<[f64; 5]> {
        let mut out = vec![[0.0; 5]];
        for (i, (_, values)) in self.lists().iter().enumerate() {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    values.iter().map(move |&v| {
                        let mut next = prefix;
                        next[i] = v;
                        next
                    })
                })
                .collect();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub tau0: f64,
    pub tau_f: f64,
    pub tau_r: f64,
    pub lambda: f64,
    pub objective: f64,
    pub report: MetricsReport,
}

impl SweepRow {
    fn params(&self) -> [f64; 5] {
        [self.alpha, self.tau0, self.tau_f, self.tau_r, self.lambda]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepDoc {
    pub format_version: u32,
    pub objective: String,
    pub rows: Vec<SweepRow>,
}

fn rank(a: &SweepRow, b: &SweepRow) -> Ordering {
    b.objective.total_cmp(&a.objective).then_with(|| {
        a.params()
            .iter()
            .zip(b.params().iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

/// Evaluates every grid point on top of `base` (toggles and overrides kept),
/// best objective first, ties broken by ascending parameters.
pub fn sweep(base: &EngineConfig, grid: &SweepGrid, corpus: &[(ScoreBundle, GroundTruth)]) -> CliResult<Vec<SweepRow>> {
    grid.validate()?;
    let mut rows = grid
        .combinations()
        .into_par_iter()
        .map(|[alpha, tau0, tau_f, tau_r, lambda]| {
            let cfg = EngineConfig { alpha, tau0, tau_f, tau_r, lambda, ..base.clone() };
            cfg.validate()?;
            let report = parse_and_score(corpus, &cfg)?.report;
            let objective = report.get(&grid.objective).unwrap_or(f64::NEG_INFINITY);
            Ok(SweepRow { alpha, tau0, tau_f, tau_r, lambda, objective, report })
        })
        .collect::<CliResult<Vec<_>>>()?;
    rows.sort_by(rank);
    Ok(rows)
}

pub fn read_grid(path: &Path) -> CliResult<SweepGrid> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Invalid(format!("cannot read grid {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("grid {}: {e}", path.display())))
}

pub fn run(
    g: &GlobalArgs,
    grid: &Path,
    bundles: &[PathBuf],
    ground_truth: &[PathBuf],
    csv: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult<()> {
    let base = g.engine_config()?;
    let grid = read_grid(grid)?;
    let corpus = labelled_corpus(bundles, ground_truth)?;
    let rows = sweep(&base, &grid, &corpus)?;

    let mut text = format!(
        "{:>5} {:>7} {:>7} {:>7} {:>7} {:>7}  {}\n",
        "rank", "alpha", "tau0", "tau_f", "tau_r", "lambda", grid.objective
    );
    for (i, r) in rows.iter().enumerate() {
        text += &format!(
            "{:>5} {:>7} {:>7} {:>7} {:>7} {:>7}  {:.2}\n",
            i + 1,
            r.alpha,
            r.tau0,
            r.tau_f,
            r.tau_r,
            r.lambda,
            r.objective
        );
    }
    emit(out, &text)?;

    if let Some(dir) = &g.out {
        let doc = SweepDoc { format_version: FORMAT_VERSION, objective: grid.objective.clone(), rows: rows.clone() };
        write_json(dir, "sweep.json", &doc)?;
    }
    if let Some(path) = csv {
        let mut header: Vec<String> = ["alpha", "tau0", "tau_f", "tau_r", "lambda", "objective"].map(String::from).to_vec();
        header.extend(metric_header());
        let table: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                let mut cells: Vec<String> = r.params().iter().map(|v| v.to_string()).collect();
                cells.push(r.objective.to_string());
                cells.extend(metric_cells(&r.report));
                cells
            })
            .collect();
        write_csv(path, &header, &table)?;
    }
    Ok(())
}
