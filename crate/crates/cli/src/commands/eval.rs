use std::io::Write;
use std::path::{Path, PathBuf};

use avparse::{aggregate_report, evaluate_video, ReportDoc};
use rayon::prelude::*;

use super::{emit, metric_cells, report_table, write_csv, write_json};
use crate::args::GlobalArgs;
use crate::corpus::{load_ground_truths, load_predictions, pair};
use crate::error::CliResult;

pub fn evaluate_files(predictions: &[PathBuf], ground_truth: &[PathBuf]) -> CliResult<ReportDoc> {
    let pairs = pair(load_predictions(predictions)?, load_ground_truths(ground_truth)?, ["prediction", "ground truth"])?;
    let per_video = pairs
        .par_iter()
        .map(|(pred, gt)| evaluate_video(pred, gt))
        .collect::<avparse::Result<Vec<_>>>()?;
    Ok(ReportDoc::new(aggregate_report(&per_video)?, per_video))
}

pub fn run(
    g: &GlobalArgs,
    predictions: &[PathBuf],
    ground_truth: &[PathBuf],
    csv: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult<()> {
    let doc = evaluate_files(predictions, ground_truth)?;
    emit(out, &report_table(&doc.report))?;
    if let Some(dir) = &g.out {
        write_json(dir, "report.json", &doc)?;
    }
    if let Some(path) = csv {
        let rows: Vec<Vec<String>> = avparse::MetricsReport::KEYS
            .iter()
            .zip(metric_cells(&doc.report))
            .map(|(k, v)| vec![k.to_string(), v])
            .collect();
        write_csv(path, &["metric".into(), "value".into()], &rows)?;
    }
    Ok(())
}
