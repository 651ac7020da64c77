pub mod ablate;
pub mod eval;
pub mod parse;
pub mod sweep;
pub mod synth;
pub mod verify;

use std::io::Write;
use std::path::{Path, PathBuf};

use avparse::formats::write_document;
use avparse::{aggregate_report, evaluate_video, parse_video, EngineConfig, GroundTruth, MetricsReport, ReportDoc, ScoreBundle};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{Cli, Command};
use crate::error::{CliError, CliResult};

pub fn dispatch(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    let g = &cli.global;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(g.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    let mut buffer = Vec::new();
    let result = pool.install(|| {
        let out = &mut buffer;
        match &cli.command {
            Command::Parse { inputs, trace } => parse::run(g, inputs, *trace, out),
            Command::Eval { predictions, ground_truth, csv } => eval::run(g, predictions, ground_truth, csv.as_deref(), out),
            Command::Sweep { grid, bundles, ground_truth, csv } => sweep::run(g, grid, bundles, ground_truth, csv.as_deref(), out),
            Command::Synth { spec, videos, segments, categories, drift, noise } => {
                let flags = synth::Flags { videos: *videos, segments: *segments, categories: *categories, drift, noise: *noise };
                synth::run(g, spec.as_deref(), flags, out)
            }
            Command::Ablate { bundles, ground_truth, csv } => ablate::run(g, bundles, ground_truth, csv.as_deref(), out),
            Command::Verify { inputs, ground_truth } => verify::run(g, inputs, ground_truth, out),
        }
    });
    // partial output (e.g. the parse summary) is still shown on failure
    emit(out, &String::from_utf8_lossy(&buffer))?;
    result
}

/// Parses every bundle with `config` and scores it against its ground truth.
pub fn parse_and_score(corpus: &[(ScoreBundle, GroundTruth)], config: &EngineConfig) -> CliResult<ReportDoc> {
    let per_video = corpus
        .par_iter()
        .map(|(bundle, gt)| {
            let parsed = parse_video(bundle, config)?;
            evaluate_video(&parsed.to_prediction_doc(bundle.vocabulary()), gt)
        })
        .collect::<avparse::Result<Vec<_>>>()?;
    Ok(ReportDoc::new(aggregate_report(&per_video)?, per_video))
}

pub(crate) fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Write { path: dir.to_owned(), source })
}

pub(crate) fn write_json<T: Serialize>(dir: &Path, name: &str, doc: &T) -> CliResult<PathBuf> {
    create_dir(dir)?;
    let path = dir.join(name);
    write_document(&path, doc)?;
    Ok(path)
}

pub(crate) fn emit(out: &mut dyn Write, text: &str) -> CliResult<()> {
    out.write_all(text.as_bytes())
        .map_err(|source| CliError::Write { path: PathBuf::from("<stdout>"), source })
}

pub(crate) fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> CliResult<()> {
    let err = |e: csv::Error| CliError::Write {
        path: path.to_owned(),
        source: std::io::Error::other(e),
    };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row).map_err(err)?;
    }
    w.flush().map_err(|source| CliError::Write { path: path.to_owned(), source })
}

/// Report keys present in `report`, as CSV cells.
pub(crate) fn metric_cells(report: &MetricsReport) -> Vec<String> {
    MetricsReport::KEYS
        .iter()
        .map(|k| report.get(k).map(|v| v.to_string()).unwrap_or_default())
        .collect()
}

pub(crate) fn metric_header() -> Vec<String> {
    MetricsReport::KEYS.iter().map(|k| k.to_string()).collect()
}

/// Fixed-width text rendering of a report.
pub fn report_table(report: &MetricsReport) -> String {
    let mut s = format!("{:<14}{:>10}{:>10}\n", "metric", "segment", "event");
    for (name, pair) in [
        ("audio", report.audio),
        ("visual", report.visual),
        ("audio-visual", report.audio_visual),
        ("type@av", report.type_at_av),
        ("event@av", report.event_at_av),
    ] {
        s += &format!("{name:<14}{:>10.2}{:>10.2}\n", pair.segment, pair.event);
    }
    if let Some(ave) = report.ave_accuracy {
        s += &format!("{:<14}{ave:>10.2}\n", "ave accuracy");
    }
    s += &format!("{:<14}{:>10}\n", "videos", report.num_videos);
    s
}
