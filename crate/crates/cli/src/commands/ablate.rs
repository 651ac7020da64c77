use std::io::Write;
use std::path::{Path, PathBuf};

use avparse::{EngineConfig, GroundTruth, MetricsReport, ScoreBundle, Toggles, FORMAT_VERSION};
use serde::{Deserialize, Serialize};

use super::{emit, metric_cells, metric_header, parse_and_score, write_csv, write_json};
use crate::args::GlobalArgs;
use crate::corpus::labelled_corpus;
use crate::error::CliResult;

/// Row names, in output order.
pub const ROWS: [&str; 5] = [
    "full",
    "w/o cosine similarity",
    "w/o dynamic thresholds",
    "w/o refine segments",
    "w/o relevant class selection",
];

fn toggles_for(row: usize) -> Toggles {
    let mut t = Toggles::default();
    match row {
        1 => t.use_cosine_scale = false,
        2 => t.use_dynamic_thresholds = false,
        3 => t.use_refinement = false,
        4 => t.use_class_selection = false,
        _ => {}
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub toggles: Toggles,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationDoc {
    pub format_version: u32,
    pub rows: Vec<AblationRow>,
}

/// The full method and each single stage switched off, with the base
/// config's numeric parameters. Toggles in `base` are ignored.
pub fn ablate(base: &EngineConfig, corpus: &[(ScoreBundle, GroundTruth)]) -> CliResult<Vec<AblationRow>> {
    ROWS.iter()
        .enumerate()
        .map(|(i, name)| {
            let cfg = EngineConfig { toggles: toggles_for(i), ..base.clone() };
            Ok(AblationRow {
                name: name.to_string(),
                toggles: cfg.toggles,
                report: parse_and_score(corpus, &cfg)?.report,
            })
        })
        .collect()
}

pub fn run(
    g: &GlobalArgs,
    bundles: &[PathBuf],
    ground_truth: &[PathBuf],
    csv: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult<()> {
    let base = g.engine_config()?;
    let corpus = labelled_corpus(bundles, ground_truth)?;
    let rows = ablate(&base, &corpus)?;

    let mut text = format!("{:<30}{:>10}{:>10}{:>10}{:>10}\n", "setting", "a-v seg", "a-v evt", "type seg", "event seg");
    for r in &rows {
        text += &format!(
            "{:<30}{:>10.2}{:>10.2}{:>10.2}{:>10.2}\n",
            r.name, r.report.audio_visual.segment, r.report.audio_visual.event, r.report.type_at_av.segment, r.report.event_at_av.segment
        );
    }
    emit(out, &text)?;

    if let Some(dir) = &g.out {
        write_json(dir, "ablation.json", &AblationDoc { format_version: FORMAT_VERSION, rows: rows.clone() })?;
    }
    if let Some(path) = csv {
        let mut header = vec!["setting".to_string()];
        header.extend(metric_header());
        let table: Vec<Vec<String>> = rows
            .iter()
            .map(|r| std::iter::once(r.name.clone()).chain(metric_cells(&r.report)).collect())
            .collect();
        write_csv(path, &header, &table)?;
    }
    Ok(())
}
