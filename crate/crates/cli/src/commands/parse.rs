use std::io::Write;
use std::path::{Path, PathBuf};

use avparse::parse_video;
use rayon::prelude::*;

use super::{emit, write_json};
use crate::args::GlobalArgs;
use crate::corpus::load_bundles;
use crate::error::{CliError, CliResult};

/// Writes `<out>/<video_id>.json` per bundle, plus `<out>/traces/<video_id>.json`
/// when tracing. Bad bundles are reported after the good ones are written.
pub fn run(g: &GlobalArgs, inputs: &[PathBuf], trace: bool, out: &mut dyn Write) -> CliResult<()> {
    if inputs.is_empty() {
        return Err(CliError::Invalid("usage: avparse parse <BUNDLE|DIR>...".into()));
    }
    let config = g.engine_config()?;
    let dir = g.out.clone().unwrap_or_else(|| PathBuf::from("predictions"));
    let (bundles, mut errors) = load_bundles(inputs)?;

    let written: Vec<CliResult<()>> = bundles
        .par_iter()
        .map(|bundle| {
            let parsed = parse_video(bundle, &config)?;
            let name = format!("{}.json", bundle.video_id());
            write_json(&dir, &name, &parsed.to_prediction_doc(bundle.vocabulary()))?;
            if trace {
                write_json(&dir.join("traces"), &name, &parsed.to_trace_doc())?;
            }
            Ok(())
        })
        .collect();
    let mut ok = 0;
    for (bundle, result) in bundles.iter().zip(written) {
        match result {
            Ok(()) => ok += 1,
            Err(e @ CliError::Write { .. }) => return Err(e),
            Err(e) => errors.push(format!("{}: {e}", bundle.video_id())),
        }
    }
    emit(out, &format!("wrote {ok} prediction file(s) to {}\n", display(&dir)))?;
    if errors.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invalid(format!("{} input(s) rejected:\n{}", errors.len(), errors.join("\n"))))
    }
}

fn display(p: &Path) -> String {
    p.display().to_string()
}
