use std::io::Write;
use std::path::PathBuf;

use avparse_oracle as oracle;

use super::emit;
use crate::args::GlobalArgs;
use crate::corpus::{load_bundles, load_ground_truths};
use crate::error::{CliError, CliResult};
use crate::verify::verify_corpus;

pub fn run(g: &GlobalArgs, inputs: &[PathBuf], ground_truth: &[PathBuf], out: &mut dyn Write) -> CliResult<()> {
    let config = g.engine_config()?;
    let (bundles, errors) = load_bundles(inputs)?;
    if !errors.is_empty() {
        return Err(CliError::Invalid(errors.join("\n")));
    }
    let gts = if ground_truth.is_empty() { None } else { Some(load_ground_truths(ground_truth)?) };
    let report = verify_corpus(&bundles, gts.as_ref(), &config, &oracle::parse)?;
    let summary = format!(
        "{} video(s), {} step(s), {} with conditioning-scaled tolerance: {}\n",
        report.videos.len(),
        report.steps(),
        report.widened(),
        if report.passed() { "PASS" } else { "FAIL" }
    );
    emit(out, &summary)?;
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Mismatch(report.failures().join("\n")))
    }
}
