use std::io::Write;
use std::path::{Path, PathBuf};

use super::emit;
use crate::args::GlobalArgs;
use crate::error::{CliError, CliResult};
use crate::synth::{generate, write_corpus, Drift, SynthSpec};

pub struct Flags<'a> {
    pub videos: Option<usize>,
    pub segments: Option<usize>,
    pub categories: Option<usize>,
    pub drift: &'a [Drift],
    pub noise: Option<f64>,
}

pub fn resolve_spec(g: &GlobalArgs, path: Option<&Path>, flags: Flags) -> CliResult<SynthSpec> {
    let mut spec = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Invalid(format!("cannot read spec {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("spec {}: {e}", p.display())))?
        }
        None => SynthSpec::default(),
    };
    if let Some(v) = flags.videos {
        spec.num_videos = v;
    }
    if let Some(v) = flags.segments {
        spec.num_segments = v;
    }
    if let Some(v) = flags.categories {
        spec.num_categories = v;
    }
    if !flags.drift.is_empty() {
        spec.drift = flags.drift.to_vec();
    }
    if let Some(v) = flags.noise {
        spec.noise_std = v;
    }
    if let Some(seed) = g.seed {
        spec.seed = seed;
    }
    spec.validate()?;
    Ok(spec)
}

pub fn run(g: &GlobalArgs, spec: Option<&Path>, flags: Flags, out: &mut dyn Write) -> CliResult<()> {
    let spec = resolve_spec(g, spec, flags)?;
    let dir = g.out.clone().unwrap_or_else(|| PathBuf::from("synth"));
    let corpus = generate(&spec)?;
    write_corpus(&dir, &corpus)?;
    emit(out, &format!("wrote {} video(s) to {}\n", corpus.len(), dir.display()))
}
