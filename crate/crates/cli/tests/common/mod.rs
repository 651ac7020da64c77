#![allow(dead_code)]

use std::path::{Path, PathBuf};

use avparse::{EngineConfig, GroundTruth, ScoreBundle};
use avparse_cli::synth::{render, Drift, SynthEvent, SynthSpec};
use avparse_cli::verify::{oracle_metrics, oracle_video, params};
use avparse_cli::{Cli, CliResult};
use avparse_oracle as oracle;
use clap::Parser;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const DRIFT_ID: &str = "drift";

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn drift_dir() -> PathBuf {
    fixtures().join("drift")
}

/// One audio-visual event on all ten segments of category 0 whose score
/// falls from 0.90 to 0.60 in equal steps; features never move.
pub fn drift_spec() -> SynthSpec {
    SynthSpec {
        num_videos: 1,
        num_segments: 10,
        num_categories: 3,
        drift: vec![Drift::LinearDecay { rate: 0.3 / 9.0 }],
        noise_std: 0.0,
        continuity: 1.0,
        base_logit: -3.0,
        mean_shift: 9f64.ln() + 3.0,
        ..SynthSpec::default()
    }
}

pub fn drift_video() -> (ScoreBundle, GroundTruth) {
    let spec = drift_spec();
    let event = SynthEvent { category: 0, start: 1, end: 10, audio: true, visual: true };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    render(DRIFT_ID, &[event], &spec, spec.drift[0], &mut rng).unwrap()
}

/// Oracle results for one configuration, decisions as `0`/`1` strings per segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub audio: Vec<String>,
    pub visual: Vec<String>,
    pub audio_visual: Vec<String>,
    /// `[category, start, end]` per modality, after refinement.
    pub events: [Vec<[usize; 3]>; 3],
    /// Corpus report values in `MetricsReport::KEYS` order.
    pub metrics: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expected {
    pub full: Outcome,
    #[serde(rename = "static")]
    pub fixed: Outcome,
}

pub fn bits(m: &[Vec<bool>]) -> Vec<String> {
    m.iter().map(|row| row.iter().map(|&b| if b { '1' } else { '0' }).collect()).collect()
}

pub fn oracle_outcome(bundle: &ScoreBundle, gt: &GroundTruth, config: &EngineConfig) -> Outcome {
    let runs = oracle::parse(&oracle_video(bundle), &params(config));
    let metrics = oracle::metrics::corpus(&[oracle_metrics(&runs, gt)]).to_vec();
    let events = |i: usize| -> Vec<[usize; 3]> { runs[i].events.iter().map(|e| [e.category, e.start, e.end]).collect() };
    Outcome {
        audio: bits(&runs[0].decisions),
        visual: bits(&runs[1].decisions),
        audio_visual: bits(&runs[2].decisions),
        events: [events(0), events(1), events(2)],
        metrics,
    }
}

pub fn static_config() -> EngineConfig {
    let mut config = EngineConfig::default();
    config.toggles.use_dynamic_thresholds = false;
    config
}

/// Runs a command line in-process and returns what it printed.
pub fn run(args: &[&str]) -> CliResult<String> {
    let cli = Cli::try_parse_from(std::iter::once("avparse").chain(args.iter().copied()))
        .unwrap_or_else(|e| panic!("bad test command line {args:?}: {e}"));
    let mut out = Vec::new();
    let result = avparse_cli::run(cli, &mut out);
    result.map(|()| String::from_utf8(out).unwrap())
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}
