use std::path::{Path, PathBuf};

use avparse::{EngineConfig, Preset};
use clap::{Args, Parser, Subcommand};

use crate::error::{CliError, CliResult};
use crate::synth::Drift;

#[derive(Debug, Parser)]
#[command(name = "avparse", version, about = "Training-free audio-visual event parsing")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// Engine configuration file (JSON)
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Hyperparameter preset: languagebind or clip-clap
    #[arg(long, global = true, conflicts_with = "config")]
    pub preset: Option<Preset>,

    /// Output directory
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Seed for synthetic corpora
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads (defaults to the number of cores)
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Do not scale the ratio by feature cosine
    #[arg(long, global = true)]
    pub no_cosine: bool,
    /// Keep every threshold at tau0
    #[arg(long, global = true)]
    pub no_dynamic: bool,
    /// Keep unrefined candidates
    #[arg(long, global = true)]
    pub no_refine: bool,
    /// Run every category, not just the relevant ones
    #[arg(long, global = true)]
    pub no_select: bool,

    /// Audio weight of the audio-visual fusion
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Initial threshold
    #[arg(long, global = true)]
    pub tau0: Option<f64>,
    /// Relevant-category threshold
    #[arg(long, global = true)]
    pub tau_f: Option<f64>,
    /// Span refinement threshold
    #[arg(long, global = true)]
    pub tau_r: Option<f64>,
    /// Threshold update decay
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse score bundles into prediction files
    Parse {
        /// Bundle files or directories of bundles
        #[arg(required = true)]
        inputs: Vec<PathBuf>,

        /// Also write per-segment threshold traces
        #[arg(long)]
        trace: bool,
    },

    /// Score prediction files against ground truth
    Eval {
        #[arg(long = "pred", num_args = 1.., required = true)]
        predictions: Vec<PathBuf>,

        #[arg(long = "gt", num_args = 1.., required = true)]
        ground_truth: Vec<PathBuf>,

        /// Also export the report as CSV
        #[arg(long, value_name = "FILE")]
        csv: Option<PathBuf>,
    },

    /// Rank hyperparameter combinations on a labelled corpus
    Sweep {
        /// Grid document (JSON)
        #[arg(long, value_name = "FILE")]
        grid: PathBuf,

        #[arg(long, num_args = 1.., required = true)]
        bundles: Vec<PathBuf>,

        #[arg(long = "gt", num_args = 1.., required = true)]
        ground_truth: Vec<PathBuf>,

        #[arg(long, value_name = "FILE")]
        csv: Option<PathBuf>,
    },

    /// Generate a synthetic corpus of bundles and ground truth
    Synth {
        /// Generator spec (JSON); flags below override it
        #[arg(long, value_name = "FILE")]
        spec: Option<PathBuf>,

        #[arg(long)]
        videos: Option<usize>,

        #[arg(long)]
        segments: Option<usize>,

        #[arg(long)]
        categories: Option<usize>,

        /// none, linear-decay:RATE or step:DROP; repeat to cycle profiles
        #[arg(long)]
        drift: Vec<Drift>,

        /// Standard deviation of the logit noise
        #[arg(long)]
        noise: Option<f64>,
    },

    /// Evaluate the full method and each single-stage ablation
    Ablate {
        #[arg(long, num_args = 1.., required = true)]
        bundles: Vec<PathBuf>,

        #[arg(long = "gt", num_args = 1.., required = true)]
        ground_truth: Vec<PathBuf>,

        #[arg(long, value_name = "FILE")]
        csv: Option<PathBuf>,
    },

    /// Cross-check the engine against the reference implementation
    Verify {
        /// Bundle files or directories (an empty corpus passes)
        inputs: Vec<PathBuf>,

        /// Ground truth, to compare metrics as well
        #[arg(long = "gt", num_args = 1..)]
        ground_truth: Vec<PathBuf>,
    },
}

impl GlobalArgs {
    /// Preset or config file, then toggle flags, then parameter overrides.
    pub fn engine_config(&self) -> CliResult<EngineConfig> {
        let mut cfg = match (&self.config, self.preset) {
            (Some(path), _) => read_config(path)?,
            (None, Some(preset)) => preset.config(),
            (None, None) => EngineConfig::default(),
        };
        let t = &mut cfg.toggles;
        t.use_cosine_scale &= !self.no_cosine;
        t.use_dynamic_thresholds &= !self.no_dynamic;
        t.use_refinement &= !self.no_refine;
        t.use_class_selection &= !self.no_select;
        let overrides = [
            (self.alpha, &mut cfg.alpha),
            (self.tau0, &mut cfg.tau0),
            (self.tau_f, &mut cfg.tau_f),
            (self.tau_r, &mut cfg.tau_r),
            (self.lambda, &mut cfg.lambda),
        ];
        for (value, slot) in overrides {
            if let Some(v) = value {
                *slot = v;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn out_dir(&self) -> &Path {
        self.out.as_deref().unwrap_or(Path::new("."))
    }
}

fn read_config(path: &Path) -> CliResult<EngineConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Invalid(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("config {}: {e}", path.display())))
}
