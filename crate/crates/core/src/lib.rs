//! Training-free audio-visual event parsing.
//!
//! Given per-segment text-to-audio and text-to-image similarity logits for a
//! video, the engine localizes audio, visual and audio-visual events:
//!
//! 1. logits are squashed with a sigmoid and fused as
//!    `alpha * audio + (1 - alpha) * visual` (`alpha` is 1 for the audio
//!    pipeline and 0 for the visual one);
//! 2. categories whose video-level score does not exceed `tau_f` are dropped;
//! 3. every segment is thresholded against per-category thresholds that
//!    adapt to within-video label shift ([`label_shift`]);
//! 4. maximal runs of positive segments become candidates, kept only if
//!    their pooled span score exceeds `tau_r`.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common `f64` instantiation.

pub mod bundle;
pub mod config;
pub mod error;
pub mod formats;
pub mod fusion;
pub mod label_shift;
pub mod linalg;
pub mod metrics;
pub mod parser;
pub mod scalar;

pub use bundle::{
    pool_span, pool_video_level, sigmoid_scores, CategoryEntry, CategoryVocabulary, GroundTruth, Stream,
};
pub use config::{EngineConfig, PipelineOverrides, Preset, ThresholdOverride, Toggles};
pub use error::{Error, Result};
pub use formats::{load_bundle, load_ground_truth, EventRecord, GroundTruthDoc, PredictionDoc, ReportDoc, FORMAT_VERSION};
pub use fusion::{fuse, select_categories, SelectedCategories};
pub use metrics::{aggregate_report, evaluate_video, LevelPair, MetricsReport, VideoMetrics};
pub use parser::{parse_video, run_pipeline, Modality};
pub use scalar::{sigmoid, Scalar};

/// Score bundle in double precision.
pub type ScoreBundle = bundle::ScoreBundle<f64>;
/// Score bundle in single precision.
pub type ScoreBundle32 = bundle::ScoreBundle<f32>;
pub type FusedScores = fusion::FusedScores<f64>;
pub type ThresholdState = label_shift::ThresholdState<f64>;
pub type StepTrace = label_shift::StepTrace<f64>;
pub type EventCandidate = parser::EventCandidate<f64>;
pub type PipelineRun = parser::PipelineRun<f64>;
pub type ParsedVideo = parser::ParsedVideo<f64>;
pub type ParsedVideo32 = parser::ParsedVideo<f32>;
