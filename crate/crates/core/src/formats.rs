//! JSON documents read and written by the engine. Every document carries a
//! top-level `format_version`; optional fields are omitted rather than null.
//!
//! Non-finite numbers cannot be written as JSON numbers, so readers accept
//! them as string tokens (`"NaN"`, `"Infinity"`, `"-inf"`) and reject them
//! during validation with the exact coordinate.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bundle::{CategoryEntry, CategoryVocabulary, GroundTruth, ScoreBundle, Stream};
use crate::error::{Error, Result};
use crate::label_shift::StepTrace;
use crate::metrics::{MetricsReport, VideoMetrics};
use crate::parser::{Modality, ParsedVideo};
use crate::scalar::Scalar;

pub const FORMAT_VERSION: u32 = 1;

fn format_version() -> u32 {
    FORMAT_VERSION
}

/// Reads and parses a JSON document, checking `format_version` first.
pub fn read_document<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_document(&text, &path.display().to_string())
}

/// Parses a JSON document held in memory. `origin` names it in errors.
pub fn parse_document<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::schema(origin, e.to_string()))?;
    match value.get("format_version").map(|v| v.as_u64()) {
        Some(Some(v)) if v == u64::from(FORMAT_VERSION) => {}
        Some(Some(v)) => {
            return Err(Error::Version {
                found: v,
                expected: FORMAT_VERSION,
            })
        }
        Some(None) => return Err(Error::schema(format!("{origin}: format_version"), "must be an integer")),
        None => return Err(Error::schema(origin, "missing field `format_version`")),
    }
    serde_json::from_value(value).map_err(|e| Error::schema(origin, e.to_string()))
}

/// Serializes `doc` as pretty JSON with a trailing newline.
pub fn to_document_string<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents serialize");
    s.push('\n');
    s
}

pub fn write_document<T: Serialize>(path: &Path, doc: &T) -> Result<()> {
    fs::write(path, to_document_string(doc)).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

/// A JSON number, or a string token standing for a non-finite value.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RawNumber {
    Num(f64),
    Token(String),
}

fn number(field: &str, row: usize, col: usize, raw: &RawNumber) -> Result<f64> {
    match raw {
        RawNumber::Num(v) => Ok(*v),
        RawNumber::Token(tok) => match tok.parse::<f64>() {
            Ok(v) if !v.is_finite() => Err(Error::NonFinite {
                field: field.to_owned(),
                row,
                col,
            }),
            _ => Err(Error::schema(
                format!("{field}[{row}][{col}]"),
                format!("expected a number, found string {tok:?}"),
            )),
        },
    }
}

fn matrix(field: &str, rows: &[Vec<RawNumber>], t: usize, cols: Option<usize>) -> Result<Array2<f64>> {
    if rows.len() != t {
        return Err(Error::shape(field, format!("{t} rows"), format!("{} rows", rows.len())));
    }
    let width = cols.unwrap_or_else(|| rows.first().map_or(0, Vec::len));
    let mut out = Array2::zeros((t, width));
    for (r, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(Error::shape(
                format!("{field}[{r}]"),
                format!("{width} columns"),
                format!("{} columns", row.len()),
            ));
        }
        for (c, raw) in row.iter().enumerate() {
            out[[r, c]] = number(field, r, c, raw)?;
        }
    }
    Ok(out)
}

fn vector(field: &str, values: &[RawNumber], len: usize) -> Result<Array1<f64>> {
    if values.len() != len {
        return Err(Error::shape(field, format!("{len} entries"), format!("{} entries", values.len())));
    }
    values.iter().enumerate().map(|(c, raw)| number(field, 0, c, raw)).collect()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleIn {
    #[allow(dead_code)]
    format_version: u32,
    video_id: String,
    num_segments: usize,
    vocabulary: Vec<CategoryEntry>,
    audio_logits: Vec<Vec<RawNumber>>,
    visual_logits: Vec<Vec<RawNumber>>,
    #[serde(default)]
    video_audio_logits: Option<Vec<RawNumber>>,
    #[serde(default)]
    video_visual_logits: Option<Vec<RawNumber>>,
    #[serde(default)]
    visual_features: Option<Vec<Vec<RawNumber>>>,
    #[serde(default)]
    metadata: Option<serde_json::Map<String, serde_json::Value>>,
}

#[derive(Serialize)]
struct BundleOut<'a> {
    format_version: u32,
    video_id: &'a str,
    num_segments: usize,
    vocabulary: &'a [CategoryEntry],
    audio_logits: Vec<Vec<f64>>,
    visual_logits: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    video_audio_logits: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    video_visual_logits: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    visual_features: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    metadata: Option<&'a serde_json::Map<String, serde_json::Value>>,
}

pub(crate) fn rows<S: Scalar>(m: &Array2<S>) -> Vec<Vec<f64>> {
    m.outer_iter().map(|r| r.iter().map(|v| v.widen()).collect()).collect()
}

fn bundle_from_doc(doc: BundleIn) -> Result<ScoreBundle<f64>> {
    let vocabulary = CategoryVocabulary::new(doc.vocabulary)?;
    let (t, c) = (doc.num_segments, vocabulary.len());
    if t == 0 {
        return Err(Error::schema("num_segments", "must be >= 1"));
    }
    let audio = matrix("audio_logits", &doc.audio_logits, t, Some(c))?;
    let visual = matrix("visual_logits", &doc.visual_logits, t, Some(c))?;
    let mut bundle = ScoreBundle::new(doc.video_id, vocabulary, audio, visual)?;
    if let Some(v) = doc.video_audio_logits {
        bundle = bundle.with_video_logits(Stream::Audio, vector("video_audio_logits", &v, c)?)?;
    }
    if let Some(v) = doc.video_visual_logits {
        bundle = bundle.with_video_logits(Stream::Visual, vector("video_visual_logits", &v, c)?)?;
    }
    if let Some(f) = doc.visual_features {
        bundle = bundle.with_features(matrix("visual_features", &f, t, None)?)?;
    }
    if let Some(m) = doc.metadata {
        bundle = bundle.with_metadata(m);
    }
    Ok(bundle)
}

/// Parses and validates a score bundle held in memory.
pub fn parse_bundle(text: &str, origin: &str) -> Result<ScoreBundle<f64>> {
    bundle_from_doc(parse_document(text, origin)?)
}

/// Loads and validates a score-bundle file.
pub fn load_bundle(path: &Path) -> Result<ScoreBundle<f64>> {
    bundle_from_doc(read_document(path)?)
}

pub fn bundle_to_string<S: Scalar>(bundle: &ScoreBundle<S>) -> String {
    let out = BundleOut {
        format_version: FORMAT_VERSION,
        video_id: bundle.video_id(),
        num_segments: bundle.num_segments(),
        vocabulary: bundle.vocabulary().entries(),
        audio_logits: rows(bundle.logits(Stream::Audio)),
        visual_logits: rows(bundle.logits(Stream::Visual)),
        video_audio_logits: bundle.video_logits(Stream::Audio).map(|v| v.iter().map(|x| x.widen()).collect()),
        video_visual_logits: bundle.video_logits(Stream::Visual).map(|v| v.iter().map(|x| x.widen()).collect()),
        visual_features: bundle.visual_features().map(rows),
        metadata: bundle.metadata(),
    };
    to_document_string(&out)
}

pub fn save_bundle<S: Scalar>(path: &Path, bundle: &ScoreBundle<S>) -> Result<()> {
    fs::write(path, bundle_to_string(bundle)).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

/// Ground-truth document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthDoc {
    #[serde(default = "format_version")]
    pub format_version: u32,
    pub video_id: String,
    pub num_segments: usize,
    pub categories: Vec<String>,
    pub audio_labels: Vec<Vec<u8>>,
    pub visual_labels: Vec<Vec<u8>>,
}

fn labels(field: &str, rows: &[Vec<u8>], t: usize, c: usize) -> Result<Array2<bool>> {
    if rows.len() != t {
        return Err(Error::shape(field, format!("{t} rows"), format!("{} rows", rows.len())));
    }
    let mut out = Array2::from_elem((t, c), false);
    for (r, row) in rows.iter().enumerate() {
        if row.len() != c {
            return Err(Error::shape(format!("{field}[{r}]"), format!("{c} columns"), format!("{} columns", row.len())));
        }
        for (col, &v) in row.iter().enumerate() {
            out[[r, col]] = match v {
                0 => false,
                1 => true,
                other => {
                    return Err(Error::schema(format!("{field}[{r}][{col}]"), format!("label {other} is not 0 or 1")))
                }
            };
        }
    }
    Ok(out)
}

impl GroundTruthDoc {
    pub fn into_ground_truth(self) -> Result<GroundTruth> {
        let (t, c) = (self.num_segments, self.categories.len());
        if let Some(dup) = self.categories.iter().enumerate().find(|(i, id)| self.categories[..*i].contains(id)) {
            return Err(Error::schema(format!("categories[{}]", dup.0), format!("duplicate id {:?}", dup.1)));
        }
        let audio = labels("audio_labels", &self.audio_labels, t, c)?;
        let visual = labels("visual_labels", &self.visual_labels, t, c)?;
        GroundTruth::new(self.video_id, self.categories, audio, visual)
    }

    pub fn from_ground_truth(gt: &GroundTruth) -> Self {
        let bits = |m: &Array2<bool>| m.outer_iter().map(|r| r.iter().map(|&b| u8::from(b)).collect()).collect();
        GroundTruthDoc {
            format_version: FORMAT_VERSION,
            video_id: gt.video_id().to_owned(),
            num_segments: gt.num_segments(),
            categories: gt.categories().to_vec(),
            audio_labels: bits(gt.audio()),
            visual_labels: bits(gt.visual()),
        }
    }
}

pub fn load_ground_truth(path: &Path) -> Result<GroundTruth> {
    read_document::<GroundTruthDoc>(path)?.into_ground_truth()
}

/// One predicted event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventRecord {
    pub category_id: String,
    pub modality: Modality,
    pub start: usize,
    pub end: usize,
    pub span_score: f64,
}

/// Prediction document for one video.
///
/// `categories` and `av_scores` (fused audio-visual segment scores over the
/// full vocabulary) are optional extras used for single-label AVE scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionDoc {
    #[serde(default = "format_version")]
    pub format_version: u32,
    pub video_id: String,
    pub events: Vec<EventRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub av_scores: Option<Vec<Vec<f64>>>,
}

impl PredictionDoc {
    /// Prediction that reproduces a ground truth exactly (span scores 1).
    pub fn from_ground_truth(gt: &GroundTruth) -> Self {
        let mut events = Vec::new();
        for (modality, m) in [
            (Modality::Audio, gt.audio().clone()),
            (Modality::Visual, gt.visual().clone()),
            (Modality::AudioVisual, gt.audio_visual()),
        ] {
            for s in crate::metrics::spans_from_matrix(m.view()) {
                events.push(EventRecord {
                    category_id: gt.categories()[s.key].clone(),
                    modality,
                    start: s.start,
                    end: s.end,
                    span_score: 1.0,
                });
            }
        }
        PredictionDoc {
            format_version: FORMAT_VERSION,
            video_id: gt.video_id().to_owned(),
            events,
            categories: None,
            av_scores: None,
        }
    }
}

impl<S: Scalar> ParsedVideo<S> {
    pub fn to_prediction_doc(&self, vocabulary: &CategoryVocabulary) -> PredictionDoc {
        PredictionDoc {
            format_version: FORMAT_VERSION,
            video_id: self.video_id.clone(),
            events: self
                .events
                .iter()
                .map(|e| EventRecord {
                    category_id: e.category_id.clone(),
                    modality: e.modality,
                    start: e.start,
                    end: e.end,
                    span_score: e.span_score.widen(),
                })
                .collect(),
            categories: Some(vocabulary.ids().map(str::to_owned).collect()),
            av_scores: Some(rows(&self.run(Modality::AudioVisual).fused.segment_level)),
        }
    }

    pub fn to_trace_doc(&self) -> TraceDoc {
        let mut records = Vec::new();
        for run in &self.runs {
            for step in &run.trace {
                records.push(TraceRecord::from_step(run.modality, run.selected.ids(), step));
            }
        }
        TraceDoc {
            format_version: FORMAT_VERSION,
            video_id: self.video_id.clone(),
            records,
        }
    }
}

/// Per-segment diagnostics of one pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub modality: Modality,
    pub t: usize,
    pub categories: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub confusion: Option<Vec<Vec<f64>>>,
    pub inverse_fallback: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cosine: Option<f64>,
    pub w_hat: Vec<f64>,
    pub tau: Vec<f64>,
    pub decisions: Vec<u8>,
}

impl TraceRecord {
    fn from_step<S: Scalar>(modality: Modality, ids: &[String], step: &StepTrace<S>) -> Self {
        TraceRecord {
            modality,
            t: step.t,
            categories: ids.to_vec(),
            confusion: step.confusion.as_ref().map(rows),
            inverse_fallback: step.inverse_fallback,
            cosine: step.cosine.map(Scalar::widen),
            w_hat: step.w_hat.iter().map(|v| v.widen()).collect(),
            tau: step.tau_after.iter().map(|v| v.widen()).collect(),
            decisions: step.decisions.iter().map(|&d| u8::from(d)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceDoc {
    pub format_version: u32,
    pub video_id: String,
    pub records: Vec<TraceRecord>,
}

/// Evaluation output: corpus summary plus the per-video breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub format_version: u32,
    pub report: MetricsReport,
    pub per_video: Vec<VideoMetrics>,
}

impl ReportDoc {
    pub fn new(report: MetricsReport, per_video: Vec<VideoMetrics>) -> Self {
        ReportDoc {
            format_version: FORMAT_VERSION,
            report,
            per_video,
        }
    }
}
