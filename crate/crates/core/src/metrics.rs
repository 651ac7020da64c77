//! Segment- and event-level F1 for audio, visual and audio-visual events,
//! their Type@AV / Event@AV summaries, and per-segment AVE accuracy.
//!
//! Conventions:
//! - F1 is micro-averaged over the cells (or events) of one video, then the
//!   per-video values are averaged without weights.
//! - A video whose prediction and ground truth are both empty scores 1.
//! - Events match greedily in start order at IoU >= 0.5, one-to-one, within
//!   the same category.
//! - Event@AV pools the audio and visual cells (or events) of a video with
//!   modality-tagged categories.

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::bundle::GroundTruth;
use crate::error::{Error, Result};
use crate::formats::PredictionDoc;
use crate::parser::Modality;
use crate::scalar::Scalar;

/// Default IoU needed for two events to match.
pub const MIOU_THRESHOLD: f64 = 0.5;

/// A 1-based inclusive interval tagged with a category key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Span<K> {
    pub key: K,
    pub start: usize,
    pub end: usize,
}

impl<K> Span<K> {
    fn iou(&self, other: &Span<K>) -> f64 {
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        let inter = if hi >= lo { hi - lo + 1 } else { 0 };
        let union = (self.end + 1 - self.start) + (other.end + 1 - other.start) - inter;
        inter as f64 / union as f64
    }
}

/// Maximal runs of each column of a binary `T x C` matrix, keyed by column.
pub fn spans_from_matrix(m: ArrayView2<bool>) -> Vec<Span<usize>> {
    let mut out = Vec::new();
    for (c, column) in m.axis_iter(Axis(1)).enumerate() {
        let mut start = None;
        for (t, &on) in column.iter().chain(std::iter::once(&false)).enumerate() {
            match (on, start) {
                (true, None) => start = Some(t + 1),
                (false, Some(s)) => {
                    out.push(Span { key: c, start: s, end: t });
                    start = None;
                }
                _ => {}
            }
        }
    }
    out
}

fn f1_from_counts(tp: usize, fp: usize, fn_: usize) -> f64 {
    if tp + fp + fn_ == 0 {
        1.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    }
}

/// Micro-F1 over all cells; 1 when both matrices are all-zero.
pub fn segment_f1(pred: ArrayView2<bool>, gt: ArrayView2<bool>) -> Result<f64> {
    if pred.dim() != gt.dim() {
        return Err(Error::Dimension(format!(
            "prediction {:?} vs ground truth {:?}",
            pred.dim(),
            gt.dim()
        )));
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (&p, &g) in pred.iter().zip(gt.iter()) {
        match (p, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(f1_from_counts(tp, fp, fn_))
}

/// Event F1 with greedy one-to-one matching at `IoU >= miou_threshold`.
///
/// Predictions are visited in (start, end) order; each takes the earliest
/// unmatched ground-truth event of its category that overlaps enough.
pub fn event_f1<K: Ord + Clone>(pred: &[Span<K>], gt: &[Span<K>], miou_threshold: f64) -> f64 {
    if pred.is_empty() && gt.is_empty() {
        return 1.0;
    }
    let mut pred: Vec<&Span<K>> = pred.iter().collect();
    pred.sort_by(|a, b| (a.start, a.end, &a.key).cmp(&(b.start, b.end, &b.key)));
    let mut gt: Vec<&Span<K>> = gt.iter().collect();
    gt.sort_by(|a, b| (a.start, a.end, &a.key).cmp(&(b.start, b.end, &b.key)));

    let mut used = vec![false; gt.len()];
    let mut matches = 0usize;
    for p in pred.iter() {
        let hit = gt
            .iter()
            .enumerate()
            .find(|(i, g)| !used[*i] && g.key == p.key && p.iou(g) >= miou_threshold);
        if let Some((i, _)) = hit {
            used[i] = true;
            matches += 1;
        }
    }
    2.0 * matches as f64 / (pred.len() + gt.len()) as f64
}

/// Per-segment accuracy in percent.
///
/// The predicted label of a segment is the highest-scoring category among
/// those with a positive decision (lowest index on ties), or background
/// (`None`) when there is none.
pub fn ave_accuracy<S: Scalar>(
    pred_scores: ArrayView2<S>,
    decisions: ArrayView2<bool>,
    gt_labels: &[Option<usize>],
) -> Result<f64> {
    if pred_scores.dim() != decisions.dim() || decisions.nrows() != gt_labels.len() {
        return Err(Error::Dimension(format!(
            "scores {:?}, decisions {:?}, {} labels",
            pred_scores.dim(),
            decisions.dim(),
            gt_labels.len()
        )));
    }
    if gt_labels.is_empty() {
        return Err(Error::Dimension("no segments to score".into()));
    }
    let correct = gt_labels
        .iter()
        .enumerate()
        .filter(|&(t, gt)| predicted_label(pred_scores, decisions, t) == *gt)
        .count();
    Ok(100.0 * correct as f64 / gt_labels.len() as f64)
}

fn predicted_label<S: Scalar>(scores: ArrayView2<S>, decisions: ArrayView2<bool>, t: usize) -> Option<usize> {
    let mut best: Option<(usize, S)> = None;
    for (c, &on) in decisions.row(t).iter().enumerate() {
        let s = scores[[t, c]];
        if on && best.is_none_or(|(_, b)| s > b) {
            best = Some((c, s));
        }
    }
    best.map(|(c, _)| c)
}

/// Single-label view of the audio-visual ground truth: the lowest-index
/// active category of each segment, or background.
pub fn ave_labels(audio_visual: ArrayView2<bool>) -> Vec<Option<usize>> {
    audio_visual
        .axis_iter(Axis(0))
        .map(|row| row.iter().position(|&on| on))
        .collect()
}

/// Segment-level and event-level value of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelPair {
    pub segment: f64,
    pub event: f64,
}

impl LevelPair {
    fn mean3(a: LevelPair, b: LevelPair, c: LevelPair) -> LevelPair {
        LevelPair {
            segment: (a.segment + b.segment + c.segment) / 3.0,
            event: (a.event + b.event + c.event) / 3.0,
        }
    }
}

/// Per-video metric values, as fractions in `[0, 1]` (AVE in percent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMetrics {
    pub video_id: String,
    pub audio: LevelPair,
    pub visual: LevelPair,
    pub audio_visual: LevelPair,
    pub type_at_av: LevelPair,
    pub event_at_av: LevelPair,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ave_accuracy: Option<f64>,
}

/// Corpus-level summary in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub audio: LevelPair,
    pub visual: LevelPair,
    pub audio_visual: LevelPair,
    pub type_at_av: LevelPair,
    pub event_at_av: LevelPair,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ave_accuracy: Option<f64>,
    pub num_videos: usize,
}

impl MetricsReport {
    /// Names accepted by [`MetricsReport::get`].
    pub const KEYS: [&'static str; 11] = [
        "audio_segment",
        "audio_event",
        "visual_segment",
        "visual_event",
        "audio_visual_segment",
        "audio_visual_event",
        "type_at_av_segment",
        "type_at_av_event",
        "event_at_av_segment",
        "event_at_av_event",
        "ave_accuracy",
    ];

    pub fn get(&self, key: &str) -> Option<f64> {
        let pair = |p: &LevelPair, level: &str| match level {
            "segment" => Some(p.segment),
            "event" => Some(p.event),
            _ => None,
        };
        if key == "ave_accuracy" {
            return self.ave_accuracy;
        }
        let (name, level) = key.rsplit_once('_')?;
        match name {
            "audio" => pair(&self.audio, level),
            "visual" => pair(&self.visual, level),
            "audio_visual" => pair(&self.audio_visual, level),
            "type_at_av" => pair(&self.type_at_av, level),
            "event_at_av" => pair(&self.event_at_av, level),
            _ => None,
        }
    }

    /// The ten AVVP values in [`MetricsReport::KEYS`] order.
    pub fn avvp_values(&self) -> [f64; 10] {
        let mut out = [0.0; 10];
        for (slot, key) in out.iter_mut().zip(Self::KEYS.iter()) {
            *slot = self.get(key).expect("AVVP keys are always present");
        }
        out
    }
}

/// Averages per-video values into a report.
pub fn aggregate_report(per_video: &[VideoMetrics]) -> Result<MetricsReport> {
    if per_video.is_empty() {
        return Err(Error::Dimension("cannot aggregate an empty corpus".into()));
    }
    let n = per_video.len() as f64;
    let mean = |f: &dyn Fn(&VideoMetrics) -> LevelPair| {
        let (s, e) = per_video.iter().fold((0.0, 0.0), |(s, e), v| {
            let p = f(v);
            (s + p.segment, e + p.event)
        });
        LevelPair {
            segment: 100.0 * s / n,
            event: 100.0 * e / n,
        }
    };
    let ave: Option<Vec<f64>> = per_video.iter().map(|v| v.ave_accuracy).collect();
    Ok(MetricsReport {
        audio: mean(&|v| v.audio),
        visual: mean(&|v| v.visual),
        audio_visual: mean(&|v| v.audio_visual),
        type_at_av: mean(&|v| v.type_at_av),
        event_at_av: mean(&|v| v.event_at_av),
        ave_accuracy: ave.map(|a| a.iter().sum::<f64>() / n),
        num_videos: per_video.len(),
    })
}

/// Predicted cells, events and scores of one video rasterized against a
/// ground-truth vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterizedPrediction {
    pub audio: Array2<bool>,
    pub visual: Array2<bool>,
    pub audio_visual: Array2<bool>,
    /// Scores used to break multi-label segments into one AVE label.
    pub av_scores: Array2<f64>,
}

impl RasterizedPrediction {
    pub fn from_doc(pred: &PredictionDoc, gt: &GroundTruth) -> Result<Self> {
        let (t, c) = (gt.num_segments(), gt.categories().len());
        let mut out = RasterizedPrediction {
            audio: Array2::from_elem((t, c), false),
            visual: Array2::from_elem((t, c), false),
            audio_visual: Array2::from_elem((t, c), false),
            av_scores: Array2::zeros((t, c)),
        };
        let explicit_scores = match (&pred.av_scores, &pred.categories) {
            (Some(scores), Some(categories)) => Some((scores, categories)),
            (Some(_), None) => {
                return Err(Error::schema(&pred.video_id, "av_scores requires categories"));
            }
            _ => None,
        };
        for (i, e) in pred.events.iter().enumerate() {
            let col = gt.categories().iter().position(|id| *id == e.category_id).ok_or_else(|| {
                Error::schema(
                    format!("{}: events[{i}].category_id", pred.video_id),
                    format!("unknown category {:?}", e.category_id),
                )
            })?;
            if e.start < 1 || e.start > e.end || e.end > t {
                return Err(Error::OutOfRange(format!(
                    "{}: events[{i}] span {}..={} outside 1..={t}",
                    pred.video_id, e.start, e.end
                )));
            }
            let target = match e.modality {
                Modality::Audio => &mut out.audio,
                Modality::Visual => &mut out.visual,
                Modality::AudioVisual => &mut out.audio_visual,
            };
            for row in e.start - 1..e.end {
                target[[row, col]] = true;
                if e.modality == Modality::AudioVisual && explicit_scores.is_none() {
                    out.av_scores[[row, col]] = e.span_score;
                }
            }
        }
        if let Some((scores, categories)) = explicit_scores {
            if scores.len() != t {
                return Err(Error::shape("av_scores", format!("{t} rows"), format!("{} rows", scores.len())));
            }
            for (gt_col, id) in gt.categories().iter().enumerate() {
                let Some(src) = categories.iter().position(|c| c == id) else {
                    continue;
                };
                for (row, values) in scores.iter().enumerate() {
                    let v = *values.get(src).ok_or_else(|| Error::shape("av_scores", categories.len(), values.len()))?;
                    out.av_scores[[row, gt_col]] = v;
                }
            }
        }
        Ok(out)
    }
}

/// Scores one video's prediction against its ground truth.
pub fn evaluate_video(pred: &PredictionDoc, gt: &GroundTruth) -> Result<VideoMetrics> {
    if pred.video_id != gt.video_id() {
        return Err(Error::schema(
            "video_id",
            format!("prediction {:?} paired with ground truth {:?}", pred.video_id, gt.video_id()),
        ));
    }
    let raster = RasterizedPrediction::from_doc(pred, gt)?;
    let gt_av = gt.audio_visual();
    let pair = |p: &Array2<bool>, g: &Array2<bool>| -> Result<LevelPair> {
        Ok(LevelPair {
            segment: segment_f1(p.view(), g.view())?,
            event: event_f1(&spans_from_matrix(p.view()), &spans_from_matrix(g.view()), MIOU_THRESHOLD),
        })
    };
    let audio = pair(&raster.audio, gt.audio())?;
    let visual = pair(&raster.visual, gt.visual())?;
    let audio_visual = pair(&raster.audio_visual, &gt_av)?;

    let joint_pred = concatenate(Axis(1), &[raster.audio.view(), raster.visual.view()]).expect("same rows");
    let joint_gt = concatenate(Axis(1), &[gt.audio().view(), gt.visual().view()]).expect("same rows");
    let tagged = |a: &Array2<bool>, v: &Array2<bool>| {
        let mut spans: Vec<Span<(u8, usize)>> = Vec::new();
        for (tag, m) in [(0u8, a), (1u8, v)] {
            spans.extend(spans_from_matrix(m.view()).into_iter().map(|s| Span {
                key: (tag, s.key),
                start: s.start,
                end: s.end,
            }));
        }
        spans
    };
    let event_at_av = LevelPair {
        segment: segment_f1(joint_pred.view(), joint_gt.view())?,
        event: event_f1(
            &tagged(&raster.audio, &raster.visual),
            &tagged(gt.audio(), gt.visual()),
            MIOU_THRESHOLD,
        ),
    };
    let ave = ave_accuracy(raster.av_scores.view(), raster.audio_visual.view(), &ave_labels(gt_av.view()))?;

    Ok(VideoMetrics {
        video_id: gt.video_id().to_owned(),
        audio,
        visual,
        audio_visual,
        type_at_av: LevelPair::mean3(audio, visual, audio_visual),
        event_at_av,
        ave_accuracy: Some(ave),
    })
}
