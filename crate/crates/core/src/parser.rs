//! Per-video event parsing: three modality pipelines, each fusing scores,
//! selecting relevant categories, decoding with dynamic thresholds, and
//! turning maximal positive runs into refined event candidates.

use std::fmt;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::bundle::{pool_span, ScoreBundle, Stream};
use crate::config::EngineConfig;
use crate::error::Result;
use crate::fusion::{fuse_bundle, select_categories, FusedScores, SelectedCategories};
use crate::label_shift::{run_thresholds, StepTrace};
use crate::scalar::{sigmoid, Scalar};

/// Event modality. Ordering is the output ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Audio,
    Visual,
    AudioVisual,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Audio, Modality::Visual, Modality::AudioVisual];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Audio => "audio",
            Modality::Visual => "visual",
            Modality::AudioVisual => "audio_visual",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A localized event: category, 1-based inclusive span, modality.
#[derive(Debug, Clone, PartialEq)]
pub struct EventCandidate<S> {
    pub category_id: String,
    /// Vocabulary position of `category_id`.
    pub category_index: usize,
    pub start: usize,
    pub end: usize,
    pub modality: Modality,
    /// Fused span score; zero until scored.
    pub span_score: S,
}

impl<S> EventCandidate<S> {
    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Everything one modality pipeline produced for one video.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun<S> {
    pub modality: Modality,
    pub fused: FusedScores<S>,
    pub selected: SelectedCategories,
    /// `T x |C|`, columns of unselected categories are all false.
    pub decisions: Array2<bool>,
    /// Maximal runs before refinement, span scores filled.
    pub candidates: Vec<EventCandidate<S>>,
    /// Candidates that survived refinement.
    pub events: Vec<EventCandidate<S>>,
    pub trace: Vec<StepTrace<S>>,
}

/// Parsed video: the three pipeline runs and the merged event list.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedVideo<S> {
    pub video_id: String,
    pub num_segments: usize,
    /// Ordered by (modality, category id, start).
    pub events: Vec<EventCandidate<S>>,
    /// Audio, visual and audio-visual runs, in that order.
    pub runs: Vec<PipelineRun<S>>,
}

impl<S> ParsedVideo<S> {
    pub fn run(&self, modality: Modality) -> &PipelineRun<S> {
        self.runs
            .iter()
            .find(|r| r.modality == modality)
            .expect("every modality is parsed")
    }

    pub fn decisions(&self, modality: Modality) -> &Array2<bool> {
        &self.run(modality).decisions
    }
}

/// Maximal runs of positive decisions per selected category, ordered by
/// (category, start). `decisions` is `T x K`, column `k` belonging to
/// `selected.indices()[k]`.
pub fn extract_candidates<S: Scalar>(
    decisions: ArrayView2<bool>,
    selected: &SelectedCategories,
    modality: Modality,
) -> Vec<EventCandidate<S>> {
    let mut out = Vec::new();
    for (k, column) in decisions.axis_iter(Axis(1)).enumerate() {
        let mut run_start = None;
        for (t, &on) in column.iter().chain(std::iter::once(&false)).enumerate() {
            match (on, run_start) {
                (true, None) => run_start = Some(t),
                (false, Some(start)) => {
                    out.push(EventCandidate {
                        category_id: selected.ids()[k].clone(),
                        category_index: selected.indices()[k],
                        start: start + 1,
                        end: t,
                        modality,
                        span_score: S::zero(),
                    });
                    run_start = None;
                }
                _ => {}
            }
        }
    }
    out
}

/// Fused score of a span: mean-pool logits over the span, squash, fuse.
pub fn span_score<S: Scalar>(bundle: &ScoreBundle<S>, category: usize, start: usize, end: usize, alpha: S) -> Result<S> {
    let audio = sigmoid(pool_span(bundle.logits(Stream::Audio), start, end)?[category]);
    let visual = sigmoid(pool_span(bundle.logits(Stream::Visual), start, end)?[category]);
    Ok(alpha * audio + (S::one() - alpha) * visual)
}

fn score_candidates<S: Scalar>(
    candidates: &mut [EventCandidate<S>],
    bundle: &ScoreBundle<S>,
    alpha: S,
) -> Result<()> {
    for c in candidates.iter_mut() {
        c.span_score = span_score(bundle, c.category_index, c.start, c.end, alpha)?;
    }
    Ok(())
}

/// Scores every candidate span and keeps those strictly above the
/// pipeline's `tau_r`, in stable order.
pub fn refine_candidates<S: Scalar>(
    candidates: &[EventCandidate<S>],
    bundle: &ScoreBundle<S>,
    modality: Modality,
    config: &EngineConfig,
) -> Result<Vec<EventCandidate<S>>> {
    let mut scored = candidates.to_vec();
    score_candidates(&mut scored, bundle, S::of(config.alpha_for(modality)))?;
    let tau_r = S::of(config.tau_r_for(modality));
    scored.retain(|c| c.span_score > tau_r);
    Ok(scored)
}

/// Runs one modality pipeline end to end.
pub fn run_pipeline<S: Scalar>(
    bundle: &ScoreBundle<S>,
    modality: Modality,
    config: &EngineConfig,
) -> Result<PipelineRun<S>> {
    let alpha = S::of(config.alpha_for(modality));
    let fused = fuse_bundle(bundle, alpha)?;
    let selected = if config.toggles.use_class_selection {
        select_categories(&fused.video_level, S::of(config.tau_f_for(modality)), bundle.vocabulary())
    } else {
        SelectedCategories::all(bundle.vocabulary())
    };

    let restricted = fused.segment_level.select(Axis(1), selected.indices());
    // absent features degrade to an unscaled ratio
    let features = bundle.visual_features().map(|f| f.view());
    let (restricted_decisions, trace) = run_thresholds(selected.clone(), restricted.view(), features, config)?;

    let mut decisions = Array2::from_elem((bundle.num_segments(), bundle.num_categories()), false);
    for (k, &c) in selected.indices().iter().enumerate() {
        decisions.column_mut(c).assign(&restricted_decisions.column(k));
    }

    let mut candidates = extract_candidates(restricted_decisions.view(), &selected, modality);
    score_candidates(&mut candidates, bundle, alpha)?;
    let events = if config.toggles.use_refinement {
        let tau_r = S::of(config.tau_r_for(modality));
        candidates.iter().filter(|c| c.span_score > tau_r).cloned().collect()
    } else {
        candidates.clone()
    };

    Ok(PipelineRun {
        modality,
        fused,
        selected,
        decisions,
        candidates,
        events,
        trace,
    })
}

/// Parses one video with all three pipelines.
pub fn parse_video<S: Scalar>(bundle: &ScoreBundle<S>, config: &EngineConfig) -> Result<ParsedVideo<S>> {
    config.validate()?;
    let runs = Modality::ALL
        .iter()
        .map(|&m| run_pipeline(bundle, m, config))
        .collect::<Result<Vec<_>>>()?;
    let mut events: Vec<_> = runs.iter().flat_map(|r| r.events.iter().cloned()).collect();
    events.sort_by(|a, b| {
        (a.modality, &a.category_id, a.start).cmp(&(b.modality, &b.category_id, b.start))
    });
    Ok(ParsedVideo {
        video_id: bundle.video_id().to_owned(),
        num_segments: bundle.num_segments(),
        events,
        runs,
    })
}
