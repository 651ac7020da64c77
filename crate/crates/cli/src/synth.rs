//! Synthetic labelled corpora.
//!
//! Ground-truth events drive the logits: cells inside an event sit at
//! `base_logit + mean_shift`, optionally lowered by a drift profile over the
//! event's duration, everything else at `base_logit`, plus Gaussian noise.
//! Visual features are unit vectors that stay close to the previous segment
//! while the active event set is unchanged.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use avparse::bundle::{CategoryEntry, CategoryVocabulary};
use avparse::formats::{save_bundle, write_document};
use avparse::{GroundTruth, GroundTruthDoc, ScoreBundle};
use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Drift {
    None,
    /// In-event score falls by `rate` per segment.
    LinearDecay { rate: f64 },
    /// In-event score falls by `drop` over the second half of the event.
    Step { drop: f64 },
}

impl FromStr for Drift {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let number = |a: Option<&str>| -> Result<f64, String> {
            let a = a.ok_or_else(|| format!("{kind} needs a value, e.g. {kind}:0.05"))?;
            a.parse().map_err(|_| format!("bad number {a:?}"))
        };
        match kind {
            "none" => Ok(Drift::None),
            "linear-decay" => Ok(Drift::LinearDecay { rate: number(arg)? }),
            "step" => Ok(Drift::Step { drop: number(arg)? }),
            _ => Err(format!("unknown drift {s:?} (none, linear-decay:RATE, step:DROP)")),
        }
    }
}

impl fmt::Display for Drift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Drift::None => write!(f, "none"),
            Drift::LinearDecay { rate } => write!(f, "linear-decay:{rate}"),
            Drift::Step { drop } => write!(f, "step:{drop}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub num_videos: usize,
    pub num_segments: usize,
    pub num_categories: usize,
    /// Inclusive range of events drawn per video.
    pub events_per_video: [usize; 2],
    /// Longest event in segments; 0 means the whole video.
    pub max_event_length: usize,
    /// Video `i` uses `drift[i % drift.len()]`.
    pub drift: Vec<Drift>,
    pub noise_std: f64,
    pub feature_dim: usize,
    /// Weight of the previous feature while the active set is unchanged.
    pub continuity: f64,
    pub seed: u64,
    pub base_logit: f64,
    pub mean_shift: f64,
    /// Relative odds of audio-only, visual-only and audio-visual events.
    pub modality_weights: [f64; 3],
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            num_videos: 10,
            num_segments: 10,
            num_categories: 10,
            events_per_video: [1, 3],
            max_event_length: 0,
            drift: vec![Drift::None],
            noise_std: 0.5,
            feature_dim: 16,
            continuity: 0.9,
            seed: 0,
            base_logit: -3.0,
            mean_shift: 6.0,
            modality_weights: [1.0, 1.0, 1.0],
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> CliResult<()> {
        let fail = |m: String| Err(CliError::Invalid(format!("synth spec: {m}")));
        if self.num_segments == 0 || self.num_categories == 0 || self.feature_dim == 0 {
            return fail("num_segments, num_categories and feature_dim must be positive".into());
        }
        if self.events_per_video[0] > self.events_per_video[1] {
            return fail(format!("events_per_video {:?} is not a range", self.events_per_video));
        }
        if self.drift.is_empty() {
            return fail("drift needs at least one profile".into());
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return fail(format!("noise_std {} must be finite and >= 0", self.noise_std));
        }
        if !(0.0..=1.0).contains(&self.continuity) {
            return fail(format!("continuity {} not in [0,1]", self.continuity));
        }
        let w = self.modality_weights;
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
            return fail(format!("modality_weights {w:?} must be non-negative with a positive sum"));
        }
        if !(self.base_logit.is_finite() && self.mean_shift.is_finite()) {
            return fail("base_logit and mean_shift must be finite".into());
        }
        Ok(())
    }

    fn max_len(&self) -> usize {
        if self.max_event_length == 0 {
            self.num_segments
        } else {
            self.max_event_length.min(self.num_segments)
        }
    }
}

/// One ground-truth event, 1-based inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthEvent {
    pub category: usize,
    pub start: usize,
    pub end: usize,
    pub audio: bool,
    pub visual: bool,
}

pub fn vocabulary(num_categories: usize) -> CategoryVocabulary {
    CategoryVocabulary::new((0..num_categories).map(|i| CategoryEntry::named(format!("class_{i:02}"))).collect())
        .expect("generated ids are unique")
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-6, 1.0 - 1e-6);
    (p / (1.0 - p)).ln()
}

fn labels(events: &[SynthEvent], t: usize, c: usize, audio: bool) -> Array2<bool> {
    let mut m = Array2::from_elem((t, c), false);
    for e in events.iter().filter(|e| if audio { e.audio } else { e.visual }) {
        for row in e.start - 1..e.end {
            m[[row, e.category]] = true;
        }
    }
    m
}

fn stream_logits<R: Rng>(gt: &Array2<bool>, spec: &SynthSpec, drift: Drift, noise: &Normal<f64>, rng: &mut R) -> Array2<f64> {
    let (t, c) = gt.dim();
    let peak = avparse::sigmoid(spec.base_logit + spec.mean_shift);
    let mut out = Array2::from_elem((t, c), spec.base_logit);
    for (col, column) in gt.axis_iter(Axis(1)).enumerate() {
        let mut row = 0;
        while row < t {
            if !column[row] {
                row += 1;
                continue;
            }
            let start = row;
            while row < t && column[row] {
                row += 1;
            }
            let len = row - start;
            for k in 0..len {
                out[[start + k, col]] = match drift {
                    Drift::None => spec.base_logit + spec.mean_shift,
                    Drift::LinearDecay { rate } => logit(peak - rate * k as f64),
                    Drift::Step { drop } if 2 * k >= len => logit(peak - drop),
                    Drift::Step { .. } => spec.base_logit + spec.mean_shift,
                };
            }
        }
    }
    out.mapv_inplace(|x| x + noise.sample(rng));
    out
}

fn unit<R: Rng>(dim: usize, rng: &mut R) -> Array1<f64> {
    loop {
        let v: Array1<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.dot(&v).sqrt();
        if n > 1e-12 {
            return v / n;
        }
    }
}

fn features<R: Rng>(active: &[Vec<usize>], spec: &SynthSpec, rng: &mut R) -> Array2<f64> {
    let mut out = Array2::zeros((active.len(), spec.feature_dim));
    let mut prev = unit(spec.feature_dim, rng);
    for (t, set) in active.iter().enumerate() {
        let fresh = unit(spec.feature_dim, rng);
        let next = if t > 0 && *set == active[t - 1] {
            let mixed = &prev * spec.continuity + &fresh * (1.0 - spec.continuity);
            let n = mixed.dot(&mixed).sqrt();
            if n > 1e-12 { mixed / n } else { fresh }
        } else {
            fresh
        };
        out.row_mut(t).assign(&next);
        prev = next;
    }
    out
}

/// Builds one video from explicit events.
pub fn render<R: Rng>(
    video_id: &str,
    events: &[SynthEvent],
    spec: &SynthSpec,
    drift: Drift,
    rng: &mut R,
) -> CliResult<(ScoreBundle, GroundTruth)> {
    let (t, c) = (spec.num_segments, spec.num_categories);
    for e in events {
        if e.category >= c || e.start < 1 || e.start > e.end || e.end > t {
            return Err(CliError::Invalid(format!("event {e:?} outside {t} segments x {c} categories")));
        }
    }
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| CliError::Invalid(format!("noise_std: {e}")))?;
    let audio_gt = labels(events, t, c, true);
    let visual_gt = labels(events, t, c, false);
    let audio = stream_logits(&audio_gt, spec, drift, &noise, rng);
    let visual = stream_logits(&visual_gt, spec, drift, &noise, rng);
    let active: Vec<Vec<usize>> = (0..t)
        .map(|row| (0..c).filter(|&col| audio_gt[[row, col]] || visual_gt[[row, col]]).collect())
        .collect();
    let feats = features(&active, spec, rng);

    let mut metadata = serde_json::Map::new();
    metadata.insert("generator".into(), "avparse-synth".into());
    metadata.insert("seed".into(), spec.seed.into());
    metadata.insert("drift".into(), drift.to_string().into());
    let vocab = vocabulary(c);
    let ids: Vec<String> = vocab.ids().map(str::to_owned).collect();
    let bundle = ScoreBundle::new(video_id, vocab, audio, visual)?
        .with_features(feats)?
        .with_metadata(metadata);
    let gt = GroundTruth::new(video_id, ids, audio_gt, visual_gt)?;
    Ok((bundle, gt))
}

fn draw_events<R: Rng>(spec: &SynthSpec, rng: &mut R) -> Vec<SynthEvent> {
    let [lo, hi] = spec.events_per_video;
    let kinds = WeightedIndex::new(spec.modality_weights).expect("validated weights");
    let n = rng.random_range(lo..=hi);
    (0..n)
        .map(|_| {
            let category = rng.random_range(0..spec.num_categories);
            let (audio, visual) = match kinds.sample(rng) {
                0 => (true, false),
                1 => (false, true),
                _ => (true, true),
            };
            let len = rng.random_range(1..=spec.max_len());
            let start = rng.random_range(1..=spec.num_segments - len + 1);
            SynthEvent { category, start, end: start + len - 1, audio, visual }
        })
        .collect()
}

/// Generates the whole corpus. Video `i` draws from its own ChaCha stream,
/// so a prefix of a larger corpus equals the smaller one.
pub fn generate(spec: &SynthSpec) -> CliResult<Vec<(ScoreBundle, GroundTruth)>> {
    spec.validate()?;
    (0..spec.num_videos)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(i as u64);
            let events = draw_events(spec, &mut rng);
            render(&format!("synth_{i:04}"), &events, spec, spec.drift[i % spec.drift.len()], &mut rng)
        })
        .collect()
}

/// Writes `bundles/<id>.json` and `gt/<id>.json` under `dir`.
pub fn write_corpus(dir: &Path, corpus: &[(ScoreBundle, GroundTruth)]) -> CliResult<()> {
    for sub in ["bundles", "gt"] {
        let path = dir.join(sub);
        std::fs::create_dir_all(&path).map_err(|source| CliError::Write { path, source })?;
    }
    for (bundle, gt) in corpus {
        let id = bundle.video_id();
        save_bundle(&dir.join("bundles").join(format!("{id}.json")), bundle)?;
        write_document(&dir.join("gt").join(format!("{id}.json")), &GroundTruthDoc::from_ground_truth(gt))?;
    }
    Ok(())
}
