//! Engine versus reference-implementation comparison.

use std::collections::BTreeMap;

use avparse::bundle::Stream;
use avparse::{aggregate_report, evaluate_video, parse_video, EngineConfig, GroundTruth, MetricsReport, Modality, ParsedVideo, ScoreBundle};
use avparse_oracle as oracle;
use ndarray::Array2;
use rayon::prelude::*;

use crate::error::CliResult;

/// Relative tolerance for every numeric quantity.
pub const TOLERANCE: f64 = 1e-9;

/// Signature of the reference parser, swappable for negative controls.
pub type OracleFn = dyn Fn(&oracle::Video, &oracle::Params) -> [oracle::Pipeline; 3] + Sync;

#[derive(Debug, Clone, PartialEq)]
pub struct VideoCheck {
    pub video_id: String,
    /// First disagreement found, if any.
    pub mismatch: Option<String>,
    pub steps: usize,
    /// Steps whose confusion matrix was too ill-conditioned for a flat tolerance.
    pub widened: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub videos: Vec<VideoCheck>,
    pub corpus_mismatch: Option<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.corpus_mismatch.is_none() && self.videos.iter().all(|v| v.mismatch.is_none())
    }

    pub fn steps(&self) -> usize {
        self.videos.iter().map(|v| v.steps).sum()
    }

    pub fn widened(&self) -> usize {
        self.videos.iter().map(|v| v.widened).sum()
    }

    pub fn failures(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .videos
            .iter()
            .filter_map(|v| v.mismatch.as_ref().map(|m| format!("{}: {m}", v.video_id)))
            .collect();
        out.extend(self.corpus_mismatch.clone());
        out
    }
}

pub fn params(config: &EngineConfig) -> oracle::Params {
    let per = |f: &dyn Fn(Modality) -> f64| [f(Modality::Audio), f(Modality::Visual), f(Modality::AudioVisual)];
    oracle::Params {
        alpha: config.alpha,
        tau0: config.tau0,
        tau_f: per(&|m| config.tau_f_for(m)),
        tau_r: per(&|m| config.tau_r_for(m)),
        lambda: config.lambda,
        epsilon: config.epsilon_reg,
        clamp_lo: config.threshold_clamp[0],
        clamp_hi: config.threshold_clamp[1],
        cosine: config.toggles.use_cosine_scale,
        dynamic: config.toggles.use_dynamic_thresholds,
        refine: config.toggles.use_refinement,
        select: config.toggles.use_class_selection,
    }
}

fn rows<T: Clone>(m: &Array2<T>) -> Vec<Vec<T>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

pub fn oracle_video(bundle: &ScoreBundle) -> oracle::Video {
    oracle::Video {
        audio_logits: rows(bundle.logits(Stream::Audio)),
        visual_logits: rows(bundle.logits(Stream::Visual)),
        video_audio_logits: bundle.video_logits(Stream::Audio).map(|v| v.to_vec()),
        video_visual_logits: bundle.video_logits(Stream::Visual).map(|v| v.to_vec()),
        features: bundle.visual_features().map(rows),
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn check_all<'a>(what: &str, a: impl IntoIterator<Item = &'a f64>, b: &[f64], tol: f64) -> Result<(), String> {
    let a: Vec<f64> = a.into_iter().copied().collect();
    if a.len() != b.len() {
        return Err(format!("{what}: length {} vs {}", a.len(), b.len()));
    }
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        if !close(*x, *y, tol) {
            return Err(format!("{what}[{i}]: engine {x} vs oracle {y}"));
        }
    }
    Ok(())
}

/// Two correct solvers agree on an ill-conditioned system only to about
/// `kappa * eps`; past that point the ratio tolerance follows the condition number.
fn ratio_tolerance(step: &oracle::Step, epsilon: f64) -> f64 {
    match &step.confusion {
        Some(m) if !step.fallback => {
            let mut reg = m.clone();
            for (i, row) in reg.iter_mut().enumerate() {
                row[i] += epsilon;
            }
            TOLERANCE.max(8.0 * oracle::condition_number(&reg) * f64::EPSILON)
        }
        _ => TOLERANCE,
    }
}

/// Compares every step trace, decision matrix, candidate and event.
/// Returns the number of steps that needed a widened tolerance.
pub fn compare_parse(parsed: &ParsedVideo, reference: &[oracle::Pipeline; 3], epsilon: f64) -> Result<usize, String> {
    let mut widened = 0;
    for (m, o) in Modality::ALL.iter().zip(reference) {
        let run = parsed.run(*m);
        check_all(&format!("{m} video scores"), run.fused.video_level.iter(), &o.video_scores, TOLERANCE)?;
        if run.selected.indices() != o.selected.as_slice() {
            return Err(format!("{m}: selected {:?} vs {:?}", run.selected.indices(), o.selected));
        }
        if run.trace.len() != o.steps.len() {
            return Err(format!("{m}: {} steps vs {}", run.trace.len(), o.steps.len()));
        }
        let mut tau_tol = TOLERANCE;
        for (step, os) in run.trace.iter().zip(&o.steps) {
            let at = format!("{m} t={}", step.t);
            match (&step.confusion, &os.confusion) {
                (None, None) => {}
                (Some(a), Some(b)) => check_all(&format!("{at} M"), a.iter(), &b.concat(), TOLERANCE)?,
                _ => return Err(format!("{at}: confusion present on one side only")),
            }
            if step.inverse_fallback != os.fallback {
                return Err(format!("{at}: fallback {} vs {}", step.inverse_fallback, os.fallback));
            }
            match (step.cosine, os.cosine) {
                (None, None) => {}
                (Some(a), Some(b)) if close(a, b, TOLERANCE) => {}
                (a, b) => return Err(format!("{at}: cosine {a:?} vs {b:?}")),
            }
            let w_tol = ratio_tolerance(os, epsilon);
            if w_tol > TOLERANCE {
                widened += 1;
            }
            tau_tol += w_tol;
            let w_norm = os.w_hat.iter().fold(1.0f64, |acc, x| acc.max(x.abs()));
            check_all(&format!("{at} w_hat"), step.w_hat.iter(), &os.w_hat, w_tol * w_norm)?;
            check_all(&format!("{at} tau"), step.tau_after.iter(), &os.tau, tau_tol)?;
            if step.decisions.to_vec() != os.decisions {
                return Err(format!("{at}: decisions {:?} vs {:?}", step.decisions.to_vec(), os.decisions));
            }
        }
        if rows(&run.decisions) != o.decisions {
            return Err(format!("{m}: decision matrices differ"));
        }
        for (label, mine, theirs) in [("candidates", &run.candidates, &o.candidates), ("events", &run.events, &o.events)] {
            if mine.len() != theirs.len() {
                return Err(format!("{m}: {} {label} vs {}", mine.len(), theirs.len()));
            }
            for (a, b) in mine.iter().zip(theirs) {
                if (a.category_index, a.start, a.end) != (b.category, b.start, b.end) {
                    return Err(format!(
                        "{m} {label}: ({}, {}..={}) vs ({}, {}..={})",
                        a.category_index, a.start, a.end, b.category, b.start, b.end
                    ));
                }
                if !close(a.span_score, b.span_score, TOLERANCE) {
                    return Err(format!("{m} {label} span score {} vs {}", a.span_score, b.span_score));
                }
            }
        }
    }
    Ok(widened)
}

/// Per-video metrics of the oracle's refined events.
pub fn oracle_metrics(reference: &[oracle::Pipeline; 3], gt: &GroundTruth) -> [f64; 11] {
    let (t, c) = (gt.num_segments(), gt.categories().len());
    let raster = |i: usize| oracle::metrics::rasterize(&reference[i].events, t, c);
    oracle::metrics::video_metrics(
        &raster(0),
        &raster(1),
        &raster(2),
        &reference[2].segment_scores,
        &rows(gt.audio()),
        &rows(gt.visual()),
    )
}

fn compare_metrics(report: &MetricsReport, expected: &[f64; 11]) -> Result<(), String> {
    for (key, want) in MetricsReport::KEYS.iter().zip(expected) {
        let got = report.get(key).ok_or_else(|| format!("{key} missing"))?;
        if !close(got, *want, TOLERANCE) {
            return Err(format!("{key}: engine {got} vs oracle {want}"));
        }
    }
    Ok(())
}

/// Runs engine and oracle on every bundle (in parallel on the current rayon
/// pool) and compares traces, outputs and, when ground truth is given, metrics.
/// Engine metrics of one video next to the oracle's.
type Scored = (avparse::VideoMetrics, [f64; 11]);

pub fn verify_corpus(
    bundles: &[ScoreBundle],
    ground_truth: Option<&BTreeMap<String, GroundTruth>>,
    config: &EngineConfig,
    reference: &OracleFn,
) -> CliResult<VerifyReport> {
    config.validate()?;
    let p = params(config);
    let per_video: Vec<(VideoCheck, Option<Scored>)> = bundles
        .par_iter()
        .map(|bundle| -> CliResult<_> {
            let parsed = parse_video(bundle, config)?;
            let expected = reference(&oracle_video(bundle), &p);
            let mut check = VideoCheck {
                video_id: bundle.video_id().to_owned(),
                mismatch: None,
                steps: parsed.runs.iter().map(|r| r.trace.len()).sum(),
                widened: 0,
            };
            match compare_parse(&parsed, &expected, config.epsilon_reg) {
                Ok(w) => check.widened = w,
                Err(e) => check.mismatch = Some(e),
            }
            let metrics = match ground_truth.and_then(|g| g.get(bundle.video_id())) {
                Some(gt) => {
                    let mine = evaluate_video(&parsed.to_prediction_doc(bundle.vocabulary()), gt)?;
                    let theirs = oracle_metrics(&expected, gt);
                    if check.mismatch.is_none() {
                        let single = aggregate_report(std::slice::from_ref(&mine))?;
                        check.mismatch = compare_metrics(&single, &oracle::metrics::corpus(&[theirs])).err();
                    }
                    Some((mine, theirs))
                }
                None => None,
            };
            Ok((check, metrics))
        })
        .collect::<CliResult<_>>()?;

    let mut report = VerifyReport::default();
    let mut mine = Vec::new();
    let mut theirs = Vec::new();
    for (check, metrics) in per_video {
        report.videos.push(check);
        if let Some((a, b)) = metrics {
            mine.push(a);
            theirs.push(b);
        }
    }
    if !mine.is_empty() {
        let corpus = aggregate_report(&mine)?;
        report.corpus_mismatch = compare_metrics(&corpus, &oracle::metrics::corpus(&theirs))
            .err()
            .map(|e| format!("corpus metrics: {e}"));
    }
    Ok(report)
}
