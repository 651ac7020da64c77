#![allow(dead_code)]

use avparse::bundle::{CategoryVocabulary, ScoreBundle, Stream};
use avparse::{EngineConfig, Modality};
use avparse::parser::ParsedVideo;
use avparse_oracle as oracle;
use ndarray::{Array1, Array2};
use proptest::prelude::*;

pub fn vocab(c: usize) -> CategoryVocabulary {
    CategoryVocabulary::from_ids((0..c).map(|i| format!("cat{i:02}"))).unwrap()
}

pub fn to_rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Array2<f64> {
    let c = rows[0].len();
    Array2::from_shape_vec((rows.len(), c), rows.concat()).unwrap()
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

pub fn oracle_video(bundle: &ScoreBundle<f64>) -> oracle::Video {
    oracle::Video {
        audio_logits: to_rows(bundle.logits(Stream::Audio)),
        visual_logits: to_rows(bundle.logits(Stream::Visual)),
        video_audio_logits: bundle.video_logits(Stream::Audio).map(|v| v.to_vec()),
        video_visual_logits: bundle.video_logits(Stream::Visual).map(|v| v.to_vec()),
        features: bundle.visual_features().map(to_rows),
    }
}

const TOL: f64 = 1e-9;

fn close(a: f64, b: f64) -> bool {
    close_tol(a, b, TOL)
}

fn close_tol(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Two correct solvers of an ill-conditioned system agree only to about
/// `kappa * eps`, so the ratio tolerance widens past that point.
fn step_tolerance(step: &oracle::Step) -> f64 {
    let Some(m) = &step.confusion else { return TOL };
    if step.fallback {
        return TOL;
    }
    let mut reg = m.clone();
    for (i, row) in reg.iter_mut().enumerate() {
        row[i] += 1e-6;
    }
    TOL.max(8.0 * oracle::condition_number(&reg) * f64::EPSILON)
}

fn close_all(what: &str, a: &[f64], b: &[f64], tol: f64) -> Result<(), String> {
    if a.len() != b.len() {
        return Err(format!("{what}: length {} vs {}", a.len(), b.len()));
    }
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        if !close_tol(*x, *y, tol) {
            return Err(format!("{what}[{i}]: {x} vs {y}"));
        }
    }
    Ok(())
}

/// Compares every traced quantity of an engine parse with the oracle.
pub fn compare(parsed: &ParsedVideo<f64>, reference: &[oracle::Pipeline; 3]) -> Result<(), String> {
    for (m, o) in Modality::ALL.iter().zip(reference) {
        let run = parsed.run(*m);
        close_all(&format!("{m} video scores"), run.fused.video_level.as_slice().unwrap(), &o.video_scores, TOL)?;
        if run.selected.indices() != o.selected.as_slice() {
            return Err(format!("{m} selected {:?} vs {:?}", run.selected.indices(), o.selected));
        }
        let mut tau_tol = TOL;
        for (t, (step, os)) in run.trace.iter().zip(&o.steps).enumerate() {
            let at = format!("{m} t={}", t + 1);
            match (&step.confusion, &os.confusion) {
                (None, None) => {}
                (Some(a), Some(b)) => close_all(&format!("{at} confusion"), &a.iter().copied().collect::<Vec<_>>(), &b.concat(), TOL)?,
                _ => return Err(format!("{at}: confusion presence differs")),
            }
            if step.inverse_fallback != os.fallback {
                return Err(format!("{at}: fallback {} vs {}", step.inverse_fallback, os.fallback));
            }
            match (step.cosine, os.cosine) {
                (None, None) => {}
                (Some(a), Some(b)) if close(a, b) => {}
                (a, b) => return Err(format!("{at}: cosine {a:?} vs {b:?}")),
            }
            let w_tol = step_tolerance(os);
            tau_tol += w_tol;
            let w_norm = os.w_hat.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            close_all(&format!("{at} w_hat"), step.w_hat.as_slice().unwrap(), &os.w_hat, w_tol * w_norm)?;
            close_all(&format!("{at} tau"), step.tau_after.as_slice().unwrap(), &os.tau, tau_tol)?;
            if step.decisions.to_vec() != os.decisions {
                return Err(format!("{at}: decisions {:?} vs {:?}", step.decisions, os.decisions));
            }
        }
        if run.trace.len() != o.steps.len() {
            return Err(format!("{m}: {} steps vs {}", run.trace.len(), o.steps.len()));
        }
        let dec: Vec<Vec<bool>> = run.decisions.rows().into_iter().map(|r| r.to_vec()).collect();
        if dec != o.decisions {
            return Err(format!("{m}: decision matrices differ"));
        }
        for (label, mine, theirs) in [("candidates", &run.candidates, &o.candidates), ("events", &run.events, &o.events)] {
            if mine.len() != theirs.len() {
                return Err(format!("{m}: {} {label} vs {}", mine.len(), theirs.len()));
            }
            for (a, b) in mine.iter().zip(theirs) {
                if (a.category_index, a.start, a.end) != (b.category, b.start, b.end) || !close(a.span_score, b.span_score) {
                    return Err(format!("{m} {label}: {a:?} vs {b:?}"));
                }
            }
        }
    }
    Ok(())
}

/// Random bundle: logits in a band around a per-category offset, optional
/// whole-clip logits and features.
pub fn bundle_strategy(max_t: usize, max_c: usize) -> impl Strategy<Value = ScoreBundle<f64>> {
    (1..=max_t, 1..=max_c)
        .prop_flat_map(|(t, c)| {
            (
                prop::collection::vec(-3.0f64..3.0, c),
                prop::collection::vec(-3.0f64..3.0, t * c),
                prop::collection::vec(-3.0f64..3.0, t * c),
                prop::option::of(prop::collection::vec(-3.0f64..3.0, 2 * c)),
                prop::option::of(prop::collection::vec(-1.0f64..1.0, t * 4)),
            )
                .prop_map(move |(offset, a, v, clip, feats)| {
                    let shift = |m: Vec<f64>| {
                        Array2::from_shape_fn((t, c), |(i, j)| m[i * c + j] + offset[j])
                    };
                    let mut b = ScoreBundle::new("vid", vocab(c), shift(a), shift(v)).unwrap();
                    if let Some(clip) = clip {
                        b = b
                            .with_video_logits(Stream::Audio, Array1::from(clip[..c].to_vec()))
                            .unwrap()
                            .with_video_logits(Stream::Visual, Array1::from(clip[c..].to_vec()))
                            .unwrap();
                    }
                    if let Some(f) = feats {
                        b = b.with_features(Array2::from_shape_vec((t, 4), f).unwrap()).unwrap();
                    }
                    b
                })
        })
}

pub fn toggles_strategy() -> impl Strategy<Value = EngineConfig> {
    (any::<[bool; 4]>(), prop::sample::select(vec![0.0, 1.0, 2.5])).prop_map(|(t, lambda)| {
        let mut cfg = EngineConfig::default();
        cfg.toggles.use_cosine_scale = t[0];
        cfg.toggles.use_dynamic_thresholds = t[1];
        cfg.toggles.use_refinement = t[2];
        cfg.toggles.use_class_selection = t[3];
        cfg.lambda = lambda;
        cfg
    })
}
