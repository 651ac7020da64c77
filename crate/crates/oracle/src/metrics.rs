//! Reference metrics over plain boolean matrices.
//!
//! Value order everywhere: audio seg/event, visual seg/event, audio-visual
//! seg/event, Type@AV seg/event, Event@AV seg/event, AVE accuracy.

use crate::Event;

pub type Matrix = Vec<Vec<bool>>;

/// Cells covered by a list of events.
pub fn rasterize(events: &[Event], t_len: usize, c_len: usize) -> Matrix {
    let mut m = vec![vec![false; c_len]; t_len];
    for e in events {
        for row in m.iter_mut().take(e.end).skip(e.start - 1) {
            row[e.category] = true;
        }
    }
    m
}

fn cell_f1(pred: &[&Matrix], gt: &[&Matrix]) -> f64 {
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut fn_ = 0.0;
    for (p, g) in pred.iter().zip(gt) {
        for t in 0..p.len() {
            for c in 0..p[t].len() {
                if p[t][c] && g[t][c] {
                    tp += 1.0;
                } else if p[t][c] {
                    fp += 1.0;
                } else if g[t][c] {
                    fn_ += 1.0;
                }
            }
        }
    }
    if tp + fp + fn_ == 0.0 {
        1.0
    } else {
        2.0 * tp / (2.0 * tp + fp + fn_)
    }
}

/// Runs as (start, end, tag, category), 1-based inclusive, sorted.
fn runs(ms: &[&Matrix]) -> Vec<(usize, usize, usize, usize)> {
    let mut out = Vec::new();
    for (tag, m) in ms.iter().enumerate() {
        let t_len = m.len();
        let c_len = if t_len == 0 { 0 } else { m[0].len() };
        for c in 0..c_len {
            let mut t = 0;
            while t < t_len {
                if m[t][c] {
                    let s = t;
                    while t < t_len && m[t][c] {
                        t += 1;
                    }
                    out.push((s + 1, t, tag, c));
                } else {
                    t += 1;
                }
            }
        }
    }
    out.sort();
    out
}

fn run_f1(pred: &[&Matrix], gt: &[&Matrix]) -> f64 {
    let p = runs(pred);
    let g = runs(gt);
    if p.is_empty() && g.is_empty() {
        return 1.0;
    }
    let mut taken = vec![false; g.len()];
    let mut hits = 0.0;
    for a in &p {
        for (i, b) in g.iter().enumerate() {
            if taken[i] || a.2 != b.2 || a.3 != b.3 {
                continue;
            }
            let lo = a.0.max(b.0);
            let hi = a.1.min(b.1);
            let inter = if hi >= lo { (hi - lo + 1) as f64 } else { 0.0 };
            let union = (a.1 - a.0 + 1) as f64 + (b.1 - b.0 + 1) as f64 - inter;
            if inter / union >= 0.5 {
                taken[i] = true;
                hits += 1.0;
                break;
            }
        }
    }
    2.0 * hits / (p.len() + g.len()) as f64
}

/// Metric values of one video: F1s as fractions, AVE in percent.
pub fn video_metrics(
    pred_audio: &Matrix,
    pred_visual: &Matrix,
    pred_av: &Matrix,
    av_scores: &[Vec<f64>],
    gt_audio: &Matrix,
    gt_visual: &Matrix,
) -> [f64; 11] {
    let t_len = gt_audio.len();
    let c_len = gt_audio[0].len();
    let mut gt_av = vec![vec![false; c_len]; t_len];
    for t in 0..t_len {
        for c in 0..c_len {
            gt_av[t][c] = gt_audio[t][c] && gt_visual[t][c];
        }
    }
    let mut v = [0.0; 11];
    v[0] = cell_f1(&[pred_audio], &[gt_audio]);
    v[1] = run_f1(&[pred_audio], &[gt_audio]);
    v[2] = cell_f1(&[pred_visual], &[gt_visual]);
    v[3] = run_f1(&[pred_visual], &[gt_visual]);
    v[4] = cell_f1(&[pred_av], &[&gt_av]);
    v[5] = run_f1(&[pred_av], &[&gt_av]);
    v[6] = (v[0] + v[2] + v[4]) / 3.0;
    v[7] = (v[1] + v[3] + v[5]) / 3.0;
    v[8] = cell_f1(&[pred_audio, pred_visual], &[gt_audio, gt_visual]);
    v[9] = run_f1(&[pred_audio, pred_visual], &[gt_audio, gt_visual]);

    let mut correct = 0.0;
    for t in 0..t_len {
        let mut truth = None;
        for c in 0..c_len {
            if gt_av[t][c] {
                truth = Some(c);
                break;
            }
        }
        let mut guess: Option<usize> = None;
        for c in 0..c_len {
            if pred_av[t][c] {
                match guess {
                    Some(g) if av_scores[t][c] <= av_scores[t][g] => {}
                    _ => guess = Some(c),
                }
            }
        }
        if guess == truth {
            correct += 1.0;
        }
    }
    v[10] = 100.0 * correct / t_len as f64;
    v
}

/// Corpus means: F1s scaled to percent, AVE averaged as is.
pub fn corpus(per_video: &[[f64; 11]]) -> [f64; 11] {
    let mut out = [0.0; 11];
    for v in per_video {
        for i in 0..11 {
            out[i] += v[i];
        }
    }
    let n = per_video.len() as f64;
    for (i, x) in out.iter_mut().enumerate() {
        *x = if i < 10 { 100.0 * *x / n } else { *x / n };
    }
    out
}
