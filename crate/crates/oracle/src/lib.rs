//! Deliberately naive reference implementation of the event parser and its
//! metrics, written with plain loops over `Vec<Vec<f64>>` and sharing no code
//! with the engine. Used to cross-check engine traces and outputs.
//!
//! Matrix inverses use Gauss-Jordan elimination; the pseudo-inverse uses a
//! rank factorization `A = B C` from the reduced row echelon form,
//! `A+ = C^T (C C^T)^-1 (B^T B)^-1 B^T`.

#![allow(clippy::needless_range_loop)]

pub mod metrics;

/// Pivot magnitude treated as zero.
pub const PIVOT_TOL: f64 = 1e-12;

/// Engine parameters, flattened.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub alpha: f64,
    pub tau0: f64,
    /// Per pipeline: audio, visual, audio-visual.
    pub tau_f: [f64; 3],
    pub tau_r: [f64; 3],
    pub lambda: f64,
    pub epsilon: f64,
    pub clamp_lo: f64,
    pub clamp_hi: f64,
    pub cosine: bool,
    pub dynamic: bool,
    pub refine: bool,
    pub select: bool,
}

/// Raw inputs of one video.
#[derive(Debug, Clone, PartialEq)]
pub struct Video {
    pub audio_logits: Vec<Vec<f64>>,
    pub visual_logits: Vec<Vec<f64>>,
    pub video_audio_logits: Option<Vec<f64>>,
    pub video_visual_logits: Option<Vec<f64>>,
    pub features: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub confusion: Option<Vec<Vec<f64>>>,
    pub fallback: bool,
    pub cosine: Option<f64>,
    pub w_hat: Vec<f64>,
    pub decisions: Vec<bool>,
    pub tau: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub category: usize,
    pub start: usize,
    pub end: usize,
    pub span_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub selected: Vec<usize>,
    pub video_scores: Vec<f64>,
    /// `T x C` fused segment scores over the whole vocabulary.
    pub segment_scores: Vec<Vec<f64>>,
    pub steps: Vec<Step>,
    /// `T x C`.
    pub decisions: Vec<Vec<bool>>,
    pub candidates: Vec<Event>,
    pub events: Vec<Event>,
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn column_mean(m: &[Vec<f64>], c: usize, from: usize, to: usize) -> f64 {
    let mut total = 0.0;
    for row in m.iter().take(to).skip(from) {
        total += row[c];
    }
    total / (to - from) as f64
}

/// Inverse by Gauss-Jordan elimination with partial pivoting, or `None`
/// when a pivot falls below [`PIVOT_TOL`].
pub fn gauss_jordan_inverse(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut aug: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        let mut row = a[i].clone();
        for j in 0..n {
            row.push(if i == j { 1.0 } else { 0.0 });
        }
        aug.push(row);
    }
    for col in 0..n {
        let mut best = col;
        for r in col + 1..n {
            if aug[r][col].abs() > aug[best][col].abs() {
                best = r;
            }
        }
        if aug[best][col].abs() < PIVOT_TOL {
            return None;
        }
        aug.swap(col, best);
        let p = aug[col][col];
        for j in 0..2 * n {
            aug[col][j] /= p;
        }
        for r in 0..n {
            if r != col {
                let f = aug[r][col];
                if f != 0.0 {
                    for j in 0..2 * n {
                        aug[r][j] -= f * aug[col][j];
                    }
                }
            }
        }
    }
    Some(aug.into_iter().map(|row| row[n..].to_vec()).collect())
}

/// True when forward elimination with partial pivoting meets a pivot below tolerance.
pub fn is_singular(a: &[Vec<f64>]) -> bool {
    let n = a.len();
    let mut m = a.to_vec();
    for col in 0..n {
        let mut best = col;
        for r in col + 1..n {
            if m[r][col].abs() > m[best][col].abs() {
                best = r;
            }
        }
        if m[best][col].abs() < PIVOT_TOL {
            return true;
        }
        m.swap(col, best);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for j in col..n {
                m[r][j] -= f * m[col][j];
            }
        }
    }
    false
}

/// One-norm condition number, infinite when elimination breaks down.
pub fn condition_number(a: &[Vec<f64>]) -> f64 {
    let norm = |m: &[Vec<f64>]| {
        let mut best = 0.0f64;
        for j in 0..m.len() {
            let mut s = 0.0;
            for row in m {
                s += row[j].abs();
            }
            best = best.max(s);
        }
        best
    };
    match gauss_jordan_inverse(a) {
        Some(inv) => norm(a) * norm(&inv),
        None => f64::INFINITY,
    }
}

fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut out = vec![vec![0.0; a.len()]; a[0].len()];
    for i in 0..a.len() {
        for j in 0..a[0].len() {
            out[j][i] = a[i][j];
        }
    }
    out
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; b[0].len()]; a.len()];
    for i in 0..a.len() {
        for j in 0..b[0].len() {
            let mut s = 0.0;
            for k in 0..b.len() {
                s += a[i][k] * b[k][j];
            }
            out[i][j] = s;
        }
    }
    out
}

/// Pseudo-inverse of a square matrix through a rank factorization.
pub fn rank_factor_pinv(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut r = a.to_vec();
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..n {
        if row == n {
            break;
        }
        let mut best = row;
        for i in row + 1..n {
            if r[i][col].abs() > r[best][col].abs() {
                best = i;
            }
        }
        if r[best][col].abs() < PIVOT_TOL {
            continue;
        }
        r.swap(row, best);
        let p = r[row][col];
        for j in 0..n {
            r[row][j] /= p;
        }
        for i in 0..n {
            if i != row {
                let f = r[i][col];
                for j in 0..n {
                    r[i][j] -= f * r[row][j];
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    let rank = pivots.len();
    if rank == 0 {
        return vec![vec![0.0; n]; n];
    }
    let b: Vec<Vec<f64>> = (0..n).map(|i| pivots.iter().map(|&c| a[i][c]).collect()).collect();
    let c: Vec<Vec<f64>> = r[..rank].to_vec();
    let bt = transpose(&b);
    let ct = transpose(&c);
    let btb_inv = gauss_jordan_inverse(&matmul(&bt, &b)).expect("full column rank");
    let cct_inv = gauss_jordan_inverse(&matmul(&c, &ct)).expect("full row rank");
    matmul(&matmul(&ct, &cct_inv), &matmul(&btb_inv, &bt))
}

fn cosine(x: &[f64], y: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut nx = 0.0;
    let mut ny = 0.0;
    for i in 0..x.len() {
        dot += x[i] * y[i];
        nx += x[i] * x[i];
        ny += y[i] * y[i];
    }
    if nx == 0.0 || ny == 0.0 {
        0.0
    } else {
        dot / (nx.sqrt() * ny.sqrt())
    }
}

fn run_one(video: &Video, p: &Params, pipeline: usize) -> Pipeline {
    let alpha = match pipeline {
        0 => 1.0,
        1 => 0.0,
        _ => p.alpha,
    };
    let t_len = video.audio_logits.len();
    let c_len = video.audio_logits[0].len();

    let mut video_scores = Vec::new();
    for c in 0..c_len {
        let a = match &video.video_audio_logits {
            Some(v) => v[c],
            None => column_mean(&video.audio_logits, c, 0, t_len),
        };
        let v = match &video.video_visual_logits {
            Some(v) => v[c],
            None => column_mean(&video.visual_logits, c, 0, t_len),
        };
        video_scores.push(alpha * sig(a) + (1.0 - alpha) * sig(v));
    }
    let mut segment_scores = Vec::new();
    for t in 0..t_len {
        let mut row = Vec::new();
        for c in 0..c_len {
            row.push(alpha * sig(video.audio_logits[t][c]) + (1.0 - alpha) * sig(video.visual_logits[t][c]));
        }
        segment_scores.push(row);
    }

    let mut selected = Vec::new();
    for (c, &s) in video_scores.iter().enumerate() {
        if !p.select || s > p.tau_f[pipeline] {
            selected.push(c);
        }
    }
    let k = selected.len();

    let mut tau = vec![p.tau0; k];
    let mut z = vec![0.0f64; k];
    let mut past_scores: Vec<Vec<f64>> = Vec::new();
    let mut past_decisions: Vec<Vec<f64>> = Vec::new();
    let mut steps = Vec::new();
    let mut decisions = vec![vec![false; c_len]; t_len];

    for t in 0..t_len {
        let scores: Vec<f64> = selected.iter().map(|&c| segment_scores[t][c]).collect();
        let mut step = Step {
            confusion: None,
            fallback: false,
            cosine: None,
            w_hat: vec![0.0; k],
            decisions: vec![false; k],
            tau: Vec::new(),
        };
        if p.dynamic && t >= 1 && k > 0 {
            let n = past_scores.len() as f64;
            let mut m = vec![vec![0.0; k]; k];
            for i in 0..k {
                for j in 0..k {
                    let mut s = 0.0;
                    for r in 0..past_scores.len() {
                        s += past_scores[r][i] * past_decisions[r][j];
                    }
                    m[i][j] = s / n;
                }
            }
            let (inv, fallback) = if is_singular(&m) {
                (rank_factor_pinv(&m), true)
            } else {
                let mut reg = m.clone();
                for i in 0..k {
                    reg[i][i] += p.epsilon;
                }
                match gauss_jordan_inverse(&reg) {
                    Some(inv) => (inv, false),
                    None => (rank_factor_pinv(&m), true),
                }
            };
            let scale = match (&video.features, p.cosine) {
                (Some(f), true) => cosine(&f[t], &f[t - 1]),
                _ => 1.0,
            };
            let mut w = vec![0.0; k];
            for i in 0..k {
                let mut s = 0.0;
                for j in 0..k {
                    s += inv[i][j] * scores[j];
                }
                w[i] = s * scale;
            }
            for i in 0..k {
                let mut next = tau[i] - p.tau0 * (-p.lambda * z[i]).exp() * w[i];
                if next < p.clamp_lo {
                    next = p.clamp_lo;
                }
                if next > p.clamp_hi {
                    next = p.clamp_hi;
                }
                tau[i] = next;
            }
            step.confusion = Some(m);
            step.fallback = fallback;
            step.cosine = Some(scale);
            step.w_hat = w;
        }
        let mut ys = Vec::new();
        for i in 0..k {
            let y = scores[i] > tau[i];
            ys.push(if y { 1.0 } else { 0.0 });
            if y {
                z[i] += 1.0;
                decisions[t][selected[i]] = true;
            }
            step.decisions[i] = y;
        }
        step.tau = tau.clone();
        past_scores.push(scores);
        past_decisions.push(ys);
        steps.push(step);
    }

    let mut candidates = Vec::new();
    for &c in &selected {
        let mut t = 0;
        while t < t_len {
            if decisions[t][c] {
                let start = t;
                while t < t_len && decisions[t][c] {
                    t += 1;
                }
                let (i, j) = (start + 1, t);
                let a = sig(column_mean(&video.audio_logits, c, i - 1, j));
                let v = sig(column_mean(&video.visual_logits, c, i - 1, j));
                candidates.push(Event {
                    category: c,
                    start: i,
                    end: j,
                    span_score: alpha * a + (1.0 - alpha) * v,
                });
            } else {
                t += 1;
            }
        }
    }
    let events = candidates
        .iter()
        .filter(|e| !p.refine || e.span_score > p.tau_r[pipeline])
        .cloned()
        .collect();

    Pipeline {
        selected,
        video_scores,
        segment_scores,
        steps,
        decisions,
        candidates,
        events,
    }
}

/// Runs the audio, visual and audio-visual pipelines.
pub fn parse(video: &Video, params: &Params) -> [Pipeline; 3] {
    [run_one(video, params, 0), run_one(video, params, 1), run_one(video, params, 2)]
}
