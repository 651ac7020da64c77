//! Dynamic per-category thresholds driven by within-video label shift.
//!
//! At segment `t >= 2` the engine builds a soft confusion matrix from the
//! scores and decisions of segments `1..t-1`, estimates the shift ratio of the
//! current scores through its inverse (scaled by the cosine between the
//! current and previous visual features), lowers each threshold by the ratio
//! weighted with `exp(-lambda * z)`, and only then thresholds segment `t`.
//! Segment 1 is decided against the initial thresholds.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::fusion::SelectedCategories;
use crate::linalg::{pseudo_inverse, Lu};
use crate::scalar::Scalar;

/// Evolving threshold state of one pipeline over one video.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdState<S> {
    selected: SelectedCategories,
    tau: Array1<S>,
    tau1: Array1<S>,
    z: Array1<u64>,
    history_scores: Array2<S>,
    history_decisions: Array2<bool>,
    prev_feature: Option<Array1<S>>,
    t: usize,
}

/// Diagnostics of one segment step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace<S> {
    /// 1-based segment index.
    pub t: usize,
    /// Soft confusion matrix; absent when no threshold update was attempted.
    pub confusion: Option<Array2<S>>,
    /// The inverse fell back to the pseudo-inverse.
    pub inverse_fallback: bool,
    /// Scale applied to the ratio; absent when no update was attempted.
    pub cosine: Option<S>,
    /// Estimated ratio (zeros when no update was attempted).
    pub w_hat: Array1<S>,
    pub decisions: Array1<bool>,
    pub tau_after: Array1<S>,
}

/// Result of [`invert_confusion`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionInverse<S> {
    pub matrix: Array2<S>,
    pub fallback: bool,
}

/// Soft confusion matrix `M = scores^T * decisions / (t-1)`.
///
/// Entry `(i, j)` is the mean of `score[i]` over past segments, counting only
/// segments where category `j` was decided positive.
pub fn build_confusion<S: Scalar>(
    history_scores: ArrayView2<S>,
    history_decisions: ArrayView2<bool>,
) -> Result<Array2<S>> {
    let n = history_scores.nrows();
    if n == 0 {
        return Err(Error::Dimension("confusion matrix needs at least one past segment".into()));
    }
    if history_scores.dim() != history_decisions.dim() {
        return Err(Error::Dimension(format!(
            "score history {:?} vs decision history {:?}",
            history_scores.dim(),
            history_decisions.dim()
        )));
    }
    let decisions = history_decisions.mapv(|y| if y { S::one() } else { S::zero() });
    let scale = S::one() / S::of(n as f64);
    Ok(history_scores.t().dot(&decisions).mapv(|v| v * scale))
}

/// `(M + eps I)^-1`, or the pseudo-inverse of `M` when `M` itself is numerically
/// singular (a category that was never decided positive leaves a zero column).
pub fn invert_confusion<S: Scalar>(m: &Array2<S>, epsilon_reg: S) -> ConfusionInverse<S> {
    let k = m.nrows();
    if Lu::factor(m).is_singular() {
        return ConfusionInverse {
            matrix: pseudo_inverse(m),
            fallback: true,
        };
    }
    let mut regularized = m.clone();
    for i in 0..k {
        regularized[[i, i]] = regularized[[i, i]] + epsilon_reg;
    }
    let lu = Lu::factor(&regularized);
    if lu.is_singular() {
        ConfusionInverse {
            matrix: pseudo_inverse(m),
            fallback: true,
        }
    } else {
        ConfusionInverse {
            matrix: lu.inverse(),
            fallback: false,
        }
    }
}

/// Cosine similarity; zero when either vector has zero norm.
pub fn cosine_scale<S: Scalar>(current: ArrayView1<S>, previous: ArrayView1<S>) -> Result<S> {
    if current.len() != previous.len() {
        return Err(Error::Dimension(format!(
            "feature dimensions {} and {} differ",
            current.len(),
            previous.len()
        )));
    }
    let norm_a = current.dot(&current).sqrt();
    let norm_b = previous.dot(&previous).sqrt();
    if norm_a == S::zero() || norm_b == S::zero() {
        return Ok(S::zero());
    }
    Ok(current.dot(&previous) / (norm_a * norm_b))
}

/// `w = M_inv * scores * scale`. Not clamped; negative entries raise thresholds.
pub fn estimate_ratio<S: Scalar>(m_inv: &Array2<S>, segment_scores: ArrayView1<S>, scale: S) -> Array1<S> {
    m_inv.dot(&segment_scores).mapv(|v| v * scale)
}

/// `y[c] = scores[c] > tau[c]`.
pub fn predict_segment<S: Scalar>(segment_scores: ArrayView1<S>, tau: ArrayView1<S>) -> Array1<bool> {
    ndarray::Zip::from(segment_scores)
        .and(tau)
        .map_collect(|&s, &t| s > t)
}

impl<S: Scalar> ThresholdState<S> {
    /// Fresh state: every threshold at `tau0`, no history, `t = 1`.
    pub fn new(selected: SelectedCategories, config: &EngineConfig) -> Self {
        let k = selected.len();
        let tau1 = Array1::from_elem(k, S::of(config.tau0));
        ThresholdState {
            selected,
            tau: tau1.clone(),
            tau1,
            z: Array1::zeros(k),
            history_scores: Array2::zeros((0, k)),
            history_decisions: Array2::from_elem((0, k), false),
            prev_feature: None,
            t: 1,
        }
    }

    pub fn selected(&self) -> &SelectedCategories {
        &self.selected
    }

    pub fn num_categories(&self) -> usize {
        self.selected.len()
    }

    pub fn tau(&self) -> &Array1<S> {
        &self.tau
    }

    pub fn initial_tau(&self) -> &Array1<S> {
        &self.tau1
    }

    /// Positive decisions per category over segments `1..t-1`.
    pub fn counts(&self) -> &Array1<u64> {
        &self.z
    }

    pub fn history_scores(&self) -> &Array2<S> {
        &self.history_scores
    }

    pub fn history_decisions(&self) -> &Array2<bool> {
        &self.history_decisions
    }

    pub fn prev_feature(&self) -> Option<&Array1<S>> {
        self.prev_feature.as_ref()
    }

    /// Index of the next segment to decide (1-based).
    pub fn t(&self) -> usize {
        self.t
    }

    /// `clamp(tau - tau1 * exp(-lambda * z) * w)`, with `z` counted before this segment.
    pub fn update_thresholds(&self, w_hat: ArrayView1<S>, lambda: S, clamp: [S; 2]) -> Array1<S> {
        let [lo, hi] = clamp;
        let mut next = self.tau.clone();
        for (c, tau) in next.iter_mut().enumerate() {
            let decay = (-lambda * S::of(self.z[c] as f64)).exp();
            let updated = *tau - self.tau1[c] * decay * w_hat[c];
            *tau = updated.max(lo).min(hi);
        }
        next
    }

    /// Decides one segment and advances the state.
    pub fn step(
        &mut self,
        segment_scores: ArrayView1<S>,
        feature: Option<ArrayView1<S>>,
        config: &EngineConfig,
    ) -> Result<StepTrace<S>> {
        let k = self.num_categories();
        if segment_scores.len() != k {
            return Err(Error::Dimension(format!(
                "segment {} has {} scores for {k} selected categories",
                self.t,
                segment_scores.len()
            )));
        }
        let mut trace = StepTrace {
            t: self.t,
            confusion: None,
            inverse_fallback: false,
            cosine: None,
            w_hat: Array1::zeros(k),
            decisions: Array1::from_elem(k, false),
            tau_after: self.tau.clone(),
        };

        if config.toggles.use_dynamic_thresholds && self.t >= 2 && k > 0 {
            let confusion = build_confusion(self.history_scores.view(), self.history_decisions.view())?;
            let inverse = invert_confusion(&confusion, S::of(config.epsilon_reg));
            let scale = match (config.toggles.use_cosine_scale, feature, &self.prev_feature) {
                (true, Some(current), Some(previous)) => cosine_scale(current, previous.view())?,
                _ => S::one(),
            };
            let w_hat = estimate_ratio(&inverse.matrix, segment_scores, scale);
            let clamp = config.threshold_clamp.map(S::of);
            self.tau = self.update_thresholds(w_hat.view(), S::of(config.lambda), clamp);
            trace.confusion = Some(confusion);
            trace.inverse_fallback = inverse.fallback;
            trace.cosine = Some(scale);
            trace.w_hat = w_hat;
        }

        let decisions = predict_segment(segment_scores, self.tau.view());
        self.history_scores
            .push_row(segment_scores)
            .expect("row length checked above");
        self.history_decisions
            .push_row(decisions.view())
            .expect("row length checked above");
        for (z, &y) in self.z.iter_mut().zip(decisions.iter()) {
            *z += u64::from(y);
        }
        self.prev_feature = feature.map(|f| f.to_owned());
        self.t += 1;

        trace.decisions = decisions;
        trace.tau_after = self.tau.clone();
        Ok(trace)
    }
}

/// Runs the state machine over every row of `scores` (`T x K`).
pub fn run_thresholds<S: Scalar>(
    selected: SelectedCategories,
    scores: ArrayView2<S>,
    features: Option<ArrayView2<S>>,
    config: &EngineConfig,
) -> Result<(Array2<bool>, Vec<StepTrace<S>>)> {
    let mut state = ThresholdState::new(selected, config);
    let mut decisions = Array2::from_elem((scores.nrows(), state.num_categories()), false);
    let mut traces = Vec::with_capacity(scores.nrows());
    for (t, row) in scores.axis_iter(Axis(0)).enumerate() {
        let feature = features.as_ref().map(|f| f.row(t));
        let trace = state.step(row, feature, config)?;
        decisions.row_mut(t).assign(&trace.decisions);
        traces.push(trace);
    }
    Ok((decisions, traces))
}
