//! Score-level fusion of audio and visual scores, and relevant-category selection.

use ndarray::{Array, Array1, Array2, ArrayBase, Data, Dimension, Zip};

use crate::bundle::{pool_video_level, sigmoid_scores, CategoryVocabulary, ScoreBundle, Stream};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Fused video-level and segment-level scores of one pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedScores<S> {
    pub video_level: Array1<S>,
    /// `T x |C|`.
    pub segment_level: Array2<S>,
    pub alpha_used: S,
}

/// Elementwise `alpha * audio + (1 - alpha) * visual`.
pub fn fuse<S, D, A, B>(audio: &ArrayBase<A, D>, visual: &ArrayBase<B, D>, alpha: S) -> Result<Array<S, D>>
where
    S: Scalar,
    D: Dimension,
    A: Data<Elem = S>,
    B: Data<Elem = S>,
{
    if audio.shape() != visual.shape() {
        return Err(Error::Dimension(format!(
            "cannot fuse audio {:?} with visual {:?}",
            audio.shape(),
            visual.shape()
        )));
    }
    if !(alpha >= S::zero() && alpha <= S::one()) {
        return Err(Error::OutOfRange(format!("alpha {alpha} not in [0,1]")));
    }
    let beta = S::one() - alpha;
    Ok(Zip::from(audio).and(visual).map_collect(|&a, &v| alpha * a + beta * v))
}

/// Applies the sigmoid to both streams and fuses them at video and segment level.
pub fn fuse_bundle<S: Scalar>(bundle: &ScoreBundle<S>, alpha: S) -> Result<FusedScores<S>> {
    let video_audio = sigmoid_scores(&pool_video_level(bundle, Stream::Audio));
    let video_visual = sigmoid_scores(&pool_video_level(bundle, Stream::Visual));
    let segment_audio = sigmoid_scores(bundle.logits(Stream::Audio));
    let segment_visual = sigmoid_scores(bundle.logits(Stream::Visual));
    Ok(FusedScores {
        video_level: fuse(&video_audio, &video_visual, alpha)?,
        segment_level: fuse(&segment_audio, &segment_visual, alpha)?,
        alpha_used: alpha,
    })
}

/// Ordered subset of vocabulary positions kept for decoding.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SelectedCategories {
    indices: Vec<usize>,
    ids: Vec<String>,
}

impl SelectedCategories {
    /// Panics if `indices` is not strictly increasing or exceeds the vocabulary.
    pub fn from_indices(indices: Vec<usize>, vocabulary: &CategoryVocabulary) -> Self {
        assert!(indices.windows(2).all(|w| w[0] < w[1]), "indices must be strictly increasing");
        assert!(indices.iter().all(|&i| i < vocabulary.len()), "index outside vocabulary");
        let ids = indices.iter().map(|&i| vocabulary.id(i).to_owned()).collect();
        SelectedCategories { indices, ids }
    }

    pub fn all(vocabulary: &CategoryVocabulary) -> Self {
        Self::from_indices((0..vocabulary.len()).collect(), vocabulary)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Categories whose video-level score is strictly above `tau_f`, in vocabulary order.
pub fn select_categories<S: Scalar>(
    video_scores: &Array1<S>,
    tau_f: S,
    vocabulary: &CategoryVocabulary,
) -> SelectedCategories {
    let indices = video_scores
        .iter()
        .enumerate()
        .filter(|&(_, &s)| s > tau_f)
        .map(|(i, _)| i)
        .collect();
    SelectedCategories::from_indices(indices, vocabulary)
}
