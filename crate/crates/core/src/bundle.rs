//! Score bundles: the per-video container of raw text-modality similarity
//! logits, plus the matching ground-truth labels.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{sigmoid, Scalar};

/// One category of the open vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryEntry {
    pub id: String,
    pub audio_prompt: String,
    pub visual_prompt: String,
}

impl CategoryEntry {
    /// Entry whose prompts are derived from the id.
    pub fn named(id: impl Into<String>) -> Self {
        let id = id.into();
        CategoryEntry {
            audio_prompt: format!("the sound of {id}"),
            visual_prompt: format!("an image of {id}"),
            id,
        }
    }
}

/// Ordered category list. The order is the column order of every score
/// matrix in the same bundle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryVocabulary {
    entries: Vec<CategoryEntry>,
}

impl CategoryVocabulary {
    pub fn new(entries: Vec<CategoryEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::schema("vocabulary", "vocabulary must not be empty"));
        }
        for (i, entry) in entries.iter().enumerate() {
            if entries[..i].iter().any(|e| e.id == entry.id) {
                return Err(Error::schema(
                    format!("vocabulary[{i}].id"),
                    format!("duplicate category id {:?}", entry.id),
                ));
            }
        }
        Ok(CategoryVocabulary { entries })
    }

    /// Vocabulary built from bare ids.
    pub fn from_ids<I, T>(ids: I) -> Result<Self>
    where
        I: IntoIterator<Item = T>,
        T: Into<String>,
    {
        Self::new(ids.into_iter().map(CategoryEntry::named).collect())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[CategoryEntry] {
        &self.entries
    }

    pub fn id(&self, index: usize) -> &str {
        &self.entries[index].id
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.id.as_str())
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.id == id)
    }
}

/// Input stream of a bundle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stream {
    Audio,
    Visual,
}

/// Validated per-video score bundle.
///
/// Matrices are `T x |C|` with `T >= 1`; all entries are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreBundle<S> {
    video_id: String,
    vocabulary: CategoryVocabulary,
    audio_logits: Array2<S>,
    visual_logits: Array2<S>,
    video_audio_logits: Option<Array1<S>>,
    video_visual_logits: Option<Array1<S>>,
    visual_features: Option<Array2<S>>,
    metadata: Option<serde_json::Map<String, serde_json::Value>>,
}

fn check_finite_matrix<S: Scalar>(field: &str, m: &ArrayView2<S>) -> Result<()> {
    for ((row, col), v) in m.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                field: field.to_owned(),
                row,
                col,
            });
        }
    }
    Ok(())
}

fn check_finite_vector<S: Scalar>(field: &str, v: &Array1<S>) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(col) => Err(Error::NonFinite {
            field: field.to_owned(),
            row: 0,
            col,
        }),
        None => Ok(()),
    }
}

impl<S: Scalar> ScoreBundle<S> {
    /// Builds a bundle from segment-level logits, validating every invariant.
    pub fn new(
        video_id: impl Into<String>,
        vocabulary: CategoryVocabulary,
        audio_logits: Array2<S>,
        visual_logits: Array2<S>,
    ) -> Result<Self> {
        let c = vocabulary.len();
        let t = audio_logits.nrows();
        if t == 0 {
            return Err(Error::shape("audio_logits", "at least 1 row", 0));
        }
        for (field, m) in [("audio_logits", &audio_logits), ("visual_logits", &visual_logits)] {
            if m.nrows() != t {
                return Err(Error::shape(field, format!("{t} rows"), format!("{} rows", m.nrows())));
            }
            if m.ncols() != c {
                return Err(Error::shape(field, format!("{c} columns"), format!("{} columns", m.ncols())));
            }
            check_finite_matrix(field, &m.view())?;
        }
        Ok(ScoreBundle {
            video_id: video_id.into(),
            vocabulary,
            audio_logits,
            visual_logits,
            video_audio_logits: None,
            video_visual_logits: None,
            visual_features: None,
            metadata: None,
        })
    }

    /// Attaches whole-clip logits for one stream.
    pub fn with_video_logits(mut self, stream: Stream, logits: Array1<S>) -> Result<Self> {
        let field = match stream {
            Stream::Audio => "video_audio_logits",
            Stream::Visual => "video_visual_logits",
        };
        if logits.len() != self.num_categories() {
            return Err(Error::shape(field, self.num_categories(), logits.len()));
        }
        check_finite_vector(field, &logits)?;
        match stream {
            Stream::Audio => self.video_audio_logits = Some(logits),
            Stream::Visual => self.video_visual_logits = Some(logits),
        }
        Ok(self)
    }

    /// Attaches per-segment visual feature vectors (`T x D`, `D >= 1`).
    pub fn with_features(mut self, features: Array2<S>) -> Result<Self> {
        if features.nrows() != self.num_segments() {
            return Err(Error::shape(
                "visual_features",
                format!("{} rows", self.num_segments()),
                format!("{} rows", features.nrows()),
            ));
        }
        if features.ncols() == 0 {
            return Err(Error::shape("visual_features", "dimension >= 1", 0));
        }
        check_finite_matrix("visual_features", &features.view())?;
        self.visual_features = Some(features);
        Ok(self)
    }

    pub fn with_metadata(mut self, metadata: serde_json::Map<String, serde_json::Value>) -> Self {
        self.metadata = Some(metadata);
        self
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn vocabulary(&self) -> &CategoryVocabulary {
        &self.vocabulary
    }

    pub fn num_segments(&self) -> usize {
        self.audio_logits.nrows()
    }

    pub fn num_categories(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn logits(&self, stream: Stream) -> &Array2<S> {
        match stream {
            Stream::Audio => &self.audio_logits,
            Stream::Visual => &self.visual_logits,
        }
    }

    pub fn video_logits(&self, stream: Stream) -> Option<&Array1<S>> {
        match stream {
            Stream::Audio => self.video_audio_logits.as_ref(),
            Stream::Visual => self.video_visual_logits.as_ref(),
        }
    }

    pub fn visual_features(&self) -> Option<&Array2<S>> {
        self.visual_features.as_ref()
    }

    pub fn metadata(&self) -> Option<&serde_json::Map<String, serde_json::Value>> {
        self.metadata.as_ref()
    }

    /// Converts every matrix into another scalar type.
    pub fn cast<T: Scalar>(&self) -> ScoreBundle<T> {
        let m = |a: &Array2<S>| a.mapv(|v| T::of(v.widen()));
        let v = |a: &Array1<S>| a.mapv(|v| T::of(v.widen()));
        ScoreBundle {
            video_id: self.video_id.clone(),
            vocabulary: self.vocabulary.clone(),
            audio_logits: m(&self.audio_logits),
            visual_logits: m(&self.visual_logits),
            video_audio_logits: self.video_audio_logits.as_ref().map(v),
            video_visual_logits: self.video_visual_logits.as_ref().map(v),
            visual_features: self.visual_features.as_ref().map(m),
            metadata: self.metadata.clone(),
        }
    }
}

/// Elementwise logistic squashing of raw similarities into `(0, 1)`.
pub fn sigmoid_scores<S, D, A>(logits: &ndarray::ArrayBase<A, D>) -> ndarray::Array<S, D>
where
    S: Scalar,
    D: ndarray::Dimension,
    A: ndarray::Data<Elem = S>,
{
    logits.mapv(sigmoid)
}

fn mean_rows<S: Scalar>(rows: ArrayView2<S>) -> Array1<S> {
    let n = S::of(rows.nrows() as f64);
    rows.sum_axis(Axis(0)).mapv(|v| v / n)
}

/// Video-level logits for one stream: the stored whole-clip logits when the
/// bundle has them, else the mean of the segment logits.
pub fn pool_video_level<S: Scalar>(bundle: &ScoreBundle<S>, stream: Stream) -> Array1<S> {
    match bundle.video_logits(stream) {
        Some(v) => v.clone(),
        None => mean_rows(bundle.logits(stream).view()),
    }
}

/// Mean logit row over the 1-based inclusive segment span `start..=end`.
pub fn pool_span<S: Scalar>(logits: &Array2<S>, start: usize, end: usize) -> Result<Array1<S>> {
    let t = logits.nrows();
    if start < 1 || start > end || end > t {
        return Err(Error::OutOfRange(format!(
            "span {start}..={end} outside segments 1..={t}"
        )));
    }
    Ok(mean_rows(logits.slice(s![start - 1..end, ..])))
}

/// Binary audio and visual labels for one video.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    video_id: String,
    categories: Vec<String>,
    audio_labels: Array2<bool>,
    visual_labels: Array2<bool>,
}

impl GroundTruth {
    pub fn new(
        video_id: impl Into<String>,
        categories: Vec<String>,
        audio_labels: Array2<bool>,
        visual_labels: Array2<bool>,
    ) -> Result<Self> {
        let c = categories.len();
        let t = audio_labels.nrows();
        if c == 0 {
            return Err(Error::schema("categories", "must not be empty"));
        }
        if t == 0 {
            return Err(Error::shape("audio_labels", "at least 1 row", 0));
        }
        for (field, m) in [("audio_labels", &audio_labels), ("visual_labels", &visual_labels)] {
            if m.dim() != (t, c) {
                return Err(Error::shape(field, format!("{t}x{c}"), format!("{}x{}", m.nrows(), m.ncols())));
            }
        }
        Ok(GroundTruth {
            video_id: video_id.into(),
            categories,
            audio_labels,
            visual_labels,
        })
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn num_segments(&self) -> usize {
        self.audio_labels.nrows()
    }

    pub fn audio(&self) -> &Array2<bool> {
        &self.audio_labels
    }

    pub fn visual(&self) -> &Array2<bool> {
        &self.visual_labels
    }

    /// Audio-visual labels: cells active in both streams.
    pub fn audio_visual(&self) -> Array2<bool> {
        ndarray::Zip::from(&self.audio_labels)
            .and(&self.visual_labels)
            .map_collect(|&a, &v| a && v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn vocab(n: usize) -> CategoryVocabulary {
        CategoryVocabulary::from_ids((0..n).map(|i| format!("c{i}"))).unwrap()
    }

    #[test]
    fn vocabulary_rejects_duplicates_and_empty() {
        assert!(CategoryVocabulary::from_ids(["a", "b", "a"]).is_err());
        assert!(CategoryVocabulary::from_ids(Vec::<String>::new()).is_err());
    }

    #[test]
    fn bundle_shape_mismatch_names_field() {
        let err = ScoreBundle::new("v", vocab(3), Array2::<f64>::zeros((10, 3)), Array2::zeros((9, 3)))
            .unwrap_err();
        assert!(matches!(err, Error::Shape { ref field, .. } if field == "visual_logits"), "{err}");
    }

    #[test]
    fn bundle_non_finite_reports_coordinate() {
        let mut visual = Array2::<f64>::zeros((4, 3));
        visual[[2, 1]] = f64::NAN;
        let err = ScoreBundle::new("v", vocab(3), Array2::zeros((4, 3)), visual).unwrap_err();
        match err {
            Error::NonFinite { field, row, col } => assert_eq!((field.as_str(), row, col), ("visual_logits", 2, 1)),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn sigmoid_matrix() {
        let out = sigmoid_scores(&array![[2.0f64, -2.0]]);
        approx::assert_abs_diff_eq!(out[[0, 0]], 0.880797077977882, epsilon = 1e-12);
        approx::assert_abs_diff_eq!(out[[0, 1]], 0.119202922022118, epsilon = 1e-12);
        assert_eq!(sigmoid_scores(&array![0.0f64])[0], 0.5);
    }

    #[test]
    fn video_level_passthrough_and_fallback() {
        let b = ScoreBundle::new("v", vocab(1), array![[1.0f64], [3.0]], array![[0.0], [0.0]]).unwrap();
        assert_eq!(pool_video_level(&b, Stream::Audio), array![2.0]);
        let b = b.with_video_logits(Stream::Audio, array![-7.5]).unwrap();
        assert_eq!(pool_video_level(&b, Stream::Audio), array![-7.5]);
        let single = ScoreBundle::new("v", vocab(2), array![[1.5f64, -0.5]], array![[0.0, 0.0]]).unwrap();
        assert_eq!(pool_video_level(&single, Stream::Audio), array![1.5, -0.5]);
    }

    #[test]
    fn span_pooling() {
        let logits = array![[0.0f64], [2.0], [4.0]];
        assert_eq!(pool_span(&logits, 1, 3).unwrap(), array![2.0]);
        assert_eq!(pool_span(&logits, 2, 2).unwrap(), array![2.0]);
        assert_eq!(pool_span(&logits, 3, 3).unwrap(), array![4.0]);
        assert!(pool_span(&logits, 0, 1).is_err());
        assert!(pool_span(&logits, 2, 4).is_err());
        assert!(pool_span(&logits, 3, 2).is_err());
    }

    #[test]
    fn full_span_equals_video_fallback_exactly() {
        let logits = array![[0.3f64, -1.7], [2.9, 0.1], [-4.4, 5.5]];
        let b = ScoreBundle::new("v", vocab(2), logits.clone(), logits.clone()).unwrap();
        assert_eq!(pool_span(&logits, 1, 3).unwrap(), pool_video_level(&b, Stream::Visual));
    }

    #[test]
    fn audio_visual_truth_is_conjunction() {
        let gt = GroundTruth::new(
            "v",
            vec!["a".into(), "b".into()],
            array![[true, false], [true, true]],
            array![[true, true], [false, true]],
        )
        .unwrap();
        assert_eq!(gt.audio_visual(), array![[true, false], [false, true]]);
    }

    #[test]
    fn cast_round_trips_through_f32() {
        let b = ScoreBundle::new("v", vocab(1), array![[0.5f64]], array![[0.25]]).unwrap();
        assert_eq!(b.cast::<f32>().cast::<f64>(), b);
    }
}
