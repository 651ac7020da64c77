//! Engine hyperparameters and ablation toggles.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parser::Modality;

/// Stage toggles. Disabling one reproduces the matching ablation row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Toggles {
    /// Scale the label-shift ratio by adjacent-segment feature cosine.
    pub use_cosine_scale: bool,
    /// Adapt per-category thresholds over segments.
    pub use_dynamic_thresholds: bool,
    /// Re-score candidate spans against `tau_r`.
    pub use_refinement: bool,
    /// Restrict decoding to categories whose video-level score exceeds `tau_f`.
    pub use_class_selection: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Toggles {
            use_cosine_scale: true,
            use_dynamic_thresholds: true,
            use_refinement: true,
            use_class_selection: true,
        }
    }
}

/// Optional per-pipeline replacement of the shared selection and refinement thresholds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdOverride {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_f: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_r: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineOverrides {
    pub audio: ThresholdOverride,
    pub visual: ThresholdOverride,
    pub audio_visual: ThresholdOverride,
}

impl PipelineOverrides {
    fn get(&self, modality: Modality) -> &ThresholdOverride {
        match modality {
            Modality::Audio => &self.audio,
            Modality::Visual => &self.visual,
            Modality::AudioVisual => &self.audio_visual,
        }
    }
}

/// All tunable scalars of the engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Audio weight of the audio-visual fusion, in `[0, 1]`.
    pub alpha: f64,
    /// Initial per-category threshold, in `(0, 1]`.
    pub tau0: f64,
    /// Relevant-category selection threshold, in `[0, 1)`.
    pub tau_f: f64,
    /// Span refinement threshold, in `[0, 1)`.
    pub tau_r: f64,
    /// Decay constant of the threshold update, `>= 0`.
    pub lambda: f64,
    /// Ridge added to the confusion matrix before inversion, `> 0`.
    pub epsilon_reg: f64,
    /// Thresholds are clamped into `[lo, hi]` after every update.
    pub threshold_clamp: [f64; 2],
    pub toggles: Toggles,
    pub overrides: PipelineOverrides,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Preset::LanguageBind.config()
    }
}

/// Tuned hyperparameter rows for the two supported extractor backends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    LanguageBind,
    ClipClap,
}

impl Preset {
    pub fn config(self) -> EngineConfig {
        let (alpha, tau0, tau_r, tau_f, lambda) = match self {
            Preset::LanguageBind => (0.5, 0.75, 0.75, 0.55, 2.5),
            Preset::ClipClap => (0.45, 0.75, 0.75, 0.5, 1.0),
        };
        EngineConfig {
            alpha,
            tau0,
            tau_f,
            tau_r,
            lambda,
            epsilon_reg: 1e-6,
            threshold_clamp: [0.0, 1.0],
            toggles: Toggles::default(),
            overrides: PipelineOverrides::default(),
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "languagebind" => Ok(Preset::LanguageBind),
            "clip-clap" | "clip_clap" => Ok(Preset::ClipClap),
            other => Err(Error::Config(format!(
                "unknown preset {other:?} (expected languagebind or clip-clap)"
            ))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::LanguageBind => "languagebind",
            Preset::ClipClap => "clip-clap",
        })
    }
}

fn check(ok: bool, what: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(what()))
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.alpha, self.tau0, self.tau_f, self.tau_r, self.lambda, self.epsilon_reg];
        check(finite.iter().all(|v| v.is_finite()), || "all parameters must be finite".into())?;
        check((0.0..=1.0).contains(&self.alpha), || format!("alpha {} not in [0,1]", self.alpha))?;
        check(self.tau0 > 0.0 && self.tau0 <= 1.0, || format!("tau0 {} not in (0,1]", self.tau0))?;
        let [lo, hi] = self.threshold_clamp;
        check(
            (0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi) && lo < hi,
            || format!("threshold_clamp [{lo},{hi}] must satisfy 0 <= lo < hi <= 1"),
        )?;
        check(self.lambda >= 0.0, || format!("lambda {} must be >= 0", self.lambda))?;
        check(self.epsilon_reg > 0.0, || format!("epsilon_reg {} must be > 0", self.epsilon_reg))?;
        for modality in Modality::ALL {
            let tau_f = self.tau_f_for(modality);
            let tau_r = self.tau_r_for(modality);
            check((0.0..1.0).contains(&tau_f), || format!("tau_f {tau_f} ({modality}) not in [0,1)"))?;
            check((0.0..1.0).contains(&tau_r), || format!("tau_r {tau_r} ({modality}) not in [0,1)"))?;
        }
        Ok(())
    }

    /// Fusion weight of a pipeline: audio is pinned to 1, visual to 0.
    pub fn alpha_for(&self, modality: Modality) -> f64 {
        match modality {
            Modality::Audio => 1.0,
            Modality::Visual => 0.0,
            Modality::AudioVisual => self.alpha,
        }
    }

    pub fn tau_f_for(&self, modality: Modality) -> f64 {
        self.overrides.get(modality).tau_f.unwrap_or(self.tau_f)
    }

    pub fn tau_r_for(&self, modality: Modality) -> f64 {
        self.overrides.get(modality).tau_r.unwrap_or(self.tau_r)
    }
}
