//! Per-clip feature computation for the experiment matrix, plus the
//! per-channel scaling used by the sequence models.

use crate::dsp::{mfcc, resample, spectrogram_image, FrameMatrix};
use crate::error::{Error, Result};
use crate::ingest::AudioClip;
use crate::lld::{
    aggregate, extract_llds, functionals_compare_like, functionals_egemaps_like,
    smooth_moving_average, Aggregation, LldConfig,
};

/// The feature families of the experiment matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Lld,
    Mfcc,
    Spectrogram,
    CompareFunctionals,
    EgemapsFunctionals,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Lld => "lld",
            FeatureKind::Mfcc => "mfcc",
            FeatureKind::Spectrogram => "spectrogram",
            FeatureKind::CompareFunctionals => "compare_functionals",
            FeatureKind::EgemapsFunctionals => "egemaps_functionals",
        }
    }

    /// Functional sets are one vector per clip; the rest are sequences.
    pub fn is_functional(self) -> bool {
        matches!(self, FeatureKind::CompareFunctionals | FeatureKind::EgemapsFunctionals)
    }

    /// Cache schema tag: bumping a schema invalidates cached features.
    pub fn schema_version(self) -> &'static str {
        match self {
            FeatureKind::Lld => crate::lld::LLD_SCHEMA_VERSION,
            FeatureKind::Mfcc => "mfcc_v1",
            FeatureKind::Spectrogram => "spectrogram_v1",
            FeatureKind::CompareFunctionals => crate::lld::COMPARE_SCHEMA_VERSION,
            FeatureKind::EgemapsFunctionals => crate::lld::EGEMAPS_SCHEMA_VERSION,
        }
    }

    /// Extraction parameters as recorded in report metadata (sample rate,
    /// framing, layout).
    pub fn config_summary(self) -> &'static str {
        match self {
            FeatureKind::Lld => "16000Hz, 25ms window / 10ms hop, padded-130 layout",
            FeatureKind::Mfcc => "44100Hz, fft 2048, hop 1024, 128 mel bands, 40 coefficients",
            FeatureKind::Spectrogram => {
                "44100Hz, 16ms window / 8ms hop, log(1+|X|), bilinear 227x227 time x frequency, per-image min-max"
            }
            FeatureKind::CompareFunctionals => "17 statistics per LLD channel (padded-130)",
            FeatureKind::EgemapsFunctionals => {
                "8 statistics over the smoothed prosodic/voice channel subset"
            }
        }
    }
}

impl std::str::FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lld" => Ok(FeatureKind::Lld),
            "mfcc" => Ok(FeatureKind::Mfcc),
            "spectrogram" => Ok(FeatureKind::Spectrogram),
            "compare_functionals" => Ok(FeatureKind::CompareFunctionals),
            "egemaps_functionals" => Ok(FeatureKind::EgemapsFunctionals),
            other => Err(Error::Config(format!("unknown feature '{other}'"))),
        }
    }
}

/// A feature family plus, for SVM paths over sequence features, the
/// aggregation that collapses the sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureSpec {
    pub kind: FeatureKind,
    pub aggregation: Option<Aggregation>,
}

impl FeatureSpec {
    pub fn sequence(kind: FeatureKind) -> Self {
        Self {
            kind,
            aggregation: None,
        }
    }

    pub fn aggregated(kind: FeatureKind, aggregation: Aggregation) -> Self {
        Self {
            kind,
            aggregation: Some(aggregation),
        }
    }

    pub fn describe(&self) -> String {
        match self.aggregation {
            Some(a) => format!("{}({})", self.kind.as_str(), a.as_str()),
            None => self.kind.as_str().to_string(),
        }
    }
}

/// One clip's extracted feature.
#[derive(Debug, Clone)]
pub enum ClipFeature {
    Sequence(FrameMatrix),
    Vector(Vec<f64>),
}

impl ClipFeature {
    pub fn as_vector(&self) -> Result<&[f64]> {
        match self {
            ClipFeature::Vector(v) => Ok(v),
            ClipFeature::Sequence(_) => Err(Error::BadCombination(
                "expected an aggregated vector feature, got a sequence".into(),
            )),
        }
    }

    pub fn as_sequence(&self) -> Result<&FrameMatrix> {
        match self {
            ClipFeature::Sequence(m) => Ok(m),
            ClipFeature::Vector(_) => Err(Error::BadCombination(
                "expected a sequence feature, got a vector".into(),
            )),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            ClipFeature::Sequence(m) => (m.rows(), m.cols()),
            ClipFeature::Vector(v) => (1, v.len()),
        }
    }
}

/// Compute the sequence form of a feature family for one raw 44.1 kHz clip.
pub fn feature_matrix(clip: &AudioClip, kind: FeatureKind) -> Result<FrameMatrix> {
    match kind {
        FeatureKind::Mfcc => mfcc(clip),
        FeatureKind::Spectrogram => {
            let img = spectrogram_image(clip)?;
            Ok(img.to_frame_matrix(clip.duration_seconds() * 1000.0))
        }
        FeatureKind::Lld | FeatureKind::CompareFunctionals | FeatureKind::EgemapsFunctionals => {
            let down = resample(clip, 16000)?;
            extract_llds(&down, &LldConfig::default())
        }
    }
}

/// Compute the configured feature for one raw clip.
pub fn compute_feature(clip: &AudioClip, spec: &FeatureSpec) -> Result<ClipFeature> {
    match spec.kind {
        FeatureKind::CompareFunctionals => {
            let llds = feature_matrix(clip, spec.kind)?;
            Ok(ClipFeature::Vector(functionals_compare_like(&llds)?.values))
        }
        FeatureKind::EgemapsFunctionals => {
            let llds = feature_matrix(clip, spec.kind)?;
            let smoothed = smooth_moving_average(&llds, 3)?;
            Ok(ClipFeature::Vector(functionals_egemaps_like(&smoothed)?.values))
        }
        _ => {
            let matrix = feature_matrix(clip, spec.kind)?;
            match spec.aggregation {
                Some(kind) => Ok(ClipFeature::Vector(aggregate(&matrix, kind).values)),
                None => Ok(ClipFeature::Sequence(matrix)),
            }
        }
    }
}

/// Per-channel scaling fitted over all frames of the training sequences.
/// Sequence models train on wildly different channel ranges (F0 in hundreds
/// of Hz next to unit-scale energies), so inputs are standardized channel-
/// wise with statistics from the training folds only.
pub struct ChannelScaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl ChannelScaler {
    pub fn fit(sequences: &[&FrameMatrix]) -> Result<Self> {
        let cols = sequences
            .first()
            .map(|m| m.cols())
            .ok_or_else(|| Error::Dsp("no sequences to fit a scaler on".into()))?;
        let mut means = vec![0.0f64; cols];
        let mut count = 0usize;
        for m in sequences {
            for t in 0..m.rows() {
                for (acc, v) in means.iter_mut().zip(m.row(t)) {
                    *acc += v;
                }
            }
            count += m.rows();
        }
        for m in means.iter_mut() {
            *m /= count as f64;
        }
        let mut vars = vec![0.0f64; cols];
        for m in sequences {
            for t in 0..m.rows() {
                for (acc, (v, mean)) in vars.iter_mut().zip(m.row(t).iter().zip(&means)) {
                    *acc += (v - mean) * (v - mean);
                }
            }
        }
        let stds = vars
            .iter()
            .map(|v| (v / count as f64).sqrt().max(crate::learn::STD_FLOOR))
            .collect();
        Ok(Self { means, stds })
    }

    /// Row-major standardized copy of a sequence.
    pub fn transform(&self, m: &FrameMatrix) -> Vec<f64> {
        let mut out = Vec::with_capacity(m.rows() * m.cols());
        for t in 0..m.rows() {
            for (v, (mean, std)) in m.row(t).iter().zip(self.means.iter().zip(&self.stds)) {
                out.push((v - mean) / std);
            }
        }
        out
    }
}
