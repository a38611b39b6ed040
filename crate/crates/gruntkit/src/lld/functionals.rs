//! Statistical functionals over LLD contours: one fixed vector per clip.
//!
//! Two documented reduced batteries are provided. Neither claims to
//! replicate the dimensions of the commercial tool configurations they
//! approximate; schemas are versioned and embedded in reports.

use crate::dsp::FrameMatrix;
use crate::error::{Error, Result};

pub const COMPARE_SCHEMA_VERSION: &str = "compare_v1";
pub const EGEMAPS_SCHEMA_VERSION: &str = "egemaps_v1";

/// Full functional battery applied to every channel.
const COMPARE_FUNCTIONALS: [&str; 17] = [
    "mean",
    "std",
    "min",
    "max",
    "range",
    "pct20",
    "pct50",
    "pct80",
    "iqr20_50",
    "iqr50_80",
    "iqr20_80",
    "slope",
    "offset",
    "skewness",
    "kurtosis",
    "peak_rate",
    "peak_amp_mean",
];

/// Restricted battery applied to the prosodic / voice-quality subset.
const EGEMAPS_FUNCTIONALS: [&str; 8] = [
    "mean",
    "std",
    "pct20",
    "pct50",
    "pct80",
    "slope_per_sec",
    "rising_slope_mean",
    "peak_rate",
];

/// Channels the restricted battery runs over (picked by name).
const EGEMAPS_CHANNELS: [&str; 7] = [
    "f0",
    "loudness_proxy",
    "jitter",
    "shimmer",
    "hnr",
    "spectral_centroid",
    "spectral_rolloff85",
];

/// Ordered (channel, functional) naming of a functional vector.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FunctionalSchema {
    pub version: String,
    pub names: Vec<String>,
}

impl FunctionalSchema {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }
}

/// A fixed-dimension statistics vector with its naming schema.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalVector {
    pub values: Vec<f64>,
    pub schema: FunctionalSchema,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    // linear interpolation between order statistics at q * (n - 1)
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    }
}

fn regression(xs: &[f64]) -> (f64, f64) {
    // least squares over the frame index; returns (slope per frame, offset)
    let n = xs.len() as f64;
    let t_mean = (n - 1.0) / 2.0;
    let x_mean = xs.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, &x) in xs.iter().enumerate() {
        let dt = t as f64 - t_mean;
        num += dt * (x - x_mean);
        den += dt * dt;
    }
    let slope = if den > 0.0 { num / den } else { 0.0 };
    (slope, x_mean - slope * t_mean)
}

/// Interior strict local maxima: `x[t] > x[t-1] && x[t] > x[t+1]`.
fn peaks(xs: &[f64]) -> Vec<f64> {
    xs.windows(3)
        .filter(|w| w[1] > w[0] && w[1] > w[2])
        .map(|w| w[1])
        .collect()
}

fn check_frames(matrix: &FrameMatrix, needed: usize) -> Result<()> {
    if matrix.rows() < needed {
        return Err(Error::Dsp(format!(
            "functionals need at least {needed} frames, got {}",
            matrix.rows()
        )));
    }
    Ok(())
}

/// The full battery over every channel: 17 statistics per channel,
/// channel-major order.
pub fn functionals_compare_like(matrix: &FrameMatrix) -> Result<FunctionalVector> {
    check_frames(matrix, 3)?;
    let frame_period_s = matrix.frame_period_ms / 1000.0;
    let mut values = Vec::with_capacity(matrix.cols() * COMPARE_FUNCTIONALS.len());
    let mut names = Vec::with_capacity(values.capacity());

    for d in 0..matrix.cols() {
        let xs = matrix.column(d);
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let m2 = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let std = m2.sqrt();
        let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sorted = xs.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let (p20, p50, p80) = (
            percentile(&sorted, 0.2),
            percentile(&sorted, 0.5),
            percentile(&sorted, 0.8),
        );
        let (slope, offset) = regression(&xs);
        let (skewness, kurtosis) = if m2 > 1e-24 {
            let m3 = xs.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
            let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
            (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
        } else {
            (0.0, 0.0)
        };
        let pk = peaks(&xs);
        let peak_rate = pk.len() as f64 / (n * frame_period_s);
        let peak_amp_mean = if pk.is_empty() {
            0.0
        } else {
            pk.iter().sum::<f64>() / pk.len() as f64
        };

        let stats = [
            mean,
            std,
            min,
            max,
            max - min,
            p20,
            p50,
            p80,
            p50 - p20,
            p80 - p50,
            p80 - p20,
            slope,
            offset,
            skewness,
            kurtosis,
            peak_rate,
            peak_amp_mean,
        ];
        values.extend_from_slice(&stats);
        let channel = &matrix.descriptor_names[d];
        names.extend(COMPARE_FUNCTIONALS.iter().map(|f| format!("{channel}.{f}")));
    }

    Ok(FunctionalVector {
        values,
        schema: FunctionalSchema {
            version: COMPARE_SCHEMA_VERSION.to_string(),
            names,
        },
    })
}

/// The restricted battery over the prosodic / voice-quality channels.
/// Expects the matrix to have been smoothed (moving average, width 3).
pub fn functionals_egemaps_like(matrix: &FrameMatrix) -> Result<FunctionalVector> {
    check_frames(matrix, 3)?;
    let frame_period_s = matrix.frame_period_ms / 1000.0;
    let mut values = Vec::with_capacity(EGEMAPS_CHANNELS.len() * EGEMAPS_FUNCTIONALS.len());
    let mut names = Vec::with_capacity(values.capacity());

    for channel in EGEMAPS_CHANNELS {
        let d = matrix
            .descriptor_names
            .iter()
            .position(|n| n == channel)
            .ok_or_else(|| Error::Dsp(format!("channel '{channel}' missing from LLD matrix")))?;
        let xs = matrix.column(d);
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
        let mut sorted = xs.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let (slope, _) = regression(&xs);
        let slope_per_sec = slope / frame_period_s;
        let rising: Vec<f64> = xs
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| (w[1] - w[0]) / frame_period_s)
            .collect();
        let rising_slope_mean = if rising.is_empty() {
            0.0
        } else {
            rising.iter().sum::<f64>() / rising.len() as f64
        };
        let peak_rate = peaks(&xs).len() as f64 / (n * frame_period_s);

        values.extend_from_slice(&[
            mean,
            std,
            percentile(&sorted, 0.2),
            percentile(&sorted, 0.5),
            percentile(&sorted, 0.8),
            slope_per_sec,
            rising_slope_mean,
            peak_rate,
        ]);
        names.extend(EGEMAPS_FUNCTIONALS.iter().map(|f| format!("{channel}.{f}")));
    }

    Ok(FunctionalVector {
        values,
        schema: FunctionalSchema {
            version: EGEMAPS_SCHEMA_VERSION.to_string(),
            names,
        },
    })
}
