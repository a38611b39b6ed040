//! Frame-level low-level descriptors at a 10 ms frame period, their first
//! derivatives, statistical functionals, and the mean/middle/flat sequence
//! aggregations.
//!
//! The base descriptor set is a documented reduced set (energy, spectral,
//! voice groups). In the default padded-130 layout, reserved all-zero
//! channels bring the base count to 65 (4 energy + 55 spectral + 6 voice)
//! so that with derivatives appended the matrix is T x 130 and a 1000 ms
//! clip flattens to exactly 100 x 130 = 13 000 values. The reduced layout
//! (real channels only) is available for callers that do not need the
//! padded shape.

pub mod f0;
pub mod functionals;

use rustfft::num_complex::Complex64;

use crate::dsp::{fft, hann_window, reflect_pad, FrameMatrix};
use crate::error::{Error, Result};
use crate::ingest::AudioClip;

pub use f0::{f0_autocorrelation, Pitch, VOICING_THRESHOLD};
pub use functionals::{
    functionals_compare_like, functionals_egemaps_like, FunctionalSchema, FunctionalVector,
    COMPARE_SCHEMA_VERSION, EGEMAPS_SCHEMA_VERSION,
};

/// Schema identifier embedded in caches and reports.
pub const LLD_SCHEMA_VERSION: &str = "lld_v1";

/// Analysis geometry: 25 ms windows every 10 ms on 16 kHz audio, frames
/// centered so a 1000 ms clip yields exactly 100 frames.
pub const LLD_RATE: u32 = 16000;
pub const LLD_WINDOW: usize = 400;
pub const LLD_HOP: usize = 160;
/// Longer centered window for pitch analysis (covers two 60 Hz periods).
const PITCH_WINDOW: usize = 640;
const SPECTRUM_FFT: usize = 512;

/// Names of the real (non-reserved) base descriptors, in channel order.
pub const ENERGY_CHANNELS: [&str; 4] = ["rms_energy", "log_energy", "zcr", "loudness_proxy"];
pub const SPECTRAL_CHANNELS: [&str; 8] = [
    "spectral_centroid",
    "spectral_spread",
    "spectral_flux",
    "spectral_rolloff85",
    "spectral_entropy",
    "spectral_flatness",
    "band_energy_250_650",
    "band_energy_1000_4000",
];
pub const VOICE_CHANNELS: [&str; 5] = ["f0", "voicing_prob", "jitter", "shimmer", "hnr"];

/// Padded-130 layout: 4 energy + (8 real + 47 reserved) spectral
/// + (5 real + 1 reserved) voice = 65 base channels, doubled by deltas.
const PADDED_SPECTRAL_RESERVE: usize = 47;
const PADDED_VOICE_RESERVE: usize = 1;

/// Channel-layout switch for [`extract_llds`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LldConfig {
    /// Pad with reserved zero channels to the full 130-dim layout.
    pub pad_to_130: bool,
}

impl Default for LldConfig {
    fn default() -> Self {
        Self { pad_to_130: true }
    }
}

impl LldConfig {
    pub fn reduced() -> Self {
        Self { pad_to_130: false }
    }

    pub fn base_channel_names(&self) -> Vec<String> {
        let mut names: Vec<String> = ENERGY_CHANNELS.iter().map(|s| s.to_string()).collect();
        names.extend(SPECTRAL_CHANNELS.iter().map(|s| s.to_string()));
        if self.pad_to_130 {
            names.extend((0..PADDED_SPECTRAL_RESERVE).map(|i| format!("reserved_spectral_{i:02}")));
        }
        names.extend(VOICE_CHANNELS.iter().map(|s| s.to_string()));
        if self.pad_to_130 {
            names.extend((0..PADDED_VOICE_RESERVE).map(|i| format!("reserved_voice_{i:02}")));
        }
        names
    }

    /// Total channel count including derivatives.
    pub fn channel_count(&self) -> usize {
        2 * self.base_channel_names().len()
    }
}

/// Extract the LLD matrix of a 16 kHz mono clip: base descriptors followed by
/// their first derivatives, one row every 10 ms.
///
/// Unvoiced frames carry `f0 = 0` and `voicing_prob = 0`; jitter and shimmer
/// are frame-to-frame relative differences over consecutive voiced frames and
/// contribute nothing elsewhere.
pub fn extract_llds(clip: &AudioClip, config: &LldConfig) -> Result<FrameMatrix> {
    if clip.sample_rate != LLD_RATE {
        return Err(Error::WrongSampleRate {
            expected: LLD_RATE,
            got: clip.sample_rate,
        });
    }
    let n = clip.samples.len();
    if n < LLD_WINDOW {
        return Err(Error::ClipTooShort {
            samples: n,
            needed: LLD_WINDOW,
        });
    }

    // Centered framing: pad (W - H) / 2 on each side, giving N / H frames
    // when the hop divides the clip length (100 frames for 1000 ms).
    let frame_pad = (LLD_WINDOW - LLD_HOP) / 2;
    let padded = reflect_pad(&clip.samples, frame_pad);
    let frames = (n - LLD_HOP) / LLD_HOP + 1;
    // Pitch windows share the frame centers but span 40 ms.
    let pitch_padded = reflect_pad(&clip.samples, PITCH_WINDOW / 2);

    let window = hann_window(LLD_WINDOW)?;
    let bin_hz = f64::from(LLD_RATE) / SPECTRUM_FFT as f64;
    let n_bins = SPECTRUM_FFT / 2 + 1;

    struct FrameRaw {
        energy: [f64; 4],
        spectral: [f64; 8], // flux filled in second pass
        mags: Vec<f64>,
        pitch: Pitch,
        peak_amp: f64,
    }

    let mut raws: Vec<FrameRaw> = Vec::with_capacity(frames);
    let mut buf = vec![Complex64::new(0.0, 0.0); SPECTRUM_FFT];
    for t in 0..frames {
        let frame = &padded[t * LLD_HOP..t * LLD_HOP + LLD_WINDOW];

        // energy group
        let power_sum: f64 = frame.iter().map(|v| v * v).sum();
        let mean_power = power_sum / LLD_WINDOW as f64;
        let rms = mean_power.sqrt();
        let log_energy = (1.0 + power_sum).ln();
        let crossings = frame
            .windows(2)
            .filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0))
            .count();
        let zcr = crossings as f64 / (LLD_WINDOW - 1) as f64;
        let loudness = mean_power.powf(0.3);

        // spectral group
        for (k, slot) in buf.iter_mut().enumerate() {
            let v = if k < LLD_WINDOW { frame[k] * window[k] } else { 0.0 };
            *slot = Complex64::new(v, 0.0);
        }
        fft::fft_in_place(&mut buf);
        let mags: Vec<f64> = buf[..n_bins].iter().map(|c| c.norm()).collect();
        let power: Vec<f64> = mags.iter().map(|m| m * m).collect();
        let total: f64 = power.iter().sum();
        let silent = total < 1e-20;

        let centroid = if silent {
            0.0
        } else {
            power
                .iter()
                .enumerate()
                .map(|(i, p)| i as f64 * bin_hz * p)
                .sum::<f64>()
                / total
        };
        let spread = if silent {
            0.0
        } else {
            (power
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let d = i as f64 * bin_hz - centroid;
                    d * d * p
                })
                .sum::<f64>()
                / total)
                .sqrt()
        };
        let rolloff = if silent {
            0.0
        } else {
            let threshold = 0.85 * total;
            let mut acc = 0.0;
            let mut freq = (n_bins - 1) as f64 * bin_hz;
            for (i, p) in power.iter().enumerate() {
                acc += p;
                if acc >= threshold {
                    freq = i as f64 * bin_hz;
                    break;
                }
            }
            freq
        };
        let entropy = if silent {
            0.0
        } else {
            -power
                .iter()
                .filter(|&&p| p > 0.0)
                .map(|&p| {
                    let q = p / total;
                    q * q.ln()
                })
                .sum::<f64>()
                / (n_bins as f64).ln()
        };
        let flatness = {
            let geo = power.iter().map(|p| (p + 1e-20).ln()).sum::<f64>() / n_bins as f64;
            geo.exp() / (total / n_bins as f64 + 1e-20)
        };
        let band = |lo: f64, hi: f64| -> f64 {
            power
                .iter()
                .enumerate()
                .filter(|(i, _)| {
                    let f = *i as f64 * bin_hz;
                    f >= lo && f <= hi
                })
                .map(|(_, p)| p)
                .sum()
        };

        // voice group; both windows center on (t + 0.5) * hop
        let pitch_start = t * LLD_HOP + LLD_HOP / 2;
        let pitch_frame = &pitch_padded[pitch_start..pitch_start + PITCH_WINDOW];
        let pitch = f0_autocorrelation(pitch_frame, LLD_RATE);
        let peak_amp = frame.iter().fold(0.0f64, |m, v| m.max(v.abs()));

        raws.push(FrameRaw {
            energy: [rms, log_energy, zcr, loudness],
            spectral: [
                centroid,
                spread,
                0.0, // flux
                rolloff,
                entropy,
                flatness,
                band(250.0, 650.0),
                band(1000.0, 4000.0),
            ],
            mags,
            pitch,
            peak_amp,
        });
    }

    // second pass: flux, jitter, shimmer, HNR
    let base_names = config.base_channel_names();
    let n_base = base_names.len();
    let mut values = Vec::with_capacity(frames * n_base);
    for t in 0..frames {
        let flux = if t == 0 {
            0.0
        } else {
            raws[t]
                .mags
                .iter()
                .zip(&raws[t - 1].mags)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        };

        let pitch = raws[t].pitch;
        let f0_hz = pitch.f0.unwrap_or(0.0);
        let voicing = if pitch.f0.is_some() { pitch.voicing } else { 0.0 };
        let (jitter, shimmer) = if t > 0 {
            match (raws[t - 1].pitch.f0, raws[t].pitch.f0) {
                (Some(prev_f0), Some(cur_f0)) => {
                    let (p0, p1) = (1.0 / prev_f0, 1.0 / cur_f0);
                    let jitter = (p1 - p0).abs() / ((p0 + p1) / 2.0);
                    let (a0, a1) = (raws[t - 1].peak_amp, raws[t].peak_amp);
                    let denom = (a0 + a1) / 2.0;
                    let shimmer = if denom > 1e-12 { (a1 - a0).abs() / denom } else { 0.0 };
                    (jitter, shimmer)
                }
                _ => (0.0, 0.0),
            }
        } else {
            (0.0, 0.0)
        };
        let hnr = if pitch.f0.is_some() {
            let r = pitch.voicing.clamp(1e-3, 1.0 - 1e-3);
            10.0 * (r / (1.0 - r)).log10()
        } else {
            0.0
        };

        values.extend_from_slice(&raws[t].energy);
        values.extend_from_slice(&raws[t].spectral[..2]);
        values.push(flux);
        values.extend_from_slice(&raws[t].spectral[3..]);
        if config.pad_to_130 {
            values.extend(std::iter::repeat_n(0.0, PADDED_SPECTRAL_RESERVE));
        }
        values.extend_from_slice(&[f0_hz, voicing, jitter, shimmer, hnr]);
        if config.pad_to_130 {
            values.extend(std::iter::repeat_n(0.0, PADDED_VOICE_RESERVE));
        }
    }

    let base = FrameMatrix::new(values, frames, n_base, 10.0, base_names)?;
    deltas(&base)
}

/// Append first-derivative channels computed with a regression window of
/// half-width 2: `d_t = sum_n n (x_{t+n} - x_{t-n}) / (2 sum_n n^2)`, edges
/// replicated. Output channel names carry a `Δ` suffix.
pub fn deltas(matrix: &FrameMatrix) -> Result<FrameMatrix> {
    let t_len = matrix.rows();
    let d_len = matrix.cols();
    if t_len < 2 {
        return Err(Error::Dsp(format!("deltas need at least 2 frames, got {t_len}")));
    }
    let clamp = |t: i64| -> usize { t.clamp(0, t_len as i64 - 1) as usize };
    let mut values = Vec::with_capacity(t_len * d_len * 2);
    for t in 0..t_len {
        values.extend_from_slice(matrix.row(t));
        for d in 0..d_len {
            let mut num = 0.0;
            for w in 1..=2i64 {
                let fwd = matrix.get(clamp(t as i64 + w), d);
                let back = matrix.get(clamp(t as i64 - w), d);
                num += w as f64 * (fwd - back);
            }
            values.push(num / 10.0); // 2 * (1^2 + 2^2)
        }
    }
    let mut names = matrix.descriptor_names.clone();
    names.extend(matrix.descriptor_names.iter().map(|n| format!("{n}Δ")));
    FrameMatrix::new(values, t_len, d_len * 2, matrix.frame_period_ms, names)
}

/// Symmetrical moving-average smoothing per channel (width must be odd);
/// edges are replicated.
pub fn smooth_moving_average(matrix: &FrameMatrix, width: usize) -> Result<FrameMatrix> {
    if width == 0 || width.is_multiple_of(2) {
        return Err(Error::Dsp(format!("smoothing width {width} must be odd")));
    }
    let half = (width / 2) as i64;
    let t_len = matrix.rows();
    let d_len = matrix.cols();
    let clamp = |t: i64| -> usize { t.clamp(0, t_len as i64 - 1) as usize };
    let mut values = Vec::with_capacity(t_len * d_len);
    for t in 0..t_len {
        for d in 0..d_len {
            let mut acc = 0.0;
            for o in -half..=half {
                acc += matrix.get(clamp(t as i64 + o), d);
            }
            values.push(acc / width as f64);
        }
    }
    FrameMatrix::new(
        values,
        t_len,
        d_len,
        matrix.frame_period_ms,
        matrix.descriptor_names.clone(),
    )
}

/// How a time x descriptor matrix collapses to one vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Column means over time.
    Mean,
    /// The single row at `floor(T / 2)`.
    Middle,
    /// Row-major concatenation of all frames.
    Flat,
}

impl Aggregation {
    pub fn as_str(self) -> &'static str {
        match self {
            Aggregation::Mean => "mean",
            Aggregation::Middle => "middle",
            Aggregation::Flat => "flat",
        }
    }
}

impl std::str::FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Aggregation::Mean),
            "middle" => Ok(Aggregation::Middle),
            "flat" => Ok(Aggregation::Flat),
            other => Err(Error::Config(format!("unknown aggregation '{other}'"))),
        }
    }
}

/// A matrix collapsed along time.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedVector {
    pub values: Vec<f64>,
    pub aggregation: Aggregation,
    pub source_shape: (usize, usize),
}

/// Collapse a frame matrix to one vector: column means, the middle row, or
/// the full row-major concatenation.
pub fn aggregate(matrix: &FrameMatrix, kind: Aggregation) -> AggregatedVector {
    let (t_len, d_len) = (matrix.rows(), matrix.cols());
    let values = match kind {
        Aggregation::Mean => {
            let mut acc = vec![0.0; d_len];
            for t in 0..t_len {
                for (a, v) in acc.iter_mut().zip(matrix.row(t)) {
                    *a += v;
                }
            }
            acc.iter().map(|a| a / t_len as f64).collect()
        }
        Aggregation::Middle => matrix.row(t_len / 2).to_vec(),
        Aggregation::Flat => matrix.data().to_vec(),
    };
    AggregatedVector {
        values,
        aggregation: kind,
        source_shape: (t_len, d_len),
    }
}
