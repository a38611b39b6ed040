//! Core signal processing: framing, windowing, STFT, mel filterbank, DCT,
//! MFCC matrices, and 227x227 log-magnitude spectrogram images.

pub mod fft;
pub mod resample;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::ingest::AudioClip;

pub use fft::fft_forward;
pub use resample::resample;

/// Side length of the square spectrogram image fed to image-sized models.
pub const SPECTROGRAM_SIZE: usize = 227;

/// MFCC extraction constants: 2048-point FFT with a 1024-sample hop at
/// 44.1 kHz gives 44 frames per 1000 ms, and 40 of 128 mel bands are kept,
/// so one clip flattens to 44 x 40 = 1760 values.
pub const MFCC_FFT_SIZE: usize = 2048;
pub const MFCC_HOP: usize = 1024;
pub const MFCC_N_MELS: usize = 128;
pub const MFCC_N_COEFFS: usize = 40;

const MEL_LOG_FLOOR: f64 = 1e-10;

/// A time x descriptor matrix with frame-period metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatrix {
    values: Vec<f64>, // row-major T x D
    rows: usize,
    cols: usize,
    pub frame_period_ms: f64,
    pub descriptor_names: Vec<String>,
}

impl FrameMatrix {
    pub fn new(
        values: Vec<f64>,
        rows: usize,
        cols: usize,
        frame_period_ms: f64,
        descriptor_names: Vec<String>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dsp("frame matrix must be at least 1x1".into()));
        }
        if values.len() != rows * cols {
            return Err(Error::Dsp(format!(
                "frame matrix size mismatch: {} values for {rows}x{cols}",
                values.len()
            )));
        }
        if descriptor_names.len() != cols {
            return Err(Error::Dsp(format!(
                "{} descriptor names for {cols} columns",
                descriptor_names.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Dsp(format!("non-finite value {bad} in frame matrix")));
        }
        Ok(Self {
            values,
            rows,
            cols,
            frame_period_ms,
            descriptor_names,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.cols..(t + 1) * self.cols]
    }

    pub fn get(&self, t: usize, d: usize) -> f64 {
        self.values[t * self.cols + d]
    }

    /// Row-major backing slice (length `rows * cols`).
    pub fn data(&self) -> &[f64] {
        &self.values
    }

    /// One descriptor contour over time.
    pub fn column(&self, d: usize) -> Vec<f64> {
        (0..self.rows).map(|t| self.get(t, d)).collect()
    }
}

/// Normalized 227x227 log-magnitude time x frequency image.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrogramImage {
    /// Row-major, rows = time, cols = frequency, values in [0, 1].
    pub values: Vec<f64>,
}

impl SpectrogramImage {
    pub fn get(&self, t: usize, f: usize) -> f64 {
        self.values[t * SPECTROGRAM_SIZE + f]
    }

    /// View as a frame matrix: 227 time steps with 227 frequency channels.
    pub fn to_frame_matrix(&self, clip_ms: f64) -> FrameMatrix {
        let names = (0..SPECTROGRAM_SIZE).map(|i| format!("freq_{i:03}")).collect();
        FrameMatrix::new(
            self.values.clone(),
            SPECTROGRAM_SIZE,
            SPECTROGRAM_SIZE,
            clip_ms / SPECTROGRAM_SIZE as f64,
            names,
        )
        .expect("spectrogram image is a valid matrix")
    }
}

/// Complex STFT output: `frames` x `bins`, row-major.
#[derive(Debug, Clone)]
pub struct Stft {
    pub frames: usize,
    pub bins: usize,
    pub data: Vec<Complex64>,
}

impl Stft {
    pub fn frame(&self, t: usize) -> &[Complex64] {
        &self.data[t * self.bins..(t + 1) * self.bins]
    }
}

/// Periodic (DFT-even) Hann window: `w[k] = 0.5 - 0.5 cos(2 pi k / n)`.
pub fn hann_window(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::Dsp(format!("window length {n} too short, need >= 2")));
    }
    Ok((0..n)
        .map(|k| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos())
        .collect())
}

/// Frame count of a non-centered analysis: `floor((n - window) / hop) + 1`.
pub fn frame_count(n_samples: usize, window: usize, hop: usize) -> usize {
    if n_samples < window {
        0
    } else {
        (n_samples - window) / hop + 1
    }
}

/// Short-time Fourier transform with a periodic Hann window, zero-padded to
/// `fft_size`. Frames start at multiples of the hop (no centering), so the
/// frame count is `floor((N - W) / H) + 1`.
pub fn stft(clip: &AudioClip, window_ms: f64, hop_ms: f64, fft_size: usize) -> Result<Stft> {
    if !fft_size.is_power_of_two() {
        return Err(Error::Dsp(format!("fft_size {fft_size} is not a power of two")));
    }
    if hop_ms <= 0.0 {
        return Err(Error::Dsp("hop must be positive".into()));
    }
    let rate = f64::from(clip.sample_rate);
    let window = (window_ms * rate / 1000.0).round() as usize;
    let hop = (hop_ms * rate / 1000.0).round() as usize;
    if window < 2 || hop == 0 {
        return Err(Error::Dsp("window/hop too small".into()));
    }
    if window > fft_size {
        return Err(Error::Dsp(format!(
            "window of {window} samples exceeds fft_size {fft_size}"
        )));
    }
    if clip.samples.len() < window {
        return Err(Error::ClipTooShort {
            samples: clip.samples.len(),
            needed: window,
        });
    }

    let weights = hann_window(window)?;
    let frames = frame_count(clip.samples.len(), window, hop);
    let bins = fft_size / 2 + 1;
    let mut data = Vec::with_capacity(frames * bins);
    let mut buf = vec![Complex64::new(0.0, 0.0); fft_size];
    for t in 0..frames {
        let start = t * hop;
        for (k, slot) in buf.iter_mut().enumerate() {
            let v = if k < window {
                clip.samples[start + k] * weights[k]
            } else {
                0.0
            };
            *slot = Complex64::new(v, 0.0);
        }
        fft::fft_in_place(&mut buf);
        data.extend_from_slice(&buf[..bins]);
    }

    Ok(Stft { frames, bins, data })
}

/// 227x227 spectrogram image of a ~1000 ms clip at 44.1 kHz.
///
/// Pipeline: 16 ms / 8 ms STFT (706/353 samples, FFT 1024), `log(1 + |X|)`,
/// bilinear resize to 227 x 227 laid out time x frequency, then per-image
/// min-max normalization into [0, 1]. A constant pre-normalization image
/// (silent or degenerate input) is an error.
pub fn spectrogram_image(clip: &AudioClip) -> Result<SpectrogramImage> {
    if clip.sample_rate != 44100 {
        return Err(Error::WrongSampleRate {
            expected: 44100,
            got: clip.sample_rate,
        });
    }
    let spec = stft(clip, 16.0, 8.0, 1024)?;
    if spec.frames < 2 {
        return Err(Error::ClipTooShort {
            samples: clip.samples.len(),
            needed: 2 * 353 + 706,
        });
    }
    let log_mag: Vec<f64> = spec.data.iter().map(|c| (1.0 + c.norm()).ln()).collect();
    let resized = bilinear_resize(
        &log_mag,
        spec.frames,
        spec.bins,
        SPECTROGRAM_SIZE,
        SPECTROGRAM_SIZE,
    );

    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in &resized {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let range = hi - lo;
    if range < 1e-6 {
        return Err(Error::DegenerateSpectrogram { range });
    }
    let values = resized.iter().map(|v| (v - lo) / range).collect();
    Ok(SpectrogramImage { values })
}

/// Bilinear resize of a row-major matrix; corners map to corners.
fn bilinear_resize(
    src: &[f64],
    src_rows: usize,
    src_cols: usize,
    dst_rows: usize,
    dst_cols: usize,
) -> Vec<f64> {
    assert!(src_rows >= 2 && src_cols >= 2);
    let mut out = Vec::with_capacity(dst_rows * dst_cols);
    let row_scale = (src_rows - 1) as f64 / (dst_rows - 1) as f64;
    let col_scale = (src_cols - 1) as f64 / (dst_cols - 1) as f64;
    for i in 0..dst_rows {
        let y = i as f64 * row_scale;
        let y0 = (y as usize).min(src_rows - 2);
        let fy = y - y0 as f64;
        for j in 0..dst_cols {
            let x = j as f64 * col_scale;
            let x0 = (x as usize).min(src_cols - 2);
            let fx = x - x0 as f64;
            let v00 = src[y0 * src_cols + x0];
            let v01 = src[y0 * src_cols + x0 + 1];
            let v10 = src[(y0 + 1) * src_cols + x0];
            let v11 = src[(y0 + 1) * src_cols + x0 + 1];
            out.push(
                v00 * (1.0 - fy) * (1.0 - fx)
                    + v01 * (1.0 - fy) * fx
                    + v10 * fy * (1.0 - fx)
                    + v11 * fy * fx,
            );
        }
    }
    out
}

/// Triangular mel filterbank with centers equally spaced on the mel scale.
/// Filters peak at 1 (no area normalization).
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    pub n_filters: usize,
    pub f_min: f64,
    pub f_max: f64,
    n_bins: usize,
    /// Dense weights, `n_filters` rows of `n_bins` values.
    weights: Vec<f64>,
}

impl MelFilterbank {
    pub fn weights_of(&self, filter: usize) -> &[f64] {
        &self.weights[filter * self.n_bins..(filter + 1) * self.n_bins]
    }

    /// Filterbank energies of a power spectrum (`n_bins` values).
    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        assert_eq!(power.len(), self.n_bins);
        (0..self.n_filters)
            .map(|f| {
                self.weights_of(f)
                    .iter()
                    .zip(power)
                    .map(|(w, p)| w * p)
                    .sum()
            })
            .collect()
    }
}

/// `mel = 2595 log10(1 + f / 700)`.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

pub fn mel_filterbank(
    n_filters: usize,
    fft_size: usize,
    sample_rate: u32,
    f_min: f64,
    f_max: f64,
) -> Result<MelFilterbank> {
    if n_filters == 0 {
        return Err(Error::Dsp("need at least one mel filter".into()));
    }
    if f_min >= f_max {
        return Err(Error::Dsp(format!("f_min {f_min} must be below f_max {f_max}")));
    }
    let nyquist = f64::from(sample_rate) / 2.0;
    if f_max > nyquist + 1e-9 {
        return Err(Error::Dsp(format!("f_max {f_max} above Nyquist {nyquist}")));
    }

    let n_bins = fft_size / 2 + 1;
    let mel_lo = hz_to_mel(f_min);
    let mel_hi = hz_to_mel(f_max);
    // n_filters + 2 edge points
    let edges: Vec<f64> = (0..n_filters + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_filters + 1) as f64))
        .collect();

    let bin_hz = f64::from(sample_rate) / fft_size as f64;
    let mut weights = vec![0.0; n_filters * n_bins];
    for f in 0..n_filters {
        let (lo, center, hi) = (edges[f], edges[f + 1], edges[f + 2]);
        let mut sum = 0.0;
        for bin in 0..n_bins {
            let freq = bin as f64 * bin_hz;
            let w = if freq >= lo && freq <= center && center > lo {
                (freq - lo) / (center - lo)
            } else if freq > center && freq <= hi && hi > center {
                (hi - freq) / (hi - center)
            } else {
                0.0
            };
            weights[f * n_bins + bin] = w;
            sum += w;
        }
        if sum <= 0.0 {
            return Err(Error::Dsp(format!(
                "mel filter {f} covers no FFT bin (too many filters for fft_size {fft_size})"
            )));
        }
    }

    Ok(MelFilterbank {
        n_filters,
        f_min,
        f_max,
        n_bins,
        weights,
    })
}

/// Orthonormal DCT-II along each row, keeping the first `n_out` coefficients.
pub fn dct_ii(rows: &[Vec<f64>], n_out: usize) -> Result<Vec<Vec<f64>>> {
    let m = rows.first().map(|r| r.len()).unwrap_or(0);
    if m == 0 {
        return Err(Error::Dsp("dct input is empty".into()));
    }
    if n_out > m {
        return Err(Error::Dsp(format!("dct n_out {n_out} exceeds input size {m}")));
    }
    let scale0 = (1.0 / m as f64).sqrt();
    let scale = (2.0 / m as f64).sqrt();
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        assert_eq!(row.len(), m, "ragged dct input");
        let mut coeffs = Vec::with_capacity(n_out);
        for k in 0..n_out {
            let mut acc = 0.0;
            for (j, &v) in row.iter().enumerate() {
                acc += v
                    * (std::f64::consts::PI * k as f64 * (2.0 * j as f64 + 1.0) / (2.0 * m as f64))
                        .cos();
            }
            coeffs.push(acc * if k == 0 { scale0 } else { scale });
        }
        out.push(coeffs);
    }
    Ok(out)
}

/// 40 MFCCs of a 1000 ms clip at 44.1 kHz, as a 44 x 40 frame matrix.
///
/// Frames are centered (the signal is reflect-padded by half an FFT on each
/// side), which puts exactly `floor(N / hop) + 1 = 44` frames in one second.
/// Mel energies are computed from the power spectrum with 128 filters over
/// [0, 22050] Hz, floored at 1e-10 before the log, then reduced by an
/// orthonormal DCT-II.
pub fn mfcc(clip: &AudioClip) -> Result<FrameMatrix> {
    if clip.sample_rate != 44100 {
        return Err(Error::WrongSampleRate {
            expected: 44100,
            got: clip.sample_rate,
        });
    }
    if clip.samples.len() != 44100 {
        return Err(Error::WrongClipLength {
            expected: 44100,
            got: clip.samples.len(),
        });
    }

    let fb = mel_filterbank(MFCC_N_MELS, MFCC_FFT_SIZE, clip.sample_rate, 0.0, 22050.0)?;
    let window = hann_window(MFCC_FFT_SIZE)?;
    let padded = reflect_pad(&clip.samples, MFCC_FFT_SIZE / 2);
    let frames = (clip.samples.len() / MFCC_HOP) + 1;

    let mut log_mels = Vec::with_capacity(frames);
    let mut buf = vec![Complex64::new(0.0, 0.0); MFCC_FFT_SIZE];
    for t in 0..frames {
        let start = t * MFCC_HOP;
        for (k, slot) in buf.iter_mut().enumerate() {
            *slot = Complex64::new(padded[start + k] * window[k], 0.0);
        }
        fft::fft_in_place(&mut buf);
        let power: Vec<f64> = buf[..MFCC_FFT_SIZE / 2 + 1].iter().map(|c| c.norm_sqr()).collect();
        let mels = fb.apply(&power);
        log_mels.push(mels.iter().map(|&e| e.max(MEL_LOG_FLOOR).ln()).collect::<Vec<f64>>());
    }

    let coeffs = dct_ii(&log_mels, MFCC_N_COEFFS)?;
    let values: Vec<f64> = coeffs.into_iter().flatten().collect();
    let names = (0..MFCC_N_COEFFS).map(|i| format!("mfcc_{i:02}")).collect();
    FrameMatrix::new(
        values,
        frames,
        MFCC_N_COEFFS,
        MFCC_HOP as f64 * 1000.0 / 44100.0,
        names,
    )
}

/// Reflect padding without edge repetition: `[x[p], .., x[1], x[0], x[1], ..]`.
pub(crate) fn reflect_pad(x: &[f64], pad: usize) -> Vec<f64> {
    assert!(pad < x.len(), "reflect pad {pad} too large for {} samples", x.len());
    let n = x.len();
    let mut out = Vec::with_capacity(n + 2 * pad);
    for i in 0..pad {
        out.push(x[pad - i]);
    }
    out.extend_from_slice(x);
    for i in 0..pad {
        out.push(x[n - 2 - i]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn sine_clip(freq: f64, rate: u32, n: usize, amp: f64) -> AudioClip {
        let samples = (0..n)
            .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / f64::from(rate)).sin())
            .collect();
        AudioClip::new(samples, rate)
    }

    #[test]
    fn hann_closed_form_n4() {
        let w = hann_window(4).unwrap();
        let expected = [0.0, 0.5, 1.0, 0.5];
        for (a, b) in w.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn hann_starts_at_zero() {
        for n in [2, 3, 16, 255, 706, 2048] {
            assert_eq!(hann_window(n).unwrap()[0], 0.0);
        }
        assert!(hann_window(1).is_err());
    }

    #[test]
    fn hann_half_overlap_is_cola() {
        // 50 % overlapped periodic Hann windows sum to 1 in steady state.
        let n = 706;
        let hop = n / 2;
        let w = hann_window(n).unwrap();
        let mut acc = vec![0.0; n * 6];
        let mut start = 0;
        while start + n <= acc.len() {
            for k in 0..n {
                acc[start + k] += w[k];
            }
            start += hop;
        }
        for (i, v) in acc.iter().enumerate().take(acc.len() - n).skip(n) {
            assert!((v - 1.0).abs() < 1e-9, "COLA broken at {i}: {v}");
        }
    }

    #[test]
    fn stft_sine_peaks_at_analytic_bin() {
        let clip = sine_clip(1000.0, 44100, 44100, 0.5);
        let spec = stft(&clip, 16.0, 8.0, 1024).unwrap();
        let expected = (1000.0_f64 * 1024.0 / 44100.0).round() as usize;
        for t in 0..spec.frames {
            let frame = spec.frame(t);
            let peak = (0..spec.bins)
                .max_by(|&a, &b| frame[a].norm().partial_cmp(&frame[b].norm()).unwrap())
                .unwrap();
            assert!(
                (peak as i64 - expected as i64).abs() <= 1,
                "frame {t}: peak {peak} expected {expected}"
            );
        }
    }

    #[test]
    fn stft_dc_energy_stays_at_the_bottom_bins() {
        // With a full-length periodic Hann window the DFT of a constant has
        // support on bins 0 and 1 only (the window transform), nothing above.
        let clip = AudioClip::new(vec![0.5; 2048], 16000);
        let spec = stft(&clip, 1024.0 * 1000.0 / 16000.0, 512.0 * 1000.0 / 16000.0, 1024).unwrap();
        for t in 0..spec.frames {
            let frame = spec.frame(t);
            let peak = (0..spec.bins)
                .max_by(|&a, &b| frame[a].norm().partial_cmp(&frame[b].norm()).unwrap())
                .unwrap();
            assert_eq!(peak, 0);
            let tail: f64 = frame[2..].iter().map(|c| c.norm_sqr()).sum();
            let total: f64 = frame.iter().map(|c| c.norm_sqr()).sum();
            assert!(tail / total < 1e-18, "leak beyond bin 1: {}", tail / total);
        }
    }

    #[test]
    fn stft_frame_count_formula() {
        // 1000 ms at 44.1 kHz with 16 ms / 8 ms -> W=706, H=353, T=123.
        let clip = sine_clip(440.0, 44100, 44100, 0.5);
        let spec = stft(&clip, 16.0, 8.0, 1024).unwrap();
        assert_eq!(spec.frames, 123);
        assert_eq!(spec.bins, 513);
        assert_eq!(frame_count(44100, 706, 353), 123);
    }

    #[test]
    fn stft_rejects_short_clip() {
        let clip = sine_clip(440.0, 44100, 100, 0.5);
        assert!(matches!(
            stft(&clip, 16.0, 8.0, 1024).unwrap_err(),
            Error::ClipTooShort { .. }
        ));
    }

    #[test]
    fn spectrogram_shape_and_range() {
        let clip = sine_clip(900.0, 44100, 44100, 0.4);
        let img = spectrogram_image(&clip).unwrap();
        assert_eq!(img.values.len(), SPECTROGRAM_SIZE * SPECTROGRAM_SIZE);
        assert!(img.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in &img.values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        assert_eq!(lo, 0.0);
        assert_eq!(hi, 1.0);
    }

    #[test]
    fn spectrogram_shape_survives_length_jitter() {
        // +-5 ms of clip-length jitter must not change the output shape.
        for n in [44100 - 220, 44100, 44100 + 220] {
            let clip = sine_clip(500.0, 44100, n, 0.4);
            let img = spectrogram_image(&clip).unwrap();
            assert_eq!(img.values.len(), SPECTROGRAM_SIZE * SPECTROGRAM_SIZE);
        }
    }

    #[test]
    fn spectrogram_rejects_dithered_silence() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let samples: Vec<f64> = (0..44100).map(|_| rng.random_range(-1e-9..1e-9)).collect();
        let clip = AudioClip::new(samples, 44100);
        assert!(matches!(
            spectrogram_image(&clip).unwrap_err(),
            Error::DegenerateSpectrogram { .. }
        ));
    }

    #[test]
    fn spectrogram_gain_invariance_after_normalization() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let base: Vec<f64> = (0..44100)
            .map(|i| {
                0.2 * (2.0 * std::f64::consts::PI * 320.0 * i as f64 / 44100.0).sin()
                    + 0.05 * rng.random_range(-1.0..1.0)
            })
            .collect();
        let doubled: Vec<f64> = base.iter().map(|v| v * 2.0).collect();
        let a = spectrogram_image(&AudioClip::new(base, 44100)).unwrap();
        let b = spectrogram_image(&AudioClip::new(doubled, 44100)).unwrap();
        assert_ne!(a.values, b.values);
        // Pearson correlation of the normalized images stays near 1.
        let n = a.values.len() as f64;
        let mean = |xs: &[f64]| xs.iter().sum::<f64>() / n;
        let (ma, mb) = (mean(&a.values), mean(&b.values));
        let mut num = 0.0;
        let mut va = 0.0;
        let mut vb = 0.0;
        for (x, y) in a.values.iter().zip(&b.values) {
            num += (x - ma) * (y - mb);
            va += (x - ma) * (x - ma);
            vb += (y - mb) * (y - mb);
        }
        let corr = num / (va.sqrt() * vb.sqrt());
        assert!(corr > 0.99, "correlation {corr}");
    }

    #[test]
    fn mel_scale_closed_forms() {
        assert_eq!(hz_to_mel(0.0), 0.0);
        let m700 = hz_to_mel(700.0);
        assert!((m700 - 2595.0 * 2f64.log10()).abs() < 1e-9);
        assert!((m700 - 781.17).abs() < 0.01);
        assert!((mel_to_hz(m700) - 700.0).abs() < 1e-9);
    }

    #[test]
    fn mel_filter_bin_sums_bounded_by_one() {
        let fb = mel_filterbank(128, 2048, 44100, 0.0, 22050.0).unwrap();
        let n_bins = 2048 / 2 + 1;
        for bin in 0..n_bins {
            let total: f64 = (0..fb.n_filters).map(|f| fb.weights_of(f)[bin]).sum();
            assert!(total <= 1.0 + 1e-9, "bin {bin} sums to {total}");
        }
    }

    #[test]
    fn mel_rejects_inverted_band() {
        assert!(mel_filterbank(40, 1024, 16000, 4000.0, 300.0).is_err());
    }

    #[test]
    fn dct_constant_row_concentrates_in_coefficient_zero() {
        let out = dct_ii(&[vec![3.0; 16]], 16).unwrap();
        assert!((out[0][0] - 3.0 * 16.0 * (1.0 / 16.0f64).sqrt()).abs() < 1e-12);
        for &c in &out[0][1..] {
            assert!(c.abs() < 1e-12);
        }
    }

    #[test]
    fn dct_round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let m = 32;
        let row: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let coeffs = dct_ii(std::slice::from_ref(&row), m).unwrap();
        // Independent inverse (orthonormal DCT-III) reconstructs the input.
        let scale0 = (1.0 / m as f64).sqrt();
        let scale = (2.0 / m as f64).sqrt();
        for (j, &x) in row.iter().enumerate() {
            let mut acc = 0.0;
            for (k, &c) in coeffs[0].iter().enumerate() {
                let s = if k == 0 { scale0 } else { scale };
                acc += s
                    * c
                    * (std::f64::consts::PI * k as f64 * (2.0 * j as f64 + 1.0) / (2.0 * m as f64))
                        .cos();
            }
            assert!((acc - x).abs() < 1e-9, "j={j}: {acc} vs {x}");
        }
    }

    #[test]
    fn dct_basis_row_hits_single_coefficient() {
        let m = 24;
        let k_target = 5;
        let row: Vec<f64> = (0..m)
            .map(|j| {
                (std::f64::consts::PI * k_target as f64 * (2.0 * j as f64 + 1.0) / (2.0 * m as f64))
                    .cos()
            })
            .collect();
        let out = dct_ii(&[row], m).unwrap();
        for (k, &c) in out[0].iter().enumerate() {
            if k == k_target {
                assert!((c - (m as f64 / 2.0).sqrt()).abs() < 1e-9);
            } else {
                assert!(c.abs() < 1e-9, "coefficient {k} = {c}");
            }
        }
    }

    #[test]
    fn dct_rejects_oversized_output() {
        assert!(dct_ii(&[vec![1.0; 4]], 5).is_err());
    }

    #[test]
    fn mfcc_shape_is_44_by_40() {
        let clip = sine_clip(440.0, 44100, 44100, 0.5);
        let m = mfcc(&clip).unwrap();
        assert_eq!(m.rows(), 44);
        assert_eq!(m.cols(), 40);
        assert_eq!(m.data().len(), 1760);
    }

    #[test]
    fn mfcc_rejects_wrong_rate_or_length() {
        assert!(matches!(
            mfcc(&sine_clip(440.0, 16000, 16000, 0.5)).unwrap_err(),
            Error::WrongSampleRate { .. }
        ));
        assert!(matches!(
            mfcc(&sine_clip(440.0, 44100, 44000, 0.5)).unwrap_err(),
            Error::WrongClipLength { .. }
        ));
    }

    #[test]
    fn mfcc_deterministic() {
        let clip = sine_clip(250.0, 44100, 44100, 0.5);
        assert_eq!(mfcc(&clip).unwrap().data(), mfcc(&clip).unwrap().data());
    }

    #[test]
    fn mfcc_white_noise_dominated_by_coefficient_zero() {
        // Over seeded noise clips, |c0| must dwarf the mean magnitude of the
        // higher coefficients.
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        let mut c0_mean = 0.0;
        let mut rest_mean = 0.0;
        let trials = 100;
        for _ in 0..trials {
            let samples: Vec<f64> = (0..44100).map(|_| rng.random_range(-0.5..0.5)).collect();
            let m = mfcc(&AudioClip::new(samples, 44100)).unwrap();
            for t in 0..m.rows() {
                let row = m.row(t);
                c0_mean += row[0].abs();
                rest_mean += row[1..].iter().map(|v| v.abs()).sum::<f64>() / 39.0;
            }
        }
        c0_mean /= (trials * 44) as f64;
        rest_mean /= (trials * 44) as f64;
        assert!(
            c0_mean > 10.0 * rest_mean,
            "c0 {c0_mean} vs higher {rest_mean}"
        );
    }

    #[test]
    fn dsp_outputs_finite_for_bounded_signals() {
        let mut rng = ChaCha20Rng::seed_from_u64(23);
        for _ in 0..3 {
            let samples: Vec<f64> = (0..44100).map(|_| rng.random_range(-1.0..1.0)).collect();
            let clip = AudioClip::new(samples, 44100);
            assert!(mfcc(&clip).unwrap().data().iter().all(|v| v.is_finite()));
            let img = spectrogram_image(&clip).unwrap();
            assert!(img.values.iter().all(|v| v.is_finite()));
            let down = resample(&clip, 16000).unwrap();
            assert!(down.samples.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn reflect_pad_mirrors_without_edge_repeat() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let p = reflect_pad(&x, 2);
        assert_eq!(p, vec![3.0, 2.0, 1.0, 2.0, 3.0, 4.0, 5.0, 4.0, 3.0]);
    }
}
