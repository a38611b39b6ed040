//! Minimal RIFF/WAVE codec: 16-bit linear PCM, mono or stereo in, mono out.

use crate::error::{Error, Result};
use crate::ingest::AudioClip;

const FORMAT_PCM: u16 = 1;

fn err(msg: impl Into<String>) -> Error {
    Error::Wav(msg.into())
}

fn read_u16(bytes: &[u8], at: usize) -> Result<u16> {
    bytes
        .get(at..at + 2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
        .ok_or_else(|| err("truncated stream"))
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| err("truncated stream"))
}

/// Decode a RIFF/WAVE stream holding 16-bit linear PCM.
///
/// Stereo is averaged to mono. Integer samples are scaled by 1/32768, so the
/// result lies in [-1, 1) and -32768 maps to exactly -1.0.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(err("not a RIFF/WAVE stream"));
    }

    let mut pos = 12;
    let mut fmt: Option<(u16, u16, u32, u16)> = None; // (format, channels, rate, bits)
    let mut data: Option<&[u8]> = None;

    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = read_u32(bytes, pos + 4)? as usize;
        let body_start = pos + 8;
        if body_start + size > bytes.len() {
            return Err(err("truncated stream"));
        }
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(err("fmt chunk too small"));
                }
                let format = read_u16(bytes, body_start)?;
                let channels = read_u16(bytes, body_start + 2)?;
                let rate = read_u32(bytes, body_start + 4)?;
                let bits = read_u16(bytes, body_start + 14)?;
                fmt = Some((format, channels, rate, bits));
            }
            b"data" => data = Some(&bytes[body_start..body_start + size]),
            _ => {}
        }
        // chunks are word-aligned
        pos = body_start + size + (size & 1);
    }

    let (format, channels, rate, bits) = fmt.ok_or_else(|| err("no fmt chunk"))?;
    if format != FORMAT_PCM || bits != 16 {
        return Err(err(format!(
            "unsupported codec: format {format}, {bits} bits (need 16-bit linear PCM)"
        )));
    }
    if channels == 0 || channels > 2 {
        return Err(err(format!("unsupported channel count {channels}")));
    }
    if rate == 0 {
        return Err(err("zero sample rate"));
    }
    let data = data.ok_or_else(|| err("no data chunk"))?;

    let bytes_per_frame = 2 * channels as usize;
    if data.len() % bytes_per_frame != 0 {
        return Err(err("truncated stream"));
    }
    let n_frames = data.len() / bytes_per_frame;
    let mut samples = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let at = f * bytes_per_frame;
        let mut acc = 0.0f64;
        for c in 0..channels as usize {
            let s = i16::from_le_bytes([data[at + 2 * c], data[at + 2 * c + 1]]);
            acc += f64::from(s) / 32768.0;
        }
        samples.push(acc / f64::from(channels));
    }
    if samples.is_empty() {
        return Err(err("empty data chunk"));
    }

    Ok(AudioClip::new(samples, rate))
}

/// Encode a mono clip as 16-bit PCM WAVE.
///
/// Samples are clamped to [-1, 1] and quantized with round-half-away-from-zero
/// so encoding is bit-reproducible.
pub fn encode_wav(clip: &AudioClip) -> Vec<u8> {
    let n = clip.samples.len();
    let data_len = (n * 2) as u32;
    let mut out = Vec::with_capacity(44 + n * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&clip.sample_rate.to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in &clip.samples {
        let v = (s.clamp(-1.0, 1.0) * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pcm16_wav(rate: u32, channels: u16, frames: &[i16]) -> Vec<u8> {
        let data_len = (frames.len() * 2) as u32;
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&(36 + data_len).to_le_bytes());
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&channels.to_le_bytes());
        out.extend_from_slice(&rate.to_le_bytes());
        out.extend_from_slice(&(rate * 2 * u32::from(channels)).to_le_bytes());
        out.extend_from_slice(&(2 * channels).to_le_bytes());
        out.extend_from_slice(&16u16.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&data_len.to_le_bytes());
        for &f in frames {
            out.extend_from_slice(&f.to_le_bytes());
        }
        out
    }

    #[test]
    fn mono_44k1_second() {
        let frames: Vec<i16> = (0..44100).map(|i| (i % 100) as i16).collect();
        let clip = decode_wav(&pcm16_wav(44100, 1, &frames)).unwrap();
        assert_eq!(clip.samples.len(), 44100);
        assert_eq!(clip.sample_rate, 44100);
    }

    #[test]
    fn scale_boundary_is_minus_one() {
        let clip = decode_wav(&pcm16_wav(44100, 1, &[i16::MIN, 0, i16::MAX])).unwrap();
        assert_eq!(clip.samples[0], -1.0);
        assert_eq!(clip.samples[1], 0.0);
        assert!(clip.samples[2] < 1.0 && clip.samples[2] > 0.999);
    }

    #[test]
    fn stereo_averages_to_mono() {
        // L = +0.5, R = -0.5 everywhere
        let mut frames = Vec::new();
        for _ in 0..100 {
            frames.push(16384i16);
            frames.push(-16384i16);
        }
        let clip = decode_wav(&pcm16_wav(44100, 2, &frames)).unwrap();
        assert_eq!(clip.samples.len(), 100);
        assert!(clip.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn truncated_stream_rejected() {
        let wav = pcm16_wav(44100, 1, &[1, 2, 3, 4]);
        let cut = &wav[..wav.len() - 3];
        assert!(decode_wav(cut).is_err());
    }

    #[test]
    fn unsupported_bit_depth_rejected() {
        let mut wav = pcm16_wav(44100, 1, &[0; 8]);
        wav[34] = 24; // bits-per-sample field
        let e = decode_wav(&wav).unwrap_err();
        assert!(e.to_string().contains("unsupported codec"));
    }

    #[test]
    fn encode_decode_round_trip() {
        let clip = AudioClip::new(vec![0.0, 0.25, -0.25, 0.5, -1.0], 16000);
        let back = decode_wav(&encode_wav(&clip)).unwrap();
        assert_eq!(back.sample_rate, 16000);
        for (a, b) in clip.samples.iter().zip(&back.samples) {
            assert!((a - b).abs() < 1.0 / 32768.0 + 1e-12);
        }
        assert_eq!(back.samples[4], -1.0);
    }
}
