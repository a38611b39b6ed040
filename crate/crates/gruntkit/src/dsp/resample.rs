//! Rational-ratio polyphase resampler: Kaiser-windowed sinc, 64 taps per
//! phase, cutoff at 0.45x the target rate. 44100 -> 16000 reduces to the
//! ratio 160/441.

use crate::error::{Error, Result};
use crate::ingest::AudioClip;

const TAPS: usize = 64;
const HALF: i64 = (TAPS / 2) as i64;
/// Kaiser shape for roughly 60 dB stopband attenuation.
const KAISER_BETA: f64 = 5.653;

/// Resample to a lower (or equal) rate. Equal rates are an exact identity.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    if clip.samples.is_empty() {
        return Err(Error::ClipTooShort {
            samples: 0,
            needed: 1,
        });
    }
    if target_rate > clip.sample_rate {
        return Err(Error::UpsampleUnsupported {
            target: target_rate,
            from: clip.sample_rate,
        });
    }
    if target_rate == clip.sample_rate {
        return Ok(clip.clone());
    }

    let g = gcd(u64::from(target_rate), u64::from(clip.sample_rate));
    let up = (u64::from(target_rate) / g) as usize; // L: phases
    let down = (u64::from(clip.sample_rate) / g) as usize; // M

    let phases = phase_tables(up, f64::from(target_rate), f64::from(clip.sample_rate));

    let n = clip.samples.len();
    let out_len = (n * up).div_ceil(down);
    let mut out = Vec::with_capacity(out_len);
    let x = &clip.samples;
    for m in 0..out_len {
        let num = m * down;
        let n0 = (num / up) as i64;
        let phase = num % up;
        let taps = &phases[phase];
        let mut acc = 0.0;
        for (k, w) in taps.iter().enumerate() {
            let j = n0 - HALF + 1 + k as i64;
            if j >= 0 && (j as usize) < n {
                acc += w * x[j as usize];
            }
        }
        out.push(acc);
    }

    Ok(AudioClip {
        samples: out,
        sample_rate: target_rate,
        source: clip.source.clone(),
    })
}

/// One normalized windowed-sinc tap set per fractional phase p/up.
fn phase_tables(up: usize, target_rate: f64, source_rate: f64) -> Vec<Vec<f64>> {
    let cutoff = 0.45 * target_rate / source_rate; // cycles per source sample
    let mut tables = Vec::with_capacity(up);
    for p in 0..up {
        let frac = p as f64 / up as f64;
        let mut taps = Vec::with_capacity(TAPS);
        let mut sum = 0.0;
        for k in 0..TAPS {
            // input index j = n0 - HALF + 1 + k; dt = (n0 + frac) - j
            let dt = frac + (HALF - 1 - k as i64) as f64;
            let w = 2.0 * cutoff * sinc(2.0 * cutoff * dt) * kaiser(dt / HALF as f64);
            taps.push(w);
            sum += w;
        }
        // unity DC gain per phase
        for w in taps.iter_mut() {
            *w /= sum;
        }
        tables.push(taps);
    }
    tables
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

fn kaiser(t: f64) -> f64 {
    if t.abs() > 1.0 {
        return 0.0;
    }
    bessel_i0(KAISER_BETA * (1.0 - t * t).sqrt()) / bessel_i0(KAISER_BETA)
}

/// Modified Bessel function of the first kind, order zero (power series).
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half_x = x / 2.0;
    for k in 1..=30 {
        term *= (half_x / k as f64) * (half_x / k as f64);
        sum += term;
        if term < 1e-16 * sum {
            break;
        }
    }
    sum
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
