//! Fundamental-frequency estimation by normalized autocorrelation.

/// Search range for the fundamental, in Hz.
pub const F0_MIN_HZ: f64 = 60.0;
pub const F0_MAX_HZ: f64 = 1200.0;

/// Frames whose best normalized correlation falls below this are unvoiced.
pub const VOICING_THRESHOLD: f64 = 0.45;

/// Peaks within this factor of the global maximum compete for selection.
const OCTAVE_BAND: f64 = 0.9;

/// A per-frame pitch estimate. `f0` is `None` on unvoiced frames; unvoiced is
/// a value, not an error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pitch {
    pub f0: Option<f64>,
    pub voicing: f64,
}

impl Pitch {
    pub const UNVOICED: Pitch = Pitch { f0: None, voicing: 0.0 };
}

/// Estimate F0 of one analysis frame.
///
/// Normalized cross-correlation is evaluated over lags covering 60-1200 Hz
/// (clamped to half the frame length). Octave selection: every correlation
/// peak within 10 % of the global maximum is a candidate and the smallest
/// candidate lag wins. A pure tone correlates equally at every period
/// multiple, so this resolves to the true period; a sub-octave component
/// takes over exactly when the upper peak decays below the 10 % band, which
/// mitigates pitch halving and doubling in one rule.
pub fn f0_autocorrelation(frame: &[f64], rate: u32) -> Pitch {
    let n = frame.len();
    let rate_f = f64::from(rate);
    let lag_min = (rate_f / F0_MAX_HZ).round() as usize;
    let lag_max = ((rate_f / F0_MIN_HZ).round() as usize).min(n / 2);
    if lag_min < 1 || lag_max <= lag_min + 1 {
        return Pitch::UNVOICED;
    }

    let mean = frame.iter().sum::<f64>() / n as f64;
    let x: Vec<f64> = frame.iter().map(|v| v - mean).collect();

    // prefix sums of x^2 for O(1) normalization terms
    let mut energy_prefix = vec![0.0; n + 1];
    for (i, &v) in x.iter().enumerate() {
        energy_prefix[i + 1] = energy_prefix[i] + v * v;
    }
    if energy_prefix[n] < 1e-12 {
        return Pitch::UNVOICED;
    }

    let mut corr = vec![0.0; lag_max + 2];
    for (lag, c) in corr.iter_mut().enumerate().take(lag_max + 2).skip(lag_min.saturating_sub(1)) {
        if lag >= n {
            break;
        }
        let m = n - lag;
        let mut num = 0.0;
        for i in 0..m {
            num += x[i] * x[i + lag];
        }
        let e_head = energy_prefix[m];
        let e_tail = energy_prefix[n] - energy_prefix[lag];
        let denom = (e_head * e_tail).sqrt();
        *c = if denom > 1e-20 { num / denom } else { 0.0 };
    }

    // local maxima with parabolic refinement
    let mut peaks: Vec<(f64, f64)> = Vec::new(); // (refined lag, height)
    let mut best = f64::NEG_INFINITY;
    for lag in lag_min.max(1)..=lag_max.min(corr.len() - 2) {
        let (a, b, c) = (corr[lag - 1], corr[lag], corr[lag + 1]);
        if b > a && b >= c && b > 0.0 {
            let denom = a - 2.0 * b + c;
            let delta = if denom.abs() > 1e-20 {
                (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
            } else {
                0.0
            };
            let height = b - 0.25 * (a - c) * delta;
            peaks.push((lag as f64 + delta, height));
            best = best.max(height);
        }
    }
    if peaks.is_empty() {
        return Pitch::UNVOICED;
    }

    let chosen = peaks
        .iter()
        .filter(|(_, h)| *h >= OCTAVE_BAND * best)
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
        .copied()
        .expect("the best peak always qualifies");

    let voicing = chosen.1.clamp(0.0, 1.0);
    if voicing < VOICING_THRESHOLD {
        return Pitch { f0: None, voicing };
    }
    Pitch {
        f0: Some(rate_f / chosen.0),
        voicing,
    }
}
