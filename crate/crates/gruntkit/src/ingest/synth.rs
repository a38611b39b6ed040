//! Deterministic synthetic-grunt corpus generator.
//!
//! Clips are glottal-pulse trains with per-class fundamental-frequency
//! ranges, shaped by two formant resonators and an attack/decay amplitude
//! envelope, plus seeded noise. The `score` label perturbs amplitude and
//! envelope duration by a configurable amount, giving a learnable but weak
//! signal; the `sex` label drives F0 and is strongly separable when the two
//! ranges are disjoint. No acoustic realism is claimed.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::ingest::{
    encode_wav, serialize_manifest, AnnotationRecord, AudioClip, ClipSource, DatasetManifest,
    Score, Sex,
};

const SYNTH_RATE: u32 = 44100;

/// Parameters of a synthetic corpus. Identical specs produce byte-identical
/// corpora.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SyntheticSpec {
    pub n_players: usize,
    /// Must be even so score labels can split 50/50 per player.
    pub clips_per_player: usize,
    /// F0 range (Hz) for clips of female players.
    pub f0_range_female: (f64, f64),
    /// F0 range (Hz) for clips of male players.
    pub f0_range_male: (f64, f64),
    /// Relative amplitude boost applied to `scored` clips (0.2 = +20 %).
    pub score_amplitude_effect: f64,
    /// Relative envelope-decay stretch applied to `scored` clips (0.1 = +10 %).
    pub score_duration_effect: f64,
    /// White-noise floor relative to full scale.
    pub noise_level: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(n_players: usize, clips_per_player: usize, seed: u64) -> Self {
        Self {
            n_players,
            clips_per_player,
            f0_range_female: (400.0, 600.0),
            f0_range_male: (150.0, 300.0),
            score_amplitude_effect: 0.2,
            score_duration_effect: 0.1,
            noise_level: 0.02,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_players == 0 {
            return Err(Error::BadSyntheticSpec("n_players must be > 0".into()));
        }
        if self.clips_per_player == 0 {
            return Err(Error::BadSyntheticSpec("clips_per_player must be > 0".into()));
        }
        if !self.clips_per_player.is_multiple_of(2) {
            return Err(Error::BadSyntheticSpec(
                "clips_per_player must be even so score labels balance 50/50".into(),
            ));
        }
        for (name, (lo, hi)) in [
            ("female", self.f0_range_female),
            ("male", self.f0_range_male),
        ] {
            if !(lo > 0.0 && hi >= lo && hi < 1200.0) {
                return Err(Error::BadSyntheticSpec(format!(
                    "bad {name} F0 range [{lo}, {hi}]"
                )));
            }
        }
        if self.noise_level < 0.0 || self.score_amplitude_effect < 0.0 || self.score_duration_effect < 0.0 {
            return Err(Error::BadSyntheticSpec("effects must be non-negative".into()));
        }
        Ok(())
    }
}

/// An in-memory synthetic corpus: manifest plus one clip per record.
#[derive(Debug)]
pub struct SynthCorpus {
    pub manifest: DatasetManifest,
    pub clips: Vec<AudioClip>,
    by_id: BTreeMap<String, usize>,
}

impl SynthCorpus {
    /// Persist as a clip store: `manifest.csv` plus one WAV per clip.
    pub fn write_to_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("manifest.csv"), serialize_manifest(&self.manifest))?;
        for (record, clip) in self.manifest.records.iter().zip(&self.clips) {
            std::fs::write(crate::ingest::clip_path(dir, record), encode_wav(clip))?;
        }
        Ok(())
    }
}

impl ClipSource for SynthCorpus {
    fn load(&self, record: &AnnotationRecord) -> Result<AudioClip> {
        let idx = self
            .by_id
            .get(&record.clip_id())
            .ok_or_else(|| Error::MissingAudio(record.clip_id()))?;
        Ok(self.clips[*idx].clone())
    }
}

/// Generate a synthetic corpus. First half of the players is female, second
/// half male; score labels alternate within each player so every player ends
/// up with an even split.
pub fn generate_synthetic_corpus(spec: &SyntheticSpec) -> Result<SynthCorpus> {
    spec.validate()?;

    let mut records = Vec::with_capacity(spec.n_players * spec.clips_per_player);
    let mut clips = Vec::with_capacity(records.capacity());
    let mut by_id = BTreeMap::new();

    for p in 0..spec.n_players {
        let sex = if p < spec.n_players.div_ceil(2) {
            Sex::Female
        } else {
            Sex::Male
        };
        let player_id = format!("player{p:03}");
        let recording_id = format!("syn{p:03}");
        // per-player timbre offsets keep clips of one player correlated
        let mut player_rng = ChaCha20Rng::seed_from_u64(mix(spec.seed, p as u64, u64::MAX));
        let formant_shift: f64 = player_rng.random_range(0.9..1.1);

        for c in 0..spec.clips_per_player {
            let score = if c % 2 == 0 { Score::Scored } else { Score::NotScored };
            let record = AnnotationRecord {
                recording_id: recording_id.clone(),
                player_id: player_id.clone(),
                start_ms: (c as u64) * 1000,
                duration_ms: 1000,
                sex,
                score,
            };
            let mut rng = ChaCha20Rng::seed_from_u64(mix(spec.seed, p as u64, c as u64));
            let clip = synth_clip(spec, sex, score, formant_shift, &mut rng, &record);
            by_id.insert(record.clip_id(), clips.len());
            records.push(record);
            clips.push(clip);
        }
    }

    Ok(SynthCorpus {
        manifest: DatasetManifest {
            records,
            audio_paths: BTreeMap::new(),
        },
        clips,
        by_id,
    })
}

/// SplitMix64-style mixing of (seed, player, clip) into one stream seed.
fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E3779B97F4A7C15) ^ b.wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn synth_clip(
    spec: &SyntheticSpec,
    sex: Sex,
    score: Score,
    formant_shift: f64,
    rng: &mut ChaCha20Rng,
    record: &AnnotationRecord,
) -> AudioClip {
    let n = SYNTH_RATE as usize;
    let fs = f64::from(SYNTH_RATE);
    let (lo, hi) = match sex {
        Sex::Female => spec.f0_range_female,
        Sex::Male => spec.f0_range_male,
    };
    let f0 = if hi > lo { rng.random_range(lo..hi) } else { lo };

    // Glottal pulse train with fractional-sample pulse placement so the mean
    // period is exact.
    let mut excitation = vec![0.0f64; n];
    let period = fs / f0;
    let mut pos = rng.random_range(0.0..period);
    while pos < (n - 1) as f64 {
        let i = pos as usize;
        let frac = pos - i as f64;
        excitation[i] += 1.0 - frac;
        excitation[i + 1] += frac;
        pos += period;
    }

    // Two formant resonators, mildly player-dependent.
    let formants = [(760.0 * formant_shift, 110.0), (1320.0 * formant_shift, 160.0)];
    let mut signal = excitation;
    for (freq, bw) in formants {
        signal = resonator(&signal, freq, bw, fs);
    }

    // Attack / decay envelope; "scored" stretches the decay.
    let attack_s = 0.08;
    let hold_s = 0.35;
    let mut decay_s = 0.15;
    if score == Score::Scored {
        decay_s *= 1.0 + spec.score_duration_effect;
    }
    for (i, s) in signal.iter_mut().enumerate() {
        let t = i as f64 / fs;
        let attack = (t / attack_s).min(1.0);
        let decay = if t > hold_s { (-(t - hold_s) / decay_s).exp() } else { 1.0 };
        *s *= attack * decay;
    }

    // Seeded noise floor.
    for s in signal.iter_mut() {
        *s += spec.noise_level * (rng.random_range(-1.0..1.0f64));
    }

    // Peak target: per-clip base amplitude, boosted for "scored" clips.
    let base_amp: f64 = rng.random_range(0.55..0.75);
    let target = match score {
        Score::Scored => (base_amp * (1.0 + spec.score_amplitude_effect)).min(0.98),
        Score::NotScored => base_amp,
    };
    let peak = signal.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if peak > 0.0 {
        let scale = target / peak;
        for s in signal.iter_mut() {
            *s *= scale;
        }
    }

    AudioClip {
        samples: signal,
        sample_rate: SYNTH_RATE,
        source: Some(record.clone()),
    }
}

/// Two-pole resonator at `freq` Hz with bandwidth `bw` Hz.
fn resonator(x: &[f64], freq: f64, bw: f64, fs: f64) -> Vec<f64> {
    let r = (-std::f64::consts::PI * bw / fs).exp();
    let theta = 2.0 * std::f64::consts::PI * freq / fs;
    let a1 = 2.0 * r * theta.cos();
    let a2 = -r * r;
    let gain = 1.0 - r; // rough unity scaling at resonance
    let mut y = vec![0.0f64; x.len()];
    let mut y1 = 0.0;
    let mut y2 = 0.0;
    for (i, &xi) in x.iter().enumerate() {
        let v = gain * xi + a1 * y1 + a2 * y2;
        y[i] = v;
        y2 = y1;
        y1 = v;
    }
    y
}
