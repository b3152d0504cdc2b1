//! Additive piano-like synthesizer used as a ground-truth oracle.
//!
//! A [`RefScore`] is rendered note by note into a mono buffer. Every note is a
//! stack of harmonics at integer multiples of its equal-tempered fundamental,
//! shaped by a linear attack, an exponential decay and a short raised-cosine
//! release that ends exactly at the next onset, so the output stays strictly
//! monophonic.

use std::f64::consts::PI;
use std::path::Path;

use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{normalize_peak, AudioBuffer, AudioError};
use crate::score::{parse_beats, Beats, TimeSignature};

pub const PIANO_MIDI_LOW: i32 = 21;
pub const PIANO_MIDI_HIGH: i32 = 108;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("reference score has no notes")]
    EmptyScore,
    #[error("invalid reference score: {0}")]
    InvalidScore(String),
    #[error("attack of {attack_s} s is not shorter than the shortest note ({shortest_s} s)")]
    AttackTooLong { attack_s: f64, shortest_s: f64 },
    #[error("invalid tone model: {0}")]
    InvalidTone(String),
    #[error("cannot read reference score {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("malformed reference score JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Audio(#[from] AudioError),
}

/// Equal-tempered frequency of a MIDI note number (A4 = 69 = 440 Hz).
pub fn midi_to_f0(midi: i32) -> f64 {
    440.0 * 2f64.powf((midi - 69) as f64 / 12.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefNote {
    pub midi: i32,
    #[serde(with = "crate::score::beats_serde")]
    pub beats: Beats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefScore {
    pub tempo_bpm: f64,
    pub time_signature: TimeSignature,
    pub notes: Vec<RefNote>,
}

impl RefScore {
    pub fn new(tempo_bpm: f64, time_signature: TimeSignature, notes: Vec<RefNote>) -> Result<Self, SynthError> {
        let score = Self {
            tempo_bpm,
            time_signature,
            notes,
        };
        score.validate()?;
        Ok(score)
    }

    /// Builds a score from `(midi, beats)` pairs where beats use the same text
    /// forms as the JSON format ("1", "0.5", "3/4").
    pub fn from_pairs(tempo_bpm: f64, time_signature: TimeSignature, notes: &[(i32, &str)]) -> Result<Self, SynthError> {
        let notes = notes
            .iter()
            .map(|&(midi, beats)| {
                let beats = parse_beats(beats).map_err(SynthError::InvalidScore)?;
                Ok(RefNote { midi, beats })
            })
            .collect::<Result<Vec<_>, SynthError>>()?;
        Self::new(tempo_bpm, time_signature, notes)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(20.0..=300.0).contains(&self.tempo_bpm) {
            return Err(SynthError::InvalidScore(format!(
                "tempo {} bpm outside 20..=300",
                self.tempo_bpm
            )));
        }
        self.time_signature
            .validate()
            .map_err(SynthError::InvalidScore)?;
        for (i, n) in self.notes.iter().enumerate() {
            if !(PIANO_MIDI_LOW..=PIANO_MIDI_HIGH).contains(&n.midi) {
                return Err(SynthError::InvalidScore(format!(
                    "note {i}: midi {} outside piano range 21..=108",
                    n.midi
                )));
            }
            if n.beats <= Beats::zero() {
                return Err(SynthError::InvalidScore(format!("note {i}: beats must be positive")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, SynthError> {
        let score: Self = serde_json::from_str(text)?;
        score.validate()?;
        Ok(score)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SynthError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SynthError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("RefScore serializes")
    }

    pub fn seconds_per_beat(&self) -> f64 {
        60.0 / self.tempo_bpm
    }

    pub fn total_beats(&self) -> Beats {
        self.notes.iter().map(|n| n.beats).sum()
    }

    /// Same melody at a different tempo.
    pub fn with_tempo(&self, tempo_bpm: f64) -> Self {
        Self {
            tempo_bpm,
            ..self.clone()
        }
    }
}

/// Envelope and spectrum of the synthetic tone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToneModel {
    pub n_harmonics: u32,
    pub harmonic_rolloff_db_per_partial: f64,
    pub attack_s: f64,
    pub decay_rate_per_s: f64,
    /// Raised-cosine fade at the end of every note slot.
    pub release_s: f64,
    /// Silence appended after the final note.
    pub tail_s: f64,
}

impl Default for ToneModel {
    fn default() -> Self {
        Self {
            n_harmonics: 6,
            harmonic_rolloff_db_per_partial: 6.0,
            attack_s: 0.010,
            decay_rate_per_s: 0.5,
            release_s: 0.030,
            tail_s: 0.3,
        }
    }
}

impl ToneModel {
    pub fn pure_sine() -> Self {
        Self {
            n_harmonics: 1,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        if self.n_harmonics == 0 {
            return Err(SynthError::InvalidTone("n_harmonics must be at least 1".into()));
        }
        let checks = [
            ("harmonic rolloff", self.harmonic_rolloff_db_per_partial),
            ("attack", self.attack_s),
            ("decay rate", self.decay_rate_per_s),
            ("release", self.release_s),
            ("tail", self.tail_s),
        ];
        for (name, v) in checks {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SynthError::InvalidTone(format!("{name} must be finite and non-negative")));
            }
        }
        Ok(())
    }
}

/// Sample index at which each note of `score` begins.
pub fn note_onset_samples(score: &RefScore, sample_rate: u32) -> Vec<usize> {
    let samples_per_beat = score.seconds_per_beat() * sample_rate as f64;
    let mut elapsed = Beats::zero();
    score
        .notes
        .iter()
        .map(|n| {
            let start = elapsed.to_f64().unwrap() * samples_per_beat;
            elapsed += n.beats;
            start.floor() as usize
        })
        .collect()
}

/// Onset times in seconds, derived from [`note_onset_samples`].
pub fn note_onset_times(score: &RefScore, sample_rate: u32) -> Vec<f64> {
    note_onset_samples(score, sample_rate)
        .into_iter()
        .map(|s| s as f64 / sample_rate as f64)
        .collect()
}

/// Renders `score` to a peak-normalized buffer.
pub fn render(score: &RefScore, tone: &ToneModel, sample_rate: u32) -> Result<AudioBuffer, SynthError> {
    if score.notes.is_empty() {
        return Err(SynthError::EmptyScore);
    }
    score.validate()?;
    tone.validate()?;

    let sr = sample_rate as f64;
    let starts = note_onset_samples(score, sample_rate);
    let end = {
        let total = score.total_beats().to_f64().unwrap() * score.seconds_per_beat() * sr;
        total.floor() as usize
    };
    let shortest_s = starts
        .iter()
        .zip(starts.iter().skip(1).chain(std::iter::once(&end)))
        .map(|(a, b)| (b - a) as f64 / sr)
        .fold(f64::INFINITY, f64::min);
    if tone.attack_s >= shortest_s {
        return Err(SynthError::AttackTooLong {
            attack_s: tone.attack_s,
            shortest_s,
        });
    }

    let tail = (tone.tail_s * sr).round() as usize;
    let mut out = vec![0.0; end + tail];
    let nyquist = sr / 2.0;
    let mut dropped = 0usize;

    for (k, note) in score.notes.iter().enumerate() {
        let start = starts[k];
        let stop = starts.get(k + 1).copied().unwrap_or(end);
        let len_s = (stop - start) as f64 / sr;
        let release_s = tone.release_s.min((len_s - tone.attack_s) / 2.0);
        let f0 = midi_to_f0(note.midi);

        let partials: Vec<(f64, f64)> = (1..=tone.n_harmonics)
            .filter_map(|h| {
                let freq = h as f64 * f0;
                if freq >= nyquist {
                    dropped += 1;
                    None
                } else {
                    let gain = 10f64.powf(-tone.harmonic_rolloff_db_per_partial * (h - 1) as f64 / 20.0);
                    Some((2.0 * PI * freq / sr, gain))
                }
            })
            .collect();

        for (i, slot) in out[start..stop].iter_mut().enumerate() {
            let t = i as f64 / sr;
            let attack = if tone.attack_s > 0.0 {
                (t / tone.attack_s).min(1.0)
            } else {
                1.0
            };
            let release_start = len_s - release_s;
            let release = if release_s > 0.0 && t > release_start {
                0.5 * (1.0 + (PI * (t - release_start) / release_s).cos())
            } else {
                1.0
            };
            let env = attack * (-tone.decay_rate_per_s * t).exp() * release;
            let tone_sum: f64 = partials
                .iter()
                .map(|&(omega, gain)| gain * (omega * i as f64).sin())
                .sum();
            *slot = env * tone_sum;
        }
    }
    if dropped > 0 {
        log::warn!("synth: dropped {dropped} partial(s) at or above Nyquist");
    }

    normalize_peak(&mut out);
    Ok(AudioBuffer::new(out, sample_rate)?)
}
