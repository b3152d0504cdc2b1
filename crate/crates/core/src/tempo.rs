//! Global tempo estimation and conversion of onsets into beat durations.

use num_traits::ToPrimitive;
use thiserror::Error;

use crate::audio::{AudioBuffer, FrameSpec};
use crate::onset::{local_energy, EnergyCurve, NoveltyCurve, OnsetList};
use crate::score::Beats;

pub const DEFAULT_TEMPO_RANGE: (f64, f64) = (40.0, 240.0);
pub const DEFAULT_PRIOR_CENTER_BPM: f64 = 120.0;
/// Width of the log-Gaussian tempo prior, in octaves.
const PRIOR_SIGMA_OCTAVES: f64 = 1.0;
/// A halved or doubled tempo scoring within this fraction of the winner is
/// reported as an octave ambiguity.
const OCTAVE_RIVAL_RATIO: f64 = 0.9;

#[derive(Debug, Error, PartialEq)]
pub enum TempoError {
    #[error("quantization grid {0} is not one of 1/8, 1/4, 1/2, 1")]
    InvalidGrid(Beats),
    #[error("tempo must be positive, got {0}")]
    InvalidTempo(f64),
    #[error("no onsets to measure durations from")]
    NoOnsets,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TempoEstimate {
    pub bpm: f64,
    /// Share of the prior-weighted autocorrelation mass held by the winning lag.
    pub confidence: f64,
    /// Half or double tempo that scored almost as well as the winner.
    pub octave_rival_bpm: Option<f64>,
}

impl TempoEstimate {
    /// A user-supplied tempo, taken as certain.
    pub fn fixed(bpm: f64) -> Self {
        Self {
            bpm,
            confidence: 1.0,
            octave_rival_bpm: None,
        }
    }
}

fn prior_weight(bpm: f64, center: f64) -> f64 {
    let octaves = (bpm / center).log2() / PRIOR_SIGMA_OCTAVES;
    (-0.5 * octaves * octaves).exp()
}

/// Picks the novelty autocorrelation lag with the highest prior-weighted
/// score inside `range_bpm` and refines it by parabolic interpolation.
pub fn estimate_tempo(curve: &NoveltyCurve, range_bpm: (f64, f64), prior_center_bpm: f64) -> TempoEstimate {
    let fallback = TempoEstimate {
        bpm: prior_center_bpm,
        confidence: 0.0,
        octave_rival_bpm: None,
    };
    let hop = curve.hop_length_s;
    let (low, high) = range_bpm;
    let lag_min = ((60.0 / (high * hop)).floor() as usize).max(1);
    let lag_max = (60.0 / (low * hop)).ceil() as usize;
    let v = &curve.values;
    if v.len() <= lag_max + 1 {
        return fallback;
    }

    let bpm_of = |lag: f64| 60.0 / (hop * lag);
    // score[l] for l in lag_min - 1 ..= lag_max + 1 so the interpolation has neighbors
    let scores: Vec<f64> = (lag_min - 1..=lag_max + 1)
        .map(|lag| {
            if lag == 0 {
                return 0.0;
            }
            let ac: f64 = v.iter().zip(&v[lag..]).map(|(a, b)| a * b).sum();
            ac * prior_weight(bpm_of(lag as f64), prior_center_bpm)
        })
        .collect();
    let score_at = |lag: usize| scores[lag + 1 - lag_min];

    let in_range = |lag: usize| {
        let bpm = bpm_of(lag as f64);
        bpm >= low && bpm <= high
    };
    let best = (lag_min..=lag_max)
        .filter(|&l| in_range(l))
        .max_by(|&a, &b| score_at(a).total_cmp(&score_at(b)).then(b.cmp(&a)));
    let Some(best) = best else { return fallback };
    let best_score = score_at(best);
    if best_score <= 0.0 {
        return fallback;
    }

    let (a, b, c) = (score_at(best - 1), best_score, score_at(best + 1));
    let denom = a - 2.0 * b + c;
    let offset = if denom < 0.0 {
        (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    let bpm = bpm_of(best as f64 + offset).clamp(low, high);

    let total: f64 = (lag_min..=lag_max)
        .filter(|&l| in_range(l))
        .map(|l| score_at(l).max(0.0))
        .sum();
    let confidence = best_score / total;

    let neighborhood_max = |center: f64| -> Option<f64> {
        let c = center.round() as i64;
        (c - 1..=c + 1)
            .filter(|&l| l >= lag_min as i64 && l <= lag_max as i64)
            .map(|l| score_at(l as usize))
            .reduce(f64::max)
    };
    let octave_rival_bpm = [(best as f64 * 2.0, bpm / 2.0), (best as f64 / 2.0, bpm * 2.0)]
        .into_iter()
        .filter(|&(lag, _)| neighborhood_max(lag).is_some_and(|s| s >= OCTAVE_RIVAL_RATIO * best_score))
        .map(|(_, rival)| rival)
        .next();

    TempoEstimate {
        bpm,
        confidence,
        octave_rival_bpm,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoteSpan {
    pub onset_s: f64,
    pub duration_s: f64,
}

/// Inter-onset intervals for every note but the last; the last note ends at
/// the latest frame whose energy is still at least `end_threshold` times the
/// peak energy measured since its onset.
pub fn note_durations_from_energy(onsets: &OnsetList, energy: &EnergyCurve, end_threshold: f64) -> Result<Vec<NoteSpan>, TempoError> {
    let times = &onsets.times_s;
    let Some(&last_onset) = times.last() else {
        return Err(TempoError::NoOnsets);
    };
    let mut spans: Vec<NoteSpan> = times
        .windows(2)
        .map(|w| NoteSpan {
            onset_s: w[0],
            duration_s: w[1] - w[0],
        })
        .collect();

    let hop = energy.hop_length_s;
    let tail: Vec<(f64, f64)> = energy.frames().filter(|&(t, _)| t >= last_onset).collect();
    let peak = tail.iter().map(|&(_, e)| e).fold(0.0, f64::max);
    let end = if peak > 0.0 {
        tail.iter()
            .rev()
            .find(|&&(_, e)| e >= end_threshold * peak)
            .map_or(last_onset, |&(t, _)| t)
    } else {
        last_onset
    };
    spans.push(NoteSpan {
        onset_s: last_onset,
        duration_s: (end - last_onset).max(hop),
    });
    Ok(spans)
}

pub fn note_durations(onsets: &OnsetList, buffer: &AudioBuffer, spec: &FrameSpec, end_threshold: f64) -> Result<Vec<NoteSpan>, TempoError> {
    note_durations_from_energy(onsets, &local_energy(buffer, spec), end_threshold)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimedNote {
    pub onset_s: f64,
    pub duration_s: f64,
    pub beats_raw: f64,
    pub beats_quantized: Beats,
}

pub fn validate_grid(grid: Beats) -> Result<(), TempoError> {
    let allowed = [Beats::new(1, 8), Beats::new(1, 4), Beats::new(1, 2), Beats::from_integer(1)];
    if allowed.contains(&grid) {
        Ok(())
    } else {
        Err(TempoError::InvalidGrid(grid))
    }
}

/// `beats = duration * bpm / 60`, rounded half-up to the grid and never
/// shorter than one grid step.
pub fn quantize_beats(notes: &[NoteSpan], tempo: &TempoEstimate, grid: Beats) -> Result<Vec<TimedNote>, TempoError> {
    validate_grid(grid)?;
    if !(tempo.bpm > 0.0 && tempo.bpm.is_finite()) {
        return Err(TempoError::InvalidTempo(tempo.bpm));
    }
    let grid_f = grid.to_f64().unwrap();
    Ok(notes
        .iter()
        .map(|n| {
            let beats_raw = n.duration_s * tempo.bpm / 60.0;
            let steps = ((beats_raw / grid_f + 0.5).floor() as i64).max(1);
            TimedNote {
                onset_s: n.onset_s,
                duration_s: n.duration_s,
                beats_raw,
                beats_quantized: grid * steps,
            }
        })
        .collect())
}
