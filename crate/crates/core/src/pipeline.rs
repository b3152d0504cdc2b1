//! End-to-end transcription: audio in, [`ScoreModel`] out.

use thiserror::Error;

use crate::audio::{AudioBuffer, AudioError, FrameSpec, WindowKind};
use crate::onset::{energy_novelty, local_energy, pick_onsets, EnergyCurve, NoveltyCurve, OnsetList, PeakPickParams};
use crate::pitch::{f0_to_midi, PitchError, YinAnalyzer, YinParams};
use crate::score::{Beats, NoteEvent, ScoreError, ScoreModel, TimeSignature};
use crate::tempo::{
    estimate_tempo, note_durations_from_energy, quantize_beats, validate_grid, TempoError, TempoEstimate, TimedNote,
    DEFAULT_PRIOR_CENTER_BPM, DEFAULT_TEMPO_RANGE,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no notes found")]
    NoNotes,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Pitch(#[from] PitchError),
    #[error(transparent)]
    Tempo(#[from] TempoError),
    #[error(transparent)]
    Score(#[from] ScoreError),
}

/// Every tunable of the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub window_length_s: f64,
    pub hop_length_s: f64,
    pub gamma: f64,
    pub amp_threshold: f64,
    pub min_separation_s: f64,
    pub yin_window_s: f64,
    pub yin_threshold: f64,
    pub grid: Beats,
    pub tempo_override: Option<f64>,
    pub time_signature: Option<TimeSignature>,
    pub end_threshold: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window_length_s: 0.046,
            hop_length_s: 0.010,
            gamma: 100.0,
            amp_threshold: 0.1,
            min_separation_s: 0.1,
            yin_window_s: 0.068,
            yin_threshold: 0.1,
            grid: Beats::new(1, 4),
            tempo_override: None,
            time_signature: None,
            end_threshold: 0.05,
        }
    }
}

impl PipelineConfig {
    pub fn frame_spec(&self) -> Result<FrameSpec, PipelineError> {
        Ok(FrameSpec::new(self.window_length_s, self.hop_length_s, WindowKind::Hann)?)
    }

    pub fn peak_params(&self) -> PeakPickParams {
        PeakPickParams {
            amplitude_threshold: self.amp_threshold,
            min_separation_s: self.min_separation_s,
        }
    }

    pub fn yin_params(&self) -> YinParams {
        YinParams {
            window_length_s: self.yin_window_s,
            hop_length_s: self.hop_length_s,
            threshold: self.yin_threshold,
            ..YinParams::default()
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |msg: String| Err(PipelineError::Config(msg));
        if !(self.gamma > 0.0) {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.amp_threshold > 0.0 && self.amp_threshold < 1.0) {
            return bad(format!("amplitude threshold {} outside (0, 1)", self.amp_threshold));
        }
        if !(self.min_separation_s >= 0.0) {
            return bad("minimum separation must be non-negative".into());
        }
        if !(self.end_threshold > 0.0 && self.end_threshold < 1.0) {
            return bad(format!("end threshold {} outside (0, 1)", self.end_threshold));
        }
        if let Some(bpm) = self.tempo_override {
            if !(bpm > 0.0 && bpm.is_finite()) {
                return bad(format!("tempo override must be positive, got {bpm}"));
            }
        }
        validate_grid(self.grid)?;
        self.frame_spec()?;
        Ok(())
    }
}

/// Final score plus the intermediate curves, for inspection and debugging.
#[derive(Debug, Clone)]
pub struct Transcription {
    pub score: ScoreModel,
    pub tempo: TempoEstimate,
    pub energy: EnergyCurve,
    pub novelty: NoveltyCurve,
    pub onsets: OnsetList,
    pub notes: Vec<TimedNote>,
}

pub fn transcribe(buffer: &AudioBuffer, config: &PipelineConfig) -> Result<Transcription, PipelineError> {
    config.validate()?;
    let mut warnings = Vec::new();

    let spec = config.frame_spec()?;
    let energy = local_energy(buffer, &spec);
    let novelty = energy_novelty(&energy, config.gamma);
    let mut onsets = pick_onsets(&novelty, &config.peak_params());
    if onsets.is_empty() {
        return Err(PipelineError::NoNotes);
    }
    // frames start before the signal, so the first onset can land a few ms early
    for t in onsets.times_s.iter_mut() {
        *t = t.max(0.0);
    }

    let tempo = match config.tempo_override {
        Some(bpm) => TempoEstimate::fixed(bpm),
        None => {
            let est = estimate_tempo(&novelty, DEFAULT_TEMPO_RANGE, DEFAULT_PRIOR_CENTER_BPM);
            if est.confidence == 0.0 {
                warnings.push(format!(
                    "warning: tempo could not be estimated, using {} bpm",
                    est.bpm
                ));
            }
            if let Some(rival) = est.octave_rival_bpm {
                warnings.push(format!(
                    "warning: tempo {:.1} bpm is octave-ambiguous with {:.1} bpm; pass --tempo to override",
                    est.bpm, rival
                ));
            }
            est
        }
    };

    let spans = note_durations_from_energy(&onsets, &energy, config.end_threshold)?;
    let notes = quantize_beats(&spans, &tempo, config.grid)?;

    let mut yin = YinAnalyzer::new(&config.yin_params(), buffer.sample_rate())?;
    warnings.extend(yin.config().warnings.iter().map(|w| format!("warning: {w}")));
    let mut events = Vec::with_capacity(notes.len());
    for (i, note) in notes.iter().enumerate() {
        let f0 = yin.note_pitch(buffer, (note.onset_s, note.onset_s + note.duration_s));
        if f0 <= 0.0 {
            warnings.push(format!(
                "warning: note {i} at {:.3} s has no detectable pitch; skipped",
                note.onset_s
            ));
            continue;
        }
        match f0_to_midi(f0) {
            Ok((midi, _)) => events.push(NoteEvent {
                midi,
                beats: note.beats_quantized,
                f0_hz: f0,
                onset_s: note.onset_s,
                duration_s: note.duration_s,
            }),
            Err(e) => warnings.push(format!("warning: note {i}: {e}; skipped")),
        }
    }
    if events.is_empty() {
        return Err(PipelineError::NoNotes);
    }

    let time_signature = config.time_signature.unwrap_or_else(|| {
        warnings.push("warning: no time signature given, using 4/4".to_string());
        TimeSignature::default()
    });
    let mut score = ScoreModel::new(tempo.bpm, time_signature, events)?;
    score.warnings = warnings;

    onsets.strengths.truncate(onsets.times_s.len());
    Ok(Transcription {
        score,
        tempo,
        energy,
        novelty,
        onsets,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{render, RefScore, ToneModel};

    #[test]
    fn silence_has_no_notes() {
        let b = AudioBuffer::new(vec![0.0; 44100], 44100).unwrap();
        assert!(matches!(
            transcribe(&b, &PipelineConfig::default()),
            Err(PipelineError::NoNotes)
        ));
    }

    #[test]
    fn single_a4_is_midi_69() {
        let score = RefScore::from_pairs(120.0, TimeSignature::default(), &[(69, "1")]).unwrap();
        let b = render(&score, &ToneModel::default(), 44100).unwrap();
        let t = transcribe(&b, &PipelineConfig::default()).unwrap();
        assert_eq!(t.score.events.len(), 1);
        assert_eq!(t.score.events[0].midi, 69);
        assert!(t.score.warnings.iter().any(|w| w.contains("4/4")));
    }

    #[test]
    fn tempo_override_sets_score_tempo() {
        let score = RefScore::from_pairs(90.0, TimeSignature::default(), &[(60, "1"), (64, "1"), (67, "2")]).unwrap();
        let b = render(&score, &ToneModel::default(), 44100).unwrap();
        let config = PipelineConfig {
            tempo_override: Some(90.0),
            time_signature: Some(TimeSignature::new(3, 4).unwrap()),
            ..PipelineConfig::default()
        };
        let t = transcribe(&b, &config).unwrap();
        assert_eq!(t.score.tempo_bpm, 90.0);
        let beats: Vec<Beats> = t.score.events.iter().map(|e| e.beats).collect();
        assert_eq!(beats, vec![Beats::from_integer(1), Beats::from_integer(1), Beats::from_integer(2)]);
        assert!(t.score.warnings.iter().all(|w| !w.contains("time signature")));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let b = AudioBuffer::new(vec![0.0; 100], 44100).unwrap();
        let config = PipelineConfig {
            grid: Beats::new(1, 3),
            ..PipelineConfig::default()
        };
        assert!(transcribe(&b, &config).is_err());
        let config = PipelineConfig {
            gamma: 0.0,
            ..PipelineConfig::default()
        };
        assert!(matches!(transcribe(&b, &config), Err(PipelineError::Config(_))));
    }
}
