//! Monophonic piano transcription.
//!
//! The pipeline turns a mono recording into notation: energy-novelty onset
//! detection, autocorrelation tempo estimation, beat quantization, YIN pitch
//! detection per note, and LilyPond/MusicXML/JSON output. An additive
//! synthesizer and the note/pitch/beat error rates make the whole chain
//! testable against known scores.

pub mod audio;
pub mod eval;
pub mod onset;
pub mod pipeline;
pub mod pitch;
pub mod score;
pub mod synth;
pub mod tempo;

pub use audio::{decode_wav, AudioBuffer, AudioError, FrameSpec, WindowKind};
pub use eval::{error_rates, ErrorReport};
pub use pipeline::{transcribe, PipelineConfig, PipelineError, Transcription};
pub use score::{Beats, NoteEvent, ScoreModel, TimeSignature};
pub use synth::{render, RefNote, RefScore, ToneModel};
