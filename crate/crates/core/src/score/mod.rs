//! Symbolic score assembled from detected notes, with LilyPond, MusicXML and
//! JSON serializers.
//!
//! Beat arithmetic in this module is exact: durations are [`Beats`]
//! (rational quarter-note counts), never floats.

mod lilypond;
mod musicxml;

use std::fmt;
use std::path::Path;

use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lilypond::to_lilypond;
pub use musicxml::to_musicxml;

/// Duration in quarter-note beats.
pub type Beats = num_rational::Rational64;

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("invalid time signature {0}")]
    InvalidTimeSignature(String),
    #[error("duration {0} cannot be written with the available note values")]
    Inexpressible(Beats),
    #[error("events are not strictly ordered by onset at index {0}")]
    Unordered(usize),
    #[error("event {index} has non-positive beats {beats}")]
    NonPositiveBeats { index: usize, beats: Beats },
    #[error("malformed score JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot read score {path}: {reason}")]
    Io { path: String, reason: String },
}

/// Parses "3", "2.75" or "11/4" into an exact beat count.
pub fn parse_beats(text: &str) -> Result<Beats, String> {
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num: i64 = num.trim().parse().map_err(|_| format!("bad beats numerator in {text:?}"))?;
        let den: i64 = den.trim().parse().map_err(|_| format!("bad beats denominator in {text:?}"))?;
        if den == 0 {
            return Err(format!("zero denominator in {text:?}"));
        }
        return Ok(Beats::new(num, den));
    }
    if let Some((int, frac)) = text.split_once('.') {
        if frac.len() > 12 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("bad decimal beats {text:?}"));
        }
        let negative = int.starts_with('-');
        let int: i64 = if int.is_empty() || int == "-" {
            0
        } else {
            int.parse().map_err(|_| format!("bad decimal beats {text:?}"))?
        };
        let scale = 10i64.pow(frac.len() as u32);
        let frac: i64 = if frac.is_empty() { 0 } else { frac.parse().unwrap() };
        let magnitude = Beats::new(int.abs() * scale + frac, scale);
        return Ok(if negative { -magnitude } else { magnitude });
    }
    text.parse::<i64>()
        .map(Beats::from_integer)
        .map_err(|_| format!("bad beats value {text:?}"))
}

pub fn format_beats(beats: &Beats) -> String {
    if beats.is_integer() {
        beats.numer().to_string()
    } else {
        format!("{}/{}", beats.numer(), beats.denom())
    }
}

/// Serde adapter: beats are written as strings ("11/4") and read from
/// either a number or a string.
pub(crate) mod beats_serde {
    use super::{format_beats, parse_beats, Beats};
    use serde::{de, Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(serde_json::Number),
        Text(String),
    }

    pub fn serialize<S: Serializer>(beats: &Beats, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_beats(beats))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Beats, D::Error> {
        let text = match Raw::deserialize(d)? {
            Raw::Num(n) => n.to_string(),
            Raw::Text(t) => t,
        };
        parse_beats(&text).map_err(de::Error::custom)
    }
}

/// Meter as `(numerator, denominator)`, serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "(u32, u32)", into = "(u32, u32)")]
pub struct TimeSignature {
    numerator: u32,
    denominator: u32,
}

impl TimeSignature {
    pub fn new(numerator: u32, denominator: u32) -> Result<Self, ScoreError> {
        let ts = Self {
            numerator,
            denominator,
        };
        ts.validate().map_err(ScoreError::InvalidTimeSignature)?;
        Ok(ts)
    }

    pub fn numerator(&self) -> u32 {
        self.numerator
    }

    pub fn denominator(&self) -> u32 {
        self.denominator
    }

    pub(crate) fn validate(&self) -> Result<(), String> {
        if self.numerator == 0 || self.numerator > 32 {
            return Err(format!("numerator {} outside 1..=32", self.numerator));
        }
        if ![1, 2, 4, 8, 16].contains(&self.denominator) {
            return Err(format!("denominator {} not in {{1, 2, 4, 8, 16}}", self.denominator));
        }
        Ok(())
    }

    /// Measure length in quarter-note beats.
    pub fn measure_beats(&self) -> Beats {
        Beats::new(4 * self.numerator as i64, self.denominator as i64)
    }
}

impl Default for TimeSignature {
    fn default() -> Self {
        Self {
            numerator: 4,
            denominator: 4,
        }
    }
}

impl TryFrom<(u32, u32)> for TimeSignature {
    type Error = String;

    fn try_from((n, d): (u32, u32)) -> Result<Self, String> {
        let ts = Self {
            numerator: n,
            denominator: d,
        };
        ts.validate()?;
        Ok(ts)
    }
}

impl From<TimeSignature> for (u32, u32) {
    fn from(ts: TimeSignature) -> Self {
        (ts.numerator, ts.denominator)
    }
}

impl fmt::Display for TimeSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

impl std::str::FromStr for TimeSignature {
    type Err = ScoreError;

    fn from_str(s: &str) -> Result<Self, ScoreError> {
        let bad = || ScoreError::InvalidTimeSignature(s.to_string());
        let (n, d) = s.split_once('/').ok_or_else(bad)?;
        let n = n.trim().parse().map_err(|_| bad())?;
        let d = d.trim().parse().map_err(|_| bad())?;
        Self::new(n, d)
    }
}

/// One transcribed note.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteEvent {
    pub midi: i32,
    #[serde(with = "beats_serde")]
    pub beats: Beats,
    #[serde(default)]
    pub f0_hz: f64,
    #[serde(default)]
    pub onset_s: f64,
    #[serde(default)]
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreModel {
    pub tempo_bpm: f64,
    pub time_signature: TimeSignature,
    #[serde(rename = "notes")]
    pub events: Vec<NoteEvent>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ScoreModel {
    pub fn new(tempo_bpm: f64, time_signature: TimeSignature, events: Vec<NoteEvent>) -> Result<Self, ScoreError> {
        let score = Self {
            tempo_bpm,
            time_signature,
            events,
            warnings: Vec::new(),
        };
        score.validate()?;
        Ok(score)
    }

    pub fn validate(&self) -> Result<(), ScoreError> {
        for (index, e) in self.events.iter().enumerate() {
            if e.beats <= Beats::zero() {
                return Err(ScoreError::NonPositiveBeats { index, beats: e.beats });
            }
        }
        if let Some(i) = self
            .events
            .windows(2)
            .position(|w| w[1].onset_s <= w[0].onset_s)
        {
            return Err(ScoreError::Unordered(i + 1));
        }
        Ok(())
    }

    /// Reads the JSON written by [`to_json`] (or any reference score in the
    /// same schema). Missing onsets are reconstructed from the beat counts.
    pub fn from_json(text: &str) -> Result<Self, ScoreError> {
        let mut score: Self = serde_json::from_str(text)?;
        score
            .time_signature
            .validate()
            .map_err(ScoreError::InvalidTimeSignature)?;
        if score.events.len() > 1 && score.events.iter().all(|e| e.onset_s == 0.0) {
            let spb = 60.0 / score.tempo_bpm;
            let mut elapsed = Beats::zero();
            for e in score.events.iter_mut() {
                e.onset_s = elapsed.to_f64().unwrap() * spb;
                e.duration_s = e.beats.to_f64().unwrap() * spb;
                elapsed += e.beats;
            }
        }
        score.validate()?;
        Ok(score)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScoreError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ScoreError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_json(&text)
    }
}

/// Note values available to the decomposer, longest first. Dots are only
/// used on whole, half and quarter notes.
const ATOMS: [(i64, i64); 9] = [(6, 1), (4, 1), (3, 1), (2, 1), (3, 2), (1, 1), (1, 2), (1, 4), (1, 8)];

/// Splits a sounding duration into tied note values.
///
/// The note first fills up to the next barline, then continues measure by
/// measure; inside each span the largest fitting value is taken greedily.
pub fn decompose_duration(beats: Beats, position_in_measure: Beats, measure_beats: Beats) -> Result<Vec<Beats>, ScoreError> {
    if beats <= Beats::zero() || measure_beats <= Beats::zero() {
        return Err(ScoreError::Inexpressible(beats));
    }
    let mut atoms = Vec::new();
    let mut remaining = beats;
    let mut position = position_in_measure % measure_beats;
    while remaining > Beats::zero() {
        let to_barline = measure_beats - position;
        let mut span = remaining.min(to_barline);
        remaining -= span;
        position = (position + span) % measure_beats;
        while span > Beats::zero() {
            let atom = ATOMS
                .iter()
                .map(|&(n, d)| Beats::new(n, d))
                .find(|a| *a <= span)
                .ok_or(ScoreError::Inexpressible(beats))?;
            atoms.push(atom);
            span -= atom;
        }
    }
    Ok(atoms)
}

/// Note value of a decomposed atom as `(base division, dotted)`, where the
/// division is 1 for a whole note, 2 for a half, 4 for a quarter and so on.
pub(crate) fn atom_value(beats: Beats) -> (u32, bool) {
    match (*beats.numer(), *beats.denom()) {
        (6, 1) => (1, true),
        (4, 1) => (1, false),
        (3, 1) => (2, true),
        (2, 1) => (2, false),
        (3, 2) => (4, true),
        (1, 1) => (4, false),
        (1, 2) => (8, false),
        (1, 4) => (16, false),
        (1, 8) => (32, false),
        _ => unreachable!("{beats} is not a decomposition atom"),
    }
}

/// An event split into tied atoms at its position in the bar structure.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct PlacedAtom {
    pub event: usize,
    pub beats: Beats,
    pub tie_start: bool,
    pub tie_stop: bool,
    /// Measure index (0-based) this atom belongs to.
    pub measure: usize,
}

pub(crate) fn place_atoms(score: &ScoreModel) -> Result<Vec<PlacedAtom>, ScoreError> {
    let measure = score.time_signature.measure_beats();
    let mut out = Vec::new();
    let mut position = Beats::zero();
    for (i, e) in score.events.iter().enumerate() {
        let atoms = decompose_duration(e.beats, position % measure, measure)?;
        let last = atoms.len() - 1;
        for (k, beats) in atoms.into_iter().enumerate() {
            let measure_index = (position / measure).floor().to_integer() as usize;
            out.push(PlacedAtom {
                event: i,
                beats,
                tie_start: k < last,
                tie_stop: k > 0,
                measure: measure_index,
            });
            position += beats;
        }
    }
    Ok(out)
}

/// Sharp-spelled pitch class names and scientific octave of a MIDI number.
pub(crate) fn pitch_parts(midi: i32) -> (char, bool, i32) {
    const CLASSES: [(char, bool); 12] = [
        ('C', false),
        ('C', true),
        ('D', false),
        ('D', true),
        ('E', false),
        ('F', false),
        ('F', true),
        ('G', false),
        ('G', true),
        ('A', false),
        ('A', true),
        ('B', false),
    ];
    let (step, sharp) = CLASSES[midi.rem_euclid(12) as usize];
    (step, sharp, midi.div_euclid(12) - 1)
}

pub(crate) fn out_of_range_warning(index: usize, midi: i32) -> Option<String> {
    (!(crate::synth::PIANO_MIDI_LOW..=crate::synth::PIANO_MIDI_HIGH).contains(&midi))
        .then(|| format!("warning: note {index} has midi {midi} outside the piano range 21-108"))
}

#[derive(Serialize)]
struct JsonScore<'a> {
    tempo_bpm: f64,
    time_signature: TimeSignature,
    notes: &'a [NoteEvent],
    #[serde(skip_serializing_if = "Vec::is_empty")]
    warnings: Vec<String>,
}

/// Reference-score JSON extended with per-note `f0_hz`, `onset_s` and
/// `duration_s`.
pub fn to_json(score: &ScoreModel) -> String {
    let mut warnings = score.warnings.clone();
    if score.events.is_empty() {
        warnings.push("warning: no notes".to_string());
    }
    let doc = JsonScore {
        tempo_bpm: score.tempo_bpm,
        time_signature: score.time_signature,
        notes: &score.events,
        warnings,
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("score serializes");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::RefScore;
    use proptest::prelude::*;

    fn b(n: i64, d: i64) -> Beats {
        Beats::new(n, d)
    }

    fn event(midi: i32, beats: Beats, onset_s: f64) -> NoteEvent {
        NoteEvent {
            midi,
            beats,
            f0_hz: crate::synth::midi_to_f0(midi),
            onset_s,
            duration_s: 0.5,
        }
    }

    #[test]
    fn eleven_quarter_beats_split_into_half_eighth_sixteenth() {
        let atoms = decompose_duration(b(11, 4), b(0, 1), b(4, 1)).unwrap();
        assert_eq!(atoms, vec![b(2, 1), b(1, 2), b(1, 4)]);
    }

    #[test]
    fn single_beat_is_one_quarter() {
        for pos in [b(0, 1), b(1, 1), b(5, 2)] {
            assert_eq!(decompose_duration(b(1, 1), pos, b(4, 1)).unwrap(), vec![b(1, 1)]);
        }
    }

    #[test]
    fn beat_crossing_barline_is_tied_halves() {
        let atoms = decompose_duration(b(1, 1), b(7, 2), b(4, 1)).unwrap();
        assert_eq!(atoms, vec![b(1, 2), b(1, 2)]);
    }

    #[test]
    fn dotted_values_are_used_for_half_and_quarter() {
        assert_eq!(decompose_duration(b(3, 1), b(0, 1), b(4, 1)).unwrap(), vec![b(3, 1)]);
        assert_eq!(decompose_duration(b(3, 2), b(0, 1), b(3, 1)).unwrap(), vec![b(3, 2)]);
        assert_eq!(decompose_duration(b(3, 4), b(0, 1), b(4, 1)).unwrap(), vec![b(1, 2), b(1, 4)]);
    }

    #[test]
    fn off_grid_duration_is_rejected() {
        assert!(decompose_duration(b(1, 3), b(0, 1), b(4, 1)).is_err());
        assert!(decompose_duration(b(0, 1), b(0, 1), b(4, 1)).is_err());
    }

    #[test]
    fn parse_beats_forms() {
        assert_eq!(parse_beats("3").unwrap(), b(3, 1));
        assert_eq!(parse_beats("2.75").unwrap(), b(11, 4));
        assert_eq!(parse_beats(" 3/4 ").unwrap(), b(3, 4));
        assert_eq!(parse_beats("0.5").unwrap(), b(1, 2));
        assert!(parse_beats("1/0").is_err());
        assert!(parse_beats("x").is_err());
        assert_eq!(format_beats(&b(11, 4)), "11/4");
        assert_eq!(format_beats(&b(2, 1)), "2");
    }

    #[test]
    fn time_signature_parsing_and_limits() {
        let ts: TimeSignature = "3/4".parse().unwrap();
        assert_eq!(ts.measure_beats(), b(3, 1));
        assert_eq!("6/8".parse::<TimeSignature>().unwrap().measure_beats(), b(3, 1));
        assert!("3/5".parse::<TimeSignature>().is_err());
        assert!("0/4".parse::<TimeSignature>().is_err());
        assert!(serde_json::from_str::<TimeSignature>("[4, 3]").is_err());
    }

    #[test]
    fn pitch_spelling_uses_sharps_and_scientific_octaves() {
        assert_eq!(pitch_parts(60), ('C', false, 4));
        assert_eq!(pitch_parts(61), ('C', true, 4));
        assert_eq!(pitch_parts(21), ('A', false, 0));
        assert_eq!(pitch_parts(108), ('C', false, 8));
        assert_eq!(pitch_parts(59), ('B', false, 3));
    }

    #[test]
    fn json_is_a_reference_score_superset() {
        let score = ScoreModel::new(
            100.0,
            TimeSignature::default(),
            vec![event(60, b(1, 1), 0.0), event(64, b(11, 4), 0.6)],
        )
        .unwrap();
        let text = to_json(&score);
        let reference = RefScore::from_json(&text).unwrap();
        assert_eq!(reference.notes.len(), 2);
        assert_eq!(reference.notes[1].beats, b(11, 4));
        assert_eq!(ScoreModel::from_json(&text).unwrap(), score);
    }

    #[test]
    fn empty_score_json_has_empty_notes() {
        let score = ScoreModel::new(120.0, TimeSignature::default(), vec![]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&to_json(&score)).unwrap();
        assert_eq!(v["notes"], serde_json::json!([]));
    }

    #[test]
    fn reference_json_loads_as_score_with_synthesized_onsets() {
        let text = r#"{"tempo_bpm": 60, "time_signature": [4, 4],
            "notes": [{"midi": 60, "beats": 1}, {"midi": 62, "beats": "1/2"}, {"midi": 64, "beats": 2}]}"#;
        let s = ScoreModel::from_json(text).unwrap();
        let onsets: Vec<f64> = s.events.iter().map(|e| e.onset_s).collect();
        assert_eq!(onsets, vec![0.0, 1.0, 1.5]);
    }

    #[test]
    fn unordered_events_are_rejected() {
        let err = ScoreModel::new(
            100.0,
            TimeSignature::default(),
            vec![event(60, b(1, 1), 1.0), event(62, b(1, 1), 0.5)],
        )
        .unwrap_err();
        assert!(matches!(err, ScoreError::Unordered(1)));
    }

    proptest! {
        #[test]
        fn atoms_sum_to_the_duration(
            quarters in 1i64..80,
            pos in 0i64..16,
            ts in prop::sample::select(vec![(2u32, 4u32), (3, 4), (4, 4), (6, 8), (5, 4), (2, 2)]),
        ) {
            let measure = TimeSignature::new(ts.0, ts.1).unwrap().measure_beats();
            let beats = b(quarters, 4);
            let position = b(pos, 4) % measure;
            let atoms = decompose_duration(beats, position, measure).unwrap();
            prop_assert_eq!(atoms.iter().copied().sum::<Beats>(), beats);
            // no atom crosses a barline
            let mut p = position;
            for a in &atoms {
                let before = (p / measure).floor();
                p += *a;
                let after_start = ((p - b(1, 1_000_000)) / measure).floor();
                prop_assert_eq!(before, after_start);
            }
        }
    }
}
