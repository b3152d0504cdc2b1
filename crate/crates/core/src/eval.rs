//! Note, pitch and beat error rates of a transcription against a reference.
//!
//! Reference and detected notes are paired by a global alignment on MIDI
//! numbers (match 0, substitution 1, gap 0.75). Unpaired detected notes are
//! extras and do not count as pitch or beat errors; unpaired reference notes
//! count as both.

use std::fmt::Write;

use serde::Serialize;
use thiserror::Error;

use crate::score::{format_beats, Beats, ScoreModel};
use crate::synth::RefScore;

/// Costs in quarter units so the DP stays in integers.
const MATCH_COST: u32 = 0;
const SUBSTITUTION_COST: u32 = 4;
const GAP_COST: u32 = 3;
const COST_UNIT: f64 = 4.0;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("reference score has no notes")]
    EmptyReference,
}

/// One alignment column: a reference note, a detected note, or both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AlignedPair {
    pub reference: Option<usize>,
    pub detected: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Alignment {
    pub pairs: Vec<AlignedPair>,
    pub cost: f64,
}

/// Global alignment of two MIDI sequences. Among equal-cost alignments the
/// one whose matches come earliest is returned: the traceback runs from the
/// end and takes gaps before diagonal moves.
pub fn align_midi(reference: &[i32], detected: &[i32]) -> Alignment {
    let (n, m) = (reference.len(), detected.len());
    let mut cost = vec![vec![0u32; m + 1]; n + 1];
    for (i, row) in cost.iter_mut().enumerate() {
        row[0] = i as u32 * GAP_COST;
    }
    for (j, c) in cost[0].iter_mut().enumerate() {
        *c = j as u32 * GAP_COST;
    }
    let sub = |i: usize, j: usize| {
        if reference[i - 1] == detected[j - 1] {
            MATCH_COST
        } else {
            SUBSTITUTION_COST
        }
    };
    for i in 1..=n {
        for j in 1..=m {
            cost[i][j] = (cost[i - 1][j - 1] + sub(i, j))
                .min(cost[i - 1][j] + GAP_COST)
                .min(cost[i][j - 1] + GAP_COST);
        }
    }

    let mut pairs = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        if i > 0 && cost[i][j] == cost[i - 1][j] + GAP_COST {
            pairs.push(AlignedPair {
                reference: Some(i - 1),
                detected: None,
            });
            i -= 1;
        } else if j > 0 && cost[i][j] == cost[i][j - 1] + GAP_COST {
            pairs.push(AlignedPair {
                reference: None,
                detected: Some(j - 1),
            });
            j -= 1;
        } else {
            pairs.push(AlignedPair {
                reference: Some(i - 1),
                detected: Some(j - 1),
            });
            i -= 1;
            j -= 1;
        }
    }
    pairs.reverse();
    Alignment {
        pairs,
        cost: cost[n][m] as f64 / COST_UNIT,
    }
}

/// Cost of an arbitrary alignment under the same scoring.
pub fn alignment_cost(reference: &[i32], detected: &[i32], pairs: &[AlignedPair]) -> f64 {
    let units: u32 = pairs
        .iter()
        .map(|p| match (p.reference, p.detected) {
            (Some(r), Some(d)) if reference[r] == detected[d] => MATCH_COST,
            (Some(_), Some(_)) => SUBSTITUTION_COST,
            _ => GAP_COST,
        })
        .sum();
    units as f64 / COST_UNIT
}

pub fn align(reference: &RefScore, detected: &ScoreModel) -> Alignment {
    let r: Vec<i32> = reference.notes.iter().map(|n| n.midi).collect();
    let d: Vec<i32> = detected.events.iter().map(|e| e.midi).collect();
    align_midi(&r, &d)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub n_original: usize,
    pub n_detected: usize,
    pub note_error_pct: f64,
    pub pitch_error_pct: f64,
    pub beat_error_pct: f64,
    pub pitch_errors: usize,
    pub beat_errors: usize,
    pub octave_error_count: usize,
    pub alignment: Vec<AlignedPair>,
}

/// Error rates over plain `(midi, beats)` sequences.
pub fn error_rates_for_notes(reference: &[(i32, Beats)], detected: &[(i32, Beats)]) -> Result<ErrorReport, EvalError> {
    if reference.is_empty() {
        return Err(EvalError::EmptyReference);
    }
    let ref_midi: Vec<i32> = reference.iter().map(|n| n.0).collect();
    let det_midi: Vec<i32> = detected.iter().map(|n| n.0).collect();
    let alignment = align_midi(&ref_midi, &det_midi);

    let (mut pitch_errors, mut beat_errors, mut octave_errors) = (0, 0, 0);
    for pair in &alignment.pairs {
        match (pair.reference, pair.detected) {
            (Some(r), Some(d)) => {
                let (rm, rb) = reference[r];
                let (dm, db) = detected[d];
                if rm != dm {
                    pitch_errors += 1;
                    if (rm - dm) % 12 == 0 {
                        octave_errors += 1;
                    }
                }
                if rb != db {
                    beat_errors += 1;
                }
            }
            (Some(_), None) => {
                pitch_errors += 1;
                beat_errors += 1;
            }
            _ => {}
        }
    }

    let n_original = reference.len();
    let n_detected = detected.len();
    let pct = |count: usize| count as f64 / n_original as f64 * 100.0;
    Ok(ErrorReport {
        n_original,
        n_detected,
        note_error_pct: pct(n_detected.abs_diff(n_original)),
        pitch_error_pct: pct(pitch_errors),
        beat_error_pct: pct(beat_errors),
        pitch_errors,
        beat_errors,
        octave_error_count: octave_errors,
        alignment: alignment.pairs,
    })
}

pub fn error_rates(reference: &RefScore, detected: &ScoreModel) -> Result<ErrorReport, EvalError> {
    let r: Vec<(i32, Beats)> = reference.notes.iter().map(|n| (n.midi, n.beats)).collect();
    let d: Vec<(i32, Beats)> = detected.events.iter().map(|e| (e.midi, e.beats)).collect();
    error_rates_for_notes(&r, &d)
}

impl ErrorReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Human-readable alignment table followed by the three rates.
    pub fn to_table(&self, reference: &[(i32, Beats)], detected: &[(i32, Beats)]) -> String {
        let cell = |note: Option<(i32, Beats)>| match note {
            Some((m, b)) => format!("{m:>4} {:>6}", format_beats(&b)),
            None => format!("{:>4} {:>6}", "-", "-"),
        };
        let mut out = String::from("   #  ref midi  beats | det midi  beats | flags\n");
        for (k, p) in self.alignment.iter().enumerate() {
            let r = p.reference.map(|i| reference[i]);
            let d = p.detected.map(|i| detected[i]);
            let flags = match (r, d) {
                (Some(r), Some(d)) => {
                    let mut f = Vec::new();
                    if r.0 != d.0 {
                        f.push(if (r.0 - d.0) % 12 == 0 { "octave" } else { "pitch" });
                    }
                    if r.1 != d.1 {
                        f.push("beat");
                    }
                    f.join(",")
                }
                (Some(_), None) => "missed".to_string(),
                _ => "extra".to_string(),
            };
            writeln!(out, "{k:>4}  {}    | {}    | {flags}", cell(r), cell(d)).unwrap();
        }
        writeln!(
            out,
            "notes {}/{}  note error {:.2}%  pitch error {:.2}%  beat error {:.2}%  octave errors {}",
            self.n_detected,
            self.n_original,
            self.note_error_pct,
            self.pitch_error_pct,
            self.beat_error_pct,
            self.octave_error_count
        )
        .unwrap();
        out
    }
}
