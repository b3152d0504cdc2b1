use std::fmt::Write;

use super::{atom_value, out_of_range_warning, pitch_parts, place_atoms, ScoreError, ScoreModel};

const VERSION: &str = "2.24.0";

fn pitch_name(midi: i32) -> String {
    let (step, sharp, octave) = pitch_parts(midi);
    let mut name = step.to_ascii_lowercase().to_string();
    if sharp {
        name.push_str("is");
    }
    // LilyPond's unmarked octave starts at C3
    let marks = octave - 3;
    let mark = if marks >= 0 { '\'' } else { ',' };
    name.extend(std::iter::repeat_n(mark, marks.unsigned_abs() as usize));
    name
}

/// Renders the score as LilyPond source with absolute octaves.
pub fn to_lilypond(score: &ScoreModel) -> Result<String, ScoreError> {
    let atoms = place_atoms(score)?;
    let mut out = String::new();
    writeln!(out, "\\version \"{VERSION}\"").unwrap();
    for w in &score.warnings {
        writeln!(out, "% {w}").unwrap();
    }
    if score.events.is_empty() {
        writeln!(out, "% warning: no notes").unwrap();
    }
    for (i, e) in score.events.iter().enumerate() {
        if let Some(w) = out_of_range_warning(i, e.midi) {
            writeln!(out, "% {w}").unwrap();
        }
    }
    out.push_str("\n\\header {\n  tagline = ##f\n}\n\n\\score {\n  \\new Staff {\n");
    out.push_str("    \\clef treble\n");
    writeln!(out, "    \\time {}", score.time_signature).unwrap();
    writeln!(out, "    \\tempo 4 = {}", score.tempo_bpm.round() as i64).unwrap();

    let mut line: Vec<String> = Vec::new();
    for (k, atom) in atoms.iter().enumerate() {
        let (division, dotted) = atom_value(atom.beats);
        let mut token = format!(
            "{}{}{}",
            pitch_name(score.events[atom.event].midi),
            division,
            if dotted { "." } else { "" }
        );
        if atom.tie_start {
            token.push_str(" ~");
        }
        line.push(token);
        let measure_ends = atoms.get(k + 1).is_none_or(|next| next.measure != atom.measure);
        if measure_ends {
            let complete = {
                let filled: super::Beats = atoms
                    .iter()
                    .filter(|a| a.measure == atom.measure)
                    .map(|a| a.beats)
                    .sum();
                filled == score.time_signature.measure_beats()
            };
            let bar = if complete { " |" } else { "" };
            writeln!(out, "    {}{bar}", line.join(" ")).unwrap();
            line.clear();
        }
    }
    out.push_str("  }\n  \\layout { }\n}\n");
    Ok(out)
}
