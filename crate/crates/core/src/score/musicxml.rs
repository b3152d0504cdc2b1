use std::fmt::Write;

use num_integer::Integer;

use super::{atom_value, out_of_range_warning, pitch_parts, place_atoms, PlacedAtom, ScoreError, ScoreModel};

const HEADER: &str = r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>
<!DOCTYPE score-partwise PUBLIC "-//Recordare//DTD MusicXML 3.1 Partwise//EN" "http://www.musicxml.org/dtds/partwise.dtd">
"#;

fn type_name(division: u32) -> &'static str {
    match division {
        1 => "whole",
        2 => "half",
        4 => "quarter",
        8 => "eighth",
        16 => "16th",
        32 => "32nd",
        _ => unreachable!("no note type for division {division}"),
    }
}

/// Divisions per quarter note: 4 unless a finer atom forces more.
fn divisions(atoms: &[PlacedAtom]) -> i64 {
    atoms.iter().fold(4, |acc, a| acc.lcm(a.beats.denom()))
}

fn write_attributes(out: &mut String, score: &ScoreModel, divisions: i64) {
    let ts = score.time_signature;
    out.push_str("      <attributes>\n");
    writeln!(out, "        <divisions>{divisions}</divisions>").unwrap();
    out.push_str("        <key>\n          <fifths>0</fifths>\n        </key>\n");
    writeln!(
        out,
        "        <time>\n          <beats>{}</beats>\n          <beat-type>{}</beat-type>\n        </time>",
        ts.numerator(),
        ts.denominator()
    )
    .unwrap();
    out.push_str("        <clef>\n          <sign>G</sign>\n          <line>2</line>\n        </clef>\n");
    out.push_str("      </attributes>\n");
    let bpm = score.tempo_bpm.round() as i64;
    out.push_str("      <direction placement=\"above\">\n        <direction-type>\n");
    writeln!(
        out,
        "          <metronome>\n            <beat-unit>quarter</beat-unit>\n            <per-minute>{bpm}</per-minute>\n          </metronome>"
    )
    .unwrap();
    out.push_str("        </direction-type>\n");
    writeln!(out, "        <sound tempo=\"{bpm}\"/>").unwrap();
    out.push_str("      </direction>\n");
}

fn write_note(out: &mut String, midi: i32, atom: &PlacedAtom, divisions: i64) {
    let (step, sharp, octave) = pitch_parts(midi);
    let (division, dotted) = atom_value(atom.beats);
    let duration = (atom.beats * divisions).to_integer();
    out.push_str("      <note>\n        <pitch>\n");
    writeln!(out, "          <step>{step}</step>").unwrap();
    if sharp {
        out.push_str("          <alter>1</alter>\n");
    }
    writeln!(out, "          <octave>{octave}</octave>").unwrap();
    out.push_str("        </pitch>\n");
    writeln!(out, "        <duration>{duration}</duration>").unwrap();
    if atom.tie_stop {
        out.push_str("        <tie type=\"stop\"/>\n");
    }
    if atom.tie_start {
        out.push_str("        <tie type=\"start\"/>\n");
    }
    out.push_str("        <voice>1</voice>\n");
    writeln!(out, "        <type>{}</type>", type_name(division)).unwrap();
    if dotted {
        out.push_str("        <dot/>\n");
    }
    if atom.tie_start || atom.tie_stop {
        out.push_str("        <notations>\n");
        if atom.tie_stop {
            out.push_str("          <tied type=\"stop\"/>\n");
        }
        if atom.tie_start {
            out.push_str("          <tied type=\"start\"/>\n");
        }
        out.push_str("        </notations>\n");
    }
    out.push_str("      </note>\n");
}

/// Renders the score as a single-part MusicXML 3.1 partwise document.
pub fn to_musicxml(score: &ScoreModel) -> Result<String, ScoreError> {
    let atoms = place_atoms(score)?;
    let divisions = divisions(&atoms);
    let mut out = String::from(HEADER);
    for w in &score.warnings {
        writeln!(out, "<!-- {} -->", w.replace("--", "- -")).unwrap();
    }
    if score.events.is_empty() {
        out.push_str("<!-- warning: no notes -->\n");
    }
    for (i, e) in score.events.iter().enumerate() {
        if let Some(w) = out_of_range_warning(i, e.midi) {
            writeln!(out, "<!-- {w} -->").unwrap();
        }
    }
    out.push_str("<score-partwise version=\"3.1\">\n");
    out.push_str("  <part-list>\n    <score-part id=\"P1\">\n      <part-name>Piano</part-name>\n    </score-part>\n  </part-list>\n");
    out.push_str("  <part id=\"P1\">\n");

    let n_measures = atoms.last().map_or(1, |a| a.measure + 1);
    for m in 0..n_measures {
        writeln!(out, "    <measure number=\"{}\">", m + 1).unwrap();
        if m == 0 {
            write_attributes(&mut out, score, divisions);
        }
        for atom in atoms.iter().filter(|a| a.measure == m) {
            write_note(&mut out, score.events[atom.event].midi, atom, divisions);
        }
        out.push_str("    </measure>\n");
    }
    out.push_str("  </part>\n</score-partwise>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::{Beats, NoteEvent, TimeSignature};

    fn score(ts: TimeSignature, notes: &[(i32, Beats)]) -> ScoreModel {
        let events = notes
            .iter()
            .enumerate()
            .map(|(i, &(midi, beats))| NoteEvent {
                midi,
                beats,
                f0_hz: 0.0,
                onset_s: i as f64,
                duration_s: 1.0,
            })
            .collect();
        ScoreModel::new(100.0, ts, events).unwrap()
    }

    fn count(haystack: &str, needle: &str) -> usize {
        haystack.matches(needle).count()
    }

    fn durations(xml: &str) -> Vec<i64> {
        xml.lines()
            .filter_map(|l| l.trim().strip_prefix("<duration>"))
            .map(|l| l.trim_end_matches("</duration>").parse().unwrap())
            .collect()
    }

    #[test]
    fn single_quarter_is_one_measure_one_note() {
        let xml = to_musicxml(&score(TimeSignature::default(), &[(60, Beats::from_integer(1))])).unwrap();
        assert_eq!(count(&xml, "<measure "), 1);
        assert_eq!(count(&xml, "<note>"), 1);
        assert!(xml.contains("<divisions>4</divisions>"));
        assert_eq!(durations(&xml), vec![4]);
    }

    #[test]
    fn tied_atoms_sum_to_eleven_divisions() {
        let xml = to_musicxml(&score(TimeSignature::default(), &[(64, Beats::new(11, 4))])).unwrap();
        assert_eq!(durations(&xml).iter().sum::<i64>(), 11);
        assert_eq!(count(&xml, "<tie type=\"start\"/>"), 2);
        assert_eq!(count(&xml, "<tie type=\"stop\"/>"), 2);
        assert_eq!(count(&xml, "<tied type=\"start\"/>"), 2);
    }

    #[test]
    fn six_quarters_in_three_four_make_two_measures() {
        let q = Beats::from_integer(1);
        let ts = TimeSignature::new(3, 4).unwrap();
        let xml = to_musicxml(&score(ts, &[(60, q); 6])).unwrap();
        assert_eq!(count(&xml, "<measure "), 2);
    }

    #[test]
    fn thirty_second_atoms_raise_divisions() {
        let xml = to_musicxml(&score(TimeSignature::default(), &[(60, Beats::new(1, 8)), (62, Beats::new(7, 8))])).unwrap();
        assert!(xml.contains("<divisions>8</divisions>"));
        assert_eq!(durations(&xml).iter().sum::<i64>(), 8);
    }

    #[test]
    fn sharps_are_encoded_with_alter() {
        let xml = to_musicxml(&score(TimeSignature::default(), &[(70, Beats::from_integer(1))])).unwrap();
        assert!(xml.contains("<step>A</step>\n          <alter>1</alter>\n          <octave>4</octave>"));
    }

    #[test]
    fn empty_score_has_one_empty_measure() {
        let xml = to_musicxml(&score(TimeSignature::default(), &[])).unwrap();
        assert!(xml.contains("<!-- warning: no notes -->"));
        assert_eq!(count(&xml, "<measure "), 1);
        assert_eq!(count(&xml, "<note>"), 0);
    }
}
