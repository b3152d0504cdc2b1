use monoscribe::audio::{decode_wav, frame_signal, write_wav, SampleEncoding};
use monoscribe::eval::error_rates_for_notes;
use monoscribe::onset::{energy_novelty, local_energy, pick_onsets, PeakPickParams};
use monoscribe::pitch::{cmndf, difference_function};
use monoscribe::synth::note_onset_times;
use monoscribe::{render, AudioBuffer, Beats, FrameSpec, RefNote, RefScore, TimeSignature, ToneModel, WindowKind};
use proptest::prelude::*;

const SR: u32 = 8000;

fn samples(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 1..max_len)
}

fn melody() -> impl Strategy<Value = RefScore> {
    let note = (48..=84i32, prop::sample::select(vec![(1i64, 2i64), (1, 1), (3, 2), (2, 1)]));
    (60.0f64..=180.0, prop::collection::vec(note, 1..8)).prop_map(|(bpm, notes)| {
        let notes = notes
            .into_iter()
            .map(|(midi, (n, d))| RefNote { midi, beats: Beats::new(n, d) })
            .collect();
        RefScore::new(bpm, TimeSignature::default(), notes).unwrap()
    })
}

fn notes() -> impl Strategy<Value = Vec<(i32, Beats)>> {
    prop::collection::vec((21..=108i32, 1..=16i64), 1..30)
        .prop_map(|v| v.into_iter().map(|(m, q)| (m, Beats::new(q, 4))).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn wav_round_trip_within_one_quantization_step(raw in samples(400)) {
        prop_assume!(raw.iter().any(|s| s.abs() > 1e-3));
        let buffer = AudioBuffer::from_unnormalized(raw, SR).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for (encoding, step) in [
            (SampleEncoding::Int16, 2f64.powi(-15)),
            (SampleEncoding::Int24, 2f64.powi(-23)),
            (SampleEncoding::Int32, 2f64.powi(-31)),
            (SampleEncoding::Float32, f32::EPSILON as f64),
        ] {
            let path = dir.path().join("x.wav");
            write_wav(&buffer, &path, encoding).unwrap();
            let back = decode_wav(&path).unwrap();
            prop_assert_eq!(back.len(), buffer.len());
            for (a, b) in back.samples().iter().zip(buffer.samples()) {
                prop_assert!((a - b).abs() <= step, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn frame_count_ignores_sample_values(a in samples(3000), seed in any::<u64>()) {
        let spec = FrameSpec::new(0.046, 0.010, WindowKind::Hann).unwrap();
        let b: Vec<f64> = a.iter().enumerate().map(|(i, _)| ((i as u64 ^ seed) % 7) as f64 / 7.0).collect();
        let fa = frame_signal(&AudioBuffer::new(a, SR).unwrap(), &spec).unwrap();
        let fb = frame_signal(&AudioBuffer::new(b, SR).unwrap(), &spec).unwrap();
        prop_assert_eq!(fa.len(), fb.len());
    }

    #[test]
    fn rendering_is_bit_deterministic_and_sized(score in melody()) {
        let tone = ToneModel::default();
        let a = render(&score, &tone, SR).unwrap();
        let b = render(&score, &tone, SR).unwrap();
        prop_assert_eq!(a.samples(), b.samples());
        let beats: f64 = score.notes.iter().map(|n| *n.beats.numer() as f64 / *n.beats.denom() as f64).sum();
        let duration = beats * 60.0 / score.tempo_bpm + tone.tail_s;
        prop_assert!((a.duration_s() - duration).abs() <= 0.010);
    }

    #[test]
    fn novelty_ignores_polarity(raw in samples(2000)) {
        let spec = FrameSpec::new(0.046, 0.010, WindowKind::Hann).unwrap();
        let x = AudioBuffer::new(raw.clone(), SR).unwrap();
        let neg = AudioBuffer::new(raw.iter().map(|s| -s).collect(), SR).unwrap();
        let a = energy_novelty(&local_energy(&x, &spec), 100.0);
        let b = energy_novelty(&local_energy(&neg, &spec), 100.0);
        prop_assert_eq!(a.values, b.values);
    }

    #[test]
    fn onset_times_survive_gain_with_rescaled_gamma(score in melody(), c in 0.1f64..1.0) {
        let spec = FrameSpec::new(0.046, 0.010, WindowKind::Hann).unwrap();
        let x = render(&score, &ToneModel::default(), SR).unwrap();
        let params = PeakPickParams::default();
        let a = pick_onsets(&energy_novelty(&local_energy(&x, &spec), 100.0), &params);
        let b = pick_onsets(&energy_novelty(&local_energy(&x.scaled(c), &spec), 100.0 / (c * c)), &params);
        prop_assert_eq!(a.times_s, b.times_s);
    }

    #[test]
    fn onset_count_is_bounded_by_min_separation(raw in samples(8000)) {
        let spec = FrameSpec::new(0.046, 0.010, WindowKind::Hann).unwrap();
        let x = AudioBuffer::new(raw, SR).unwrap();
        let params = PeakPickParams::default();
        let onsets = pick_onsets(&energy_novelty(&local_energy(&x, &spec), 100.0), &params);
        let bound = (x.duration_s() / params.min_separation_s).floor() as usize + 1;
        prop_assert!(onsets.len() <= bound);
    }

    #[test]
    fn onsets_lie_near_rendered_onsets(score in melody()) {
        let spec = FrameSpec::new(0.046, 0.010, WindowKind::Hann).unwrap();
        let x = render(&score, &ToneModel::default(), SR).unwrap();
        let truth = note_onset_times(&score, SR);
        let onsets = pick_onsets(&energy_novelty(&local_energy(&x, &spec), 100.0), &PeakPickParams::default());
        let reach = 0.046 / 2.0 + 0.010;
        for t in onsets.times_s {
            prop_assert!(truth.iter().any(|r| (t - r).abs() <= reach), "onset {t} far from {truth:?}");
        }
    }

    #[test]
    fn cmndf_starts_at_exactly_one(raw in samples(600)) {
        prop_assume!(raw.len() >= 4);
        let d = difference_function(&raw, raw.len() / 2);
        prop_assert_eq!(cmndf(&d)[0], 1.0);
    }

    #[test]
    fn self_evaluation_is_error_free(x in notes()) {
        let r = error_rates_for_notes(&x, &x).unwrap();
        prop_assert_eq!((r.note_error_pct, r.pitch_error_pct, r.beat_error_pct), (0.0, 0.0, 0.0));
    }

    #[test]
    fn note_error_depends_only_on_counts(x in notes(), y in notes(), shift in 1..12i32) {
        let z: Vec<(i32, Beats)> = y.iter().map(|&(m, b)| (21 + (m - 21 + shift) % 88, b + Beats::new(1, 4))).collect();
        let a = error_rates_for_notes(&x, &y).unwrap();
        let b = error_rates_for_notes(&x, &z).unwrap();
        prop_assert_eq!(a.note_error_pct, b.note_error_pct);
        let expected = x.len().abs_diff(y.len()) as f64 / x.len() as f64 * 100.0;
        prop_assert_eq!(a.note_error_pct, expected);
    }
}
