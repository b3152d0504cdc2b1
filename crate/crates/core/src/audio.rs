//! Audio input: WAV decoding into a canonical mono buffer, plus the framing
//! helpers shared by the onset and pitch stages.

use std::path::Path;

use thiserror::Error;

/// Lowest sample rate the pipeline accepts.
pub const MIN_SAMPLE_RATE: u32 = 8000;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("cannot read audio file {path}: {reason}")]
    Unreadable { path: String, reason: String },
    #[error("unsupported audio encoding in {path}: {reason}")]
    UnsupportedCodec { path: String, reason: String },
    #[error("audio file {path} contains no samples")]
    ZeroLength { path: String },
    #[error("sample rate {0} Hz is below the supported minimum of 8000 Hz")]
    SampleRateTooLow(u32),
    #[error("sample {index} has invalid amplitude {value}")]
    InvalidSample { index: usize, value: f64 },
    #[error("frame window of {0} samples is too short (need at least 2)")]
    WindowTooShort(usize),
    #[error("invalid frame spec: window {window_s} s, hop {hop_s} s")]
    InvalidFrameSpec { window_s: f64, hop_s: f64 },
    #[error("cannot write audio file {path}: {reason}")]
    WriteFailed { path: String, reason: String },
}

/// Mono signal with amplitudes in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, AudioError> {
        if sample_rate < MIN_SAMPLE_RATE {
            return Err(AudioError::SampleRateTooLow(sample_rate));
        }
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, s)| !s.is_finite() || s.abs() > 1.0)
        {
            return Err(AudioError::InvalidSample { index, value });
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// Scales `samples` so the largest magnitude is exactly 1. Silence is
    /// passed through unchanged.
    pub fn from_unnormalized(mut samples: Vec<f64>, sample_rate: u32) -> Result<Self, AudioError> {
        normalize_peak(&mut samples);
        Self::new(samples, sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Converts a duration in seconds to a whole number of samples at this rate.
    pub fn seconds_to_samples(&self, seconds: f64) -> usize {
        (seconds * self.sample_rate as f64).round().max(0.0) as usize
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// Returns a copy scaled by `gain`, clamped to `[-1, 1]`.
    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self
                .samples
                .iter()
                .map(|s| (s * gain).clamp(-1.0, 1.0))
                .collect(),
            sample_rate: self.sample_rate,
        }
    }
}

pub(crate) fn normalize_peak(samples: &mut [f64]) {
    let peak = samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if peak > 0.0 {
        for s in samples.iter_mut() {
            *s /= peak;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Hann,
    Rectangular,
}

/// Window/hop pair, expressed in seconds so it is independent of sample rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSpec {
    pub window_length_s: f64,
    pub hop_length_s: f64,
    pub window_kind: WindowKind,
}

impl FrameSpec {
    pub fn new(window_length_s: f64, hop_length_s: f64, window_kind: WindowKind) -> Result<Self, AudioError> {
        if !(hop_length_s > 0.0 && hop_length_s <= window_length_s && window_length_s.is_finite()) {
            return Err(AudioError::InvalidFrameSpec {
                window_s: window_length_s,
                hop_s: hop_length_s,
            });
        }
        Ok(Self {
            window_length_s,
            hop_length_s,
            window_kind,
        })
    }

    pub fn window_samples(&self, sample_rate: u32) -> usize {
        (self.window_length_s * sample_rate as f64).round() as usize
    }

    pub fn hop_samples(&self, sample_rate: u32) -> usize {
        ((self.hop_length_s * sample_rate as f64).round() as usize).max(1)
    }
}

/// Symmetric window of `len` samples.
pub fn window(kind: WindowKind, len: usize) -> Vec<f64> {
    match kind {
        WindowKind::Rectangular => vec![1.0; len],
        WindowKind::Hann => hann(len),
    }
}

pub fn hann(len: usize) -> Vec<f64> {
    match len {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => {
            let denom = (len - 1) as f64;
            (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / denom).cos())
                .collect()
        }
    }
}

/// One windowed block of the signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub start_s: f64,
    pub samples: Vec<f64>,
}

/// Splits `buffer` into hop-spaced frames, each multiplied by the window.
///
/// Frames start at sample 0 and continue while the start lies inside the
/// buffer; the tail of the last frame is zero-padded. A window longer than
/// the whole buffer yields one padded frame.
pub fn frame_signal(buffer: &AudioBuffer, spec: &FrameSpec) -> Result<Vec<Frame>, AudioError> {
    let sr = buffer.sample_rate();
    let win_len = spec.window_samples(sr);
    if win_len < 2 {
        return Err(AudioError::WindowTooShort(win_len));
    }
    let hop = spec.hop_samples(sr);
    let win = window(spec.window_kind, win_len);
    let x = buffer.samples();

    let starts: Vec<usize> = if win_len > x.len() {
        vec![0]
    } else {
        (0..x.len()).step_by(hop).collect()
    };

    Ok(starts
        .into_iter()
        .map(|start| {
            let samples = win
                .iter()
                .enumerate()
                .map(|(i, w)| x.get(start + i).copied().unwrap_or(0.0) * w)
                .collect();
            Frame {
                start_s: start as f64 / sr as f64,
                samples,
            }
        })
        .collect())
}

/// Reads a RIFF/WAVE file (integer PCM 16/24/32-bit or 32-bit float, mono or
/// stereo), downmixes to mono and peak-normalizes.
pub fn decode_wav(path: impl AsRef<Path>) -> Result<AudioBuffer, AudioError> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let reader = hound::WavReader::open(path).map_err(|e| classify_hound_error(&name, e))?;
    let spec = reader.spec();

    if spec.channels == 0 || spec.channels > 2 {
        return Err(AudioError::UnsupportedCodec {
            path: name,
            reason: format!("{} channels (only mono and stereo are supported)", spec.channels),
        });
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, bits @ (16 | 24 | 32)) => {
            let scale = 2f64.powi(bits as i32 - 1);
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<Result<_, _>>()
                .map_err(|e| classify_hound_error(&name, e))?
        }
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(|e| classify_hound_error(&name, e))?,
        (format, bits) => {
            return Err(AudioError::UnsupportedCodec {
                path: name,
                reason: format!("{bits}-bit {format:?} samples"),
            })
        }
    };

    let channels = spec.channels as usize;
    let mut mono: Vec<f64> = interleaved
        .chunks_exact(channels)
        .map(|c| c.iter().sum::<f64>() / channels as f64)
        .collect();
    if mono.is_empty() {
        return Err(AudioError::ZeroLength { path: name });
    }
    for s in mono.iter_mut() {
        if !s.is_finite() {
            *s = 0.0;
        }
    }
    normalize_peak(&mut mono);
    AudioBuffer::new(mono, spec.sample_rate)
}

fn classify_hound_error(path: &str, err: hound::Error) -> AudioError {
    match err {
        hound::Error::Unsupported | hound::Error::TooWide => AudioError::UnsupportedCodec {
            path: path.to_string(),
            reason: err.to_string(),
        },
        other => AudioError::Unreadable {
            path: path.to_string(),
            reason: other.to_string(),
        },
    }
}

/// Sample encodings accepted by [`write_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleEncoding {
    Int16,
    Int24,
    Int32,
    Float32,
}

/// Writes a mono WAV file. Integer encodings scale by `2^(bits-1) - 1` so a
/// full-scale sample never clips.
pub fn write_wav(buffer: &AudioBuffer, path: impl AsRef<Path>, encoding: SampleEncoding) -> Result<(), AudioError> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let fail = |e: hound::Error| AudioError::WriteFailed {
        path: name.clone(),
        reason: e.to_string(),
    };
    let (bits, format) = match encoding {
        SampleEncoding::Int16 => (16, hound::SampleFormat::Int),
        SampleEncoding::Int24 => (24, hound::SampleFormat::Int),
        SampleEncoding::Int32 => (32, hound::SampleFormat::Int),
        SampleEncoding::Float32 => (32, hound::SampleFormat::Float),
    };
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: buffer.sample_rate(),
        bits_per_sample: bits,
        sample_format: format,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(fail)?;
    match format {
        hound::SampleFormat::Int => {
            let scale = 2f64.powi(bits as i32 - 1) - 1.0;
            for &s in buffer.samples() {
                writer.write_sample((s * scale).round() as i32).map_err(fail)?;
            }
        }
        hound::SampleFormat::Float => {
            for &s in buffer.samples() {
                writer.write_sample(s as f32).map_err(fail)?;
            }
        }
    }
    writer.finalize().map_err(fail)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn buf(samples: Vec<f64>) -> AudioBuffer {
        AudioBuffer::new(samples, 44100).unwrap()
    }

    fn write_raw(path: &Path, spec: hound::WavSpec, samples: &[i32]) {
        let mut w = hound::WavWriter::create(path, spec).unwrap();
        for &s in samples {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
    }

    #[test]
    fn stereo_silence_decodes_to_zeros() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("silence.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 44100,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        write_raw(&path, spec, &vec![0; 2 * 44100]);
        let b = decode_wav(&path).unwrap();
        assert_eq!(b.len(), 44100);
        assert_eq!(b.sample_rate(), 44100);
        assert!(b.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn int16_scaling_then_peak_normalization() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("three.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        write_raw(&path, spec, &[16384, -16384, 0]);
        let b = decode_wav(&path).unwrap();
        assert_eq!(b.samples(), &[1.0, -1.0, 0.0]);
    }

    #[test]
    fn identical_channels_downmix_to_either_channel() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dup.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 22050,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mono = [1000, -32000, 77, 5];
        let stereo: Vec<i32> = mono.iter().flat_map(|&s| [s, s]).collect();
        write_raw(&path, spec, &stereo);
        let b = decode_wav(&path).unwrap();
        let expect: Vec<f64> = mono.iter().map(|&s| s as f64 / 32000.0).collect();
        assert_eq!(b.samples(), expect.as_slice());
    }

    #[test]
    fn decode_errors_are_distinct() {
        let dir = tempfile::tempdir().unwrap();
        let missing = decode_wav(dir.path().join("nope.wav")).unwrap_err();
        assert!(matches!(missing, AudioError::Unreadable { .. }));

        let garbage = dir.path().join("garbage.wav");
        std::fs::write(&garbage, b"this is not a wave file at all").unwrap();
        assert!(matches!(decode_wav(&garbage).unwrap_err(), AudioError::Unreadable { .. }));

        let empty = dir.path().join("empty.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 44100,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        write_raw(&empty, spec, &[]);
        assert!(matches!(decode_wav(&empty).unwrap_err(), AudioError::ZeroLength { .. }));

        let eight = dir.path().join("eight.wav");
        let spec8 = hound::WavSpec {
            bits_per_sample: 8,
            ..spec
        };
        write_raw(&eight, spec8, &[1, 2, 3]);
        assert!(matches!(decode_wav(&eight).unwrap_err(), AudioError::UnsupportedCodec { .. }));
    }

    #[test]
    fn frame_counts_follow_padding_rule() {
        let b = AudioBuffer::new(vec![0.25; 1000], 10000).unwrap();
        let exact = FrameSpec::new(0.01, 0.01, WindowKind::Rectangular).unwrap();
        let frames = frame_signal(&b, &exact).unwrap();
        assert_eq!(frames.len(), 10);
        let starts: Vec<f64> = frames.iter().map(|f| f.start_s).collect();
        assert_eq!(starts[..3], [0.0, 0.01, 0.02]);

        let overlapped = FrameSpec::new(0.01, 0.006, WindowKind::Rectangular).unwrap();
        let frames = frame_signal(&b, &overlapped).unwrap();
        assert_eq!(frames.len(), 17);
        // last frame starts at 960 and is padded past sample 999
        let last = frames.last().unwrap();
        assert_eq!(last.samples[..40], [0.25; 40]);
        assert_eq!(last.samples[40..], [0.0; 60]);
    }

    #[test]
    fn constant_signal_frames_equal_the_window() {
        let b = buf(vec![1.0; 4410]);
        let spec = FrameSpec::new(0.01, 0.005, WindowKind::Hann).unwrap();
        let frames = frame_signal(&b, &spec).unwrap();
        let w = hann(441);
        assert_eq!(frames[0].samples, w);
        assert_eq!(frames[3].samples, w);
    }

    #[test]
    fn window_longer_than_buffer_gives_one_frame() {
        let b = buf(vec![0.5; 100]);
        let spec = FrameSpec::new(0.1, 0.001, WindowKind::Rectangular).unwrap();
        let frames = frame_signal(&b, &spec).unwrap();
        assert_eq!(frames.len(), 1);
        assert_eq!(frames[0].samples.len(), 4410);
    }

    #[test]
    fn rejects_bad_specs_and_buffers() {
        assert!(FrameSpec::new(0.01, 0.02, WindowKind::Hann).is_err());
        assert!(FrameSpec::new(0.01, 0.0, WindowKind::Hann).is_err());
        let tiny = FrameSpec::new(0.00001, 0.00001, WindowKind::Hann).unwrap();
        assert!(matches!(
            frame_signal(&buf(vec![0.0; 10]), &tiny),
            Err(AudioError::WindowTooShort(_))
        ));
        assert!(AudioBuffer::new(vec![0.0], 4000).is_err());
        assert!(AudioBuffer::new(vec![1.5], 44100).is_err());
    }
}
