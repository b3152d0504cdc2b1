//! YIN fundamental frequency estimation.
//!
//! Per frame: difference function, cumulative mean normalized difference
//! (CMNDF), absolute threshold with the first local minimum, parabolic
//! refinement, then one re-centering pass that keeps whichever nearby frame
//! position, up to half the integration length away, gives the deeper CMNDF
//! dip. A note's pitch is the sample rate
//! over the median of its per-frame periods.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::audio::AudioBuffer;

/// Lowest and highest piano fundamentals (A0, C8).
pub const PIANO_F_MIN: f64 = 27.5;
pub const PIANO_F_MAX: f64 = 4186.0;
/// When no CMNDF value falls under the threshold, the global minimum is
/// still accepted if it is below this ceiling.
const FALLBACK_CEILING: f64 = 0.5;
/// Re-centering search range for the local estimate, relative to the
/// initial period.
const LOCAL_PERIOD_RANGE: f64 = 0.2;

#[derive(Debug, Error, PartialEq)]
pub enum PitchError {
    #[error("frequency {0} Hz must be positive and finite")]
    InvalidFrequency(f64),
    #[error("frequency {0} Hz maps outside the MIDI range 0-127")]
    OutOfMidiRange(f64),
    #[error("invalid YIN parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YinParams {
    pub window_length_s: f64,
    pub hop_length_s: f64,
    pub threshold: f64,
    pub f_min: f64,
    pub f_max: f64,
}

impl Default for YinParams {
    fn default() -> Self {
        Self {
            window_length_s: 0.068,
            hop_length_s: 0.010,
            threshold: 0.1,
            f_min: PIANO_F_MIN,
            f_max: PIANO_F_MAX,
        }
    }
}

/// YIN parameters converted to samples for one sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedYin {
    pub frame_len: usize,
    pub hop: usize,
    pub tau_min: usize,
    pub tau_max: usize,
    pub threshold: f64,
    pub warnings: Vec<String>,
}

impl YinParams {
    /// Converts to samples. The lowest frequency is raised when the window
    /// cannot hold two of its periods, and the highest is capped at Nyquist;
    /// both adjustments are reported as warnings.
    pub fn resolve(&self, sample_rate: u32) -> Result<ResolvedYin, PitchError> {
        let sr = sample_rate as f64;
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(PitchError::InvalidParams(format!("threshold {} outside (0, 1)", self.threshold)));
        }
        if !(self.f_min > 0.0 && self.f_min < self.f_max) {
            return Err(PitchError::InvalidParams(format!(
                "need 0 < f_min < f_max, got {} and {}",
                self.f_min, self.f_max
            )));
        }
        if !(self.hop_length_s > 0.0) {
            return Err(PitchError::InvalidParams("hop must be positive".into()));
        }
        let frame_len = (self.window_length_s * sr).round() as usize;
        let hop = ((self.hop_length_s * sr).round() as usize).max(1);
        let mut warnings = Vec::new();

        let mut f_max = self.f_max;
        if f_max > sr / 2.0 {
            f_max = sr / 2.0;
            warnings.push(format!("YIN f_max lowered to Nyquist ({f_max} Hz)"));
        }
        let mut f_min = self.f_min;
        let two_periods = 2.0 * sr / frame_len as f64;
        if f_min < two_periods {
            f_min = two_periods;
            warnings.push(format!(
                "YIN f_min raised from {} Hz to {:.2} Hz so the {:.0} ms window holds two periods",
                self.f_min,
                f_min,
                self.window_length_s * 1000.0
            ));
        }
        let tau_min = ((sr / f_max).floor() as usize).max(2);
        let tau_max = ((sr / f_min).ceil() as usize).min(frame_len / 2);
        if tau_min + 2 > tau_max {
            return Err(PitchError::InvalidParams(format!(
                "window of {frame_len} samples leaves no usable lag range"
            )));
        }
        Ok(ResolvedYin {
            frame_len,
            hop,
            tau_min,
            tau_max,
            threshold: self.threshold,
            warnings,
        })
    }
}

/// Difference function through the autocorrelation identity
/// `d[tau] = r_t[0] + r_{t+tau}[0] - 2 r_t[tau]`, with the cross term from an
/// FFT. The integration length is `frame.len() - tau_max`.
pub fn difference_function(frame: &[f64], tau_max: usize) -> Vec<f64> {
    DifferenceEngine::new(frame.len()).compute(frame, tau_max)
}

/// Direct evaluation of `d[tau] = sum_j (x[j] - x[j + tau])^2`.
pub fn difference_function_direct(frame: &[f64], tau_max: usize) -> Vec<f64> {
    assert!(frame.len() >= 2 * tau_max, "frame shorter than twice the largest lag");
    let w = frame.len() - tau_max;
    (0..=tau_max)
        .map(|tau| {
            (0..w)
                .map(|j| {
                    let diff = frame[j] - frame[j + tau];
                    diff * diff
                })
                .sum()
        })
        .collect()
}

/// Cached FFT plans for one frame length.
struct DifferenceEngine {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    packed: Vec<Complex<f64>>,
    product: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
    prefix: Vec<f64>,
}

impl DifferenceEngine {
    fn new(frame_len: usize) -> Self {
        let size = frame_len.max(2).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            size,
            forward,
            inverse,
            packed: vec![Complex::default(); size],
            product: vec![Complex::default(); size],
            scratch: vec![Complex::default(); scratch_len],
            prefix: Vec::with_capacity(size + 1),
        }
    }

    fn compute(&mut self, frame: &[f64], tau_max: usize) -> Vec<f64> {
        assert!(frame.len() >= 2 * tau_max, "frame shorter than twice the largest lag");
        assert!(frame.len() <= self.size);
        let w = frame.len() - tau_max;
        let n = self.size;

        // both real inputs in one transform: the whole frame as the real part,
        // its first w samples as the imaginary part
        for (i, c) in self.packed.iter_mut().enumerate() {
            let x = frame.get(i).copied().unwrap_or(0.0);
            *c = Complex::new(x, if i < w { x } else { 0.0 });
        }
        self.forward.process_with_scratch(&mut self.packed, &mut self.scratch);
        for k in 0..n {
            let z = self.packed[k];
            let zc = self.packed[(n - k) % n].conj();
            let full = (z + zc) * 0.5;
            let head = (z - zc) * Complex::new(0.0, -0.5);
            self.product[k] = full * head.conj();
        }
        self.inverse.process_with_scratch(&mut self.product, &mut self.scratch);
        let norm = 1.0 / n as f64;

        // prefix sums of x^2 for the sliding energy term
        self.prefix.clear();
        self.prefix.push(0.0);
        let mut acc = 0.0;
        for &s in frame {
            acc += s * s;
            self.prefix.push(acc);
        }
        let prefix = &self.prefix;
        let energy = |from: usize| prefix[from + w] - prefix[from];
        let e0 = energy(0);
        let mut d: Vec<f64> = (0..=tau_max)
            .map(|tau| {
                let cross = self.product[tau].re * norm;
                (e0 + energy(tau) - 2.0 * cross).max(0.0)
            })
            .collect();
        d[0] = 0.0;
        d
    }
}

/// Cumulative mean normalized difference; a zero running sum maps to 1.
pub fn cmndf(d: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(d.len());
    if d.is_empty() {
        return out;
    }
    out.push(1.0);
    let mut running = 0.0;
    for (tau, &v) in d.iter().enumerate().skip(1) {
        running += v;
        out.push(if running > 0.0 { v * tau as f64 / running } else { 1.0 });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodPick {
    /// Period in samples, refined to a fraction of a sample.
    pub period: f64,
    /// CMNDF value at the chosen integer lag.
    pub value: f64,
}

fn parabolic_offset(a: f64, b: f64, c: f64) -> f64 {
    let denom = a - 2.0 * b + c;
    if denom > 0.0 {
        (0.5 * (a - c) / denom).clamp(-1.0, 1.0)
    } else {
        0.0
    }
}

fn pick_in_range(cm: &[f64], tau_min: usize, tau_max: usize, threshold: f64) -> Option<PeriodPick> {
    let tau_max = tau_max.min(cm.len().saturating_sub(1));
    if tau_min > tau_max {
        return None;
    }
    let mut chosen = None;
    let mut tau = tau_min;
    while tau <= tau_max {
        if cm[tau] < threshold {
            while tau < tau_max && cm[tau + 1] < cm[tau] {
                tau += 1;
            }
            chosen = Some(tau);
            break;
        }
        tau += 1;
    }
    let tau = match chosen {
        Some(t) => t,
        None => {
            let t = (tau_min..=tau_max).min_by(|&a, &b| cm[a].total_cmp(&cm[b]))?;
            if cm[t] >= FALLBACK_CEILING {
                return None;
            }
            t
        }
    };
    let offset = if tau >= 1 && tau + 1 < cm.len() {
        parabolic_offset(cm[tau - 1], cm[tau], cm[tau + 1])
    } else {
        0.0
    };
    Some(PeriodPick {
        period: tau as f64 + offset,
        value: cm[tau],
    })
}

/// Smallest lag whose CMNDF dips under the threshold (walked down to its
/// local minimum), else the global minimum if it is under 0.5, else `None`.
pub fn pick_period(cmndf: &[f64], params: &YinParams, sample_rate: u32) -> Option<PeriodPick> {
    let sr = sample_rate as f64;
    let tau_min = ((sr / params.f_max.min(sr / 2.0)).floor() as usize).max(2);
    let tau_max = (sr / params.f_min).ceil() as usize;
    pick_in_range(cmndf, tau_min, tau_max, params.threshold)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PitchTrack {
    pub frame_times_s: Vec<f64>,
    /// 0 marks an unvoiced frame.
    pub f0_hz: Vec<f64>,
    pub cmndf_min: Vec<f64>,
}

impl PitchTrack {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame_time_s,f0_hz,cmndf_min\n");
        for ((t, f), c) in self.frame_times_s.iter().zip(&self.f0_hz).zip(&self.cmndf_min) {
            writeln!(out, "{t:.6},{f:.6},{c:.9}").unwrap();
        }
        out
    }
}

/// Reusable YIN state for one sample rate and parameter set.
pub struct YinAnalyzer {
    config: ResolvedYin,
    sample_rate: u32,
    engine: DifferenceEngine,
    frame: Vec<f64>,
    /// CMNDFs by frame start, shared between neighboring frames of one pass.
    cache: BTreeMap<usize, Vec<f64>>,
}

impl YinAnalyzer {
    pub fn new(params: &YinParams, sample_rate: u32) -> Result<Self, PitchError> {
        let config = params.resolve(sample_rate)?;
        let engine = DifferenceEngine::new(config.frame_len);
        Ok(Self {
            frame: vec![0.0; config.frame_len],
            config,
            sample_rate,
            engine,
            cache: BTreeMap::new(),
        })
    }

    pub fn config(&self) -> &ResolvedYin {
        &self.config
    }

    /// CMNDF of the frame starting at `start`, zero-padded past the end.
    pub fn cmndf_at(&mut self, x: &[f64], start: usize) -> Vec<f64> {
        for (i, s) in self.frame.iter_mut().enumerate() {
            *s = x.get(start + i).copied().unwrap_or(0.0);
        }
        let d = self.engine.compute(&self.frame, self.config.tau_max);
        cmndf(&d)
    }

    fn cached_cmndf(&mut self, x: &[f64], start: usize) -> &[f64] {
        if !self.cache.contains_key(&start) {
            let cm = self.cmndf_at(x, start);
            self.cache.insert(start, cm);
        }
        &self.cache[&start]
    }

    fn pick_at(&mut self, x: &[f64], start: usize, lags: (usize, usize)) -> (Option<PeriodPick>, f64) {
        let (tau_min, tau_max, threshold) = (self.config.tau_min, self.config.tau_max, self.config.threshold);
        let cm = self.cached_cmndf(x, start);
        let floor = cm[tau_min..=tau_max].iter().copied().fold(f64::INFINITY, f64::min);
        (pick_in_range(cm, lags.0.max(tau_min), lags.1.min(tau_max), threshold), floor)
    }

    /// Re-centering offsets: whole hops within half the integration length,
    /// so neighboring analysis frames share their CMNDFs.
    fn local_offsets(&self) -> Vec<i64> {
        let hop = self.config.hop as i64;
        let reach = ((self.config.frame_len - self.config.tau_max) / 2) as i64;
        let steps: Vec<i64> = (1..).map(|k| k * hop).take_while(|&o| o <= reach).collect();
        let steps = if steps.is_empty() { vec![reach.max(1)] } else { steps };
        steps.iter().flat_map(|&o| [-o, o]).collect()
    }

    /// Initial YIN estimate for the frame starting at `start`.
    pub fn initial_pick(&mut self, x: &[f64], start: usize) -> Option<PeriodPick> {
        self.cache.clear();
        self.pick_at(x, start, (self.config.tau_min, self.config.tau_max)).0
    }

    /// Re-evaluates the pick at nearby frame positions and returns the one
    /// with the smallest CMNDF value, if it beats `initial`. The search is
    /// confined to lags near the initial period.
    pub fn best_local_estimate(&mut self, x: &[f64], start: usize, initial: Option<PeriodPick>) -> Option<PeriodPick> {
        self.cache.clear();
        self.refine(x, start, initial)
    }

    fn refine(&mut self, x: &[f64], start: usize, initial: Option<PeriodPick>) -> Option<PeriodPick> {
        let initial = initial?;
        let last_start = x.len().saturating_sub(self.config.frame_len) as i64;
        let lags = (
            (initial.period * (1.0 - LOCAL_PERIOD_RANGE)).floor() as usize,
            (initial.period * (1.0 + LOCAL_PERIOD_RANGE)).ceil() as usize,
        );
        let mut best = initial;
        for offset in self.local_offsets() {
            let pos = (start as i64 + offset).clamp(0, last_start.max(0)) as usize;
            if pos == start {
                continue;
            }
            if let (Some(pick), _) = self.pick_at(x, pos, lags) {
                if pick.value < best.value {
                    best = pick;
                }
            }
        }
        Some(best)
    }

    fn frame_estimate(&mut self, x: &[f64], start: usize) -> (Option<PeriodPick>, f64) {
        let (initial, floor) = self.pick_at(x, start, (self.config.tau_min, self.config.tau_max));
        let refined = self.refine(x, start, initial);
        // frames left behind by the analysis position are not needed again
        let reach = self.local_offsets().into_iter().max().unwrap_or(0) as usize;
        let keep_from = start.saturating_sub(2 * reach);
        while self.cache.first_key_value().is_some_and(|(&k, _)| k < keep_from) {
            self.cache.pop_first();
        }
        (refined, floor)
    }

    /// Frame-by-frame contour over the whole buffer, stamped at frame centers.
    pub fn track(&mut self, buffer: &AudioBuffer) -> PitchTrack {
        self.cache.clear();
        let x = buffer.samples();
        let sr = self.sample_rate as f64;
        let mut track = PitchTrack::default();
        let mut start = 0;
        while start < x.len() {
            let (pick, floor) = self.frame_estimate(x, start);
            track
                .frame_times_s
                .push((start as f64 + self.config.frame_len as f64 / 2.0) / sr);
            track.f0_hz.push(pick.map_or(0.0, |p| sr / p.period));
            track.cmndf_min.push(pick.map_or(floor, |p| p.value));
            start += self.config.hop;
        }
        track
    }

    /// Frame start positions covering `[start_s, end_s)`. A span shorter than
    /// one window becomes a single window centered on `start_s`.
    fn span_starts(&self, len: usize, start_s: f64, end_s: f64) -> Vec<usize> {
        let sr = self.sample_rate as f64;
        let frame = self.config.frame_len;
        let first = (start_s * sr).round().max(0.0) as usize;
        let end = ((end_s * sr).round().max(0.0) as usize).min(len);
        if end >= first + frame {
            (first..=end - frame).step_by(self.config.hop).collect()
        } else {
            let centered = (start_s * sr - frame as f64 / 2.0).round().max(0.0) as usize;
            vec![centered.min(len.saturating_sub(frame))]
        }
    }

    /// Fundamental of the note sounding in `[start_s, end_s)`, or 0 when no
    /// frame is voiced.
    pub fn note_pitch(&mut self, buffer: &AudioBuffer, span: (f64, f64)) -> f64 {
        self.cache.clear();
        let x = buffer.samples();
        let mut periods: Vec<f64> = self
            .span_starts(x.len(), span.0, span.1)
            .into_iter()
            .filter_map(|start| self.frame_estimate(x, start).0)
            .map(|p| p.period)
            .collect();
        if periods.is_empty() {
            return 0.0;
        }
        periods.sort_by(f64::total_cmp);
        self.sample_rate as f64 / periods[(periods.len() - 1) / 2]
    }
}

pub fn note_pitch(buffer: &AudioBuffer, span: (f64, f64), params: &YinParams) -> Result<f64, PitchError> {
    Ok(YinAnalyzer::new(params, buffer.sample_rate())?.note_pitch(buffer, span))
}

pub fn pitch_track(buffer: &AudioBuffer, params: &YinParams) -> Result<PitchTrack, PitchError> {
    Ok(YinAnalyzer::new(params, buffer.sample_rate())?.track(buffer))
}

/// Nearest equal-tempered MIDI note and the deviation from it in cents.
/// Exact halfway values round to the even note number.
pub fn f0_to_midi(f0_hz: f64) -> Result<(i32, f64), PitchError> {
    if !(f0_hz > 0.0 && f0_hz.is_finite()) {
        return Err(PitchError::InvalidFrequency(f0_hz));
    }
    let exact = 69.0 + 12.0 * (f0_hz / 440.0).log2();
    let midi = exact.round_ties_even();
    if !(0.0..=127.0).contains(&midi) {
        return Err(PitchError::OutOfMidiRange(f0_hz));
    }
    Ok((midi as i32, 100.0 * (exact - midi)))
}
