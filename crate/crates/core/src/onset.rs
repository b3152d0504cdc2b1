//! Onset detection from the local energy novelty function.
//!
//! Local energy is the squared signal weighted by a squared Hann window,
//! evaluated at hop-spaced centers. The novelty curve is the half-wave
//! rectified first difference of the log-compressed energy, normalized to a
//! maximum of 1. Onsets are its thresholded, well-separated local maxima.

use std::fmt::Write;

use crate::audio::{window, AudioBuffer, FrameSpec};

/// Local energy sampled at frame centers. Centers are multiples of the hop
/// and start early enough that the first window lies entirely before the
/// signal, so an onset at t = 0 still produces a rise.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyCurve {
    pub frame_times_s: Vec<f64>,
    pub values: Vec<f64>,
    pub window_length_s: f64,
    pub hop_length_s: f64,
}

impl EnergyCurve {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn frames(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.frame_times_s.iter().copied().zip(self.values.iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoveltyCurve {
    pub values: Vec<f64>,
    pub frame_times_s: Vec<f64>,
    pub gamma: f64,
    pub window_length_s: f64,
    pub hop_length_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakPickParams {
    pub amplitude_threshold: f64,
    pub min_separation_s: f64,
}

impl Default for PeakPickParams {
    fn default() -> Self {
        Self {
            amplitude_threshold: 0.1,
            min_separation_s: 0.1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OnsetList {
    pub times_s: Vec<f64>,
    pub strengths: Vec<f64>,
}

impl OnsetList {
    pub fn len(&self) -> usize {
        self.times_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_s.is_empty()
    }
}

/// `E[n] = sum_m |x[n + m] w[m]|^2` over a window of `2M + 1` samples.
pub fn local_energy(buffer: &AudioBuffer, spec: &FrameSpec) -> EnergyCurve {
    let sr = buffer.sample_rate();
    let half = ((spec.window_length_s * sr as f64) / 2.0).round().max(1.0) as i64;
    let hop = spec.hop_samples(sr) as i64;
    let w2: Vec<f64> = window(spec.window_kind, (2 * half + 1) as usize)
        .into_iter()
        .map(|w| w * w)
        .collect();
    let x = buffer.samples();
    let mut curve = EnergyCurve {
        frame_times_s: Vec::new(),
        values: Vec::new(),
        window_length_s: spec.window_length_s,
        hop_length_s: spec.hop_length_s,
    };
    if x.is_empty() {
        return curve;
    }

    let len = x.len() as i64;
    let first = -((half + 1) as f64 / hop as f64).ceil() as i64;
    let last = (len - 1 + half).div_euclid(hop);
    for n in first..=last {
        let center = n * hop;
        let lo = (center - half).max(0);
        let hi = (center + half).min(len - 1);
        let energy: f64 = (lo..=hi)
            .map(|j| {
                let s = x[j as usize];
                s * s * w2[(j - center + half) as usize]
            })
            .sum();
        curve.frame_times_s.push(center as f64 / sr as f64);
        curve.values.push(energy);
    }
    curve
}

/// Log compression, first difference, half-wave rectification and
/// max-normalization. Value `n` is the rise from frame `n` to frame `n + 1`
/// and is stamped with frame `n + 1`'s time.
pub fn energy_novelty(energy: &EnergyCurve, gamma: f64) -> NoveltyCurve {
    assert!(gamma > 0.0, "gamma must be positive");
    let compressed: Vec<f64> = energy.values.iter().map(|e| (1.0 + gamma * e).ln()).collect();
    let mut values: Vec<f64> = compressed
        .windows(2)
        .map(|w| {
            let diff = w[1] - w[0];
            if diff >= 0.0 {
                diff
            } else {
                0.0
            }
        })
        .collect();
    let max = values.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        values.iter_mut().for_each(|v| *v /= max);
    }
    NoveltyCurve {
        values,
        frame_times_s: energy.frame_times_s.iter().skip(1).copied().collect(),
        gamma,
        window_length_s: energy.window_length_s,
        hop_length_s: energy.hop_length_s,
    }
}

/// Local maxima at or above the amplitude threshold, accepted strongest
/// first and suppressed when closer than the minimum separation to an
/// already accepted onset.
pub fn pick_onsets(curve: &NoveltyCurve, params: &PeakPickParams) -> OnsetList {
    let v = &curve.values;
    let mut candidates: Vec<usize> = Vec::new();
    let mut i = 0;
    while i < v.len() {
        let left = if i == 0 { f64::NEG_INFINITY } else { v[i - 1] };
        if v[i] > left {
            // walk to the end of a plateau
            let mut j = i;
            while j + 1 < v.len() && v[j + 1] == v[i] {
                j += 1;
            }
            let right = v.get(j + 1).copied().unwrap_or(f64::NEG_INFINITY);
            if v[i] > right && v[i] >= params.amplitude_threshold {
                candidates.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }

    candidates.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    let tolerance = 1e-9;
    let mut accepted: Vec<usize> = Vec::new();
    for c in candidates {
        let t = curve.frame_times_s[c];
        if accepted
            .iter()
            .all(|&a| (curve.frame_times_s[a] - t).abs() >= params.min_separation_s - tolerance)
        {
            accepted.push(c);
        }
    }
    accepted.sort_unstable();
    OnsetList {
        times_s: accepted.iter().map(|&i| curve.frame_times_s[i]).collect(),
        strengths: accepted.iter().map(|&i| v[i]).collect(),
    }
}

/// CSV of `frame_time_s,energy,novelty`, one row per energy frame. The
/// first frame has no predecessor and is written with novelty 0.
pub fn novelty_csv(energy: &EnergyCurve, novelty: &NoveltyCurve) -> String {
    let mut out = String::from("frame_time_s,energy,novelty\n");
    for (i, (t, e)) in energy.frames().enumerate() {
        let n = if i == 0 { 0.0 } else { novelty.values[i - 1] };
        writeln!(out, "{t:.6},{e:.9e},{n:.9}").unwrap();
    }
    out
}
