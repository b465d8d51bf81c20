//! Synthetic guitar-like excitation: a sequence of plucked single notes and
//! three-note chords.

use std::f64::consts::PI;

use super::AudioSignal;
use crate::error::{Error, Result};
use crate::tensor::Rng;

pub const PEAK_LEVEL: f64 = 0.9;

const F0_RANGE: (f64, f64) = (82.0, 660.0);
const EVENT_SECONDS: (f64, f64) = (0.25, 0.75);
const DECAY_SECONDS: (f64, f64) = (0.2, 0.8);
const VELOCITY: (f64, f64) = (0.3, 1.0);
const HARMONICS: usize = 6;
/// Major triad: root, major third, fifth.
const CHORD_SEMITONES: [f64; 3] = [0.0, 4.0, 7.0];

/// A plucked note: `Σ_{k=1..6} e^{−t/τ_k}·sin(2πk·f0·t)/k` with `τ_k = decay_s/k`.
/// Harmonics at or above Nyquist are dropped.
pub fn synth_note(f0: f64, duration_s: f64, sample_rate: u32, decay_s: f64) -> Vec<f64> {
    let n = (duration_s * sample_rate as f64).round() as usize;
    let mut out = vec![0.0; n];
    add_note(&mut out, f0, sample_rate, decay_s, 1.0);
    out
}

fn add_note(buf: &mut [f64], f0: f64, sample_rate: u32, decay_s: f64, velocity: f64) {
    let fs = sample_rate as f64;
    for k in 1..=HARMONICS {
        let fk = k as f64 * f0;
        if fk >= fs / 2.0 {
            break;
        }
        let tau = decay_s / k as f64;
        for (i, v) in buf.iter_mut().enumerate() {
            let t = i as f64 / fs;
            *v += velocity * (-t / tau).exp() * (2.0 * PI * fk * t).sin() / k as f64;
        }
    }
}

/// Tiles `duration_s` seconds with random note and chord events, then scales
/// the result so its peak magnitude is exactly [`PEAK_LEVEL`].
pub fn generate_excitation(duration_s: f64, sample_rate: u32, rng: &mut Rng) -> Result<AudioSignal> {
    if !(duration_s > 0.0) || !duration_s.is_finite() {
        return Err(Error::invalid(format!("duration {duration_s} s must be positive")));
    }
    let fs = sample_rate as f64;
    let n = (duration_s * fs).round().max(1.0) as usize;
    let mut samples = vec![0.0; n];
    let mut at = 0;
    while at < n {
        let len = ((rng.uniform(EVENT_SECONDS.0, EVENT_SECONDS.1)? * fs) as usize).clamp(1, n - at);
        let decay = rng.uniform(DECAY_SECONDS.0, DECAY_SECONDS.1)?;
        let velocity = rng.uniform(VELOCITY.0, VELOCITY.1)?;
        let buf = &mut samples[at..at + len];
        if rng.next_f64() < 0.5 {
            let f0 = rng.uniform(F0_RANGE.0, F0_RANGE.1)?;
            add_note(buf, f0, sample_rate, decay, velocity);
        } else {
            // keep the fifth inside the guitar range
            let top = F0_RANGE.1 / 2f64.powf(CHORD_SEMITONES[2] / 12.0);
            let root = rng.uniform(F0_RANGE.0, top)?;
            for st in CHORD_SEMITONES {
                add_note(buf, root * 2f64.powf(st / 12.0), sample_rate, decay, velocity / 3.0);
            }
        }
        at += len;
    }
    let peak = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        for v in &mut samples {
            *v = *v / peak * PEAK_LEVEL;
        }
    }
    AudioSignal::new(samples, sample_rate)
}
