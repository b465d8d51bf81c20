//! Reference nonlinear amplifier used to generate ground truth.
//!
//! The chain is a first-order pre-emphasis, a gain-controlled `tanh`
//! waveshaper normalized so that `±1 ↦ ±1`, and a one-pole low-pass.

use crate::error::{Error, Result};

pub const DEFAULT_PRE_COEFF: f64 = 0.5;
pub const DEFAULT_POST_COEFF: f64 = 0.6;
pub const MAX_GAIN_KNOB: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmpParams {
    /// Pre-emphasis `u[n] = x[n] − pre_coeff·x[n−1]`, in `[0, 1)`.
    pub pre_coeff: f64,
    /// One-pole smoothing `y[n] = β·v[n] + (1−β)·y[n−1]`, in `(0, 1]`.
    pub post_coeff: f64,
    /// Knob position in `[0, 10]`.
    pub gain_knob: f64,
}

impl Default for AmpParams {
    fn default() -> Self {
        Self {
            pre_coeff: DEFAULT_PRE_COEFF,
            post_coeff: DEFAULT_POST_COEFF,
            gain_knob: 5.0,
        }
    }
}

impl AmpParams {
    pub fn with_gain(gain_knob: f64) -> Self {
        Self {
            gain_knob,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.pre_coeff) {
            return Err(Error::invalid(format!("pre_coeff {} not in [0, 1)", self.pre_coeff)));
        }
        if !(self.post_coeff > 0.0 && self.post_coeff <= 1.0) {
            return Err(Error::invalid(format!("post_coeff {} not in (0, 1]", self.post_coeff)));
        }
        check_gain(self.gain_knob)
    }
}

fn check_gain(gain_knob: f64) -> Result<()> {
    if !(0.0..=MAX_GAIN_KNOB).contains(&gain_knob) {
        return Err(Error::invalid(format!("gain knob {gain_knob} not in [0, 10]")));
    }
    Ok(())
}

/// Static waveshaper `tanh(γu)/tanh(γ)` with `γ = 1 + gain_knob`.
#[inline]
pub fn amp_static_nl(u: f64, gain_knob: f64) -> f64 {
    let gamma = 1.0 + gain_knob;
    (gamma * u).tanh() / gamma.tanh()
}

/// Runs the full amplifier over `x`, starting from rest.
pub fn amp_process(x: &[f64], params: &AmpParams) -> Result<Vec<f64>> {
    params.validate()?;
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("amplifier input sample {i}")));
    }
    let AmpParams {
        pre_coeff,
        post_coeff,
        gain_knob,
    } = *params;
    let mut prev_x = 0.0;
    let mut prev_y = 0.0;
    Ok(x.iter()
        .map(|&xn| {
            let u = xn - pre_coeff * prev_x;
            let v = amp_static_nl(u, gain_knob);
            let y = post_coeff * v + (1.0 - post_coeff) * prev_y;
            prev_x = xn;
            prev_y = y;
            y
        })
        .collect())
}
