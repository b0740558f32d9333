use std::f64::consts::PI;

use super::Waveform;
use crate::error::{AaiError, Result};

/// Zero crossings of the interpolation kernel on each side, measured at the
/// lower of the two rates.
const KERNEL_ZERO_CROSSINGS: f64 = 32.0;
/// Fraction of the lower Nyquist frequency kept in the passband.
const ROLLOFF: f64 = 0.95;

/// Band-limited resampling with a Blackman-windowed sinc kernel.
///
/// Each output sample is evaluated directly at its position on the input time
/// axis, which covers any rational (or irrational) rate ratio. Returns the
/// input unchanged when the rates already match.
pub fn resample_to(x: &Waveform, target_hz: f64) -> Result<Waveform> {
    if !(target_hz > 0.0) || !target_hz.is_finite() {
        return Err(AaiError::invalid(format!(
            "target sample rate must be positive, got {target_hz}"
        )));
    }
    let fs = x.sample_rate_hz();
    if target_hz == fs {
        return Ok(x.clone());
    }

    let ratio = target_hz / fs;
    let scale = ratio.min(1.0);
    let cutoff = 0.5 * scale * ROLLOFF;
    let half_width = KERNEL_ZERO_CROSSINGS / scale;

    let input = x.samples();
    let n_in = input.len();
    let n_out = (n_in as f64 * ratio - 1e-9).ceil().max(0.0) as usize;

    let kernel = |tau: f64| -> f64 {
        if tau.abs() >= half_width {
            return 0.0;
        }
        let sinc = if tau == 0.0 {
            2.0 * cutoff
        } else {
            (2.0 * PI * cutoff * tau).sin() / (PI * tau)
        };
        let u = (tau / half_width + 1.0) * 0.5;
        let window = 0.42 - 0.5 * (2.0 * PI * u).cos() + 0.08 * (4.0 * PI * u).cos();
        sinc * window
    };

    let mut out = Vec::with_capacity(n_out);
    for n in 0..n_out {
        let t = n as f64 / ratio;
        let lo = ((t - half_width).ceil().max(0.0)) as usize;
        let hi = ((t + half_width).floor() as usize).min(n_in.saturating_sub(1));
        let mut acc = 0.0;
        if lo <= hi {
            for (k, s) in input.iter().enumerate().take(hi + 1).skip(lo) {
                acc += s * kernel(t - k as f64);
            }
        }
        out.push(acc);
    }
    Waveform::new(out, target_hz)
}
