//! Signal-processing primitives: FIR design and zero-delay filtering,
//! decimation, sample-rate conversion, WAV input and MFCC extraction.
//!
//! Everything here is a pure function of its inputs.

mod filter;
mod mfcc;
mod resample;
mod wav;

pub use filter::{decimate, design_lowpass_fir, filter_zero_delay, FirFilter, DECIMATION_TAPS};
pub use mfcc::{dct_matrix, mel_energies, mfcc, MelFilterbank, MfccConfig};
pub use resample::resample_to;
pub use wav::read_wav;

use crate::error::{AaiError, Result};

/// Mono audio at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate_hz: f64,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz > 0.0) || !sample_rate_hz.is_finite() {
            return Err(AaiError::invalid(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(AaiError::invalid(format!("non-finite sample at index {i}")));
        }
        Ok(Waveform {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }
}
