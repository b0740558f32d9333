use std::f64::consts::PI;

use crate::error::{AaiError, Result};

/// Tap count of the anti-alias filter used by [`decimate`].
pub const DECIMATION_TAPS: usize = 101;

/// Linear-phase FIR filter with an odd number of symmetric taps.
#[derive(Debug, Clone, PartialEq)]
pub struct FirFilter {
    taps: Vec<f64>,
}

impl FirFilter {
    /// Wraps existing taps. They must be odd in number and mirror-symmetric.
    pub fn from_taps(taps: Vec<f64>) -> Result<Self> {
        if taps.len() % 2 == 0 {
            return Err(AaiError::invalid(format!(
                "FIR filter needs an odd tap count, got {}",
                taps.len()
            )));
        }
        let n = taps.len();
        if (0..n / 2).any(|i| taps[i] != taps[n - 1 - i]) {
            return Err(AaiError::invalid("FIR taps are not symmetric"));
        }
        Ok(FirFilter { taps })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn group_delay_samples(&self) -> usize {
        (self.taps.len() - 1) / 2
    }

    pub fn dc_gain(&self) -> f64 {
        self.taps.iter().sum()
    }
}

/// Hamming-windowed sinc low-pass, normalized to unit DC gain.
pub fn design_lowpass_fir(cutoff_hz: f64, fs_hz: f64, n_taps: usize) -> Result<FirFilter> {
    if !(fs_hz > 0.0) {
        return Err(AaiError::invalid(format!("sample rate must be positive, got {fs_hz}")));
    }
    if !(cutoff_hz > 0.0) || cutoff_hz >= fs_hz / 2.0 {
        return Err(AaiError::invalid(format!(
            "cutoff {cutoff_hz} Hz must lie strictly between 0 and Nyquist ({} Hz)",
            fs_hz / 2.0
        )));
    }
    if n_taps % 2 == 0 || n_taps < 11 {
        return Err(AaiError::invalid(format!(
            "tap count must be odd and at least 11, got {n_taps}"
        )));
    }

    let fc = cutoff_hz / fs_hz;
    let center = (n_taps - 1) / 2;
    let mut taps = vec![0.0; n_taps];
    for i in 0..=center {
        let k = i as f64 - center as f64;
        let sinc = if i == center {
            2.0 * fc
        } else {
            (2.0 * PI * fc * k).sin() / (PI * k)
        };
        let window = 0.54 - 0.46 * (2.0 * PI * i as f64 / (n_taps - 1) as f64).cos();
        taps[i] = sinc * window;
        taps[n_taps - 1 - i] = taps[i];
    }
    let gain: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= gain;
    }
    Ok(FirFilter { taps })
}

/// Filters `x` without phase delay.
///
/// The signal is extended by mirror reflection (edge sample repeated) on both
/// sides by the group delay, convolved, and only the fully overlapped part is
/// kept, so the output has the same length and timing as the input.
pub fn filter_zero_delay(x: &[f64], filter: &FirFilter) -> Result<Vec<f64>> {
    let taps = filter.taps();
    if x.len() <= taps.len() {
        return Err(AaiError::invalid(format!(
            "signal of {} samples is not longer than the {}-tap filter",
            x.len(),
            taps.len()
        )));
    }
    let half = filter.group_delay_samples();
    let n = x.len();

    let mut padded = Vec::with_capacity(n + 2 * half);
    padded.extend((0..half).rev().map(|i| x[i]));
    padded.extend_from_slice(x);
    padded.extend((0..half).map(|i| x[n - 1 - i]));

    let out = padded
        .windows(taps.len())
        .map(|w| w.iter().zip(taps).map(|(a, b)| a * b).sum())
        .collect();
    Ok(out)
}

/// Anti-alias filters at 0.8 of the new Nyquist, then keeps every
/// `factor`-th sample starting with the first.
pub fn decimate(x: &[f64], factor: usize) -> Result<Vec<f64>> {
    if factor == 0 {
        return Err(AaiError::invalid("decimation factor must be at least 1"));
    }
    if factor == 1 {
        return Ok(x.to_vec());
    }
    // Normalized to fs = 1.
    let cutoff = 0.8 * 0.5 / factor as f64;
    let aa = design_lowpass_fir(cutoff, 1.0, DECIMATION_TAPS)?;
    let smoothed = filter_zero_delay(x, &aa)?;
    Ok(smoothed.into_iter().step_by(factor).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_cutoff_at_nyquist() {
        assert!(matches!(
            design_lowpass_fir(50.0, 100.0, 101),
            Err(AaiError::InvalidArgument(_))
        ));
        assert!(design_lowpass_fir(0.0, 100.0, 101).is_err());
    }

    #[test]
    fn rejects_even_or_short_filters() {
        assert!(design_lowpass_fir(25.0, 100.0, 100).is_err());
        assert!(design_lowpass_fir(25.0, 100.0, 9).is_err());
        assert!(FirFilter::from_taps(vec![0.5, 0.5]).is_err());
        assert!(FirFilter::from_taps(vec![0.2, 0.5, 0.3]).is_err());
    }

    #[test]
    fn design_is_normalized_and_symmetric() {
        for &(fc, fs, n) in &[(25.0, 100.0, 101), (40.0, 200.0, 101), (1000.0, 16000.0, 31)] {
            let f = design_lowpass_fir(fc, fs, n).unwrap();
            assert!((f.dc_gain() - 1.0).abs() < 1e-12);
            let t = f.taps();
            for i in 0..n {
                assert_eq!(t[i], t[n - 1 - i]);
            }
            assert_eq!(f.group_delay_samples(), (n - 1) / 2);
        }
    }

    #[test]
    fn constant_passes_unchanged() {
        let f = design_lowpass_fir(25.0, 100.0, 101).unwrap();
        let x = vec![3.25; 300];
        let y = filter_zero_delay(&x, &f).unwrap();
        assert_eq!(y.len(), x.len());
        for v in y {
            assert!((v - 3.25).abs() < 1e-12);
        }
    }

    #[test]
    fn impulse_reproduces_centered_taps() {
        let f = design_lowpass_fir(25.0, 100.0, 21).unwrap();
        let mut x = vec![0.0; 100];
        x[50] = 1.0;
        let y = filter_zero_delay(&x, &f).unwrap();
        for (k, tap) in f.taps().iter().enumerate() {
            assert_eq!(y[50 - 10 + k], *tap);
        }
        assert_eq!(y[20], 0.0);
    }

    #[test]
    fn short_signal_is_rejected() {
        let f = design_lowpass_fir(25.0, 100.0, 101).unwrap();
        assert!(filter_zero_delay(&[0.0; 101], &f).is_err());
    }

    #[test]
    fn decimate_lengths() {
        let x: Vec<f64> = (0..400).map(|i| (i as f64 * 0.01).sin()).collect();
        assert_eq!(decimate(&x, 2).unwrap().len(), 200);
        let x: Vec<f64> = (0..401).map(|i| (i as f64 * 0.01).sin()).collect();
        assert_eq!(decimate(&x, 2).unwrap().len(), 201);
        assert_eq!(decimate(&x, 3).unwrap().len(), 134);
        assert_eq!(decimate(&x, 1).unwrap(), x);
        assert!(decimate(&x, 0).is_err());
    }
}
