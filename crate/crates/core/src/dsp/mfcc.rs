use std::f64::consts::PI;

use ndarray::Array2;
use rustfft::{num_complex::Complex, FftPlanner};

use super::Waveform;
use crate::error::{AaiError, Result};
use crate::featio::FeatureSequence;

/// MFCC analysis settings. Defaults follow the usual 16 kHz speech
/// front-end: 25 ms Hamming frames every 10 ms, 23 mel bands on
/// 20..7600 Hz, 13 cepstra.
#[derive(Debug, Clone, PartialEq)]
pub struct MfccConfig {
    pub sample_rate_hz: f64,
    pub window_ms: f64,
    pub hop_ms: f64,
    pub n_mels: usize,
    pub n_coeffs: usize,
    pub preemphasis: f64,
    pub fft_size: usize,
    pub low_hz: f64,
    pub high_hz: f64,
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        MfccConfig {
            sample_rate_hz: 16000.0,
            window_ms: 25.0,
            hop_ms: 10.0,
            n_mels: 23,
            n_coeffs: 13,
            preemphasis: 0.97,
            fft_size: 512,
            low_hz: 20.0,
            high_hz: 7600.0,
            log_floor: 1e-10,
        }
    }
}

impl MfccConfig {
    pub fn window_samples(&self) -> usize {
        (self.window_ms * self.sample_rate_hz / 1000.0).round() as usize
    }

    pub fn hop_samples(&self) -> usize {
        (self.hop_ms * self.sample_rate_hz / 1000.0).round() as usize
    }

    pub fn frame_rate_hz(&self) -> f64 {
        1000.0 / self.hop_ms
    }

    /// Number of whole frames that fit in `n_samples`.
    pub fn frame_count(&self, n_samples: usize) -> usize {
        let win = self.window_samples();
        if n_samples < win {
            0
        } else {
            (n_samples - win) / self.hop_samples() + 1
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hop_ms <= 0.0 || self.window_ms <= 0.0 || self.hop_ms > self.window_ms {
            return Err(AaiError::invalid(format!(
                "need 0 < hop ({} ms) <= window ({} ms)",
                self.hop_ms, self.window_ms
            )));
        }
        if self.n_mels == 0 || self.n_coeffs == 0 || self.n_coeffs > self.n_mels {
            return Err(AaiError::invalid(format!(
                "need 0 < n_coeffs ({}) <= n_mels ({})",
                self.n_coeffs, self.n_mels
            )));
        }
        if !(0.0..1.0).contains(&self.preemphasis) {
            return Err(AaiError::invalid(format!(
                "pre-emphasis {} outside [0, 1)",
                self.preemphasis
            )));
        }
        if !self.fft_size.is_power_of_two() || self.fft_size < self.window_samples() {
            return Err(AaiError::invalid(format!(
                "fft size {} must be a power of two >= window length {}",
                self.fft_size,
                self.window_samples()
            )));
        }
        if !(0.0 <= self.low_hz && self.low_hz < self.high_hz && self.high_hz <= self.sample_rate_hz / 2.0)
        {
            return Err(AaiError::invalid(format!(
                "mel range {}..{} Hz invalid for {} Hz audio",
                self.low_hz, self.high_hz, self.sample_rate_hz
            )));
        }
        if !(self.log_floor > 0.0) {
            return Err(AaiError::invalid("log floor must be positive"));
        }
        Ok(())
    }
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters spaced uniformly on the mel scale.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    /// n_mels × (fft_size/2 + 1)
    weights: Array2<f64>,
    centers_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, fft_size: usize, sample_rate_hz: f64, low_hz: f64, high_hz: f64) -> Self {
        let n_bins = fft_size / 2 + 1;
        let lo = hz_to_mel(low_hz);
        let hi = hz_to_mel(high_hz);
        let step = (hi - lo) / (n_mels + 1) as f64;
        let edges: Vec<f64> = (0..n_mels + 2).map(|i| lo + step * i as f64).collect();

        let mut weights = Array2::zeros((n_mels, n_bins));
        for bin in 0..n_bins {
            let mel = hz_to_mel(bin as f64 * sample_rate_hz / fft_size as f64);
            for j in 0..n_mels {
                let (left, center, right) = (edges[j], edges[j + 1], edges[j + 2]);
                let w = if mel > left && mel <= center {
                    (mel - left) / (center - left)
                } else if mel > center && mel < right {
                    (right - mel) / (right - center)
                } else {
                    0.0
                };
                weights[[j, bin]] = w;
            }
        }
        let centers_hz = edges[1..=n_mels].iter().map(|&m| mel_to_hz(m)).collect();
        MelFilterbank { weights, centers_hz }
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    pub fn n_mels(&self) -> usize {
        self.weights.nrows()
    }

    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.weights
            .rows()
            .into_iter()
            .map(|row| row.iter().zip(power).map(|(w, p)| w * p).sum())
            .collect()
    }
}

/// Orthonormal type-II DCT matrix, `n × n`, row k = basis function k.
pub fn dct_matrix(n: usize) -> Array2<f64> {
    let mut m = Array2::zeros((n, n));
    let nf = n as f64;
    for k in 0..n {
        let scale = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        for i in 0..n {
            m[[k, i]] = scale * (PI * k as f64 * (i as f64 + 0.5) / nf).cos();
        }
    }
    m
}

/// Mel filterbank energies, one row per frame (before the log).
pub fn mel_energies(x: &Waveform, cfg: &MfccConfig) -> Result<Array2<f64>> {
    cfg.validate()?;
    if x.sample_rate_hz() != cfg.sample_rate_hz {
        return Err(AaiError::invalid(format!(
            "MFCC expects {} Hz audio, got {} Hz",
            cfg.sample_rate_hz,
            x.sample_rate_hz()
        )));
    }
    let n_frames = cfg.frame_count(x.len());
    if n_frames == 0 {
        return Err(AaiError::EmptySequence(format!(
            "{} samples is shorter than one {}-sample window",
            x.len(),
            cfg.window_samples()
        )));
    }

    let win = cfg.window_samples();
    let hop = cfg.hop_samples();
    let n_fft = cfg.fft_size;
    let hamming: Vec<f64> = (0..win)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (win - 1) as f64).cos())
        .collect();
    let bank = MelFilterbank::new(cfg.n_mels, n_fft, cfg.sample_rate_hz, cfg.low_hz, cfg.high_hz);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);

    let samples = x.samples();
    let mut out = Array2::zeros((n_frames, cfg.n_mels));
    let mut frame = vec![0.0; win];
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    let mut power = vec![0.0; n_fft / 2 + 1];
    for f in 0..n_frames {
        frame.copy_from_slice(&samples[f * hop..f * hop + win]);
        for i in (1..win).rev() {
            frame[i] -= cfg.preemphasis * frame[i - 1];
        }
        frame[0] -= cfg.preemphasis * frame[0];

        for (i, c) in buf.iter_mut().enumerate() {
            *c = if i < win {
                Complex::new(frame[i] * hamming[i], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            };
        }
        fft.process(&mut buf);
        for (p, c) in power.iter_mut().zip(&buf) {
            *p = c.norm_sqr();
        }
        for (j, e) in bank.apply(&power).into_iter().enumerate() {
            out[[f, j]] = e;
        }
    }
    Ok(out)
}

/// Static MFCCs at `1000 / hop_ms` frames per second.
pub fn mfcc(x: &Waveform, cfg: &MfccConfig) -> Result<FeatureSequence> {
    let energies = mel_energies(x, cfg)?;
    let logs = energies.mapv(|e| e.max(cfg.log_floor).ln());
    let dct = dct_matrix(cfg.n_mels);
    let basis = dct.slice(ndarray::s![..cfg.n_coeffs, ..]);
    let coeffs = logs.dot(&basis.t());
    FeatureSequence::new(coeffs, cfg.frame_rate_hz(), "mfcc")
}
