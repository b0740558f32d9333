use std::path::Path;

use super::Waveform;
use crate::error::{AaiError, Result};

/// Reads 16-bit PCM WAV audio. Only the first channel of multichannel files
/// is kept; samples are scaled by 1/32768.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let fmt_err = |msg: String| AaiError::Format {
        path: path.to_path_buf(),
        offset: 0,
        msg,
    };
    let mut reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => AaiError::io(path, io),
        other => fmt_err(other.to_string()),
    })?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(fmt_err(format!(
            "unsupported sample format {:?}/{} bits, expected 16-bit PCM",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    let channels = spec.channels as usize;
    let mut samples = Vec::with_capacity(reader.len() as usize / channels.max(1));
    for (i, s) in reader.samples::<i16>().enumerate() {
        let s = s.map_err(|e| fmt_err(format!("sample {i}: {e}")))?;
        if i % channels == 0 {
            samples.push(s as f64 / 32768.0);
        }
    }
    Waveform::new(samples, spec.sample_rate as f64)
}
