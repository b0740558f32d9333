use ndarray::{Array2, Axis};

use crate::error::{AaiError, Result};

/// Columns whose standard deviation is at or below this are zeroed by MVN.
pub const MVN_EPS: f64 = 1e-8;

/// Time-major `T × D` feature matrix at a declared frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    frames: Array2<f64>,
    frame_rate_hz: f64,
    source_tag: String,
}

impl FeatureSequence {
    pub fn new(frames: Array2<f64>, frame_rate_hz: f64, source_tag: impl Into<String>) -> Result<Self> {
        if frames.nrows() == 0 || frames.ncols() == 0 {
            return Err(AaiError::EmptySequence(format!(
                "feature matrix is {}x{}",
                frames.nrows(),
                frames.ncols()
            )));
        }
        if !(frame_rate_hz > 0.0) || !frame_rate_hz.is_finite() {
            return Err(AaiError::invalid(format!(
                "frame rate must be positive, got {frame_rate_hz}"
            )));
        }
        if let Some((idx, _)) = frames.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(AaiError::invalid(format!(
                "non-finite feature value at frame {}, dim {}",
                idx.0, idx.1
            )));
        }
        Ok(FeatureSequence {
            frames,
            frame_rate_hz,
            source_tag: source_tag.into(),
        })
    }

    pub fn frames(&self) -> &Array2<f64> {
        &self.frames
    }

    pub fn into_frames(self) -> Array2<f64> {
        self.frames
    }

    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn dim(&self) -> usize {
        self.frames.ncols()
    }

    pub fn frame_rate_hz(&self) -> f64 {
        self.frame_rate_hz
    }

    pub fn source_tag(&self) -> &str {
        &self.source_tag
    }

    pub fn with_frames(&self, frames: Array2<f64>) -> Result<Self> {
        FeatureSequence::new(frames, self.frame_rate_hz, self.source_tag.clone())
    }
}

/// Fixed-length speaker vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerEmbedding {
    pub values: Vec<f64>,
    pub subject_id: String,
}

impl SpeakerEmbedding {
    pub fn new(values: Vec<f64>, subject_id: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(AaiError::EmptySequence("speaker embedding has no values".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(AaiError::invalid(format!("non-finite embedding value at {i}")));
        }
        Ok(SpeakerEmbedding {
            values,
            subject_id: subject_id.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Per-column mean and variance normalization over one utterance
/// (population standard deviation). Near-constant columns become zero.
pub fn mvn_utterance(seq: &FeatureSequence) -> FeatureSequence {
    let t = seq.n_frames() as f64;
    let mut frames = seq.frames.clone();
    for mut col in frames.axis_iter_mut(Axis(1)) {
        let mean = col.sum() / t;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t;
        let std = var.sqrt();
        if std > MVN_EPS {
            col.mapv_inplace(|v| (v - mean) / std);
        } else {
            col.fill(0.0);
        }
    }
    FeatureSequence {
        frames,
        frame_rate_hz: seq.frame_rate_hz,
        source_tag: seq.source_tag.clone(),
    }
}

/// Linearly interpolates `seq` onto exactly `target_len` frames spanning the
/// same utterance (first and last frames map onto each other).
pub fn align_frame_rate(seq: &FeatureSequence, target_hz: f64, target_len: usize) -> Result<FeatureSequence> {
    if target_len < 1 {
        return Err(AaiError::invalid("target length must be at least 1"));
    }
    if !(target_hz > 0.0) {
        return Err(AaiError::invalid(format!("target rate must be positive, got {target_hz}")));
    }
    let n = seq.n_frames();
    if n == target_len {
        return Ok(FeatureSequence {
            frames: seq.frames.clone(),
            frame_rate_hz: target_hz,
            source_tag: seq.source_tag.clone(),
        });
    }
    if n < 2 {
        return Err(AaiError::invalid(format!(
            "need at least 2 frames to interpolate, got {n}"
        )));
    }

    let d = seq.dim();
    let mut out = Array2::zeros((target_len, d));
    let span = (n - 1) as f64;
    for i in 0..target_len {
        let pos = if target_len == 1 {
            0.0
        } else {
            i as f64 * span / (target_len - 1) as f64
        };
        let lo = (pos.floor() as usize).min(n - 2);
        let frac = pos - lo as f64;
        for j in 0..d {
            let a = seq.frames[[lo, j]];
            let b = seq.frames[[lo + 1, j]];
            out[[i, j]] = a + frac * (b - a);
        }
    }
    Ok(FeatureSequence {
        frames: out,
        frame_rate_hz: target_hz,
        source_tag: seq.source_tag.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn seq(frames: Array2<f64>) -> FeatureSequence {
        FeatureSequence::new(frames, 100.0, "test").unwrap()
    }

    #[test]
    fn mvn_of_one_two_three() {
        let out = mvn_utterance(&seq(array![[1.0], [2.0], [3.0]]));
        let expected = 1.5f64.sqrt();
        assert!((out.frames()[[0, 0]] + expected).abs() < 1e-12);
        assert!(out.frames()[[1, 0]].abs() < 1e-12);
        assert!((out.frames()[[2, 0]] - expected).abs() < 1e-12);
        assert!((expected - 1.2247).abs() < 1e-4);
    }

    #[test]
    fn mvn_zeroes_constant_columns() {
        let out = mvn_utterance(&seq(array![[4.0, 1.0], [4.0, 2.0]]));
        assert_eq!(out.frames().column(0).to_vec(), vec![0.0, 0.0]);
    }

    #[test]
    fn mvn_single_frame_is_zero() {
        let out = mvn_utterance(&seq(array![[4.0, -1.0]]));
        assert_eq!(out.frames(), &array![[0.0, 0.0]]);
    }

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(FeatureSequence::new(array![[f64::NAN]], 100.0, "x").is_err());
        assert!(FeatureSequence::new(Array2::zeros((0, 3)), 100.0, "x").is_err());
        assert!(FeatureSequence::new(array![[1.0]], 0.0, "x").is_err());
    }

    #[test]
    fn align_equal_length_is_identity() {
        let s = seq(array![[1.0, 2.0], [3.0, 5.0], [0.5, 0.25]]);
        let out = align_frame_rate(&s, 100.0, 3).unwrap();
        assert_eq!(out.frames(), s.frames());
    }

    #[test]
    fn align_stretches_98_to_100() {
        let frames = Array2::from_shape_fn((98, 2), |(i, j)| (i * (j + 1)) as f64);
        let out = align_frame_rate(&seq(frames), 100.0, 100).unwrap();
        assert_eq!(out.n_frames(), 100);
        assert_eq!(out.frames()[[0, 1]], 0.0);
        assert!((out.frames()[[99, 1]] - 194.0).abs() < 1e-9);
    }

    #[test]
    fn align_errors() {
        let s = seq(array![[1.0]]);
        assert!(align_frame_rate(&s, 100.0, 0).is_err());
        assert!(align_frame_rate(&s, 100.0, 4).is_err());
    }
}
