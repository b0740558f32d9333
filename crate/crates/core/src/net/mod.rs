//! Speaker-conditioned BLSTM regressor.
//!
//! Per frame: `tanh` dense projection of the acoustic features, concatenated
//! with a `tanh` projection of the speaker embedding, fed through stacked
//! bidirectional LSTM layers and a linear output head. Gradients are derived
//! by hand (backpropagation through time) and checked against finite
//! differences in the test suite.

mod adam;
mod checkpoint;
mod fit;
mod model;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC};
pub use fit::{evaluate_loss, fit, fit_with_progress, make_batches, EpochRecord, TrainControl};
pub use model::{backward, forward, forward_utterance, masked_mse, Batch, Utterance};

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{AaiError, Result};

/// Layer sizes. [`NetConfig::standard`] gives the full-size network; the
/// dimensions are free so the same code runs at desk scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetConfig {
    pub input_dim: usize,
    pub embedding_dim: usize,
    pub acoustic_units: usize,
    pub speaker_units: usize,
    pub hidden: usize,
    pub layers: usize,
    pub output_dim: usize,
}

impl NetConfig {
    /// 200-unit acoustic projection, 32-unit speaker projection, three
    /// BLSTM layers of 256 units per direction, 24 outputs.
    pub fn standard(input_dim: usize, embedding_dim: usize) -> Self {
        NetConfig {
            input_dim,
            embedding_dim,
            acoustic_units: 200,
            speaker_units: 32,
            hidden: 256,
            layers: 3,
            output_dim: 24,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("input_dim", self.input_dim),
            ("embedding_dim", self.embedding_dim),
            ("acoustic_units", self.acoustic_units),
            ("speaker_units", self.speaker_units),
            ("hidden", self.hidden),
            ("layers", self.layers),
            ("output_dim", self.output_dim),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(AaiError::invalid(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Affine map `y = x·W + b`, `W` stored `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    fn zeros(input: usize, output: usize) -> Self {
        Dense {
            w: Array2::zeros((input, output)),
            b: Array1::zeros(output),
        }
    }

    fn init<R: Rng>(input: usize, output: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        Dense {
            w: Array2::from_shape_simple_fn((input, output), || dist.sample(rng)),
            b: Array1::zeros(output),
        }
    }
}

/// One direction of an LSTM layer. Gate blocks along the `4H` axis are
/// ordered input, forget, cell candidate, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmDirection {
    pub w_ih: Array2<f64>,
    pub w_hh: Array2<f64>,
    pub b: Array1<f64>,
}

impl LstmDirection {
    fn zeros(input: usize, hidden: usize) -> Self {
        LstmDirection {
            w_ih: Array2::zeros((input, 4 * hidden)),
            w_hh: Array2::zeros((hidden, 4 * hidden)),
            b: Array1::zeros(4 * hidden),
        }
    }

    fn init<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let in_bound = 1.0 / (input as f64).sqrt();
        let rec_bound = 1.0 / (hidden as f64).sqrt();
        let in_dist = Uniform::new_inclusive(-in_bound, in_bound).expect("finite bound");
        let rec_dist = Uniform::new_inclusive(-rec_bound, rec_bound).expect("finite bound");
        let mut b = Array1::zeros(4 * hidden);
        b.slice_mut(ndarray::s![hidden..2 * hidden]).fill(1.0);
        LstmDirection {
            w_ih: Array2::from_shape_simple_fn((input, 4 * hidden), || in_dist.sample(rng)),
            w_hh: Array2::from_shape_simple_fn((hidden, 4 * hidden), || rec_dist.sample(rng)),
            b,
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlstmLayer {
    pub forward: LstmDirection,
    pub backward: LstmDirection,
}

/// All trainable tensors. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: NetConfig,
    pub acoustic_dense: Dense,
    pub speaker_dense: Dense,
    pub layers: Vec<BlstmLayer>,
    pub head: Dense,
}

impl ModelParams {
    pub fn zeros(config: NetConfig) -> Result<Self> {
        config.validate()?;
        let mut layers = Vec::with_capacity(config.layers);
        let mut input = config.acoustic_units + config.speaker_units;
        for _ in 0..config.layers {
            layers.push(BlstmLayer {
                forward: LstmDirection::zeros(input, config.hidden),
                backward: LstmDirection::zeros(input, config.hidden),
            });
            input = 2 * config.hidden;
        }
        Ok(ModelParams {
            config,
            acoustic_dense: Dense::zeros(config.input_dim, config.acoustic_units),
            speaker_dense: Dense::zeros(config.embedding_dim, config.speaker_units),
            layers,
            head: Dense::zeros(2 * config.hidden, config.output_dim),
        })
    }

    /// Uniform(±1/√fan_in) weights, zero biases, LSTM forget-gate bias 1.
    pub fn init<R: Rng>(config: NetConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let acoustic_dense = Dense::init(config.input_dim, config.acoustic_units, rng);
        let speaker_dense = Dense::init(config.embedding_dim, config.speaker_units, rng);
        let mut layers = Vec::with_capacity(config.layers);
        let mut input = config.acoustic_units + config.speaker_units;
        for _ in 0..config.layers {
            let forward = LstmDirection::init(input, config.hidden, rng);
            let backward = LstmDirection::init(input, config.hidden, rng);
            layers.push(BlstmLayer { forward, backward });
            input = 2 * config.hidden;
        }
        let head = Dense::init(2 * config.hidden, config.output_dim, rng);
        Ok(ModelParams {
            config,
            acoustic_dense,
            speaker_dense,
            layers,
            head,
        })
    }

    pub fn zeros_like(&self) -> Self {
        ModelParams::zeros(self.config).expect("config already validated")
    }

    /// Every tensor with a stable name, in checkpoint order.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = Vec::new();
        out.push(("acoustic_dense.w".into(), contiguous(self.acoustic_dense.w.as_slice())));
        out.push(("acoustic_dense.b".into(), contiguous(self.acoustic_dense.b.as_slice())));
        out.push(("speaker_dense.w".into(), contiguous(self.speaker_dense.w.as_slice())));
        out.push(("speaker_dense.b".into(), contiguous(self.speaker_dense.b.as_slice())));
        for (l, layer) in self.layers.iter().enumerate() {
            for (dir, d) in [("fwd", &layer.forward), ("bwd", &layer.backward)] {
                out.push((format!("blstm{l}.{dir}.w_ih"), contiguous(d.w_ih.as_slice())));
                out.push((format!("blstm{l}.{dir}.w_hh"), contiguous(d.w_hh.as_slice())));
                out.push((format!("blstm{l}.{dir}.b"), contiguous(d.b.as_slice())));
            }
        }
        out.push(("head.w".into(), contiguous(self.head.w.as_slice())));
        out.push(("head.b".into(), contiguous(self.head.b.as_slice())));
        out
    }

    /// Mutable counterpart of [`ModelParams::tensors`], same order.
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        out.push(contiguous_mut(self.acoustic_dense.w.as_slice_mut()));
        out.push(contiguous_mut(self.acoustic_dense.b.as_slice_mut()));
        out.push(contiguous_mut(self.speaker_dense.w.as_slice_mut()));
        out.push(contiguous_mut(self.speaker_dense.b.as_slice_mut()));
        for layer in &mut self.layers {
            for d in [&mut layer.forward, &mut layer.backward] {
                out.push(contiguous_mut(d.w_ih.as_slice_mut()));
                out.push(contiguous_mut(d.w_hh.as_slice_mut()));
                out.push(contiguous_mut(d.b.as_slice_mut()));
            }
        }
        out.push(contiguous_mut(self.head.w.as_slice_mut()));
        out.push(contiguous_mut(self.head.b.as_slice_mut()));
        out
    }

    pub fn n_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }
}

fn contiguous(s: Option<&[f64]>) -> &[f64] {
    s.expect("parameter tensors are always in standard layout")
}

fn contiguous_mut(s: Option<&mut [f64]>) -> &mut [f64] {
    s.expect("parameter tensors are always in standard layout")
}
