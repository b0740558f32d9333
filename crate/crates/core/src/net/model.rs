use ndarray::linalg::{general_mat_mul, general_mat_vec_mul};
use ndarray::{s, Array1, Array2, Array3, ArrayView1, ArrayView2, Axis, Zip};

use super::{Dense, LstmDirection, ModelParams};
use crate::error::{AaiError, Result};

/// One utterance ready for the network: `T × input_dim` inputs, speaker
/// embedding, `T × output_dim` targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub inputs: Array2<f64>,
    pub embedding: Array1<f64>,
    pub targets: Array2<f64>,
}

impl Utterance {
    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }
}

/// Zero-padded batch. Frames at or beyond `lengths[b]` are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Array3<f64>,
    pub embeddings: Array2<f64>,
    pub targets: Array3<f64>,
    pub lengths: Vec<usize>,
}

impl Batch {
    /// Pads to the longest utterance in the group.
    pub fn from_utterances(utts: &[&Utterance]) -> Result<Self> {
        let t_max = utts.iter().map(|u| u.len()).max().unwrap_or(0);
        Batch::padded(utts, t_max)
    }

    /// Pads to exactly `t_max` frames.
    pub fn padded(utts: &[&Utterance], t_max: usize) -> Result<Self> {
        let first = utts
            .first()
            .ok_or_else(|| AaiError::invalid("cannot build an empty batch"))?;
        let (d_in, e_dim, d_out) = (first.inputs.ncols(), first.embedding.len(), first.targets.ncols());
        let b = utts.len();
        let mut inputs = Array3::zeros((b, t_max, d_in));
        let mut embeddings = Array2::zeros((b, e_dim));
        let mut targets = Array3::zeros((b, t_max, d_out));
        let mut lengths = Vec::with_capacity(b);
        for (i, u) in utts.iter().enumerate() {
            if u.inputs.ncols() != d_in || u.embedding.len() != e_dim || u.targets.ncols() != d_out {
                return Err(AaiError::invalid(format!(
                    "utterance '{}' dimensions differ from the rest of the batch",
                    u.id
                )));
            }
            if u.targets.nrows() != u.len() {
                return Err(AaiError::invalid(format!(
                    "utterance '{}' has {} input frames but {} target frames",
                    u.id,
                    u.len(),
                    u.targets.nrows()
                )));
            }
            if u.len() > t_max {
                return Err(AaiError::invalid(format!(
                    "utterance '{}' has {} frames, more than the padded length {t_max}",
                    u.id,
                    u.len()
                )));
            }
            let t = u.len();
            inputs.slice_mut(s![i, ..t, ..]).assign(&u.inputs);
            targets.slice_mut(s![i, ..t, ..]).assign(&u.targets);
            embeddings.row_mut(i).assign(&u.embedding);
            lengths.push(t);
        }
        Ok(Batch {
            inputs,
            embeddings,
            targets,
            lengths,
        })
    }

    pub fn size(&self) -> usize {
        self.lengths.len()
    }

    pub fn t_max(&self) -> usize {
        self.inputs.len_of(Axis(1))
    }

    pub fn real_frames(&self) -> usize {
        self.lengths.iter().sum()
    }

    fn check(&self, p: &ModelParams) -> Result<()> {
        let cfg = &p.config;
        let (b, t, d) = self.inputs.dim();
        let mismatch = |what: &str, got: String, want: String| {
            Err(AaiError::invalid(format!("{what}: got {got}, expected {want}")))
        };
        if d != cfg.input_dim {
            return mismatch("input dimension", d.to_string(), cfg.input_dim.to_string());
        }
        if self.embeddings.dim() != (b, cfg.embedding_dim) {
            return mismatch(
                "embedding shape",
                format!("{:?}", self.embeddings.dim()),
                format!("({b}, {})", cfg.embedding_dim),
            );
        }
        if self.targets.dim() != (b, t, cfg.output_dim) {
            return mismatch(
                "target shape",
                format!("{:?}", self.targets.dim()),
                format!("({b}, {t}, {})", cfg.output_dim),
            );
        }
        if self.lengths.len() != b {
            return mismatch("length count", self.lengths.len().to_string(), b.to_string());
        }
        if let Some(l) = self.lengths.iter().find(|&&l| l > t) {
            return mismatch("sequence length", l.to_string(), format!("<= {t}"));
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Activations of one LSTM direction, indexed by time (not processing order).
struct DirectionCache {
    input: Array2<f64>,
    /// Activated gates i, f, g, o.
    gates: Array2<f64>,
    cell: Array2<f64>,
    tanh_cell: Array2<f64>,
    hidden: Array2<f64>,
    reverse: bool,
}

struct LayerCache {
    forward: DirectionCache,
    backward: DirectionCache,
    output: Array2<f64>,
}

struct ForwardCache {
    inputs: Array2<f64>,
    embedding: Array1<f64>,
    acoustic: Array2<f64>,
    speaker: Array1<f64>,
    layers: Vec<LayerCache>,
    prediction: Array2<f64>,
}

fn affine(x: &ArrayView2<f64>, d: &Dense) -> Array2<f64> {
    let mut y = x.dot(&d.w);
    y += &d.b;
    y
}

fn run_direction(dir: &LstmDirection, input: Array2<f64>, reverse: bool) -> DirectionCache {
    let t_len = input.nrows();
    let h = dir.hidden();
    let mut pre = input.dot(&dir.w_ih);
    pre += &dir.b;

    let mut gates = Array2::zeros((t_len, 4 * h));
    let mut cell = Array2::zeros((t_len, h));
    let mut tanh_cell = Array2::zeros((t_len, h));
    let mut hidden = Array2::zeros((t_len, h));
    let mut h_prev = Array1::<f64>::zeros(h);
    let mut c_prev = Array1::<f64>::zeros(h);
    let mut z = Array1::<f64>::zeros(4 * h);

    for step in 0..t_len {
        let t = if reverse { t_len - 1 - step } else { step };
        z.assign(&pre.row(t));
        general_mat_vec_mul(1.0, &dir.w_hh.t(), &h_prev, 1.0, &mut z);
        let zs = z.as_slice().unwrap();
        let mut g_row = gates.row_mut(t);
        let g_row = g_row.as_slice_mut().unwrap();
        for k in 0..h {
            let i = sigmoid(zs[k]);
            let f = sigmoid(zs[h + k]);
            let g = zs[2 * h + k].tanh();
            let o = sigmoid(zs[3 * h + k]);
            g_row[k] = i;
            g_row[h + k] = f;
            g_row[2 * h + k] = g;
            g_row[3 * h + k] = o;
            let c = f * c_prev[k] + i * g;
            let tc = c.tanh();
            c_prev[k] = c;
            h_prev[k] = o * tc;
            cell[[t, k]] = c;
            tanh_cell[[t, k]] = tc;
            hidden[[t, k]] = o * tc;
        }
    }
    DirectionCache {
        input,
        gates,
        cell,
        tanh_cell,
        hidden,
        reverse,
    }
}

fn run_forward(p: &ModelParams, x: ArrayView2<f64>, e: ArrayView1<f64>) -> ForwardCache {
    let cfg = &p.config;
    let t_len = x.nrows();
    let acoustic = affine(&x, &p.acoustic_dense).mapv(f64::tanh);
    let mut speaker = e.dot(&p.speaker_dense.w);
    speaker += &p.speaker_dense.b;
    speaker.mapv_inplace(f64::tanh);

    let mut layer_input = Array2::zeros((t_len, cfg.acoustic_units + cfg.speaker_units));
    layer_input.slice_mut(s![.., ..cfg.acoustic_units]).assign(&acoustic);
    layer_input
        .slice_mut(s![.., cfg.acoustic_units..])
        .assign(&speaker.broadcast((t_len, cfg.speaker_units)).unwrap());

    let h = cfg.hidden;
    let mut layers = Vec::with_capacity(p.layers.len());
    for layer in &p.layers {
        let fwd = run_direction(&layer.forward, layer_input.clone(), false);
        let bwd = run_direction(&layer.backward, layer_input, true);
        let mut output = Array2::zeros((t_len, 2 * h));
        output.slice_mut(s![.., ..h]).assign(&fwd.hidden);
        output.slice_mut(s![.., h..]).assign(&bwd.hidden);
        layer_input = output.clone();
        layers.push(LayerCache {
            forward: fwd,
            backward: bwd,
            output,
        });
    }
    let prediction = affine(&layer_input.view(), &p.head);
    ForwardCache {
        inputs: x.to_owned(),
        embedding: e.to_owned(),
        acoustic,
        speaker,
        layers,
        prediction,
    }
}

/// Predictions for one unpadded utterance, `T × output_dim`.
pub fn forward_utterance(p: &ModelParams, inputs: ArrayView2<f64>, embedding: ArrayView1<f64>) -> Result<Array2<f64>> {
    if inputs.ncols() != p.config.input_dim {
        return Err(AaiError::invalid(format!(
            "input dimension: got {}, expected {}",
            inputs.ncols(),
            p.config.input_dim
        )));
    }
    if embedding.len() != p.config.embedding_dim {
        return Err(AaiError::invalid(format!(
            "embedding dimension: got {}, expected {}",
            embedding.len(),
            p.config.embedding_dim
        )));
    }
    if inputs.nrows() == 0 {
        return Ok(Array2::zeros((0, p.config.output_dim)));
    }
    Ok(run_forward(p, inputs, embedding).prediction)
}

/// `B × T_max × output_dim` predictions, zero past each sequence's length.
///
/// Each sequence is run over its real frames only, so padding never
/// influences the result.
pub fn forward(p: &ModelParams, batch: &Batch) -> Result<Array3<f64>> {
    batch.check(p)?;
    let (b, t_max, _) = batch.inputs.dim();
    let mut out = Array3::zeros((b, t_max, p.config.output_dim));
    for i in 0..b {
        let len = batch.lengths[i];
        if len == 0 {
            continue;
        }
        let x = batch.inputs.slice(s![i, ..len, ..]);
        let y = run_forward(p, x, batch.embeddings.row(i)).prediction;
        out.slice_mut(s![i, ..len, ..]).assign(&y);
    }
    Ok(out)
}

/// Mean squared error over real frames and all output dimensions.
pub fn masked_mse(pred: &Array3<f64>, targets: &Array3<f64>, lengths: &[usize]) -> Result<f64> {
    if pred.dim() != targets.dim() || lengths.len() != pred.len_of(Axis(0)) {
        return Err(AaiError::invalid(format!(
            "prediction shape {:?} vs target shape {:?} with {} lengths",
            pred.dim(),
            targets.dim(),
            lengths.len()
        )));
    }
    let d = pred.len_of(Axis(2));
    let frames: usize = lengths.iter().sum();
    if frames == 0 || d == 0 {
        return Err(AaiError::invalid("all sequence lengths are zero"));
    }
    let mut sum = 0.0;
    for (b, &len) in lengths.iter().enumerate() {
        if len > pred.len_of(Axis(1)) {
            return Err(AaiError::invalid(format!("length {len} exceeds padded length")));
        }
        Zip::from(pred.slice(s![b, ..len, ..]))
            .and(targets.slice(s![b, ..len, ..]))
            .for_each(|p, t| sum += (p - t) * (p - t));
    }
    Ok(sum / (frames * d) as f64)
}

fn backward_direction(
    dir: &LstmDirection,
    cache: &DirectionCache,
    d_hidden: ArrayView2<f64>,
    grad: &mut LstmDirection,
) -> Array2<f64> {
    let t_len = cache.hidden.nrows();
    let h = dir.hidden();
    let mut dz_all = Array2::<f64>::zeros((t_len, 4 * h));
    let mut h_prev_all = Array2::<f64>::zeros((t_len, h));
    let mut dh_next = Array1::<f64>::zeros(h);
    let mut dc_next = Array1::<f64>::zeros(h);

    for step in (0..t_len).rev() {
        let (t, prev) = if cache.reverse {
            (t_len - 1 - step, if step == 0 { None } else { Some(t_len - step) })
        } else {
            (step, step.checked_sub(1))
        };
        if let Some(tp) = prev {
            h_prev_all.row_mut(t).assign(&cache.hidden.row(tp));
        }
        let gates = cache.gates.row(t);
        let mut dz = dz_all.row_mut(t);
        for k in 0..h {
            let (i, f, g, o) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
            let tc = cache.tanh_cell[[t, k]];
            let c_prev = prev.map_or(0.0, |tp| cache.cell[[tp, k]]);
            let dh = d_hidden[[t, k]] + dh_next[k];
            let dc = dh * o * (1.0 - tc * tc) + dc_next[k];
            dz[k] = dc * g * i * (1.0 - i);
            dz[h + k] = dc * c_prev * f * (1.0 - f);
            dz[2 * h + k] = dc * i * (1.0 - g * g);
            dz[3 * h + k] = dh * tc * o * (1.0 - o);
            dc_next[k] = dc * f;
        }
        general_mat_vec_mul(1.0, &dir.w_hh, &dz_all.row(t), 0.0, &mut dh_next);
    }

    general_mat_mul(1.0, &cache.input.t(), &dz_all, 1.0, &mut grad.w_ih);
    general_mat_mul(1.0, &h_prev_all.t(), &dz_all, 1.0, &mut grad.w_hh);
    grad.b += &dz_all.sum_axis(Axis(0));
    dz_all.dot(&dir.w_ih.t())
}

fn backward_utterance(p: &ModelParams, cache: &ForwardCache, d_pred: Array2<f64>, grad: &mut ModelParams) {
    let cfg = &p.config;
    let h = cfg.hidden;
    let top = &cache.layers.last().expect("at least one layer").output;
    general_mat_mul(1.0, &top.t(), &d_pred, 1.0, &mut grad.head.w);
    grad.head.b += &d_pred.sum_axis(Axis(0));
    let mut d_out = d_pred.dot(&p.head.w.t());

    for (l, layer) in p.layers.iter().enumerate().rev() {
        let lc = &cache.layers[l];
        let g = &mut grad.layers[l];
        let d_fwd = backward_direction(&layer.forward, &lc.forward, d_out.slice(s![.., ..h]), &mut g.forward);
        let d_bwd = backward_direction(&layer.backward, &lc.backward, d_out.slice(s![.., h..]), &mut g.backward);
        d_out = d_fwd + d_bwd;
    }

    let a = cfg.acoustic_units;
    let mut d_acoustic = d_out.slice(s![.., ..a]).to_owned();
    Zip::from(&mut d_acoustic)
        .and(&cache.acoustic)
        .for_each(|d, y| *d *= 1.0 - y * y);
    general_mat_mul(1.0, &cache.inputs.t(), &d_acoustic, 1.0, &mut grad.acoustic_dense.w);
    grad.acoustic_dense.b += &d_acoustic.sum_axis(Axis(0));

    let mut d_speaker = d_out.slice(s![.., a..]).sum_axis(Axis(0));
    Zip::from(&mut d_speaker)
        .and(&cache.speaker)
        .for_each(|d, y| *d *= 1.0 - y * y);
    for (i, e) in cache.embedding.iter().enumerate() {
        grad.speaker_dense.w.row_mut(i).scaled_add(*e, &d_speaker);
    }
    grad.speaker_dense.b += &d_speaker;
}

/// Masked MSE of the batch and its exact gradient with respect to every
/// parameter.
pub fn backward(p: &ModelParams, batch: &Batch) -> Result<(f64, ModelParams)> {
    batch.check(p)?;
    let d = p.config.output_dim;
    let frames = batch.real_frames();
    if frames == 0 {
        return Err(AaiError::invalid("all sequence lengths are zero"));
    }
    let scale = 2.0 / (frames * d) as f64;
    let (b, t_max, _) = batch.inputs.dim();
    let mut grad = p.zeros_like();
    let mut pred = Array3::zeros((b, t_max, d));
    for i in 0..b {
        let len = batch.lengths[i];
        if len == 0 {
            continue;
        }
        let cache = run_forward(p, batch.inputs.slice(s![i, ..len, ..]), batch.embeddings.row(i));
        let target = batch.targets.slice(s![i, ..len, ..]);
        let d_pred = (&cache.prediction - &target) * scale;
        pred.slice_mut(s![i, ..len, ..]).assign(&cache.prediction);
        backward_utterance(p, &cache, d_pred, &mut grad);
    }
    let loss = masked_mse(&pred, &batch.targets, &batch.lengths)?;
    Ok((loss, grad))
}
