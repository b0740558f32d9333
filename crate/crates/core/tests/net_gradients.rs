//! Finite-difference checks of the analytic gradients and padding/batch
//! invariances of the forward pass.

use aai_core::net::{backward, forward, masked_mse, Batch, ModelParams, NetConfig, Utterance};
use ndarray::{s, Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn random_utterance(id: &str, t: usize, cfg: &NetConfig, rng: &mut ChaCha8Rng) -> Utterance {
    let mut n = || -> f64 { StandardNormal.sample(rng) };
    Utterance {
        id: id.into(),
        inputs: Array2::from_shape_simple_fn((t, cfg.input_dim), &mut n),
        embedding: Array1::from_shape_simple_fn(cfg.embedding_dim, &mut n),
        targets: Array2::from_shape_simple_fn((t, cfg.output_dim), &mut n),
    }
}

/// Central differences on every scalar parameter; returns the worst
/// relative error and where it happened.
fn worst_relative_error(params: &ModelParams, batch: &Batch, delta: f64) -> (f64, String) {
    let (_, analytic) = backward(params, batch).unwrap();
    let analytic: Vec<(String, Vec<f64>)> = analytic
        .tensors()
        .into_iter()
        .map(|(n, t)| (n, t.to_vec()))
        .collect();
    let loss = |p: &ModelParams| masked_mse(&forward(p, batch).unwrap(), &batch.targets, &batch.lengths).unwrap();

    let mut probe = params.clone();
    let mut worst = (0.0, String::new());
    for (k, (name, grads)) in analytic.iter().enumerate() {
        for (i, &a) in grads.iter().enumerate() {
            let orig = probe.tensors_mut()[k][i];
            probe.tensors_mut()[k][i] = orig + delta;
            let up = loss(&probe);
            probe.tensors_mut()[k][i] = orig - delta;
            let down = loss(&probe);
            probe.tensors_mut()[k][i] = orig;
            let numeric = (up - down) / (2.0 * delta);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            if rel > worst.0 {
                worst = (rel, format!("{name}[{i}] analytic={a:e} numeric={numeric:e}"));
            }
        }
    }
    worst
}

#[test]
fn gradients_match_finite_differences_single_layer() {
    let cfg = NetConfig {
        input_dim: 2,
        embedding_dim: 3,
        acoustic_units: 3,
        speaker_units: 2,
        hidden: 3,
        layers: 1,
        output_dim: 4,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let p = ModelParams::init(cfg, &mut rng).unwrap();
    let a = random_utterance("a", 4, &cfg, &mut rng);
    let b = random_utterance("b", 7, &cfg, &mut rng);
    let batch = Batch::from_utterances(&[&a, &b]).unwrap();
    let (err, at) = worst_relative_error(&p, &batch, 1e-4);
    assert!(err < 1e-4, "worst relative error {err:e} at {at}");
}

#[test]
fn gradients_match_with_masked_sequence() {
    let cfg = NetConfig {
        input_dim: 3,
        embedding_dim: 2,
        acoustic_units: 3,
        speaker_units: 2,
        hidden: 4,
        layers: 2,
        output_dim: 24,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let p = ModelParams::init(cfg, &mut rng).unwrap();
    let a = random_utterance("a", 5, &cfg, &mut rng);
    let b = random_utterance("b", 2, &cfg, &mut rng);
    let mut batch = Batch::from_utterances(&[&a, &b]).unwrap();
    batch.inputs.slice_mut(s![1, 2.., ..]).fill(3.0);
    let (err, at) = worst_relative_error(&p, &batch, 1e-4);
    assert!(err < 1e-4, "worst relative error {err:e} at {at}");
}

#[test]
fn batch_permutation_permutes_predictions() {
    let cfg = NetConfig {
        input_dim: 3,
        embedding_dim: 2,
        acoustic_units: 5,
        speaker_units: 3,
        hidden: 6,
        layers: 2,
        output_dim: 24,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = ModelParams::init(cfg, &mut rng).unwrap();
    let utts: Vec<Utterance> = (0..3)
        .map(|i| random_utterance(&format!("u{i}"), 4 + 3 * i, &cfg, &mut rng))
        .collect();
    let fwd = forward(&p, &Batch::from_utterances(&[&utts[0], &utts[1], &utts[2]]).unwrap()).unwrap();
    let rev = forward(&p, &Batch::from_utterances(&[&utts[2], &utts[0], &utts[1]]).unwrap()).unwrap();
    assert_eq!(fwd.slice(s![0, .., ..]), rev.slice(s![1, .., ..]));
    assert_eq!(fwd.slice(s![1, .., ..]), rev.slice(s![2, .., ..]));
    assert_eq!(fwd.slice(s![2, .., ..]), rev.slice(s![0, .., ..]));
}

#[test]
fn extra_padding_leaves_real_frames_unchanged() {
    let cfg = NetConfig {
        input_dim: 4,
        embedding_dim: 2,
        acoustic_units: 5,
        speaker_units: 3,
        hidden: 6,
        layers: 3,
        output_dim: 24,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let p = ModelParams::init(cfg, &mut rng).unwrap();
    let u = random_utterance("u", 9, &cfg, &mut rng);
    let alone = forward(&p, &Batch::from_utterances(&[&u]).unwrap()).unwrap();
    let padded = forward(&p, &Batch::padded(&[&u], 20).unwrap()).unwrap();
    assert_eq!(alone.slice(s![0, .., ..]), padded.slice(s![0, ..9, ..]));
    assert!(padded.slice(s![0, 9.., ..]).iter().all(|v| *v == 0.0));
}
