//! Acceptance suite. Runs every primary criterion at its stated tolerance and
//! prints one PASS/FAIL line per criterion. Exits non-zero if any fails.
//!
//! Pass criterion names (substrings) as arguments to run a subset.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use aai_core::dsp::{dct_matrix, design_lowpass_fir, mfcc, MfccConfig, Waveform};
use aai_core::eval::{aggregate, pearson_cc, relative_improvement, EvalReport, Grouping};
use aai_core::featio::load_manifest;
use aai_core::net::{backward, forward, masked_mse, Batch, ModelParams, NetConfig, TrainControl, Utterance};
use aai_core::synth::{generate_corpus, oracle_cc_bound, SynthSpec, MANIFEST_NAME};
use aai_core::train::{
    run_adapt, run_fine_tuned, run_pooled, run_unseen_loso, Corpus, ModelShape, RunContext, RunRecord, Scheme,
    SchemeSpec, TrainPlan,
};
use ndarray::{s, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_utterance(id: &str, t: usize, cfg: &NetConfig, rng: &mut ChaCha8Rng) -> Utterance {
    let mut n = || -> f64 { StandardNormal.sample(rng) };
    Utterance {
        id: id.into(),
        inputs: Array2::from_shape_simple_fn((t, cfg.input_dim), &mut n),
        embedding: Array1::from_shape_simple_fn(cfg.embedding_dim, &mut n),
        targets: Array2::from_shape_simple_fn((t, cfg.output_dim), &mut n),
    }
}

fn gradient_oracle() -> Outcome {
    let start = Instant::now();
    let cfg = NetConfig {
        input_dim: 3,
        embedding_dim: 2,
        acoustic_units: 3,
        speaker_units: 2,
        hidden: 4,
        layers: 3,
        output_dim: 24,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let params = ModelParams::init(cfg, &mut rng).map_err(|e| e.to_string())?;
    let a = random_utterance("a", 5, &cfg, &mut rng);
    let b = random_utterance("b", 5, &cfg, &mut rng);
    let batch = Batch::from_utterances(&[&a, &b]).map_err(|e| e.to_string())?;
    let (_, grads) = backward(&params, &batch).map_err(|e| e.to_string())?;
    let loss = |p: &ModelParams| masked_mse(&forward(p, &batch).unwrap(), &batch.targets, &batch.lengths).unwrap();

    let delta = 1e-4;
    let mut probe = params.clone();
    let (mut worst, mut n) = (0.0f64, 0usize);
    for (k, (_, g)) in grads.tensors().into_iter().enumerate() {
        let g = g.to_vec();
        for (i, &analytic) in g.iter().enumerate() {
            let orig = probe.tensors_mut()[k][i];
            probe.tensors_mut()[k][i] = orig + delta;
            let up = loss(&probe);
            probe.tensors_mut()[k][i] = orig - delta;
            let down = loss(&probe);
            probe.tensors_mut()[k][i] = orig;
            let numeric = (up - down) / (2.0 * delta);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
            n += 1;
        }
    }
    let elapsed = start.elapsed();
    check(
        worst < 1e-4 && elapsed < Duration::from_secs(60),
        format!("{n} parameters, worst relative error {worst:.2e}, {:.2} s", elapsed.as_secs_f64()),
    )
}

fn dtft_magnitude(taps: &[f64], f_hz: f64, fs_hz: f64) -> f64 {
    let w = 2.0 * PI * f_hz / fs_hz;
    let (re, im) = taps.iter().enumerate().fold((0.0, 0.0), |(re, im), (n, h)| {
        (re + h * (w * n as f64).cos(), im - h * (w * n as f64).sin())
    });
    re.hypot(im)
}

fn dsp_oracles() -> Outcome {
    let f = design_lowpass_fir(25.0, 100.0, 101).map_err(|e| e.to_string())?;
    let stop_db = 20.0 * dtft_magnitude(f.taps(), 40.0, 100.0).log10();
    let pass_dev = (dtft_magnitude(f.taps(), 5.0, 100.0) - 1.0).abs();

    let cfg = MfccConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut frame_mismatch = 0;
    for _ in 0..100 {
        let n = rng.random_range(400..20000usize);
        let x = Waveform::new(vec![0.01; n], 16000.0).map_err(|e| e.to_string())?;
        let frames = mfcc(&x, &cfg).map_err(|e| e.to_string())?.n_frames();
        if frames != (n - 400) / 160 + 1 {
            frame_mismatch += 1;
        }
    }

    let mut dct_err = 0.0f64;
    for n in [1, 2, 5, 13, 23, 40, 64] {
        let m = dct_matrix(n);
        let p = m.dot(&m.t());
        for ((i, j), v) in p.indexed_iter() {
            dct_err = dct_err.max((v - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    check(
        stop_db <= -40.0 && pass_dev < 0.02 && frame_mismatch == 0 && dct_err <= 1e-10,
        format!(
            "40 Hz {stop_db:.1} dB, 5 Hz deviation {:.3}%, frame-count mismatches {frame_mismatch}/100, DCT error {dct_err:.1e}",
            100.0 * pass_dev
        ),
    )
}

fn metric_identities() -> Outcome {
    let cc = |x: &[f64], y: &[f64]| pearson_cc(x, y).ok().flatten();
    let exact = cc(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) == Some(1.0)
        && cc(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) == Some(-1.0)
        && cc(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).is_some_and(|v| (v - 0.8).abs() <= 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(2..100usize);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let (a, b) = (rng.random_range(0.01..100.0), rng.random_range(-100.0..100.0));
        let z: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        match (cc(&x, &y), cc(&z, &y)) {
            (Some(p), Some(q)) => worst = worst.max((p - q).abs()),
            (None, None) => {}
            _ => worst = f64::INFINITY,
        }
    }
    check(
        exact && worst <= 1e-12,
        format!("examples exact: {exact}, affine invariance worst deviation {worst:.1e} over 1000 pairs"),
    )
}

fn masking_invariance() -> Outcome {
    let cfg = NetConfig {
        input_dim: 4,
        embedding_dim: 3,
        acoustic_units: 5,
        speaker_units: 3,
        hidden: 6,
        layers: 3,
        output_dim: 24,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let p = ModelParams::init(cfg, &mut rng).map_err(|e| e.to_string())?;
    let a = random_utterance("a", 11, &cfg, &mut rng);
    let b = random_utterance("b", 6, &cfg, &mut rng);
    let short = Batch::padded(&[&a, &b], 11).map_err(|e| e.to_string())?;
    let mut long = Batch::padded(&[&a, &b], 22).map_err(|e| e.to_string())?;
    // Garbage in the padding must not leak into real frames either.
    long.inputs.slice_mut(s![.., 11.., ..]).fill(5.0);
    long.inputs.slice_mut(s![1, 6.., ..]).fill(-3.0);
    long.targets.slice_mut(s![.., 11.., ..]).fill(9.0);

    let ps = forward(&p, &short).map_err(|e| e.to_string())?;
    let pl = forward(&p, &long).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for (i, len) in [11usize, 6].iter().enumerate() {
        for (x, y) in ps.slice(s![i, ..*len, ..]).iter().zip(pl.slice(s![i, ..*len, ..]).iter()) {
            worst = worst.max((x - y).abs());
        }
    }
    let (ls, gs) = backward(&p, &short).map_err(|e| e.to_string())?;
    let (ll, gl) = backward(&p, &long).map_err(|e| e.to_string())?;
    let loss_diff = (ls - ll).abs();
    let mut grad_diff = 0.0f64;
    for ((_, x), (_, y)) in gs.tensors().into_iter().zip(gl.tensors()) {
        for (u, v) in x.iter().zip(y.iter()) {
            grad_diff = grad_diff.max((u - v).abs());
        }
    }
    check(
        worst <= 1e-12 && loss_diff <= 1e-12 && grad_diff <= 1e-12,
        format!("prediction {worst:.1e}, loss {loss_diff:.1e}, gradient {grad_diff:.1e}"),
    )
}

fn load_corpus(spec: &SynthSpec, dir: &Path) -> Result<Corpus, String> {
    generate_corpus(spec, dir).map_err(|e| e.to_string())?;
    let m = load_manifest(dir.join(MANIFEST_NAME)).map_err(|e| e.to_string())?;
    Corpus::load(m, "synth").map_err(|e| e.to_string())
}

fn reports(ctx: &RunContext, records: &[RunRecord]) -> Result<Vec<EvalReport>, String> {
    records
        .iter()
        .map(|r| EvalReport::load(&ctx.runs_dir.join(&r.report)).map_err(|e| e.to_string()))
        .collect()
}

fn overall_cc(reports: &[EvalReport]) -> Result<f64, String> {
    Ok(aggregate(reports, Grouping::Overall).map_err(|e| e.to_string())?[0].mean)
}

fn subject_cc(reports: &[EvalReport], subject: &str) -> Result<f64, String> {
    let rows = aggregate(reports, Grouping::BySubject).map_err(|e| e.to_string())?;
    rows.iter()
        .find(|r| r.key == subject)
        .map(|r| r.mean)
        .ok_or_else(|| format!("no scores for {subject}"))
}

fn plan(scheme: Scheme, seed: u64, model: ModelShape, lr: f64, epochs: usize) -> TrainPlan {
    TrainPlan {
        spec: SchemeSpec::new(scheme, "synth", seed),
        control: TrainControl {
            max_epochs: epochs,
            lr,
            seed,
            ..TrainControl::default()
        },
        model,
    }
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = SynthSpec::new(4, 60, 11);
    let corpus = load_corpus(&spec, &dir.path().join("corpus"))?;
    let bound = oracle_cc_bound(&spec).map_err(|e| e.to_string())?;
    let ctx = RunContext::new(dir.path().join("runs"));
    let model = ModelShape {
        acoustic_units: 32,
        speaker_units: 8,
        hidden: 16,
        layers: 3,
    };
    let records = run_pooled(&corpus, &plan(Scheme::Pooled, 11, model, 1e-3, 50), &ctx).map_err(|e| e.to_string())?;
    let cc = overall_cc(&reports(&ctx, &records)?)?;
    let elapsed = start.elapsed();
    check(
        cc >= 0.8 && cc >= 0.9 * bound && elapsed < Duration::from_secs(15 * 60),
        format!(
            "pooled test CC {cc:.4} over {} folds, oracle bound {bound:.4} (ratio {:.3}), {:.0} s",
            records.len(),
            cc / bound,
            elapsed.as_secs_f64()
        ),
    )
}

fn offset_spec(seed: u64) -> SynthSpec {
    let mut spec = SynthSpec::new(4, 20, seed);
    spec.duration_range_s = (1.5, 2.5);
    spec.subject_offset_std = 1.0;
    spec
}

fn small_model() -> ModelShape {
    ModelShape {
        acoustic_units: 16,
        speaker_units: 8,
        hidden: 8,
        layers: 2,
    }
}

fn directionality() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in 1..=3u64 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let corpus = load_corpus(&offset_spec(seed), &dir.path().join("corpus"))?;
        let ctx = RunContext::new(dir.path().join("runs"));
        let mut pooled = plan(Scheme::Pooled, seed, small_model(), 3e-3, 30);
        pooled.spec.folds = Some(vec![0]);
        let mut fine = plan(Scheme::FineTuned, seed, small_model(), 3e-3, 30);
        fine.spec.folds = Some(vec![0]);
        let p = reports(&ctx, &run_pooled(&corpus, &pooled, &ctx).map_err(|e| e.to_string())?)?;
        let f = reports(&ctx, &run_fine_tuned(&corpus, &fine, &ctx).map_err(|e| e.to_string())?)?;
        let mut wins = 0;
        for subject in corpus.manifest.subjects() {
            if subject_cc(&f, &subject)? >= subject_cc(&p, &subject)? {
                wins += 1;
            }
        }
        ok &= wins >= 3;
        lines.push(format!("seed {seed}: {wins}/4"));
    }
    check(ok, format!("fine-tuned >= pooled per subject: {}", lines.join(", ")))
}

fn adaptation_curve() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = load_corpus(&offset_spec(5), &dir.path().join("corpus"))?;
    let ctx = RunContext::new(dir.path().join("runs"));
    let mut loso = plan(Scheme::UnseenLoso, 5, small_model(), 3e-3, 30);
    loso.spec.subjects = vec!["S04".into()];
    loso.spec.folds = Some(vec![0]);
    let base = reports(&ctx, &run_unseen_loso(&corpus, &loso, &ctx).map_err(|e| e.to_string())?)?;

    let mut adapt = loso.clone();
    adapt.spec.scheme = Scheme::Adapt;
    adapt.spec.t_percent = Some(0.0);
    let t0 = reports(&ctx, &run_adapt(&corpus, &adapt, &ctx).map_err(|e| e.to_string())?)?;
    adapt.spec.t_percent = Some(50.0);
    let t50 = reports(&ctx, &run_adapt(&corpus, &adapt, &ctx).map_err(|e| e.to_string())?)?;

    let ids: Vec<String> = t0[0].utterances.iter().map(|u| u.utterance_id.clone()).collect();
    let bitwise = t0[0].utterances == base[0].restricted_to(&ids).utterances;
    let (c0, c50) = (overall_cc(&t0)?, overall_cc(&t50)?);
    check(
        bitwise && c50 >= c0,
        format!("S04: t=0 CC {c0:.4}, t=50 CC {c50:.4}, t=0 bitwise equal to unseen evaluation: {bitwise}"),
    )
}

fn report_arithmetic() -> Outcome {
    let a = relative_improvement(0.7767, 0.7629).map_err(|e| e.to_string())?;
    let b = relative_improvement(0.6073, 0.5808).map_err(|e| e.to_string())?;
    check(
        (a - 1.81).abs() <= 0.05 && (b - 4.56).abs() <= 0.05,
        format!("{a:.3}% (expected 1.81), {b:.3}% (expected 4.56)"),
    )
}

fn run_pipeline(dir: &Path) -> Result<(Vec<u8>, Vec<(String, Vec<u8>)>), String> {
    std::fs::write(
        dir.join("spec.conf"),
        "[synth]\nn_subjects = 2\nn_utterances_per_subject = 10\nduration_range_s = 1.2, 1.6\n\
         acoustic_dim = 12\nembedding_dim = 3\nn_folds = 2\nseed = 17\n",
    )
    .map_err(|e| e.to_string())?;
    std::fs::write(
        dir.join("train.conf"),
        "[corpus]\nmanifest = corpus/manifest.tsv\nruns = runs\n[features]\ntag = synth\n\
         [scheme]\nname = pooled\nseed = 17\n[control]\nmax_epochs = 3\nlr = 0.01\n\
         [model]\nacoustic_units = 4\nspeaker_units = 2\nhidden = 3\nlayers = 1\n",
    )
    .map_err(|e| e.to_string())?;
    let aai = |args: &[&str]| -> Result<(), String> {
        let o = Command::new(env!("CARGO_BIN_EXE_aai"))
            .current_dir(dir)
            .args(args)
            .env_remove("AAI_LOG")
            .output()
            .map_err(|e| e.to_string())?;
        if o.status.success() {
            Ok(())
        } else {
            Err(format!("aai {} failed: {}", args.join(" "), String::from_utf8_lossy(&o.stderr)))
        }
    };
    aai(&["synth", "--spec", "spec.conf", "--out", "corpus"])?;
    aai(&["train", "--config", "train.conf"])?;
    aai(&["report", "--runs", "runs", "--kind", "tables", "--out", "tables.tsv"])?;
    let tables = std::fs::read(dir.join("tables.tsv")).map_err(|e| e.to_string())?;
    let mut files = Vec::new();
    let mut stack = vec![dir.join("runs")];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).map_err(|e| e.to_string())? {
            let p = e.map_err(|e| e.to_string())?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                files.push((rel, std::fs::read(&p).map_err(|e| e.to_string())?));
            }
        }
    }
    files.sort();
    Ok((tables, files))
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (ta, fa) = run_pipeline(a.path())?;
    let (tb, fb) = run_pipeline(b.path())?;
    let n_reports = fa.iter().filter(|(p, _)| p.ends_with("report.json")).count();
    check(
        ta == tb && fa == fb && n_reports > 0,
        format!("tables identical: {}, {} run files identical: {}", ta == tb, fa.len(), fa == fb),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("gradient oracle", gradient_oracle),
        ("dsp oracles", dsp_oracles),
        ("metric identities", metric_identities),
        ("masking invariance", masking_invariance),
        ("end-to-end synthetic learning", end_to_end),
        ("scheme directionality", directionality),
        ("adaptation curve shape", adaptation_curve),
        ("report arithmetic", report_arithmetic),
        ("determinism", determinism),
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        match run() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
