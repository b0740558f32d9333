use std::path::{Path, PathBuf};

use aai_core::dsp::{mfcc, read_wav, resample_to, MfccConfig};
use aai_core::eval::{emit_plot_data, render_tables, EvalReport, PlotKind, ReportMeta};
use aai_core::featio::{
    load_manifest, read_feature_file, save_manifest, write_feature_file, CorpusManifest, ManifestEntry, Split,
};
use aai_core::net::load_checkpoint;
use aai_core::synth::{generate_corpus, oracle_cc_bound, SynthSpec};
use aai_core::train::{
    load_reports, load_targets, run_experiment, score_entries, Corpus, ExperimentConfig, RunContext, RunRecord, Scheme,
};
use aai_core::{AaiError, Result};

use crate::{Cli, Command, EvalSplit, ReportKind};

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Preprocess { manifest, out } => preprocess(manifest, out),
        Command::Mfcc { manifest, out } => mfcc_features(manifest, out),
        Command::Synth { spec, out } => synth(cli, spec, out),
        Command::Train { config } => train(cli, config, None),
        Command::Adapt { config, t } => train(cli, config, Some(*t)),
        Command::Evaluate {
            checkpoint,
            manifest,
            out,
            split,
        } => evaluate(checkpoint, manifest, out.as_deref(), *split),
        Command::Report { runs, kind, out } => report(runs, *kind, out.as_deref()),
    }
}

fn load_existing_manifest(path: &Path) -> Result<CorpusManifest> {
    if !path.is_file() {
        return Err(AaiError::Config(format!("manifest {} not found", path.display())));
    }
    load_manifest(path)
}

/// Copy of `m` rooted at `out`: rewritten paths are relative to `out`, the
/// rest are made absolute.
fn rebased(m: &CorpusManifest, out: &Path, rewrite: impl Fn(&ManifestEntry, &mut ManifestEntry)) -> Result<CorpusManifest> {
    let base = std::path::absolute(&m.base_dir).map_err(|e| AaiError::Io {
        path: m.base_dir.clone(),
        source: e,
    })?;
    let abs = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    let entries = m
        .entries
        .iter()
        .map(|e| {
            let mut n = e.clone();
            n.acoustic_path = abs(&e.acoustic_path);
            n.articulatory_path = abs(&e.articulatory_path);
            n.embedding_path = abs(&e.embedding_path);
            rewrite(e, &mut n);
            n
        })
        .collect();
    CorpusManifest::new(entries, out)
}

fn preprocess(manifest: &Path, out: &Path) -> Result<()> {
    let m = load_existing_manifest(manifest)?;
    for e in &m.entries {
        let seq = read_feature_file(m.resolve(&e.articulatory_path))?;
        write_feature_file(out.join("ema").join(format!("{}.aaif", e.utterance_id)), &load_targets(&seq)?)?;
    }
    let rebased = rebased(&m, out, |e, n| {
        n.articulatory_path = PathBuf::from("ema").join(format!("{}.aaif", e.utterance_id));
    })?;
    save_manifest(out.join("manifest.tsv"), &rebased)?;
    println!("preprocessed {} trajectories into {}", m.entries.len(), out.display());
    Ok(())
}

fn mfcc_features(manifest: &Path, out: &Path) -> Result<()> {
    let m = load_existing_manifest(manifest)?;
    let cfg = MfccConfig::default();
    for e in &m.entries {
        let wav = read_wav(m.resolve(&e.acoustic_path))?;
        let wav = resample_to(&wav, cfg.sample_rate_hz)?;
        write_feature_file(out.join("mfcc").join(format!("{}.aaif", e.utterance_id)), &mfcc(&wav, &cfg)?)?;
    }
    let rebased = rebased(&m, out, |e, n| {
        n.acoustic_path = PathBuf::from("mfcc").join(format!("{}.aaif", e.utterance_id));
    })?;
    save_manifest(out.join("manifest.tsv"), &rebased)?;
    println!("extracted MFCCs for {} utterances into {}", m.entries.len(), out.display());
    Ok(())
}

fn synth(cli: &Cli, spec: &Path, out: &Path) -> Result<()> {
    let mut spec = SynthSpec::load(spec)?;
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    let m = generate_corpus(&spec, out)?;
    println!(
        "wrote {} utterances of {} subjects to {}; oracle CC bound {:.4}",
        m.entries.len(),
        spec.n_subjects,
        out.display(),
        oracle_cc_bound(&spec)?
    );
    Ok(())
}

fn context(cli: &Cli, runs_dir: &Path) -> RunContext {
    let mut ctx = RunContext::new(runs_dir);
    ctx.jobs = cli.jobs.max(1);
    ctx.verbose = cli.verbose;
    ctx.log = std::env::var_os("AAI_LOG").map(PathBuf::from);
    ctx
}

fn train(cli: &Cli, config: &Path, t_percent: Option<f64>) -> Result<()> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(seed) = cli.seed {
        cfg.plan.spec.seed = seed;
        cfg.plan.control.seed = seed;
    }
    if let Some(t) = t_percent {
        cfg.plan.spec.scheme = Scheme::Adapt;
        cfg.plan.spec.t_percent = Some(t);
    }
    let records = run_experiment(&cfg, &context(cli, &cfg.runs_dir))?;
    for r in &records {
        print_record(r);
    }
    Ok(())
}

fn print_record(r: &RunRecord) {
    let t = r.t_percent.map_or(String::new(), |t| format!(" t={t}"));
    println!(
        "{} {} fold{}{t}: train {} / val {} / test {} -> {}",
        r.scheme,
        r.scope,
        r.fold,
        r.audit.n_train,
        r.audit.n_val,
        r.audit.n_test,
        r.report.display()
    );
}

fn evaluate(checkpoint: &Path, manifest: &Path, out: Option<&Path>, split: EvalSplit) -> Result<()> {
    let ckpt = load_checkpoint(checkpoint)?;
    let m = load_existing_manifest(manifest)?;
    let corpus = Corpus::load(m, &ckpt.source_tag)?;
    ckpt.check_compatible(corpus.input_dim(), corpus.embedding_dim(), &corpus.feature_tag)?;
    let entries = corpus.select(|e| split == EvalSplit::All || e.split == Some(Split::Test));
    if entries.is_empty() {
        return Err(AaiError::EmptyResult("no utterances to evaluate".into()));
    }
    let report = EvalReport {
        meta: ReportMeta {
            feature_tag: ckpt.source_tag.clone(),
            scheme: "evaluate".into(),
            scope: ckpt.scope.clone(),
            fold: 0,
            target_subject: None,
            t_percent: None,
        },
        utterances: score_entries(&ckpt.params, &corpus, &entries)?,
    };
    if let Some(dir) = out {
        report.save(dir, "report")?;
    }
    print!("{}", render_tables(&[report])?);
    Ok(())
}

fn report(runs: &Path, kind: ReportKind, out: Option<&Path>) -> Result<()> {
    if !runs.is_dir() {
        return Err(AaiError::Config(format!("runs directory {} not found", runs.display())));
    }
    let reports = load_reports(runs)?;
    let text = match kind {
        ReportKind::Tables => render_tables(&reports)?,
        ReportKind::AdaptationCurve => emit_plot_data(&reports, PlotKind::AdaptationCurve)?,
        ReportKind::ArticulatorBox => emit_plot_data(&reports, PlotKind::ArticulatorBox)?,
    };
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| AaiError::Io {
            path: path.to_path_buf(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
