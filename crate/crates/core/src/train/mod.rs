//! Experiment protocols: subject-specific, pooled, fine-tuned,
//! leave-one-subject-out and t% adaptation, over k-fold cross-validation.
//!
//! Every run trains (or reuses) one model, scores a test set and writes,
//! under the runs directory:
//!
//! ```text
//! <scheme>/<scope>/fold<k>/model.aaim      checkpoint
//! <scheme>/<scope>/fold<k>/report.{json,tsv}
//! <scheme>/<scope>/fold<k>/history.tsv      epoch, train_loss, val_loss, lr
//! runs.tsv                                  one line per run
//! ```
//! Adaptation runs live under `adapt_t/<subject>/t<t>/fold<k>`.

mod data;
mod registry;

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::RngCore;

pub use data::{load_targets, Corpus};
pub use registry::{load_registry, update_registry, RunRecord, SetAudit, REGISTRY_NAME};

use crate::artic::N_AUGMENTED;
use crate::conf::ConfigDoc;
use crate::error::{AaiError, Result};
use crate::eval::{score_utterance, EvalReport, ReportMeta, UtteranceScore};
use crate::featio::format::write_bytes;
use crate::featio::{load_manifest, subject_rng, ManifestEntry, Split};
use crate::net::{
    fit_with_progress, forward_utterance, load_checkpoint, save_checkpoint, Checkpoint, EpochRecord, ModelParams,
    NetConfig, TrainControl,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    SubjectSpecific,
    Pooled,
    FineTuned,
    UnseenLoso,
    Adapt,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::SubjectSpecific => "subject_specific",
            Scheme::Pooled => "pooled",
            Scheme::FineTuned => "fine_tuned",
            Scheme::UnseenLoso => "unseen_loso",
            Scheme::Adapt => "adapt_t",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = AaiError;
    fn from_str(s: &str) -> Result<Self> {
        [
            Scheme::SubjectSpecific,
            Scheme::Pooled,
            Scheme::FineTuned,
            Scheme::UnseenLoso,
            Scheme::Adapt,
        ]
        .into_iter()
        .find(|x| x.name() == s)
        .ok_or_else(|| {
            AaiError::config(format!(
                "unknown scheme '{s}' (expected subject_specific, pooled, fine_tuned, unseen_loso or adapt_t)"
            ))
        })
    }
}

/// Layer sizes other than the data-determined input, embedding and output
/// widths. Defaults: 200 acoustic units, 32 speaker units, 3 BLSTM layers of
/// 256 units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelShape {
    pub acoustic_units: usize,
    pub speaker_units: usize,
    pub hidden: usize,
    pub layers: usize,
}

impl Default for ModelShape {
    fn default() -> Self {
        let s = NetConfig::standard(1, 1);
        ModelShape {
            acoustic_units: s.acoustic_units,
            speaker_units: s.speaker_units,
            hidden: s.hidden,
            layers: s.layers,
        }
    }
}

impl ModelShape {
    pub fn net_config(&self, input_dim: usize, embedding_dim: usize) -> NetConfig {
        NetConfig {
            input_dim,
            embedding_dim,
            acoustic_units: self.acoustic_units,
            speaker_units: self.speaker_units,
            hidden: self.hidden,
            layers: self.layers,
            output_dim: N_AUGMENTED,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeSpec {
    pub scheme: Scheme,
    /// Empty means every subject in the manifest.
    pub subjects: Vec<String>,
    pub feature_tag: String,
    /// Adaptation only.
    pub t_percent: Option<f64>,
    pub seed: u64,
    /// Restricts which cross-validation folds are run; `None` runs all.
    pub folds: Option<Vec<usize>>,
}

impl SchemeSpec {
    pub fn new(scheme: Scheme, feature_tag: impl Into<String>, seed: u64) -> Self {
        SchemeSpec {
            scheme,
            subjects: Vec::new(),
            feature_tag: feature_tag.into(),
            t_percent: None,
            seed,
            folds: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.scheme, self.t_percent) {
            (Scheme::Adapt, None) => Err(AaiError::config("adapt_t needs t_percent")),
            (Scheme::Adapt, Some(t)) if !(0.0..=100.0).contains(&t) => {
                Err(AaiError::invalid(format!("t_percent {t} outside [0, 100]")))
            }
            (s, Some(_)) if s != Scheme::Adapt => {
                Err(AaiError::config(format!("t_percent only applies to adapt_t, not {s}")))
            }
            _ => Ok(()),
        }
    }

    /// Label of the pooled model's subject scope.
    pub fn pooled_scope(&self) -> String {
        if self.subjects.is_empty() {
            "all".into()
        } else {
            self.subjects.join("+")
        }
    }
}

/// What to run and how to train it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainPlan {
    pub spec: SchemeSpec,
    pub control: TrainControl,
    pub model: ModelShape,
}

/// A parsed experiment configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub manifest: PathBuf,
    pub runs_dir: PathBuf,
    pub plan: TrainPlan,
}

impl ExperimentConfig {
    pub fn from_doc(doc: &mut ConfigDoc) -> Result<Self> {
        let manifest = doc
            .path("corpus", "manifest")?
            .ok_or_else(|| AaiError::config(format!("{}: missing [corpus] manifest", doc.origin())))?;
        let runs_dir = match doc.path("corpus", "runs")? {
            Some(p) => p,
            None => Path::new(doc.origin()).parent().unwrap_or(Path::new("")).join("runs"),
        };
        let feature_tag: String = doc.require("features", "tag")?;
        let scheme: Scheme = doc.require::<String>("scheme", "name")?.parse()?;
        let mut spec = SchemeSpec::new(scheme, feature_tag, doc.get_or("scheme", "seed", 0u64)?);
        spec.subjects = doc.list("scheme", "subjects")?.unwrap_or_default();
        spec.t_percent = doc.get("scheme", "t_percent")?;
        spec.folds = doc.list("scheme", "folds")?;

        let d = TrainControl::default();
        let c = "control";
        let control_seed: Option<u64> = doc.get(c, "seed")?;
        if let Some(s) = control_seed {
            spec.seed = s;
        }
        let control = TrainControl {
            max_epochs: doc.get_or(c, "max_epochs", d.max_epochs)?,
            batch_size: doc.get_or(c, "batch_size", d.batch_size)?,
            lr: doc.get_or(c, "lr", d.lr)?,
            weight_decay: doc.get_or(c, "weight_decay", d.weight_decay)?,
            plateau_factor: doc.get_or(c, "plateau_factor", d.plateau_factor)?,
            plateau_patience: doc.get_or(c, "plateau_patience", d.plateau_patience)?,
            early_stop_patience: doc.get_or(c, "early_stop_patience", d.early_stop_patience)?,
            min_lr: doc.get_or(c, "min_lr", d.min_lr)?,
            seed: spec.seed,
        };
        control.validate()?;

        let m = ModelShape::default();
        let model = ModelShape {
            acoustic_units: doc.get_or("model", "acoustic_units", m.acoustic_units)?,
            speaker_units: doc.get_or("model", "speaker_units", m.speaker_units)?,
            hidden: doc.get_or("model", "hidden", m.hidden)?,
            layers: doc.get_or("model", "layers", m.layers)?,
        };
        model.net_config(1, 1).validate()?;
        Ok(ExperimentConfig {
            manifest,
            runs_dir,
            plan: TrainPlan { spec, control, model },
        })
    }

    /// Parses without validating the scheme, so callers can still override
    /// the seed or adaptation percentage.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(AaiError::config(format!("configuration file {} not found", path.display())));
        }
        let mut doc = ConfigDoc::load(path)?;
        let cfg = Self::from_doc(&mut doc)?;
        doc.finish()?;
        Ok(cfg)
    }
}

/// Where runs go and how they are executed.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub runs_dir: PathBuf,
    /// Maximum number of runs trained concurrently.
    pub jobs: usize,
    /// Per-epoch progress on stderr.
    pub verbose: bool,
    /// Timing log; timestamps go here and nowhere else.
    pub log: Option<PathBuf>,
}

impl RunContext {
    pub fn new(runs_dir: impl Into<PathBuf>) -> Self {
        RunContext {
            runs_dir: runs_dir.into(),
            jobs: 1,
            verbose: false,
            log: None,
        }
    }

    fn log(&self, msg: &str) {
        if self.verbose {
            eprintln!("{msg}");
        }
        if let Some(path) = &self.log {
            let stamp = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs_f64())
                .unwrap_or(0.0);
            if let Ok(mut f) = std::fs::OpenOptions::new().create(true).append(true).open(path) {
                let _ = writeln!(f, "{stamp:.3}\t{msg}");
            }
        }
    }
}

/// Scores `entries` with a model: one CC per position channel per utterance.
pub fn score_entries(params: &ModelParams, corpus: &Corpus, entries: &[&ManifestEntry]) -> Result<Vec<UtteranceScore>> {
    entries
        .iter()
        .map(|e| {
            let u = corpus
                .utterance(&e.utterance_id)
                .ok_or_else(|| AaiError::invalid(format!("unknown utterance '{}'", e.utterance_id)))?;
            let pred = forward_utterance(params, u.inputs.view(), u.embedding.view())?;
            let cc = score_utterance(&pred, &u.targets)?;
            Ok(UtteranceScore {
                utterance_id: e.utterance_id.clone(),
                subject_id: e.subject_id.clone(),
                group: e.group.to_string(),
                cc: cc.to_vec(),
            })
        })
        .collect()
}

enum Init {
    Fresh,
    /// Runs-dir-relative checkpoint to start from.
    Checkpoint(PathBuf),
}

struct Job {
    scheme: Scheme,
    scope: String,
    fold: usize,
    t_percent: Option<f64>,
    target_subject: Option<String>,
    train: Vec<String>,
    val: Vec<String>,
    test: Vec<String>,
    /// Subject whose utterances must not reach training or validation.
    excluded: Option<String>,
    init: Init,
    /// Evaluate the starting checkpoint as is.
    skip_training: bool,
}

impl Job {
    fn dir(&self) -> PathBuf {
        let base = PathBuf::from(self.scheme.name()).join(&self.scope);
        let base = match self.t_percent {
            Some(t) => base.join(format!("t{t}")),
            None => base,
        };
        base.join(format!("fold{}", self.fold))
    }

    fn purpose(&self, what: &str) -> String {
        match self.t_percent {
            Some(t) => format!("{}/t{t}/fold{}/{what}", self.scheme, self.fold),
            None => format!("{}/fold{}/{what}", self.scheme, self.fold),
        }
    }
}

/// Checks pairwise disjointness of a run's utterance sets and that an
/// excluded subject contributes nothing to training or validation.
pub fn audit_sets(
    corpus: &Corpus,
    train: &[String],
    val: &[String],
    test: &[String],
    excluded_subject: Option<&str>,
) -> Result<SetAudit> {
    let tr: HashSet<&String> = train.iter().collect();
    let va: HashSet<&String> = val.iter().collect();
    let te: HashSet<&String> = test.iter().collect();
    let disjoint = tr.is_disjoint(&va) && tr.is_disjoint(&te) && va.is_disjoint(&te);
    if !disjoint {
        return Err(AaiError::invalid("train, validation and test sets overlap"));
    }
    if let Some(s) = excluded_subject {
        if let Some(id) = train
            .iter()
            .chain(val)
            .find(|id| corpus.entry(id).is_some_and(|e| e.subject_id == s))
        {
            return Err(AaiError::invalid(format!(
                "held-out subject {s} leaked into training data via '{id}'"
            )));
        }
    }
    Ok(SetAudit {
        n_train: train.len(),
        n_val: val.len(),
        n_test: test.len(),
        disjoint,
    })
}

fn ids(entries: &[&ManifestEntry]) -> Vec<String> {
    entries.iter().map(|e| e.utterance_id.clone()).collect()
}

fn write_history(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let mut text = String::from("epoch\ttrain_loss\tval_loss\tlr\n");
    for h in history {
        let train = h.train_loss.map_or("-".into(), |v| v.to_string());
        let _ = writeln!(text, "{}\t{train}\t{}\t{}", h.epoch, h.val_loss, h.lr);
    }
    write_bytes(path, text.as_bytes())
}

fn run_seed(plan: &TrainPlan, job: &Job) -> u64 {
    subject_rng(plan.spec.seed, &job.scope, &job.purpose("shuffle")).next_u64()
}

fn execute(corpus: &Corpus, plan: &TrainPlan, ctx: &RunContext, job: &Job) -> Result<RunRecord> {
    let started = Instant::now();
    let audit = audit_sets(corpus, &job.train, &job.val, &job.test, job.excluded.as_deref())?;
    let cfg = plan.model.net_config(corpus.input_dim(), corpus.embedding_dim());
    let params = match &job.init {
        Init::Fresh => ModelParams::init(cfg, &mut subject_rng(plan.spec.seed, &job.scope, &job.purpose("init")))?,
        Init::Checkpoint(rel) => {
            let ckpt = load_checkpoint(ctx.runs_dir.join(rel))?;
            ckpt.check_compatible(corpus.input_dim(), corpus.embedding_dim(), &corpus.feature_tag)?;
            ckpt.params
        }
    };
    let dir = job.dir();
    let seed = run_seed(plan, job);

    let (params, checkpoint) = match (&job.init, job.skip_training) {
        (Init::Checkpoint(rel), true) => (params, rel.clone()),
        _ => {
            let pick = |list: &[String]| -> Vec<&ManifestEntry> {
                list.iter().filter_map(|id| corpus.entry(id)).collect()
            };
            let train = corpus.clone_utterances(&pick(&job.train));
            let val = corpus.clone_utterances(&pick(&job.val));
            let ctrl = TrainControl {
                seed,
                ..plan.control.clone()
            };
            let label = format!("{} {} fold{}", job.scheme, job.scope, job.fold);
            let (best, history) = fit_with_progress(params, &train, &val, &ctrl, |r| {
                if ctx.verbose {
                    eprintln!(
                        "[{label}] epoch {} train {} val {:.6} lr {:e}",
                        r.epoch,
                        r.train_loss.map_or("-".into(), |v| format!("{v:.6}")),
                        r.val_loss,
                        r.lr
                    );
                }
            })?;
            write_history(&ctx.runs_dir.join(&dir).join("history.tsv"), &history)?;
            let rel = dir.join("model.aaim");
            save_checkpoint(
                ctx.runs_dir.join(&rel),
                &Checkpoint {
                    params: best.clone(),
                    source_tag: corpus.feature_tag.clone(),
                    scope: job.scope.clone(),
                },
            )?;
            (best, rel)
        }
    };

    let test: Vec<&ManifestEntry> = job.test.iter().filter_map(|id| corpus.entry(id)).collect();
    let report = EvalReport {
        meta: ReportMeta {
            feature_tag: corpus.feature_tag.clone(),
            scheme: job.scheme.name().into(),
            scope: job.scope.clone(),
            fold: job.fold,
            target_subject: job.target_subject.clone(),
            t_percent: job.t_percent,
        },
        utterances: score_entries(&params, corpus, &test)?,
    };
    report.save(&ctx.runs_dir.join(&dir), "report")?;
    ctx.log(&format!(
        "{} {} fold{}{} finished in {:.2}s",
        job.scheme,
        job.scope,
        job.fold,
        job.t_percent.map_or(String::new(), |t| format!(" t{t}")),
        started.elapsed().as_secs_f64()
    ));
    Ok(RunRecord {
        scheme: job.scheme.name().into(),
        scope: job.scope.clone(),
        fold: job.fold,
        t_percent: job.t_percent,
        checkpoint,
        report: dir.join("report.json"),
        seed,
        audit,
    })
}

/// Runs `f` over `items` on up to `jobs` threads; results keep item order.
fn parallel_map<T, R, F>(jobs: usize, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = jobs.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("no poisoned workers")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("no poisoned workers")
        .into_iter()
        .map(|r| r.expect("every item processed"))
        .collect()
}

fn run_jobs(corpus: &Corpus, plan: &TrainPlan, ctx: &RunContext, jobs: Vec<Job>) -> Result<Vec<RunRecord>> {
    let results = parallel_map(ctx.jobs, &jobs, |job| execute(corpus, plan, ctx, job));
    let records = results.into_iter().collect::<Result<Vec<_>>>()?;
    update_registry(&ctx.runs_dir, &records)?;
    Ok(records)
}

/// Subjects in scope, checked against the manifest.
fn scope_subjects(corpus: &Corpus, spec: &SchemeSpec) -> Result<Vec<String>> {
    let all = corpus.manifest.subjects();
    if spec.subjects.is_empty() {
        return Ok(all);
    }
    for s in &spec.subjects {
        if !all.contains(s) {
            return Err(AaiError::config(format!("subject '{s}' is not in the manifest")));
        }
    }
    Ok(spec.subjects.clone())
}

fn folds(corpus: &Corpus, spec: &SchemeSpec) -> Result<Vec<usize>> {
    corpus.manifest.check_seen()?;
    let k = corpus.n_folds();
    if k < 2 {
        return Err(AaiError::config(format!(
            "cross-validation needs at least 2 folds, manifest has {k}"
        )));
    }
    match &spec.folds {
        None => Ok((0..k).collect()),
        Some(list) => {
            if let Some(f) = list.iter().find(|&&f| f >= k) {
                return Err(AaiError::config(format!("fold {f} requested, manifest has {k} folds")));
            }
            Ok(list.clone())
        }
    }
}

struct SubjectSets<'a> {
    train: Vec<&'a ManifestEntry>,
    val: Vec<&'a ManifestEntry>,
    test: Vec<&'a ManifestEntry>,
}

/// Fold `fold` of `subjects`: the other train folds, fold `fold` as
/// validation, and the fixed test split.
fn fold_sets<'a>(corpus: &'a Corpus, subjects: &[String], fold: usize) -> SubjectSets<'a> {
    let inside = |e: &ManifestEntry| subjects.contains(&e.subject_id);
    SubjectSets {
        train: corpus.select(|e| inside(e) && e.split == Some(Split::Train) && e.fold != Some(fold)),
        val: corpus.select(|e| inside(e) && e.split == Some(Split::Train) && e.fold == Some(fold)),
        test: corpus.select(|e| inside(e) && e.split == Some(Split::Test)),
    }
}

fn fresh_job(scheme: Scheme, scope: String, fold: usize, sets: &SubjectSets) -> Job {
    Job {
        scheme,
        scope,
        fold,
        t_percent: None,
        target_subject: None,
        train: ids(&sets.train),
        val: ids(&sets.val),
        test: ids(&sets.test),
        excluded: None,
        init: Init::Fresh,
        skip_training: false,
    }
}

fn check_plan(corpus: &Corpus, plan: &TrainPlan, expected: Scheme) -> Result<()> {
    plan.spec.validate()?;
    plan.control.validate()?;
    if plan.spec.scheme != expected {
        return Err(AaiError::config(format!(
            "plan is for {}, not {expected}",
            plan.spec.scheme
        )));
    }
    if corpus.feature_tag != plan.spec.feature_tag {
        return Err(AaiError::Incompatible(format!(
            "corpus holds '{}' features, plan expects '{}'",
            corpus.feature_tag, plan.spec.feature_tag
        )));
    }
    Ok(())
}

/// One model per subject per fold, tested on that subject's test split.
pub fn run_subject_specific(corpus: &Corpus, plan: &TrainPlan, ctx: &RunContext) -> Result<Vec<RunRecord>> {
    check_plan(corpus, plan, Scheme::SubjectSpecific)?;
    let folds = folds(corpus, &plan.spec)?;
    let mut jobs = Vec::new();
    for s in scope_subjects(corpus, &plan.spec)? {
        for &f in &folds {
            let sets = fold_sets(corpus, std::slice::from_ref(&s), f);
            jobs.push(fresh_job(Scheme::SubjectSpecific, s.clone(), f, &sets));
        }
    }
    run_jobs(corpus, plan, ctx, jobs)
}

/// One model per fold over every subject's training folds, tested on the
/// union of the subjects' test splits.
pub fn run_pooled(corpus: &Corpus, plan: &TrainPlan, ctx: &RunContext) -> Result<Vec<RunRecord>> {
    check_plan(corpus, plan, Scheme::Pooled)?;
    let folds = folds(corpus, &plan.spec)?;
    let subjects = scope_subjects(corpus, &plan.spec)?;
    let jobs = folds
        .iter()
        .map(|&f| fresh_job(Scheme::Pooled, plan.spec.pooled_scope(), f, &fold_sets(corpus, &subjects, f)))
        .collect();
    run_jobs(corpus, plan, ctx, jobs)
}

fn find_record<'a>(records: &'a [RunRecord], scheme: Scheme, scope: Option<&str>, fold: usize) -> Option<&'a RunRecord> {
    records
        .iter()
        .find(|r| r.scheme == scheme.name() && r.fold == fold && scope.is_none_or(|s| r.scope == s))
}

/// Per subject per fold: continue training the pooled model of that fold on
/// the subject's own training folds.
pub fn run_fine_tuned(corpus: &Corpus, plan: &TrainPlan, ctx: &RunContext) -> Result<Vec<RunRecord>> {
    check_plan(corpus, plan, Scheme::FineTuned)?;
    let folds = folds(corpus, &plan.spec)?;
    let registry = load_registry(&ctx.runs_dir)?;
    let mut jobs = Vec::new();
    for s in scope_subjects(corpus, &plan.spec)? {
        for &f in &folds {
            let pooled = find_record(&registry, Scheme::Pooled, None, f).ok_or_else(|| {
                AaiError::Incompatible(format!(
                    "no pooled checkpoint for fold {f} in {}; run the pooled scheme first",
                    ctx.runs_dir.display()
                ))
            })?;
            let sets = fold_sets(corpus, std::slice::from_ref(&s), f);
            let mut job = fresh_job(Scheme::FineTuned, s.clone(), f, &sets);
            job.init = Init::Checkpoint(pooled.checkpoint.clone());
            jobs.push(job);
        }
    }
    run_jobs(corpus, plan, ctx, jobs)
}

/// Per held-out subject per fold: train on every other subject and score
/// all of the held-out subject's utterances.
pub fn run_unseen_loso(corpus: &Corpus, plan: &TrainPlan, ctx: &RunContext) -> Result<Vec<RunRecord>> {
    check_plan(corpus, plan, Scheme::UnseenLoso)?;
    let all = corpus.manifest.subjects();
    if all.len() < 2 {
        return Err(AaiError::config("leave-one-subject-out needs at least 2 subjects"));
    }
    let folds = folds(corpus, &plan.spec)?;
    let mut jobs = Vec::new();
    for held in scope_subjects(corpus, &plan.spec)? {
        let others: Vec<String> = all.iter().filter(|s| **s != held).cloned().collect();
        let everything: Vec<&ManifestEntry> = corpus.select(|e| e.subject_id == held);
        for &f in &folds {
            let mut sets = fold_sets(corpus, &others, f);
            sets.test = everything.clone();
            let mut job = fresh_job(Scheme::UnseenLoso, held.clone(), f, &sets);
            job.target_subject = Some(held.clone());
            job.excluded = Some(held.clone());
            jobs.push(job);
        }
    }
    run_jobs(corpus, plan, ctx, jobs)
}

/// The first `t`% (by count, rounded, at least one when `t > 0`) of a seeded
/// shuffle of the subject's training utterances. Larger `t` extends smaller
/// selections.
pub fn adaptation_selection(corpus: &Corpus, subject: &str, t_percent: f64, seed: u64) -> Result<Vec<String>> {
    if !(0.0..=100.0).contains(&t_percent) {
        return Err(AaiError::invalid(format!("t_percent {t_percent} outside [0, 100]")));
    }
    let mut pool = ids(&corpus.select(|e| e.subject_id == subject && e.split == Some(Split::Train)));
    pool.shuffle(&mut subject_rng(seed, subject, "adapt-selection"));
    let n = if t_percent == 0.0 {
        0
    } else {
        ((t_percent / 100.0 * pool.len() as f64).round() as usize).clamp(1, pool.len())
    };
    pool.truncate(n);
    Ok(pool)
}

/// Fine-tunes each target subject's leave-one-out model of every fold on t%
/// of that subject's training data and scores the subject's test split.
/// At `t = 0` the leave-one-out model is scored unchanged.
///
/// The selection is split by fold (fold `k` validates); when that leaves
/// either side empty, all selected utterances train and the reference
/// subjects' fold-`k` utterances validate.
pub fn run_adapt(corpus: &Corpus, plan: &TrainPlan, ctx: &RunContext) -> Result<Vec<RunRecord>> {
    check_plan(corpus, plan, Scheme::Adapt)?;
    let t = plan.spec.t_percent.expect("validated");
    let folds = folds(corpus, &plan.spec)?;
    let registry = load_registry(&ctx.runs_dir)?;
    let all = corpus.manifest.subjects();
    let mut jobs = Vec::new();
    for target in scope_subjects(corpus, &plan.spec)? {
        let selected = adaptation_selection(corpus, &target, t, plan.spec.seed)?;
        let test = ids(&corpus.select(|e| e.subject_id == target && e.split == Some(Split::Test)));
        let others: Vec<String> = all.iter().filter(|s| **s != target).cloned().collect();
        for &f in &folds {
            let loso = find_record(&registry, Scheme::UnseenLoso, Some(&target), f).ok_or_else(|| {
                AaiError::Incompatible(format!(
                    "no unseen_loso checkpoint for subject {target} fold {f} in {}; run unseen_loso first",
                    ctx.runs_dir.display()
                ))
            })?;
            let in_fold = |id: &String| corpus.entry(id).is_some_and(|e| e.fold == Some(f));
            let (mut train, mut val): (Vec<String>, Vec<String>) = selected.iter().cloned().partition(|id| !in_fold(id));
            if train.is_empty() || val.is_empty() {
                train = selected.clone();
                val = ids(&fold_sets(corpus, &others, f).val);
            }
            jobs.push(Job {
                scheme: Scheme::Adapt,
                scope: target.clone(),
                fold: f,
                t_percent: Some(t),
                target_subject: Some(target.clone()),
                train,
                val,
                test: test.clone(),
                excluded: None,
                init: Init::Checkpoint(loso.checkpoint.clone()),
                skip_training: selected.is_empty(),
            });
        }
    }
    run_jobs(corpus, plan, ctx, jobs)
}

/// Dispatches on the plan's scheme.
pub fn run_scheme(corpus: &Corpus, plan: &TrainPlan, ctx: &RunContext) -> Result<Vec<RunRecord>> {
    match plan.spec.scheme {
        Scheme::SubjectSpecific => run_subject_specific(corpus, plan, ctx),
        Scheme::Pooled => run_pooled(corpus, plan, ctx),
        Scheme::FineTuned => run_fine_tuned(corpus, plan, ctx),
        Scheme::UnseenLoso => run_unseen_loso(corpus, plan, ctx),
        Scheme::Adapt => run_adapt(corpus, plan, ctx),
    }
}

/// Loads the configured manifest and corpus and runs the plan.
pub fn run_experiment(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<Vec<RunRecord>> {
    cfg.plan.spec.validate()?;
    let manifest = load_manifest(&cfg.manifest)?;
    let corpus = Corpus::load(manifest, &cfg.plan.spec.feature_tag)?;
    run_scheme(&corpus, &cfg.plan, ctx)
}

/// Every report listed in a runs directory's registry, in registry order.
pub fn load_reports(runs_dir: &Path) -> Result<Vec<EvalReport>> {
    let records = load_registry(runs_dir)?;
    if records.is_empty() {
        return Err(AaiError::EmptyResult(format!(
            "no runs registered in {}",
            runs_dir.join(REGISTRY_NAME).display()
        )));
    }
    records.iter().map(|r| EvalReport::load(&runs_dir.join(&r.report))).collect()
}
