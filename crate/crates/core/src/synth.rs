//! Synthetic corpora with a known acoustic map.
//!
//! Each channel of a trajectory is a sum of a few slow sinusoids sampled at
//! 200 Hz. Acoustic frames are `tanh(W·x + b)` plus Gaussian noise, taken at
//! every other trajectory sample (100 Hz), with one `W` shared by all
//! subjects. Severity slows and shrinks movements by `1 − 0.5·severity`.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::artic::{N_POSITION, RAW_RATE_HZ, TARGET_RATE_HZ};
use crate::conf::ConfigDoc;
use crate::error::{AaiError, Result};
use crate::eval::pearson_cc;
use crate::featio::{
    assign_folds, save_manifest, split_seen, subject_rng, write_embedding_file, write_feature_file,
    CorpusManifest, FeatureSequence, Group, ManifestEntry, SpeakerEmbedding,
};

pub const SYNTH_TAG: &str = "synth";
pub const EMA_TAG: &str = "ema";
pub const MANIFEST_NAME: &str = "manifest.tsv";

const COMPONENTS: usize = 3;
const FREQ_RANGE_HZ: (f64, f64) = (0.5, 6.0);
const MAP_GAIN: f64 = 0.9;
const MAP_BIAS_STD: f64 = 0.1;
const ATANH_CLIP: f64 = 1.0 - 1e-6;
const ORACLE_UTTERANCES: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_subjects: usize,
    pub n_utterances_per_subject: usize,
    pub duration_range_s: (f64, f64),
    pub acoustic_dim: usize,
    /// One value in [0, 1] per subject; 0 is healthy-like.
    pub severity: Vec<f64>,
    pub noise_std: f64,
    pub seed: u64,
    pub embedding_dim: usize,
    /// Std of a per-subject constant offset added to every position channel.
    pub subject_offset_std: f64,
    pub test_fraction: f64,
    pub n_folds: usize,
}

impl SynthSpec {
    /// Defaults with the first half of the subjects healthy and the rest at
    /// severity 0.6.
    pub fn new(n_subjects: usize, n_utterances_per_subject: usize, seed: u64) -> Self {
        SynthSpec {
            n_subjects,
            n_utterances_per_subject,
            duration_range_s: (2.0, 4.0),
            acoustic_dim: 24,
            severity: (0..n_subjects)
                .map(|i| if i < n_subjects.div_ceil(2) { 0.0 } else { 0.6 })
                .collect(),
            noise_std: 0.01,
            seed,
            embedding_dim: 8,
            subject_offset_std: 0.0,
            test_fraction: 0.1,
            n_folds: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(AaiError::config(m));
        if self.n_subjects == 0 || self.n_utterances_per_subject == 0 || self.acoustic_dim == 0 {
            return bad("subject, utterance and acoustic counts must be at least 1".into());
        }
        if self.severity.len() != self.n_subjects {
            return bad(format!(
                "{} severity values for {} subjects",
                self.severity.len(),
                self.n_subjects
            ));
        }
        if let Some(s) = self.severity.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return bad(format!("severity {s} outside [0, 1]"));
        }
        let (lo, hi) = self.duration_range_s;
        // Trajectories must survive decimation and the 101-tap smoother.
        if !(lo >= 1.1 && hi >= lo && hi.is_finite()) {
            return bad(format!("duration range ({lo}, {hi}) s must satisfy 1.1 <= lo <= hi"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad(format!("noise_std {} must be >= 0", self.noise_std));
        }
        if !(self.subject_offset_std >= 0.0 && self.subject_offset_std.is_finite()) {
            return bad(format!("subject_offset_std {} must be >= 0", self.subject_offset_std));
        }
        if self.embedding_dim < 2 {
            return bad("embedding_dim must be at least 2".into());
        }
        if !(0.0..1.0).contains(&self.test_fraction) || self.n_folds == 0 {
            return bad("test_fraction must be in [0, 1) and n_folds >= 1".into());
        }
        Ok(())
    }

    /// Reads the `[synth]` section. Missing keys take the [`SynthSpec::new`]
    /// defaults.
    pub fn from_config(doc: &mut ConfigDoc) -> Result<Self> {
        const S: &str = "synth";
        let n_subjects = doc.get_or(S, "n_subjects", 4usize)?;
        let n_utts = doc.get_or(S, "n_utterances_per_subject", 60usize)?;
        let seed = doc.get_or(S, "seed", 0u64)?;
        let mut spec = SynthSpec::new(n_subjects, n_utts, seed);
        if let Some(r) = doc.list::<f64>(S, "duration_range_s")? {
            if r.len() != 2 {
                return Err(AaiError::config("duration_range_s needs two values: min, max"));
            }
            spec.duration_range_s = (r[0], r[1]);
        }
        spec.acoustic_dim = doc.get_or(S, "acoustic_dim", spec.acoustic_dim)?;
        if let Some(s) = doc.list::<f64>(S, "severity")? {
            spec.severity = s;
        }
        spec.noise_std = doc.get_or(S, "noise_std", spec.noise_std)?;
        spec.embedding_dim = doc.get_or(S, "embedding_dim", spec.embedding_dim)?;
        spec.subject_offset_std = doc.get_or(S, "subject_offset_std", spec.subject_offset_std)?;
        spec.test_fraction = doc.get_or(S, "test_fraction", spec.test_fraction)?;
        spec.n_folds = doc.get_or(S, "n_folds", spec.n_folds)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut doc = ConfigDoc::load(path)?;
        let spec = Self::from_config(&mut doc)?;
        doc.finish()?;
        Ok(spec)
    }

    pub fn subject_id(&self, i: usize) -> String {
        format!("S{:02}", i + 1)
    }

    pub fn group(&self, i: usize) -> Group {
        if self.severity[i] > 0.0 {
            Group::Patient
        } else {
            Group::Healthy
        }
    }
}

/// The shared acoustic map `a = tanh(W·x + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthMap {
    /// acoustic_dim × 12
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl SynthMap {
    pub fn new(spec: &SynthSpec) -> Self {
        let mut rng = subject_rng(spec.seed, "", "acoustic-map");
        let w_dist = Normal::new(0.0, MAP_GAIN / (N_POSITION as f64).sqrt()).expect("valid std");
        let b_dist = Normal::new(0.0, MAP_BIAS_STD).expect("valid std");
        let w = Array2::from_shape_simple_fn((spec.acoustic_dim, N_POSITION), || w_dist.sample(&mut rng));
        let b = Array1::from_shape_simple_fn(spec.acoustic_dim, || b_dist.sample(&mut rng));
        SynthMap { w, b }
    }

    /// Noise-free acoustic frame for one position vector.
    pub fn apply(&self, x: ndarray::ArrayView1<f64>) -> Array1<f64> {
        (self.w.dot(&x) + &self.b).mapv(f64::tanh)
    }
}

/// One generated utterance.
#[derive(Debug, Clone)]
pub struct SynthUtterance {
    /// 200 Hz, 12 position channels.
    pub positions: Array2<f64>,
    /// 100 Hz, `acoustic_dim` columns.
    pub acoustics: Array2<f64>,
}

fn subject_offsets(spec: &SynthSpec, subject: usize) -> Array1<f64> {
    let mut rng = subject_rng(spec.seed, &spec.subject_id(subject), "offset");
    Array1::from_shape_simple_fn(N_POSITION, || {
        let z: f64 = StandardNormal.sample(&mut rng);
        spec.subject_offset_std * z
    })
}

/// Deterministic in (seed, subject, purpose); independent of every other
/// utterance.
pub fn generate_utterance(spec: &SynthSpec, map: &SynthMap, subject: usize, purpose: &str) -> SynthUtterance {
    let mut rng: ChaCha8Rng = subject_rng(spec.seed, &spec.subject_id(subject), purpose);
    let (lo, hi) = spec.duration_range_s;
    let duration = if hi > lo { rng.random_range(lo..=hi) } else { lo };
    let n = (duration * RAW_RATE_HZ).round() as usize;
    let scale = 1.0 - 0.5 * spec.severity[subject];
    let offsets = subject_offsets(spec, subject);

    let mut positions = Array2::zeros((n, N_POSITION));
    for c in 0..N_POSITION {
        let comps: Vec<(f64, f64, f64)> = (0..COMPONENTS)
            .map(|_| {
                (
                    rng.random_range(0.3..1.0),
                    rng.random_range(FREQ_RANGE_HZ.0..FREQ_RANGE_HZ.1),
                    rng.random_range(0.0..2.0 * PI),
                )
            })
            .collect();
        // Unit RMS before severity scaling.
        let norm = (comps.iter().map(|(a, _, _)| a * a / 2.0).sum::<f64>()).sqrt();
        for t in 0..n {
            let time = t as f64 / RAW_RATE_HZ;
            let v: f64 = comps
                .iter()
                .map(|(a, f, p)| a * (2.0 * PI * f * scale * time + p).sin())
                .sum();
            positions[[t, c]] = offsets[c] + scale * v / norm;
        }
    }

    let step = (RAW_RATE_HZ / TARGET_RATE_HZ) as usize;
    let m = n.div_ceil(step);
    let mut acoustics = Array2::zeros((m, spec.acoustic_dim));
    for k in 0..m {
        let clean = map.apply(positions.row(k * step));
        for (j, v) in clean.iter().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            acoustics[[k, j]] = v + spec.noise_std * z;
        }
    }
    SynthUtterance { positions, acoustics }
}

fn utterance_purpose(index: usize) -> String {
    format!("utterance-{index}")
}

/// Writes acoustic features, raw 200 Hz trajectories, subject embeddings and
/// a manifest (with train/test split and folds) under `out_dir`.
pub fn generate_corpus(spec: &SynthSpec, out_dir: &Path) -> Result<CorpusManifest> {
    spec.validate()?;
    let map = SynthMap::new(spec);
    let mut entries = Vec::new();
    for s in 0..spec.n_subjects {
        let subject = spec.subject_id(s);
        let mut rng = subject_rng(spec.seed, &subject, "embedding");
        let mut dir: Vec<f64> = (0..spec.embedding_dim - 1)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        dir.iter_mut().for_each(|v| *v /= norm);
        dir.push(spec.severity[s]);
        let emb_rel = PathBuf::from("embedding").join(format!("{subject}.aaix"));
        write_embedding_file(out_dir.join(&emb_rel), &SpeakerEmbedding::new(dir, subject.clone())?)?;

        for u in 0..spec.n_utterances_per_subject {
            let id = format!("{subject}_u{u:03}");
            let utt = generate_utterance(spec, &map, s, &utterance_purpose(u));
            let ac_rel = PathBuf::from("acoustic").join(format!("{id}.aaif"));
            let ema_rel = PathBuf::from("ema").join(format!("{id}.aaif"));
            write_feature_file(
                out_dir.join(&ac_rel),
                &FeatureSequence::new(utt.acoustics, TARGET_RATE_HZ, SYNTH_TAG)?,
            )?;
            write_feature_file(
                out_dir.join(&ema_rel),
                &FeatureSequence::new(utt.positions, RAW_RATE_HZ, EMA_TAG)?,
            )?;
            entries.push(ManifestEntry {
                utterance_id: id,
                subject_id: subject.clone(),
                group: spec.group(s),
                acoustic_path: ac_rel,
                articulatory_path: ema_rel,
                embedding_path: emb_rel.clone(),
                split: None,
                fold: None,
            });
        }
    }
    let manifest = CorpusManifest::new(entries, out_dir)?;
    let manifest = split_seen(&manifest, spec.test_fraction, spec.seed)?;
    let manifest = assign_folds(&manifest, spec.n_folds, spec.seed)?;
    save_manifest(out_dir.join(MANIFEST_NAME), &manifest)?;
    Ok(manifest)
}

/// Solves `a·x = b` for square `a` by Gaussian elimination with partial
/// pivoting; `b` may have several columns.
fn solve(mut a: Array2<f64>, mut b: Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[[i, col]].abs().total_cmp(&a[[j, col]].abs()))
            .expect("non-empty range");
        if pivot != col {
            for k in 0..n {
                a.swap([col, k], [pivot, k]);
            }
            for k in 0..b.ncols() {
                b.swap([col, k], [pivot, k]);
            }
        }
        let p = a[[col, col]];
        for row in col + 1..n {
            let f = a[[row, col]] / p;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[[row, k]] -= f * a[[col, k]];
            }
            for k in 0..b.ncols() {
                b[[row, k]] -= f * b[[col, k]];
            }
        }
    }
    let mut x = Array2::zeros(b.raw_dim());
    for row in (0..n).rev() {
        for k in 0..b.ncols() {
            let mut s = b[[row, k]];
            for j in row + 1..n {
                s -= a[[row, j]] * x[[j, k]];
            }
            x[[row, k]] = s / a[[row, row]];
        }
    }
    x
}

fn inverse_features(acoustics: &Array2<f64>) -> Array2<f64> {
    let (m, d) = acoustics.dim();
    let mut f = Array2::ones((m, d + 1));
    for ((t, j), v) in acoustics.indexed_iter() {
        f[[t, j]] = v.clamp(-ATANH_CLIP, ATANH_CLIP).atanh();
    }
    f
}

fn positions_at_acoustic_rate(positions: &Array2<f64>) -> Array2<f64> {
    let step = (RAW_RATE_HZ / TARGET_RATE_HZ) as usize;
    let rows: Vec<usize> = (0..positions.nrows()).step_by(step).collect();
    positions.select(ndarray::Axis(0), &rows)
}

/// Mean per-utterance CC of a least-squares inverse (atanh of the acoustics
/// regressed onto positions, fit per subject on a separate sample).
pub fn oracle_cc_bound(spec: &SynthSpec) -> Result<f64> {
    spec.validate()?;
    let map = SynthMap::new(spec);
    let mut total = 0.0;
    let mut count = 0usize;
    for s in 0..spec.n_subjects {
        let d = spec.acoustic_dim + 1;
        let mut ftf = Array2::<f64>::zeros((d, d));
        let mut fty = Array2::<f64>::zeros((d, N_POSITION));
        for u in 0..ORACLE_UTTERANCES {
            let utt = generate_utterance(spec, &map, s, &format!("oracle-fit-{u}"));
            let f = inverse_features(&utt.acoustics);
            let y = positions_at_acoustic_rate(&utt.positions);
            ftf += &f.t().dot(&f);
            fty += &f.t().dot(&y);
        }
        for i in 0..d {
            ftf[[i, i]] += 1e-9;
        }
        let coef = solve(ftf, fty);
        for u in 0..ORACLE_UTTERANCES {
            let utt = generate_utterance(spec, &map, s, &format!("oracle-eval-{u}"));
            let pred = inverse_features(&utt.acoustics).dot(&coef);
            let y = positions_at_acoustic_rate(&utt.positions);
            let mut sum = 0.0;
            let mut defined = 0usize;
            for c in 0..N_POSITION {
                if let Some(cc) = pearson_cc(&pred.column(c).to_vec(), &y.column(c).to_vec())? {
                    sum += cc;
                    defined += 1;
                }
            }
            if defined > 0 {
                total += sum / defined as f64;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(AaiError::EmptyResult("oracle sample produced no defined CC".into()));
    }
    Ok(total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthSpec {
        let mut s = SynthSpec::new(2, 10, 3);
        s.duration_range_s = (1.2, 1.6);
        s.acoustic_dim = 16;
        s
    }

    #[test]
    fn solve_recovers_known_system() {
        let a = ndarray::array![[0.0, 2.0, 1.0], [1.0, 1.0, 0.0], [3.0, 0.0, 1.0]];
        let x = ndarray::array![[1.0], [-2.0], [0.5]];
        let b = a.dot(&x);
        let got = solve(a, b);
        for (g, w) in got.iter().zip(x.iter()) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_acoustics_are_the_map() {
        let mut spec = small();
        spec.noise_std = 0.0;
        spec.severity = vec![0.0, 0.0];
        let map = SynthMap::new(&spec);
        let u = generate_utterance(&spec, &map, 0, "x");
        for k in 0..u.acoustics.nrows() {
            let expect = map.apply(u.positions.row(2 * k));
            assert_eq!(u.acoustics.row(k), expect);
        }
        assert_eq!(u.acoustics.nrows(), u.positions.nrows().div_ceil(2));
    }

    #[test]
    fn spec_validation() {
        let mut s = small();
        s.severity = vec![0.0];
        assert!(s.validate().is_err());
        let mut s = small();
        s.duration_range_s = (0.5, 1.0);
        assert!(s.validate().is_err());
        let mut s = small();
        s.noise_std = -1.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn config_section_parses() {
        let text = "[synth]\nn_subjects = 3\nseverity = 0, 0.5, 1\nduration_range_s = 1.5, 2.5\nnoise_std = 0.02\n";
        let mut doc = ConfigDoc::parse(text, "s.conf").unwrap();
        let s = SynthSpec::from_config(&mut doc).unwrap();
        doc.finish().unwrap();
        assert_eq!(s.n_subjects, 3);
        assert_eq!(s.severity, vec![0.0, 0.5, 1.0]);
        assert_eq!(s.duration_range_s, (1.5, 2.5));
        assert_eq!(s.group(0), Group::Healthy);
        assert_eq!(s.group(2), Group::Patient);
    }
}
