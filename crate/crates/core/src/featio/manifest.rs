use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{AaiError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Group {
    Healthy,
    Patient,
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::Healthy => "healthy",
            Group::Patient => "patient",
        })
    }
}

impl FromStr for Group {
    type Err = AaiError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "healthy" => Ok(Group::Healthy),
            "patient" => Ok(Group::Patient),
            _ => Err(AaiError::config(format!("unknown group '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub utterance_id: String,
    pub subject_id: String,
    pub group: Group,
    pub acoustic_path: PathBuf,
    pub articulatory_path: PathBuf,
    pub embedding_path: PathBuf,
    pub split: Option<Split>,
    pub fold: Option<usize>,
}

/// Utterance index. Relative paths in entries are resolved against
/// `base_dir` (the directory the manifest was loaded from).
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusManifest {
    pub entries: Vec<ManifestEntry>,
    pub base_dir: PathBuf,
}

impl CorpusManifest {
    pub fn new(entries: Vec<ManifestEntry>, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.utterance_id.as_str()) {
                return Err(AaiError::config(format!(
                    "duplicate utterance id '{}'",
                    e.utterance_id
                )));
            }
        }
        Ok(CorpusManifest {
            entries,
            base_dir: base_dir.into(),
        })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Subject ids in first-appearance order.
    pub fn subjects(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.entries
            .iter()
            .filter(|e| seen.insert(e.subject_id.clone()))
            .map(|e| e.subject_id.clone())
            .collect()
    }

    pub fn group_of(&self, subject: &str) -> Option<Group> {
        self.entries
            .iter()
            .find(|e| e.subject_id == subject)
            .map(|e| e.group)
    }

    pub fn of_subject<'a>(&'a self, subject: &'a str) -> impl Iterator<Item = &'a ManifestEntry> + 'a {
        self.entries.iter().filter(move |e| e.subject_id == subject)
    }

    /// Checks that every subject has both train and test utterances and that
    /// every train utterance carries a fold.
    pub fn check_seen(&self) -> Result<()> {
        for s in self.subjects() {
            let mut train = 0;
            let mut test = 0;
            for e in self.of_subject(&s) {
                match e.split {
                    Some(Split::Train) => {
                        if e.fold.is_none() {
                            return Err(AaiError::config(format!(
                                "train utterance '{}' has no fold",
                                e.utterance_id
                            )));
                        }
                        train += 1
                    }
                    Some(Split::Test) => test += 1,
                    None => {
                        return Err(AaiError::config(format!(
                            "utterance '{}' has no train/test split",
                            e.utterance_id
                        )))
                    }
                }
            }
            if train == 0 || test == 0 {
                return Err(AaiError::config(format!(
                    "subject '{s}' has {train} train and {test} test utterances; both are required"
                )));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from(
            "# utterance_id\tsubject_id\tgroup\tacoustic_path\tarticulatory_path\tembedding_path\tsplit\tfold\n",
        );
        for e in &self.entries {
            let split = e.split.map_or("-".to_string(), |s| s.to_string());
            let fold = e.fold.map_or("-".to_string(), |f| f.to_string());
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                e.utterance_id,
                e.subject_id,
                e.group,
                e.acoustic_path.display(),
                e.articulatory_path.display(),
                e.embedding_path.display(),
                split,
                fold
            ));
        }
        out
    }

    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 8 {
                return Err(AaiError::config(format!(
                    "manifest line {}: expected 8 tab-separated fields, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let split = match fields[6] {
                "train" => Some(Split::Train),
                "test" => Some(Split::Test),
                "-" | "" => None,
                other => {
                    return Err(AaiError::config(format!(
                        "manifest line {}: unknown split '{other}'",
                        lineno + 1
                    )))
                }
            };
            let fold = match fields[7] {
                "-" | "" => None,
                f => Some(f.parse::<usize>().map_err(|_| {
                    AaiError::config(format!("manifest line {}: bad fold '{f}'", lineno + 1))
                })?),
            };
            entries.push(ManifestEntry {
                utterance_id: fields[0].to_string(),
                subject_id: fields[1].to_string(),
                group: fields[2].parse()?,
                acoustic_path: PathBuf::from(fields[3]),
                articulatory_path: PathBuf::from(fields[4]),
                embedding_path: PathBuf::from(fields[5]),
                split,
                fold,
            });
        }
        CorpusManifest::new(entries, base_dir)
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<CorpusManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| AaiError::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    CorpusManifest::parse(&text, base)
}

pub fn save_manifest(path: impl AsRef<Path>, manifest: &CorpusManifest) -> Result<()> {
    super::format::write_bytes(path.as_ref(), manifest.to_text().as_bytes())
}

/// Deterministic RNG keyed by (seed, subject, purpose), so adding a subject
/// never changes another subject's draws.
pub fn subject_rng(seed: u64, subject: &str, purpose: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((subject.len() as u64).to_le_bytes());
    h.update(subject.as_bytes());
    h.update(purpose.as_bytes());
    let digest: [u8; 32] = h.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

fn indices_by_subject<F>(manifest: &CorpusManifest, keep: F) -> BTreeMap<String, Vec<usize>>
where
    F: Fn(&ManifestEntry) -> bool,
{
    let mut map: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, e) in manifest.entries.iter().enumerate() {
        if keep(e) {
            map.entry(e.subject_id.clone()).or_default().push(i);
        }
    }
    map
}

/// Per-subject uniform train/test split. Clears any fold assignment.
pub fn split_seen(manifest: &CorpusManifest, test_fraction: f64, seed: u64) -> Result<CorpusManifest> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(AaiError::invalid(format!(
            "test fraction {test_fraction} outside [0, 1)"
        )));
    }
    let mut out = manifest.clone();
    for (subject, mut idx) in indices_by_subject(manifest, |_| true) {
        let n = idx.len();
        let mut n_test = (n as f64 * test_fraction).round() as usize;
        if test_fraction > 0.0 && n >= 2 {
            n_test = n_test.clamp(1, n - 1);
        }
        idx.shuffle(&mut subject_rng(seed, &subject, "split"));
        for (rank, &i) in idx.iter().enumerate() {
            let e = &mut out.entries[i];
            e.split = Some(if rank < n_test { Split::Test } else { Split::Train });
            e.fold = None;
        }
    }
    Ok(out)
}

/// Deals each subject's train utterances into `k` near-equal folds.
pub fn assign_folds(manifest: &CorpusManifest, k: usize, seed: u64) -> Result<CorpusManifest> {
    if k == 0 {
        return Err(AaiError::invalid("fold count must be at least 1"));
    }
    let mut out = manifest.clone();
    for e in &mut out.entries {
        e.fold = None;
    }
    let by_subject = indices_by_subject(manifest, |e| e.split == Some(Split::Train));
    for s in manifest.subjects() {
        let n = by_subject.get(&s).map_or(0, Vec::len);
        if n < k {
            return Err(AaiError::config(format!(
                "subject '{s}' has {n} train utterances, fewer than {k} folds"
            )));
        }
    }
    for (subject, mut idx) in by_subject {
        idx.shuffle(&mut subject_rng(seed, &subject, "folds"));
        for (rank, &i) in idx.iter().enumerate() {
            out.entries[i].fold = Some(rank % k);
        }
    }
    Ok(out)
}
