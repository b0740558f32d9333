use std::collections::HashMap;
use std::path::PathBuf;

use ndarray::Array1;

use crate::artic::{
    augment_kinematics, preprocess_trajectory, ArticulatoryTrajectory, N_AUGMENTED, N_POSITION, RAW_RATE_HZ,
    TARGET_RATE_HZ,
};
use crate::error::{AaiError, Result};
use crate::featio::{
    align_frame_rate, mvn_utterance, read_embedding_file, read_feature_file, CorpusManifest, FeatureSequence,
    ManifestEntry, SpeakerEmbedding, Split,
};
use crate::net::Utterance;

/// A manifest with every utterance loaded, normalized and aligned.
///
/// Targets are the 24-column augmented trajectories at 100 Hz; inputs are the
/// acoustic features resampled to the target frame count. Both are
/// mean/variance normalized per utterance.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub manifest: CorpusManifest,
    pub feature_tag: String,
    utterances: Vec<Utterance>,
    index: HashMap<String, usize>,
}

/// Articulatory file → 24-column 100 Hz trajectory. Raw 200 Hz 12-channel
/// files are preprocessed, 100 Hz 12-channel files are only augmented and
/// 24-column files are taken as they are.
pub fn load_targets(seq: &FeatureSequence) -> Result<FeatureSequence> {
    let frames = match (seq.dim(), seq.frame_rate_hz()) {
        (N_POSITION, r) if r == RAW_RATE_HZ => augment_kinematics(&preprocess_trajectory(seq.frames())?).into_frames(),
        (N_POSITION, r) if r == TARGET_RATE_HZ => {
            augment_kinematics(&ArticulatoryTrajectory::new(seq.frames().clone())?).into_frames()
        }
        (N_AUGMENTED, r) if r == TARGET_RATE_HZ => seq.frames().clone(),
        (d, r) => {
            return Err(AaiError::invalid(format!(
                "articulatory file has {d} columns at {r} Hz; expected 12 at 200/100 Hz or 24 at 100 Hz"
            )))
        }
    };
    FeatureSequence::new(frames, TARGET_RATE_HZ, seq.source_tag())
}

fn with_path(e: AaiError, path: &std::path::Path) -> AaiError {
    match e {
        AaiError::InvalidArgument(m) => AaiError::Format {
            path: path.to_path_buf(),
            offset: 0,
            msg: m,
        },
        other => other,
    }
}

impl Corpus {
    /// Loads every manifest entry. Acoustic files must carry `feature_tag`.
    pub fn load(manifest: CorpusManifest, feature_tag: &str) -> Result<Self> {
        let mut embeddings: HashMap<PathBuf, SpeakerEmbedding> = HashMap::new();
        let mut utterances = Vec::with_capacity(manifest.entries.len());
        let mut index = HashMap::new();
        let mut dims: Option<(usize, usize)> = None;
        for e in &manifest.entries {
            let ac_path = manifest.resolve(&e.acoustic_path);
            let acoustic = read_feature_file(&ac_path)?;
            if acoustic.source_tag() != feature_tag {
                return Err(AaiError::Incompatible(format!(
                    "{} holds '{}' features, configuration expects '{feature_tag}'",
                    ac_path.display(),
                    acoustic.source_tag()
                )));
            }
            let art_path = manifest.resolve(&e.articulatory_path);
            let targets = load_targets(&read_feature_file(&art_path)?).map_err(|err| with_path(err, &art_path))?;
            let n = targets.n_frames();
            let aligned = if acoustic.n_frames() == n && acoustic.frame_rate_hz() == TARGET_RATE_HZ {
                acoustic
            } else {
                align_frame_rate(&acoustic, TARGET_RATE_HZ, n).map_err(|err| with_path(err, &ac_path))?
            };
            let emb_path = manifest.resolve(&e.embedding_path);
            if !embeddings.contains_key(&emb_path) {
                let emb = read_embedding_file(&emb_path)?;
                embeddings.insert(emb_path.clone(), emb);
            }
            let emb = &embeddings[&emb_path];
            let d = (aligned.dim(), emb.dim());
            match dims {
                None => dims = Some(d),
                Some(prev) if prev != d => {
                    return Err(AaiError::Format {
                        path: ac_path,
                        offset: 0,
                        msg: format!(
                            "utterance '{}' has feature/embedding dims {:?}, earlier utterances {:?}",
                            e.utterance_id, d, prev
                        ),
                    })
                }
                _ => {}
            }
            index.insert(e.utterance_id.clone(), utterances.len());
            utterances.push(Utterance {
                id: e.utterance_id.clone(),
                inputs: mvn_utterance(&aligned).into_frames(),
                embedding: Array1::from(emb.values.clone()),
                targets: mvn_utterance(&targets).into_frames(),
            });
        }
        if utterances.is_empty() {
            return Err(AaiError::config("manifest has no utterances"));
        }
        Ok(Corpus {
            manifest,
            feature_tag: feature_tag.to_string(),
            utterances,
            index,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.utterances[0].inputs.ncols()
    }

    pub fn embedding_dim(&self) -> usize {
        self.utterances[0].embedding.len()
    }

    pub fn utterance(&self, id: &str) -> Option<&Utterance> {
        self.index.get(id).map(|&i| &self.utterances[i])
    }

    pub fn entry(&self, id: &str) -> Option<&ManifestEntry> {
        self.index.get(id).map(|&i| &self.manifest.entries[i])
    }

    /// Entries matching `keep`, in manifest order.
    pub fn select<F>(&self, keep: F) -> Vec<&ManifestEntry>
    where
        F: Fn(&ManifestEntry) -> bool,
    {
        self.manifest.entries.iter().filter(|e| keep(e)).collect()
    }

    pub fn clone_utterances(&self, entries: &[&ManifestEntry]) -> Vec<Utterance> {
        entries
            .iter()
            .map(|e| self.utterances[self.index[&e.utterance_id]].clone())
            .collect()
    }

    /// Number of folds in the train split (largest fold index + 1).
    pub fn n_folds(&self) -> usize {
        self.manifest
            .entries
            .iter()
            .filter(|e| e.split == Some(Split::Train))
            .filter_map(|e| e.fold)
            .max()
            .map_or(0, |f| f + 1)
    }
}
