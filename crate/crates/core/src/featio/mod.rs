//! Feature sequences, the binary feature/embedding file formats, corpus
//! manifests, and per-utterance normalization and alignment.

pub(crate) mod format;
mod manifest;
mod sequence;

pub use format::{
    read_embedding_file, read_feature_file, write_embedding_file, write_feature_file,
    EMBEDDING_MAGIC, FEATURE_MAGIC, FORMAT_VERSION,
};
pub use manifest::{
    assign_folds, load_manifest, save_manifest, split_seen, subject_rng, CorpusManifest, Group,
    ManifestEntry, Split,
};
pub use sequence::{align_frame_rate, mvn_utterance, FeatureSequence, SpeakerEmbedding, MVN_EPS};
