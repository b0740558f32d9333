//! File-format round trips, normalization and alignment properties.

use aai_core::featio::{
    align_frame_rate, assign_folds, mvn_utterance, read_embedding_file, read_feature_file, split_seen,
    write_embedding_file, write_feature_file, CorpusManifest, FeatureSequence, Group, ManifestEntry, SpeakerEmbedding,
    Split,
};
use ndarray::Array2;
use proptest::prelude::*;

fn matrix() -> impl Strategy<Value = Array2<f64>> {
    (1usize..40, 1usize..12).prop_flat_map(|(t, d)| {
        prop::collection::vec(-1e6f32..1e6f32, t * d)
            .prop_map(move |v| Array2::from_shape_vec((t, d), v.into_iter().map(f64::from).collect()).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn feature_file_round_trip(frames in matrix(), rate in 1.0f32..50000.0, tag in "[a-z0-9_]{0,12}") {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.aaif");
        let seq = FeatureSequence::new(frames, f64::from(rate), tag).unwrap();
        write_feature_file(&path, &seq).unwrap();
        let back = read_feature_file(&path).unwrap();
        prop_assert_eq!(&back, &seq);
        let bytes = std::fs::read(&path).unwrap();
        write_feature_file(&path, &back).unwrap();
        prop_assert_eq!(std::fs::read(&path).unwrap(), bytes);
    }

    #[test]
    fn embedding_round_trip(values in prop::collection::vec(-10.0f32..10.0, 1..64), id in "[A-Z]{1,3}[0-9]{2}") {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.aaix");
        let emb = SpeakerEmbedding::new(values.into_iter().map(f64::from).collect(), id).unwrap();
        write_embedding_file(&path, &emb).unwrap();
        prop_assert_eq!(read_embedding_file(&path).unwrap(), emb);
    }

    #[test]
    fn mvn_is_idempotent(frames in matrix()) {
        let seq = FeatureSequence::new(frames, 100.0, "t").unwrap();
        let once = mvn_utterance(&seq);
        let twice = mvn_utterance(&once);
        for (a, b) in once.frames().iter().zip(twice.frames().iter()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        for col in once.frames().columns() {
            let mean = col.sum() / col.len() as f64;
            prop_assert!(mean.abs() < 1e-9);
        }
    }

    #[test]
    fn alignment_keeps_ramps(t in 2usize..200, target in 1usize..300, slope in -5.0f64..5.0, offset in -5.0f64..5.0) {
        let frames = Array2::from_shape_fn((t, 2), |(i, c)| if c == 0 { offset + slope * i as f64 } else { 1.0 });
        let seq = FeatureSequence::new(frames, 49.0, "ssl").unwrap();
        let out = align_frame_rate(&seq, 100.0, target).unwrap();
        prop_assert_eq!(out.n_frames(), target);
        let col = out.frames().column(0);
        let last = offset + slope * (t - 1) as f64;
        if target >= 2 {
            prop_assert!((col[0] - offset).abs() < 1e-9);
            prop_assert!((col[target - 1] - last).abs() < 1e-9);
            let step = (last - offset) / (target - 1) as f64;
            for i in 1..target {
                prop_assert!((col[i] - col[i - 1] - step).abs() < 1e-9);
            }
        }
        prop_assert!(out.frames().column(1).iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn splits_and_folds_partition(counts in prop::collection::vec(6usize..40, 1..5), seed in 0u64..500) {
        let mut entries = Vec::new();
        for (s, n) in counts.iter().enumerate() {
            for i in 0..*n {
                entries.push(ManifestEntry {
                    utterance_id: format!("S{s}_{i}"),
                    subject_id: format!("S{s}"),
                    group: Group::Healthy,
                    acoustic_path: "a".into(),
                    articulatory_path: "b".into(),
                    embedding_path: "c".into(),
                    split: None,
                    fold: None,
                });
            }
        }
        let m = CorpusManifest::new(entries, ".").unwrap();
        let m = assign_folds(&split_seen(&m, 0.1, seed).unwrap(), 5, seed).unwrap();
        m.check_seen().unwrap();
        for (s, n) in counts.iter().enumerate() {
            let subject = format!("S{s}");
            let mine: Vec<&ManifestEntry> = m.of_subject(&subject).collect();
            prop_assert_eq!(mine.len(), *n);
            let test = mine.iter().filter(|e| e.split == Some(Split::Test)).count();
            prop_assert_eq!(test, ((*n as f64) * 0.1).round().clamp(1.0, (*n - 1) as f64) as usize);
            let mut sizes = [0usize; 5];
            for e in mine.iter().filter(|e| e.split == Some(Split::Train)) {
                sizes[e.fold.unwrap()] += 1;
            }
            let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
            prop_assert!(*lo >= 1 && hi - lo <= 1, "{:?}", sizes);
        }
    }
}

#[test]
fn align_equal_length_is_bitwise_identity() {
    let frames = Array2::from_shape_fn((7, 3), |(i, j)| (i * 3 + j) as f64 * 0.1);
    let seq = FeatureSequence::new(frames, 100.0, "x").unwrap();
    assert_eq!(align_frame_rate(&seq, 100.0, 7).unwrap(), seq);
    assert!(align_frame_rate(&seq, 100.0, 0).is_err());
}
