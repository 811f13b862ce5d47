use std::path::PathBuf;

use nsp::idx::{self, IdxImages};
use nsp::weights::{blob_path, load_weights, load_weights_for, round_to_f32, save_weights};
use nsp::Error;
use nsp_core::annet::{Architecture, WeightMeta, WeightStore};
use nsp_core::CombinedScale;
use proptest::prelude::*;

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn meta() -> WeightMeta {
    WeightMeta { scale: CombinedScale::new(201.0, 5.0).unwrap(), input_rate: 100.0, init_seed: 7, stages: Vec::new() }
}

#[test]
fn bundled_digits_load() {
    let d = data_dir();
    let ds = idx::load_idx(
        &d.join("mnist-10k-images-idx3-ubyte.gz"),
        &d.join("mnist-10k-labels-idx1-ubyte.gz"),
    )
    .unwrap();
    assert_eq!(ds.len(), 10000);
    assert_eq!((ds.rows, ds.cols), (28, 28));
    assert!(ds.images.iter().all(|p| (0.0..=1.0).contains(p)));
    assert!(ds.class_counts().iter().all(|&c| c > 800));
}

#[test]
fn gz_and_plain_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let images = IdxImages { count: 2, rows: 3, cols: 2, pixels: (0..12).map(|i| i * 20).collect() };
    for name in ["a-idx3-ubyte", "a-idx3-ubyte.gz"] {
        let p = dir.path().join(name);
        idx::write_images(&p, &images).unwrap();
        assert_eq!(idx::read_images(&p).unwrap(), images);
    }
    let lp = dir.path().join("l.gz");
    idx::write_labels(&lp, &[4, 2]).unwrap();
    assert_eq!(idx::read_labels(&lp).unwrap(), vec![4, 2]);
}

#[test]
fn truncated_file_names_byte_counts() {
    let dir = tempfile::tempdir().unwrap();
    let images = IdxImages { count: 4, rows: 5, cols: 5, pixels: vec![9; 100] };
    let mut bytes = idx::encode_images(&images);
    bytes.truncate(70);
    let p = dir.path().join("cut");
    std::fs::write(&p, &bytes).unwrap();
    let err = idx::read_images(&p).unwrap_err();
    assert!(matches!(err, Error::Truncated { expected: 116, actual: 70, .. }));
    let msg = err.to_string();
    assert!(msg.contains("116") && msg.contains("70"), "{msg}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn load_reserialize_is_byte_identical((side, pixels, labels) in (1usize..6).prop_flat_map(|n| {
        (Just(n), prop::collection::vec(any::<u8>(), n * n * 3), prop::collection::vec(0u8..10, 3))
    })) {
        let images = IdxImages { count: 3, rows: side, cols: side, pixels };
        let bytes = idx::encode_images(&images);
        let ds = idx::to_dataset(&idx::parse_images(&bytes, "mem".as_ref()).unwrap(), labels.clone()).unwrap();
        let (back, back_labels) = idx::from_dataset(&ds);
        prop_assert_eq!(idx::encode_images(&back), bytes);
        prop_assert_eq!(back_labels, labels);
    }
}

#[test]
fn weights_round_trip_through_f32() {
    let dir = tempfile::tempdir().unwrap();
    let arch = Architecture::mnist("6c5-2s-12c5-2s-10fc").unwrap();
    let store = WeightStore::glorot(arch.clone(), meta(), 3).unwrap();
    let path = dir.path().join("w.json");
    save_weights(&store, &path).unwrap();
    assert!(blob_path(&path).exists());
    let back = load_weights(&path).unwrap();
    assert_eq!(back, round_to_f32(&store));
    assert_eq!(load_weights_for(&path, &arch).unwrap(), back);
    save_weights(&back, &path).unwrap();
    assert_eq!(load_weights(&path).unwrap(), back);
}

#[test]
fn incompatible_architecture_is_described() {
    let dir = tempfile::tempdir().unwrap();
    let store = WeightStore::glorot(Architecture::mnist("6c5-2s-12c5-2s-10fc").unwrap(), meta(), 3).unwrap();
    let path = dir.path().join("w.json");
    save_weights(&store, &path).unwrap();
    let other = Architecture::mnist("4c5-2s-10fc").unwrap();
    let msg = load_weights_for(&path, &other).unwrap_err().to_string();
    assert!(msg.contains("4c5-2s-10fc") && msg.contains("6c5-2s-12c5-2s-10fc"), "{msg}");
}

#[test]
fn short_blob_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let store = WeightStore::glorot(Architecture::mnist("4c5-2s-10fc").unwrap(), meta(), 1).unwrap();
    let path = dir.path().join("w.json");
    save_weights(&store, &path).unwrap();
    let blob = blob_path(&path);
    let bytes = std::fs::read(&blob).unwrap();
    std::fs::write(&blob, &bytes[..bytes.len() - 4]).unwrap();
    assert!(matches!(load_weights(&path), Err(Error::Truncated { .. })));
}
