use std::path::PathBuf;

use proptest::prelude::*;
use scbm::datasets::{
    encode_cifar10_batch, encode_idx_images, encode_idx_labels, expected_files, load_raw, parse_cifar10_batch,
    parse_idx_images, parse_idx_labels, CifarRecord, IdxImages, Source, Split, CIFAR_RECORD,
};
use scbm::Error;

fn data_root() -> PathBuf {
    std::env::var_os("SCBM_DATA_ROOT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

fn have(source: Source) -> bool {
    let root = data_root();
    [Split::Train, Split::Test]
        .iter()
        .flat_map(|&s| expected_files(&root, source, s))
        .all(|p| p.exists())
}

#[test]
fn mnist_golden() {
    if !have(Source::Mnist) {
        eprintln!("MNIST not found under {}, skipping", data_root().display());
        return;
    }
    let train = load_raw::<f32>(&data_root(), Source::Mnist, Split::Train).unwrap();
    let test = load_raw::<f32>(&data_root(), Source::Mnist, Split::Test).unwrap();
    assert_eq!((train.len(), test.len()), (60000, 10000));
    assert_eq!(train.labels()[0], 5);
    assert_eq!(test.labels()[0], 7);
    assert_eq!(train.images().cols(), 784);
    assert!(train.images().as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
}

#[test]
fn fashion_mnist_golden() {
    if !have(Source::FashionMnist) {
        eprintln!("FashionMNIST not found under {}, skipping", data_root().display());
        return;
    }
    let train = load_raw::<f32>(&data_root(), Source::FashionMnist, Split::Train).unwrap();
    let test = load_raw::<f32>(&data_root(), Source::FashionMnist, Split::Test).unwrap();
    assert_eq!((train.len(), test.len()), (60000, 10000));
    let mut counts = [0usize; 10];
    for &l in train.labels() {
        counts[l as usize] += 1;
    }
    assert_eq!(counts, [6000; 10]);
}

#[test]
fn wrong_magic_is_a_format_error() {
    let mut labels = encode_idx_labels(&[1, 2, 3]);
    labels[3] = 0x03;
    assert!(matches!(parse_idx_labels(&labels), Err(Error::Format(_))));
    let images = IdxImages {
        count: 1,
        rows: 2,
        cols: 2,
        pixels: vec![0, 1, 2, 3],
    };
    let mut bytes = encode_idx_images(&images);
    bytes[2] = 0x09;
    assert!(matches!(parse_idx_images(&bytes), Err(Error::Format(_))));
}

#[test]
fn truncation_reports_sizes() {
    let bytes = encode_idx_labels(&[1, 2, 3]);
    match parse_idx_labels(&bytes[..bytes.len() - 2]) {
        Err(Error::Truncated { expected, actual }) => assert_eq!((expected, actual), (11, 9)),
        other => panic!("{other:?}"),
    }
    assert!(matches!(parse_idx_labels(&bytes[..5]), Err(Error::Truncated { .. })));
    assert!(matches!(parse_idx_images(&[0, 0, 8, 3]), Err(Error::Truncated { .. })));
}

#[test]
fn out_of_range_label_rejected() {
    assert!(matches!(parse_idx_labels(&encode_idx_labels(&[3, 10])), Err(Error::Validation(_))));
}

#[test]
fn cifar_record_length_enforced() {
    assert_eq!(CIFAR_RECORD, 3073);
    let rec = CifarRecord {
        label: 9,
        pixels: (0..3072).map(|i| (i % 251) as u8).collect(),
    };
    let bytes = encode_cifar10_batch(&[rec.clone(), rec.clone()]);
    assert_eq!(bytes.len(), 6146);
    assert_eq!(parse_cifar10_batch(&bytes).unwrap(), vec![rec.clone(), rec]);
    for cut in [1, 3072, 3074] {
        assert!(parse_cifar10_batch(&bytes[..bytes.len() - cut]).is_err(), "{cut}");
    }
    let mut bad_label = bytes.clone();
    bad_label[0] = 10;
    assert!(matches!(parse_cifar10_batch(&bad_label), Err(Error::Validation(_))));
}

#[test]
fn missing_files_are_all_listed() {
    let dir = tempfile::tempdir().unwrap();
    match load_raw::<f32>(dir.path(), Source::Cifar10, Split::Train) {
        Err(Error::MissingData { paths, .. }) => assert_eq!(paths.len(), 5),
        other => panic!("{other:?}"),
    }
    match load_raw::<f32>(dir.path(), Source::Mnist, Split::Test) {
        Err(Error::MissingData { paths, .. }) => assert_eq!(paths.len(), 2),
        other => panic!("{other:?}"),
    }
}

proptest! {
    #[test]
    fn idx_round_trip(count in 0usize..5, rows in 1usize..6, cols in 1usize..6, seed in any::<u8>()) {
        let pixels: Vec<u8> = (0..count * rows * cols).map(|i| (i as u8).wrapping_mul(31).wrapping_add(seed)).collect();
        let images = IdxImages { count, rows, cols, pixels };
        prop_assert_eq!(parse_idx_images(&encode_idx_images(&images)).unwrap(), images);
    }

    #[test]
    fn any_truncation_is_caught(labels in prop::collection::vec(0u8..10, 1..30), cut in 1usize..30) {
        let bytes = encode_idx_labels(&labels);
        let cut = cut.min(bytes.len());
        prop_assert!(parse_idx_labels(&bytes[..bytes.len() - cut]).is_err());
    }
}
