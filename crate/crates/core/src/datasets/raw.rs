use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::cifar::{parse_cifar10_batch, CIFAR_PIXELS};
use super::idx::{parse_idx_images, parse_idx_labels};
use super::task::Source;
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

/// Base images scaled to `[0, 1]` with their original class labels.
#[derive(Debug, Clone)]
pub struct RawDataset<T> {
    images: Arc<Matrix<T>>,
    labels: Vec<u8>,
    source: Source,
}

impl<T: Scalar> RawDataset<T> {
    pub fn new(images: Matrix<T>, labels: Vec<u8>, source: Source) -> Result<Self> {
        if images.rows() == 0 {
            return Err(Error::Validation("dataset has no images".into()));
        }
        if images.cols() != source.input_dim() {
            return Err(Error::Shape(format!(
                "{source} images need {} values each, got {}",
                source.input_dim(),
                images.cols()
            )));
        }
        if labels.len() != images.rows() {
            return Err(Error::Shape(format!(
                "{} labels for {} images",
                labels.len(),
                images.rows()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 9) {
            return Err(Error::Validation(format!("label {bad} outside 0..=9")));
        }
        Ok(Self {
            images: Arc::new(images),
            labels,
            source,
        })
    }

    /// Pixel bytes divided by 255.
    pub fn from_bytes(pixels: &[u8], labels: Vec<u8>, source: Source) -> Result<Self> {
        let d = source.input_dim();
        if pixels.len() % d != 0 {
            return Err(Error::Shape(format!(
                "{} pixel bytes is not a whole number of {d}-byte images",
                pixels.len()
            )));
        }
        let scale = T::lit(255.0);
        let data = pixels.iter().map(|&b| T::lit(b as f64) / scale).collect();
        Self::new(Matrix::from_vec(pixels.len() / d, d, data)?, labels, source)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn images(&self) -> &Arc<Matrix<T>> {
        &self.images
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn source(&self) -> Source {
        self.source
    }
}

/// Files expected under `data_root` for one split of `source`.
pub fn expected_files(data_root: &Path, source: Source, split: Split) -> Vec<PathBuf> {
    let (dir, names): (&str, Vec<String>) = match (source, split) {
        (Source::Mnist, Split::Train) => ("mnist", idx_names("train")),
        (Source::Mnist, Split::Test) => ("mnist", idx_names("t10k")),
        (Source::FashionMnist, Split::Train) => ("fashion-mnist", idx_names("train")),
        (Source::FashionMnist, Split::Test) => ("fashion-mnist", idx_names("t10k")),
        (Source::Cifar10, Split::Train) => (
            "cifar-10-batches-bin",
            (1..=5).map(|i| format!("data_batch_{i}.bin")).collect(),
        ),
        (Source::Cifar10, Split::Test) => ("cifar-10-batches-bin", vec!["test_batch.bin".into()]),
    };
    names.into_iter().map(|n| data_root.join(dir).join(n)).collect()
}

fn idx_names(prefix: &str) -> Vec<String> {
    vec![
        format!("{prefix}-images-idx3-ubyte"),
        format!("{prefix}-labels-idx1-ubyte"),
    ]
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Reads one split from disk. All expected files are checked up front so a
/// missing download is reported in full.
pub fn load_raw<T: Scalar>(data_root: &Path, source: Source, split: Split) -> Result<RawDataset<T>> {
    let files = expected_files(data_root, source, split);
    let missing: Vec<PathBuf> = files.iter().filter(|p| !p.is_file()).cloned().collect();
    if !missing.is_empty() {
        return Err(Error::MissingData {
            root: data_root.to_path_buf(),
            paths: missing,
        });
    }
    match source {
        Source::Mnist | Source::FashionMnist => {
            let images = parse_idx_images(&read(&files[0])?)?;
            let labels = parse_idx_labels(&read(&files[1])?)?;
            if images.image_len() != source.input_dim() {
                return Err(Error::Format(format!(
                    "{}: {}x{} images, expected 28x28",
                    files[0].display(),
                    images.rows,
                    images.cols
                )));
            }
            if images.count != labels.len() {
                return Err(Error::Format(format!(
                    "{} images but {} labels",
                    images.count,
                    labels.len()
                )));
            }
            RawDataset::from_bytes(&images.pixels, labels, source)
        }
        Source::Cifar10 => {
            let mut pixels = Vec::new();
            let mut labels = Vec::new();
            for f in &files {
                for rec in parse_cifar10_batch(&read(f)?)? {
                    labels.push(rec.label);
                    pixels.extend_from_slice(&rec.pixels);
                }
            }
            debug_assert_eq!(pixels.len(), labels.len() * CIFAR_PIXELS);
            RawDataset::from_bytes(&pixels, labels, source)
        }
    }
}
