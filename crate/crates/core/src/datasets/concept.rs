use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::raw::RawDataset;
use super::task::Task;
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::scalar::Scalar;

/// A derived task over a row-index view of shared images.
///
/// `concepts` always holds the true one-hot class vector; missingness lives
/// only in `concept_present`.
#[derive(Debug, Clone)]
pub struct ConceptDataset<T> {
    images: Arc<Matrix<T>>,
    rows: Vec<usize>,
    target_labels: Vec<usize>,
    concepts: Matrix<u8>,
    concept_present: Vec<bool>,
    task: Task,
}

impl<T: Scalar> ConceptDataset<T> {
    /// Assembles a dataset over row indices into `images`.
    pub fn from_parts(
        images: Arc<Matrix<T>>,
        rows: Vec<usize>,
        target_labels: Vec<usize>,
        concepts: Matrix<u8>,
        concept_present: Vec<bool>,
        task: Task,
    ) -> Result<Self> {
        let n = rows.len();
        if target_labels.len() != n || concepts.rows() != n || concept_present.len() != n {
            return Err(Error::Shape(format!(
                "{n} rows with {} targets, {} concept rows, {} presence flags",
                target_labels.len(),
                concepts.rows(),
                concept_present.len()
            )));
        }
        if concepts.cols() != Task::CONCEPTS || images.cols() != task.source().input_dim() {
            return Err(Error::Shape(format!(
                "{} concepts over {}-wide images for {}",
                concepts.cols(),
                images.cols(),
                task.display_name()
            )));
        }
        if let Some(&r) = rows.iter().find(|&&r| r >= images.rows()) {
            return Err(Error::Validation(format!("row {r} outside {} images", images.rows())));
        }
        if let Some(&y) = target_labels.iter().find(|&&y| y >= Task::TARGETS) {
            return Err(Error::Validation(format!("target label {y} out of range")));
        }
        if concepts.as_slice().iter().any(|&b| b > 1) {
            return Err(Error::Validation("concept labels must be 0 or 1".into()));
        }
        Ok(Self {
            images,
            rows,
            target_labels,
            concepts,
            concept_present,
            task,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn input_dim(&self) -> usize {
        self.images.cols()
    }

    pub fn n_concepts(&self) -> usize {
        self.concepts.cols()
    }

    pub fn n_targets(&self) -> usize {
        Task::TARGETS
    }

    pub fn image(&self, i: usize) -> &[T] {
        self.images.row(self.rows[i])
    }

    pub fn target_labels(&self) -> &[usize] {
        &self.target_labels
    }

    pub fn concepts(&self) -> &Matrix<u8> {
        &self.concepts
    }

    pub fn concept_present(&self) -> &[bool] {
        &self.concept_present
    }

    pub fn present_count(&self) -> usize {
        self.concept_present.iter().filter(|&&p| p).count()
    }

    /// Indices of the rows whose concept vector survived corruption.
    pub fn present_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.concept_present[i]).collect()
    }

    /// Images of the given rows, in order.
    pub fn gather_images(&self, indices: &[usize]) -> Matrix<T> {
        let d = self.input_dim();
        let mut data = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            data.extend_from_slice(self.image(i));
        }
        Matrix::from_vec(indices.len(), d, data).expect("sized above")
    }

    /// Concept bits of the given rows as 0/1 reals.
    pub fn gather_concepts(&self, indices: &[usize]) -> Matrix<T> {
        let c = self.n_concepts();
        let mut data = Vec::with_capacity(indices.len() * c);
        for &i in indices {
            data.extend(self.concepts.row(i).iter().map(|&b| T::lit(b as f64)));
        }
        Matrix::from_vec(indices.len(), c, data).expect("sized above")
    }

    pub fn gather_targets(&self, indices: &[usize]) -> Vec<usize> {
        indices.iter().map(|&i| self.target_labels[i]).collect()
    }

    pub fn gather_present(&self, indices: &[usize]) -> Vec<bool> {
        indices.iter().map(|&i| self.concept_present[i]).collect()
    }

    /// Rows `indices` as a new dataset sharing the same image storage.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            images: Arc::clone(&self.images),
            rows: indices.iter().map(|&i| self.rows[i]).collect(),
            target_labels: self.gather_targets(indices),
            concepts: self.concepts.select_rows(indices),
            concept_present: self.gather_present(indices),
            task: self.task,
        }
    }

    /// The first `n` rows (all rows when `n >= len`).
    pub fn head(&self, n: usize) -> Self {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.subset(&idx)
    }

    pub fn with_presence(&self, concept_present: Vec<bool>) -> Result<Self> {
        if concept_present.len() != self.len() {
            return Err(Error::Shape(format!(
                "{} presence flags for {} rows",
                concept_present.len(),
                self.len()
            )));
        }
        Ok(Self {
            concept_present,
            ..self.clone()
        })
    }

    /// Whether two datasets view the same image storage.
    pub fn shares_images_with(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.images, &other.images)
    }
}

/// One-hot concepts at the original class, targets from the task map.
pub fn derive_concept_dataset<T: Scalar>(raw: &RawDataset<T>, task: Task) -> Result<ConceptDataset<T>> {
    if raw.source() != task.source() {
        return Err(Error::Validation(format!(
            "{} is derived from {}, got {} data",
            task.display_name(),
            task.source(),
            raw.source()
        )));
    }
    let n = raw.len();
    let mut concepts = Matrix::filled(n, Task::CONCEPTS, 0u8);
    let mut targets = Vec::with_capacity(n);
    for (i, &label) in raw.labels().iter().enumerate() {
        concepts[(i, label as usize)] = 1;
        targets.push(task.target_of(label as usize));
    }
    Ok(ConceptDataset {
        images: Arc::clone(raw.images()),
        rows: (0..n).collect(),
        target_labels: targets,
        concepts,
        concept_present: vec![true; n],
        task,
    })
}

/// Probability of withholding a datapoint's whole concept vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MissingnessSpec {
    pub p: f64,
    pub seed: u64,
}

impl MissingnessSpec {
    pub fn new(p: f64, seed: u64) -> Result<Self> {
        let spec = Self { p, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::Validation(format!(
                "missingness probability {} outside [0, 1]",
                self.p
            )));
        }
        Ok(())
    }
}

/// Clears `concept_present` for each row independently with probability `p`.
/// Rows already missing stay missing.
pub fn corrupt_concept_labels<T: Scalar>(ds: &ConceptDataset<T>, spec: MissingnessSpec) -> Result<ConceptDataset<T>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let present = ds
        .concept_present()
        .iter()
        .map(|&was| {
            let drop = rng.random::<f64>() < spec.p;
            was && !drop
        })
        .collect();
    ds.with_presence(present)
}

/// Seeded disjoint partition of `0..n` into sorted (train, val) index lists,
/// with `round(n * val_fraction)` validation rows.
pub fn split_indices(n: usize, val_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::Validation(format!(
            "validation fraction {val_fraction} outside (0, 1)"
        )));
    }
    let n_val = (n as f64 * val_fraction).round() as usize;
    if n_val == 0 || n_val >= n {
        return Err(Error::Validation(format!(
            "splitting {n} rows with fraction {val_fraction} leaves an empty side"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut val = order[..n_val].to_vec();
    let mut train = order[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    Ok((train, val))
}

pub fn split_train_val<T: Scalar>(
    ds: &ConceptDataset<T>,
    val_fraction: f64,
    seed: u64,
) -> Result<(ConceptDataset<T>, ConceptDataset<T>)> {
    let (train, val) = split_indices(ds.len(), val_fraction, seed)?;
    Ok((ds.subset(&train), ds.subset(&val)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::Source;
    use proptest::prelude::*;

    fn synthetic(n: usize, source: Source) -> RawDataset<f64> {
        let d = source.input_dim();
        let pixels: Vec<u8> = (0..n * d).map(|i| (i % 251) as u8).collect();
        let labels = (0..n).map(|i| (i % 10) as u8).collect();
        RawDataset::from_bytes(&pixels, labels, source).unwrap()
    }

    #[test]
    fn mnist_three_is_odd() {
        let raw = synthetic(10, Source::Mnist);
        let ds = derive_concept_dataset(&raw, Task::ParityMnist).unwrap();
        assert_eq!(ds.target_labels()[3], 1);
        assert_eq!(ds.concepts().row(3), &[0, 0, 0, 1, 0, 0, 0, 0, 0, 0]);
        assert!(ds.concept_present().iter().all(|&p| p));
    }

    #[test]
    fn source_mismatch() {
        let raw = synthetic(4, Source::Mnist);
        assert!(matches!(
            derive_concept_dataset(&raw, Task::InOutFashionMnist),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn full_pixel_is_one() {
        let raw = RawDataset::<f64>::from_bytes(&[255u8; 784], vec![0], Source::Mnist).unwrap();
        assert_eq!(raw.images()[(0, 0)], 1.0);
    }

    #[test]
    fn corruption_extremes() {
        let ds = derive_concept_dataset(&synthetic(50, Source::Mnist), Task::ParityMnist).unwrap();
        let none = corrupt_concept_labels(&ds, MissingnessSpec::new(0.0, 1).unwrap()).unwrap();
        assert_eq!(none.present_count(), 50);
        let all = corrupt_concept_labels(&ds, MissingnessSpec::new(1.0, 1).unwrap()).unwrap();
        assert_eq!(all.present_count(), 0);
        assert_eq!(all.concepts(), ds.concepts());
        assert!(all.shares_images_with(&ds));
        assert!(MissingnessSpec::new(1.5, 0).is_err());
        assert!(MissingnessSpec::new(-0.1, 0).is_err());
    }

    #[test]
    fn ten_rows_split_nine_one() {
        let (train, val) = split_indices(10, 0.1, 7).unwrap();
        assert_eq!((train.len(), val.len()), (9, 1));
        assert_eq!(split_indices(10, 0.1, 7).unwrap(), (train, val));
        assert!(split_indices(4, 0.1, 0).is_err());
        assert!(split_indices(10, 0.0, 0).is_err());
    }

    #[test]
    fn split_subsets_share_storage() {
        let ds = derive_concept_dataset(&synthetic(20, Source::Mnist), Task::ParityMnist).unwrap();
        let (train, val) = split_train_val(&ds, 0.25, 3).unwrap();
        assert_eq!(train.len() + val.len(), 20);
        assert!(train.shares_images_with(&val));
        let idx = split_indices(20, 0.25, 3).unwrap().1;
        assert_eq!(val.image(0), ds.image(idx[0]));
        assert_eq!(val.target_labels()[0], ds.target_labels()[idx[0]]);
    }

    proptest! {
        #[test]
        fn split_is_partition(n in 2usize..300, frac in 0.05f64..0.95, seed in any::<u64>()) {
            let n_val = (n as f64 * frac).round() as usize;
            prop_assume!(n_val > 0 && n_val < n);
            let (train, val) = split_indices(n, frac, seed).unwrap();
            let mut all: Vec<usize> = train.iter().chain(&val).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }
}
