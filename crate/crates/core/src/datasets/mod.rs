//! Bit-exact dataset parsers, the derived concept tasks, concept-label
//! corruption and seeded splits.

pub mod cifar;
pub mod concept;
pub mod idx;
pub mod raw;
pub mod task;

pub use cifar::{encode_cifar10_batch, parse_cifar10_batch, CifarRecord, CIFAR_PIXELS, CIFAR_RECORD};
pub use concept::{
    corrupt_concept_labels, derive_concept_dataset, split_indices, split_train_val, ConceptDataset, MissingnessSpec,
};
pub use idx::{encode_idx_images, encode_idx_labels, parse_idx_images, parse_idx_labels, IdxImages};
pub use raw::{expected_files, load_raw, RawDataset, Split};
pub use task::{Source, Task};
