#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scbm::datasets::{encode_idx_images, encode_idx_labels, ConceptDataset, IdxImages, Task};
use scbm::nn::Matrix;

/// Class `k` lights up a 4x4 block at a class-specific spot, plus noise.
pub fn synthetic_images(n: usize, seed: u64) -> (IdxImages, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pixels = Vec::with_capacity(n * 784);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = (i % 10) as u8;
        labels.push(label);
        let (by, bx) = (2 + 6 * (label as usize / 4), 2 + 6 * (label as usize % 4));
        for y in 0..28 {
            for x in 0..28 {
                let on = (by..by + 4).contains(&y) && (bx..bx + 4).contains(&x);
                let noise: u8 = rng.random_range(0..40);
                pixels.push(if on { 215 + noise } else { noise });
            }
        }
    }
    (IdxImages { count: n, rows: 28, cols: 28, pixels }, labels)
}

/// MNIST and FashionMNIST layouts under `root`, filled with synthetic images.
pub fn write_synthetic_data(root: &Path, train: usize, test: usize) {
    for (dir, offset) in [("mnist", 0u64), ("fashion-mnist", 100)] {
        let d = root.join(dir);
        std::fs::create_dir_all(&d).unwrap();
        for (stem, n, seed) in [("train", train, offset + 1), ("t10k", test, offset + 2)] {
            let (images, labels) = synthetic_images(n, seed);
            std::fs::write(d.join(format!("{stem}-images-idx3-ubyte")), encode_idx_images(&images)).unwrap();
            std::fs::write(d.join(format!("{stem}-labels-idx1-ubyte")), encode_idx_labels(&labels)).unwrap();
        }
    }
}

/// Concept dataset over synthetic MNIST-shaped images, all concepts present.
pub fn synthetic_dataset(task: Task, n: usize, seed: u64) -> ConceptDataset<f64> {
    let (images, labels) = synthetic_images(n, seed);
    let data: Vec<f64> = images.pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
    let mut concepts = Matrix::filled(n, Task::CONCEPTS, 0u8);
    for (i, &l) in labels.iter().enumerate() {
        concepts[(i, l as usize)] = 1;
    }
    ConceptDataset::from_parts(
        Arc::new(Matrix::from_vec(n, 784, data).unwrap()),
        (0..n).collect(),
        labels.iter().map(|&l| task.target_of(l as usize)).collect(),
        concepts,
        vec![true; n],
        task,
    )
    .unwrap()
}
