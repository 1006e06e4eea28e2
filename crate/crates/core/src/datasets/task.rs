use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Base image collection a task is derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Source {
    Mnist,
    FashionMnist,
    Cifar10,
}

impl Source {
    pub fn input_dim(self) -> usize {
        match self {
            Source::Mnist | Source::FashionMnist => 784,
            Source::Cifar10 => 3072,
        }
    }

    /// `(channels, height, width)` of one image.
    pub fn image_shape(self) -> (usize, usize, usize) {
        match self {
            Source::Mnist | Source::FashionMnist => (1, 28, 28),
            Source::Cifar10 => (3, 32, 32),
        }
    }

    pub fn class_names(self) -> [&'static str; 10] {
        match self {
            Source::Mnist => ["0", "1", "2", "3", "4", "5", "6", "7", "8", "9"],
            Source::FashionMnist => [
                "T-shirt/top",
                "Trouser",
                "Pullover",
                "Dress",
                "Coat",
                "Sandal",
                "Shirt",
                "Sneaker",
                "Bag",
                "Ankle boot",
            ],
            Source::Cifar10 => [
                "airplane",
                "automobile",
                "bird",
                "cat",
                "deer",
                "dog",
                "frog",
                "horse",
                "ship",
                "truck",
            ],
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Mnist => "MNIST",
            Source::FashionMnist => "FashionMNIST",
            Source::Cifar10 => "CIFAR10",
        })
    }
}

/// Binary tasks whose concepts are the ten original classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Task {
    ParityMnist,
    InOutFashionMnist,
    AliveCifar10,
}

const INOUT_FASHION: [usize; 10] = [0, 0, 0, 0, 1, 1, 0, 1, 1, 1];
const ALIVE_CIFAR: [usize; 10] = [0, 0, 1, 1, 1, 1, 1, 1, 0, 0];

impl Task {
    pub const ALL: [Task; 3] = [Task::ParityMnist, Task::InOutFashionMnist, Task::AliveCifar10];
    pub const CONCEPTS: usize = 10;
    pub const TARGETS: usize = 2;

    pub fn source(self) -> Source {
        match self {
            Task::ParityMnist => Source::Mnist,
            Task::InOutFashionMnist => Source::FashionMnist,
            Task::AliveCifar10 => Source::Cifar10,
        }
    }

    /// Target label for an original class label.
    pub fn target_of(self, class: usize) -> usize {
        match self {
            Task::ParityMnist => class % 2,
            Task::InOutFashionMnist => INOUT_FASHION[class],
            Task::AliveCifar10 => ALIVE_CIFAR[class],
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            Task::ParityMnist => "parity-mnist",
            Task::InOutFashionMnist => "inout-fashion-mnist",
            Task::AliveCifar10 => "alive-cifar10",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Task::ParityMnist => "ParityMNIST",
            Task::InOutFashionMnist => "InOutFashionMNIST",
            Task::AliveCifar10 => "AliveCIFAR10",
        }
    }

    pub fn concept_names(self) -> [&'static str; 10] {
        self.source().class_names()
    }

    pub fn target_names(self) -> [&'static str; 2] {
        match self {
            Task::ParityMnist => ["even", "odd"],
            Task::InOutFashionMnist => ["indoor", "outdoor"],
            Task::AliveCifar10 => ["not alive", "alive"],
        }
    }

    /// Included in grids but not held to hard accuracy thresholds.
    pub fn is_extended(self) -> bool {
        self == Task::AliveCifar10
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "parity-mnist" | "paritymnist" => Ok(Task::ParityMnist),
            "inout-fashion-mnist" | "inoutfashionmnist" => Ok(Task::InOutFashionMnist),
            "alive-cifar10" | "alivecifar10" | "living-cifar10" | "livingcifar10" => Ok(Task::AliveCifar10),
            other => Err(Error::Config(format!(
                "unknown dataset '{other}' (expected parity-mnist, inout-fashion-mnist or alive-cifar10)"
            ))),
        }
    }
}

impl Serialize for Task {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.id())
    }
}

impl<'de> Deserialize<'de> for Task {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
