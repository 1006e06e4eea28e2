use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cbm::{AbstentionSwitch, Backbone, DEFAULT_EPSILON, DEFAULT_TAU};
use crate::datasets::Task;
use crate::error::{Error, Result};
use crate::evaluation::Variant;
use crate::training::TrainingConfig;

pub const DATA_ROOT_ENV: &str = "SCBM_DATA_ROOT";

/// Everything that determines one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data_root: PathBuf,
    pub datasets: Vec<Task>,
    pub p_grid: Vec<f64>,
    pub variants: Vec<Variant>,
    pub seeds: Vec<u64>,
    pub epsilon: f64,
    pub tau: f64,
    pub output_dir: PathBuf,
    pub backbone: Backbone,
    pub jobs: usize,
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
    pub baseline: bool,
    pub val_fraction: f64,
    pub macro_f1: bool,
    pub training: TrainingConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data_root: PathBuf::from("data"),
            datasets: Task::ALL.to_vec(),
            p_grid: vec![0.0, 0.25, 0.5, 0.75],
            variants: Variant::ALL.to_vec(),
            seeds: vec![0, 1, 2],
            epsilon: DEFAULT_EPSILON,
            tau: DEFAULT_TAU,
            output_dir: PathBuf::from("runs"),
            backbone: Backbone::Mlp,
            jobs: 1,
            train_limit: None,
            test_limit: None,
            baseline: false,
            val_fraction: 0.1,
            macro_f1: false,
            training: TrainingConfig::default(),
        }
    }
}

/// On-disk form: one flat table mixing experiment and training keys.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    data_root: Option<PathBuf>,
    datasets: Option<Vec<String>>,
    p_grid: Option<Vec<f64>>,
    variants: Option<Vec<String>>,
    seeds: Option<Vec<u64>>,
    epsilon: Option<f64>,
    tau: Option<f64>,
    output_dir: Option<PathBuf>,
    backbone: Option<Backbone>,
    jobs: Option<usize>,
    train_limit: Option<usize>,
    test_limit: Option<usize>,
    baseline: Option<bool>,
    val_fraction: Option<f64>,
    macro_f1: Option<bool>,
    paradigm: Option<crate::training::Paradigm>,
    lr: Option<f64>,
    batch_size: Option<usize>,
    patience: Option<usize>,
    max_epochs: Option<usize>,
    lambda: Option<f64>,
    missing_concepts: Option<crate::training::MissingConceptPolicy>,
    sidecar_concept_weight: Option<f64>,
}

fn parse_list<T: std::str::FromStr<Err = Error>>(items: &[String]) -> Result<Vec<T>> {
    items.iter().map(|s| s.parse()).collect()
}

macro_rules! set_if {
    ($($dst:expr => $src:expr),* $(,)?) => {
        $(if let Some(v) = $src { $dst = v; })*
    };
}

impl ExperimentConfig {
    /// Parses a TOML file body. Keys not given keep their defaults;
    /// `data_root` falls back to the environment when absent.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: FileConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut cfg = Self::default();
        if let Some(d) = &file.datasets {
            cfg.datasets = parse_list(d)?;
        }
        if let Some(v) = &file.variants {
            cfg.variants = parse_list(v)?;
        }
        let t = &mut cfg.training;
        set_if!(
            cfg.data_root => file.data_root.or_else(env_data_root),
            cfg.p_grid => file.p_grid,
            cfg.seeds => file.seeds,
            cfg.epsilon => file.epsilon,
            cfg.tau => file.tau,
            cfg.output_dir => file.output_dir,
            cfg.backbone => file.backbone,
            cfg.jobs => file.jobs,
            cfg.baseline => file.baseline,
            cfg.val_fraction => file.val_fraction,
            cfg.macro_f1 => file.macro_f1,
            t.paradigm => file.paradigm,
            t.lr => file.lr,
            t.batch_size => file.batch_size,
            t.patience => file.patience,
            t.max_epochs => file.max_epochs,
            t.lambda => file.lambda,
            t.missing_concepts => file.missing_concepts,
            t.sidecar_concept_weight => file.sidecar_concept_weight,
        );
        cfg.train_limit = file.train_limit.or(cfg.train_limit);
        cfg.test_limit = file.test_limit.or(cfg.test_limit);
        cfg.sync_training();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Defaults with `data_root` taken from the environment when set.
    pub fn from_env() -> Self {
        let mut cfg = Self::default();
        if let Some(root) = env_data_root() {
            cfg.data_root = root;
        }
        cfg
    }

    /// Copies the shared threshold into the training config.
    pub fn sync_training(&mut self) {
        self.training.tau = self.tau;
    }

    pub fn switch(&self) -> Result<AbstentionSwitch> {
        AbstentionSwitch::new(self.epsilon)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.datasets.is_empty() {
            return bad("datasets must not be empty".into());
        }
        if self.variants.is_empty() {
            return bad("variants must not be empty".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.p_grid.is_empty() {
            return bad("p_grid must not be empty".into());
        }
        if let Some(p) = self.p_grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return bad(format!("p_grid value {p} outside [0, 1]"));
        }
        if has_duplicates(&self.datasets)
            || has_duplicates(&self.variants)
            || has_duplicates(&self.seeds)
            || has_duplicates(&self.p_grid)
        {
            return bad("datasets, p_grid, variants and seeds must not repeat".into());
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad(format!("val_fraction {} outside (0, 1)", self.val_fraction));
        }
        if self.jobs == 0 {
            return bad("jobs must be at least 1".into());
        }
        if self.training.tau != self.tau {
            return bad("training tau differs from tau; call sync_training".into());
        }
        self.switch().map_err(|e| Error::Config(e.to_string()))?;
        self.training.validate()
    }

    /// SHA-256 over every setting that can change results; paths to the
    /// output directory and the worker count are left out.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        canonical.jobs = 1;
        let json = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn has_duplicates<T: PartialEq>(items: &[T]) -> bool {
    items.iter().enumerate().any(|(i, a)| items[..i].contains(a))
}

fn env_data_root() -> Option<PathBuf> {
    std::env::var_os(DATA_ROOT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}
