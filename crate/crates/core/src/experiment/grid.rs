use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::tables::GridSpec;
use crate::cbm::{argmax, sidecar_records, standard_predict, Clm, PredictionRecord, SidecarClm, Tlm};
use crate::datasets::{
    corrupt_concept_labels, derive_concept_dataset, expected_files, load_raw, split_train_val, ConceptDataset,
    MissingnessSpec, Split, Task,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    explanation_coverage, explanation_f1, explanation_f1_macro, target_accuracy, AggregatedCell, MeanStd, RunMetrics, Variant,
};
use crate::nn::Matrix;
use crate::training::{
    train_classifier, train_clm, train_joint, train_sequential, train_sidecar_clm, train_tlm, Paradigm, TrainLog,
    TrainingConfig,
};

/// Progress sink for long runs.
pub type Progress<'a> = &'a (dyn Fn(&str) + Sync);

pub fn silent(_: &str) {}

/// Mixes `parts` into one seed (splitmix64 over the sequence).
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x243F_6A88_85A3_08D3;
    for &p in parts {
        h = h.wrapping_add(p).wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}

#[derive(Clone, Copy)]
#[repr(u64)]
enum Role {
    Split = 1,
    Corrupt,
    TlmInit,
    TlmShuffle,
    ClmInit,
    ClmShuffle,
    SidecarInit,
    SidecarShuffle,
    BaselineInit,
    BaselineShuffle,
}

fn task_code(task: Task) -> u64 {
    Task::ALL.iter().position(|&t| t == task).expect("listed") as u64
}

fn seed_for(task: Task, seed: u64, role: Role) -> u64 {
    derive_seed(&[task_code(task), seed, role as u64])
}

/// Official train and test splits of a task, trimmed to the configured limits.
pub struct TaskData {
    pub task: Task,
    pub train: ConceptDataset<f64>,
    pub test: ConceptDataset<f64>,
    pub test_images: Matrix<f64>,
}

pub fn load_task(cfg: &ExperimentConfig, task: Task) -> Result<TaskData> {
    let source = task.source();
    let train_raw = load_raw::<f64>(&cfg.data_root, source, Split::Train)?;
    let test_raw = load_raw::<f64>(&cfg.data_root, source, Split::Test)?;
    let mut train = derive_concept_dataset(&train_raw, task)?;
    let mut test = derive_concept_dataset(&test_raw, task)?;
    if let Some(n) = cfg.train_limit {
        train = train.head(n);
    }
    if let Some(n) = cfg.test_limit {
        test = test.head(n);
    }
    let idx: Vec<usize> = (0..test.len()).collect();
    let test_images = test.gather_images(&idx);
    Ok(TaskData {
        task,
        train,
        test,
        test_images,
    })
}

/// A training log labelled by the run and model it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedLog {
    pub name: String,
    pub log: TrainLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub dataset: Task,
    pub seeds: Vec<u64>,
    pub accuracies: Vec<f64>,
    pub summary: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub crate_version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub data_files: Vec<FileDigest>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultsBundle {
    pub config: ExperimentConfig,
    pub raw: Vec<RunMetrics>,
    pub cells: Vec<AggregatedCell>,
    pub baselines: Vec<BaselineResult>,
    pub logs: Vec<NamedLog>,
    pub provenance: Provenance,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn digest_files(cfg: &ExperimentConfig) -> Result<Vec<FileDigest>> {
    let paths: Vec<PathBuf> = cfg
        .datasets
        .iter()
        .flat_map(|t| [Split::Train, Split::Test].map(|s| expected_files(&cfg.data_root, t.source(), s)))
        .flatten()
        .collect();
    let missing: Vec<PathBuf> = paths.iter().filter(|p| !p.exists()).cloned().collect();
    if !missing.is_empty() {
        return Err(Error::MissingData {
            root: cfg.data_root.clone(),
            paths: missing,
        });
    }
    let mut out = Vec::new();
    for path in paths {
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let sha256 = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        out.push(FileDigest { path, sha256 });
    }
    Ok(out)
}

fn unit_name(task: Task, p: f64, seed: u64) -> String {
    format!("{} p={p} seed={seed}", task.id())
}

fn log_name(task: Task, p: f64, seed: u64, model: &str) -> String {
    format!("{}_p{p}_seed{seed}_{model}", task.id())
}

fn metrics_for(
    cfg: &ExperimentConfig,
    data: &TaskData,
    records: &[PredictionRecord<f64>],
    p: f64,
    variant: Variant,
    seed: u64,
) -> Result<RunMetrics> {
    let f1 = if cfg.macro_f1 {
        explanation_f1_macro(records, data.test.concepts())?
    } else {
        explanation_f1(records, data.test.concepts())?
    };
    Ok(RunMetrics {
        dataset: data.task,
        p_missing: p,
        variant,
        seed,
        target_accuracy: target_accuracy(records, data.test.target_labels())?,
        explanation_f1: f1,
        explanation_coverage: explanation_coverage(records)?,
    })
}

struct UnitOutput {
    metrics: Vec<RunMetrics>,
    logs: Vec<NamedLog>,
}

/// One (dataset, p, seed) unit: split, corrupt, train a shared target
/// model, then every requested variant, and score them on the test set.
fn run_unit(cfg: &ExperimentConfig, data: &TaskData, p: f64, seed: u64) -> Result<UnitOutput> {
    let task = data.task;
    let source = task.source();
    let (c, m) = (Task::CONCEPTS, Task::TARGETS);
    let tau = cfg.tau;
    let training = |role: Role| -> TrainingConfig { cfg.training.with_seed(seed_for(task, seed, role)) };
    let rng = |role: Role| ChaCha8Rng::seed_from_u64(seed_for(task, seed, role));

    let (train, val) = split_train_val(&data.train, cfg.val_fraction, seed_for(task, seed, Role::Split))?;
    let train = corrupt_concept_labels(&train, MissingnessSpec::new(p, seed_for(task, seed, Role::Corrupt))?)?;

    let mut logs = Vec::new();
    let mut tlm = Tlm::random(c, m, &mut rng(Role::TlmInit));
    logs.push(NamedLog {
        name: log_name(task, p, seed, "tlm"),
        log: train_tlm(&mut tlm, &train, &val, &training(Role::TlmShuffle))?,
    });

    let mut metrics = Vec::new();
    for &variant in &cfg.variants {
        let records = match variant {
            Variant::Standard => {
                let mut clm = Clm::new(cfg.backbone.build(source, c, &mut rng(Role::ClmInit))?, c)?;
                let tcfg = training(Role::ClmShuffle);
                let records = match cfg.training.paradigm {
                    Paradigm::Independent => {
                        let log = train_clm(&mut clm, &train, &val, &tcfg)?;
                        logs.push(NamedLog {
                            name: log_name(task, p, seed, "clm"),
                            log,
                        });
                        standard_predict(&clm, &tlm, &data.test_images, tau)?
                    }
                    Paradigm::Sequential => {
                        let mut own = Tlm::random(c, m, &mut rng(Role::TlmInit));
                        let pair = train_sequential(&mut clm, &mut own, &train, &val, &tcfg)?;
                        logs.push(NamedLog {
                            name: log_name(task, p, seed, "clm"),
                            log: pair.clm,
                        });
                        logs.push(NamedLog {
                            name: log_name(task, p, seed, "sequential_tlm"),
                            log: pair.tlm,
                        });
                        standard_predict(&clm, &own, &data.test_images, tau)?
                    }
                    Paradigm::Joint => {
                        let mut own = Tlm::random(c, m, &mut rng(Role::TlmInit));
                        let log = train_joint(&mut clm, &mut own, &train, &val, &tcfg)?;
                        logs.push(NamedLog {
                            name: log_name(task, p, seed, "joint"),
                            log,
                        });
                        standard_predict(&clm, &own, &data.test_images, tau)?
                    }
                };
                records
            }
            Variant::Sidecar => {
                let net = cfg.backbone.build(source, c + m, &mut rng(Role::SidecarInit))?;
                let mut sc = SidecarClm::new(net, c, m)?;
                let log = train_sidecar_clm(&mut sc, &train, &val, &training(Role::SidecarShuffle))?;
                logs.push(NamedLog {
                    name: log_name(task, p, seed, "sidecar"),
                    log,
                });
                sidecar_records(&sc, &tlm, &data.test_images, &cfg.switch()?, tau)?
            }
        };
        metrics.push(metrics_for(cfg, data, &records, p, variant, seed)?);
    }
    Ok(UnitOutput { metrics, logs })
}

fn in_pool<R: Send>(jobs: usize, work: impl FnOnce() -> R + Send) -> Result<R> {
    if jobs <= 1 {
        return Ok(work());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))?;
    Ok(pool.install(work))
}

fn map_units<I: Sync, O: Send>(jobs: usize, items: &[I], f: impl Fn(&I) -> O + Sync + Send) -> Result<Vec<O>> {
    if jobs <= 1 {
        return Ok(items.iter().map(f).collect());
    }
    in_pool(jobs, || items.par_iter().map(f).collect())
}

pub fn run_grid(cfg: &ExperimentConfig) -> Result<ResultsBundle> {
    run_grid_with(cfg, &silent)
}

/// Every (dataset, p, variant, seed) run of the configuration. Units run
/// on up to `cfg.jobs` workers; results do not depend on the worker count.
pub fn run_grid_with(cfg: &ExperimentConfig, progress: Progress<'_>) -> Result<ResultsBundle> {
    cfg.validate()?;
    let started = unix_now();
    let data_files = digest_files(cfg)?;
    let mut raw = Vec::new();
    let mut logs = Vec::new();
    let mut baselines = Vec::new();
    for &task in &cfg.datasets {
        progress(&format!("loading {}", task.display_name()));
        let data = load_task(cfg, task)?;
        let units: Vec<(f64, u64)> = cfg
            .p_grid
            .iter()
            .flat_map(|&p| cfg.seeds.iter().map(move |&s| (p, s)))
            .collect();
        let outputs = map_units(cfg.jobs, &units, |&(p, seed)| {
            let name = unit_name(task, p, seed);
            progress(&format!("running {name}"));
            let out = run_unit(cfg, &data, p, seed).map_err(|e| Error::Cell {
                cell: name.clone(),
                source: Box::new(e),
            });
            if let Ok(o) = &out {
                let summary: Vec<String> = o
                    .metrics
                    .iter()
                    .map(|m| format!("{} acc {:.4} cov {:.4}", m.variant, m.target_accuracy, m.explanation_coverage))
                    .collect();
                progress(&format!("finished {name}: {}", summary.join(", ")));
            }
            out
        })?;
        let mut task_rows = Vec::new();
        for out in outputs {
            let out = out?;
            task_rows.extend(out.metrics);
            logs.extend(out.logs);
        }
        for &p in &cfg.p_grid {
            for &variant in &cfg.variants {
                for &seed in &cfg.seeds {
                    let row = task_rows
                        .iter()
                        .find(|r| r.p_missing == p && r.variant == variant && r.seed == seed)
                        .expect("every unit reports every variant");
                    raw.push(row.clone());
                }
            }
        }
        if cfg.baseline {
            progress(&format!("direct baseline for {}", task.display_name()));
            baselines.push(baseline_on(cfg, &data, progress)?);
        }
    }
    let cells = GridSpec::from_config(cfg).aggregate(&raw)?;
    Ok(ResultsBundle {
        config: cfg.clone(),
        raw,
        cells,
        baselines,
        logs,
        provenance: Provenance {
            config_hash: cfg.hash(),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: started,
            finished_unix: unix_now(),
            data_files,
        },
    })
}

fn baseline_on(cfg: &ExperimentConfig, data: &TaskData, progress: Progress<'_>) -> Result<BaselineResult> {
    let task = data.task;
    let accuracies = map_units(cfg.jobs, &cfg.seeds, |&seed| -> Result<f64> {
        let name = format!("{} baseline seed={seed}", task.id());
        let run = || -> Result<f64> {
            let (train, val) = split_train_val(&data.train, cfg.val_fraction, seed_for(task, seed, Role::Split))?;
            let mut net = cfg.backbone.build(
                task.source(),
                Task::TARGETS,
                &mut ChaCha8Rng::seed_from_u64(seed_for(task, seed, Role::BaselineInit)),
            )?;
            train_classifier(
                &mut net,
                &train,
                &val,
                &cfg.training.with_seed(seed_for(task, seed, Role::BaselineShuffle)),
            )?;
            let logits = net.forward(&data.test_images)?;
            let correct = logits
                .iter_rows()
                .zip(data.test.target_labels())
                .filter(|(row, &y)| argmax(row) == y)
                .count();
            Ok(correct as f64 / data.test.len() as f64)
        };
        let acc = run().map_err(|e| Error::Cell {
            cell: name.clone(),
            source: Box::new(e),
        })?;
        progress(&format!("finished {name}: acc {acc:.4}"));
        Ok(acc)
    })?
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    Ok(BaselineResult {
        dataset: task,
        seeds: cfg.seeds.clone(),
        summary: MeanStd::of(&accuracies),
        accuracies,
    })
}

/// Backbone trained straight on target labels, one run per seed.
pub fn run_direct_baseline(cfg: &ExperimentConfig, task: Task, progress: Progress<'_>) -> Result<BaselineResult> {
    cfg.validate()?;
    let data = load_task(cfg, task)?;
    baseline_on(cfg, &data, progress)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ_by_every_part() {
        let base = derive_seed(&[0, 1, 2]);
        assert_eq!(base, derive_seed(&[0, 1, 2]));
        assert_ne!(base, derive_seed(&[1, 1, 2]));
        assert_ne!(base, derive_seed(&[0, 2, 2]));
        assert_ne!(base, derive_seed(&[0, 1, 3]));
        assert_ne!(derive_seed(&[]), derive_seed(&[0]));
    }
}
