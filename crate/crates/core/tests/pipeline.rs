mod common;

use std::collections::BTreeMap;
use std::path::Path;

use scbm::datasets::Task;
use scbm::evaluation::{read_raw_csv, Variant};
use scbm::experiment::{
    load_raw_metrics, run_direct_baseline, run_grid, silent, write_bundle, write_tables, ExperimentConfig, GridSpec,
    RAW_METRICS,
};
use scbm::Error;
use sha2::{Digest, Sha256};

fn tiny_config(root: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_toml_str(&format!(
        r#"
data_root = "{}"
datasets = ["parity-mnist", "inout-fashion-mnist"]
p_grid = [0.0, 0.75]
seeds = [0, 1]
train_limit = 400
test_limit = 150
max_epochs = 4
lr = 0.003
batch_size = 50
"#,
        root.display()
    ))
    .unwrap();
    cfg.output_dir = root.join("out");
    cfg
}

fn digest_tree(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for sub in ["mnist", "fashion-mnist"] {
        for e in std::fs::read_dir(dir.join(sub)).unwrap() {
            let p = e.unwrap().path();
            out.insert(p.display().to_string(), format!("{:x}", Sha256::digest(std::fs::read(&p).unwrap())));
        }
    }
    out
}

#[test]
fn grid_end_to_end() {
    let data = tempfile::tempdir().unwrap();
    common::write_synthetic_data(data.path(), 500, 200);
    let before = digest_tree(data.path());
    let cfg = tiny_config(data.path());

    let bundle = run_grid(&cfg).unwrap();
    assert_eq!(bundle.raw.len(), 2 * 2 * 2 * 2);
    assert_eq!(bundle.cells.len(), 2 * 2 * 2);
    assert_eq!(bundle.provenance.config_hash, cfg.hash());
    assert_eq!(bundle.provenance.data_files.len(), 8);
    for r in &bundle.raw {
        assert!((0.0..=1.0).contains(&r.target_accuracy));
        if r.variant == Variant::Standard {
            assert_eq!(r.explanation_coverage, 1.0);
        }
    }
    let keys: Vec<(Task, f64, Variant, u64)> = bundle.raw.iter().map(|r| (r.dataset, r.p_missing, r.variant, r.seed)).collect();
    let mut sorted = keys.clone();
    sorted.dedup();
    assert_eq!(sorted.len(), keys.len());
    assert_eq!(keys[0], (Task::ParityMnist, 0.0, Variant::Standard, 0));

    let out = tempfile::tempdir().unwrap();
    let written = write_bundle(&bundle, out.path()).unwrap();
    for name in [
        "raw_metrics.csv",
        "aggregated.csv",
        "table_target_acc.md",
        "table_expl_f1.md",
        "table_coverage.md",
        "table_target_acc.csv",
        "plot_parity-mnist.svg",
        "plot_inout-fashion-mnist.svg",
        "provenance.json",
    ] {
        assert!(written.contains(&out.path().join(name)), "{name} not written");
    }
    let logs = written.iter().filter(|p| p.starts_with(out.path().join("logs"))).count();
    assert_eq!(logs, 2 * 2 * 2 * 3);

    for stem in ["plot_parity-mnist", "plot_inout-fashion-mnist"] {
        let svg = std::fs::read_to_string(out.path().join(format!("{stem}.svg"))).unwrap();
        let doc = roxmltree::Document::parse(&svg).unwrap();
        assert_eq!(doc.root_element().tag_name().name(), "svg");
        let ticks: Vec<&str> = doc.descendants().filter_map(|n| n.text()).filter(|t| t.starts_with("0.")).collect();
        assert!(ticks.contains(&"0.00") && ticks.contains(&"0.75"));
    }

    let coverage = std::fs::read_to_string(out.path().join("table_coverage.md")).unwrap();
    assert!(coverage.contains("| Dataset | Sidecar | 0.00 | 0.75 |"));
    assert!(coverage.contains("| ParityMNIST | False | 1.0 ± 0.0 | 1.0 ± 0.0 |"));
    let table_rows = coverage.lines().filter(|l| l.starts_with("| ") && !l.starts_with("| Dataset") && !l.starts_with("| ---")).count();
    assert_eq!(table_rows, 2 * 2);

    let prov: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.path().join("provenance.json")).unwrap()).unwrap();
    assert_eq!(prov["config_hash"], cfg.hash());

    let reread = load_raw_metrics(out.path()).unwrap();
    assert_eq!(reread.len(), bundle.raw.len());
    let spec = GridSpec::from_raw(&reread);
    assert_eq!(spec, GridSpec::from_config(&cfg));
    let rebuilt = tempfile::tempdir().unwrap();
    write_tables(rebuilt.path(), &spec, &spec.aggregate(&reread).unwrap()).unwrap();
    assert_eq!(
        std::fs::read_to_string(rebuilt.path().join("table_coverage.md")).unwrap(),
        coverage
    );

    let mut parallel = cfg.clone();
    parallel.jobs = 2;
    parallel.output_dir = "elsewhere".into();
    assert_eq!(parallel.hash(), cfg.hash());
    let again = run_grid(&parallel).unwrap();
    let out2 = tempfile::tempdir().unwrap();
    write_bundle(&again, out2.path()).unwrap();
    assert_eq!(
        std::fs::read(out.path().join(RAW_METRICS)).unwrap(),
        std::fs::read(out2.path().join(RAW_METRICS)).unwrap()
    );
    let reread = read_raw_csv(std::fs::File::open(out2.path().join(RAW_METRICS)).unwrap()).unwrap();
    assert_eq!(format!("{reread:?}"), format!("{:?}", bundle.raw));

    assert_eq!(digest_tree(data.path()), before);
}

#[test]
fn incomplete_grid_is_reported() {
    let data = tempfile::tempdir().unwrap();
    common::write_synthetic_data(data.path(), 300, 100);
    let mut cfg = tiny_config(data.path());
    cfg.datasets = vec![Task::ParityMnist];
    cfg.seeds = vec![0];
    cfg.training.max_epochs = 1;
    let mut bundle = run_grid(&cfg).unwrap();
    bundle.cells.retain(|c| !(c.p_missing == 0.75 && c.variant == Variant::Sidecar));
    let out = tempfile::tempdir().unwrap();
    match write_bundle(&bundle, out.path()) {
        Err(Error::IncompleteGrid(missing)) => assert_eq!(missing, vec!["parity-mnist p=0.75 sidecar".to_string()]),
        other => panic!("{other:?}"),
    }
}

#[test]
fn missing_data_fails_before_training() {
    let empty = tempfile::tempdir().unwrap();
    let cfg = tiny_config(empty.path());
    match run_grid(&cfg) {
        Err(Error::MissingData { paths, .. }) => assert!(paths.len() >= 4),
        other => panic!("{other:?}"),
    }
}

#[test]
fn baseline_reports_each_seed() {
    let data = tempfile::tempdir().unwrap();
    common::write_synthetic_data(data.path(), 300, 100);
    let cfg = tiny_config(data.path());
    let b = run_direct_baseline(&cfg, Task::ParityMnist, &silent).unwrap();
    assert_eq!(b.seeds, cfg.seeds);
    assert_eq!(b.accuracies.len(), 2);
    assert!(b.accuracies.iter().all(|a| (0.0..=1.0).contains(a)));
}
