//! Oracle and property suites behind `scbm verify`. Each suite checks the
//! library against a brute-force restatement of the rule it implements.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cbm::{argmax, compose_prediction, tlm_predict, AbstentionSwitch, PredictionRecord, RouteSource, SidecarOutput, Tlm};
use crate::datasets::{
    encode_cifar10_batch, encode_idx_images, expected_files, parse_cifar10_batch, parse_idx_images, parse_idx_labels,
    CifarRecord, ConceptDataset, IdxImages, Source, Split, Task,
};
use crate::error::{Error, Result};
use crate::nn::gradcheck::{compare, numerical_gradients, GradCheckReport, DEFAULT_ABS_FLOOR, DEFAULT_REL_TOL, DEFAULT_STEP};
use crate::nn::{loss_and_gradients, sigmoid, ConvShape, Matrix, Network, Objective};
use crate::training::{train_tlm, TrainingConfig};
use crate::evaluation::{explanation_coverage, explanation_f1, target_accuracy, ConceptCounts};

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl SuiteReport {
    fn new(name: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name,
            passed,
            detail: detail.into(),
        }
    }

    fn from_result(name: &'static str, r: Result<String>) -> Self {
        match r {
            Ok(detail) => Self::new(name, true, detail),
            Err(e) => Self::new(name, false, e.to_string()),
        }
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn fail(msg: String) -> Error {
    Error::Validation(msg)
}

/// A random small network with a random objective, checked against
/// central differences. Every fourth case puts a convolution in front.
pub fn gradient_case(seed: u64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hidden: Vec<usize> = (0..rng.random_range(0..3)).map(|_| rng.random_range(1..6)).collect();
    let outputs = rng.random_range(2..6);
    let mut net: Network<f64> = if seed % 4 == 3 {
        let shape = ConvShape {
            channels: rng.random_range(1..3),
            height: rng.random_range(4..7),
            width: rng.random_range(4..7),
            filters: rng.random_range(1..4),
            kernel: rng.random_range(2..4),
        };
        Network::conv_mlp(shape, &hidden, outputs, &mut rng)?
    } else {
        Network::mlp(rng.random_range(1..7), &hidden, outputs, &mut rng)
    };
    // Zero biases behind a dead unit put later pre-activations exactly on the ReLU kink.
    for t in net.params_mut() {
        for w in t.iter_mut() {
            *w += rng.random_range(-0.1..0.1);
        }
    }
    let rows = rng.random_range(1..5);
    let x = Matrix::from_vec(
        rows,
        net.input_dim(),
        (0..rows * net.input_dim()).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )?;
    let concepts = rng.random_range(1..outputs);
    let bce_targets = Matrix::from_vec(rows, outputs, (0..rows * outputs).map(|_| f64::from(rng.random_range(0..2u8))).collect())?;
    let split_targets = bce_targets.column_block(0, concepts);
    let mask: Vec<bool> = (0..rows).map(|_| rng.random_bool(0.7)).collect();
    let ce_labels: Vec<usize> = (0..rows).map(|_| rng.random_range(0..outputs)).collect();
    let split_labels: Vec<usize> = (0..rows).map(|_| rng.random_range(0..outputs - concepts)).collect();
    let objective = match rng.random_range(0..3) {
        0 => Objective::Bce {
            targets: &bce_targets,
            mask: &mask,
        },
        1 => Objective::Ce { labels: &ce_labels },
        _ => Objective::Split {
            concepts,
            targets: &split_targets,
            mask: &mask,
            labels: &split_labels,
            concept_weight: rng.random_range(0.1..2.0),
        },
    };
    let (_, analytic) = loss_and_gradients(&net, &objective, &x)?;
    let numeric = numerical_gradients(&mut net, DEFAULT_STEP, |n| objective.loss(&n.forward(&x)?))?;
    Ok(compare(&analytic, &numeric, DEFAULT_REL_TOL, DEFAULT_ABS_FLOOR))
}

pub fn gradient_suite(cases: usize, seed: u64) -> SuiteReport {
    let run = || -> Result<String> {
        let mut checked = 0;
        let (mut worst, mut worst_abs) = (0.0f64, 0.0f64);
        for i in 0..cases as u64 {
            let r = gradient_case(seed.wrapping_add(i))?;
            if !r.passed() {
                return Err(fail(format!("case {i}: {} of {} entries off, worst {:?}", r.failures, r.checked, r.worst)));
            }
            checked += r.checked;
            worst = worst.max(r.max_rel_error);
            worst_abs = worst_abs.max(r.max_abs_error);
        }
        Ok(format!(
            "{cases} cases, {checked} parameters, max rel. error {worst:.2e}, max abs. difference {worst_abs:.2e}"
        ))
    };
    SuiteReport::from_result("gradient check", run())
}

fn switch_oracle(v: &[f64], eps: f64) -> bool {
    let mut passes = false;
    for &x in v {
        if x > eps {
            passes = true;
        }
    }
    passes
}

pub fn switch_suite(vectors: usize, seed: u64) -> SuiteReport {
    let run = || -> Result<String> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let check = |v: &[f64], eps: f64| -> Result<()> {
            let got = crate::cbm::abstention_switch(v, &AbstentionSwitch::new(eps)?)?;
            if got != switch_oracle(v, eps) {
                return Err(fail(format!("eps {eps} on {v:?}: switch said {got}")));
            }
            Ok(())
        };
        for _ in 0..vectors {
            let len = rng.random_range(1..=10);
            let mut v: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
            let eps = rng.random::<f64>();
            if rng.random_bool(0.2) {
                let k = rng.random_range(0..len);
                v[k] = eps;
            }
            check(&v, eps)?;
        }
        let mut boundaries = 0;
        for eps in [0.0, 0.25, 0.5, 0.75, 1.0, f64::EPSILON, 1.0 - f64::EPSILON] {
            let below = if eps > 0.0 { eps / 2.0 } else { 0.0 };
            for v in [vec![eps], vec![below, eps, below], vec![0.0; 10], vec![1.0; 10]] {
                check(&v, eps)?;
                boundaries += 1;
            }
            let mut at_max = vec![below; 10];
            at_max[9] = eps;
            if crate::cbm::abstention_switch(&at_max, &AbstentionSwitch::new(eps)?)? {
                return Err(fail(format!("max exactly {eps} passed the switch")));
            }
            boundaries += 1;
        }
        Ok(format!("{vectors} random vectors and {boundaries} boundary cases agree with max(v) > eps"))
    };
    SuiteReport::from_result("abstention switch", run())
}

fn random_sidecar_output(rng: &mut ChaCha8Rng, c: usize, m: usize) -> SidecarOutput<f64> {
    SidecarOutput {
        concept_probs: (0..c).map(|_| sigmoid(rng.random_range(-6.0..6.0))).collect(),
        target_logits: (0..m).map(|_| rng.random_range(-3.0..3.0)).collect(),
    }
}

pub fn routing_suite(cases: usize, seed: u64) -> SuiteReport {
    let run = || -> Result<String> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c, m) = (Task::CONCEPTS, Task::TARGETS);
        let tlm = Tlm::<f64>::random(c, m, &mut rng);
        let mut outputs = Vec::with_capacity(cases);
        let mut abstained = 0;
        for i in 0..cases {
            let sc = random_sidecar_output(&mut rng, c, m);
            let sw = AbstentionSwitch::new(rng.random())?;
            let r = compose_prediction(&sc, &tlm, &sw, 0.5)?;
            let null = r.explanation.is_none();
            let via_sidecar = r.source == RouteSource::ViaSidecar;
            if r.abstained != null || null != via_sidecar || null != (r.explanation_string() == "NULL") {
                return Err(fail(format!("case {i}: abstained {}, explanation {:?}, source {:?}", r.abstained, r.explanation, r.source)));
            }
            let expected = if via_sidecar {
                argmax(&sc.target_logits)
            } else {
                let hard: Vec<u8> = sc.concept_probs.iter().map(|&p| u8::from(p > 0.5)).collect();
                if r.explanation.as_deref() != Some(&hard[..]) {
                    return Err(fail(format!("case {i}: explanation {:?}, expected {hard:?}", r.explanation)));
                }
                tlm_predict(&tlm, &hard)?
            };
            if r.predicted_target != expected {
                return Err(fail(format!("case {i}: target {} from the wrong head", r.predicted_target)));
            }
            abstained += usize::from(null);
            outputs.push(sc);
        }
        let coverage_at = |eps: f64| -> Result<f64> {
            let sw = AbstentionSwitch::new(eps)?;
            let records = outputs
                .iter()
                .map(|sc| compose_prediction(sc, &tlm, &sw, 0.5))
                .collect::<Result<Vec<_>>>()?;
            explanation_coverage(&records)
        };
        let (full, none) = (coverage_at(0.0)?, coverage_at(1.0)?);
        if full != 1.0 || none != 0.0 {
            return Err(fail(format!("coverage {full} at eps 0 and {none} at eps 1")));
        }
        Ok(format!("{cases} outputs ({abstained} abstained) routed consistently; coverage 1 at eps 0, 0 at eps 1"))
    };
    SuiteReport::from_result("composition routing", run())
}

fn random_records(rng: &mut ChaCha8Rng) -> (Vec<PredictionRecord<f64>>, Vec<usize>, Matrix<u8>) {
    let n = rng.random_range(1..40);
    let c = rng.random_range(1..12);
    let m = rng.random_range(2..4);
    let abstain_rate = rng.random::<f64>();
    let mut truth_bits = Vec::with_capacity(n * c);
    let mut records = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for _ in 0..n {
        truth_bits.extend((0..c).map(|_| u8::from(rng.random_bool(0.3))));
        truth.push(rng.random_range(0..m));
        let abstained = rng.random_bool(abstain_rate);
        records.push(PredictionRecord {
            predicted_target: rng.random_range(0..m),
            explanation: (!abstained).then(|| (0..c).map(|_| u8::from(rng.random_bool(0.3))).collect()),
            abstained,
            concept_probs: vec![0.5; c],
            source: if abstained { RouteSource::ViaSidecar } else { RouteSource::ViaTlm },
        });
    }
    (records, truth, Matrix::from_vec(n, c, truth_bits).expect("n x c bits"))
}

fn close(a: f64, b: f64) -> bool {
    (a.is_nan() && b.is_nan()) || (a - b).abs() <= 1e-12
}

pub fn metrics_suite(cases: usize, seed: u64) -> SuiteReport {
    let run = || -> Result<String> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..cases {
            let (records, truth, concepts) = random_records(&mut rng);
            let n = records.len() as f64;
            let mut correct = 0.0;
            let mut covered = 0.0;
            let (mut pred_pos, mut true_pos, mut hits) = (0.0, 0.0, 0.0);
            for (j, r) in records.iter().enumerate() {
                if r.predicted_target == truth[j] {
                    correct += 1.0;
                }
                if let Some(e) = &r.explanation {
                    covered += 1.0;
                    for (k, &bit) in e.iter().enumerate() {
                        let t = concepts[(j, k)];
                        pred_pos += f64::from(bit);
                        true_pos += f64::from(t);
                        hits += f64::from(bit & t);
                    }
                }
            }
            let f1 = if covered == 0.0 {
                f64::NAN
            } else if pred_pos + true_pos == 0.0 {
                0.0
            } else {
                2.0 * hits / (pred_pos + true_pos)
            };
            let got = (
                target_accuracy(&records, &truth)?,
                explanation_coverage(&records)?,
                explanation_f1(&records, &concepts)?,
            );
            if !close(got.0, correct / n) || !close(got.1, covered / n) || !close(got.2, f1) {
                return Err(fail(format!(
                    "set {i}: library {got:?}, oracle ({}, {}, {f1})",
                    correct / n,
                    covered / n
                )));
            }
        }
        let hand = ConceptCounts { tp: 1, fp: 1, fn_: 1 }.f1();
        if hand != 0.5 {
            return Err(fail(format!("TP=FP=FN=1 gives F1 {hand}")));
        }
        Ok(format!("{cases} random record sets match brute-force counters; TP=FP=FN=1 gives F1 0.5"))
    };
    SuiteReport::from_result("metrics", run())
}

/// Synthetic malformed files plus, when present, the official MNIST files.
pub fn parser_suite(data_root: Option<&Path>) -> SuiteReport {
    let run = || -> Result<String> {
        let images = IdxImages {
            count: 2,
            rows: 3,
            cols: 3,
            pixels: (0..18).collect(),
        };
        let mut bytes = encode_idx_images(&images);
        if parse_idx_images(&bytes)? != images {
            return Err(fail("image round trip changed the data".into()));
        }
        bytes[3] = 0x01;
        if !matches!(parse_idx_images(&bytes), Err(Error::Format(_))) {
            return Err(fail("wrong magic was accepted".into()));
        }
        bytes[3] = 0x03;
        bytes.truncate(bytes.len() - 1);
        if !matches!(parse_idx_images(&bytes), Err(Error::Truncated { .. })) {
            return Err(fail("truncated image file was accepted".into()));
        }
        let records = vec![
            CifarRecord {
                label: 3,
                pixels: vec![7; 3072],
            };
            2
        ];
        let mut batch = encode_cifar10_batch(&records);
        if batch.len() != 2 * 3073 || parse_cifar10_batch(&batch)? != records {
            return Err(fail("CIFAR round trip failed".into()));
        }
        batch.push(0);
        if parse_cifar10_batch(&batch).is_ok() {
            return Err(fail("CIFAR batch of 6147 bytes was accepted".into()));
        }
        let mut detail = "synthetic wrong-magic, truncated and misaligned files rejected".to_string();
        if let Some(root) = data_root {
            let train = expected_files(root, Source::Mnist, Split::Train);
            let test = expected_files(root, Source::Mnist, Split::Test);
            if train.iter().chain(&test).all(|p| p.exists()) {
                let read = |p: &Path| std::fs::read(p).map_err(|e| Error::io(p, e));
                let train_images = parse_idx_images(&read(&train[0])?)?;
                let train_labels = parse_idx_labels(&read(&train[1])?)?;
                let test_images = parse_idx_images(&read(&test[0])?)?;
                let test_labels = parse_idx_labels(&read(&test[1])?)?;
                let counts = (train_images.count, train_labels.len(), test_images.count, test_labels.len());
                if counts != (60000, 60000, 10000, 10000) || train_labels[0] != 5 {
                    return Err(fail(format!("MNIST counts {counts:?}, first label {}", train_labels[0])));
                }
                detail += "; MNIST parses to 60000/10000 with first train label 5";
            } else {
                detail += "; official MNIST files not found, skipped";
            }
        }
        Ok(detail)
    };
    SuiteReport::from_result("parsers", run())
}

/// Trains a target model on one-hot concept vectors labelled by `task`
/// and returns its prediction for each unit vector.
pub fn one_hot_tlm_predictions(task: Task, seed: u64) -> Result<Vec<usize>> {
    let per_class = 500;
    let n = Task::CONCEPTS * per_class;
    let build = |rows: usize| {
        let mut concepts = Matrix::filled(rows, Task::CONCEPTS, 0u8);
        let mut targets = Vec::with_capacity(rows);
        for i in 0..rows {
            let class = i % Task::CONCEPTS;
            concepts[(i, class)] = 1;
            targets.push(task.target_of(class));
        }
        ConceptDataset::from_parts(
            Arc::new(Matrix::<f64>::zeros(1, task.source().input_dim())),
            vec![0; rows],
            targets,
            concepts,
            vec![true; rows],
            task,
        )
    };
    let (train, val) = (build(n)?, build(n / 10)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tlm = Tlm::random(Task::CONCEPTS, Task::TARGETS, &mut rng);
    train_tlm(&mut tlm, &train, &val, &TrainingConfig::default().with_seed(seed))?;
    (0..Task::CONCEPTS)
        .map(|j| {
            let mut e = vec![0u8; Task::CONCEPTS];
            e[j] = 1;
            tlm_predict(&tlm, &e)
        })
        .collect()
}

pub fn tlm_suite(seed: u64) -> SuiteReport {
    let run = || -> Result<String> {
        for task in Task::ALL {
            let got = one_hot_tlm_predictions(task, seed)?;
            let want: Vec<usize> = (0..Task::CONCEPTS).map(|j| task.target_of(j)).collect();
            let correct = got.iter().zip(&want).filter(|(a, b)| a == b).count();
            if correct != Task::CONCEPTS {
                return Err(fail(format!("{task}: {correct}/10 one-hot vectors mapped correctly")));
            }
        }
        Ok("every task maps all 10 one-hot concept vectors to the right target".into())
    };
    SuiteReport::from_result("target model learnability", run())
}

/// Every suite at its default size.
pub fn run_all_suites(data_root: Option<&Path>) -> Vec<SuiteReport> {
    vec![
        gradient_suite(100, 0),
        switch_suite(10_000, 1),
        routing_suite(1_000, 2),
        metrics_suite(1_000, 3),
        parser_suite(data_root),
        tlm_suite(4),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suites_pass() {
        for r in [
            gradient_suite(12, 100),
            switch_suite(500, 7),
            routing_suite(200, 8),
            metrics_suite(200, 9),
            parser_suite(None),
        ] {
            assert!(r.passed, "{r}");
        }
    }

    #[test]
    fn switch_oracle_is_strict() {
        assert!(!switch_oracle(&[0.75, 0.1], 0.75));
        assert!(switch_oracle(&[0.7500001], 0.75));
    }
}
