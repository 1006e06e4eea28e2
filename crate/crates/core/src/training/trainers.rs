use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{MissingConceptPolicy, TrainingConfig};
use super::log::{early_stop_check, TrainLog};
use crate::cbm::{clm_predict, threshold_cav, Clm, SidecarClm, Tlm};
use crate::datasets::ConceptDataset;
use crate::error::{Error, Result};
use crate::nn::{loss_and_gradients, sigmoid, AdamConfig, AdamState, Gradients, Matrix, Network, Objective};
use crate::scalar::Scalar;

/// Rows pushed through a network at once outside of training steps.
const EVAL_CHUNK: usize = 1000;

/// Anything whose parameters one Adam instance can update.
trait ParamSet<T>: Clone {
    fn param_shapes(&self) -> Vec<usize>;
    fn params_mut(&mut self) -> Vec<&mut [T]>;
}

impl<T: Scalar> ParamSet<T> for Network<T> {
    fn param_shapes(&self) -> Vec<usize> {
        Network::param_shapes(self)
    }

    fn params_mut(&mut self) -> Vec<&mut [T]> {
        Network::params_mut(self)
    }
}

impl<T: Scalar> ParamSet<T> for (Network<T>, Network<T>) {
    fn param_shapes(&self) -> Vec<usize> {
        let mut s = self.0.param_shapes();
        s.extend(self.1.param_shapes());
        s
    }

    fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut p = self.0.params_mut();
        p.extend(self.1.params_mut());
        p
    }
}

/// Mini-batch Adam over `rows` with a seeded shuffle each epoch, early
/// stopping on `val_loss`, and the best-validation parameters restored.
fn fit<T: Scalar, M: ParamSet<T>>(
    model: &mut M,
    rows: &[usize],
    cfg: &TrainingConfig,
    mut batch_step: impl FnMut(&M, &[usize]) -> Result<(T, Vec<Vec<T>>)>,
    mut val_loss: impl FnMut(&M) -> Result<T>,
) -> Result<TrainLog> {
    let mut adam = AdamState::new(&model.param_shapes(), AdamConfig::with_lr(cfg.lr))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order = rows.to_vec();
    let mut log = TrainLog::default();
    let mut best = model.clone();
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (loss, grads) = batch_step(model, batch)?;
            total += loss.as_f64() * batch.len() as f64;
            let grads: Vec<&[T]> = grads.iter().map(Vec::as_slice).collect();
            adam.step(&mut model.params_mut(), &grads)?;
        }
        let train = total / order.len().max(1) as f64;
        let val = val_loss(model)?.as_f64();
        if !train.is_finite() || !val.is_finite() {
            return Err(Error::Validation(format!(
                "training diverged at epoch {epoch} (train loss {train}, val loss {val})"
            )));
        }
        if log.record(train, val) {
            best = model.clone();
        }
        if early_stop_check(&log.val_loss, cfg.patience) {
            log.stopped_early = true;
            break;
        }
    }
    *model = best;
    Ok(log)
}

/// Concept bits of `indices` as training targets; rows without concepts
/// become all zero.
fn concept_targets<T: Scalar>(ds: &ConceptDataset<T>, indices: &[usize]) -> Matrix<T> {
    let mut c = ds.gather_concepts(indices);
    for (r, &i) in indices.iter().enumerate() {
        if !ds.concept_present()[i] {
            c.row_mut(r).fill(T::zero());
        }
    }
    c
}

fn all_rows<T: Scalar>(ds: &ConceptDataset<T>) -> Vec<usize> {
    (0..ds.len()).collect()
}

fn require_concepts<T: Scalar>(train: &ConceptDataset<T>) -> Result<Vec<usize>> {
    let present = train.present_indices();
    if present.is_empty() {
        return Err(Error::Unlearnable(format!(
            "none of the {} training rows has concept labels",
            train.len()
        )));
    }
    Ok(present)
}

fn check_inputs<T: Scalar>(net: &Network<T>, train: &ConceptDataset<T>, val: &ConceptDataset<T>) -> Result<()> {
    for (what, ds) in [("training", train), ("validation", val)] {
        if ds.input_dim() != net.input_dim() {
            return Err(Error::Shape(format!(
                "{what} images have {} values, model expects {}",
                ds.input_dim(),
                net.input_dim()
            )));
        }
        if ds.is_empty() {
            return Err(Error::Validation(format!("{what} set is empty")));
        }
    }
    Ok(())
}

/// Concept model alone on masked (or zero-filled) binary cross-entropy.
pub fn train_clm<T: Scalar>(
    clm: &mut Clm<T>,
    train: &ConceptDataset<T>,
    val: &ConceptDataset<T>,
    cfg: &TrainingConfig,
) -> Result<TrainLog> {
    cfg.validate()?;
    check_inputs(clm.net(), train, val)?;
    let present = require_concepts(train)?;
    let rows = match cfg.missing_concepts {
        MissingConceptPolicy::ZeroFill => all_rows(train),
        MissingConceptPolicy::Masked => present,
    };
    let val_idx = all_rows(val);
    let val_x = val.gather_images(&val_idx);
    let val_c = val.gather_concepts(&val_idx);
    let val_mask = val.concept_present().to_vec();
    fit(
        clm.net_mut(),
        &rows,
        cfg,
        |net, idx| {
            let x = train.gather_images(idx);
            let targets = concept_targets(train, idx);
            let mask = vec![true; idx.len()];
            let (loss, g) = loss_and_gradients(net, &Objective::Bce { targets: &targets, mask: &mask }, &x)?;
            Ok((loss, g.tensors))
        },
        |net| {
            Objective::Bce {
                targets: &val_c,
                mask: &val_mask,
            }
            .loss(&net.forward(&val_x)?)
        },
    )
}

/// Concept head plus target head on one backbone. Every row trains the
/// target head; concept-missing rows follow the configured policy.
pub fn train_sidecar_clm<T: Scalar>(
    sc: &mut SidecarClm<T>,
    train: &ConceptDataset<T>,
    val: &ConceptDataset<T>,
    cfg: &TrainingConfig,
) -> Result<TrainLog> {
    cfg.validate()?;
    check_inputs(sc.net(), train, val)?;
    let c = sc.n_concepts();
    let weight = T::lit(cfg.sidecar_concept_weight);
    let val_idx = all_rows(val);
    let val_x = val.gather_images(&val_idx);
    let val_c = val.gather_concepts(&val_idx);
    let val_mask = val.concept_present().to_vec();
    let val_y = val.target_labels().to_vec();
    fit(
        sc.net_mut(),
        &all_rows(train),
        cfg,
        |net, idx| {
            let x = train.gather_images(idx);
            let targets = concept_targets(train, idx);
            let mask = match cfg.missing_concepts {
                MissingConceptPolicy::ZeroFill => vec![true; idx.len()],
                MissingConceptPolicy::Masked => train.gather_present(idx),
            };
            let labels = train.gather_targets(idx);
            let objective = Objective::Split {
                concepts: c,
                targets: &targets,
                mask: &mask,
                labels: &labels,
                concept_weight: weight,
            };
            let (loss, g) = loss_and_gradients(net, &objective, &x)?;
            Ok((loss, g.tensors))
        },
        |net| {
            Objective::Split {
                concepts: c,
                targets: &val_c,
                mask: &val_mask,
                labels: &val_y,
                concept_weight: weight,
            }
            .loss(&net.forward(&val_x)?)
        },
    )
}

fn fit_tlm<T: Scalar>(
    tlm: &mut Tlm<T>,
    inputs: &Matrix<T>,
    labels: &[usize],
    val_inputs: &Matrix<T>,
    val_labels: &[usize],
    cfg: &TrainingConfig,
) -> Result<TrainLog> {
    let rows: Vec<usize> = (0..inputs.rows()).collect();
    fit(
        tlm.net_mut(),
        &rows,
        cfg,
        |net, idx| {
            let x = inputs.select_rows(idx);
            let y: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
            let (loss, g) = loss_and_gradients(net, &Objective::Ce { labels: &y }, &x)?;
            Ok((loss, g.tensors))
        },
        |net| Objective::Ce { labels: val_labels }.loss(&net.forward(val_inputs)?),
    )
}

/// Target model on ground-truth concept vectors of the concept-labelled rows.
pub fn train_tlm<T: Scalar>(
    tlm: &mut Tlm<T>,
    train: &ConceptDataset<T>,
    val: &ConceptDataset<T>,
    cfg: &TrainingConfig,
) -> Result<TrainLog> {
    cfg.validate()?;
    let present = require_concepts(train)?;
    let val_present = val.present_indices();
    fit_tlm(
        tlm,
        &train.gather_concepts(&present),
        &train.gather_targets(&present),
        &val.gather_concepts(&val_present),
        &val.gather_targets(&val_present),
        cfg,
    )
}

/// Thresholded concept predictions for `indices`, as 0/1 reals.
fn hard_predictions<T: Scalar>(clm: &Clm<T>, ds: &ConceptDataset<T>, indices: &[usize], tau: T) -> Result<Matrix<T>> {
    let mut data = Vec::with_capacity(indices.len() * clm.n_concepts());
    for chunk in indices.chunks(EVAL_CHUNK) {
        let probs = clm_predict(clm, &ds.gather_images(chunk))?;
        for row in probs.iter_rows() {
            data.extend(threshold_cav(row, tau).into_iter().map(|b| T::lit(b as f64)));
        }
    }
    Matrix::from_vec(indices.len(), clm.n_concepts(), data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairLogs {
    pub clm: TrainLog,
    pub tlm: TrainLog,
}

/// Concept model first, then the target model on its hard predictions.
pub fn train_sequential<T: Scalar>(
    clm: &mut Clm<T>,
    tlm: &mut Tlm<T>,
    train: &ConceptDataset<T>,
    val: &ConceptDataset<T>,
    cfg: &TrainingConfig,
) -> Result<PairLogs> {
    let clm_log = train_clm(clm, train, val, cfg)?;
    let tau = T::lit(cfg.tau);
    let present = require_concepts(train)?;
    let val_present = val.present_indices();
    let tlm_log = fit_tlm(
        tlm,
        &hard_predictions(clm, train, &present, tau)?,
        &train.gather_targets(&present),
        &hard_predictions(clm, val, &val_present, tau)?,
        &val.gather_targets(&val_present),
        cfg,
    )?;
    Ok(PairLogs {
        clm: clm_log,
        tlm: tlm_log,
    })
}

/// `CE(g(sigmoid(f(x))), y) + lambda * BCE(sigmoid(f(x)), c)`.
pub fn joint_loss<T: Scalar>(
    clm: &Network<T>,
    tlm: &Network<T>,
    x: &Matrix<T>,
    concepts: &Matrix<T>,
    mask: &[bool],
    labels: &[usize],
    lambda: T,
) -> Result<T> {
    let z = clm.forward(x)?;
    let ly = Objective::Ce { labels }.loss(&tlm.forward(&z.map(sigmoid))?)?;
    let lc = Objective::Bce { targets: concepts, mask }.loss(&z)?;
    Ok(ly + lambda * lc)
}

/// [`joint_loss`] with gradients for both networks; the target loss is
/// back-propagated through the soft concept probabilities into `clm`.
pub fn joint_loss_and_gradients<T: Scalar>(
    clm: &Network<T>,
    tlm: &Network<T>,
    x: &Matrix<T>,
    concepts: &Matrix<T>,
    mask: &[bool],
    labels: &[usize],
    lambda: T,
) -> Result<(T, Gradients<T>, Gradients<T>)> {
    let clm_cache = clm.forward_cached(x)?;
    let z = clm_cache.output();
    let p = z.map(sigmoid);
    let tlm_cache = tlm.forward_cached(&p)?;
    let (ly, dy) = Objective::Ce { labels }.evaluate(tlm_cache.output())?;
    let (tlm_grads, dp) = tlm.backward(&tlm_cache, &dy, true)?;
    let dp = dp.expect("dense target model yields an input gradient");
    let (lc, mut dz) = Objective::Bce { targets: concepts, mask }.evaluate(z)?;
    for ((g, &d), &q) in dz.as_mut_slice().iter_mut().zip(dp.as_slice()).zip(p.as_slice()) {
        *g = lambda * *g + d * q * (T::one() - q);
    }
    let (clm_grads, _) = clm.backward(&clm_cache, &dz, false)?;
    Ok((ly + lambda * lc, clm_grads, tlm_grads))
}

/// Both models end to end under one optimizer.
pub fn train_joint<T: Scalar>(
    clm: &mut Clm<T>,
    tlm: &mut Tlm<T>,
    train: &ConceptDataset<T>,
    val: &ConceptDataset<T>,
    cfg: &TrainingConfig,
) -> Result<TrainLog> {
    cfg.validate()?;
    check_inputs(clm.net(), train, val)?;
    require_concepts(train)?;
    let lambda = T::lit(cfg.lambda);
    let val_idx = all_rows(val);
    let val_x = val.gather_images(&val_idx);
    let val_c = val.gather_concepts(&val_idx);
    let val_mask = val.concept_present().to_vec();
    let val_y = val.target_labels().to_vec();
    let mut pair = (clm.net().clone(), tlm.net().clone());
    let log = fit(
        &mut pair,
        &all_rows(train),
        cfg,
        |(f, g), idx| {
            let x = train.gather_images(idx);
            let targets = concept_targets(train, idx);
            let mask = match cfg.missing_concepts {
                MissingConceptPolicy::ZeroFill => vec![true; idx.len()],
                MissingConceptPolicy::Masked => train.gather_present(idx),
            };
            let labels = train.gather_targets(idx);
            let (loss, gf, gg) = joint_loss_and_gradients(f, g, &x, &targets, &mask, &labels, lambda)?;
            let mut tensors = gf.tensors;
            tensors.extend(gg.tensors);
            Ok((loss, tensors))
        },
        |(f, g)| joint_loss(f, g, &val_x, &val_c, &val_mask, &val_y, lambda),
    )?;
    *clm.net_mut() = pair.0;
    *tlm.net_mut() = pair.1;
    Ok(log)
}

/// Backbone straight to target labels, bypassing concepts altogether.
pub fn train_classifier<T: Scalar>(
    net: &mut Network<T>,
    train: &ConceptDataset<T>,
    val: &ConceptDataset<T>,
    cfg: &TrainingConfig,
) -> Result<TrainLog> {
    cfg.validate()?;
    check_inputs(net, train, val)?;
    let val_x = val.gather_images(&all_rows(val));
    let val_y = val.target_labels().to_vec();
    fit(
        net,
        &all_rows(train),
        cfg,
        |net, idx| {
            let x = train.gather_images(idx);
            let y = train.gather_targets(idx);
            let (loss, g) = loss_and_gradients(net, &Objective::Ce { labels: &y }, &x)?;
            Ok((loss, g.tensors))
        },
        |net| Objective::Ce { labels: &val_y }.loss(&net.forward(&val_x)?),
    )
}
