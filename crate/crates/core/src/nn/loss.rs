//! Loss functions and their gradients with respect to network logits.

use super::activation::sigmoid;
use super::matrix::Matrix;
use super::network::{Gradients, Network};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Probabilities are clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]` before the log.
pub const BCE_CLAMP: f64 = 1e-7;

fn same_shape<T>(a: &Matrix<T>, b: &Matrix<T>, what: &str) -> Result<()> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::Shape(format!(
            "{what}: {}x{} vs {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Ok(())
}

/// Mean binary cross-entropy over the rows whose `mask` entry is set,
/// averaged over `masked_rows x C` cells. Zero when no row is masked in.
pub fn bce_loss<T: Scalar>(probs: &Matrix<T>, targets: &Matrix<T>, mask: &[bool]) -> Result<T> {
    same_shape(probs, targets, "probabilities vs targets")?;
    if mask.len() != probs.rows() {
        return Err(Error::Shape(format!(
            "mask has {} entries for {} rows",
            mask.len(),
            probs.rows()
        )));
    }
    let lo = T::lit(BCE_CLAMP);
    let hi = T::one() - lo;
    let mut total = T::zero();
    let mut rows = 0usize;
    for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        rows += 1;
        for (&p, &t) in probs.row(i).iter().zip(targets.row(i)) {
            let p = p.max(lo).min(hi);
            total -= t * p.ln() + (T::one() - t) * (T::one() - p).ln();
        }
    }
    if rows == 0 || probs.cols() == 0 {
        return Ok(T::zero());
    }
    Ok(total / T::lit((rows * probs.cols()) as f64))
}

/// Mean negative log-softmax probability of the true label.
pub fn ce_loss<T: Scalar>(logits: &Matrix<T>, labels: &[usize]) -> Result<T> {
    check_labels(logits, labels)?;
    if labels.is_empty() {
        return Ok(T::zero());
    }
    let mut total = T::zero();
    for (row, &y) in logits.iter_rows().zip(labels) {
        total += log_sum_exp(row) - row[y];
    }
    Ok(total / T::lit(labels.len() as f64))
}

fn check_labels<T: Scalar>(logits: &Matrix<T>, labels: &[usize]) -> Result<()> {
    if labels.len() != logits.rows() {
        return Err(Error::Shape(format!(
            "{} labels for {} rows",
            labels.len(),
            logits.rows()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= logits.cols()) {
        return Err(Error::Validation(format!(
            "label {bad} outside [0, {})",
            logits.cols()
        )));
    }
    Ok(())
}

pub(crate) fn log_sum_exp<T: Scalar>(row: &[T]) -> T {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    max + row.iter().map(|&z| (z - max).exp()).sum::<T>().ln()
}

pub(crate) fn softmax_row<T: Scalar>(row: &[T], out: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for (o, &z) in out.iter_mut().zip(row) {
        *o = (z - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// BCE on `sigmoid(logits)`: loss and gradient with respect to the logits.
fn bce_logits<T: Scalar>(
    logits: &Matrix<T>,
    targets: &Matrix<T>,
    mask: &[bool],
    scale: T,
    grad: &mut Matrix<T>,
    col_offset: usize,
) -> Result<T> {
    let probs = logits.map(sigmoid);
    let loss = bce_loss(&probs, targets, mask)?;
    let rows = mask.iter().filter(|&&m| m).count();
    if rows > 0 && logits.cols() > 0 {
        let denom = T::lit((rows * logits.cols()) as f64);
        for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
            for (j, (&p, &t)) in probs.row(i).iter().zip(targets.row(i)).enumerate() {
                grad[(i, col_offset + j)] += scale * (p - t) / denom;
            }
        }
    }
    Ok(scale * loss)
}

fn ce_logits<T: Scalar>(logits: &Matrix<T>, labels: &[usize], scale: T, grad: &mut Matrix<T>, col_offset: usize) -> Result<T> {
    let loss = ce_loss(logits, labels)?;
    if labels.is_empty() {
        return Ok(loss);
    }
    let n = T::lit(labels.len() as f64);
    let mut soft = vec![T::zero(); logits.cols()];
    for (i, &y) in labels.iter().enumerate() {
        softmax_row(logits.row(i), &mut soft);
        for (j, &s) in soft.iter().enumerate() {
            let t = if j == y { T::one() } else { T::zero() };
            grad[(i, col_offset + j)] += scale * (s - t) / n;
        }
    }
    Ok(scale * loss)
}

/// Scalar training objective over network logits.
#[derive(Debug, Clone, Copy)]
pub enum Objective<'a, T> {
    /// Sigmoid on every output, masked mean BCE against `targets`.
    Bce { targets: &'a Matrix<T>, mask: &'a [bool] },
    /// Softmax cross-entropy over all outputs.
    Ce { labels: &'a [usize] },
    /// First `concepts` outputs scored by masked BCE (times `concept_weight`),
    /// the remaining outputs by cross-entropy.
    Split {
        concepts: usize,
        targets: &'a Matrix<T>,
        mask: &'a [bool],
        labels: &'a [usize],
        concept_weight: T,
    },
}

impl<T: Scalar> Objective<'_, T> {
    /// Loss value and its gradient with respect to `logits`.
    pub fn evaluate(&self, logits: &Matrix<T>) -> Result<(T, Matrix<T>)> {
        let mut grad = Matrix::zeros(logits.rows(), logits.cols());
        let loss = match *self {
            Objective::Bce { targets, mask } => {
                same_shape(logits, targets, "logits vs targets")?;
                bce_logits(logits, targets, mask, T::one(), &mut grad, 0)?
            }
            Objective::Ce { labels } => ce_logits(logits, labels, T::one(), &mut grad, 0)?,
            Objective::Split {
                concepts,
                targets,
                mask,
                labels,
                concept_weight,
            } => {
                if concepts > logits.cols() || targets.cols() != concepts || targets.rows() != logits.rows() {
                    return Err(Error::Shape(format!(
                        "split objective with {concepts} concepts does not fit {}x{} logits / {}x{} targets",
                        logits.rows(),
                        logits.cols(),
                        targets.rows(),
                        targets.cols()
                    )));
                }
                let concept_logits = logits.column_block(0, concepts);
                let target_logits = logits.column_block(concepts, logits.cols());
                let lc = bce_logits(&concept_logits, targets, mask, concept_weight, &mut grad, 0)?;
                let ly = ce_logits(&target_logits, labels, T::one(), &mut grad, concepts)?;
                lc + ly
            }
        };
        Ok((loss, grad))
    }

    pub fn loss(&self, logits: &Matrix<T>) -> Result<T> {
        Ok(self.evaluate(logits)?.0)
    }
}

/// Loss of `net` on `batch` together with every parameter gradient.
pub fn loss_and_gradients<T: Scalar>(
    net: &Network<T>,
    objective: &Objective<'_, T>,
    batch: &Matrix<T>,
) -> Result<(T, Gradients<T>)> {
    let cache = net.forward_cached(batch)?;
    let (loss, grad_logits) = objective.evaluate(cache.output())?;
    let (grads, _) = net.backward(&cache, &grad_logits, false)?;
    Ok((loss, grads))
}
