use crate::cbm::PredictionRecord;
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::scalar::Scalar;

/// Fraction of records whose prediction equals the truth.
pub fn target_accuracy<T: Scalar>(records: &[PredictionRecord<T>], truth: &[usize]) -> Result<f64> {
    if records.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            records.len(),
            truth.len()
        )));
    }
    if records.is_empty() {
        return Err(Error::Validation("accuracy of an empty prediction set".into()));
    }
    let correct = records
        .iter()
        .zip(truth)
        .filter(|(r, &y)| r.predicted_target == y)
        .count();
    Ok(correct as f64 / records.len() as f64)
}

/// Fraction of records that carry an explanation.
pub fn explanation_coverage<T: Scalar>(records: &[PredictionRecord<T>]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Validation("coverage of an empty prediction set".into()));
    }
    let covered = records.iter().filter(|r| !r.abstained).count();
    Ok(covered as f64 / records.len() as f64)
}

/// Confusion counts over (covered datapoint, concept) cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConceptCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConceptCounts {
    /// `2TP / (2TP + FP + FN)`, NaN when every count is zero.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            f64::NAN
        } else {
            (2 * self.tp) as f64 / denom as f64
        }
    }
}

/// Per-concept counts over explained records.
pub fn concept_counts<T: Scalar>(
    records: &[PredictionRecord<T>],
    true_concepts: &Matrix<u8>,
) -> Result<(Vec<ConceptCounts>, usize)> {
    if records.len() != true_concepts.rows() {
        return Err(Error::Shape(format!(
            "{} predictions for {} concept rows",
            records.len(),
            true_concepts.rows()
        )));
    }
    let c = true_concepts.cols();
    let mut counts = vec![ConceptCounts::default(); c];
    let mut covered = 0;
    for (i, r) in records.iter().enumerate() {
        let Some(pred) = &r.explanation else { continue };
        if pred.len() != c {
            return Err(Error::Shape(format!(
                "explanation {i} has {} concepts, expected {c}",
                pred.len()
            )));
        }
        covered += 1;
        for (k, (&p, &t)) in pred.iter().zip(true_concepts.row(i)).enumerate() {
            match (p == 1, t == 1) {
                (true, true) => counts[k].tp += 1,
                (true, false) => counts[k].fp += 1,
                (false, true) => counts[k].fn_ += 1,
                (false, false) => {}
            }
        }
    }
    Ok((counts, covered))
}

/// Micro-averaged F1 of explanations against the truth, over explained
/// records only. NaN when nothing was explained.
pub fn explanation_f1<T: Scalar>(records: &[PredictionRecord<T>], true_concepts: &Matrix<u8>) -> Result<f64> {
    let (counts, covered) = concept_counts(records, true_concepts)?;
    if covered == 0 {
        return Ok(f64::NAN);
    }
    let total = counts.iter().fold(ConceptCounts::default(), |a, c| ConceptCounts {
        tp: a.tp + c.tp,
        fp: a.fp + c.fp,
        fn_: a.fn_ + c.fn_,
    });
    let f1 = total.f1();
    Ok(if f1.is_nan() { 0.0 } else { f1 })
}

/// Mean of per-concept F1 scores, skipping concepts that never occur in
/// either the explanations or the truth. NaN when nothing was explained.
pub fn explanation_f1_macro<T: Scalar>(records: &[PredictionRecord<T>], true_concepts: &Matrix<u8>) -> Result<f64> {
    let (counts, covered) = concept_counts(records, true_concepts)?;
    if covered == 0 {
        return Ok(f64::NAN);
    }
    let scores: Vec<f64> = counts.iter().map(ConceptCounts::f1).filter(|f| !f.is_nan()).collect();
    if scores.is_empty() {
        return Ok(0.0);
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}
