use std::io::Write;

use serde::{Deserialize, Serialize};

use super::model::{clm_predict, sidecar_predict, Clm, SidecarClm, SidecarOutput, Tlm};
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::scalar::Scalar;

pub const DEFAULT_TAU: f64 = 0.5;
pub const DEFAULT_EPSILON: f64 = 0.75;

/// A concept activation vector read as independent probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct CavProbs<T>(Vec<T>);

impl<T: Scalar> CavProbs<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !(**v >= T::zero() && **v <= T::one())) {
            return Err(Error::Validation(format!("concept probability {bad} outside [0, 1]")));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }
}

/// Bit `j` is set iff `probs[j] > tau`.
pub fn threshold_cav<T: Scalar>(probs: &[T], tau: T) -> Vec<u8> {
    probs.iter().map(|&p| u8::from(p > tau)).collect()
}

/// Passes a datapoint to the target model iff its most likely concept has
/// probability strictly above `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbstentionSwitch {
    epsilon: f64,
}

impl Default for AbstentionSwitch {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl AbstentionSwitch {
    /// `epsilon` may sit on either end of `[0, 1]`: 0 passes any positive
    /// maximum, 1 passes nothing.
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::Validation(format!("abstention threshold {epsilon} outside [0, 1]")));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

pub fn abstention_switch<T: Scalar>(probs: &[T], sw: &AbstentionSwitch) -> Result<bool> {
    let max = probs
        .iter()
        .copied()
        .reduce(T::max)
        .ok_or_else(|| Error::Validation("abstention switch on an empty concept vector".into()))?;
    Ok(max > T::lit(sw.epsilon))
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn hard_row<T: Scalar>(hard: &[u8]) -> Result<Matrix<T>> {
    if let Some(&bad) = hard.iter().find(|&&b| b > 1) {
        return Err(Error::Validation(format!(
            "target model input must be binary, found {bad}"
        )));
    }
    Matrix::from_vec(1, hard.len(), hard.iter().map(|&b| T::lit(b as f64)).collect())
}

pub fn tlm_predict<T: Scalar>(model: &Tlm<T>, hard_concepts: &[u8]) -> Result<usize> {
    let logits = model.net().forward(&hard_row(hard_concepts)?)?;
    Ok(argmax(logits.row(0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteSource {
    ViaTlm,
    ViaSidecar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord<T> {
    pub predicted_target: usize,
    /// Hard concept vector, `None` when the model abstained.
    pub explanation: Option<Vec<u8>>,
    pub abstained: bool,
    pub concept_probs: Vec<T>,
    pub source: RouteSource,
}

impl<T: Scalar> PredictionRecord<T> {
    pub fn max_concept_prob(&self) -> T {
        self.concept_probs.iter().copied().fold(T::zero(), T::max)
    }

    pub fn explanation_string(&self) -> String {
        match &self.explanation {
            Some(bits) => bits.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect(),
            None => "NULL".into(),
        }
    }
}

pub fn compose_prediction<T: Scalar>(
    sc: &SidecarOutput<T>,
    tlm: &Tlm<T>,
    sw: &AbstentionSwitch,
    tau: T,
) -> Result<PredictionRecord<T>> {
    if abstention_switch(&sc.concept_probs, sw)? {
        let hard = threshold_cav(&sc.concept_probs, tau);
        Ok(PredictionRecord {
            predicted_target: tlm_predict(tlm, &hard)?,
            explanation: Some(hard),
            abstained: false,
            concept_probs: sc.concept_probs.clone(),
            source: RouteSource::ViaTlm,
        })
    } else {
        Ok(PredictionRecord {
            predicted_target: argmax(&sc.target_logits),
            explanation: None,
            abstained: true,
            concept_probs: sc.concept_probs.clone(),
            source: RouteSource::ViaSidecar,
        })
    }
}

/// Sidecar pipeline over a batch.
pub fn sidecar_records<T: Scalar>(
    model: &SidecarClm<T>,
    tlm: &Tlm<T>,
    batch: &Matrix<T>,
    sw: &AbstentionSwitch,
    tau: T,
) -> Result<Vec<PredictionRecord<T>>> {
    sidecar_predict(model, batch)?
        .iter()
        .map(|sc| compose_prediction(sc, tlm, sw, tau))
        .collect()
}

/// Plain bottleneck pipeline: every row is explained.
pub fn standard_predict<T: Scalar>(
    clm: &Clm<T>,
    tlm: &Tlm<T>,
    batch: &Matrix<T>,
    tau: T,
) -> Result<Vec<PredictionRecord<T>>> {
    let probs = clm_predict(clm, batch)?;
    probs
        .iter_rows()
        .map(|p| {
            let hard = threshold_cav(p, tau);
            Ok(PredictionRecord {
                predicted_target: tlm_predict(tlm, &hard)?,
                explanation: Some(hard),
                abstained: false,
                concept_probs: p.to_vec(),
                source: RouteSource::ViaTlm,
            })
        })
        .collect()
}

/// Columns: index, predicted_target, abstained, explanation, max_concept_prob.
pub fn write_predictions_csv<T: Scalar, W: Write>(out: W, records: &[PredictionRecord<T>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "predicted_target", "abstained", "explanation", "max_concept_prob"])?;
    for (i, r) in records.iter().enumerate() {
        w.write_record([
            i.to_string(),
            r.predicted_target.to_string(),
            u8::from(r.abstained).to_string(),
            r.explanation_string(),
            format!("{}", r.max_concept_prob()),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<predictions>", e))?;
    Ok(())
}
