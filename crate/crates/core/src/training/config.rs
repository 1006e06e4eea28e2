use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Paradigm {
    #[default]
    Independent,
    Sequential,
    Joint,
}

/// How concept-missing training rows enter the concept loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingConceptPolicy {
    /// Kept, with an all-zero concept target.
    #[default]
    ZeroFill,
    /// Excluded from the concept loss.
    Masked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub paradigm: Paradigm,
    pub lr: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub lambda: f64,
    pub seed: u64,
    pub tau: f64,
    pub missing_concepts: MissingConceptPolicy,
    /// Multiplier on the concept term of the sidecar objective.
    pub sidecar_concept_weight: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            paradigm: Paradigm::Independent,
            lr: 1e-4,
            batch_size: 100,
            patience: 3,
            max_epochs: 50,
            lambda: 1.0,
            seed: 0,
            tau: 0.5,
            missing_concepts: MissingConceptPolicy::ZeroFill,
            sidecar_concept_weight: 1.0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.patience == 0 {
            return bad("patience must be at least 1".into());
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1".into());
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be non-negative, got {}", self.lambda));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return bad(format!("tau must lie in (0, 1), got {}", self.tau));
        }
        if !(self.sidecar_concept_weight >= 0.0 && self.sidecar_concept_weight.is_finite()) {
            return bad(format!(
                "sidecar_concept_weight must be non-negative, got {}",
                self.sidecar_concept_weight
            ));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}
