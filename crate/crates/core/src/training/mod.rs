//! Training loops for the concept, sidecar and target models under the
//! independent, sequential and joint paradigms.

pub mod config;
pub mod log;
pub mod trainers;

pub use config::{MissingConceptPolicy, Paradigm, TrainingConfig};
pub use log::{early_stop_check, TrainLog};
pub use trainers::{
    joint_loss, joint_loss_and_gradients, train_classifier, train_clm, train_joint, train_sequential, train_sidecar_clm, train_tlm,
    PairLogs,
};
