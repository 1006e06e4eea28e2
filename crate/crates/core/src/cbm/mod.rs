//! Concept models, hard thresholding, the abstention switch and the rule
//! that routes each datapoint through the bottleneck or around it.

pub mod model;
pub mod predict;

pub use model::{clm_predict, sidecar_predict, Backbone, Clm, SidecarClm, SidecarOutput, Tlm, TLM_HIDDEN};
pub use predict::{
    abstention_switch, argmax, compose_prediction, sidecar_records, standard_predict, threshold_cav, tlm_predict,
    write_predictions_csv, AbstentionSwitch, CavProbs, PredictionRecord, RouteSource, DEFAULT_EPSILON, DEFAULT_TAU,
};
