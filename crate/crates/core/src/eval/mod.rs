//! Utility and privacy metrics comparing synthetic records with real ones.

mod privacy;
mod report;
mod utility;

pub use privacy::{
    attribute_inference_risk, membership_inference_risk, min_distances, AttributeRisk, MembershipRisk,
    ThresholdRule, DEFAULT_KNOWN_FEATURES,
};
pub use report::{evaluate, EvalOptions, Metric, MetricsReport, Provenance, CLASSIFIER_NOTICE};
pub use utility::{
    correlation_matrix_distance, dimensionwise_prediction, downstream_auc, entropy_ranking,
    latent_cluster_distance, mca_distance, non_zero_columns, prevalence, prevalence_correlation,
    ClassifierOptions, DimensionwisePrediction, DownstreamAuc, LatentDistance, LatentOptions,
    PrevalenceComparison, PredictionTask, LATENT_LOG_FLOOR,
};
