//! Classical learners and summaries used by the evaluation suite.

mod classification;
mod correlation;
mod histogram;
mod kmeans;
mod logistic;
mod pca;

pub use classification::{auc, f1_score, Confusion};
pub use correlation::{binary_entropy, correlation_matrix, pearson};
pub use histogram::{fixed_histogram, Histogram};
pub use kmeans::{elbow_select, inertia_curve, kmeans, ClusterResult};
pub(crate) use kmeans::elbow_from_curve;
pub use logistic::{logistic_fit, LogisticModel};
pub use pca::{pca_fit, Pca};
