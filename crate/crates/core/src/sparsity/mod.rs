//! Data-sparsity penalties that inflate costs where coverage is thin.
//!
//! Tabular data use visit counts directly. Continuous data are clustered
//! with k-means; each cluster's dispersion around its centroid is
//! standardized into a z-score, and a softmax over a batch turns those
//! scores into multiplicative penalties that average to one.

pub mod continuous;
pub mod kmeans;
pub mod score;
pub mod tabular;

pub use continuous::{
    preprocess_continuous, read_continuous_csv, write_centroids_csv, write_clusters_csv,
    write_continuous_csv, ContinuousDataset, ContinuousRow, PreprocessConfig, PreprocessOutput,
};
pub use kmeans::{kmeans_fit, ClusteringModel, KMeansConfig};
pub use score::{batch_penalties, cluster_sparsity, standardize, PenaltyVector, SparsityScores};
pub use tabular::{
    constant_penalty, count_penalty, penalize_costs, penalize_table, tabular_penalty, Costs,
    PenalizedCosts, Penalty, TabularPenalty,
};
