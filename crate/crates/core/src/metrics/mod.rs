//! Node-level and graph-level network statistics.
//!
//! Every function is a pure function of an immutable graph. Per-source path
//! metrics fan out over sources through [`crate::par`] with reductions whose
//! order is fixed, so results match across thread counts.

use thiserror::Error;

use crate::graph::GraphError;

pub mod local;
pub mod paths;
pub mod spectral;
pub mod summary;

pub use local::{
    avg_clustering, avg_neighbor_degree, degree_assortativity, degree_centrality, density_directed,
    density_undirected, local_clustering, transitivity, triangles,
};
pub use paths::{
    betweenness, closeness, distance_profile, eccentricity_all, BetweennessMode, DistanceProfile,
};
pub use spectral::{eigenvector_centrality, Eigenvector};
pub use summary::{
    compute_node_metrics, summarize, sweep_graph, threshold_sweep, write_sweep_csv, GraphSummary,
    MetricColumns, NodeMetricOptions, NodeMetrics, NodeMetricsTable, NODE_CSV_HEADER,
};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("need at least {needed} nodes, got {got}")]
    TooFewNodes { needed: usize, got: usize },
    #[error("eccentricity requires connected graph")]
    Disconnected,
    #[error("thresholds must be positive and strictly ascending")]
    BadThresholds,
    #[error("metrics csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}
