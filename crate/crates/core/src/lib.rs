//! Random geometric graph posteriors learnt from joint-location time series,
//! distances between the posteriors of successive sessions, and the
//! Mobility Recovery Score trajectories built from them.

pub mod correlation;
pub mod distance;
pub mod error;
pub mod graph;
pub mod ingest;
pub mod pipeline;
pub mod synth;
pub mod trajectory;

pub use correlation::{partial_correlation, pearson_matrix, precision_matrix, CorrelationStructure, RidgeLadder};
pub use distance::{hellinger, kl_divergence, DistanceResult, DistanceRow, DistanceScales};
pub use error::{Error, Result};
pub use graph::{
    edge_marginal_bracket, edge_posterior, graph_log_posterior, realize_graph, sample_edges, EdgeMarginal,
    GraphRealization, GraphSampleSet, Proposal, SamplingConfig, SamplingMethod,
};
pub use ingest::{location_norms, standardize, Manifest, ManifestEntry, RawSession, SessionKey, SessionSeries};
pub use pipeline::{run_pipeline, RunConfig, RunSummary};
pub use synth::{generate_session, CorrelationModel, SynthPlan, SynthSpec};
pub use trajectory::{mrs_trajectory, recommendation_table, recovery_parameter, RecoveryPoint, RecoveryTrajectory};
