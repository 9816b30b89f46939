//! Individual polarization analysis for user–source interaction data.
//!
//! The crate is organised around the analysis flow:
//!
//! * [`model`] ingests interaction records into an [`InteractionDataset`].
//! * [`metrics`] computes per-user polarization scores: the max-share
//!   polarization score, Lack of Diversity, and the entropy-based opinion and
//!   source metrics (plain, oriented and split per community).
//! * [`stats`] holds the numerical machinery: Gaussian KDE with extremum
//!   detection, k-means with Silhouette / Davies-Bouldin model selection, and
//!   Spearman rank correlation.
//! * [`graph`] builds the bipartite user–source graph and computes modularity,
//!   greedy community detection and random-walk controversy.
//! * [`synth`] generates synthetic datasets with ground-truth behavioral
//!   classes.
//! * [`pipeline`] runs the whole single-, bi- and tri-factor analysis and
//!   writes the report files.

pub mod error;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use graph::{EdgeWeighting, InteractionGraph, NodeId, Partition, RwcConfig, RwcResult, Side};
pub use metrics::{LdWeighting, MetricOptions, UserMetricVector};
pub use model::{InputFormat, InteractionDataset, InteractionRecord};
pub use stats::{ClusteringResult, KdeProfile, KmeansConfig};
pub use synth::{GroundTruth, SynthConfig};
