//! Cluster hierarchies over embedding sets and their semantic interpretation.
//!
//! The pipeline builds a minimum spanning tree in either the Euclidean or the
//! mutual-reachability space (`min_pts = 0` gives plain single linkage),
//! condenses the resulting merge sequence into a hierarchy of clusters, scores
//! hierarchy nodes against labelled class divisions, greedily matches classes
//! to their best nodes, and renders the annotated hierarchy as an icicle
//! dendrogram.

pub mod cli;
pub mod dbscan;
pub mod embedding_io;
pub mod hierarchy;
pub mod matching;
pub mod metric;
pub mod mst;
pub mod pipeline;
pub mod render;
pub mod synth;
mod union_find;

pub use dbscan::{dbscan_flat, FlatPartition};
pub use embedding_io::{divisions_from_labels, ClassDivision, DivisionKind, EmbeddingSet, LabelTable};
pub use hierarchy::{build_hierarchy, Cluster, ClusterHierarchy, ClusterNode};
pub use matching::{ccm_overall, conjunctive_divisions, hccm_match, pair_score, MatchReport, Metric, PairScore};
pub use metric::{core_distances, mutual_reachability, pairwise_distance, CoreDistances, DistanceMatrix};
pub use mst::{build_mst, flat_cut, mst_to_linkage, LinkageTree, MinimumSpanningTree};
pub use render::{render_json, render_svg, RenderSpec};
pub use synth::{generate, SynthConfig};
