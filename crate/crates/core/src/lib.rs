//! Interpretable clustering with optimal trees.
//!
//! A clustering is represented as an axis-parallel binary tree whose leaves
//! are the clusters. Trees are grown greedily from random features and then
//! refined by node-wise local search against an internal validity criterion
//! (Silhouette or Dunn), restarted from many random greedy trees.
//!
//! The crate also ships the reference methods used to judge the trees
//! (K-Means and a two-step supervised tree fitted to K-Means labels), an
//! exhaustive optimal-tree oracle for tiny instances, and an exporter for the
//! mixed-integer formulation of the same problem.

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod oracle;
pub mod report;
pub mod search;
mod sweep;
pub mod synthetic;
pub mod tree;

pub use baselines::{kmeans, score_truth, two_step_tree, KMeansConfig, KMeansResult};
pub use dataset::{ColumnKind, ColumnSchema, Dataset, LabeledDataset, LoadOptions};
pub use error::{IcotError, Result};
pub use metrics::{dunn, evaluate_assignment, silhouette, Assignment, Criterion, CriterionScore};
pub use search::{auto_cluster_count, fit, FitResult, SearchConfig, SearchTrace};
pub use synthetic::{generate_synthetic, SyntheticShape};
pub use tree::{ClusterTree, NodeId, SplitRule};
