//! Internal cluster-validity criteria.
//!
//! Both criteria are "higher is better" and are computed from the
//! precomputed distance matrix. [`evaluate_assignment`] is the single entry
//! point used by the search.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::DistanceMatrix;
use crate::error::{IcotError, Result};

/// Lower bound on the largest cluster diameter in the Dunn ratio.
pub const DUNN_DIAMETER_FLOOR: f64 = 1e-12;

/// Silhouette reported for a single cluster.
pub const SILHOUETTE_SINGLE_CLUSTER: f64 = -1.0;

/// Dunn index reported for a single cluster.
pub const DUNN_SINGLE_CLUSTER: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Silhouette,
    Dunn,
}

impl Criterion {
    pub const ALL: [Criterion; 2] = [Criterion::Silhouette, Criterion::Dunn];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::Silhouette => "silhouette",
            Criterion::Dunn => "dunn",
        }
    }

    /// Score of a clustering with a single cluster.
    pub fn single_cluster_value(self) -> f64 {
        match self {
            Criterion::Silhouette => SILHOUETTE_SINGLE_CLUSTER,
            Criterion::Dunn => DUNN_SINGLE_CLUSTER,
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = IcotError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "silhouette" => Ok(Criterion::Silhouette),
            "dunn" => Ok(Criterion::Dunn),
            other => Err(IcotError::Usage(format!(
                "unknown criterion '{other}', expected 'silhouette' or 'dunn'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionScore {
    pub value: f64,
    pub criterion: Criterion,
}

impl fmt::Display for CriterionScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={:.6}", self.criterion, self.value)
    }
}

/// Mapping of observations to clusters.
///
/// Cluster identifiers are re-indexed densely (`0..k`) in increasing order
/// of the original labels; the original labels are kept in [`ids`](Self::ids).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    cluster_of: Vec<usize>,
    members: Vec<Vec<usize>>,
    ids: Vec<usize>,
}

impl Assignment {
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        if labels.is_empty() {
            return Err(IcotError::validation("assignment is empty"));
        }
        let mut ids: Vec<usize> = labels.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let cluster_of: Vec<usize> = labels
            .iter()
            .map(|l| ids.binary_search(l).expect("label present"))
            .collect();
        let mut members = vec![Vec::new(); ids.len()];
        for (i, &c) in cluster_of.iter().enumerate() {
            members[c].push(i);
        }
        Ok(Assignment {
            cluster_of,
            members,
            ids,
        })
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.cluster_of.len()
    }

    /// Number of nonempty clusters.
    pub fn k(&self) -> usize {
        self.members.len()
    }

    /// Dense cluster index of every observation.
    pub fn cluster_of(&self) -> &[usize] {
        &self.cluster_of
    }

    /// Members of each dense cluster, in observation order.
    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.members
    }

    /// Original label of each dense cluster.
    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    /// True when both assignments induce the same partition, ignoring labels.
    pub fn same_partition(&self, other: &Assignment) -> bool {
        if self.n() != other.n() || self.k() != other.k() {
            return false;
        }
        let mut map = vec![usize::MAX; self.k()];
        for (&a, &b) in self.cluster_of.iter().zip(&other.cluster_of) {
            if map[a] == usize::MAX {
                map[a] = b;
            } else if map[a] != b {
                return false;
            }
        }
        let mut seen = map.clone();
        seen.sort_unstable();
        seen.dedup();
        seen.len() == self.k()
    }

    fn check(&self, distances: &DistanceMatrix) -> Result<()> {
        if distances.len() != self.n() {
            return Err(IcotError::validation(format!(
                "assignment covers {} observations but distance matrix has {}",
                self.n(),
                distances.len()
            )));
        }
        Ok(())
    }
}

/// Mean silhouette width.
///
/// Singleton members score 0, as do points whose cohesion and separation
/// are both zero. A single cluster scores [`SILHOUETTE_SINGLE_CLUSTER`].
pub fn silhouette(distances: &DistanceMatrix, assignment: &Assignment) -> Result<CriterionScore> {
    assignment.check(distances)?;
    let value = if assignment.k() < 2 {
        SILHOUETTE_SINGLE_CLUSTER
    } else {
        silhouette_value(distances, assignment.cluster_of(), &assignment.sizes())
    };
    Ok(CriterionScore {
        value,
        criterion: Criterion::Silhouette,
    })
}

/// Silhouette over dense labels with at least two nonempty clusters.
pub(crate) fn silhouette_value(distances: &DistanceMatrix, labels: &[usize], sizes: &[usize]) -> f64 {
    let n = labels.len();
    let mut sums = vec![0.0; sizes.len()];
    let mut total = 0.0;
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for (d, &c) in distances.row(i).iter().zip(labels) {
            sums[c] += d;
        }
        total += point_silhouette(labels[i], &sums, sizes);
    }
    total / n as f64
}

/// Silhouette of one point given its per-cluster distance sums.
#[inline]
pub(crate) fn point_silhouette(own: usize, sums: &[f64], sizes: &[usize]) -> f64 {
    if sizes[own] <= 1 {
        return 0.0;
    }
    let a = sums[own] / (sizes[own] - 1) as f64;
    let mut b = f64::INFINITY;
    for (c, (&sum, &size)) in sums.iter().zip(sizes).enumerate() {
        if c != own && size > 0 {
            b = b.min(sum / size as f64);
        }
    }
    let denom = a.max(b);
    if denom > 0.0 && b.is_finite() {
        (b - a) / denom
    } else {
        0.0
    }
}

/// Dunn index: smallest distance between points of different clusters over
/// the largest distance between points of the same cluster.
///
/// A single cluster scores [`DUNN_SINGLE_CLUSTER`]; the largest diameter is
/// floored at [`DUNN_DIAMETER_FLOOR`].
pub fn dunn(distances: &DistanceMatrix, assignment: &Assignment) -> Result<CriterionScore> {
    assignment.check(distances)?;
    let value = if assignment.k() < 2 {
        DUNN_SINGLE_CLUSTER
    } else {
        let labels = assignment.cluster_of();
        let mut separation = f64::INFINITY;
        let mut diameter: f64 = 0.0;
        for i in 0..labels.len() {
            let row = distances.row(i);
            for j in 0..i {
                if labels[i] == labels[j] {
                    diameter = diameter.max(row[j]);
                } else {
                    separation = separation.min(row[j]);
                }
            }
        }
        dunn_ratio(separation, diameter)
    };
    Ok(CriterionScore {
        value,
        criterion: Criterion::Dunn,
    })
}

#[inline]
pub(crate) fn dunn_ratio(separation: f64, diameter: f64) -> f64 {
    separation / diameter.max(DUNN_DIAMETER_FLOOR)
}

/// Scores `assignment` with the named criterion.
pub fn evaluate_assignment(
    criterion: Criterion,
    distances: &DistanceMatrix,
    assignment: &Assignment,
) -> Result<CriterionScore> {
    match criterion {
        Criterion::Silhouette => silhouette(distances, assignment),
        Criterion::Dunn => dunn(distances, assignment),
    }
}

/// Like [`evaluate_assignment`] but takes the criterion by name.
pub fn evaluate_named(
    criterion: &str,
    distances: &DistanceMatrix,
    assignment: &Assignment,
) -> Result<CriterionScore> {
    evaluate_assignment(criterion.parse()?, distances, assignment)
}
