//! Axis-parallel clustering trees.
//!
//! Nodes are stored in preorder with the root at index 0, lower child before
//! upper child. Every structural edit returns a new tree in that canonical
//! form, and leaves are numbered left to right, so a leaf's cluster id is its
//! position among the leaves.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{IcotError, Result};
use crate::metrics::Assignment;

pub type NodeId = usize;

/// Schema tag written into tree documents.
pub const TREE_SCHEMA: &str = "icot-tree/1";

/// `x[feature] < threshold` sends an observation to the lower child.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRule {
    pub feature: usize,
    pub threshold: f64,
}

impl SplitRule {
    pub fn new(feature: usize, threshold: f64) -> Self {
        SplitRule { feature, threshold }
    }

    #[inline]
    pub fn goes_lower(&self, x: &[f64]) -> bool {
        x[self.feature] < self.threshold
    }
}

/// Which child of a branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Branch {
        rule: SplitRule,
        lower: NodeId,
        upper: NodeId,
    },
    Leaf {
        cluster_id: usize,
    },
}

/// Owned recursive form used to rebuild the preorder arena after edits.
#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Leaf,
    Branch(SplitRule, Box<Shape>, Box<Shape>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterTree {
    nodes: Vec<Node>,
    parents: Vec<Option<NodeId>>,
    n_features: usize,
}

impl ClusterTree {
    /// A single-leaf tree over `n_features` features.
    pub fn leaf(n_features: usize) -> Self {
        Self::from_shape(&Shape::Leaf, n_features)
    }

    /// A depth-1 tree with one split.
    pub fn stump(n_features: usize, rule: SplitRule) -> Self {
        Self::leaf(n_features).split_leaf(0, rule)
    }

    fn from_shape(shape: &Shape, n_features: usize) -> Self {
        fn push(
            shape: &Shape,
            parent: Option<NodeId>,
            nodes: &mut Vec<Node>,
            parents: &mut Vec<Option<NodeId>>,
            leaves: &mut usize,
        ) -> NodeId {
            let id = nodes.len();
            parents.push(parent);
            match shape {
                Shape::Leaf => {
                    nodes.push(Node::Leaf { cluster_id: *leaves });
                    *leaves += 1;
                }
                Shape::Branch(rule, lower, upper) => {
                    nodes.push(Node::Leaf { cluster_id: 0 });
                    let lo = push(lower, Some(id), nodes, parents, leaves);
                    let up = push(upper, Some(id), nodes, parents, leaves);
                    nodes[id] = Node::Branch {
                        rule: *rule,
                        lower: lo,
                        upper: up,
                    };
                }
            }
            id
        }
        let mut nodes = Vec::new();
        let mut parents = Vec::new();
        push(shape, None, &mut nodes, &mut parents, &mut 0);
        ClusterTree {
            nodes,
            parents,
            n_features,
        }
    }

    fn shape_at(&self, id: NodeId) -> Shape {
        match self.nodes[id] {
            Node::Leaf { .. } => Shape::Leaf,
            Node::Branch { rule, lower, upper } => Shape::Branch(
                rule,
                Box::new(self.shape_at(lower)),
                Box::new(self.shape_at(upper)),
            ),
        }
    }

    /// Rebuilds the tree with the subtree at `target` replaced by `edit(old)`.
    fn rebuild(&self, target: NodeId, edit: impl FnOnce(Shape) -> Shape) -> Self {
        fn walk(tree: &ClusterTree, id: NodeId, target: NodeId, edit: &mut Option<impl FnOnce(Shape) -> Shape>) -> Shape {
            if id == target {
                let f = edit.take().expect("target visited once");
                return f(tree.shape_at(id));
            }
            match tree.nodes[id] {
                Node::Leaf { .. } => Shape::Leaf,
                Node::Branch { rule, lower, upper } => Shape::Branch(
                    rule,
                    Box::new(walk(tree, lower, target, edit)),
                    Box::new(walk(tree, upper, target, edit)),
                ),
            }
        }
        let shape = walk(self, 0, target, &mut Some(edit));
        Self::from_shape(&shape, self.n_features)
    }

    /// Turns leaf `id` into a branch with two fresh leaves.
    pub fn split_leaf(&self, id: NodeId, rule: SplitRule) -> Self {
        assert!(self.is_leaf(id), "node {id} is not a leaf");
        assert!(rule.feature < self.n_features, "feature out of range");
        self.rebuild(id, |_| Shape::Branch(rule, Box::new(Shape::Leaf), Box::new(Shape::Leaf)))
    }

    /// Replaces the rule of branch `id`, keeping both subtrees.
    pub fn set_rule(&self, id: NodeId, rule: SplitRule) -> Self {
        assert!(rule.feature < self.n_features, "feature out of range");
        self.rebuild(id, |shape| match shape {
            Shape::Branch(_, lower, upper) => Shape::Branch(rule, lower, upper),
            Shape::Leaf => panic!("node {id} is not a branch"),
        })
    }

    /// Replaces branch `id` by one of its child subtrees.
    pub fn collapse(&self, id: NodeId, keep: Side) -> Self {
        self.rebuild(id, |shape| match shape {
            Shape::Branch(_, lower, upper) => match keep {
                Side::Lower => *lower,
                Side::Upper => *upper,
            },
            Shape::Leaf => panic!("node {id} is not a branch"),
        })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        matches!(self.nodes[id], Node::Leaf { .. })
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.parents[id]
    }

    /// Edge count from the root to `id`.
    pub fn node_depth(&self, id: NodeId) -> usize {
        let mut depth = 0;
        let mut cur = id;
        while let Some(p) = self.parents[cur] {
            depth += 1;
            cur = p;
        }
        depth
    }

    /// Maximum root-to-leaf edge count.
    pub fn depth(&self) -> usize {
        self.leaves().map(|id| self.node_depth(id)).max().unwrap_or(0)
    }

    /// Leaf node ids in left-to-right order.
    pub fn leaves(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).filter(|&id| self.is_leaf(id))
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().count()
    }

    /// Branch node ids in preorder.
    pub fn branches(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).filter(|&id| !self.is_leaf(id))
    }

    pub fn cluster_id(&self, leaf: NodeId) -> usize {
        match self.nodes[leaf] {
            Node::Leaf { cluster_id } => cluster_id,
            Node::Branch { .. } => panic!("node {leaf} is not a leaf"),
        }
    }

    /// Sides taken from the root to reach `id`.
    pub fn path_to(&self, id: NodeId) -> Vec<Side> {
        let mut path = Vec::new();
        let mut cur = id;
        while let Some(p) = self.parents[cur] {
            match self.nodes[p] {
                Node::Branch { lower, .. } if lower == cur => path.push(Side::Lower),
                _ => path.push(Side::Upper),
            }
            cur = p;
        }
        path.reverse();
        path
    }

    /// Node reached by following `path` from the root, if it exists.
    pub fn node_at(&self, path: &[Side]) -> Option<NodeId> {
        let mut cur = 0;
        for side in path {
            match self.nodes[cur] {
                Node::Branch { lower, upper, .. } => {
                    cur = if *side == Side::Lower { lower } else { upper }
                }
                Node::Leaf { .. } => return None,
            }
        }
        Some(cur)
    }

    /// The split rules and sides on the way from the root to `id`.
    pub fn decision_path(&self, id: NodeId) -> Vec<(SplitRule, Side)> {
        let mut cur = 0;
        let mut out = Vec::new();
        for side in self.path_to(id) {
            if let Node::Branch { rule, lower, upper } = self.nodes[cur] {
                out.push((rule, side));
                cur = if side == Side::Lower { lower } else { upper };
            }
        }
        out
    }

    /// Leaf reached by `x` starting from node `start`.
    #[inline]
    pub fn descend(&self, start: NodeId, x: &[f64]) -> NodeId {
        let mut cur = start;
        while let Node::Branch { rule, lower, upper } = self.nodes[cur] {
            cur = if rule.goes_lower(x) { lower } else { upper };
        }
        cur
    }

    /// Cluster id of the leaf reached by `x`.
    pub fn route(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.n_features {
            return Err(IcotError::validation(format!(
                "observation has {} features, tree expects {}",
                x.len(),
                self.n_features
            )));
        }
        Ok(self.cluster_id(self.descend(0, x)))
    }

    /// Leaf node id of every observation.
    pub fn leaf_of_each(&self, data: &Dataset) -> Vec<NodeId> {
        data.rows().iter().map(|x| self.descend(0, x)).collect()
    }

    /// Cluster id of every observation.
    pub fn labels(&self, data: &Dataset) -> Result<Vec<usize>> {
        self.check_dataset(data)?;
        Ok(self
            .leaf_of_each(data)
            .into_iter()
            .map(|leaf| self.cluster_id(leaf))
            .collect())
    }

    /// Observations grouped by the tree's nonempty leaves.
    pub fn assign_all(&self, data: &Dataset) -> Result<Assignment> {
        Assignment::from_labels(&self.labels(data)?)
    }

    /// Number of observations in each leaf, indexed by cluster id.
    pub fn leaf_sizes(&self, data: &Dataset) -> Result<Vec<usize>> {
        let mut sizes = vec![0; self.leaf_count()];
        for c in self.labels(data)? {
            sizes[c] += 1;
        }
        Ok(sizes)
    }

    fn check_dataset(&self, data: &Dataset) -> Result<()> {
        if data.p() != self.n_features {
            return Err(IcotError::validation(format!(
                "dataset has {} features, tree expects {}",
                data.p(),
                self.n_features
            )));
        }
        Ok(())
    }

    /// Tree document text. Feature names and leaf sizes are included when given.
    pub fn to_json(&self, feature_names: Option<&[String]>, leaf_sizes: Option<&[usize]>) -> String {
        let doc = TreeDocument {
            schema: TREE_SCHEMA.to_string(),
            n_features: self.n_features,
            root: self.doc_node(0, feature_names, leaf_sizes),
        };
        serde_json::to_string_pretty(&doc).expect("tree documents serialize")
    }

    /// Tree document value, for embedding in larger reports.
    pub fn to_document(&self, feature_names: Option<&[String]>, leaf_sizes: Option<&[usize]>) -> TreeDocument {
        TreeDocument {
            schema: TREE_SCHEMA.to_string(),
            n_features: self.n_features,
            root: self.doc_node(0, feature_names, leaf_sizes),
        }
    }

    fn doc_node(&self, id: NodeId, names: Option<&[String]>, sizes: Option<&[usize]>) -> DocNode {
        match self.nodes[id] {
            Node::Leaf { cluster_id } => DocNode::Leaf {
                cluster_id,
                size: sizes.map(|s| s[cluster_id]),
            },
            Node::Branch { rule, lower, upper } => DocNode::Branch {
                feature: rule.feature,
                feature_name: names.map(|n| n[rule.feature].clone()),
                threshold: rule.threshold,
                lower: Box::new(self.doc_node(lower, names, sizes)),
                upper: Box::new(self.doc_node(upper, names, sizes)),
            },
        }
    }

    /// Parses a tree document produced by [`to_json`](Self::to_json).
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TreeDocument = serde_json::from_str(text).map_err(|e| IcotError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::from_document(&doc)
    }

    pub fn from_document(doc: &TreeDocument) -> Result<Self> {
        if doc.schema != TREE_SCHEMA {
            return Err(IcotError::validation(format!(
                "unsupported tree schema '{}', expected '{TREE_SCHEMA}'",
                doc.schema
            )));
        }
        let mut ids = Vec::new();
        let shape = doc_to_shape(&doc.root, doc.n_features, &mut ids)?;
        let expected: Vec<usize> = (0..ids.len()).collect();
        if ids != expected {
            return Err(IcotError::validation(format!(
                "leaf cluster ids must be numbered left to right from 0, found {ids:?}"
            )));
        }
        Ok(Self::from_shape(&shape, doc.n_features))
    }
}

fn doc_to_shape(node: &DocNode, p: usize, ids: &mut Vec<usize>) -> Result<Shape> {
    match node {
        DocNode::Leaf { cluster_id, .. } => {
            ids.push(*cluster_id);
            Ok(Shape::Leaf)
        }
        DocNode::Branch {
            feature,
            threshold,
            lower,
            upper,
            ..
        } => {
            if *feature >= p {
                return Err(IcotError::validation(format!(
                    "split feature {feature} out of range for {p} features"
                )));
            }
            if !threshold.is_finite() {
                return Err(IcotError::validation("split threshold is not finite"));
            }
            Ok(Shape::Branch(
                SplitRule::new(*feature, *threshold),
                Box::new(doc_to_shape(lower, p, ids)?),
                Box::new(doc_to_shape(upper, p, ids)?),
            ))
        }
    }
}

/// Serialized tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDocument {
    pub schema: String,
    pub n_features: usize,
    pub root: DocNode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node_type", rename_all = "lowercase")]
pub enum DocNode {
    Branch {
        feature: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        feature_name: Option<String>,
        threshold: f64,
        lower: Box<DocNode>,
        upper: Box<DocNode>,
    },
    Leaf {
        cluster_id: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        size: Option<usize>,
    },
}

/// Midpoints between consecutive distinct values of `feature` over `subset`.
pub fn candidate_thresholds(data: &Dataset, feature: usize, subset: &[usize]) -> Result<Vec<f64>> {
    if feature >= data.p() {
        return Err(IcotError::validation(format!(
            "feature {feature} out of range for {} features",
            data.p()
        )));
    }
    let mut values: Vec<f64> = subset.iter().map(|&i| data.value(i, feature)).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    Ok(values.windows(2).map(|w| midpoint(w[0], w[1])).collect())
}

/// A threshold `t` with `lo < t <= hi`.
#[inline]
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid > lo {
        mid
    } else {
        hi
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f64]) -> Dataset {
        let rows: Vec<Vec<f64>> = points.iter().map(|p| vec![*p]).collect();
        Dataset::from_rows(&rows).unwrap()
    }

    #[test]
    fn routing_uses_strict_lower_branch() {
        let tree = ClusterTree::stump(1, SplitRule::new(0, 0.5));
        assert_eq!(tree.route(&[0.3]).unwrap(), 0);
        assert_eq!(tree.route(&[0.5]).unwrap(), 1);
        assert!(tree.route(&[0.5, 0.1]).is_err());
        assert_eq!(ClusterTree::leaf(2).route(&[0.9, 0.1]).unwrap(), 0);
    }

    #[test]
    fn assign_all_examples() {
        let data = line(&[0.0, 0.1, 0.9, 1.0]);
        let a = ClusterTree::stump(1, SplitRule::new(0, 0.5)).assign_all(&data).unwrap();
        assert_eq!(a.clusters(), &[vec![0, 1], vec![2, 3]]);
        let a = ClusterTree::stump(1, SplitRule::new(0, 0.05)).assign_all(&data).unwrap();
        assert_eq!(a.clusters(), &[vec![0], vec![1, 2, 3]]);
        let a = ClusterTree::leaf(1).assign_all(&data).unwrap();
        assert_eq!(a.k(), 1);
    }

    #[test]
    fn empty_leaves_do_not_count() {
        let data = line(&[0.0, 0.1, 0.9, 1.0]);
        let tree = ClusterTree::stump(1, SplitRule::new(0, 2.0));
        assert_eq!(tree.assign_all(&data).unwrap().k(), 1);
        assert_eq!(tree.leaf_sizes(&data).unwrap(), vec![4, 0]);
    }

    #[test]
    fn threshold_examples() {
        let data = line(&[0.0, 0.1, 0.9, 1.0]);
        let t = candidate_thresholds(&data, 0, &[0, 1, 2, 3]).unwrap();
        assert_eq!(t.len(), 3);
        for (got, want) in t.iter().zip([0.05, 0.5, 0.95]) {
            assert!((got - want).abs() < 1e-12);
        }
        let flat = Dataset::from_rows(&[vec![0.3, 0.0], vec![0.3, 1.0], vec![0.3, 0.5]]).unwrap();
        assert!(candidate_thresholds(&flat, 0, &[0, 1, 2]).unwrap().is_empty());
        assert_eq!(candidate_thresholds(&flat, 1, &[0, 1]).unwrap(), vec![0.5]);
        assert!(candidate_thresholds(&flat, 2, &[0]).is_err());
    }

    #[test]
    fn edits_keep_canonical_numbering() {
        let tree = ClusterTree::stump(2, SplitRule::new(0, 0.5));
        let tree = tree.split_leaf(1, SplitRule::new(1, 0.25));
        assert_eq!(tree.leaf_count(), 3);
        assert_eq!(tree.depth(), 2);
        let ids: Vec<usize> = tree.leaves().map(|l| tree.cluster_id(l)).collect();
        assert_eq!(ids, vec![0, 1, 2]);
        assert_eq!(tree.path_to(3), vec![Side::Lower, Side::Upper]);
        assert_eq!(tree.node_at(&[Side::Lower, Side::Upper]), Some(3));
        assert_eq!(tree.node_at(&[Side::Upper, Side::Upper]), None);

        let collapsed = tree.collapse(1, Side::Upper);
        assert_eq!(collapsed, ClusterTree::stump(2, SplitRule::new(0, 0.5)));
        let moved = tree.set_rule(0, SplitRule::new(1, 0.75));
        assert_eq!(moved.leaf_count(), 3);
        assert!(matches!(moved.node(0), Node::Branch { rule, .. } if rule.feature == 1));
    }

    #[test]
    fn documents_round_trip() {
        let tree = ClusterTree::stump(2, SplitRule::new(1, 0.1 + 0.2))
            .split_leaf(2, SplitRule::new(0, 1.0 / 3.0));
        let names = vec!["a".to_string(), "b".to_string()];
        let text = tree.to_json(Some(&names), Some(&[4, 5, 6]));
        assert!(text.contains("\"icot-tree/1\""));
        assert!(text.contains("\"feature_name\": \"b\""));
        assert_eq!(ClusterTree::from_json(&text).unwrap(), tree);
    }

    #[test]
    fn single_leaf_document() {
        let text = ClusterTree::leaf(3).to_json(None, Some(&[10]));
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(doc["root"]["node_type"], "leaf");
        assert_eq!(doc["root"]["size"], 10);
    }

    #[test]
    fn malformed_documents_report_location() {
        let err = ClusterTree::from_json("{\n  \"schema\": \"icot-tree/1\",\n  \"root\": [\n}").unwrap_err();
        assert!(matches!(err, IcotError::Parse { line: 3.., .. }), "{err}");
        let bad_ids = r#"{"schema":"icot-tree/1","n_features":1,"root":{"node_type":"branch","feature":0,"threshold":0.5,
            "lower":{"node_type":"leaf","cluster_id":1},"upper":{"node_type":"leaf","cluster_id":1}}}"#;
        assert!(ClusterTree::from_json(bad_ids).is_err());
    }
}
