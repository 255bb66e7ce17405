//! Mixed-integer model of the clustering-tree problem and a checker that
//! validates a concrete tree against it.
//!
//! The model is built for a full binary topology of the requested depth,
//! with nodes numbered in heap order: node 1 is the root, node `t` has
//! children `2t` (lower) and `2t + 1` (upper). Branch nodes are
//! `1 .. 2^depth - 1`, leaves `2^depth .. 2^(depth+1) - 1`.
//!
//! Structural, assignment and routing constraints are linear and kept as
//! rows. The Silhouette definitions contain products and ratios of
//! variables; they are kept as named nonlinear definitions and evaluated
//! numerically by the checker instead of being linearized.

use std::collections::HashMap;
use std::fmt;

use crate::dataset::Dataset;
use crate::error::{IcotError, Result};
use crate::metrics::{silhouette, SILHOUETTE_SINGLE_CLUSTER};
use crate::tree::{ClusterTree, Node, NodeId};

/// Largest observation count accepted by [`build_mio_model`].
pub const MAX_MIO_OBSERVATIONS: usize = 500;
/// Largest topology depth accepted by [`build_mio_model`].
pub const MAX_MIO_DEPTH: usize = 6;

/// Absolute slack allowed when evaluating rows.
const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }

    fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Sense::Le => lhs <= rhs + FEASIBILITY_TOL,
            Sense::Eq => (lhs - rhs).abs() <= FEASIBILITY_TOL,
            Sense::Ge => lhs >= rhs - FEASIBILITY_TOL,
        }
    }
}

/// Constraint families, used to name rows and to group violations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowFamily {
    /// A branch that splits uses exactly one feature.
    FeatureChoice,
    /// The threshold is zero unless the node splits.
    ThresholdCap,
    /// A node can only split if its parent splits.
    Hierarchy,
    /// Every observation lands in exactly one leaf.
    OneLeaf,
    /// Observations only land in active leaves.
    LeafActive,
    /// Active leaves hold at least `min_bucket` observations.
    MinBucket,
    /// Routing through an upper-branch ancestor: `x_j >= b`.
    RouteUpper,
    /// Routing through a lower-branch ancestor: `x_j + eps_j <= b`.
    RouteLower,
    /// Cluster size `K_t` is the number of observations in leaf `t`.
    ClusterSize,
    /// `m_i` bounds both the cohesion and the separation of observation `i`.
    MaxBound,
    /// `S` is the mean of the per-observation silhouettes.
    MeanSilhouette,
    /// Mean distance from an observation to a leaf.
    MeanDistance,
    /// Mean distance from an observation to the rest of its own leaf.
    Cohesion,
    /// Upper bound of the separation by the mean distance to every other leaf.
    Separation,
    /// Per-observation silhouette ratio.
    Ratio,
}

impl RowFamily {
    pub fn prefix(self) -> &'static str {
        match self {
            RowFamily::FeatureChoice => "feature_choice",
            RowFamily::ThresholdCap => "threshold_cap",
            RowFamily::Hierarchy => "hierarchy",
            RowFamily::OneLeaf => "one_leaf",
            RowFamily::LeafActive => "leaf_active",
            RowFamily::MinBucket => "min_bucket",
            RowFamily::RouteUpper => "route_upper",
            RowFamily::RouteLower => "route_lower",
            RowFamily::ClusterSize => "cluster_size",
            RowFamily::MaxBound => "max_bound",
            RowFamily::MeanSilhouette => "mean_silhouette",
            RowFamily::MeanDistance => "mean_distance",
            RowFamily::Cohesion => "cohesion",
            RowFamily::Separation => "separation",
            RowFamily::Ratio => "ratio",
        }
    }
}

impl fmt::Display for RowFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.prefix())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub name: String,
    pub family: RowFamily,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A definition kept out of the linear system, rendered as text.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearRow {
    pub name: String,
    pub family: RowFamily,
    pub expression: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MioMetadata {
    pub n: usize,
    pub p: usize,
    pub depth: usize,
    pub min_bucket: usize,
    pub big_m: f64,
    /// True when `big_m` was not supplied and defaults to twice the largest distance.
    pub big_m_is_default: bool,
    pub eps: Vec<f64>,
    pub eps_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MioModel {
    pub variables: Vec<Variable>,
    pub rows: Vec<LinearRow>,
    pub nonlinear: Vec<NonlinearRow>,
    /// Maximized.
    pub objective: Vec<(usize, f64)>,
    pub metadata: MioMetadata,
    index: HashMap<String, usize>,
}

impl MioModel {
    pub fn var(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn branch_nodes(&self) -> std::ops::Range<usize> {
        1..(1 << self.metadata.depth)
    }

    pub fn leaf_nodes(&self) -> std::ops::Range<usize> {
        (1 << self.metadata.depth)..(1 << (self.metadata.depth + 1))
    }

    pub fn count_kind(&self, kind: VarKind) -> usize {
        self.variables.iter().filter(|v| v.kind == kind).count()
    }

    pub fn count_prefix(&self, prefix: &str) -> usize {
        self.variables
            .iter()
            .filter(|v| v.name.split('_').next() == Some(prefix))
            .count()
    }

    pub fn rows_in(&self, family: RowFamily) -> impl Iterator<Item = &LinearRow> {
        self.rows.iter().filter(move |r| r.family == family)
    }
}

// Variable names; observations and features are 1-based.
fn a(j: usize, t: usize) -> String {
    format!("a_{}_{t}", j + 1)
}
fn b(t: usize) -> String {
    format!("b_{t}")
}
fn d(t: usize) -> String {
    format!("d_{t}")
}
fn z(i: usize, t: usize) -> String {
    format!("z_{}_{t}", i + 1)
}
fn l(t: usize) -> String {
    format!("l_{t}")
}
fn size(t: usize) -> String {
    format!("K_{t}")
}
fn c(i: usize, t: usize) -> String {
    format!("c_{}_{t}", i + 1)
}
fn r(i: usize) -> String {
    format!("r_{}", i + 1)
}
fn q(i: usize) -> String {
    format!("q_{}", i + 1)
}
fn m(i: usize) -> String {
    format!("m_{}", i + 1)
}
fn s(i: usize) -> String {
    format!("s_{}", i + 1)
}
const MEAN: &str = "S";

/// Ancestors of `t` with the side taken: `true` when the path goes upper.
fn ancestors(t: usize) -> Vec<(usize, bool)> {
    let mut out = Vec::new();
    let mut cur = t;
    while cur > 1 {
        out.push((cur / 2, cur % 2 == 1));
        cur /= 2;
    }
    out
}

/// Twice the largest pairwise distance.
pub fn default_big_m(data: &Dataset) -> f64 {
    2.0 * data.distances().max()
}

struct Builder {
    variables: Vec<Variable>,
    index: HashMap<String, usize>,
    rows: Vec<LinearRow>,
    nonlinear: Vec<NonlinearRow>,
}

impl Builder {
    fn var(&mut self, name: String, kind: VarKind, lower: f64, upper: f64) {
        self.index.insert(name.clone(), self.variables.len());
        self.variables.push(Variable { name, kind, lower, upper });
    }

    fn row(&mut self, family: RowFamily, suffix: String, terms: Vec<(&str, f64)>, sense: Sense, rhs: f64) {
        let terms = terms
            .into_iter()
            .filter(|(_, coef)| *coef != 0.0)
            .map(|(name, coef)| (self.index[name], coef))
            .collect();
        self.rows.push(LinearRow {
            name: format!("{}_{suffix}", family.prefix()),
            family,
            terms,
            sense,
            rhs,
        });
    }

    fn define(&mut self, family: RowFamily, suffix: String, expression: String) {
        self.nonlinear.push(NonlinearRow {
            name: format!("{}_{suffix}", family.prefix()),
            family,
            expression,
        });
    }
}

/// Builds the model for a full binary topology of `depth` levels.
///
/// `big_m` defaults to [`default_big_m`]; it must exceed the largest
/// pairwise distance.
pub fn build_mio_model(data: &Dataset, depth: usize, min_bucket: usize, big_m: Option<f64>) -> Result<MioModel> {
    if depth < 1 {
        return Err(IcotError::validation("model depth must be at least 1"));
    }
    if depth > MAX_MIO_DEPTH {
        return Err(IcotError::TooLarge {
            what: "model depth",
            actual: depth as u64,
            limit: MAX_MIO_DEPTH as u64,
        });
    }
    let n = data.n();
    if n > MAX_MIO_OBSERVATIONS {
        return Err(IcotError::TooLarge {
            what: "observation count",
            actual: n as u64,
            limit: MAX_MIO_OBSERVATIONS as u64,
        });
    }
    let max_distance = data.distances().max();
    let big_m_is_default = big_m.is_none();
    let big_m = big_m.unwrap_or_else(|| default_big_m(data));
    if !(big_m > max_distance) {
        return Err(IcotError::validation(format!(
            "big M ({big_m}) must exceed the largest pairwise distance ({max_distance})"
        )));
    }
    let p = data.p();
    let (eps, eps_max) = data.min_separation();
    let branches: Vec<usize> = (1..(1 << depth)).collect();
    let leaves: Vec<usize> = ((1 << depth)..(1 << (depth + 1))).collect();
    let nf = n as f64;

    let mut bld = Builder {
        variables: Vec::new(),
        index: HashMap::new(),
        rows: Vec::new(),
        nonlinear: Vec::new(),
    };
    use VarKind::{Binary, Continuous};
    for &t in &branches {
        for j in 0..p {
            bld.var(a(j, t), Binary, 0.0, 1.0);
        }
        bld.var(b(t), Continuous, 0.0, 1.0);
        bld.var(d(t), Binary, 0.0, 1.0);
    }
    for &t in &leaves {
        for i in 0..n {
            bld.var(z(i, t), Binary, 0.0, 1.0);
        }
        bld.var(l(t), Binary, 0.0, 1.0);
        bld.var(size(t), Continuous, 0.0, nf);
        for i in 0..n {
            bld.var(c(i, t), Continuous, 0.0, f64::INFINITY);
        }
    }
    for i in 0..n {
        bld.var(r(i), Continuous, 0.0, f64::INFINITY);
        bld.var(q(i), Continuous, 0.0, f64::INFINITY);
        bld.var(m(i), Continuous, 0.0, f64::INFINITY);
        bld.var(s(i), Continuous, -1.0, 1.0);
    }
    bld.var(MEAN.to_string(), Continuous, -1.0, 1.0);

    // Tree structure.
    for &t in &branches {
        let names: Vec<String> = (0..p).map(|j| a(j, t)).collect();
        let (dn, bn) = (d(t), b(t));
        let mut terms: Vec<(&str, f64)> = names.iter().map(|n| (n.as_str(), 1.0)).collect();
        terms.push((&dn, -1.0));
        bld.row(RowFamily::FeatureChoice, t.to_string(), terms, Sense::Eq, 0.0);
        bld.row(RowFamily::ThresholdCap, t.to_string(), vec![(&bn, 1.0), (&dn, -1.0)], Sense::Le, 0.0);
        if t > 1 {
            let parent = d(t / 2);
            bld.row(RowFamily::Hierarchy, t.to_string(), vec![(&dn, 1.0), (&parent, -1.0)], Sense::Le, 0.0);
        }
    }

    // Assignment of observations to leaves.
    for i in 0..n {
        let names: Vec<String> = leaves.iter().map(|&t| z(i, t)).collect();
        let terms = names.iter().map(|n| (n.as_str(), 1.0)).collect();
        bld.row(RowFamily::OneLeaf, (i + 1).to_string(), terms, Sense::Eq, 1.0);
    }
    for &t in &leaves {
        let ln = l(t);
        for i in 0..n {
            let zn = z(i, t);
            bld.row(RowFamily::LeafActive, format!("{}_{t}", i + 1), vec![(&zn, 1.0), (&ln, -1.0)], Sense::Le, 0.0);
        }
        let names: Vec<String> = (0..n).map(|i| z(i, t)).collect();
        let mut terms: Vec<(&str, f64)> = names.iter().map(|n| (n.as_str(), 1.0)).collect();
        terms.push((&ln, -(min_bucket as f64)));
        bld.row(RowFamily::MinBucket, t.to_string(), terms, Sense::Ge, 0.0);
    }

    // Routing through every ancestor of every leaf.
    for &t in &leaves {
        for (anc, upper) in ancestors(t) {
            let a_names: Vec<String> = (0..p).map(|j| a(j, anc)).collect();
            let bn = b(anc);
            for i in 0..n {
                let zn = z(i, t);
                let x = data.row(i);
                let suffix = format!("{}_{t}_{anc}", i + 1);
                if upper {
                    let mut terms: Vec<(&str, f64)> =
                        a_names.iter().enumerate().map(|(j, n)| (n.as_str(), x[j])).collect();
                    terms.push((&bn, -1.0));
                    terms.push((&zn, -1.0));
                    bld.row(RowFamily::RouteUpper, suffix, terms, Sense::Ge, -1.0);
                } else {
                    let mut terms: Vec<(&str, f64)> =
                        a_names.iter().enumerate().map(|(j, n)| (n.as_str(), x[j] + eps[j])).collect();
                    terms.push((&bn, -1.0));
                    terms.push((&zn, 1.0 + eps_max));
                    bld.row(RowFamily::RouteLower, suffix, terms, Sense::Le, 1.0 + eps_max);
                }
            }
        }
    }

    // Silhouette objective.
    for &t in &leaves {
        let kn = size(t);
        let names: Vec<String> = (0..n).map(|i| z(i, t)).collect();
        let mut terms: Vec<(&str, f64)> = vec![(&kn, 1.0)];
        terms.extend(names.iter().map(|n| (n.as_str(), -1.0)));
        bld.row(RowFamily::ClusterSize, t.to_string(), terms, Sense::Eq, 0.0);
    }
    for i in 0..n {
        let (mn, rn, qn) = (m(i), r(i), q(i));
        bld.row(RowFamily::MaxBound, format!("r_{}", i + 1), vec![(&mn, 1.0), (&rn, -1.0)], Sense::Ge, 0.0);
        bld.row(RowFamily::MaxBound, format!("q_{}", i + 1), vec![(&mn, 1.0), (&qn, -1.0)], Sense::Ge, 0.0);
    }
    let s_names: Vec<String> = (0..n).map(s).collect();
    let mut terms: Vec<(&str, f64)> = vec![(MEAN, 1.0)];
    terms.extend(s_names.iter().map(|n| (n.as_str(), -1.0 / nf)));
    bld.row(RowFamily::MeanSilhouette, "all".to_string(), terms, Sense::Eq, 0.0);

    let dist = data.distances();
    for &t in &leaves {
        for i in 0..n {
            let sum: Vec<String> = (0..n)
                .filter(|&j| dist.get(i, j) > 0.0)
                .map(|j| format!("{} {}", dist.get(i, j), z(j, t)))
                .collect();
            let sum = if sum.is_empty() { "0".to_string() } else { sum.join(" + ") };
            bld.define(
                RowFamily::MeanDistance,
                format!("{}_{t}", i + 1),
                format!("{} = ({sum}) / {}", c(i, t), size(t)),
            );
        }
    }
    for i in 0..n {
        let own: Vec<String> = leaves
            .iter()
            .map(|&t| format!("{z} * {c} * {k} / ({k} - 1)", z = z(i, t), c = c(i, t), k = size(t)))
            .collect();
        bld.define(RowFamily::Cohesion, (i + 1).to_string(), format!("{} = {}", r(i), own.join(" + ")));
        for &t in &leaves {
            bld.define(
                RowFamily::Separation,
                format!("{}_{t}", i + 1),
                format!("{q} <= {c} * (1 - {z}) + {big_m} * {z}", q = q(i), c = c(i, t), z = z(i, t)),
            );
        }
        bld.define(
            RowFamily::Ratio,
            (i + 1).to_string(),
            format!(
                "{s} = ({q} - {r}) / {m}, with {s} = 0 when the own leaf holds one observation",
                s = s(i),
                q = q(i),
                r = r(i),
                m = m(i)
            ),
        );
    }
    bld.define(
        RowFamily::Ratio,
        "single_cluster".to_string(),
        format!("every s_i = {SILHOUETTE_SINGLE_CLUSTER} when exactly one leaf is active"),
    );

    let objective = vec![(bld.index[MEAN], 1.0)];
    Ok(MioModel {
        variables: bld.variables,
        rows: bld.rows,
        nonlinear: bld.nonlinear,
        objective,
        metadata: MioMetadata {
            n,
            p,
            depth,
            min_bucket,
            big_m,
            big_m_is_default,
            eps,
            eps_max,
        },
        index: bld.index,
    })
}

/// Values for every model variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub values: Vec<f64>,
}

impl Solution {
    pub fn get(&self, model: &MioModel, name: &str) -> f64 {
        self.values[model.var(name).unwrap_or_else(|| panic!("unknown variable {name}"))]
    }

    pub fn set(&mut self, model: &MioModel, name: &str, value: f64) {
        let idx = model.var(name).unwrap_or_else(|| panic!("unknown variable {name}"));
        self.values[idx] = value;
    }
}

/// Maps tree nodes onto heap positions of the full topology.
fn heap_positions(tree: &ClusterTree) -> Vec<usize> {
    let mut pos = vec![0; tree.len()];
    pos[0] = 1;
    for id in 0..tree.len() {
        if let Node::Branch { lower, upper, .. } = *tree.node(id) {
            pos[lower] = 2 * pos[id];
            pos[upper] = 2 * pos[id] + 1;
        }
    }
    pos
}

/// Derives the split and assignment variables (`a`, `b`, `d`, `z`, `l`)
/// from a tree and fills the Silhouette definitions from them.
///
/// A tree leaf above the model's leaf level becomes a non-splitting branch
/// (`d = 0`) whose observations go to the lowest-numbered model leaf below it.
/// Split thresholds are re-expressed as the smallest upper-side value at the
/// node, the tightest value that satisfies both routing families.
pub fn derive_solution(model: &MioModel, tree: &ClusterTree, data: &Dataset) -> Result<Solution> {
    let meta = &model.metadata;
    if data.n() != meta.n || data.p() != meta.p {
        return Err(IcotError::validation(format!(
            "model is for {} observations and {} features, dataset has {} and {}",
            meta.n,
            meta.p,
            data.n(),
            data.p()
        )));
    }
    if tree.n_features() != meta.p {
        return Err(IcotError::validation("tree and model disagree on the feature count"));
    }
    if tree.depth() > meta.depth {
        return Err(IcotError::validation(format!(
            "tree depth {} exceeds model depth {}",
            tree.depth(),
            meta.depth
        )));
    }
    let mut sol = Solution {
        values: model.variables.iter().map(|v| v.lower.max(0.0)).collect(),
    };
    let heap = heap_positions(tree);
    let leaf_of = tree.leaf_of_each(data);

    for id in tree.branches() {
        let Node::Branch { rule, lower, .. } = *tree.node(id) else { unreachable!() };
        let t = heap[id];
        sol.set(model, &d(t), 1.0);
        sol.set(model, &a(rule.feature, t), 1.0);
        let mut lower_max = f64::NEG_INFINITY;
        let mut upper_min = f64::INFINITY;
        for (i, &leaf) in leaf_of.iter().enumerate() {
            if !is_descendant(tree, leaf, id) {
                continue;
            }
            let x = data.value(i, rule.feature);
            if is_descendant(tree, leaf, lower) {
                lower_max = lower_max.max(x);
            } else {
                upper_min = upper_min.min(x);
            }
        }
        let threshold = if upper_min.is_finite() {
            upper_min
        } else if lower_max.is_finite() {
            lower_max + meta.eps[rule.feature]
        } else {
            rule.threshold
        };
        sol.set(model, &b(t), threshold);
    }

    let model_leaf = |id: NodeId| -> usize {
        let extra = meta.depth - tree.node_depth(id);
        heap[id] << extra
    };
    for (i, &leaf) in leaf_of.iter().enumerate() {
        let t = model_leaf(leaf);
        sol.set(model, &z(i, t), 1.0);
        sol.set(model, &l(t), 1.0);
    }
    fill_side_table(model, &mut sol, data);
    Ok(sol)
}

fn is_descendant(tree: &ClusterTree, node: NodeId, ancestor: NodeId) -> bool {
    let mut cur = Some(node);
    while let Some(c) = cur {
        if c == ancestor {
            return true;
        }
        cur = tree.parent(c);
    }
    false
}

/// Recomputes `K`, `c`, `r`, `q`, `m`, `s` and `S` from the `z` values.
///
/// `c` is left at zero for empty leaves, which then take no part in `q`.
/// With a single active leaf every `s_i` is -1, so `S` is -1 as well.
pub fn fill_side_table(model: &MioModel, sol: &mut Solution, data: &Dataset) {
    let n = model.metadata.n;
    let big_m = model.metadata.big_m;
    let dist = data.distances();
    let leaves: Vec<usize> = model.leaf_nodes().collect();
    let member = |sol: &Solution, i: usize, t: usize| sol.get(model, &z(i, t)) > 0.5;

    let mut sizes = Vec::with_capacity(leaves.len());
    for &t in &leaves {
        let k = (0..n).filter(|&i| member(sol, i, t)).count();
        sol.set(model, &size(t), k as f64);
        sizes.push(k);
        for i in 0..n {
            let value = if k == 0 {
                0.0
            } else {
                (0..n).filter(|&j| member(sol, j, t)).map(|j| dist.get(i, j)).sum::<f64>() / k as f64
            };
            sol.set(model, &c(i, t), value);
        }
    }
    let active = sizes.iter().filter(|&&k| k > 0).count();

    let mut total = 0.0;
    for i in 0..n {
        let mut cohesion = 0.0;
        let mut separation = f64::INFINITY;
        let mut own_size = 0;
        for (&t, &k) in leaves.iter().zip(&sizes) {
            if k == 0 {
                continue;
            }
            let cit = sol.get(model, &c(i, t));
            if member(sol, i, t) {
                own_size = k;
                if k > 1 {
                    cohesion = cit * k as f64 / (k - 1) as f64;
                }
                separation = separation.min(big_m);
            } else {
                separation = separation.min(cit);
            }
        }
        let bound = cohesion.max(separation);
        let si = if active < 2 {
            SILHOUETTE_SINGLE_CLUSTER
        } else if own_size <= 1 || bound <= 0.0 {
            0.0
        } else {
            (separation - cohesion) / bound
        };
        sol.set(model, &r(i), cohesion);
        sol.set(model, &q(i), separation);
        sol.set(model, &m(i), bound);
        sol.set(model, &s(i), si);
        total += si;
    }
    sol.set(model, MEAN, total / n as f64);
}

/// A row not satisfied by a solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub row: String,
    pub family: RowFamily,
    pub lhs: f64,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
    /// `S` recomputed from the model's definitions.
    pub model_silhouette: f64,
    /// Silhouette of the tree's assignment computed by the metrics module.
    pub metric_silhouette: f64,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    /// The two Silhouette computations agree to 1e-9.
    pub fn silhouette_agrees(&self) -> bool {
        (self.model_silhouette - self.metric_silhouette).abs() <= 1e-9
    }

    pub fn violated_families(&self) -> Vec<RowFamily> {
        let mut out: Vec<RowFamily> = Vec::new();
        for v in &self.violations {
            if !out.contains(&v.family) {
                out.push(v.family);
            }
        }
        out
    }
}

/// Evaluates every linear row and variable bound on `sol`.
pub fn evaluate_solution(model: &MioModel, sol: &Solution) -> Vec<Violation> {
    let mut out = Vec::new();
    for row in &model.rows {
        let lhs: f64 = row.terms.iter().map(|&(v, coef)| coef * sol.values[v]).sum();
        if !row.sense.holds(lhs, row.rhs) {
            out.push(Violation {
                row: row.name.clone(),
                family: row.family,
                lhs,
                sense: row.sense,
                rhs: row.rhs,
            });
        }
    }
    out
}

/// Checks a tree against the model: derives its variables, evaluates every
/// linear row, and compares the model-side Silhouette with the metrics module.
pub fn check_feasibility(model: &MioModel, tree: &ClusterTree, data: &Dataset) -> Result<FeasibilityReport> {
    let sol = derive_solution(model, tree, data)?;
    Ok(FeasibilityReport {
        violations: evaluate_solution(model, &sol),
        model_silhouette: sol.get(model, MEAN),
        metric_silhouette: silhouette(data.distances(), &tree.assign_all(data)?)?.value,
    })
}
