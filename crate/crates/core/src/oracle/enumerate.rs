//! Exhaustive search over all clustering trees of bounded depth.

use std::cmp::Ordering;
use std::rc::Rc;

use crate::dataset::Dataset;
use crate::error::{IcotError, Result};
use crate::metrics::{evaluate_assignment, Assignment, Criterion, CriterionScore};
use crate::tree::{candidate_thresholds, ClusterTree, Side, SplitRule};

/// Largest number of trees the enumerator agrees to score.
pub const MAX_ENUMERATED_TREES: u64 = 10_000_000;

/// Scores closer than this are treated as ties.
const TIE_EPS: f64 = 1e-12;

#[derive(Debug)]
enum Sub {
    Leaf,
    Split(SplitRule, Rc<Sub>, Rc<Sub>),
}

impl Sub {
    fn leaves(&self) -> usize {
        match self {
            Sub::Leaf => 1,
            Sub::Split(_, lo, hi) => lo.leaves() + hi.leaves(),
        }
    }

    fn rules(&self, out: &mut Vec<(usize, f64)>) {
        if let Sub::Split(rule, lo, hi) = self {
            out.push((rule.feature, rule.threshold));
            lo.rules(out);
            hi.rules(out);
        }
    }

    fn label(&self, data: &Dataset, subset: &[usize], next: &mut usize, labels: &mut [usize]) {
        match self {
            Sub::Leaf => {
                subset.iter().for_each(|&i| labels[i] = *next);
                *next += 1;
            }
            Sub::Split(rule, lo, hi) => {
                let (lower, upper) = partition(data, subset, rule);
                lo.label(data, &lower, next, labels);
                hi.label(data, &upper, next, labels);
            }
        }
    }

    fn grow(&self, tree: ClusterTree, path: &mut Vec<Side>) -> ClusterTree {
        let Sub::Split(rule, lo, hi) = self else { return tree };
        let id = tree.node_at(path).expect("path exists");
        let mut tree = tree.split_leaf(id, *rule);
        path.push(Side::Lower);
        tree = lo.grow(tree, path);
        path.pop();
        path.push(Side::Upper);
        tree = hi.grow(tree, path);
        path.pop();
        tree
    }
}

fn partition(data: &Dataset, subset: &[usize], rule: &SplitRule) -> (Vec<usize>, Vec<usize>) {
    subset.iter().partition(|&&i| rule.goes_lower(data.row(i)))
}

/// Feasible splits of `subset`: both sides keep at least `min_bucket` points.
fn splits(data: &Dataset, subset: &[usize], min_bucket: usize) -> Vec<(SplitRule, Vec<usize>, Vec<usize>)> {
    let mut out = Vec::new();
    if subset.len() < 2 * min_bucket {
        return out;
    }
    for feature in 0..data.p() {
        for t in candidate_thresholds(data, feature, subset).expect("feature in range") {
            let rule = SplitRule::new(feature, t);
            let (lo, hi) = partition(data, subset, &rule);
            if lo.len() >= min_bucket && hi.len() >= min_bucket {
                out.push((rule, lo, hi));
            }
        }
    }
    out
}

/// Number of distinct trees, or `None` once it exceeds `cap`.
fn count(data: &Dataset, subset: &[usize], depth: usize, min_bucket: usize, cap: u64) -> Option<u64> {
    let mut total: u64 = 1;
    if depth == 0 {
        return Some(total);
    }
    for (_, lo, hi) in splits(data, subset, min_bucket) {
        let a = count(data, &lo, depth - 1, min_bucket, cap)?;
        let b = count(data, &hi, depth - 1, min_bucket, cap)?;
        total = total.checked_add(a.checked_mul(b)?)?;
        if total > cap {
            return None;
        }
    }
    Some(total)
}

/// Every subtree over `subset` with at most `depth` levels of splits.
fn all_subtrees(data: &Dataset, subset: &[usize], depth: usize, min_bucket: usize) -> Vec<Rc<Sub>> {
    let mut out = vec![Rc::new(Sub::Leaf)];
    if depth == 0 {
        return out;
    }
    for (rule, lo, hi) in splits(data, subset, min_bucket) {
        let lows = all_subtrees(data, &lo, depth - 1, min_bucket);
        let highs = all_subtrees(data, &hi, depth - 1, min_bucket);
        for l in &lows {
            for h in &highs {
                out.push(Rc::new(Sub::Split(rule, l.clone(), h.clone())));
            }
        }
    }
    out
}

/// Counts the trees [`enumerate_optimal`] would score.
pub fn tree_count(data: &Dataset, max_depth: usize, min_bucket: usize) -> Option<u64> {
    let all: Vec<usize> = (0..data.n()).collect();
    count(data, &all, max_depth, min_bucket, MAX_ENUMERATED_TREES)
}

struct Best {
    value: f64,
    leaves: usize,
    rules: Vec<(usize, f64)>,
    sub: Rc<Sub>,
}

fn compare_rules(a: &[(usize, f64)], b: &[(usize, f64)]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        let o = x.0.cmp(&y.0).then(x.1.total_cmp(&y.1));
        if o.is_ne() {
            return o;
        }
    }
    a.len().cmp(&b.len())
}

/// The highest-scoring tree of depth at most `max_depth` whose leaves all
/// hold at least `min_bucket` observations.
///
/// Ties go to fewer leaves, then to the lexicographically smallest preorder
/// sequence of (feature, threshold).
pub fn enumerate_optimal(
    data: &Dataset,
    criterion: Criterion,
    max_depth: usize,
    min_bucket: usize,
) -> Result<(ClusterTree, CriterionScore)> {
    if min_bucket < 1 {
        return Err(IcotError::validation("min_bucket must be at least 1"));
    }
    if tree_count(data, max_depth, min_bucket).is_none() {
        return Err(IcotError::TooLarge {
            what: "number of candidate trees",
            actual: MAX_ENUMERATED_TREES + 1,
            limit: MAX_ENUMERATED_TREES,
        });
    }
    let all: Vec<usize> = (0..data.n()).collect();
    let mut labels = vec![0; data.n()];
    let mut best: Option<Best> = None;
    let mut consider = |sub: Rc<Sub>| -> Result<()> {
        sub.label(data, &all, &mut 0, &mut labels);
        let value = evaluate_assignment(criterion, data.distances(), &Assignment::from_labels(&labels)?)?.value;
        let leaves = sub.leaves();
        let better = match &best {
            None => true,
            Some(b) if value > b.value + TIE_EPS => true,
            Some(b) if value >= b.value - TIE_EPS => {
                leaves < b.leaves || (leaves == b.leaves && {
                    let mut rules = Vec::new();
                    sub.rules(&mut rules);
                    compare_rules(&rules, &b.rules).is_lt()
                })
            }
            _ => false,
        };
        if better {
            let mut rules = Vec::new();
            sub.rules(&mut rules);
            best = Some(Best { value, leaves, rules, sub });
        }
        Ok(())
    };
    // Root splits are expanded lazily so only one level of subtrees is held at a time.
    consider(Rc::new(Sub::Leaf))?;
    if max_depth > 0 {
        for (rule, lo, hi) in splits(data, &all, min_bucket) {
            let lows = all_subtrees(data, &lo, max_depth - 1, min_bucket);
            let highs = all_subtrees(data, &hi, max_depth - 1, min_bucket);
            for l in &lows {
                for h in &highs {
                    consider(Rc::new(Sub::Split(rule, l.clone(), h.clone())))?;
                }
            }
        }
    }
    let best = best.expect("the single leaf is always enumerated");
    let tree = best.sub.grow(ClusterTree::leaf(data.p()), &mut Vec::new());
    let score = evaluate_assignment(criterion, data.distances(), &tree.assign_all(data)?)?;
    Ok((tree, score))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f64]) -> Dataset {
        let rows: Vec<Vec<f64>> = points.iter().map(|p| vec![*p]).collect();
        Dataset::from_rows(&rows).unwrap()
    }

    #[test]
    fn hand_instance_depth_one() {
        let data = line(&[0.0, 0.1, 0.9, 1.0]);
        let (tree, s) = enumerate_optimal(&data, Criterion::Silhouette, 1, 1).unwrap();
        assert_eq!(tree, ClusterTree::stump(1, SplitRule::new(0, 0.5)));
        assert!((s.value - (0.85 / 0.95 + 0.75 / 0.85) / 2.0).abs() < 1e-12);

        let (tree, d) = enumerate_optimal(&data, Criterion::Dunn, 1, 1).unwrap();
        assert_eq!(tree, ClusterTree::stump(1, SplitRule::new(0, 0.5)));
        assert!((d.value - 8.0).abs() < 1e-9);
    }

    #[test]
    fn identical_rows_give_single_leaf() {
        let data = Dataset::from_rows(&vec![vec![0.5]; 5]).unwrap();
        let (tree, s) = enumerate_optimal(&data, Criterion::Silhouette, 2, 1).unwrap();
        assert_eq!(tree.leaf_count(), 1);
        assert_eq!(s.value, -1.0);
    }

    #[test]
    fn counts_match_enumeration() {
        let data = line(&[0.0, 0.1, 0.9, 1.0]);
        // depth 1: leaf + 3 stumps; depth 2 with min_bucket 1 adds the sub-splits.
        assert_eq!(tree_count(&data, 1, 1), Some(4));
        let all: Vec<usize> = (0..4).collect();
        assert_eq!(all_subtrees(&data, &all, 2, 1).len() as u64, tree_count(&data, 2, 1).unwrap());
        assert_eq!(tree_count(&data, 1, 2), Some(2));
    }

    #[test]
    fn refuses_large_instances() {
        let rows: Vec<Vec<f64>> = (0..400).map(|i| vec![i as f64, (i * 7 % 400) as f64]).collect();
        let data = Dataset::from_rows(&rows).unwrap();
        let err = enumerate_optimal(&data, Criterion::Silhouette, 2, 1).unwrap_err();
        assert!(matches!(err, IcotError::TooLarge { limit: MAX_ENUMERATED_TREES, .. }));
    }
}
