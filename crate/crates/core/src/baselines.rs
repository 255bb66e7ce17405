//! Reference methods: K-Means and the two-step "cluster, then fit a
//! classification tree" approach.
//!
//! The two-step tree is a greedy Gini tree grown on K-Means labels with the
//! same threshold grid, depth limit and leaf-size limit as the clustering
//! search; its leaves are then scored as clusters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Dataset, LabeledDataset};
use crate::error::{IcotError, Result};
use crate::metrics::{evaluate_assignment, Assignment, Criterion, CriterionScore};
use crate::search::SearchConfig;
use crate::tree::{midpoint, ClusterTree, Side, SplitRule};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub n_init: usize,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansConfig {
            k,
            seed,
            max_iter: 300,
            n_init: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub centroids: Vec<Vec<f64>>,
    pub labels: Assignment,
    /// Sum of squared distances to the assigned centroid.
    pub inertia: f64,
    /// Inertia after every Lloyd iteration of the winning initialization.
    pub history: Vec<f64>,
    pub iterations: usize,
}

fn squared(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(x: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = squared(x, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++ seeding.
fn seed_centroids(rows: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![rows[rng.gen_range(0..rows.len())].clone()];
    let mut closest: Vec<f64> = rows.iter().map(|x| squared(x, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = rows.len() - 1;
            for (i, &w) in closest.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.gen_range(0..rows.len())
        };
        centroids.push(rows[pick].clone());
        for (d, x) in closest.iter_mut().zip(rows) {
            *d = d.min(squared(x, &centroids[centroids.len() - 1]));
        }
    }
    centroids
}

struct Run {
    centroids: Vec<Vec<f64>>,
    labels: Vec<usize>,
    inertia: f64,
    history: Vec<f64>,
    iterations: usize,
}

fn lloyd(rows: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iter: usize) -> Run {
    let k = centroids.len();
    let p = rows[0].len();
    let mut labels = vec![usize::MAX; rows.len()];
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        let mut changed = false;
        for (x, label) in rows.iter().zip(labels.iter_mut()) {
            let (c, _) = nearest(x, &centroids);
            if *label != c {
                *label = c;
                changed = true;
            }
        }
        // Reseed each empty cluster at the point farthest from its centroid.
        loop {
            let mut sizes = vec![0usize; k];
            labels.iter().for_each(|&l| sizes[l] += 1);
            let Some(empty) = sizes.iter().position(|&s| s == 0) else { break };
            let (far, _) = rows
                .iter()
                .enumerate()
                .filter(|(i, _)| sizes[labels[*i]] > 1)
                .map(|(i, x)| (i, squared(x, &centroids[labels[i]])))
                .fold((usize::MAX, -1.0), |a, b| if b.1 > a.1 { b } else { a });
            centroids[empty] = rows[far].clone();
            labels[far] = empty;
            changed = true;
        }
        if !changed && iterations > 0 {
            break;
        }
        let mut sums = vec![vec![0.0; p]; k];
        let mut sizes = vec![0usize; k];
        for (x, &l) in rows.iter().zip(&labels) {
            sizes[l] += 1;
            sums[l].iter_mut().zip(x).for_each(|(s, v)| *s += v);
        }
        for ((centroid, sum), size) in centroids.iter_mut().zip(sums).zip(sizes) {
            *centroid = sum.into_iter().map(|s| s / size as f64).collect();
        }
        iterations += 1;
        history.push(inertia(rows, &centroids, &labels));
        if iterations >= max_iter {
            break;
        }
    }
    Run {
        inertia: inertia(rows, &centroids, &labels),
        centroids,
        labels,
        history,
        iterations,
    }
}

fn inertia(rows: &[Vec<f64>], centroids: &[Vec<f64>], labels: &[usize]) -> f64 {
    rows.iter().zip(labels).map(|(x, &l)| squared(x, &centroids[l])).sum()
}

/// Lloyd's algorithm with k-means++ seeding; the best of `n_init` runs by inertia.
pub fn kmeans(data: &Dataset, config: &KMeansConfig) -> Result<KMeansResult> {
    let rows = data.rows();
    if config.k == 0 || config.k > rows.len() {
        return Err(IcotError::validation(format!(
            "k must be between 1 and {}, got {}",
            rows.len(),
            config.k
        )));
    }
    let mut distinct: Vec<&Vec<f64>> = rows.iter().collect();
    distinct.sort_by(|a, b| a.iter().zip(b.iter()).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    distinct.dedup();
    if config.k > distinct.len() {
        return Err(IcotError::validation(format!(
            "k = {} exceeds the {} distinct observations",
            config.k,
            distinct.len()
        )));
    }
    if config.n_init == 0 || config.max_iter == 0 {
        return Err(IcotError::validation("n_init and max_iter must be positive"));
    }

    let mut best: Option<Run> = None;
    for init in 0..config.n_init {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(init as u64);
        let run = lloyd(rows, seed_centroids(rows, config.k, &mut rng), config.max_iter);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    let best = best.expect("n_init >= 1");
    Ok(KMeansResult {
        labels: Assignment::from_labels(&best.labels)?,
        centroids: best.centroids,
        inertia: best.inertia,
        history: best.history,
        iterations: best.iterations,
    })
}

fn gini_weighted(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    let sum_sq: f64 = counts.iter().map(|&c| (c as f64) * (c as f64)).sum();
    t - sum_sq / t
}

/// Best Gini split of `members` as (feature, threshold, impurity decrease).
fn best_gini_split(data: &Dataset, members: &[usize], classes: &[usize], k: usize, min_bucket: usize) -> Option<(usize, f64, f64)> {
    let mut totals = vec![0usize; k];
    members.iter().for_each(|&i| totals[classes[i]] += 1);
    let parent = gini_weighted(&totals, members.len());
    let mut best: Option<(usize, f64, f64)> = None;
    for feature in 0..data.p() {
        let mut order = members.to_vec();
        order.sort_by(|&a, &b| data.value(a, feature).total_cmp(&data.value(b, feature)).then(a.cmp(&b)));
        let mut left = vec![0usize; k];
        let mut right = totals.clone();
        for pos in 1..order.len() {
            let moved = classes[order[pos - 1]];
            left[moved] += 1;
            right[moved] -= 1;
            let (lo, hi) = (data.value(order[pos - 1], feature), data.value(order[pos], feature));
            if lo == hi || pos < min_bucket || order.len() - pos < min_bucket {
                continue;
            }
            let gain = parent - gini_weighted(&left, pos) - gini_weighted(&right, order.len() - pos);
            if best.is_none_or(|b| gain > b.2) {
                best = Some((feature, midpoint(lo, hi), gain));
            }
        }
    }
    best.filter(|b| b.2 > 1e-12)
}

/// Fits a greedy Gini classification tree to `labels` and scores its leaves as clusters.
pub fn two_step_tree(data: &Dataset, labels: &Assignment, config: &SearchConfig) -> Result<(ClusterTree, CriterionScore)> {
    if labels.n() != data.n() {
        return Err(IcotError::validation(format!(
            "{} labels for {} observations",
            labels.n(),
            data.n()
        )));
    }
    let classes = labels.cluster_of();
    let mut tree = ClusterTree::leaf(data.p());
    let mut stack: Vec<Vec<Side>> = vec![Vec::new()];
    while let Some(path) = stack.pop() {
        let id = tree.node_at(&path).expect("growth never removes nodes");
        if path.len() >= config.max_depth {
            continue;
        }
        let leaf_of = tree.leaf_of_each(data);
        let members: Vec<usize> = (0..data.n()).filter(|&i| leaf_of[i] == id).collect();
        if let Some((feature, threshold, _)) = best_gini_split(data, &members, classes, labels.k(), config.min_bucket) {
            tree = tree.split_leaf(id, SplitRule::new(feature, threshold));
            for side in [Side::Upper, Side::Lower] {
                let mut child = path.clone();
                child.push(side);
                stack.push(child);
            }
        }
    }
    let score = evaluate_assignment(config.criterion, data.distances(), &tree.assign_all(data)?)?;
    Ok((tree, score))
}

/// Scores the ground-truth labels.
pub fn score_truth(labeled: &LabeledDataset, criterion: Criterion) -> Result<CriterionScore> {
    evaluate_assignment(
        criterion,
        labeled.data.distances(),
        &Assignment::from_labels(&labeled.truth)?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{generate_synthetic, SyntheticShape};

    fn line(points: &[f64]) -> Dataset {
        let rows: Vec<Vec<f64>> = points.iter().map(|p| vec![*p]).collect();
        Dataset::from_rows(&rows).unwrap()
    }

    #[test]
    fn kmeans_hand_instance() {
        let data = line(&[0.0, 0.1, 0.9, 1.0]);
        let result = kmeans(&data, &KMeansConfig::new(2, 1)).unwrap();
        let mut centers: Vec<f64> = result.centroids.iter().map(|c| c[0]).collect();
        centers.sort_by(f64::total_cmp);
        assert!((centers[0] - 0.05).abs() < 1e-12 && (centers[1] - 0.95).abs() < 1e-12);
        assert!(result.labels.same_partition(&Assignment::from_labels(&[0, 0, 1, 1]).unwrap()));
    }

    #[test]
    fn kmeans_extreme_k() {
        let data = line(&[0.0, 0.1, 0.9, 1.0]);
        let one = kmeans(&data, &KMeansConfig::new(1, 3)).unwrap();
        assert!((one.centroids[0][0] - 0.5).abs() < 1e-12);
        let variance = [0.0, 0.1, 0.9, 1.0].iter().map(|v: &f64| (v - 0.5).powi(2)).sum::<f64>() / 4.0;
        assert!((one.inertia - 4.0 * variance).abs() < 1e-12);
        let all = kmeans(&data, &KMeansConfig::new(4, 3)).unwrap();
        assert_eq!(all.inertia, 0.0);
        assert!(kmeans(&data, &KMeansConfig::new(5, 3)).is_err());
    }

    #[test]
    fn kmeans_is_monotone_and_deterministic() {
        let data = generate_synthetic(SyntheticShape::Tetra, 200, 4).unwrap().data;
        let a = kmeans(&data, &KMeansConfig::new(4, 9)).unwrap();
        let b = kmeans(&data, &KMeansConfig::new(4, 9)).unwrap();
        assert_eq!(a.labels, b.labels);
        assert!(a.history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(a.labels.sizes().iter().all(|&s| s > 0));
    }

    #[test]
    fn two_step_on_hand_instance() {
        let data = line(&[0.0, 0.1, 0.9, 1.0]);
        let labels = kmeans(&data, &KMeansConfig::new(2, 0)).unwrap().labels;
        let (tree, score) = two_step_tree(&data, &labels, &SearchConfig::default()).unwrap();
        assert_eq!(tree, ClusterTree::stump(1, SplitRule::new(0, 0.5)));
        assert!((score.value - (0.85 / 0.95 + 0.75 / 0.85) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn two_step_constant_labels_give_single_leaf() {
        let data = line(&[0.0, 0.1, 0.9, 1.0]);
        let labels = Assignment::from_labels(&[1, 1, 1, 1]).unwrap();
        let (tree, score) = two_step_tree(&data, &labels, &SearchConfig::default()).unwrap();
        assert_eq!(tree.leaf_count(), 1);
        assert_eq!(score.value, -1.0);
        let short = Assignment::from_labels(&[1, 1]).unwrap();
        assert!(two_step_tree(&data, &short, &SearchConfig::default()).is_err());
    }

    #[test]
    fn two_step_recovers_tree_separable_labels() {
        let truth = ClusterTree::stump(2, SplitRule::new(0, 0.4)).split_leaf(2, SplitRule::new(1, 0.6));
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|i| vec![(i % 10) as f64 / 9.0, (i / 10) as f64 / 5.0])
            .collect();
        let data = Dataset::from_rows(&rows).unwrap();
        let labels = truth.assign_all(&data).unwrap();
        let config = SearchConfig { max_depth: 2, ..SearchConfig::default() };
        let (tree, _) = two_step_tree(&data, &labels, &config).unwrap();
        assert!(tree.assign_all(&data).unwrap().same_partition(&labels));
    }

    #[test]
    fn truth_score_is_a_pass_through() {
        let labeled = generate_synthetic(SyntheticShape::GaussianBlobs, 60, 2).unwrap();
        let direct = evaluate_assignment(
            Criterion::Silhouette,
            labeled.data.distances(),
            &Assignment::from_labels(&labeled.truth).unwrap(),
        )
        .unwrap();
        let via = score_truth(&labeled, Criterion::Silhouette).unwrap();
        assert_eq!(direct, via);
        assert!(via.value > 0.9);
    }
}
