//! Incremental threshold scans.
//!
//! A scan fixes one tree node and one feature and walks the node's members
//! in increasing feature order, moving each from its upper-side cluster to
//! its lower-side cluster. Observations outside the node keep their cluster.
//! Silhouette keeps per-cluster distance sums for every observation, so a
//! move costs O(n) and a score O(n k). Dunn is assembled from prefix, suffix
//! and cross-pair extrema in O(m^2) per feature for a node with m members.

use crate::dataset::{Dataset, DistanceMatrix};
use crate::metrics::{dunn_ratio, point_silhouette, Criterion};
use crate::tree::midpoint;

/// Clusters ("slots") of every observation for a candidate split at one node.
pub(crate) struct SweepProblem<'a> {
    pub data: &'a Dataset,
    /// Observations reaching the node.
    pub members: Vec<usize>,
    /// Slot of every observation when all members take the upper side.
    pub base_labels: Vec<usize>,
    /// Slot of member `members[m]` on the lower side.
    pub lower_slot: Vec<usize>,
    /// Slot of member `members[m]` on the upper side.
    pub upper_slot: Vec<usize>,
    pub n_slots: usize,
    /// Slots below the node; each must end with at least `min_bucket` members.
    pub watched: Vec<usize>,
    pub min_bucket: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Candidate {
    pub threshold: f64,
    pub value: f64,
}

/// Feature-independent state shared by all scans at one node.
pub(crate) struct Sweeper<'a> {
    problem: SweepProblem<'a>,
    base_sizes: Vec<usize>,
    is_watched: Vec<bool>,
    kind: SweepKind,
}

enum SweepKind {
    Silhouette {
        /// `sums[i * n_slots + c]`: total distance from `i` to slot `c`.
        sums: Vec<f64>,
    },
    Dunn {
        /// Smallest distance between differently-labelled pairs that are not
        /// both members, and largest distance within a slot among non-members.
        fixed_separation: f64,
        fixed_diameter: f64,
    },
}

impl<'a> Sweeper<'a> {
    pub fn new(problem: SweepProblem<'a>, criterion: Criterion) -> Self {
        let n = problem.base_labels.len();
        let k = problem.n_slots;
        let d = problem.data.distances();
        let mut base_sizes = vec![0; k];
        for &s in &problem.base_labels {
            base_sizes[s] += 1;
        }
        let mut is_watched = vec![false; k];
        for &s in &problem.watched {
            is_watched[s] = true;
        }

        let kind = match criterion {
            Criterion::Silhouette => {
                let mut sums = vec![0.0; n * k];
                for i in 0..n {
                    let row = &mut sums[i * k..(i + 1) * k];
                    for (dist, &s) in d.row(i).iter().zip(&problem.base_labels) {
                        row[s] += dist;
                    }
                }
                SweepKind::Silhouette { sums }
            }
            Criterion::Dunn => {
                let mut inside = vec![false; n];
                for &m in &problem.members {
                    inside[m] = true;
                }
                let outside: Vec<usize> = (0..n).filter(|&i| !inside[i]).collect();
                let mut separation = f64::INFINITY;
                let mut diameter: f64 = 0.0;
                for (a, &i) in outside.iter().enumerate() {
                    let row = d.row(i);
                    for &j in &outside[..a] {
                        if problem.base_labels[i] == problem.base_labels[j] {
                            diameter = diameter.max(row[j]);
                        } else {
                            separation = separation.min(row[j]);
                        }
                    }
                    for &m in &problem.members {
                        separation = separation.min(row[m]);
                    }
                }
                SweepKind::Dunn {
                    fixed_separation: separation,
                    fixed_diameter: diameter,
                }
            }
        };
        Sweeper {
            problem,
            base_sizes,
            is_watched,
            kind,
        }
    }

    /// Member positions sorted by `feature`, and the candidate cut positions
    /// (`k` lower members) at which the feature value changes.
    fn order(&self, feature: usize, max_candidates: Option<usize>) -> (Vec<usize>, Vec<f64>, Vec<bool>) {
        let data = self.problem.data;
        let members = &self.problem.members;
        let mut order: Vec<usize> = (0..members.len()).collect();
        order.sort_by(|&a, &b| {
            data.value(members[a], feature)
                .total_cmp(&data.value(members[b], feature))
                .then(a.cmp(&b))
        });
        let values: Vec<f64> = order.iter().map(|&m| data.value(members[m], feature)).collect();
        let mut cut = vec![false; members.len() + 1];
        let boundaries: Vec<usize> = (1..members.len()).filter(|&k| values[k - 1] < values[k]).collect();
        match max_candidates {
            Some(q) if q >= 1 && boundaries.len() > q => {
                for s in 0..q {
                    let idx = if q == 1 {
                        boundaries.len() / 2
                    } else {
                        (s * (boundaries.len() - 1) + (q - 1) / 2) / (q - 1)
                    };
                    cut[boundaries[idx]] = true;
                }
            }
            _ => boundaries.iter().for_each(|&k| cut[k] = true),
        }
        (order, values, cut)
    }

    /// Best feasible split of the node on `feature`; ties keep the lowest threshold.
    pub fn best_split(&self, feature: usize, max_candidates: Option<usize>) -> Option<Candidate> {
        let (order, values, cut) = self.order(feature, max_candidates);
        if order.len() < 2 {
            return None;
        }
        match &self.kind {
            SweepKind::Silhouette { sums } => self.scan_silhouette(sums, &order, &values, &cut),
            SweepKind::Dunn {
                fixed_separation,
                fixed_diameter,
            } => self.scan_dunn(*fixed_separation, *fixed_diameter, &order, &values, &cut),
        }
    }

    fn feasibility(&self) -> (Vec<usize>, usize) {
        let counts = self.base_sizes.clone();
        let deficient = self
            .problem
            .watched
            .iter()
            .filter(|&&s| counts[s] < self.problem.min_bucket)
            .count();
        (counts, deficient)
    }

    /// Moves member position `m` to its lower slot, updating counts.
    #[inline]
    fn shift_counts(&self, m: usize, counts: &mut [usize], deficient: &mut usize, nonempty: &mut usize) -> (usize, usize) {
        let from = self.problem.upper_slot[m];
        let to = self.problem.lower_slot[m];
        let min_bucket = self.problem.min_bucket;
        if self.is_watched[from] && counts[from] == min_bucket {
            *deficient += 1;
        }
        counts[from] -= 1;
        if counts[from] == 0 {
            *nonempty -= 1;
        }
        if counts[to] == 0 {
            *nonempty += 1;
        }
        counts[to] += 1;
        if self.is_watched[to] && counts[to] == min_bucket {
            *deficient -= 1;
        }
        (from, to)
    }

    fn scan_silhouette(&self, base_sums: &[f64], order: &[usize], values: &[f64], cut: &[bool]) -> Option<Candidate> {
        let p = &self.problem;
        let n = p.base_labels.len();
        let k = p.n_slots;
        let d: &DistanceMatrix = p.data.distances();
        let mut sums = base_sums.to_vec();
        let mut labels = p.base_labels.clone();
        let (mut counts, mut deficient) = self.feasibility();
        let mut nonempty = counts.iter().filter(|&&c| c > 0).count();
        let mut best: Option<Candidate> = None;

        for pos in 1..order.len() {
            let m = order[pos - 1];
            let obs = p.members[m];
            let (from, to) = self.shift_counts(m, &mut counts, &mut deficient, &mut nonempty);
            labels[obs] = to;
            for (i, dist) in d.row(obs).iter().enumerate() {
                let row = &mut sums[i * k..(i + 1) * k];
                row[from] -= dist;
                row[to] += dist;
            }
            if !cut[pos] || deficient > 0 {
                continue;
            }
            let value = if nonempty < 2 {
                Criterion::Silhouette.single_cluster_value()
            } else {
                (0..n)
                    .map(|i| point_silhouette(labels[i], &sums[i * k..(i + 1) * k], &counts))
                    .sum::<f64>()
                    / n as f64
            };
            if best.is_none_or(|b| value > b.value) {
                best = Some(Candidate {
                    threshold: midpoint(values[pos - 1], values[pos]),
                    value,
                });
            }
        }
        best
    }

    fn scan_dunn(
        &self,
        fixed_separation: f64,
        fixed_diameter: f64,
        order: &[usize],
        values: &[f64],
        cut: &[bool],
    ) -> Option<Candidate> {
        let p = &self.problem;
        let len = order.len();
        let d = p.data.distances();
        let obs: Vec<usize> = order.iter().map(|&m| p.members[m]).collect();
        let lower: Vec<usize> = order.iter().map(|&m| p.lower_slot[m]).collect();
        let upper: Vec<usize> = order.iter().map(|&m| p.upper_slot[m]).collect();

        // Pairs that both fall on the lower side (positions < k).
        let mut pre_sep = vec![f64::INFINITY; len + 1];
        let mut pre_diam = vec![0.0f64; len + 1];
        for k in 1..=len {
            let a = k - 1;
            let row = d.row(obs[a]);
            let (mut sep, mut diam) = (pre_sep[k - 1], pre_diam[k - 1]);
            for b in 0..a {
                let dist = row[obs[b]];
                if lower[a] == lower[b] {
                    diam = diam.max(dist);
                } else {
                    sep = sep.min(dist);
                }
            }
            pre_sep[k] = sep;
            pre_diam[k] = diam;
        }
        // Pairs that both stay on the upper side (positions >= k).
        let mut suf_sep = vec![f64::INFINITY; len + 1];
        let mut suf_diam = vec![0.0f64; len + 1];
        for k in (0..len).rev() {
            let row = d.row(obs[k]);
            let (mut sep, mut diam) = (suf_sep[k + 1], suf_diam[k + 1]);
            for b in k + 1..len {
                let dist = row[obs[b]];
                if upper[k] == upper[b] {
                    diam = diam.max(dist);
                } else {
                    sep = sep.min(dist);
                }
            }
            suf_sep[k] = sep;
            suf_diam[k] = diam;
        }
        // Pairs split by the cut always land in different clusters.
        let mut cross = vec![f64::INFINITY; len + 1];
        for a in 0..len {
            let row = d.row(obs[a]);
            let mut run = f64::INFINITY;
            for b in (a + 1..len).rev() {
                run = run.min(row[obs[b]]);
                cross[b] = cross[b].min(run);
            }
        }

        let (mut counts, mut deficient) = self.feasibility();
        let mut nonempty = counts.iter().filter(|&&c| c > 0).count();
        let mut best: Option<Candidate> = None;
        for pos in 1..len {
            self.shift_counts(order[pos - 1], &mut counts, &mut deficient, &mut nonempty);
            if !cut[pos] || deficient > 0 {
                continue;
            }
            let separation = fixed_separation.min(pre_sep[pos]).min(suf_sep[pos]).min(cross[pos]);
            let diameter = fixed_diameter.max(pre_diam[pos]).max(suf_diam[pos]);
            let value = if nonempty < 2 || !separation.is_finite() {
                Criterion::Dunn.single_cluster_value()
            } else {
                dunn_ratio(separation, diameter)
            };
            if best.is_none_or(|b| value > b.value) {
                best = Some(Candidate {
                    threshold: midpoint(values[pos - 1], values[pos]),
                    value,
                });
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::evaluate_assignment;
    use crate::tree::{candidate_thresholds, ClusterTree, SplitRule};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Brute force: score every candidate threshold by rebuilding the tree.
    fn brute_best(data: &Dataset, tree: &ClusterTree, leaf: usize, feature: usize, criterion: Criterion, min_bucket: usize) -> Option<Candidate> {
        let labels = tree.leaf_of_each(data);
        let members: Vec<usize> = (0..data.n()).filter(|&i| labels[i] == leaf).collect();
        let mut best: Option<Candidate> = None;
        for t in candidate_thresholds(data, feature, &members).unwrap() {
            let rule = SplitRule::new(feature, t);
            let lower = members.iter().filter(|&&i| rule.goes_lower(data.row(i))).count();
            if lower < min_bucket || members.len() - lower < min_bucket {
                continue;
            }
            let candidate = tree.split_leaf(leaf, rule);
            let value = evaluate_assignment(criterion, data.distances(), &candidate.assign_all(data).unwrap())
                .unwrap()
                .value;
            if best.is_none_or(|b| value > b.value + 1e-12) {
                best = Some(Candidate { threshold: t, value });
            }
        }
        best
    }

    fn leaf_problem<'a>(data: &'a Dataset, tree: &ClusterTree, leaf: usize, min_bucket: usize) -> SweepProblem<'a> {
        let k = tree.leaf_count();
        let own = tree.cluster_id(leaf);
        let leaf_of = tree.leaf_of_each(data);
        let members: Vec<usize> = (0..data.n()).filter(|&i| leaf_of[i] == leaf).collect();
        let mut base_labels: Vec<usize> = leaf_of.iter().map(|&l| tree.cluster_id(l)).collect();
        for &m in &members {
            base_labels[m] = k;
        }
        SweepProblem {
            data,
            lower_slot: vec![own; members.len()],
            upper_slot: vec![k; members.len()],
            members,
            base_labels,
            n_slots: k + 1,
            watched: vec![own, k],
            min_bucket,
        }
    }

    #[test]
    fn leaf_scans_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..40 {
            let n = rng.gen_range(6..30);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..2).map(|_| (rng.gen_range(0..8) as f64) / 7.0).collect())
                .collect();
            let Ok(data) = Dataset::from_rows(&rows) else { continue };
            let tree = ClusterTree::stump(2, SplitRule::new(0, 0.5));
            let min_bucket = 1 + trial % 3;
            for criterion in Criterion::ALL {
                for leaf in [1, 2] {
                    for feature in 0..2 {
                        let sweeper = Sweeper::new(leaf_problem(&data, &tree, leaf, min_bucket), criterion);
                        let fast = sweeper.best_split(feature, None);
                        let slow = brute_best(&data, &tree, leaf, feature, criterion, min_bucket);
                        match (fast, slow) {
                            (None, None) => {}
                            (Some(f), Some(s)) => {
                                assert!((f.value - s.value).abs() < 1e-9, "{criterion} trial {trial}: {f:?} vs {s:?}");
                            }
                            other => panic!("{criterion} trial {trial}: {other:?}"),
                        }
                    }
                }
            }
        }
    }
}
