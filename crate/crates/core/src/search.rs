//! Tree search: randomized greedy growth, node-wise local search, restarts.
//!
//! Each restart grows a greedy tree (one random feature per leaf), then
//! repeatedly visits all nodes in a fresh random order and applies the best
//! improving move at each node until a full pass changes nothing. Moves are
//! deleting a branch in favour of one of its subtrees, re-splitting a branch
//! on any feature and threshold while keeping its subtrees, and splitting a
//! leaf. The restart with the best objective wins.
//!
//! Restart 0 splits each leaf at the best threshold of its drawn feature.
//! Later restarts first try a uniformly drawn threshold and keep it when it
//! improves the objective, falling back to the best threshold otherwise; with
//! one or two features this is the only source of variety between restarts.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{IcotError, Result};
use crate::metrics::{evaluate_assignment, Assignment, Criterion, CriterionScore};
use crate::sweep::{Candidate, SweepProblem, Sweeper};
use crate::tree::{candidate_thresholds, ClusterTree, Node, NodeId, Side, SplitRule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub criterion: Criterion,
    pub max_depth: usize,
    /// Minimum observations per leaf.
    pub min_bucket: usize,
    pub restarts: usize,
    pub seed: u64,
    /// A move is applied only if it raises the objective by more than this.
    pub tolerance: f64,
    /// Safety cap on local-search passes per restart.
    pub max_passes: usize,
    /// Scan at most this many evenly spaced thresholds per feature.
    pub threshold_quantiles: Option<usize>,
    /// Run restarts on the rayon pool.
    pub parallel: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            criterion: Criterion::Silhouette,
            max_depth: 4,
            min_bucket: 2,
            restarts: 10,
            seed: 42,
            tolerance: 1e-8,
            max_passes: 100,
            threshold_quantiles: None,
            parallel: true,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth < 1 {
            return Err(IcotError::validation("max_depth must be at least 1"));
        }
        if self.min_bucket < 1 {
            return Err(IcotError::validation("min_bucket must be at least 1"));
        }
        if self.restarts < 1 {
            return Err(IcotError::validation("restarts must be at least 1"));
        }
        if !(self.tolerance > 0.0) {
            return Err(IcotError::validation("tolerance must be positive"));
        }
        if self.max_passes < 1 {
            return Err(IcotError::validation("max_passes must be at least 1"));
        }
        if self.threshold_quantiles == Some(0) {
            return Err(IcotError::validation("threshold_quantiles must be positive"));
        }
        Ok(())
    }
}

/// Objective after an applied move; pass 0 is the greedy phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub pass: usize,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartTrace {
    /// Starts with the single-leaf score, then one entry per applied move.
    pub steps: Vec<TraceStep>,
    pub final_objective: f64,
    pub leaves: usize,
    pub passes: usize,
    /// The pass cap stopped this restart before convergence.
    pub hit_pass_cap: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub restarts: Vec<RestartTrace>,
    pub final_objective: f64,
    pub winner: usize,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub tree: ClusterTree,
    pub score: CriterionScore,
    pub assignment: Assignment,
    pub trace: SearchTrace,
}

/// Number of clusters found: the leaf count.
pub fn auto_cluster_count(tree: &ClusterTree) -> usize {
    tree.leaf_count()
}

/// Scores a whole tree.
pub fn tree_objective(data: &Dataset, tree: &ClusterTree, criterion: Criterion) -> Result<CriterionScore> {
    evaluate_assignment(criterion, data.distances(), &tree.assign_all(data)?)
}

fn objective(data: &Dataset, tree: &ClusterTree, criterion: Criterion) -> f64 {
    tree_objective(data, tree, criterion)
        .expect("trees built by the search match the dataset")
        .value
}

/// Seeded stream for one restart.
pub fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

/// Best split of node `id` over `features`, keeping any existing subtrees.
fn best_split_at(
    data: &Dataset,
    tree: &ClusterTree,
    id: NodeId,
    features: &[usize],
    config: &SearchConfig,
) -> Option<(SplitRule, Candidate)> {
    let leaf_of = tree.leaf_of_each(data);
    let k = tree.leaf_count();
    let in_subtree = subtree_mask(tree, id);
    let members: Vec<usize> = (0..data.n()).filter(|&i| in_subtree[leaf_of[i]]).collect();
    if members.len() < 2 * config.min_bucket {
        return None;
    }

    let (lower_slot, upper_slot, n_slots, watched): (Vec<usize>, Vec<usize>, usize, Vec<usize>) =
        match *tree.node(id) {
            Node::Leaf { cluster_id } => (
                vec![cluster_id; members.len()],
                vec![k; members.len()],
                k + 1,
                vec![cluster_id, k],
            ),
            Node::Branch { lower, upper, .. } => {
                let lo = members
                    .iter()
                    .map(|&i| tree.cluster_id(tree.descend(lower, data.row(i))))
                    .collect();
                let up = members
                    .iter()
                    .map(|&i| tree.cluster_id(tree.descend(upper, data.row(i))))
                    .collect();
                let watched = tree
                    .leaves()
                    .filter(|&l| in_subtree[l])
                    .map(|l| tree.cluster_id(l))
                    .collect();
                (lo, up, k, watched)
            }
        };

    let mut base_labels: Vec<usize> = leaf_of.iter().map(|&l| tree.cluster_id(l)).collect();
    for (pos, &m) in members.iter().enumerate() {
        base_labels[m] = upper_slot[pos];
    }
    let sweeper = Sweeper::new(
        SweepProblem {
            data,
            members,
            base_labels,
            lower_slot,
            upper_slot,
            n_slots,
            watched,
            min_bucket: config.min_bucket,
        },
        config.criterion,
    );

    let mut best: Option<(SplitRule, Candidate)> = None;
    for &feature in features {
        if let Some(c) = sweeper.best_split(feature, config.threshold_quantiles) {
            if best.is_none_or(|(_, b)| c.value > b.value) {
                best = Some((SplitRule::new(feature, c.threshold), c));
            }
        }
    }
    best
}

fn subtree_mask(tree: &ClusterTree, id: NodeId) -> Vec<bool> {
    let mut mask = vec![false; tree.len()];
    let mut stack = vec![id];
    while let Some(cur) = stack.pop() {
        mask[cur] = true;
        if let Node::Branch { lower, upper, .. } = *tree.node(cur) {
            stack.push(lower);
            stack.push(upper);
        }
    }
    mask
}

/// Accepts `candidate` if its exact objective beats `current` by more than the tolerance.
fn accept(data: &Dataset, candidate: ClusterTree, current: f64, config: &SearchConfig) -> Option<(ClusterTree, f64)> {
    let value = objective(data, &candidate, config.criterion);
    (value > current + config.tolerance).then_some((candidate, value))
}

/// Grows a tree from a single leaf, trying one random feature per leaf.
pub fn greedy_initialize<R: Rng>(data: &Dataset, config: &SearchConfig, rng: &mut R) -> ClusterTree {
    greedy_with_trace(data, config, rng, false).0
}

/// A uniformly drawn threshold on `feature` at leaf `id`, if splitting there
/// respects the minimum bucket size and improves on `current`.
fn random_improving_split<R: Rng>(
    data: &Dataset,
    tree: &ClusterTree,
    id: NodeId,
    feature: usize,
    current: f64,
    config: &SearchConfig,
    rng: &mut R,
) -> Option<(ClusterTree, f64)> {
    let leaf_of = tree.leaf_of_each(data);
    let members: Vec<usize> = (0..data.n()).filter(|&i| leaf_of[i] == id).collect();
    let thresholds = candidate_thresholds(data, feature, &members).ok()?;
    if thresholds.is_empty() {
        return None;
    }
    let rule = SplitRule::new(feature, thresholds[rng.gen_range(0..thresholds.len())]);
    let lower = members.iter().filter(|&&i| rule.goes_lower(data.row(i))).count();
    if lower < config.min_bucket || members.len() - lower < config.min_bucket {
        return None;
    }
    accept(data, tree.split_leaf(id, rule), current, config)
}

fn greedy_with_trace<R: Rng>(
    data: &Dataset,
    config: &SearchConfig,
    rng: &mut R,
    random_threshold: bool,
) -> (ClusterTree, Vec<TraceStep>) {
    let mut tree = ClusterTree::leaf(data.p());
    let mut current = objective(data, &tree, config.criterion);
    let mut steps = vec![TraceStep { pass: 0, objective: current }];
    let mut queue: VecDeque<Vec<Side>> = VecDeque::from([Vec::new()]);
    while let Some(path) = queue.pop_front() {
        let id = tree.node_at(&path).expect("greedy growth never removes nodes");
        if tree.node_depth(id) >= config.max_depth || data.p() == 0 {
            continue;
        }
        let feature = rng.gen_range(0..data.p());
        let drawn = if random_threshold {
            random_improving_split(data, &tree, id, feature, current, config, rng)
        } else {
            None
        };
        let grown = drawn.or_else(|| {
            let (rule, c) = best_split_at(data, &tree, id, &[feature], config)?;
            if c.value <= current + config.tolerance {
                return None;
            }
            accept(data, tree.split_leaf(id, rule), current, config)
        });
        if let Some((next, value)) = grown {
            tree = next;
            current = value;
            steps.push(TraceStep { pass: 0, objective: current });
            for side in [Side::Lower, Side::Upper] {
                let mut child = path.clone();
                child.push(side);
                queue.push_back(child);
            }
        }
    }
    (tree, steps)
}

/// Result of one local-search pass.
#[derive(Debug, Clone)]
pub struct PassOutcome {
    pub tree: ClusterTree,
    pub objective: f64,
    pub improved: bool,
    /// Objective after each applied move.
    pub applied: Vec<f64>,
}

/// Visits every node once in random order, applying the best improving move at each.
pub fn local_search_pass<R: Rng>(
    data: &Dataset,
    tree: &ClusterTree,
    config: &SearchConfig,
    rng: &mut R,
) -> PassOutcome {
    let mut tree = tree.clone();
    let mut current = objective(data, &tree, config.criterion);
    let mut paths: Vec<Vec<Side>> = (0..tree.len()).map(|id| tree.path_to(id)).collect();
    paths.shuffle(rng);
    let all_features: Vec<usize> = (0..data.p()).collect();
    let mut applied = Vec::new();

    for path in paths {
        let Some(id) = tree.node_at(&path) else { continue };
        let mut moves: Vec<(ClusterTree, f64)> = Vec::new();
        match *tree.node(id) {
            Node::Leaf { .. } => {
                if tree.node_depth(id) < config.max_depth {
                    if let Some((rule, c)) = best_split_at(data, &tree, id, &all_features, config) {
                        moves.push((tree.split_leaf(id, rule), c.value));
                    }
                }
            }
            Node::Branch { .. } => {
                for keep in [Side::Lower, Side::Upper] {
                    let candidate = tree.collapse(id, keep);
                    let value = objective(data, &candidate, config.criterion);
                    moves.push((candidate, value));
                }
                if let Some((rule, c)) = best_split_at(data, &tree, id, &all_features, config) {
                    moves.push((tree.set_rule(id, rule), c.value));
                }
            }
        }
        // First best wins ties: delete-lower, delete-upper, then re-split.
        let best = moves
            .into_iter()
            .fold(None::<(ClusterTree, f64)>, |acc, m| match acc {
                Some(a) if a.1 >= m.1 => Some(a),
                _ => Some(m),
            });
        if let Some((candidate, value)) = best {
            if value > current + config.tolerance {
                if let Some((next, exact)) = accept(data, candidate, current, config) {
                    tree = next;
                    current = exact;
                    applied.push(current);
                }
            }
        }
    }
    PassOutcome {
        tree,
        objective: current,
        improved: !applied.is_empty(),
        applied,
    }
}

/// One greedy start followed by local search to convergence.
pub fn run_restart(data: &Dataset, config: &SearchConfig, restart: usize) -> (ClusterTree, RestartTrace) {
    let mut rng = restart_rng(config.seed, restart);
    let (mut tree, mut steps) = greedy_with_trace(data, config, &mut rng, restart > 0);
    let mut current = steps.last().expect("trace starts with the initial score").objective;
    let mut passes = 0;
    let mut converged = false;
    while passes < config.max_passes {
        passes += 1;
        let outcome = local_search_pass(data, &tree, config, &mut rng);
        steps.extend(outcome.applied.iter().map(|&objective| TraceStep { pass: passes, objective }));
        tree = outcome.tree;
        current = outcome.objective;
        if !outcome.improved {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!(
            "restart {restart} stopped at the {}-pass cap before converging (objective {current})",
            config.max_passes
        );
    }
    let trace = RestartTrace {
        steps,
        final_objective: current,
        leaves: tree.leaf_count(),
        passes,
        hit_pass_cap: !converged,
    };
    (tree, trace)
}

/// Runs all restarts and keeps the best tree.
///
/// Ties within the tolerance go to fewer leaves, then the lower restart index;
/// the result does not depend on whether restarts ran in parallel.
pub fn fit(data: &Dataset, config: &SearchConfig) -> Result<FitResult> {
    config.validate()?;
    let run = |r: usize| run_restart(data, config, r);
    let outcomes: Vec<(ClusterTree, RestartTrace)> = if config.parallel {
        (0..config.restarts).into_par_iter().map(run).collect()
    } else {
        (0..config.restarts).map(run).collect()
    };

    let mut winner = 0;
    for (r, (_, trace)) in outcomes.iter().enumerate().skip(1) {
        let best = &outcomes[winner].1;
        let better = trace.final_objective > best.final_objective + config.tolerance
            || ((trace.final_objective - best.final_objective).abs() <= config.tolerance
                && trace.leaves < best.leaves);
        if better {
            winner = r;
        }
    }

    let mut tree = None;
    let mut restarts = Vec::with_capacity(outcomes.len());
    for (r, (t, trace)) in outcomes.into_iter().enumerate() {
        if r == winner {
            tree = Some(t);
        }
        restarts.push(trace);
    }
    let tree = tree.expect("winner exists");
    let assignment = tree.assign_all(data)?;
    let score = evaluate_assignment(config.criterion, data.distances(), &assignment)?;
    Ok(FitResult {
        tree,
        score,
        assignment,
        trace: SearchTrace {
            final_objective: score.value,
            winner,
            restarts,
        },
    })
}
