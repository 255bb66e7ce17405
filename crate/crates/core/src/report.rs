//! Benchmark runs and their reports: a method-by-criterion comparison table
//! with the best scores starred, textual decision paths, and a JSON document.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{kmeans, two_step_tree, KMeansConfig};
use crate::dataset::Dataset;
use crate::error::{IcotError, Result};
use crate::metrics::{evaluate_assignment, Assignment, Criterion};
use crate::search::{fit, FitResult, SearchConfig};
use crate::tree::{ClusterTree, Side, TreeDocument};

pub const REPORT_SCHEMA: &str = "icot-report/1";

/// Scores closer than this share a star.
const STAR_TIE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Icot,
    Kmeans,
    TwoStep,
    Truth,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Icot, Method::Kmeans, Method::TwoStep, Method::Truth];

    pub fn name(self) -> &'static str {
        match self {
            Method::Icot => "icot",
            Method::Kmeans => "kmeans",
            Method::TwoStep => "two_step",
            Method::Truth => "truth",
        }
    }

    fn title(self) -> &'static str {
        match self {
            Method::Icot => "ICOT",
            Method::Kmeans => "K-Means",
            Method::TwoStep => "Two-step",
            Method::Truth => "Truth",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = IcotError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| IcotError::Usage(format!("unknown method '{s}', expected icot, kmeans, two_step or truth")))
    }
}

/// One method's score under one criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodScore {
    pub value: f64,
    pub clusters: usize,
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: Method,
    /// Keyed by criterion name.
    pub scores: BTreeMap<String, MethodScore>,
}

impl MethodRow {
    pub fn score(&self, criterion: Criterion) -> Option<&MethodScore> {
        self.scores.get(criterion.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputEcho {
    /// File path or `generate:<shape>`.
    pub source: String,
    pub n: usize,
    pub p: usize,
    pub feature_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub command: String,
    pub input: InputEcho,
    pub config: SearchConfig,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kmeans_k: Option<usize>,
    pub methods: Vec<MethodRow>,
    /// ICOT tree for the configured criterion.
    pub tree: TreeDocument,
    pub cluster_sizes: Vec<usize>,
    pub objective: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        for row in &self.methods {
            for (name, s) in &row.scores {
                if !s.value.is_finite() {
                    return Err(IcotError::validation(format!("{} {name} score is not finite", row.method)));
                }
            }
        }
        let mut text = serde_json::to_string_pretty(self).expect("reports serialize");
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: RunReport = serde_json::from_str(text).map_err(|e| IcotError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if report.schema != REPORT_SCHEMA {
            return Err(IcotError::validation(format!(
                "unsupported report schema '{}', expected '{REPORT_SCHEMA}'",
                report.schema
            )));
        }
        Ok(report)
    }

    pub fn row(&self, method: Method) -> Option<&MethodRow> {
        self.methods.iter().find(|r| r.method == method)
    }
}

/// Everything a run produced, before it is turned into a report.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// ICOT fit for the configured criterion; always run since the report embeds its tree.
    pub fit: FitResult,
    pub rows: Vec<MethodRow>,
    pub kmeans_k: Option<usize>,
}

fn score_row(method: Method, data: &Dataset, assignment: &Assignment, criteria: &[Criterion]) -> Result<MethodRow> {
    let mut scores = BTreeMap::new();
    for &c in criteria {
        scores.insert(
            c.name().to_string(),
            MethodScore {
                value: evaluate_assignment(c, data.distances(), assignment)?.value,
                clusters: assignment.k(),
                best: false,
            },
        );
    }
    Ok(MethodRow { method, scores })
}

/// Runs the requested methods and scores each under both criteria.
///
/// ICOT is fitted once per criterion and scored under the criterion it was
/// trained for. K-Means uses the truth cluster count when labels are given
/// and ICOT's leaf count otherwise. The two-step tree is grown on the
/// K-Means labels.
pub fn run_methods(
    data: &Dataset,
    truth: Option<&[usize]>,
    methods: &[Method],
    config: &SearchConfig,
) -> Result<RunOutcome> {
    config.validate()?;
    let mut methods: Vec<Method> = methods.to_vec();
    methods.sort();
    methods.dedup();
    if methods.contains(&Method::Truth) && truth.is_none() {
        return Err(IcotError::Usage("the truth method needs a label column".to_string()));
    }
    let truth = truth.map(Assignment::from_labels).transpose()?;
    let mut fits: BTreeMap<Criterion, FitResult> = BTreeMap::new();
    fits.insert(config.criterion, fit(data, config)?);
    if methods.contains(&Method::Icot) {
        for c in Criterion::ALL {
            if c != config.criterion {
                let cfg = SearchConfig { criterion: c, ..config.clone() };
                fits.insert(c, fit(data, &cfg)?);
            }
        }
    }

    let mut rows = Vec::new();
    let mut kmeans_k = None;
    if methods.contains(&Method::Icot) {
        let mut scores = BTreeMap::new();
        for (c, f) in &fits {
            scores.insert(
                c.name().to_string(),
                MethodScore {
                    value: f.score.value,
                    clusters: f.tree.leaf_count(),
                    best: false,
                },
            );
        }
        rows.push(MethodRow { method: Method::Icot, scores });
    }
    if methods.iter().any(|m| matches!(m, Method::Kmeans | Method::TwoStep)) {
        let k = match &truth {
            Some(t) => t.k(),
            None => fits[&config.criterion].tree.leaf_count(),
        };
        let k = k.min(distinct_rows(data)).max(1);
        kmeans_k = Some(k);
        let km = kmeans(data, &KMeansConfig::new(k, config.seed))?;
        if methods.contains(&Method::Kmeans) {
            rows.push(score_row(Method::Kmeans, data, &km.labels, &Criterion::ALL)?);
        }
        if methods.contains(&Method::TwoStep) {
            let (tree, _) = two_step_tree(data, &km.labels, config)?;
            rows.push(score_row(Method::TwoStep, data, &tree.assign_all(data)?, &Criterion::ALL)?);
        }
    }
    if let (true, Some(t)) = (methods.contains(&Method::Truth), &truth) {
        rows.push(score_row(Method::Truth, data, t, &Criterion::ALL)?);
    }
    mark_best(&mut rows);
    Ok(RunOutcome {
        fit: fits.remove(&config.criterion).expect("fitted above"),
        rows,
        kmeans_k,
    })
}

fn distinct_rows(data: &Dataset) -> usize {
    let mut rows: Vec<&Vec<f64>> = data.rows().iter().collect();
    rows.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    rows.dedup();
    rows.len()
}

/// Stars the best score per criterion; tied maxima all get a star.
pub fn mark_best(rows: &mut [MethodRow]) {
    for c in Criterion::ALL {
        let best = rows
            .iter()
            .filter_map(|r| r.score(c).map(|s| s.value))
            .fold(f64::NEG_INFINITY, f64::max);
        for row in rows.iter_mut() {
            if let Some(s) = row.scores.get_mut(c.name()) {
                s.best = s.value >= best - STAR_TIE;
            }
        }
    }
}

/// Comparison table, one row per method, one column per criterion.
pub fn render_table(rows: &[MethodRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<10} {:>14} {:>14}", "Method", "Silhouette", "Dunn");
    for row in rows {
        let cell = |c: Criterion| match row.score(c) {
            Some(s) => format!("{:.3}{} (k={})", s.value, if s.best { "*" } else { " " }, s.clusters),
            None => "-".to_string(),
        };
        let _ = writeln!(
            out,
            "{:<10} {:>14} {:>14}",
            row.method.title(),
            cell(Criterion::Silhouette),
            cell(Criterion::Dunn)
        );
    }
    out
}

/// One line per leaf: cluster id, size and the conjunction of conditions
/// leading to it, in the units of the original columns.
pub fn render_paths(tree: &ClusterTree, data: &Dataset) -> Result<String> {
    let sizes = tree.leaf_sizes(data)?;
    let mut out = String::new();
    for leaf in tree.leaves() {
        let id = tree.cluster_id(leaf);
        let conditions: Vec<String> = tree
            .decision_path(leaf)
            .into_iter()
            .map(|(rule, side)| data.describe_condition(rule.feature, rule.threshold, side == Side::Upper))
            .collect();
        let path = if conditions.is_empty() {
            "(all observations)".to_string()
        } else {
            conditions.join(" AND ")
        };
        let _ = writeln!(out, "cluster {id} (n={}): {path}", sizes[id]);
    }
    Ok(out)
}

/// Assembles the report document for a finished run.
pub fn build_report(
    command: &str,
    source: &str,
    data: &Dataset,
    config: &SearchConfig,
    outcome: &RunOutcome,
    wall_clock_seconds: Option<f64>,
) -> Result<RunReport> {
    let fit = &outcome.fit;
    let sizes = fit.tree.leaf_sizes(data)?;
    Ok(RunReport {
        schema: REPORT_SCHEMA.to_string(),
        command: command.to_string(),
        input: InputEcho {
            source: source.to_string(),
            n: data.n(),
            p: data.p(),
            feature_names: data.feature_names().to_vec(),
        },
        config: config.clone(),
        seed: config.seed,
        kmeans_k: outcome.kmeans_k,
        methods: outcome.rows.clone(),
        tree: fit.tree.to_document(Some(data.feature_names()), Some(&sizes)),
        cluster_sizes: sizes,
        objective: fit.score.value,
        wall_clock_seconds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: Method, s: f64, d: f64) -> MethodRow {
        let mut scores = BTreeMap::new();
        scores.insert("silhouette".to_string(), MethodScore { value: s, clusters: 2, best: false });
        scores.insert("dunn".to_string(), MethodScore { value: d, clusters: 2, best: false });
        MethodRow { method, scores }
    }

    #[test]
    fn ties_share_the_star() {
        let mut rows = vec![row(Method::Icot, 0.5, 0.117), row(Method::Kmeans, 0.4, 0.05), row(Method::Truth, 0.3, 0.117)];
        mark_best(&mut rows);
        assert!(rows[0].score(Criterion::Dunn).unwrap().best);
        assert!(rows[2].score(Criterion::Dunn).unwrap().best);
        assert!(!rows[1].score(Criterion::Dunn).unwrap().best);
        assert!(rows[0].score(Criterion::Silhouette).unwrap().best);
        assert!(!rows[2].score(Criterion::Silhouette).unwrap().best);
        let table = render_table(&rows);
        assert!(table.contains("0.117*"));
        assert_eq!(table.matches('*').count(), 3);
    }

    #[test]
    fn methods_parse() {
        assert_eq!("two_step".parse::<Method>().unwrap(), Method::TwoStep);
        assert!(matches!("oct".parse::<Method>(), Err(IcotError::Usage(_))));
    }

    #[test]
    fn hand_instance_run_and_round_trip() {
        let data = Dataset::from_rows(&[vec![0.0], vec![0.1], vec![0.9], vec![1.0]]).unwrap();
        let config = SearchConfig { restarts: 3, min_bucket: 1, ..SearchConfig::default() };
        let truth = [0, 0, 1, 1];
        let outcome = run_methods(&data, Some(&truth), &Method::ALL, &config).unwrap();
        assert_eq!(outcome.rows.len(), 4);
        assert_eq!(outcome.kmeans_k, Some(2));
        for r in &outcome.rows {
            assert!(r.score(Criterion::Silhouette).unwrap().best, "{:?}", r.method);
        }
        let report = build_report("benchmark", "inline", &data, &config, &outcome, None).unwrap();
        let text = report.to_json().unwrap();
        assert_eq!(RunReport::from_json(&text).unwrap(), report);
        let paths = render_paths(&outcome.fit.tree, &data).unwrap();
        assert_eq!(paths, "cluster 0 (n=2): x1 < 0.5\ncluster 1 (n=2): x1 >= 0.5\n");
    }

    #[test]
    fn icot_only() {
        let data = Dataset::from_rows(&[vec![0.0], vec![0.1], vec![0.9], vec![1.0]]).unwrap();
        let config = SearchConfig { restarts: 2, ..SearchConfig::default() };
        let outcome = run_methods(&data, None, &[Method::Icot], &config).unwrap();
        assert_eq!(outcome.rows.len(), 1);
        assert!(run_methods(&data, None, &[Method::Truth], &config).is_err());
    }
}
