//! Tabular input: loading, encoding, normalization and the shared distance matrix.
//!
//! Every encoded feature lives in `[0, 1]`. Numeric columns are min-max
//! scaled (a constant column becomes all zeros). Categorical columns are
//! one-hot encoded with each indicator scaled by `1/sqrt(2)`, so two rows that
//! differ in a single categorical column are exactly `1.0` apart, the same as
//! the largest possible contribution of one numeric column.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{IcotError, Result};

/// Scale applied to one-hot indicators.
pub const ONE_HOT_SCALE: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    /// Distinct labels in sorted order; empty for numeric columns.
    pub categories: Vec<String>,
}

/// A raw input column before encoding.
#[derive(Debug, Clone, PartialEq)]
pub enum RawColumn {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl RawColumn {
    fn len(&self) -> usize {
        match self {
            RawColumn::Numeric(v) => v.len(),
            RawColumn::Categorical(v) => v.len(),
        }
    }
}

/// How one encoded feature maps back to the original table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureOrigin {
    /// Min-max scaled numeric column with its original range.
    Numeric { column: usize, min: f64, max: f64 },
    /// Scaled indicator of `category` in a categorical column.
    Indicator { column: usize, category: String },
}

/// Symmetric matrix of pairwise Euclidean distances, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    /// Wraps a dense row-major `n x n` buffer. Symmetry and the zero diagonal
    /// are checked.
    pub fn from_dense(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(IcotError::validation(format!(
                "distance buffer has {} entries, expected {}",
                data.len(),
                n * n
            )));
        }
        for i in 0..n {
            if data[i * n + i] != 0.0 {
                return Err(IcotError::validation(format!("nonzero diagonal at {i}")));
            }
            for j in 0..i {
                let (a, b) = (data[i * n + j], data[j * n + i]);
                if !a.is_finite() || a < 0.0 || a != b {
                    return Err(IcotError::validation(format!(
                        "distance ({i}, {j}) is not a symmetric nonnegative number"
                    )));
                }
            }
        }
        Ok(DistanceMatrix { n, data })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// Multiplies every entry by `factor`.
    pub fn scaled(&self, factor: f64) -> DistanceMatrix {
        DistanceMatrix {
            n: self.n,
            data: self.data.iter().map(|d| d * factor).collect(),
        }
    }

    /// Reorders observations: entry `(a, b)` of the result is `(order[a], order[b])`.
    pub fn permuted(&self, order: &[usize]) -> DistanceMatrix {
        let n = order.len();
        let mut data = Vec::with_capacity(n * n);
        for &i in order {
            for &j in order {
                data.push(self.get(i, j));
            }
        }
        DistanceMatrix { n, data }
    }
}

/// Euclidean distances between all pairs of rows.
pub fn pairwise_distances(rows: &[Vec<f64>]) -> Result<DistanceMatrix> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != p {
            return Err(IcotError::validation(format!(
                "row {i} has {} features, expected {p}",
                row.len()
            )));
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(IcotError::validation(format!(
                "non-finite value at row {i}, feature {j}"
            )));
        }
    }
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..i {
            let d = rows[i]
                .iter()
                .zip(&rows[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            data[i * n + j] = d;
            data[j * n + i] = d;
        }
    }
    Ok(DistanceMatrix { n, data })
}

/// Per-dimension smallest positive gap between observed values, and the
/// largest of those gaps.
///
/// A dimension whose values are all equal gets a gap of `1.0`: no strict
/// split exists there.
pub fn min_separation_vector(rows: &[Vec<f64>]) -> Result<(Vec<f64>, f64)> {
    if rows.len() < 2 {
        return Err(IcotError::validation(
            "minimum separation needs at least two observations",
        ));
    }
    let p = rows[0].len();
    let mut eps = Vec::with_capacity(p);
    for j in 0..p {
        let mut values: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        values.sort_by(f64::total_cmp);
        let gap = values
            .windows(2)
            .map(|w| w[1] - w[0])
            .filter(|g| *g > 0.0)
            .fold(f64::INFINITY, f64::min);
        eps.push(if gap.is_finite() { gap } else { 1.0 });
    }
    let eps_max = eps.iter().copied().fold(0.0, f64::max);
    Ok((eps, eps_max))
}

/// Immutable, normalized observation table with its distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: Vec<Vec<f64>>,
    schema: Vec<ColumnSchema>,
    encoding_map: Vec<Vec<usize>>,
    origins: Vec<FeatureOrigin>,
    feature_names: Vec<String>,
    /// Built on first use.
    distances: OnceLock<DistanceMatrix>,
}

impl Dataset {
    /// Encodes and normalizes raw columns.
    pub fn from_columns(names: Vec<String>, columns: Vec<RawColumn>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(IcotError::validation(format!(
                "{} column names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        if columns.is_empty() {
            return Err(IcotError::validation("dataset has no feature columns"));
        }
        let n = columns[0].len();
        if n < 2 {
            return Err(IcotError::validation(format!(
                "dataset needs at least 2 observations, got {n}"
            )));
        }
        if let Some(c) = columns.iter().position(|c| c.len() != n) {
            return Err(IcotError::validation(format!(
                "column '{}' has {} values, expected {n}",
                names[c],
                columns[c].len()
            )));
        }

        let mut rows = vec![Vec::new(); n];
        let mut schema = Vec::with_capacity(columns.len());
        let mut encoding_map = Vec::with_capacity(columns.len());
        let mut origins = Vec::new();
        let mut feature_names = Vec::new();

        for (column, (name, raw)) in names.into_iter().zip(columns).enumerate() {
            match raw {
                RawColumn::Numeric(values) => {
                    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                        return Err(IcotError::validation(format!(
                            "non-finite value in column '{name}' at row {i}"
                        )));
                    }
                    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
                    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let range = max - min;
                    for (row, v) in rows.iter_mut().zip(&values) {
                        row.push(if range > 0.0 { (v - min) / range } else { 0.0 });
                    }
                    encoding_map.push(vec![feature_names.len()]);
                    origins.push(FeatureOrigin::Numeric { column, min, max });
                    feature_names.push(name.clone());
                    schema.push(ColumnSchema {
                        name,
                        kind: ColumnKind::Numeric,
                        categories: Vec::new(),
                    });
                }
                RawColumn::Categorical(values) => {
                    if let Some(i) = values.iter().position(|v| v.is_empty()) {
                        return Err(IcotError::validation(format!(
                            "empty category in column '{name}' at row {i}"
                        )));
                    }
                    let categories: Vec<String> = values
                        .iter()
                        .cloned()
                        .collect::<BTreeSet<_>>()
                        .into_iter()
                        .collect();
                    let mut indices = Vec::with_capacity(categories.len());
                    for category in &categories {
                        indices.push(feature_names.len());
                        origins.push(FeatureOrigin::Indicator {
                            column,
                            category: category.clone(),
                        });
                        feature_names.push(format!("{name}={category}"));
                    }
                    for (row, v) in rows.iter_mut().zip(&values) {
                        for category in &categories {
                            row.push(if category == v { ONE_HOT_SCALE } else { 0.0 });
                        }
                    }
                    encoding_map.push(indices);
                    schema.push(ColumnSchema {
                        name,
                        kind: ColumnKind::Categorical,
                        categories,
                    });
                }
            }
        }

        if let Some((i, j)) = rows
            .iter()
            .enumerate()
            .find_map(|(i, r)| r.iter().position(|v| !v.is_finite()).map(|j| (i, j)))
        {
            return Err(IcotError::validation(format!("non-finite value at row {i}, feature {j}")));
        }
        Ok(Dataset {
            rows,
            schema,
            encoding_map,
            origins,
            feature_names,
            distances: OnceLock::new(),
        })
    }

    /// Builds a dataset from numeric rows, naming columns `x1..xp`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        let names = (1..=p).map(|j| format!("x{j}")).collect();
        Self::from_named_rows(names, rows)
    }

    pub fn from_named_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let p = names.len();
        if let Some(i) = rows.iter().position(|r| r.len() != p) {
            return Err(IcotError::validation(format!(
                "row {i} has {} values, expected {p}",
                rows[i].len()
            )));
        }
        let columns = (0..p)
            .map(|j| RawColumn::Numeric(rows.iter().map(|r| r[j]).collect()))
            .collect();
        Self::from_columns(names, columns)
    }

    /// Number of observations.
    #[inline]
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    /// Number of encoded features.
    #[inline]
    pub fn p(&self) -> usize {
        self.feature_names.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    #[inline]
    pub fn value(&self, i: usize, feature: usize) -> f64 {
        self.rows[i][feature]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn distances(&self) -> &DistanceMatrix {
        self.distances
            .get_or_init(|| pairwise_distances(&self.rows).expect("rows are finite and rectangular"))
    }

    pub fn schema(&self) -> &[ColumnSchema] {
        &self.schema
    }

    /// Original column index -> encoded feature indices.
    pub fn encoding_map(&self) -> &[Vec<usize>] {
        &self.encoding_map
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_origin(&self, feature: usize) -> &FeatureOrigin {
        &self.origins[feature]
    }

    /// Per-dimension minimum gaps, see [`min_separation_vector`].
    pub fn min_separation(&self) -> (Vec<f64>, f64) {
        min_separation_vector(&self.rows).expect("datasets hold at least two observations")
    }

    /// Renders the condition `feature < threshold` (or `>=` when `upper`)
    /// in the units of the original column.
    pub fn describe_condition(&self, feature: usize, threshold: f64, upper: bool) -> String {
        match &self.origins[feature] {
            FeatureOrigin::Numeric { column, min, max } => {
                let original = min + threshold * (max - min);
                let op = if upper { ">=" } else { "<" };
                format!("{} {op} {}", self.schema[*column].name, format_number(original))
            }
            FeatureOrigin::Indicator { column, category } => {
                let op = if upper { "==" } else { "!=" };
                format!("{} {op} {category}", self.schema[*column].name)
            }
        }
    }
}

fn format_number(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// A dataset with per-observation ground-truth cluster labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub data: Dataset,
    pub truth: Vec<usize>,
}

impl LabeledDataset {
    pub fn new(data: Dataset, truth: Vec<usize>) -> Result<Self> {
        if truth.len() != data.n() {
            return Err(IcotError::validation(format!(
                "{} labels for {} observations",
                truth.len(),
                data.n()
            )));
        }
        Ok(LabeledDataset { data, truth })
    }

    /// Number of distinct truth labels.
    pub fn cluster_count(&self) -> usize {
        self.truth.iter().collect::<BTreeSet<_>>().len()
    }
}

/// Options for [`load_csv`].
#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Per-column kind overrides, by header name.
    pub schema_hint: HashMap<String, ColumnKind>,
    /// Column holding ground-truth labels. When unset, a column named
    /// `class` (any case) is used if present.
    pub label_column: Option<String>,
}

/// Loads a CSV (or whitespace-delimited FCPS) file, dropping the label column.
pub fn load_csv(path: impl AsRef<Path>, options: &LoadOptions) -> Result<Dataset> {
    load_labeled_csv(path, options).map(|(data, _)| data)
}

/// Loads a table and returns the dataset plus truth labels when a label
/// column is present.
pub fn load_labeled_csv(
    path: impl AsRef<Path>,
    options: &LoadOptions,
) -> Result<(Dataset, Option<Vec<usize>>)> {
    let text = fs::read_to_string(path)?;
    parse_table(&text, options)
}

/// Parses table text; see [`load_labeled_csv`].
pub fn parse_table(text: &str, options: &LoadOptions) -> Result<(Dataset, Option<Vec<usize>>)> {
    let table = RawTable::parse(text)?;
    table.into_dataset(options)
}

/// Loads an FCPS `.lrn` file and, optionally, its `.cls` label file.
pub fn load_fcps(
    lrn: impl AsRef<Path>,
    cls: Option<&Path>,
) -> Result<(Dataset, Option<Vec<usize>>)> {
    let (data, inline) = load_labeled_csv(lrn.as_ref(), &LoadOptions::default())?;
    let Some(cls) = cls else {
        return Ok((data, inline));
    };
    let text = fs::read_to_string(cls)?;
    let mut labels = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let label = fields.last().expect("non-empty line");
        let value = label.parse::<usize>().map_err(|_| IcotError::Parse {
            line: line_no + 1,
            column: fields.len(),
            message: format!("class label '{label}' is not a nonnegative integer"),
        })?;
        labels.push(value);
    }
    if labels.len() != data.n() {
        return Err(IcotError::validation(format!(
            "{} class labels for {} observations",
            labels.len(),
            data.n()
        )));
    }
    Ok((data, Some(labels)))
}

struct RawTable {
    names: Vec<String>,
    /// Cells with their 1-based source line.
    rows: Vec<(usize, Vec<String>)>,
}

impl RawTable {
    fn parse(text: &str) -> Result<Self> {
        let comment_lines: Vec<&str> = text
            .lines()
            .map(str::trim)
            .filter(|l| l.starts_with('%'))
            .collect();
        let first_data = text
            .lines()
            .map(str::trim)
            .find(|l| !l.is_empty() && !l.starts_with('%'))
            .ok_or_else(|| IcotError::validation("input contains no data rows"))?;
        let mut table = if first_data.contains(',') {
            Self::parse_delimited(text)?
        } else {
            Self::parse_whitespace(text, &comment_lines)?
        };
        table.drop_fcps_key_columns(&comment_lines);
        Ok(table)
    }

    fn parse_delimited(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .comment(Some(b'%'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let names: Vec<String> = reader
            .headers()
            .map_err(csv_error)?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(csv_error)?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            rows.push((line, record.iter().map(str::to_string).collect()));
        }
        Ok(RawTable { names, rows })
    }

    fn parse_whitespace(text: &str, comment_lines: &[&str]) -> Result<Self> {
        let mut rows: Vec<(usize, Vec<String>)> = text
            .lines()
            .enumerate()
            .filter(|(_, l)| {
                let l = l.trim();
                !l.is_empty() && !l.starts_with('%')
            })
            .map(|(i, l)| (i + 1, l.split_whitespace().map(str::to_string).collect()))
            .collect();
        let width = rows[0].1.len();
        let header_from_comment = comment_lines.last().and_then(|l| {
            let tokens: Vec<String> = l[1..].split_whitespace().map(str::to_string).collect();
            let all_numeric = tokens.iter().all(|t| t.parse::<f64>().is_ok());
            (tokens.len() == width && !all_numeric).then_some(tokens)
        });
        let names = if let Some(names) = header_from_comment {
            names
        } else if rows[0].1.iter().any(|t| t.parse::<f64>().is_err()) {
            rows.remove(0).1
        } else {
            (1..=width).map(|j| format!("x{j}")).collect()
        };
        for (line, cells) in &rows {
            if cells.len() != names.len() {
                return Err(IcotError::Parse {
                    line: *line,
                    column: cells.len().min(names.len()) + 1,
                    message: format!("expected {} fields, found {}", names.len(), cells.len()),
                });
            }
        }
        Ok(RawTable { names, rows })
    }

    /// FCPS headers carry a column-type line (`% 9 1 1`): 9 marks the key
    /// column and 0 an ignored column.
    fn drop_fcps_key_columns(&mut self, comment_lines: &[&str]) {
        let width = self.names.len();
        let types = comment_lines.iter().find_map(|l| {
            let tokens: Vec<u32> = l[1..]
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .ok()?;
            (tokens.len() == width && tokens.contains(&9)).then_some(tokens)
        });
        let Some(types) = types else { return };
        let keep: Vec<bool> = types.iter().map(|t| *t != 9 && *t != 0).collect();
        let filter = |cells: &mut Vec<String>| {
            let mut it = keep.iter();
            cells.retain(|_| *it.next().unwrap());
        };
        filter(&mut self.names);
        for (_, cells) in &mut self.rows {
            filter(cells);
        }
    }

    fn into_dataset(self, options: &LoadOptions) -> Result<(Dataset, Option<Vec<usize>>)> {
        let RawTable { names, rows } = self;
        for (line, cells) in &rows {
            if let Some(c) = cells.iter().position(String::is_empty) {
                return Err(IcotError::validation(format!(
                    "missing value at line {line}, column {} ('{}')",
                    c + 1,
                    names[c]
                )));
            }
        }
        if rows.len() < 2 {
            return Err(IcotError::validation(format!(
                "need at least 2 data rows, found {}",
                rows.len()
            )));
        }

        let label_index = match &options.label_column {
            Some(label) => Some(names.iter().position(|n| n == label).ok_or_else(|| {
                IcotError::validation(format!("label column '{label}' not found"))
            })?),
            None => names.iter().position(|n| n.eq_ignore_ascii_case("class")),
        };

        let mut feature_names = Vec::new();
        let mut columns = Vec::new();
        let mut truth = None;
        for (c, name) in names.iter().enumerate() {
            let cells: Vec<&str> = rows.iter().map(|(_, r)| r[c].as_str()).collect();
            if Some(c) == label_index {
                truth = Some(encode_labels(&cells));
                continue;
            }
            let numeric: Option<Vec<f64>> = cells.iter().map(|s| s.parse().ok()).collect();
            let kind = options.schema_hint.get(name).copied().unwrap_or(if numeric.is_some() {
                ColumnKind::Numeric
            } else {
                ColumnKind::Categorical
            });
            let column = match kind {
                ColumnKind::Numeric => {
                    let values = numeric.ok_or_else(|| {
                        let r = cells.iter().position(|s| s.parse::<f64>().is_err()).unwrap();
                        IcotError::Parse {
                            line: rows[r].0,
                            column: c + 1,
                            message: format!("'{}' is not a number", cells[r]),
                        }
                    })?;
                    RawColumn::Numeric(values)
                }
                ColumnKind::Categorical => {
                    RawColumn::Categorical(cells.iter().map(|s| s.to_string()).collect())
                }
            };
            feature_names.push(name.clone());
            columns.push(column);
        }
        let data = Dataset::from_columns(feature_names, columns)?;
        Ok((data, truth))
    }
}

/// Integer labels are kept as-is; anything else is numbered 1.. by first
/// appearance.
fn encode_labels(cells: &[&str]) -> Vec<usize> {
    if let Some(labels) = cells.iter().map(|s| s.parse::<usize>().ok()).collect() {
        return labels;
    }
    let mut seen: HashMap<&str, usize> = HashMap::new();
    cells
        .iter()
        .map(|s| {
            let next = seen.len() + 1;
            *seen.entry(s).or_insert(next)
        })
        .collect()
}

fn csv_error(err: csv::Error) -> IcotError {
    let (line, column) = match err.kind() {
        csv::ErrorKind::UnequalLengths { pos, len, .. } => (
            pos.as_ref().map_or(0, |p| p.line() as usize),
            *len as usize + 1,
        ),
        _ => (err.position().map_or(0, |p| p.line() as usize), 0),
    };
    IcotError::Parse {
        line,
        column,
        message: err.to_string(),
    }
}
