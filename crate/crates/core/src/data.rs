//! Tabular datasets: loading, label encoding, scaling, splitting and
//! bootstrap resampling.
//!
//! Features are stored row-major in a single `Vec<f64>`. Labels are binary,
//! encoded as [`Label::Negative`] (-1) and [`Label::Positive`] (+1).

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::seed;
use crate::{Error, Result};

/// Binary class code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn code(self) -> i8 {
        match self {
            Label::Negative => -1,
            Label::Positive => 1,
        }
    }

    pub fn from_code(code: i8) -> Option<Label> {
        match code {
            -1 => Some(Label::Negative),
            1 => Some(Label::Positive),
            _ => None,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }
}

impl From<Label> for i8 {
    fn from(label: Label) -> i8 {
        label.code()
    }
}

impl TryFrom<i8> for Label {
    type Error = String;

    fn try_from(code: i8) -> Result<Self, Self::Error> {
        Label::from_code(code).ok_or_else(|| format!("class code must be -1 or +1, got {code}"))
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+}", self.code())
    }
}

/// Counts of (negative, positive) labels.
pub fn class_counts(labels: &[Label]) -> (usize, usize) {
    let positives = labels.iter().filter(|l| l.is_positive()).count();
    (labels.len() - positives, positives)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    feature_names: Vec<String>,
    features: Vec<f64>,
    labels: Vec<Label>,
}

impl Dataset {
    /// Builds a dataset from row vectors, checking shape, finiteness and that
    /// feature names are distinct.
    pub fn new(
        name: impl Into<String>,
        feature_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        labels: Vec<Label>,
    ) -> Result<Self> {
        let width = feature_names.len();
        let mut features = Vec::with_capacity(rows.len() * width);
        for row in &rows {
            if row.len() != width {
                return Err(Error::ColumnCount {
                    expected: width,
                    found: row.len(),
                });
            }
            features.extend_from_slice(row);
        }
        Self::from_flat(name, feature_names, features, labels)
    }

    /// Builds a dataset from a row-major feature buffer.
    pub fn from_flat(
        name: impl Into<String>,
        feature_names: Vec<String>,
        features: Vec<f64>,
        labels: Vec<Label>,
    ) -> Result<Self> {
        if feature_names.is_empty() {
            return Err(Error::InvalidParameter(
                "a dataset needs at least one feature".into(),
            ));
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateColumn(name.clone()));
            }
        }
        if features.len() != labels.len() * feature_names.len() {
            return Err(Error::LengthMismatch {
                expected: labels.len() * feature_names.len(),
                found: features.len(),
            });
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite feature value at row {}, column `{}`",
                pos / feature_names.len(),
                feature_names[pos % feature_names.len()]
            )));
        }
        Ok(Dataset {
            name: name.into(),
            feature_names,
            features,
            labels,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label(&self, row: usize) -> Label {
        self.labels[row]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let width = self.n_features();
        &self.features[row * width..(row + 1) * width]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.n_features())
    }

    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.features[row * self.n_features() + feature]
    }

    pub fn column(&self, feature: usize) -> Vec<f64> {
        self.rows().map(|r| r[feature]).collect()
    }

    /// Row-major feature buffer.
    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn class_counts(&self) -> (usize, usize) {
        class_counts(&self.labels)
    }

    pub fn has_both_classes(&self) -> bool {
        let (neg, pos) = self.class_counts();
        neg > 0 && pos > 0
    }

    /// New dataset made of the given rows, in the given order. Indices may repeat.
    pub fn select_rows(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.n_features());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            name: self.name.clone(),
            feature_names: self.feature_names.clone(),
            features,
            labels,
        }
    }
}

/// How the raw target column is mapped onto the positive class.
#[derive(Debug, Clone, PartialEq)]
pub enum PositiveRule {
    /// Cells equal to this text (or numerically equal, when both parse) are positive.
    Equals(String),
    LessEq(f64),
    Less(f64),
    GreaterEq(f64),
    Greater(f64),
}

impl PositiveRule {
    pub fn is_positive(&self, cell: &str) -> bool {
        let cell = cell.trim();
        let numeric = || cell.parse::<f64>().ok();
        match self {
            PositiveRule::Equals(text) => {
                if cell == text {
                    return true;
                }
                match (cell.parse::<f64>(), text.parse::<f64>()) {
                    (Ok(a), Ok(b)) => a == b,
                    _ => false,
                }
            }
            PositiveRule::LessEq(t) => numeric().is_some_and(|v| v <= *t),
            PositiveRule::Less(t) => numeric().is_some_and(|v| v < *t),
            PositiveRule::GreaterEq(t) => numeric().is_some_and(|v| v >= *t),
            PositiveRule::Greater(t) => numeric().is_some_and(|v| v > *t),
        }
    }
}

impl FromStr for PositiveRule {
    type Err = Error;

    /// `"M"` or `"1"` selects by equality; `"<=-0.5"`, `"<0"`, `">=1"`, `">2.5"`
    /// select by numeric comparison.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let parse = |rest: &str| {
            rest.trim().parse::<f64>().map_err(|_| {
                Error::InvalidParameter(format!("cannot parse threshold in label rule {s:?}"))
            })
        };
        Ok(if let Some(rest) = s.strip_prefix("<=") {
            PositiveRule::LessEq(parse(rest)?)
        } else if let Some(rest) = s.strip_prefix(">=") {
            PositiveRule::GreaterEq(parse(rest)?)
        } else if let Some(rest) = s.strip_prefix('<') {
            PositiveRule::Less(parse(rest)?)
        } else if let Some(rest) = s.strip_prefix('>') {
            PositiveRule::Greater(parse(rest)?)
        } else {
            PositiveRule::Equals(s.to_string())
        })
    }
}

/// Options for [`load_csv_with`].
#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub target_column: String,
    pub positive: PositiveRule,
    pub delimiter: u8,
    /// Columns ignored entirely (identifiers, timestamps).
    pub drop_columns: Vec<String>,
}

/// Loads a delimited file with a header row. The target column is mapped to
/// +1 where it equals `positive_label` and to -1 otherwise; every other column
/// must parse as a real number.
pub fn load_csv(
    path: impl AsRef<Path>,
    target_column: &str,
    positive_label: &str,
    delimiter: u8,
) -> Result<Dataset> {
    load_csv_with(
        path,
        &CsvOptions {
            target_column: target_column.to_string(),
            positive: PositiveRule::Equals(positive_label.trim().to_string()),
            delimiter,
            drop_columns: Vec::new(),
        },
    )
}

pub fn load_csv_with(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let target = header
        .iter()
        .position(|h| *h == options.target_column)
        .ok_or_else(|| Error::MissingColumn(options.target_column.clone()))?;
    for dropped in &options.drop_columns {
        if !header.contains(dropped) {
            return Err(Error::MissingColumn(dropped.clone()));
        }
    }
    let kept: Vec<usize> = (0..header.len())
        .filter(|&c| c != target && !options.drop_columns.contains(&header[c]))
        .collect();
    let feature_names: Vec<String> = kept.iter().map(|&c| header[c].clone()).collect();

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        // 1-based line number of the data row, header being line 1.
        let row = i + 2;
        for &c in &kept {
            let cell = record.get(c).unwrap_or("");
            if cell.is_empty() {
                return Err(Error::MissingValue {
                    row,
                    column: header[c].clone(),
                });
            }
            let value = cell.parse::<f64>().map_err(|_| Error::ParseCell {
                row,
                column: header[c].clone(),
                value: cell.to_string(),
            })?;
            if !value.is_finite() {
                return Err(Error::ParseCell {
                    row,
                    column: header[c].clone(),
                    value: cell.to_string(),
                });
            }
            features.push(value);
        }
        let cell = record.get(target).unwrap_or("");
        if cell.is_empty() {
            return Err(Error::MissingValue {
                row,
                column: header[target].clone(),
            });
        }
        labels.push(if options.positive.is_positive(cell) {
            Label::Positive
        } else {
            Label::Negative
        });
    }

    if labels.len() < 2 {
        return Err(Error::TooFewRows(labels.len()));
    }
    let (neg, pos) = class_counts(&labels);
    if neg == 0 || pos == 0 {
        return Err(Error::SingleClass);
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Dataset::from_flat(name, feature_names, features, labels)
}

/// Reads an all-numeric delimited table with a header (no target mapping).
/// Columns listed in `skip` are ignored when present.
pub fn load_feature_table(
    path: impl AsRef<Path>,
    delimiter: u8,
    skip: &[String],
) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let kept: Vec<usize> = (0..header.len())
        .filter(|&c| !skip.contains(&header[c]))
        .collect();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = kept
            .iter()
            .map(|&c| {
                let cell = record.get(c).unwrap_or("");
                if cell.is_empty() {
                    return Err(Error::MissingValue {
                        row: i + 2,
                        column: header[c].clone(),
                    });
                }
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::ParseCell {
                        row: i + 2,
                        column: header[c].clone(),
                        value: cell.to_string(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((kept.iter().map(|&c| header[c].clone()).collect(), rows))
}

/// Writes a dataset as delimited text; labels go to `target_column` as -1/+1.
pub fn write_csv(
    dataset: &Dataset,
    writer: impl std::io::Write,
    target_column: &str,
    delimiter: u8,
) -> Result<()> {
    let mut out = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_writer(writer);
    let mut header: Vec<&str> = dataset.feature_names().iter().map(String::as_str).collect();
    header.push(target_column);
    out.write_record(&header)?;
    for (row, label) in dataset.rows().zip(dataset.labels()) {
        let mut record: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        record.push(label.code().to_string());
        out.write_record(&record)?;
    }
    out.flush().map_err(|source| Error::Io {
        path: "<output>".into(),
        source,
    })?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub n_observations: usize,
    pub minority_fraction: f64,
    pub n_features: usize,
}

impl DatasetSummary {
    /// Single-line record: `name,n_observations,minority_fraction,n_features`.
    pub fn to_record(&self) -> String {
        format!(
            "{},{},{:.4},{}",
            self.name, self.n_observations, self.minority_fraction, self.n_features
        )
    }
}

impl fmt::Display for DatasetSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_record())
    }
}

pub fn summarize(dataset: &Dataset) -> DatasetSummary {
    let (neg, pos) = dataset.class_counts();
    let n = dataset.n_rows();
    let minority_fraction = if n == 0 {
        0.0
    } else {
        neg.min(pos) as f64 / n as f64
    };
    DatasetSummary {
        name: dataset.name().to_string(),
        n_observations: n,
        minority_fraction,
        n_features: dataset.n_features(),
    }
}

/// Per-column minimum and maximum captured from a fitting set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxTable {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxTable {
    pub fn fit(dataset: &Dataset) -> Self {
        let width = dataset.n_features();
        let mut min = vec![f64::INFINITY; width];
        let mut max = vec![f64::NEG_INFINITY; width];
        for row in dataset.rows() {
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        if dataset.is_empty() {
            min.fill(0.0);
            max.fill(0.0);
        }
        MinMaxTable { min, max }
    }

    pub fn width(&self) -> usize {
        self.min.len()
    }

    /// `(x - min) / (max - min)`, or 0 for a constant column.
    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&x, (&lo, &hi))| {
                let range = hi - lo;
                if range > 0.0 {
                    (x - lo) / range
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn apply(&self, dataset: &Dataset) -> Result<Dataset> {
        if dataset.n_features() != self.width() {
            return Err(Error::ColumnCount {
                expected: self.width(),
                found: dataset.n_features(),
            });
        }
        let features = dataset.rows().flat_map(|r| self.apply_row(r)).collect();
        Dataset::from_flat(
            dataset.name(),
            dataset.feature_names().to_vec(),
            features,
            dataset.labels().to_vec(),
        )
    }
}

/// Rescales every column to [0, 1]; returns the table needed to transform
/// other data identically.
pub fn normalize_minmax(dataset: &Dataset) -> (Dataset, MinMaxTable) {
    let table = MinMaxTable::fit(dataset);
    let scaled = table
        .apply(dataset)
        .expect("table fitted on this dataset has matching width");
    (scaled, table)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            test_fraction: 0.3,
            seed: 0,
            stratified: true,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "test fraction must lie strictly between 0 and 1, got {}",
                self.test_fraction
            )));
        }
        Ok(())
    }
}

/// Row indices of the (train, test) partitions, each sorted ascending.
///
/// Stratified splits shuffle each class separately and send
/// `round(test_fraction * class_size)` rows of it to the test side.
pub fn split_indices(labels: &[Label], spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    spec.validate()?;
    let mut rng = seed::rng(spec.seed);
    let groups: Vec<Vec<usize>> = if spec.stratified {
        let (neg, pos): (Vec<usize>, Vec<usize>) =
            (0..labels.len()).partition(|&i| !labels[i].is_positive());
        vec![neg, pos]
    } else {
        vec![(0..labels.len()).collect()]
    };

    let mut train = Vec::with_capacity(labels.len());
    let mut test = Vec::new();
    for mut group in groups {
        group.shuffle(&mut rng);
        let n_test = (spec.test_fraction * group.len() as f64).round() as usize;
        test.extend_from_slice(&group[..n_test]);
        train.extend_from_slice(&group[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();

    if train.is_empty() {
        return Err(Error::EmptyPartition("train"));
    }
    if test.is_empty() {
        return Err(Error::EmptyPartition("test"));
    }
    if spec.stratified {
        for (part, name) in [(&train, "train"), (&test, "test")] {
            let positives = part.iter().filter(|&&i| labels[i].is_positive()).count();
            if positives == 0 || positives == part.len() {
                return Err(Error::PartitionMissingClass(name));
            }
        }
    }
    Ok((train, test))
}

pub fn train_test_split(dataset: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    if !dataset.has_both_classes() {
        return Err(Error::SingleClass);
    }
    let (train, test) = split_indices(dataset.labels(), spec)?;
    Ok((dataset.select_rows(&train), dataset.select_rows(&test)))
}

/// `n` indices drawn uniformly with replacement from `0..n`.
pub fn bootstrap_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = seed::rng(seed);
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

pub fn bootstrap_sample(dataset: &Dataset, seed: u64) -> Result<Dataset> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(dataset.select_rows(&bootstrap_indices(dataset.n_rows(), seed)))
}
