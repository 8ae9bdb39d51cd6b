use std::collections::HashSet;
use std::fs::File;
use std::path::Path;

use super::{CodeMap, FeatureKind, Label, LabeledDataset};
use crate::error::{Error, Result};

/// Column names of the KDD Cup'99 connection records, in file order.
pub const KDD_FEATURE_NAMES: [&str; 41] = [
    "duration",
    "protocol_type",
    "service",
    "flag",
    "src_bytes",
    "dst_bytes",
    "land",
    "wrong_fragment",
    "urgent",
    "hot",
    "num_failed_logins",
    "logged_in",
    "num_compromised",
    "root_shell",
    "su_attempted",
    "num_root",
    "num_file_creations",
    "num_shells",
    "num_access_files",
    "num_outbound_cmds",
    "is_host_login",
    "is_guest_login",
    "count",
    "srv_count",
    "serror_rate",
    "srv_serror_rate",
    "rerror_rate",
    "srv_rerror_rate",
    "same_srv_rate",
    "diff_srv_rate",
    "srv_diff_host_rate",
    "dst_host_count",
    "dst_host_srv_count",
    "dst_host_same_srv_rate",
    "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate",
    "dst_host_srv_diff_host_rate",
    "dst_host_serror_rate",
    "dst_host_srv_serror_rate",
    "dst_host_rerror_rate",
    "dst_host_srv_rerror_rate",
];

const KDD_CATEGORICAL: [usize; 3] = [1, 2, 3];

/// Label column of the power-system attack dataset.
pub const POWERGRID_LABEL: &str = "marker";
const POWERGRID_DROP: [&str; 4] = ["date", "time", "timestamp", "datetime"];

#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    pub label_column: String,
    /// Label values mapped to [`Label::Positive`].
    pub positive_labels: Vec<String>,
    /// When set, only these values map to [`Label::Negative`] and anything
    /// else is an error. When unset, every non-positive label is negative.
    pub negative_labels: Option<Vec<String>>,
    pub drop_columns: Vec<String>,
    pub categorical_columns: Vec<String>,
    /// Existing code map to extend; codes already present stay fixed.
    pub codes: Option<CodeMap>,
}

impl CsvOptions {
    pub fn new(label_column: impl Into<String>, positive_labels: &[&str]) -> Self {
        CsvOptions {
            label_column: label_column.into(),
            positive_labels: positive_labels.iter().map(|s| s.to_string()).collect(),
            ..Default::default()
        }
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn parse_number(value: &str, row: usize, column: &str) -> Result<f64> {
    match value.parse::<f64>() {
        Ok(v) if !v.is_nan() => Ok(v),
        _ => Err(Error::UnparseableCell {
            row,
            column: column.to_string(),
            value: value.to_string(),
        }),
    }
}

/// Load a headed CSV file. Rows are numbered from 1 (first data row) in
/// error messages.
pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();

    let label_idx = header
        .iter()
        .position(|h| *h == opts.label_column)
        .ok_or_else(|| Error::MissingColumn(opts.label_column.clone()))?;
    let drop: HashSet<&str> = opts.drop_columns.iter().map(String::as_str).collect();
    let categorical: HashSet<&str> = opts.categorical_columns.iter().map(String::as_str).collect();
    for name in categorical.iter() {
        if !header.iter().any(|h| h == name) {
            return Err(Error::MissingColumn(name.to_string()));
        }
    }

    let kept: Vec<usize> = (0..header.len())
        .filter(|&i| i != label_idx && !drop.contains(header[i].as_str()))
        .collect();
    let feature_names: Vec<String> = kept.iter().map(|&i| header[i].clone()).collect();
    let feature_kinds: Vec<FeatureKind> = feature_names
        .iter()
        .map(|n| {
            if categorical.contains(n.as_str()) {
                FeatureKind::Categorical
            } else {
                FeatureKind::Numeric
            }
        })
        .collect();

    let mut codes = opts.codes.clone().unwrap_or_default();
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        if record.len() != header.len() {
            return Err(Error::ColumnCount {
                row,
                expected: header.len(),
                found: record.len(),
            });
        }
        let raw = &record[label_idx];
        let label = if opts.positive_labels.iter().any(|p| p == raw) {
            Label::Positive
        } else {
            match &opts.negative_labels {
                Some(neg) if !neg.iter().any(|n| n == raw) => {
                    return Err(Error::UnknownLabel {
                        row,
                        label: raw.to_string(),
                    })
                }
                _ => Label::Negative,
            }
        };
        labels.push(label);
        for (&col, kind) in kept.iter().zip(&feature_kinds) {
            let cell = &record[col];
            let v = match kind {
                FeatureKind::Categorical => codes.encode(&header[col], cell),
                FeatureKind::Numeric => parse_number(cell, row, &header[col])?,
            };
            features.push(v);
        }
    }
    let n = labels.len();
    LabeledDataset::from_parts(feature_names, feature_kinds, features, labels, vec![1; n], codes)
}

/// Load a KDD Cup'99 file (41 features plus label, no header). Every label
/// other than `normal` becomes positive; `protocol_type`, `service` and
/// `flag` are ordinal-encoded.
pub fn load_kdd(path: impl AsRef<Path>, codes: Option<CodeMap>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let expected = KDD_FEATURE_NAMES.len() + 1;
    let mut codes = codes.unwrap_or_default();
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        if record.len() != expected {
            return Err(Error::ColumnCount {
                row,
                expected,
                found: record.len(),
            });
        }
        if row == 1 && record.get(0) == Some(KDD_FEATURE_NAMES[0]) {
            return Err(Error::Schema(
                "KDD files carry no header row; found column names".into(),
            ));
        }
        for (c, name) in KDD_FEATURE_NAMES.iter().enumerate() {
            let cell = &record[c];
            let v = if KDD_CATEGORICAL.contains(&c) {
                codes.encode(name, cell)
            } else {
                parse_number(cell, row, name)?
            };
            features.push(v);
        }
        let label = record[expected - 1].trim_end_matches('.');
        labels.push(if label == "normal" {
            Label::Negative
        } else {
            Label::Positive
        });
    }
    let kinds = (0..KDD_FEATURE_NAMES.len())
        .map(|c| {
            if KDD_CATEGORICAL.contains(&c) {
                FeatureKind::Categorical
            } else {
                FeatureKind::Numeric
            }
        })
        .collect();
    let n = labels.len();
    LabeledDataset::from_parts(
        KDD_FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        kinds,
        features,
        labels,
        vec![1; n],
        codes,
    )
}

/// Load the binary power-system attack dataset: label column `marker`,
/// `Attack` rows positive, and any date/time columns dropped.
pub fn load_powergrid(path: impl AsRef<Path>, codes: Option<CodeMap>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let drop_columns = reader
        .headers()?
        .iter()
        .filter(|h| POWERGRID_DROP.contains(&h.to_ascii_lowercase().as_str()))
        .map(str::to_string)
        .collect();
    let opts = CsvOptions {
        label_column: POWERGRID_LABEL.to_string(),
        positive_labels: vec!["Attack".to_string()],
        negative_labels: None,
        drop_columns,
        categorical_columns: Vec::new(),
        codes,
    };
    load_csv(path, &opts)
}
