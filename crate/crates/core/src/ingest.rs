//! Delimited-text ingestion.
//!
//! Records are parsed line by line, categorical columns are mapped to ordinal
//! codes, an optional label column is split off for evaluation, and features
//! can be min-max normalized with statistics taken over the full dataset.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{FcmError, Result};
use crate::points::Points;

/// How to read a delimited file. Column indices are zero-based and refer to
/// the columns of the input line, label included.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSchema {
    pub delimiter: char,
    pub has_header: bool,
    pub label_column: Option<usize>,
    pub categorical_columns: BTreeSet<usize>,
}

impl Default for DatasetSchema {
    fn default() -> Self {
        DatasetSchema {
            delimiter: ',',
            has_header: false,
            label_column: None,
            categorical_columns: BTreeSet::new(),
        }
    }
}

impl DatasetSchema {
    pub fn with_header(mut self, has_header: bool) -> Self {
        self.has_header = has_header;
        self
    }

    pub fn with_label(mut self, column: usize) -> Self {
        self.label_column = Some(column);
        self
    }

    pub fn with_categorical(mut self, columns: impl IntoIterator<Item = usize>) -> Self {
        self.categorical_columns.extend(columns);
        self
    }

    pub fn with_delimiter(mut self, delimiter: char) -> Self {
        self.delimiter = delimiter;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.delimiter.is_whitespace() && self.delimiter != '\t' {
            return Err(FcmError::param("delimiter must not be a space"));
        }
        if let Some(label) = self.label_column {
            if self.categorical_columns.contains(&label) {
                return Err(FcmError::param(format!(
                    "column {label} cannot be both the label and a categorical feature"
                )));
            }
        }
        Ok(())
    }
}

/// One parsed feature field.
#[derive(Debug, Clone, PartialEq)]
pub enum RawValue {
    Number(f64),
    Token(String),
}

/// A parsed line: feature fields in column order (label removed) and the label.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub values: Vec<RawValue>,
    pub label: Option<String>,
}

/// Parsed file contents before categorical encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub header: Option<Vec<String>>,
    /// Input column index of every feature field.
    pub feature_columns: Vec<usize>,
    pub records: Vec<RawRecord>,
}

/// Parses every non-empty line of `source`.
pub fn read_records<R: BufRead>(source: R, schema: &DatasetSchema) -> Result<RawTable> {
    schema.validate()?;
    let mut header = None;
    let mut width: Option<usize> = None;
    let mut records = Vec::new();

    for (idx, line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| FcmError::Parse {
            line: line_no,
            column: 0,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(schema.delimiter).map(str::trim).collect();
        if schema.has_header && header.is_none() {
            width = Some(fields.len());
            header = Some(fields.iter().map(|s| s.to_string()).collect());
            continue;
        }
        let expected = *width.get_or_insert(fields.len());
        if fields.len() != expected {
            return Err(FcmError::Parse {
                line: line_no,
                column: fields.len().min(expected) + 1,
                message: format!("expected {expected} fields, found {}", fields.len()),
            });
        }
        records.push(parse_fields(&fields, schema, line_no)?);
    }

    let width = width.unwrap_or(0);
    if records.is_empty() {
        return Err(FcmError::invalid("input contains no records"));
    }
    if let Some(label) = schema.label_column {
        if label >= width {
            return Err(FcmError::param(format!(
                "label column {label} is out of range for {width} columns"
            )));
        }
    }
    if let Some(&c) = schema.categorical_columns.iter().find(|&&c| c >= width) {
        return Err(FcmError::param(format!(
            "categorical column {c} is out of range for {width} columns"
        )));
    }
    let feature_columns: Vec<usize> = (0..width)
        .filter(|c| Some(*c) != schema.label_column)
        .collect();
    if feature_columns.is_empty() {
        return Err(FcmError::invalid(
            "no feature columns remain after removing the label",
        ));
    }
    Ok(RawTable {
        header,
        feature_columns,
        records,
    })
}

fn parse_fields(fields: &[&str], schema: &DatasetSchema, line: usize) -> Result<RawRecord> {
    let mut values = Vec::with_capacity(fields.len());
    let mut label = None;
    for (col, &field) in fields.iter().enumerate() {
        if Some(col) == schema.label_column {
            label = Some(field.to_string());
        } else if schema.categorical_columns.contains(&col) {
            values.push(RawValue::Token(field.to_string()));
        } else {
            let v: f64 = field.parse().map_err(|_| FcmError::Parse {
                line,
                column: col + 1,
                message: format!("{field:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(FcmError::Parse {
                    line,
                    column: col + 1,
                    message: format!("{field:?} is not finite"),
                });
            }
            values.push(RawValue::Number(v));
        }
    }
    Ok(RawRecord { values, label })
}

/// Token → code mapping for one categorical column, codes assigned in
/// first-appearance order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryDictionary {
    pub column: usize,
    pub tokens: Vec<String>,
}

impl CategoryDictionary {
    fn new(column: usize) -> Self {
        CategoryDictionary {
            column,
            tokens: Vec::new(),
        }
    }

    /// Existing code, or a new one appended for an unseen token.
    pub fn code(&mut self, token: &str) -> usize {
        match self.tokens.iter().position(|t| t == token) {
            Some(c) => c,
            None => {
                self.tokens.push(token.to_string());
                self.tokens.len() - 1
            }
        }
    }
}

/// Encodes categorical fields as ordinal codes, building fresh dictionaries.
pub fn encode_categorical(table: &RawTable) -> Result<(Points<f64>, Vec<CategoryDictionary>)> {
    let mut dicts = Vec::new();
    let points = encode_with(table, &mut dicts)?;
    Ok((points, dicts))
}

/// Encodes with existing dictionaries, extending them for unseen tokens.
pub fn encode_with(table: &RawTable, dicts: &mut Vec<CategoryDictionary>) -> Result<Points<f64>> {
    let dim = table.feature_columns.len();
    let mut lookup: HashMap<usize, usize> = dicts
        .iter()
        .enumerate()
        .map(|(i, d)| (d.column, i))
        .collect();
    // Hash per column keeps encoding linear in the number of records.
    let mut fast: Vec<HashMap<String, usize>> = dicts
        .iter()
        .map(|d| {
            d.tokens
                .iter()
                .cloned()
                .enumerate()
                .map(|(i, t)| (t, i))
                .collect()
        })
        .collect();

    let mut data = Vec::with_capacity(dim * table.records.len());
    for record in &table.records {
        for (value, &column) in record.values.iter().zip(&table.feature_columns) {
            match value {
                RawValue::Number(v) => data.push(*v),
                RawValue::Token(token) => {
                    let slot = *lookup.entry(column).or_insert_with(|| {
                        dicts.push(CategoryDictionary::new(column));
                        fast.push(HashMap::new());
                        dicts.len() - 1
                    });
                    let code = match fast[slot].get(token) {
                        Some(&c) => c,
                        None => {
                            let c = dicts[slot].code(token);
                            fast[slot].insert(token.clone(), c);
                            c
                        }
                    };
                    data.push(code as f64);
                }
            }
        }
    }
    Points::new(data, dim)
}

/// Per-feature `(min, max)` recorded so the same transform can be applied to
/// held-out data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub ranges: Vec<(f64, f64)>,
}

impl MinMaxScaler {
    pub fn fit(points: &Points<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(FcmError::invalid("cannot normalize an empty dataset"));
        }
        points.view().check_finite()?;
        Ok(MinMaxScaler {
            ranges: points.view().bounds(),
        })
    }

    /// Maps each feature to `(x − min)/(max − min)`; constant features map to 0.
    pub fn apply(&self, points: &mut Points<f64>) -> Result<()> {
        if points.dim() != self.ranges.len() {
            return Err(FcmError::DimensionMismatch {
                left: self.ranges.len(),
                right: points.dim(),
            });
        }
        let dim = points.dim();
        for (j, v) in points.as_mut_slice().iter_mut().enumerate() {
            let (lo, hi) = self.ranges[j % dim];
            *v = if hi > lo { (*v - lo) / (hi - lo) } else { 0.0 };
        }
        Ok(())
    }
}

/// Min-max normalizes a copy of `points` and returns the fitted ranges.
pub fn normalize_minmax(points: &Points<f64>) -> Result<(Points<f64>, MinMaxScaler)> {
    let scaler = MinMaxScaler::fit(points)?;
    let mut out = points.clone();
    scaler.apply(&mut out)?;
    Ok((out, scaler))
}

/// Everything needed to repeat a run's preprocessing on another file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Preprocessing {
    pub categorical: Vec<CategoryDictionary>,
    pub minmax: Option<MinMaxScaler>,
}

/// A fully ingested dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub points: Points<f64>,
    pub labels: Option<Vec<String>>,
    pub header: Option<Vec<String>>,
    pub preprocessing: Preprocessing,
}

/// Reads, encodes and (optionally) normalizes a delimited source.
pub fn load_dataset<R: BufRead>(
    source: R,
    schema: &DatasetSchema,
    normalize: bool,
) -> Result<Dataset> {
    let table = read_records(source, schema)?;
    let (mut points, categorical) = encode_categorical(&table)?;
    let minmax = if normalize {
        let scaler = MinMaxScaler::fit(&points)?;
        scaler.apply(&mut points)?;
        Some(scaler)
    } else {
        None
    };
    Ok(Dataset {
        points,
        labels: collect_labels(&table),
        header: table.header,
        preprocessing: Preprocessing {
            categorical,
            minmax,
        },
    })
}

/// Ingests a source with a previously recorded preprocessing.
pub fn load_with_preprocessing<R: BufRead>(
    source: R,
    schema: &DatasetSchema,
    prep: &Preprocessing,
) -> Result<Dataset> {
    let table = read_records(source, schema)?;
    let mut categorical = prep.categorical.clone();
    let mut points = encode_with(&table, &mut categorical)?;
    if let Some(scaler) = &prep.minmax {
        scaler.apply(&mut points)?;
    }
    Ok(Dataset {
        points,
        labels: collect_labels(&table),
        header: table.header,
        preprocessing: Preprocessing {
            categorical,
            minmax: prep.minmax.clone(),
        },
    })
}

fn collect_labels(table: &RawTable) -> Option<Vec<String>> {
    table
        .records
        .iter()
        .map(|r| r.label.clone())
        .collect::<Option<Vec<_>>>()
}

/// Writes points as delimited text with full round-trip precision.
pub fn write_records<W: Write>(mut out: W, points: &Points<f64>, delimiter: char) -> Result<()> {
    let mut line = String::new();
    for row in points.rows() {
        line.clear();
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                line.push(delimiter);
            }
            line.push_str(&v.to_string());
        }
        line.push('\n');
        out.write_all(line.as_bytes())
            .map_err(|e| FcmError::io("output", e))?;
    }
    Ok(())
}

/// Contiguous, disjoint record ranges covering `[0, n)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionPlan {
    pub boundaries: Vec<Range<usize>>,
}

impl PartitionPlan {
    pub fn partition_count(&self) -> usize {
        self.boundaries.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.boundaries.iter().map(|r| r.len()).collect()
    }
}

/// Balanced plan: the first `n mod P` partitions receive one extra record.
/// `P > n` is clamped to `n` with a warning.
pub fn plan_partitions(record_count: usize, partition_count: usize) -> Result<PartitionPlan> {
    if record_count == 0 {
        return Err(FcmError::invalid("cannot partition an empty dataset"));
    }
    if partition_count == 0 {
        return Err(FcmError::param("partition count must be at least 1"));
    }
    let p = if partition_count > record_count {
        log::warn!(
            "partition count {partition_count} exceeds record count {record_count}; using {record_count}"
        );
        record_count
    } else {
        partition_count
    };
    let base = record_count / p;
    let extra = record_count % p;
    let mut start = 0;
    let boundaries = (0..p)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect();
    Ok(PartitionPlan { boundaries })
}
