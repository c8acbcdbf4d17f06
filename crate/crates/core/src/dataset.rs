//! Tabular data with first-class missing values.
//!
//! Datasets are immutable after construction; every transformation returns
//! a new dataset. Missing numeric cells carry NaN, missing nominal cells
//! carry `None`; nothing is ever imputed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("duplicate header name '{0}'")]
    DuplicateHeader(String),
    #[error("ragged row {row}: expected {expected} cells, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("non-numeric cell row {row} col {column}")]
    NonNumericCell { row: usize, column: String },
    #[error("label must be 0/1 or true/false: row {row} has '{value}'")]
    BadLabel { row: usize, value: String },
    #[error("schema references unknown column '{0}'")]
    UnknownColumn(String),
    #[error("nominal column '{column}' has {cardinality} distinct values (max {max})")]
    CardinalityExceeded {
        column: String,
        cardinality: usize,
        max: usize,
    },
    #[error("nominal column '{0}' has no observed values")]
    EmptyNominal(String),
    #[error("column '{column}' contains missing values")]
    MissingValues { column: String },
    #[error("dataset is empty")]
    Empty,
    #[error("column '{0}' is nominal; encode it first")]
    NominalColumn(String),
    #[error("feature names do not align: {detail}")]
    NameMismatch { detail: String },
    #[error("csv error: {0}")]
    Csv(String),
}

/// Declares how to read a CSV file: which column holds the binary label
/// and which columns are nominal (to be one-hot encoded).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Schema {
    pub label_column: Option<String>,
    pub nominal_columns: Vec<String>,
    pub max_cardinality: usize,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            label_column: None,
            nominal_columns: Vec::new(),
            max_cardinality: 64,
        }
    }
}

#[derive(Debug, Clone)]
pub enum ColumnData {
    /// NaN marks missing cells.
    Numeric(Vec<f64>),
    /// `None` marks missing cells.
    Nominal(Vec<Option<String>>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Nominal(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

impl Column {
    pub fn numeric(name: impl Into<String>, values: Vec<f64>) -> Self {
        Column {
            name: name.into(),
            data: ColumnData::Numeric(values),
        }
    }

    pub fn nominal(name: impl Into<String>, values: Vec<Option<String>>) -> Self {
        Column {
            name: name.into(),
            data: ColumnData::Nominal(values),
        }
    }
}

/// A rectangular table of features with optional binary labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    columns: Vec<Column>,
    labels: Option<Vec<bool>>,
    n_rows: usize,
}

impl Dataset {
    pub fn from_columns(
        columns: Vec<Column>,
        labels: Option<Vec<bool>>,
    ) -> Result<Self, DatasetError> {
        if columns.is_empty() {
            return Err(DatasetError::Empty);
        }
        let n_rows = columns[0].data.len();
        for c in &columns {
            if c.data.len() != n_rows {
                return Err(DatasetError::RaggedRow {
                    row: 0,
                    expected: n_rows,
                    found: c.data.len(),
                });
            }
        }
        let mut names: Vec<&str> = columns.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        for w in names.windows(2) {
            if w[0] == w[1] {
                return Err(DatasetError::DuplicateHeader(w[0].to_string()));
            }
        }
        if let Some(l) = &labels {
            if l.len() != n_rows {
                return Err(DatasetError::RaggedRow {
                    row: 0,
                    expected: n_rows,
                    found: l.len(),
                });
            }
        }
        Ok(Dataset {
            columns,
            labels,
            n_rows,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, i: usize) -> &Column {
        &self.columns[i]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn labels(&self) -> Option<&[bool]> {
        self.labels.as_deref()
    }

    /// Numeric values of column `i`; errors if the column is still nominal.
    pub fn numeric_column(&self, i: usize) -> Result<&[f64], DatasetError> {
        match &self.columns[i].data {
            ColumnData::Numeric(v) => Ok(v),
            ColumnData::Nominal(_) => {
                Err(DatasetError::NominalColumn(self.columns[i].name.clone()))
            }
        }
    }

    pub fn is_fully_numeric(&self) -> bool {
        self.columns
            .iter()
            .all(|c| matches!(c.data, ColumnData::Numeric(_)))
    }

    /// Materializes the table as row-major numeric rows.
    pub fn numeric_rows(&self) -> Result<Vec<Vec<f64>>, DatasetError> {
        let cols: Vec<&[f64]> = (0..self.n_features())
            .map(|i| self.numeric_column(i))
            .collect::<Result<_, _>>()?;
        Ok((0..self.n_rows)
            .map(|j| cols.iter().map(|c| c[j]).collect())
            .collect())
    }

    /// Reorders columns to match `names` exactly. The name sets must be
    /// equal; this is the alignment step between a dataset and a model.
    pub fn aligned_to(&self, names: &[String]) -> Result<Dataset, DatasetError> {
        let mut missing = Vec::new();
        let mut order = Vec::with_capacity(names.len());
        for name in names {
            match self.column_index(name) {
                Some(i) => order.push(i),
                None => missing.push(name.as_str()),
            }
        }
        let extra: Vec<&str> = self
            .columns
            .iter()
            .map(|c| c.name.as_str())
            .filter(|n| !names.iter().any(|m| m == n))
            .collect();
        if !missing.is_empty() || !extra.is_empty() {
            return Err(DatasetError::NameMismatch {
                detail: format!(
                    "model expects [{}] not present in data; data has [{}] unknown to the model",
                    missing.join(", "),
                    extra.join(", ")
                ),
            });
        }
        let columns = order.into_iter().map(|i| self.columns[i].clone()).collect();
        Dataset::from_columns(columns, self.labels.clone())
    }

    /// Renders the dataset back to CSV. Missing cells become empty strings;
    /// labels, when present, are appended as a trailing 0/1 column.
    pub fn to_csv(&self, label_column: Option<&str>) -> String {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = self.feature_names();
        if let (Some(name), Some(_)) = (label_column, &self.labels) {
            header.push(name.to_string());
        }
        wtr.write_record(&header).expect("csv write");
        for j in 0..self.n_rows {
            let mut rec: Vec<String> = Vec::with_capacity(header.len());
            for c in &self.columns {
                rec.push(match &c.data {
                    ColumnData::Numeric(v) => {
                        if v[j].is_nan() {
                            String::new()
                        } else {
                            format!("{}", v[j])
                        }
                    }
                    ColumnData::Nominal(v) => v[j].clone().unwrap_or_default(),
                });
            }
            if let (Some(_), Some(labels)) = (label_column, &self.labels) {
                rec.push(if labels[j] { "1".into() } else { "0".into() });
            }
            wtr.write_record(&rec).expect("csv write");
        }
        String::from_utf8(wtr.into_inner().expect("csv flush")).expect("csv utf8")
    }
}

/// Loads a CSV document under a schema. The first row is the header,
/// empty cells are missing, the label column (if declared) must be binary.
pub fn load_csv(text: &str, schema: &Schema) -> Result<Dataset, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| DatasetError::Csv(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let mut sorted = headers.clone();
    sorted.sort();
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            return Err(DatasetError::DuplicateHeader(w[0].clone()));
        }
    }

    let label_idx = match &schema.label_column {
        Some(name) => Some(
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| DatasetError::UnknownColumn(name.clone()))?,
        ),
        None => None,
    };
    for name in &schema.nominal_columns {
        if !headers.iter().any(|h| h == name) {
            return Err(DatasetError::UnknownColumn(name.clone()));
        }
    }

    enum Builder {
        Numeric(Vec<f64>),
        Nominal(Vec<Option<String>>),
        Label(Vec<bool>),
    }
    let mut builders: Vec<Builder> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| {
            if Some(i) == label_idx {
                Builder::Label(Vec::new())
            } else if schema.nominal_columns.iter().any(|n| n == h) {
                Builder::Nominal(Vec::new())
            } else {
                Builder::Numeric(Vec::new())
            }
        })
        .collect();

    for (row_idx, record) in rdr.records().enumerate() {
        let row = row_idx + 1; // 1-based data rows for messages
        let record = record.map_err(|e| DatasetError::Csv(e.to_string()))?;
        if record.len() != headers.len() {
            return Err(DatasetError::RaggedRow {
                row,
                expected: headers.len(),
                found: record.len(),
            });
        }
        for (i, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            match &mut builders[i] {
                Builder::Numeric(values) => {
                    if cell.is_empty() {
                        values.push(f64::NAN);
                    } else {
                        values.push(cell.parse::<f64>().map_err(|_| {
                            DatasetError::NonNumericCell {
                                row,
                                column: headers[i].clone(),
                            }
                        })?);
                    }
                }
                Builder::Nominal(values) => {
                    values.push(if cell.is_empty() {
                        None
                    } else {
                        Some(cell.to_string())
                    });
                }
                Builder::Label(values) => {
                    let label = match cell {
                        "0" | "false" => false,
                        "1" | "true" => true,
                        other => {
                            return Err(DatasetError::BadLabel {
                                row,
                                value: other.to_string(),
                            })
                        }
                    };
                    values.push(label);
                }
            }
        }
    }

    let mut columns = Vec::new();
    let mut labels = None;
    for (i, b) in builders.into_iter().enumerate() {
        match b {
            Builder::Numeric(v) => columns.push(Column::numeric(headers[i].clone(), v)),
            Builder::Nominal(v) => columns.push(Column::nominal(headers[i].clone(), v)),
            Builder::Label(v) => labels = Some(v),
        }
    }
    Dataset::from_columns(columns, labels)
}

/// Expands each nominal column into one indicator column per observed
/// value, named `column=value`. A missing nominal cell yields missing in
/// every indicator of that column. Numeric columns pass through unchanged.
pub fn one_hot_encode(dataset: &Dataset, max_cardinality: usize) -> Result<Dataset, DatasetError> {
    let mut columns = Vec::new();
    for col in dataset.columns() {
        match &col.data {
            ColumnData::Numeric(_) => columns.push(col.clone()),
            ColumnData::Nominal(values) => {
                let mut observed: Vec<&String> = values.iter().flatten().collect();
                observed.sort();
                observed.dedup();
                if observed.is_empty() {
                    return Err(DatasetError::EmptyNominal(col.name.clone()));
                }
                if observed.len() > max_cardinality {
                    return Err(DatasetError::CardinalityExceeded {
                        column: col.name.clone(),
                        cardinality: observed.len(),
                        max: max_cardinality,
                    });
                }
                for value in observed {
                    let indicator: Vec<f64> = values
                        .iter()
                        .map(|v| match v {
                            None => f64::NAN,
                            Some(s) if s == value => 1.0,
                            Some(_) => 0.0,
                        })
                        .collect();
                    columns.push(Column::numeric(
                        format!("{}={}", col.name, value),
                        indicator,
                    ));
                }
            }
        }
    }
    Dataset::from_columns(columns, dataset.labels.clone())
}

/// Per-feature mean and population standard deviation (missing excluded).
#[derive(Debug, Clone)]
pub struct StandardizationStats {
    pub feature_names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl StandardizationStats {
    /// Computes stats over every (numeric) column, skipping missing cells.
    /// An all-missing or constant column gets std 0 and is flagged constant.
    pub fn compute(dataset: &Dataset) -> Result<Self, DatasetError> {
        if dataset.n_rows() == 0 {
            return Err(DatasetError::Empty);
        }
        let mut mean = Vec::with_capacity(dataset.n_features());
        let mut std = Vec::with_capacity(dataset.n_features());
        for i in 0..dataset.n_features() {
            let values = dataset.numeric_column(i)?;
            let present: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
            if present.is_empty() {
                mean.push(0.0);
                std.push(0.0);
                continue;
            }
            let m = math::mean(present.iter().copied());
            let var = math::mean(present.iter().map(|v| (v - m) * (v - m)));
            mean.push(m);
            std.push(var.sqrt());
        }
        Ok(StandardizationStats {
            feature_names: dataset.feature_names(),
            mean,
            std,
        })
    }

    pub fn is_constant(&self, i: usize) -> bool {
        self.std[i] == 0.0
    }
}

/// Centers and scales every column to mean 0, population variance 1.
/// Constant columns become all zeros (flagged in the stats). Missing
/// values are an error here: standardized features feed GLM analysis,
/// which requires complete rows.
pub fn standardize(dataset: &Dataset) -> Result<(Dataset, StandardizationStats), DatasetError> {
    if dataset.n_rows() == 0 {
        return Err(DatasetError::Empty);
    }
    for i in 0..dataset.n_features() {
        let values = dataset.numeric_column(i)?;
        if values.iter().any(|v| v.is_nan()) {
            return Err(DatasetError::MissingValues {
                column: dataset.column(i).name.clone(),
            });
        }
    }
    let stats = StandardizationStats::compute(dataset)?;
    let columns = dataset
        .columns()
        .iter()
        .enumerate()
        .map(|(i, col)| {
            let values = dataset.numeric_column(i).expect("checked numeric");
            let scaled = if stats.is_constant(i) {
                vec![0.0; values.len()]
            } else {
                values
                    .iter()
                    .map(|v| (v - stats.mean[i]) / stats.std[i])
                    .collect()
            };
            Column::numeric(col.name.clone(), scaled)
        })
        .collect();
    let out = Dataset::from_columns(columns, dataset.labels.clone())?;
    Ok((out, stats))
}
