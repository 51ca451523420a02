//! Tabular dataset loading, preprocessing and characterization.
//!
//! Preprocessing rules, applied in this order:
//!
//! 1. continuous columns with more than 10% missing values are dropped;
//! 2. rows with a missing value in any retained continuous column are dropped;
//! 3. missing categorical values become their own category;
//! 4. categorical columns are one-hot encoded;
//! 5. continuous columns are standardized (population standard deviation).

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Category name given to missing categorical values.
pub const MISSING_CATEGORY: &str = "<missing>";

/// Continuous columns whose missing fraction strictly exceeds this are dropped.
pub const MAX_MISSING_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Categorical,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

fn default_missing() -> Vec<String> {
    vec!["?".to_string(), String::new()]
}

/// Declared layout of a dataset file.
///
/// `columns` lists every column of the file in header order, the target
/// included. The target's declared kind is ignored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    #[serde(rename = "target")]
    pub target_column: String,
    pub columns: Vec<ColumnSpec>,
    #[serde(rename = "missing", default = "default_missing")]
    pub missing_markers: Vec<String>,
}

impl Schema {
    pub fn new(target: &str, columns: Vec<ColumnSpec>) -> Result<Self> {
        let s = Schema {
            target_column: target.to_string(),
            columns,
            missing_markers: default_missing(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let schema: Schema = serde_json::from_str(s)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name {:?}", c.name)));
            }
        }
        let n_target = self
            .columns
            .iter()
            .filter(|c| c.name == self.target_column)
            .count();
        if n_target != 1 {
            return Err(Error::Schema(format!(
                "target column {:?} must appear exactly once in columns",
                self.target_column
            )));
        }
        if self.columns.len() < 2 {
            return Err(Error::Schema("schema has no feature columns".into()));
        }
        Ok(())
    }

    pub fn target_index(&self) -> usize {
        self.columns
            .iter()
            .position(|c| c.name == self.target_column)
            .expect("validated schema has a target column")
    }

    /// Indices of the feature (non-target) columns in header order.
    pub fn feature_indices(&self) -> Vec<usize> {
        let t = self.target_index();
        (0..self.columns.len()).filter(|&i| i != t).collect()
    }

    fn is_missing(&self, cell: &str) -> bool {
        self.missing_markers.iter().any(|m| m == cell)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Missing,
    Number(f64),
    Text(String),
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    fn as_category(&self) -> String {
        match self {
            Cell::Missing => MISSING_CATEGORY.to_string(),
            Cell::Number(v) => format!("{v}"),
            Cell::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDataset {
    pub id: String,
    pub schema: Schema,
    pub rows: Vec<Vec<Cell>>,
}

impl RawDataset {
    pub fn new(id: &str, schema: Schema, rows: Vec<Vec<Cell>>) -> Result<Self> {
        schema.validate()?;
        for (i, r) in rows.iter().enumerate() {
            if r.len() != schema.columns.len() {
                return Err(Error::Parse {
                    row: i + 1,
                    message: format!("expected {} cells, found {}", schema.columns.len(), r.len()),
                });
            }
        }
        Ok(RawDataset {
            id: id.to_string(),
            schema,
            rows,
        })
    }
}

/// Reads a comma-separated file whose header must equal the schema's column names.
pub fn load_dataset(path: impl AsRef<Path>, schema: &Schema) -> Result<RawDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string();
    parse_dataset(&text, schema, &id)
}

/// Parses CSV text against a schema. See [`load_dataset`].
pub fn parse_dataset(text: &str, schema: &Schema, id: &str) -> Result<RawDataset> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let found: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let expected: Vec<String> = schema.columns.iter().map(|c| c.name.clone()).collect();
    if found != expected {
        return Err(Error::HeaderMismatch { expected, found });
    }

    let target = schema.target_index();
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != expected.len() {
            return Err(Error::Parse {
                row: line,
                message: format!("expected {} cells, found {}", expected.len(), rec.len()),
            });
        }
        let mut row = Vec::with_capacity(rec.len());
        for (j, raw) in rec.iter().enumerate() {
            let cell = if schema.is_missing(raw) {
                Cell::Missing
            } else if j != target && schema.columns[j].kind == ColumnKind::Continuous {
                let v: f64 = raw.parse().map_err(|_| Error::Parse {
                    row: line,
                    message: format!(
                        "non-numeric value {raw:?} in continuous column {:?}",
                        schema.columns[j].name
                    ),
                })?;
                Cell::Number(v)
            } else {
                Cell::Text(raw.to_string())
            };
            row.push(cell);
        }
        rows.push(row);
    }
    Ok(RawDataset {
        id: id.to_string(),
        schema: schema.clone(),
        rows,
    })
}

/// Which columns and rows survive the removal rules.
#[derive(Debug, Clone)]
struct Retention {
    /// Schema indices of retained feature columns, header order.
    columns: Vec<usize>,
    /// Indices of retained rows, input order.
    rows: Vec<usize>,
}

fn retention(raw: &RawDataset) -> Retention {
    let schema = &raw.schema;
    let target = schema.target_index();
    // Rows without a label cannot be used at all.
    let labelled: Vec<usize> = (0..raw.rows.len())
        .filter(|&i| !raw.rows[i][target].is_missing())
        .collect();
    let n = labelled.len();

    let columns: Vec<usize> = schema
        .feature_indices()
        .into_iter()
        .filter(|&j| {
            if schema.columns[j].kind == ColumnKind::Categorical {
                return true;
            }
            let missing = labelled.iter().filter(|&&i| raw.rows[i][j].is_missing()).count();
            n == 0 || (missing as f64 / n as f64) <= MAX_MISSING_FRACTION
        })
        .collect();

    let rows = labelled
        .into_iter()
        .filter(|&i| {
            columns.iter().all(|&j| {
                schema.columns[j].kind == ColumnKind::Categorical || !raw.rows[i][j].is_missing()
            })
        })
        .collect();
    Retention { columns, rows }
}

/// Encoding learned from the retained rows of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub features: Vec<FeatureEncoding>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureEncoding {
    OneHot {
        source: usize,
        name: String,
        categories: Vec<String>,
    },
    Standardized {
        source: usize,
        name: String,
        mean: f64,
        std: f64,
    },
}

impl FeatureEncoding {
    fn width(&self) -> usize {
        match self {
            FeatureEncoding::OneHot { categories, .. } => categories.len(),
            FeatureEncoding::Standardized { .. } => 1,
        }
    }
}

impl Encoder {
    pub fn width(&self) -> usize {
        self.features.iter().map(FeatureEncoding::width).sum()
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.width());
        for f in &self.features {
            match f {
                FeatureEncoding::OneHot {
                    name, categories, ..
                } => out.extend(categories.iter().map(|c| format!("{name}={c}"))),
                FeatureEncoding::Standardized { name, .. } => out.push(name.clone()),
            }
        }
        out
    }

    /// Encodes one raw row. Categories not seen during fitting encode as all zeros.
    pub fn encode_row(&self, row: &[Cell], out: &mut [f64]) -> Result<()> {
        let mut k = 0;
        for f in &self.features {
            match f {
                FeatureEncoding::OneHot {
                    source, categories, ..
                } => {
                    let value = row[*source].as_category();
                    for c in categories {
                        out[k] = if *c == value { 1.0 } else { 0.0 };
                        k += 1;
                    }
                }
                FeatureEncoding::Standardized {
                    source,
                    name,
                    mean,
                    std,
                } => {
                    let v = match &row[*source] {
                        Cell::Number(v) => *v,
                        other => {
                            return Err(Error::invalid(format!(
                                "column {name:?} needs a number, found {other:?}"
                            )))
                        }
                    };
                    out[k] = if *std > 0.0 { (v - mean) / std } else { 0.0 };
                    k += 1;
                }
            }
        }
        Ok(())
    }

    pub fn encode_rows(&self, rows: &[Vec<Cell>]) -> Result<Matrix> {
        let mut m = Matrix::zeros(rows.len(), self.width());
        for (i, r) in rows.iter().enumerate() {
            self.encode_row(r, m.row_mut(i))?;
        }
        Ok(m)
    }
}

/// Numeric design matrix with integer class labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    pub encoded_column_names: Vec<String>,
    /// Feature count before categorical encoding.
    pub source_features: usize,
    pub encoder: Encoder,
}

impl DesignMatrix {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }
}

/// Applies the removal, encoding and standardization rules.
pub fn preprocess(raw: &RawDataset) -> Result<DesignMatrix> {
    let schema = &raw.schema;
    let target = schema.target_index();
    let kept = retention(raw);

    let class_names: Vec<String> = kept
        .rows
        .iter()
        .map(|&i| raw.rows[i][target].as_category())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if class_names.len() < 2 {
        return Err(Error::TooFewClasses(class_names.len()));
    }
    if kept.columns.is_empty() {
        return Err(Error::NoFeatures);
    }

    let mut features = Vec::with_capacity(kept.columns.len());
    for &j in &kept.columns {
        let name = schema.columns[j].name.clone();
        match schema.columns[j].kind {
            ColumnKind::Categorical => {
                let categories: Vec<String> = kept
                    .rows
                    .iter()
                    .map(|&i| raw.rows[i][j].as_category())
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect();
                features.push(FeatureEncoding::OneHot {
                    source: j,
                    name,
                    categories,
                });
            }
            ColumnKind::Continuous => {
                let values: Vec<f64> = kept
                    .rows
                    .iter()
                    .map(|&i| match raw.rows[i][j] {
                        Cell::Number(v) => v,
                        _ => unreachable!("retained rows have numbers in continuous columns"),
                    })
                    .collect();
                let (mean, std) = mean_std(&values);
                features.push(FeatureEncoding::Standardized {
                    source: j,
                    name,
                    mean,
                    std,
                });
            }
        }
    }

    let encoder = Encoder { features };
    let rows: Vec<Vec<Cell>> = kept.rows.iter().map(|&i| raw.rows[i].clone()).collect();
    let matrix = encoder.encode_rows(&rows)?;
    if let Some((row, col)) = matrix.find_non_finite() {
        return Err(Error::NonFinite { row, col });
    }
    let labels = kept
        .rows
        .iter()
        .map(|&i| {
            let name = raw.rows[i][target].as_category();
            class_names.binary_search(&name).expect("class collected above")
        })
        .collect();

    Ok(DesignMatrix {
        features: matrix,
        labels,
        class_names,
        encoded_column_names: encoder.column_names(),
        source_features: kept.columns.len(),
        encoder,
    })
}

/// Mean and population standard deviation. Zero spread reports std = 0.
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    // Rounding noise on a constant column must not be amplified into unit variance.
    if std <= 1e-12 * mean.abs().max(1.0) {
        (mean, 0.0)
    } else {
        (mean, std)
    }
}

/// The eight measurable dataset descriptors.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Characteristics {
    pub N_P: usize,
    pub N_F: usize,
    pub N_CAT: usize,
    pub N_CONT: usize,
    pub R_CAT: f64,
    pub N_C: usize,
    pub C_MIN: f64,
    pub I_C: f64,
}

/// `(L_E - L) / L_E` with `L_E = 1 / n_classes` and `L = min_proportion`.
pub fn class_imbalance(n_classes: usize, min_proportion: f64) -> Result<f64> {
    if n_classes < 2 {
        return Err(Error::TooFewClasses(n_classes));
    }
    let expected = 1.0 / n_classes as f64;
    if !(min_proportion > 0.0 && min_proportion <= expected * (1.0 + 1e-12)) {
        return Err(Error::invalid(format!(
            "minimum class proportion {min_proportion} outside (0, 1/{n_classes}]"
        )));
    }
    Ok(((expected - min_proportion) / expected).max(0.0))
}

/// Computes the descriptors on the rows and columns that survive preprocessing.
pub fn characterize(raw: &RawDataset) -> Result<Characteristics> {
    let schema = &raw.schema;
    let target = schema.target_index();
    let kept = retention(raw);

    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for &i in &kept.rows {
        *counts.entry(raw.rows[i][target].as_category()).or_default() += 1;
    }
    let n_classes = counts.len();
    if n_classes < 2 {
        return Err(Error::TooFewClasses(n_classes));
    }
    let n_points = kept.rows.len();
    let min_count = counts.values().copied().min().unwrap_or(0);
    let c_min = min_count as f64 / n_points as f64;

    let n_cat = kept
        .columns
        .iter()
        .filter(|&&j| schema.columns[j].kind == ColumnKind::Categorical)
        .count();
    let n_f = kept.columns.len();
    if n_f == 0 {
        return Err(Error::NoFeatures);
    }

    Ok(Characteristics {
        N_P: n_points,
        N_F: n_f,
        N_CAT: n_cat,
        N_CONT: n_f - n_cat,
        R_CAT: n_cat as f64 / n_f as f64,
        N_C: n_classes,
        C_MIN: c_min,
        I_C: class_imbalance(n_classes, c_min)?,
    })
}
