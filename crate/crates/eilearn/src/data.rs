//! Tabular datasets and the split hierarchy the incremental runs operate on:
//! source data is divided into a train/test pool and a fixed validation set,
//! the pool into contiguous per-phase parts, and each part into train/test.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("empty dataset (no data rows)")]
    EmptyDataset,
    #[error("label column {label:?} not found in header")]
    MissingLabelColumn { label: String },
    #[error("duplicate column {name:?} in header")]
    DuplicateColumn { name: String },
    #[error("kind override references unknown attribute {name:?}")]
    UnknownOverride { name: String },
    #[error("data row {row}: expected {expected} fields, got {got}")]
    RowArity {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("data row {row}, column {column:?}: cannot parse {value:?} as a finite number")]
    NumericParse {
        row: usize,
        column: String,
        value: String,
    },
    #[error("data row {row}, column {column:?}: missing value")]
    MissingValue { row: usize, column: String },
    #[error("label column holds the single class {class:?}; at least 2 classes required")]
    SingleClass { class: String },
    #[error("schema has no attributes")]
    NoAttributes,
    #[error("categorical attribute {name:?} has no categories")]
    NoCategories { name: String },
    #[error("empty validation set: holdout size {holdout} >= dataset size {total}")]
    EmptyValidation { holdout: usize, total: usize },
    #[error("phases must be >= 1")]
    ZeroPhases,
    #[error("cannot partition {total} instances into {phases} phases")]
    PhasesExceedInstances { phases: usize, total: usize },
    #[error("train fraction {fraction} outside the open interval (0, 1)")]
    InvalidFraction { fraction: f64 },
    #[error("train fraction {fraction} leaves an empty {part} set for {total} instances")]
    EmptySplit {
        fraction: f64,
        part: &'static str,
        total: usize,
    },
    #[error("instance {index}: {detail}")]
    SchemaMismatch { index: usize, detail: String },
}

/// Kind of a dataset attribute. Categorical attributes carry their category
/// names in first-seen order; instance values index into that list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttrKind {
    Numeric,
    Categorical(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub kind: AttrKind,
}

/// Class column: its name plus the class names in first-seen order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelDef {
    pub name: String,
    pub classes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub attributes: Vec<Attribute>,
    pub label: LabelDef,
}

impl Schema {
    fn validate(&self) -> Result<(), DataError> {
        if self.attributes.is_empty() {
            return Err(DataError::NoAttributes);
        }
        for attr in &self.attributes {
            if let AttrKind::Categorical(cats) = &attr.kind {
                if cats.is_empty() {
                    return Err(DataError::NoCategories {
                        name: attr.name.clone(),
                    });
                }
            }
        }
        if self.label.classes.len() < 2 {
            return Err(DataError::SingleClass {
                class: self.label.classes.first().cloned().unwrap_or_default(),
            });
        }
        Ok(())
    }

    pub fn class_count(&self) -> usize {
        self.label.classes.len()
    }
}

/// One attribute value: a finite number or an index into the attribute's
/// category list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Num(f64),
    Cat(usize),
}

/// One labeled row. `values` are ordered as in the schema; `label` indexes
/// into the schema's class list.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub values: Vec<Value>,
    pub label: usize,
}

/// An ordered collection of instances over a shared schema. Order is the
/// stream order and is preserved by every split operation.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Arc<Schema>,
    instances: Vec<Instance>,
}

/// Forces a column kind during CSV loading instead of inferring it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KindOverride {
    Numeric,
    Categorical,
}

/// How a loaded dataset is carved up for an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    /// Instances assigned to the train/test pool; the remainder is the
    /// validation set.
    pub holdout_size: usize,
    pub phases: usize,
    pub train_fraction: f64,
    /// When set, a seeded permutation is applied before the holdout split.
    /// Absent by default: incremental learning presumes stream order.
    pub shuffle_seed: Option<u64>,
}

impl Dataset {
    /// Builds a dataset, checking every instance against the schema.
    pub fn new(schema: Schema, instances: Vec<Instance>) -> Result<Self, DataError> {
        schema.validate()?;
        let schema = Arc::new(schema);
        for (index, inst) in instances.iter().enumerate() {
            conformity(&schema, inst).map_err(|detail| DataError::SchemaMismatch { index, detail })?;
        }
        Ok(Self { schema, instances })
    }

    /// Internal constructor for splits: instances are already known to conform.
    fn from_parts(schema: Arc<Schema>, instances: Vec<Instance>) -> Self {
        Self { schema, instances }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn schema_arc(&self) -> Arc<Schema> {
        Arc::clone(&self.schema)
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Reads a CSV file: UTF-8, comma-separated, first row is the header,
    /// one instance per row.
    pub fn load_csv(
        path: impl AsRef<Path>,
        label_column: &str,
        kind_overrides: &BTreeMap<String, KindOverride>,
    ) -> Result<Self, DataError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_csv_reader(file, label_column, kind_overrides)
    }

    /// Parses CSV text from any reader. A column is inferred Numeric iff
    /// every cell parses as a finite number, else Categorical with categories
    /// in first-seen order; `kind_overrides` wins where present. Missing
    /// (empty) cells are rejected.
    pub fn from_csv_reader(
        reader: impl Read,
        label_column: &str,
        kind_overrides: &BTreeMap<String, KindOverride>,
    ) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);

        let mut records = rdr.records();
        let header: Vec<String> = match records.next() {
            Some(rec) => rec?.iter().map(str::to_owned).collect(),
            None => return Err(DataError::EmptyDataset),
        };
        for (i, name) in header.iter().enumerate() {
            if header[..i].contains(name) {
                return Err(DataError::DuplicateColumn { name: name.clone() });
            }
        }
        let label_idx = header
            .iter()
            .position(|h| h == label_column)
            .ok_or_else(|| DataError::MissingLabelColumn {
                label: label_column.to_owned(),
            })?;
        for name in kind_overrides.keys() {
            if !header.iter().any(|h| h == name && h != label_column) {
                return Err(DataError::UnknownOverride { name: name.clone() });
            }
        }

        let mut rows: Vec<Vec<String>> = Vec::new();
        for rec in records {
            let rec = rec?;
            rows.push(rec.iter().map(str::to_owned).collect());
        }
        if rows.is_empty() {
            return Err(DataError::EmptyDataset);
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != header.len() {
                return Err(DataError::RowArity {
                    row: i + 1,
                    expected: header.len(),
                    got: row.len(),
                });
            }
            for (j, cell) in row.iter().enumerate() {
                if cell.is_empty() {
                    return Err(DataError::MissingValue {
                        row: i + 1,
                        column: header[j].clone(),
                    });
                }
            }
        }

        // Column kinds: overrides first, inference otherwise.
        let attr_columns: Vec<usize> = (0..header.len()).filter(|&j| j != label_idx).collect();
        let mut attributes = Vec::with_capacity(attr_columns.len());
        for &j in &attr_columns {
            let name = header[j].clone();
            let numeric = match kind_overrides.get(&name) {
                Some(KindOverride::Numeric) => true,
                Some(KindOverride::Categorical) => false,
                None => rows.iter().all(|row| parse_finite(&row[j]).is_some()),
            };
            let kind = if numeric {
                AttrKind::Numeric
            } else {
                let mut cats: Vec<String> = Vec::new();
                for row in &rows {
                    if !cats.contains(&row[j]) {
                        cats.push(row[j].clone());
                    }
                }
                AttrKind::Categorical(cats)
            };
            attributes.push(Attribute { name, kind });
        }

        let mut classes: Vec<String> = Vec::new();
        for row in &rows {
            if !classes.contains(&row[label_idx]) {
                classes.push(row[label_idx].clone());
            }
        }
        let schema = Schema {
            attributes,
            label: LabelDef {
                name: header[label_idx].clone(),
                classes,
            },
        };
        schema.validate()?;

        let mut instances = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let mut values = Vec::with_capacity(attr_columns.len());
            for (a, &j) in attr_columns.iter().enumerate() {
                let v = match &schema.attributes[a].kind {
                    AttrKind::Numeric => {
                        Value::Num(parse_finite(&row[j]).ok_or_else(|| DataError::NumericParse {
                            row: i + 1,
                            column: header[j].clone(),
                            value: row[j].clone(),
                        })?)
                    }
                    AttrKind::Categorical(cats) => {
                        Value::Cat(cats.iter().position(|c| *c == row[j]).expect("category collected"))
                    }
                };
                values.push(v);
            }
            let label = schema
                .label
                .classes
                .iter()
                .position(|c| *c == row[label_idx])
                .expect("class collected");
            instances.push(Instance { values, label });
        }

        Ok(Self {
            schema: Arc::new(schema),
            instances,
        })
    }

    /// Splits into the train/test pool `T` (first `holdout_size` instances)
    /// and the validation set `V` (remainder). With `shuffle_seed` set, a
    /// seeded permutation is applied first.
    pub fn split_holdout(&self, plan: &SplitPlan) -> Result<(Dataset, Dataset), DataError> {
        if plan.holdout_size >= self.len() {
            return Err(DataError::EmptyValidation {
                holdout: plan.holdout_size,
                total: self.len(),
            });
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        if let Some(seed) = plan.shuffle_seed {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            order.shuffle(&mut rng);
        }
        let take = |idx: &[usize]| {
            Dataset::from_parts(
                Arc::clone(&self.schema),
                idx.iter().map(|&i| self.instances[i].clone()).collect(),
            )
        };
        Ok((take(&order[..plan.holdout_size]), take(&order[plan.holdout_size..])))
    }

    /// Cuts the dataset into `phases` contiguous parts in order. When the
    /// size does not divide evenly, the first `len % phases` parts receive
    /// one extra instance.
    pub fn partition_phases(&self, phases: usize) -> Result<Vec<Dataset>, DataError> {
        if phases == 0 {
            return Err(DataError::ZeroPhases);
        }
        if phases > self.len() {
            return Err(DataError::PhasesExceedInstances {
                phases,
                total: self.len(),
            });
        }
        let base = self.len() / phases;
        let extra = self.len() % phases;
        let mut parts = Vec::with_capacity(phases);
        let mut start = 0;
        for i in 0..phases {
            let size = base + usize::from(i < extra);
            parts.push(Dataset::from_parts(
                Arc::clone(&self.schema),
                self.instances[start..start + size].to_vec(),
            ));
            start += size;
        }
        Ok(parts)
    }

    /// Splits a phase part into its train set (leading
    /// `floor(train_fraction * len)` instances) and test set (remainder).
    pub fn split_train_test(&self, train_fraction: f64) -> Result<(Dataset, Dataset), DataError> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(DataError::InvalidFraction {
                fraction: train_fraction,
            });
        }
        let train = (train_fraction * self.len() as f64).floor() as usize;
        if train == 0 {
            return Err(DataError::EmptySplit {
                fraction: train_fraction,
                part: "train",
                total: self.len(),
            });
        }
        if train >= self.len() {
            return Err(DataError::EmptySplit {
                fraction: train_fraction,
                part: "test",
                total: self.len(),
            });
        }
        Ok((
            Dataset::from_parts(Arc::clone(&self.schema), self.instances[..train].to_vec()),
            Dataset::from_parts(Arc::clone(&self.schema), self.instances[train..].to_vec()),
        ))
    }

    /// New dataset holding clones of the instances at `indices`, in the
    /// given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset::from_parts(
            Arc::clone(&self.schema),
            indices.iter().map(|&i| self.instances[i].clone()).collect(),
        )
    }
}

fn parse_finite(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn conformity(schema: &Schema, inst: &Instance) -> Result<(), String> {
    if inst.values.len() != schema.attributes.len() {
        return Err(format!(
            "expected {} values, got {}",
            schema.attributes.len(),
            inst.values.len()
        ));
    }
    for (a, (value, attr)) in inst.values.iter().zip(&schema.attributes).enumerate() {
        match (value, &attr.kind) {
            (Value::Num(v), AttrKind::Numeric) => {
                if !v.is_finite() {
                    return Err(format!("attribute {a} is not finite"));
                }
            }
            (Value::Cat(c), AttrKind::Categorical(cats)) => {
                if *c >= cats.len() {
                    return Err(format!("attribute {a}: category index {c} out of range"));
                }
            }
            _ => return Err(format!("attribute {a}: value kind does not match schema")),
        }
    }
    if inst.label >= schema.label.classes.len() {
        return Err(format!("label index {} out of range", inst.label));
    }
    Ok(())
}
